"""Live state streaming and operator command ingestion.

Wire protocol (JSON text frames over a WebSocket at /ws, all frames carry
"v": 1 and "type"):

server -> client  "snapshot": tick, robot [x, y, yaw], setpoint, mode, goal,
    plan {tick, points}, samples [[x, y, cost-or-null], ...], scan (decimated
    world points of finite beams), obstacles [[x, y, r], ...], metrics {...},
    keyframe flag, grid {width, height, resolution, origin} and map_diff --
    run-length encoded [start, length, value] runs over the row-major
    flattened class grid (0 free, 1 occupied, 2 unknown).  A keyframe's runs
    cover the whole grid; diffs cover only cells that changed since the
    previous snapshot in the stream.  A keyframe is sent to every new
    connection and at least every KEYFRAME_EVERY snapshots.
server -> client  "ack": {command}, "error": {message}.
client -> server  "set_goal" {x, y}, "pause", "resume",
    "set_param" {name, value} with name in the whitelist.

Commands are validated on receipt and applied by the sim loop at the next
tick boundary; a run with no connected clients is bit-identical to headless.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from dataclasses import dataclass

import numpy as np

from .local_planner import MODE_ROTATE
from .runner import CommandError, SimSession

PROTOCOL_VERSION = 1
KEYFRAME_EVERY = 100
SCAN_DECIMATION = 4


def rle_encode(flat: np.ndarray, changed: np.ndarray | None = None) -> list[list[int]]:
    """[start, length, value] runs over `flat`, restricted to `changed` cells.

    Consecutive changed cells with equal values merge into one run.
    """
    if changed is None:
        changed = np.ones(len(flat), dtype=bool)
    idx = np.flatnonzero(changed)
    if len(idx) == 0:
        return []
    vals = flat[idx]
    # New run whenever the index jumps or the value changes.
    breaks = np.flatnonzero((np.diff(idx) != 1) | (np.diff(vals) != 0)) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [len(idx)]])
    return [[int(idx[s]), int(e - s), int(vals[s])] for s, e in zip(starts, ends)]


def rle_apply(flat: np.ndarray, runs: list[list[int]]) -> None:
    for start, length, value in runs:
        flat[start:start + length] = value


@dataclass
class Snapshot:
    """One tick's immutable view of the sim, plus the map delta."""

    tick: int
    robot: tuple[float, float, float]
    setpoint: tuple[float, float] | None
    mode: str | None
    goal: tuple[float, float] | None
    plan_tick: int | None
    plan_points: list[list[float]]
    samples: list[list]
    scan_points: list[list[float]]
    obstacles: list[list[float]]
    metrics: dict
    grid_meta: dict
    classes: np.ndarray           # full class grid at this tick
    map_runs: list[list[int]]     # diff runs vs the previous stream snapshot
    keyframe: bool


class SnapshotStream:
    """Builds tick-ordered snapshots with map diffs against its own history."""

    def __init__(self):
        self._prev_classes: np.ndarray | None = None
        self._count = 0

    def build(self, session: SimSession) -> Snapshot:
        st = session.state
        spec = session.map.spec
        classes = session.map.classes()
        flat = classes.ravel()
        keyframe = self._prev_classes is None or self._count % KEYFRAME_EVERY == 0
        if keyframe:
            runs = rle_encode(flat)
        else:
            runs = rle_encode(flat, flat != self._prev_classes)
        self._prev_classes = flat.copy()
        self._count += 1

        decision = session.last_decision
        goal = session.active_goal()
        samples = []
        for s in session.last_samples:
            cost = None if not s.feasible else round(s.total_cost, 3)
            samples.append([round(float(s.target[0]), 4), round(float(s.target[1]), 4), cost])
        scan_points = []
        if session.last_scan is not None and not session.last_scan.in_collision:
            pts = session.last_scan.endpoints()[::SCAN_DECIMATION]
            scan_points = [[round(float(x), 4), round(float(y), 4)] for x, y in pts]
        return Snapshot(
            tick=st.tick,
            robot=(st.pose.x, st.pose.y, st.pose.yaw),
            setpoint=None if st.setpoint is None else (float(st.setpoint[0]), float(st.setpoint[1])),
            mode=None if decision is None or st.setpoint is None else decision.mode,
            goal=None if goal is None else (float(goal[0]), float(goal[1])),
            plan_tick=None if session.plan is None else session.plan.creation_tick,
            plan_points=[] if session.plan is None else
                [[round(float(x), 4), round(float(y), 4)] for x, y in session.plan.polyline.points],
            samples=samples,
            scan_points=scan_points,
            obstacles=[[float(c[0]), float(c[1]), r] for c, r in st.world.active_dynamic()],
            metrics={
                "collisions": session.collisions,
                "min_clearance": None if session.min_clearance == float("inf")
                                 else round(session.min_clearance, 4),
                "path_length": round(session.path_length, 4),
                "replans": session.replans,
                "setpoint_switches": session.setpoint_switches,
                "goals_reached": len(session.goal_results),
                "done": session.done,
                "paused": session.paused,
                "stuck": session.stuck,
            },
            grid_meta={"width": spec.width, "height": spec.height,
                       "resolution": spec.resolution,
                       "origin": [spec.origin[0], spec.origin[1]]},
            classes=classes,
            map_runs=runs,
            keyframe=keyframe,
        )


def encode_snapshot(snapshot: Snapshot, *, force_keyframe: bool = False) -> str:
    """Single JSON text frame for one snapshot."""
    keyframe = snapshot.keyframe or force_keyframe
    runs = rle_encode(snapshot.classes.ravel()) if force_keyframe and not snapshot.keyframe \
        else snapshot.map_runs
    doc = {
        "v": PROTOCOL_VERSION,
        "type": "snapshot",
        "tick": snapshot.tick,
        "keyframe": keyframe,
        "grid": snapshot.grid_meta,
        "robot": list(snapshot.robot),
        "setpoint": None if snapshot.setpoint is None else list(snapshot.setpoint),
        "mode": snapshot.mode,
        "goal": None if snapshot.goal is None else list(snapshot.goal),
        "plan": None if snapshot.plan_tick is None else
            {"tick": snapshot.plan_tick, "points": snapshot.plan_points},
        "samples": snapshot.samples,
        "scan": snapshot.scan_points,
        "obstacles": snapshot.obstacles,
        "map_diff": runs,
        "metrics": snapshot.metrics,
    }
    return json.dumps(doc, separators=(",", ":"))


def decode_snapshot(frame: str) -> dict:
    """Parse a snapshot frame back to a dict (schema-checked)."""
    doc = json.loads(frame)
    if doc.get("v") != PROTOCOL_VERSION or doc.get("type") != "snapshot":
        raise ValueError("not a v1 snapshot frame")
    return doc


def error_frame(message: str) -> str:
    return json.dumps({"v": PROTOCOL_VERSION, "type": "error", "message": message},
                      separators=(",", ":"))


def ack_frame(command: str) -> str:
    return json.dumps({"v": PROTOCOL_VERSION, "type": "ack", "command": command},
                      separators=(",", ":"))


def apply_command(session: SimSession, command: dict) -> None:
    """Validate and queue one operator command (effective next tick boundary)."""
    session.submit_command(command)


class TelemetryHub:
    """Single-producer snapshot slot shared between sim loop and websockets.

    Bounded by construction: only the latest snapshot is retained
    (latest-wins); slow consumers skip intermediate frames and re-sync on
    keyframes.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._latest: Snapshot | None = None
        self._seq = 0

    def publish(self, snapshot: Snapshot) -> None:
        with self._lock:
            self._latest = snapshot
            self._seq += 1

    def latest(self) -> tuple[int, Snapshot | None]:
        with self._lock:
            return self._seq, self._latest


class SimServer:
    """Owns the sim thread and the wall-clock pacing for `serve`."""

    def __init__(self, session: SimSession, *, rate: float = 1.0):
        self.session = session
        self.hub = TelemetryHub()
        self.rate = rate
        self.stream = SnapshotStream()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, name="sim-loop", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def _loop(self) -> None:
        dt = self.session.state.dt
        period = dt / max(self.rate, 1e-6)
        next_tick = time.monotonic()
        while not self._stop.is_set():
            if self.session.paused or self.session.done:
                # Ticks frozen; keep draining commands and publishing state.
                self.session.process_commands()
                self.hub.publish(self.stream.build(self.session))
                time.sleep(0.05)
                continue
            self.session.step()
            self.hub.publish(self.stream.build(self.session))
            next_tick += period
            delay = next_tick - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            else:
                next_tick = time.monotonic()


def create_app(server: SimServer):
    """FastAPI app exposing /ws, /scenario and /healthz."""
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect

    app = FastAPI()

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.get("/scenario")
    def scenario():
        return server.session.scenario.to_dict()

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        await websocket.accept()
        seq, snap = server.hub.latest()
        if snap is not None:
            await websocket.send_text(encode_snapshot(snap, force_keyframe=True))
        last_seq = seq

        async def sender():
            nonlocal last_seq
            while True:
                seq, snap = server.hub.latest()
                if snap is not None and seq != last_seq:
                    last_seq = seq
                    await websocket.send_text(encode_snapshot(snap))
                await asyncio.sleep(0.02)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                text = await websocket.receive_text()
                try:
                    command = json.loads(text)
                except json.JSONDecodeError:
                    await websocket.send_text(error_frame("invalid JSON"))
                    continue
                try:
                    apply_command(server.session, command)
                except CommandError as e:
                    await websocket.send_text(error_frame(str(e)))
                else:
                    await websocket.send_text(ack_frame(command.get("type", "")))
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()

    return app


def serve(scenario, *, host: str = "127.0.0.1", port: int = 8000, rate: float = 1.0) -> None:
    """Run the sim loop and telemetry service until interrupted."""
    import uvicorn

    server = SimServer(SimSession(scenario), rate=rate)
    app = create_app(server)
    server.start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        server.stop()
