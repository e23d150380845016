"""Progression/clearance tradeoff study on an idealized circular plan.

The global plan is a fixed-radius arc around a single obstacle at the
center.  Committing to arc length d means cutting the corner along the
chord, and the closest the chord comes to the obstacle center is
c(d) = R*cos(d / (2R)) (clamped at 0), so increasing progression
monotonically costs clearance.  The sweep minimizes
    total(d) = obstacle_gain * exp(-obstacle_decay * c(d))
             + progress_gain * exp(-progress_decay * d)
over d by dense grid search for every (progress_decay, progress_gain) pair
and reports where the optimum lands.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .costmap import CostParams

EXTENTS = {"quarter": 0.5 * math.pi, "semi": math.pi, "full": 2.0 * math.pi}


@dataclass(frozen=True)
class ClearanceModel:
    radius: float = 2.0
    extent: str = "semi"        # quarter | semi | full circle

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("plan radius must be > 0")
        if self.extent not in EXTENTS:
            raise ValueError(f"extent must be one of {sorted(EXTENTS)}")

    @property
    def arc_length(self) -> float:
        return EXTENTS[self.extent] * self.radius


def model_clearance(d, model: ClearanceModel):
    """Chord clearance c(d) = R*cos(d/(2R)), clamped at 0.

    Accepts a scalar or array d in [0, arc_length]; out-of-range raises.
    """
    d_arr = np.asarray(d, dtype=float)
    if (d_arr < -1e-12).any() or (d_arr > model.arc_length + 1e-12).any():
        raise ValueError("arc length d outside the plan extent")
    c = model.radius * np.cos(d_arr / (2.0 * model.radius))
    c = np.maximum(c, 0.0)
    return float(c) if np.isscalar(d) else c


@dataclass(frozen=True)
class SweepRow:
    progress_decay: float     # CSV column "lambda"
    progress_gain: float      # CSV column "B"
    radius: float             # CSV column "R"
    best_progress: float      # CSV column "d_star"
    best_clearance: float     # CSV column "c_star"
    best_cost: float          # CSV column "J_star"


def sweep(base: CostParams, progress_decays, progress_gains,
          model: ClearanceModel = ClearanceModel(), *,
          step: float = 0.001) -> list[SweepRow]:
    """Dense-grid minimization over d for every (decay, gain) pair.

    Rows come back in (decay, gain) input order regardless of how the grid
    is evaluated; argmin ties resolve to the smallest d.
    """
    if len(list(progress_decays)) == 0 or len(list(progress_gains)) == 0:
        raise ValueError("parameter grids must be non-empty")
    d = np.arange(0.0, model.arc_length + step / 2.0, step)
    c = model_clearance(d, model)
    obstacle = base.obstacle_gain * np.exp(-base.obstacle_decay * c)
    rows = []
    for lam in progress_decays:
        for gain in progress_gains:
            total = obstacle + gain * np.exp(-lam * d)
            i = int(np.argmin(total))
            rows.append(SweepRow(float(lam), float(gain), model.radius,
                                 float(d[i]), float(c[i]), float(total[i])))
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    """Render sweep rows as CSV with the documented column order."""
    buf = io.StringIO()
    buf.write("lambda,B,R,d_star,c_star,J_star\n")
    for r in rows:
        buf.write(f"{r.progress_decay:.6g},{r.progress_gain:.6g},{r.radius:.6g},"
                  f"{r.best_progress:.6f},{r.best_clearance:.6f},{r.best_cost:.6f}\n")
    return buf.getvalue()
