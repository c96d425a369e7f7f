"""Control-affine dynamics xdot = f(x) + g(x) u with bounded inputs.

The input set U is either a box {u : |u_i| <= bounds_i} or a norm ball
{u : ||u|| <= bounds_0}.  Two presets cover the case studies: a planar
single integrator and a unicycle.  Both can hold position (0 is in U
and f vanishes), which is what lets reach sets over a time window
reduce to reach sets at a single time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["Dynamics", "single_integrator", "unicycle"]

BOX, BALL = "box", "ball"


@dataclass(frozen=True)
class Dynamics:
    kind: str
    n: int
    m: int
    input_kind: str
    bounds: tuple
    f: Callable
    g: Callable
    f_batch: Callable
    g_batch: Callable
    # input set assumed by set computations; "ball" makes reach sets of
    # the integrator rotation invariant (disks stay disks) while the
    # controller still draws from the full box
    reach_kind: str = BOX

    def deriv(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.f(x) + self.g(x) @ u

    def ball_speed(self) -> float:
        """Radius of the largest input ball inside U, the speed bound
        used when sets are computed analytically."""
        if self.input_kind == BALL:
            return self.bounds[0]
        return min(self.bounds)

    def fingerprint(self) -> str:
        return "%s(%s,%s,%s)" % (
            self.kind, self.input_kind, self.reach_kind,
            ",".join("%.17g" % b for b in self.bounds),
        )


def single_integrator(vmax: float = 1.0) -> Dynamics:
    """Planar integrator xdot = u with box bounds |u_i| <= vmax.

    Set computations (analytic and grid) use the inscribed input ball
    of radius vmax so that reach sets stay disks; the controller may
    still draw inputs from the full box.
    """
    eye = np.eye(2)

    def f(x):
        return np.zeros(2)

    def g(x):
        return eye

    def f_batch(pts):
        return np.zeros((pts.shape[0], 2))

    def g_batch(pts):
        return np.broadcast_to(eye, (pts.shape[0], 2, 2)).copy()

    return Dynamics("single_integrator", 2, 2, BOX, (vmax, vmax), f, g, f_batch, g_batch,
                    reach_kind=BALL)


def unicycle(vmax: float = 1.0, wmax: float = 1.0) -> Dynamics:
    """Unicycle (x1, x2, theta) with speed and turn-rate inputs:
    x1dot = u1 cos(theta), x2dot = u1 sin(theta), thetadot = u2."""

    def f(x):
        return np.zeros(3)

    def g(x):
        c, s = np.cos(x[2]), np.sin(x[2])
        return np.array([[c, 0.0], [s, 0.0], [0.0, 1.0]])

    def f_batch(pts):
        return np.zeros((pts.shape[0], 3))

    def g_batch(pts):
        out = np.zeros((pts.shape[0], 3, 2))
        out[:, 0, 0] = np.cos(pts[:, 2])
        out[:, 1, 0] = np.sin(pts[:, 2])
        out[:, 2, 1] = 1.0
        return out

    return Dynamics("unicycle", 3, 2, BOX, (vmax, wmax), f, g, f_batch, g_batch)
