"""Time-varying control barrier functions derived from tree fragments.

Each temporal fragment (an F or G operator node with its child set
node X) yields one barrier b(x, t) on the time domain

    [ min(t_e(P), start_lo(X)),  t_e(X) ]

where P is the set node above the fragment.  The barrier has up to two
segments:

  * a reach segment on [t_lo, start_hi(X)] whose zero superlevel set
    shrinks onto X as t approaches start_hi(X), so that satisfying the
    barrier forces the state into X by its latest start time, and
  * a hold segment on [start_hi(X), t_e(X)] equal to a value function
    of X itself, present whenever the obligation carries a duration.

Analytically the reach segment is a shrinking disk in squared form,

    b(x, t) = (r + speed * (t_reach - t))^2 - ||x_pos - c||^2,

matching a disk target that inflates backward in time at the input
speed.  On a grid the reach segment interpolates the stored backward
reach value function and the hold segment reuses its terminal slice,
so the two agree at the interface by construction.

When a controller fixes a set node start time online, the barrier is
shifted in time by the change in start_hi(X): evaluation becomes
b(x, t - delta) and the domain endpoints move by delta, with the
active window clamped so it never reaches back before the shift time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Dynamics
from .reach import ReachEngine, TimeValueFunction, as_disk
from .regions import Complement, GridRegion, Region, region_gradient, region_value
from .tree import TemporalFragment, Tree

__all__ = [
    "CbfEval",
    "ShrinkingDisk",
    "StaticDisk",
    "StaticRegion",
    "SliceBody",
    "Segment",
    "Cbf",
    "fragment_time_domain",
    "build_cbf_analytic",
    "build_cbf_grid",
    "build_cbfs",
    "check_predecessor_containment",
    "validate_cbf",
]

_EPS = 1e-9


@dataclass(frozen=True)
class CbfEval:
    value: float
    grad: np.ndarray
    d_dt: float


def _pos_quadratic(x, center):
    x = np.asarray(x, dtype=float)
    c = np.asarray(center, dtype=float)
    delta = x[: c.shape[0]] - c
    grad = np.zeros_like(x)
    grad[: c.shape[0]] = -2.0 * delta
    return float(delta @ delta), grad


@dataclass(frozen=True)
class ShrinkingDisk:
    """Squared-form disk whose radius r + speed * (t_reach - t) shrinks
    to r at t_reach."""

    center: tuple
    r_target: float
    t_reach: float
    speed: float

    def eval(self, x, t: float) -> CbfEval:
        slack = max(self.t_reach - t, 0.0)
        radius = self.r_target + self.speed * slack
        d2, grad = _pos_quadratic(x, self.center)
        d_dt = -2.0 * self.speed * radius if slack > 0.0 else 0.0
        return CbfEval(radius * radius - d2, grad, d_dt)


@dataclass(frozen=True)
class StaticDisk:
    """Squared-form disk, the hold segment behind a shrinking reach."""

    center: tuple
    radius: float

    def eval(self, x, t: float) -> CbfEval:
        d2, grad = _pos_quadratic(x, self.center)
        return CbfEval(self.radius * self.radius - d2, grad, 0.0)


@dataclass(frozen=True)
class StaticRegion:
    """Any region's value function held constant in time."""

    region: Region

    def eval(self, x, t: float) -> CbfEval:
        x = np.asarray(x, dtype=float)
        return CbfEval(
            region_value(self.region, x), region_gradient(self.region, x), 0.0
        )


@dataclass(frozen=True)
class SliceBody:
    """Stored backward reach value function; value and gradient
    interpolate the bracketing slices, the time derivative is the
    forward difference between them (backward at the last slice)."""

    tvf: TimeValueFunction

    def eval(self, x, t: float) -> CbfEval:
        x = np.asarray(x, dtype=float)
        return CbfEval(
            self.tvf.value(x, t), self.tvf.gradient(x, t), self.tvf.d_dt(x, t)
        )


@dataclass(frozen=True)
class Segment:
    t_lo: float
    t_hi: float
    body: object


@dataclass
class Cbf:
    """Barrier for one temporal fragment.

    `t_lo`/`t_hi` are the offline time domain.  `time_offset`
    accumulates online shifts: the barrier evaluated at time t uses the
    offline shape at t - time_offset, and the domain moves with the
    offset.  `active_clamp` keeps the active window from reaching back
    before the most recent shift (or before time zero).
    """

    fragment_index: int
    kind: str
    set_label: str
    segments: tuple
    t_lo: float
    t_hi: float
    time_offset: float = 0.0
    active_clamp: float = 0.0
    applied_start_hi: float = 0.0

    @property
    def label(self) -> str:
        return "b%d" % (self.fragment_index + 1)

    def window(self):
        """Effective active window [lo, hi] at the current offset."""
        return (
            max(self.t_lo + self.time_offset, self.active_clamp),
            self.t_hi + self.time_offset,
        )

    def active(self, t: float) -> bool:
        lo, hi = self.window()
        return lo - _EPS <= t <= hi + _EPS

    def shift(self, delta: float, now: float):
        self.time_offset += delta
        self.applied_start_hi += delta
        self.active_clamp = max(self.active_clamp, now)

    def eval(self, x, t: float) -> CbfEval:
        tau = t - self.time_offset
        tau = min(max(tau, self.t_lo), self.t_hi)
        seg = self.segments[0]
        for s in self.segments:
            if tau >= s.t_lo - _EPS:
                seg = s
        return seg.body.eval(x, tau)


def fragment_time_domain(tree: Tree, frag: TemporalFragment):
    """[min(t_e of the set node above the fragment, start_lo(X)), t_e(X)]."""
    x_node = tree.set_node(frag.set_id)
    above = tree.set_node(tree.op_node(frag.op_id).parent)
    return min(above.t_end, x_node.start_lo), x_node.t_end


def _assemble(tree, frag, reach_builder, hold_builder) -> Cbf:
    x_node = tree.set_node(frag.set_id)
    t_lo, t_hi = fragment_time_domain(tree, frag)
    t_reach = x_node.start_hi
    segments = []
    if t_reach > t_lo + _EPS:
        segments.append(Segment(t_lo, t_reach, reach_builder()))
        if t_hi > t_reach + _EPS:
            segments.append(Segment(t_reach, t_hi, hold_builder(True)))
    else:
        segments.append(Segment(t_lo, t_hi, hold_builder(False)))
    return Cbf(
        fragment_index=frag.index, kind=frag.kind, set_label=x_node.label,
        segments=tuple(segments), t_lo=t_lo, t_hi=t_hi,
        applied_start_hi=t_reach,
    )


def build_cbf_analytic(tree: Tree, frag: TemporalFragment, speed: float) -> Cbf:
    """Closed-form barrier for disk-like set nodes under integrator
    dynamics."""
    x_node = tree.set_node(frag.set_id)
    region = x_node.region

    def reach():
        if isinstance(region, Complement):
            raise ValueError(
                "analytic reach segments need a disk target, not a complement"
            )
        disk = as_disk(region)
        return ShrinkingDisk(disk.center, disk.radius, x_node.start_hi, speed)

    def hold(after_reach: bool):
        if after_reach:
            disk = as_disk(region)
            return StaticDisk(disk.center, disk.radius)
        return StaticRegion(region)

    return _assemble(tree, frag, reach, hold)


def build_cbf_grid(tree: Tree, frag: TemporalFragment, engine: ReachEngine) -> Cbf:
    """Grid barrier: backward reach value function onto the set node,
    then its terminal slice held constant."""
    x_node = tree.set_node(frag.set_id)
    t_lo, _ = fragment_time_domain(tree, frag)
    tvf_box = {}

    def reach():
        tvf = engine.reach_value_function(x_node.region, t_lo, x_node.start_hi)
        tvf_box["tvf"] = tvf
        return SliceBody(tvf)

    def hold(after_reach: bool):
        if after_reach:
            return StaticRegion(GridRegion(tvf_box["tvf"].fields[-1]))
        return StaticRegion(x_node.region)

    return _assemble(tree, frag, reach, hold)


def build_cbfs(tree: Tree, engine: ReachEngine):
    """One barrier per temporal fragment, index aligned with
    tree.fragments()."""
    out = []
    for frag in tree.fragments():
        if engine.kind == "analytic":
            out.append(build_cbf_analytic(tree, frag, engine.speed))
        else:
            out.append(build_cbf_grid(tree, frag, engine))
    return out


# ---------------------------------------------------------------------------
# Construction checks


def check_predecessor_containment(b_pred: Cbf, b_succ: Cbf, samples) -> float:
    """Largest violation of: wherever the predecessor barrier is
    nonnegative when the successor activates, the successor barrier is
    nonnegative too.  Nonpositive result means the check passes."""
    t0 = b_succ.t_lo + b_succ.time_offset
    worst = -np.inf
    for x in samples:
        if b_pred.eval(x, t0).value >= 0.0:
            worst = max(worst, -b_succ.eval(x, t0).value)
    return worst if np.isfinite(worst) else 0.0


def validate_cbf(cbf: Cbf, dyn: Dynamics, samples_x, samples_t, alpha=1.0) -> float:
    """Worst residual of the barrier condition

        sup_u [ <grad b, f + g u> + db/dt ] + alpha(b)  >=  0

    over the sampled (x, t) with b(x, t) >= 0.  The supremum is closed
    form for box and ball input sets.  `alpha` is a linear gain or a
    class K function of the barrier value; a function can certify
    barriers whose required decay is not linear in b, such as shrinking
    disks near their center.  Nonnegative (up to tolerance) means the
    barrier is valid on the samples.
    """
    gain = alpha if callable(alpha) else (lambda v, a=float(alpha): a * v)
    worst = np.inf
    bounds = np.asarray(dyn.bounds)
    for t in samples_t:
        if not cbf.active(t):
            continue
        for x in samples_x:
            ev = cbf.eval(x, t)
            if ev.value < 0.0:
                continue
            a = dyn.g(x).T @ ev.grad
            if dyn.input_kind == "box":
                sup = float(np.abs(a) @ bounds)
            else:
                sup = float(bounds[0] * np.linalg.norm(a))
            resid = ev.grad @ dyn.f(x) + sup + ev.d_dt + gain(ev.value)
            worst = min(worst, resid)
    return worst if np.isfinite(worst) else 0.0
