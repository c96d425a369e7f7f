"""Offline satisfaction checks for recorded trajectories.

Three independent views of the same question:

* `stl_satisfied` evaluates the formula semantics directly on the
  sampled trajectory, linearly interpolating predicate margins between
  samples and taking quantifier extrema over the sample times inside
  each window plus its endpoints.
* `path_satisfied` checks one complete root-to-leaf path of a tree:
  it searches over the time instants of the eventuality operators on
  the path (on a fixed grid) for a schedule under which the state
  occupies every set node throughout its required interval.
* `tree_satisfied` runs the same search over the whole tree at once,
  so a time chosen for a shared eventuality is common to all paths
  through it.

All three run on (times, states) arrays only; they never look at the
inputs, so they can audit trajectories produced by any controller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formula import (
    And,
    Eventually,
    Formula,
    NegPredicate,
    Or,
    Predicate,
    TrueFormula,
    Until,
    Always,
    horizon,
)
from .regions import region_value
from .tree import OpNode, Tree

__all__ = ["Verdict", "stl_satisfied", "path_satisfied", "tree_satisfied"]

_EPS = 1e-9


@dataclass(frozen=True)
class Verdict:
    satisfied: bool
    margin: float
    tolerance: float
    witnesses: dict

    def __bool__(self) -> bool:
        return self.satisfied


def stl_satisfied(times, states, phi: Formula, predicates: dict, t0: float = 0.0) -> Verdict:
    """Margin of the formula at time t0 along the sampled trajectory.

    The verdict is satisfied when the margin is nonnegative; `tolerance`
    bounds the interpolation error (half the largest slope of any
    predicate margin times the sample spacing), so margins inside
    [-tolerance, tolerance] should be treated as marginal.
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    if times.ndim != 1 or states.shape[0] != times.shape[0]:
        raise ValueError("times and states must have matching leading length")
    end = t0 + horizon(phi)
    if end > times[-1] + _EPS:
        raise ValueError(
            f"trajectory ends at t={times[-1]:g} but the formula needs t={end:g}")

    signals = {name: region_value(region, states)
               for name, region in predicates.items()}
    witnesses: dict = {}
    cache: dict = {}

    def interp(name: str, tq: float) -> float:
        return float(np.interp(tq, times, signals[name]))

    def qtimes(lo: float, hi: float) -> np.ndarray:
        if hi - lo <= _EPS:
            return np.array([lo])
        inner = times[(times > lo + _EPS) & (times < hi - _EPS)]
        return np.concatenate([[lo], inner, [hi]])

    def ev(node: Formula, t: float) -> float:
        key = (id(node), round(t, 10))
        if key in cache:
            return cache[key]
        val = _ev(node, t)
        cache[key] = val
        return val

    def _ev(node: Formula, t: float) -> float:
        if isinstance(node, TrueFormula):
            return np.inf
        if isinstance(node, Predicate):
            return interp(node.name, t)
        if isinstance(node, NegPredicate):
            return -interp(node.name, t)
        if isinstance(node, And):
            return min(ev(c, t) for c in node.children)
        if isinstance(node, Or):
            return max(ev(c, t) for c in node.children)
        if isinstance(node, Eventually):
            cand = qtimes(t + node.interval.lo, t + node.interval.hi)
            vals = [ev(node.child, tau) for tau in cand]
            best = int(np.argmax(vals))
            if abs(t - t0) < _EPS:
                witnesses[f"F[{node.interval.lo:g},{node.interval.hi:g}]"] = float(cand[best])
            return vals[best]
        if isinstance(node, Always):
            cand = qtimes(t + node.interval.lo, t + node.interval.hi)
            return min(ev(node.child, tau) for tau in cand)
        if isinstance(node, Until):
            cand = qtimes(t + node.interval.lo, t + node.interval.hi)
            # running minimum of the left operand over [t, tau]
            all_s = qtimes(t, float(cand[-1]))
            best_val, best_tau = -np.inf, cand[0]
            hold, si = np.inf, 0
            for tau in cand:
                while si < len(all_s) and all_s[si] <= tau + _EPS:
                    hold = min(hold, ev(node.left, float(all_s[si])))
                    si += 1
                val = min(ev(node.right, float(tau)),
                          hold, ev(node.left, float(tau)))
                if val > best_val:
                    best_val, best_tau = val, tau
            if abs(t - t0) < _EPS:
                witnesses[f"U[{node.interval.lo:g},{node.interval.hi:g}]"] = float(best_tau)
            return best_val
        raise TypeError(f"cannot evaluate {type(node).__name__}")

    margin = float(ev(phi, t0))
    return Verdict(margin >= 0.0, margin, _interp_tolerance(times, signals), witnesses)


def _interp_tolerance(times, signals) -> float:
    if len(times) < 2:
        return 0.0
    gaps = np.diff(times)
    worst = 0.0
    for sig in signals.values():
        slopes = np.abs(np.diff(sig)) / np.maximum(gaps, _EPS)
        if slopes.size:
            worst = max(worst, float(np.max(slopes)))
    return 0.5 * worst * float(np.max(gaps))


class _TreeChecker:
    """Shared machinery for path and whole-tree satisfaction."""

    def __init__(self, tree: Tree, times, states, t0: float, step: float | None):
        self.tree = tree
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float)
        self.t0 = t0
        if step is None:
            step = float(np.median(np.diff(self.times))) if len(self.times) > 1 else 0.05
        self.step = step
        self.values: dict[int, np.ndarray] = {}

    def _signal(self, set_id: int) -> np.ndarray:
        if set_id not in self.values:
            node = self.tree.set_node(set_id)
            self.values[set_id] = region_value(node.region, self.states)
        return self.values[set_id]

    def occupied(self, set_id: int, lo: float, hi: float) -> bool:
        """True when the interpolated margin of the node's set stays
        nonnegative over [lo, hi]."""
        if hi > self.times[-1] + _EPS or lo < self.times[0] - _EPS:
            return False
        sig = self._signal(set_id)
        if np.interp(lo, self.times, sig) < -_EPS:
            return False
        if hi > lo and np.interp(hi, self.times, sig) < -_EPS:
            return False
        i0 = int(np.searchsorted(self.times, lo + _EPS))
        i1 = int(np.searchsorted(self.times, hi - _EPS, side="right"))
        if i1 > i0 and float(self._signal(set_id)[i0:i1].min()) < -_EPS:
            return False
        return True

    def reachable_somewhere(self, set_id: int, lo: float, hi: float) -> bool:
        """Cheap necessary condition: the node's margin is nonnegative
        at some instant of [lo, hi]."""
        hi = min(hi, float(self.times[-1]))
        if lo > hi + _EPS:
            return False
        sig = self._signal(set_id)
        if np.interp(lo, self.times, sig) >= -_EPS:
            return True
        if np.interp(hi, self.times, sig) >= -_EPS:
            return True
        i0 = int(np.searchsorted(self.times, lo))
        i1 = int(np.searchsorted(self.times, hi, side="right"))
        return i1 > i0 and float(sig[i0:i1].max()) >= -_EPS

    def taus(self, lo: float, hi: float) -> np.ndarray:
        if hi - lo <= _EPS:
            return np.array([lo])
        grid = np.arange(lo, hi, self.step)
        return np.append(grid, hi)

    def sat(self, set_id: int, lo: float, hi: float, follow: dict | None) -> bool:
        """The state occupies set_id over [lo, hi] and the requirement
        propagates through its operator child.  `follow` restricts each
        Boolean operator to a single child (path semantics); None means
        all children of an AND and any child of an OR."""
        if not self.occupied(set_id, lo, hi):
            return False
        node = self.tree.set_node(set_id)
        if not node.children:
            return True
        op = self.tree.op_node(node.children[0])
        kids = op.children
        if follow is not None and op.id in follow:
            kids = (follow[op.id],)
        if op.kind == "and":
            return all(self.sat(c, lo, hi, follow) for c in kids)
        if op.kind == "or":
            return any(self.sat(c, lo, hi, follow) for c in kids)
        a, b = op.interval.lo, op.interval.hi
        child = kids[0]
        if op.kind == "G":
            return self.sat(child, lo + a, hi + b, follow)
        if not self.reachable_somewhere(child, lo + a, hi + b):
            return False
        return any(self.sat(child, lo + tau, hi + tau, follow)
                   for tau in self.taus(a, b))


def path_satisfied(tree: Tree, path: tuple, times, states,
                   t0: float = 0.0, step: float | None = None) -> bool:
    """Whether the trajectory realizes one complete root-to-leaf path:
    there is a choice of eventuality instants along the path under which
    the state sits inside every set node for its whole required
    interval.  Sibling branches off the path are ignored."""
    checker = _TreeChecker(tree, times, states, t0, step)
    follow = {}
    for prev, nxt in zip(path, path[1:]):
        if isinstance(tree.nodes[prev], OpNode):
            follow[prev] = nxt
    return checker.sat(path[0], t0, t0, follow)


def tree_satisfied(tree: Tree, times, states,
                   t0: float = 0.0, step: float | None = None) -> bool:
    """Whether the trajectory realizes the whole tree: every path of
    some admissible disjunct, with eventuality instants shared where
    paths share a prefix."""
    checker = _TreeChecker(tree, times, states, t0, step)
    return checker.sat(tree.root, t0, t0, None)
