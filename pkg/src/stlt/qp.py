"""Small dense quadratic programs solved exactly.

The online controller solves, at every step,

    min_u (u - u_nom)^T Q (u - u_nom)
    s.t.  a_i . u >= c_i            (one row per active barrier)
          |u_j| <= u_max_j

with Q positive definite and at most a handful of rows.  For input
dimension m <= 3 the optimum is found by exhaustive enumeration of
candidate active sets: for every subset of at most m constraints the
equality-constrained KKT system is solved, and the first candidate
that is primal feasible with nonnegative multipliers is the global
optimum (the problem is convex, so KKT points are optimal).  When no
candidate passes, a phase-1 linear program run by vertex enumeration
decides between genuine infeasibility and a numerical near-miss.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

__all__ = ["QpResult", "solve_qp", "solve_qp_soft"]

_FEAS_TOL = 1e-9
_DUAL_TOL = 1e-9


@dataclass(frozen=True)
class QpResult:
    status: str  # "ok" | "infeasible"
    u: np.ndarray | None
    objective: float
    active: tuple
    multipliers: np.ndarray | None
    slack: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _standard_form(rows_a, rows_c, u_max):
    """Constraints as G u <= h: barrier rows negated, then the box."""
    m = len(u_max)
    rows_a = np.asarray(rows_a, dtype=float).reshape(-1, m)
    rows_c = np.asarray(rows_c, dtype=float).reshape(-1)
    eye = np.eye(m)
    G = np.vstack([-rows_a, eye, -eye])
    h = np.concatenate([-rows_c, np.asarray(u_max, float), np.asarray(u_max, float)])
    return G, h


def solve_qp(rows_a, rows_c, u_max, u_nom=None, Q=None) -> QpResult:
    """Exact active-set enumeration.  rows_a is (k, m), rows_c is (k,),
    u_max the per-component box bound.  Returns status "infeasible"
    (no exception) when the constraints admit no point.
    """
    m = len(u_max)
    if u_nom is None:
        u_nom = np.zeros(m)
    if Q is None:
        Q = np.eye(m)
    u_nom = np.asarray(u_nom, dtype=float)
    Q = np.asarray(Q, dtype=float)
    G, h = _standard_form(rows_a, rows_c, u_max)
    nc = G.shape[0]
    # one tolerance per constraint, so a single huge bound (the slack
    # column of the soft program, say) cannot loosen the others
    feas_tol = _FEAS_TOL * np.maximum(1.0, np.abs(h))
    scale = max(1.0, float(np.max(np.abs(h[: len(rows_c)]))) if len(rows_c) else 1.0)

    best = _enumerate_active_sets(Q, u_nom, G, h, m, nc, feas_tol)
    if best is not None:
        return best
    # Nothing passed: decide infeasible vs numerically marginal.
    if _phase1_min_slack(G[: len(rows_c)], h[: len(rows_c)], u_max) > 1e-7 * scale:
        return QpResult("infeasible", None, np.inf, (), None)
    loose = _enumerate_active_sets(Q, u_nom, G, h, m, nc, 1e4 * feas_tol)
    if loose is not None:
        return loose
    return QpResult("infeasible", None, np.inf, (), None)


def _enumerate_active_sets(Q, u_nom, G, h, m, nc, feas_tol):
    grad_const = 2.0 * Q @ u_nom
    for size in range(m + 1):
        for S in combinations(range(nc), size):
            GS = G[list(S)]
            if size:
                kkt = np.block([[2.0 * Q, GS.T], [GS, np.zeros((size, size))]])
                rhs = np.concatenate([grad_const, h[list(S)]])
                try:
                    sol = np.linalg.solve(kkt, rhs)
                except np.linalg.LinAlgError:
                    continue
                u, lam = sol[:m], sol[m:]
                if np.any(lam < -_DUAL_TOL * max(1.0, np.max(np.abs(lam)))):
                    continue
            else:
                u, lam = u_nom.copy(), np.zeros(0)
            if np.any(G @ u - h > feas_tol):
                continue
            diff = u - u_nom
            return QpResult("ok", u, float(diff @ Q @ diff), S, lam)
    return None


def _phase1_min_slack(A, c, u_max) -> float:
    """Minimal shared slack s >= 0 with a_i . u + s >= c_i and u in the
    box, found by enumerating vertices of the (u, s) polyhedron.  Zero
    means the original rows are feasible."""
    m = len(u_max)
    if A.shape[0] == 0:
        return 0.0
    # constraints on z = (u, s), all as G z <= h
    rows = []
    rhs = []
    for a, ci in zip(A, c):  # A is already -rows_a, c is -rows_c
        rows.append(np.concatenate([a, [-1.0]]))
        rhs.append(ci)
    for j in range(m):
        e = np.zeros(m + 1)
        e[j] = 1.0
        rows.append(e.copy())
        rhs.append(u_max[j])
        rows.append(-e)
        rhs.append(u_max[j])
    e = np.zeros(m + 1)
    e[m] = -1.0
    rows.append(e)
    rhs.append(0.0)
    G = np.asarray(rows)
    h = np.asarray(rhs)
    d = m + 1
    scale = max(1.0, float(np.max(np.abs(h))))
    best = np.inf
    for S in combinations(range(G.shape[0]), d):
        GS = G[list(S)]
        try:
            z = np.linalg.solve(GS, h[list(S)])
        except np.linalg.LinAlgError:
            continue
        if np.any(G @ z - h > 1e-9 * scale):
            continue
        best = min(best, z[-1])
    return float(max(best, 0.0))


def solve_qp_soft(rows_a, rows_c, u_max, u_nom=None, Q=None, penalty: float = 1e6) -> QpResult:
    """Relaxed program with one shared slack s >= 0 added to every
    row's right side and penalized by `penalty` * s^2.  Always feasible;
    result.slack reports how much relaxation was needed."""
    m = len(u_max)
    if u_nom is None:
        u_nom = np.zeros(m)
    if Q is None:
        Q = np.eye(m)
    rows_a = np.asarray(rows_a, dtype=float).reshape(-1, m)
    rows_c = np.asarray(rows_c, dtype=float).reshape(-1)
    k = rows_a.shape[0]
    aug_a = np.hstack([rows_a, np.ones((k, 1))])
    aug_a = np.vstack([aug_a, np.concatenate([np.zeros(m), [1.0]])])
    aug_c = np.concatenate([rows_c, [0.0]])
    aug_q = np.zeros((m + 1, m + 1))
    aug_q[:m, :m] = np.asarray(Q, dtype=float)
    aug_q[m, m] = penalty
    aug_nom = np.concatenate([np.asarray(u_nom, float), [0.0]])
    aug_max = np.concatenate([np.asarray(u_max, float), [1e9]])
    res = solve_qp(aug_a, aug_c, aug_max, aug_nom, aug_q)
    if not res.ok:
        return res
    return QpResult(
        "ok", res.u[:m], res.objective, res.active, res.multipliers,
        slack=float(res.u[m]),
    )
