"""Independently written oracles and corpus generators for the tests.

Nothing in here calls back into the code it is used to check: closed
forms are derived by hand from the construction rules, searches are
exhaustive, and random corpora are driven by seeds fixed in the tests.
"""

from __future__ import annotations

import numpy as np

# ---------------------------------------------------------------------------
# Hand-derived barrier table for the bundled example1_integrator scenario.
#
# The scenario asks for F[0,15](G[2,10] mu1 | mu2 U[5,10] mu3) with unit
# speed, mu1 = disk((-4,-4), 1), mu2 = disk((4,0), 4), mu3 = disk((1,-4), 2).
# Each barrier is quadratic: while reaching a disk of radius r whose
# occupation must start by time T, b = (r + (T - t))^2 - |x - c|^2; once
# holding, b = r^2 - |x - c|^2.


def _d2(x, cx, cy):
    return (x[0] - cx) ** 2 + (x[1] - cy) ** 2


def example1_barrier_table():
    """Five (function, t_lo, t_hi) triples: b_i(x, t) hand-derived."""

    def b1(x, t):  # reach disk((-4,-4), 3) by 15: radius 3 + (15 - t)
        return (18.0 - t) ** 2 - _d2(x, -4.0, -4.0)

    def b2(x, t):  # reach mu1 by 17 (radius 1 + (17 - t)), then hold
        if t <= 17.0:
            return (18.0 - t) ** 2 - _d2(x, -4.0, -4.0)
        return 1.0 - _d2(x, -4.0, -4.0)

    def b3(x, t):  # reach disk((4,0), 4) by 15: radius 4 + (15 - t)
        return (19.0 - t) ** 2 - _d2(x, 4.0, 0.0)

    def b4(x, t):  # reach mu2 by 15 (same profile as b3), then hold
        if t <= 15.0:
            return (19.0 - t) ** 2 - _d2(x, 4.0, 0.0)
        return 16.0 - _d2(x, 4.0, 0.0)

    def b5(x, t):  # reach mu3 by 25: radius 2 + (25 - t)
        return (27.0 - t) ** 2 - _d2(x, 1.0, -4.0)

    return [
        (b1, 0.0, 15.0),
        (b2, 2.0, 25.0),
        (b3, 0.0, 15.0),
        (b4, 0.0, 25.0),
        (b5, 5.0, 25.0),
    ]


# ---------------------------------------------------------------------------
# Grid-search oracle for the box-constrained projection QP.


def qp_grid_oracle(rows_a, rows_c, u_max, u_nom, n=201, levels=4, span_cells=6.0):
    """Best feasible objective by exhaustive 201 x 201 search, refined by
    zooming the grid around the incumbent.  Returns (objective, point) or
    (None, None) when no grid point is feasible."""
    u_max = np.asarray(u_max, dtype=float)
    u_nom = np.asarray(u_nom, dtype=float)
    rows_a = [np.asarray(a, dtype=float) for a in rows_a]
    lo, hi = -u_max.copy(), u_max.copy()
    best_u = None
    for _ in range(levels):
        g0 = np.linspace(lo[0], hi[0], n)
        g1 = np.linspace(lo[1], hi[1], n)
        uu0, uu1 = np.meshgrid(g0, g1, indexing="ij")
        pts = np.stack([uu0.ravel(), uu1.ravel()], axis=1)
        ok = np.ones(len(pts), dtype=bool)
        for a, c in zip(rows_a, rows_c):
            ok &= pts @ a >= c - 1e-12
        if not ok.any():
            return None, None
        dist = ((pts - u_nom) ** 2).sum(axis=1)
        dist[~ok] = np.inf
        k = int(np.argmin(dist))
        best_u = pts[k]
        span = np.array([g0[1] - g0[0], g1[1] - g1[0]]) * span_cells
        lo = np.maximum(best_u - span, -u_max)
        hi = np.minimum(best_u + span, u_max)
    return float(((best_u - u_nom) ** 2).sum()), best_u


def qp_constraint_violation(rows_a, rows_c, u_max, u):
    """Largest violation of the rows and the box at u (0 when feasible)."""
    worst = 0.0
    for a, c in zip(rows_a, rows_c):
        worst = max(worst, c - float(np.asarray(a) @ u))
    worst = max(worst, float(np.max(np.abs(u) - np.asarray(u_max))))
    return worst


def kkt_stationarity(rows_a, rows_c, u_max, u_nom, result) -> float:
    """Norm of the stationarity residual 2(u - u_nom) + G^T lambda, built
    from the multipliers the solver reports for its active set."""
    m = len(u_max)
    rows_a = np.asarray(rows_a, dtype=float).reshape(-1, m)
    eye = np.eye(m)
    G = np.vstack([-rows_a, eye, -eye])
    grad = 2.0 * (np.asarray(result.u) - np.asarray(u_nom))
    for idx, lam in zip(result.active, result.multipliers):
        grad = grad + lam * G[idx]
    return float(np.linalg.norm(grad))


# ---------------------------------------------------------------------------
# Random formulas over three nested disks, and random system trajectories.
#
# The predicates are nested (p inside q inside r) so that every
# intersection of them reduces to a disk and the analytic reach engine
# can handle any formula the generator emits.


def nested_disk_predicates():
    from stlt.regions import Disk

    return {
        "p": Disk((0.0, 0.0), 1.5),
        "q": Disk((0.5, 0.0), 3.0),
        "r": Disk((0.0, 0.5), 5.0),
    }


def _interval_text(rng) -> str:
    lo = int(rng.integers(0, 3))
    width = int(rng.integers(1, 4))
    return "[%d,%d]" % (lo, lo + width)


def random_formula_text(rng, depth: int = 2) -> str:
    """Formula text over predicates p, q, r with integer windows."""
    roll = rng.random()
    if depth == 0 or roll < 0.25:
        return str(rng.choice(["p", "q", "r"]))
    if roll < 0.45:
        return "F%s (%s)" % (_interval_text(rng), random_formula_text(rng, depth - 1))
    if roll < 0.65:
        return "G%s (%s)" % (_interval_text(rng), random_formula_text(rng, depth - 1))
    if roll < 0.80:
        return "(%s) & (%s)" % (
            random_formula_text(rng, depth - 1),
            random_formula_text(rng, depth - 1),
        )
    if roll < 0.90:
        return "(%s) | (%s)" % (
            random_formula_text(rng, depth - 1),
            random_formula_text(rng, depth - 1),
        )
    return "(%s) U%s (%s)" % (
        random_formula_text(rng, depth - 1),
        _interval_text(rng),
        random_formula_text(rng, depth - 1),
    )


def simulate_integrator(rng, t_end: float, dt: float, x0, vmax: float):
    """Sampled single-integrator run under piecewise-constant random
    inputs clipped to the speed ball."""
    n = int(round(t_end / dt)) + 1
    times = np.arange(n) * dt
    states = np.empty((n, 2))
    states[0] = np.asarray(x0, dtype=float)

    def draw():
        u = rng.uniform(-vmax, vmax, 2)
        return u * min(1.0, vmax / max(float(np.linalg.norm(u)), 1e-9))

    u = draw()
    for k in range(1, n):
        if k % 12 == 0:
            u = draw()
        states[k] = states[k - 1] + dt * u
    return times, states


# ---------------------------------------------------------------------------
# Brute-force window membership for a single integrator and a disk:
# enumerate straight-line controls (direction x magnitude grid) and park
# strategies, which are sufficient families for this plant.


def brute_force_disk_window(x, center, radius, speed, window_lo, window_hi,
                            kind, n_dir=360, tol=1e-9) -> bool:
    """Can the state visit the disk at some time of the window ("F") or
    occupy it through the whole window ("G")?"""
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    angles = np.linspace(0.0, 2.0 * np.pi, n_dir, endpoint=False)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    mags = np.array([0.0, 0.5 * speed, speed])
    controls = (dirs[:, None, :] * mags[None, :, None]).reshape(-1, 2)
    if kind == "G":
        # drive straight to a parking spot inside the disk by window_lo
        spots = x[None, :] + controls * window_lo
        return bool(np.any(np.linalg.norm(spots - center, axis=1) <= radius + tol))
    taus = np.linspace(window_lo, window_hi, 33)
    pos = x[None, None, :] + controls[:, None, :] * taus[None, :, None]
    return bool(np.any(np.linalg.norm(pos - center, axis=-1) <= radius + tol))


# ---------------------------------------------------------------------------
# Direct evaluation of an Until margin on sampled signals, written
# straight from the semantics with nested loops (no running minimum).


def until_margin_reference(times, left, right, lo, hi) -> float:
    times = np.asarray(times, dtype=float)
    cand = times[(times > lo) & (times < hi)]
    cand = np.concatenate([[lo], cand, [hi]])
    best = -np.inf
    for tau in cand:
        r = float(np.interp(tau, times, right))
        hold_times = times[(times > 0.0) & (times < tau)]
        hold_times = np.concatenate([[0.0], hold_times, [tau]])
        l_min = min(float(np.interp(s, times, left)) for s in hold_times)
        best = max(best, min(r, l_min))
    return best
