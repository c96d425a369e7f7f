"""Hot loops for the level-set solver.

One explicit Lax-Friedrichs update of the backward Hamilton-Jacobi
equation, first order in space.  The Hamiltonian is control affine

    H(x, p) = p . f(x) + sigma * opt_u <g(x)^T p, u>

with sigma = +1 maximizing over the input set and sigma = -1
minimizing; the inner optimum is closed form for box and ball input
sets.  Upwind dissipation uses per-dimension bounds alpha_i on
|dH/dp_i|.

The 2-D and 3-D updates carry numba-compiled kernels.  Setting the
environment variable STLT_PURE_NUMPY=1 (or missing numba) selects a
vectorized pure-numpy fallback with identical semantics; see
benchmarks/bench_hjb.py for a speed comparison of the two paths.
"""

from __future__ import annotations

import os

import numpy as np

KIND_BOX, KIND_BALL = 0, 1

_flag = os.environ.get("STLT_PURE_NUMPY", "").strip().lower()
PURE_NUMPY = _flag in ("1", "true", "yes", "on")

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag path
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not PURE_NUMPY


def _one_sided(V: np.ndarray, dx: float, axis: int, periodic: bool):
    """Backward and forward difference arrays along one axis.  Edges of
    non-periodic axes copy the adjacent one-sided difference, which is
    linear extrapolation of V by one ghost cell."""
    d = np.diff(V, axis=axis) / dx
    if periodic:
        wrap = (np.take(V, [0], axis=axis) - np.take(V, [-1], axis=axis)) / dx
        dm = np.concatenate([wrap, d], axis=axis)
        dp = np.concatenate([d, wrap], axis=axis)
    else:
        first = np.take(d, [0], axis=axis)
        last = np.take(d, [-1], axis=axis)
        dm = np.concatenate([first, d], axis=axis)
        dp = np.concatenate([d, last], axis=axis)
    return dm, dp


def lf_step_numpy(V, F, G, dxs, periodic, input_kind, bounds, sigma, alphas, dt):
    """One Lax-Friedrichs step, any dimension, vectorized numpy."""
    n = V.ndim
    dms, dps = [], []
    for ax in range(n):
        dm, dp = _one_sided(V, dxs[ax], ax, periodic[ax])
        dms.append(dm)
        dps.append(dp)
    pbar = np.stack([0.5 * (dms[i] + dps[i]) for i in range(n)], axis=-1)
    H = np.einsum("...i,...i->...", pbar, F)
    a = np.einsum("...i,...ij->...j", pbar, G)
    if input_kind == KIND_BOX:
        H = H + sigma * np.abs(a) @ np.asarray(bounds)
    else:
        H = H + sigma * bounds[0] * np.sqrt(np.sum(a * a, axis=-1))
    # stepping V_new = V + dt H, the stable upwind term enters with +
    for i in range(n):
        H += 0.5 * alphas[i] * (dps[i] - dms[i])
    return V + dt * H


if HAS_NUMBA:

    @numba.njit(parallel=True, fastmath=True, cache=True)
    def _lf_step_2d(V, F, G, dx0, dx1, per0, per1, input_kind, bounds, sigma, a0, a1, dt, out):
        n0, n1 = V.shape
        m = G.shape[3]
        for i in numba.prange(n0):
            for j in range(n1):
                if per0:
                    im = i - 1 if i > 0 else n0 - 1
                    ip = i + 1 if i < n0 - 1 else 0
                    dm0 = (V[i, j] - V[im, j]) / dx0
                    dp0 = (V[ip, j] - V[i, j]) / dx0
                else:
                    dm0 = (V[i, j] - V[i - 1, j]) / dx0 if i > 0 else (V[1, j] - V[0, j]) / dx0
                    dp0 = (V[i + 1, j] - V[i, j]) / dx0 if i < n0 - 1 else (V[n0 - 1, j] - V[n0 - 2, j]) / dx0
                if per1:
                    jm = j - 1 if j > 0 else n1 - 1
                    jp = j + 1 if j < n1 - 1 else 0
                    dm1 = (V[i, j] - V[i, jm]) / dx1
                    dp1 = (V[i, jp] - V[i, j]) / dx1
                else:
                    dm1 = (V[i, j] - V[i, j - 1]) / dx1 if j > 0 else (V[i, 1] - V[i, 0]) / dx1
                    dp1 = (V[i, j + 1] - V[i, j]) / dx1 if j < n1 - 1 else (V[i, n1 - 1] - V[i, n1 - 2]) / dx1
                p0 = 0.5 * (dm0 + dp0)
                p1 = 0.5 * (dm1 + dp1)
                H = p0 * F[i, j, 0] + p1 * F[i, j, 1]
                acc = 0.0
                for jj in range(m):
                    aj = p0 * G[i, j, 0, jj] + p1 * G[i, j, 1, jj]
                    if input_kind == 0:
                        acc += bounds[jj] * abs(aj)
                    else:
                        acc += aj * aj
                if input_kind == 1:
                    acc = bounds[0] * np.sqrt(acc)
                H += sigma * acc
                H += 0.5 * (a0 * (dp0 - dm0) + a1 * (dp1 - dm1))
                out[i, j] = V[i, j] + dt * H
        return out

    @numba.njit(parallel=True, fastmath=True, cache=True)
    def _lf_step_3d(V, F, G, dx0, dx1, dx2, per0, per1, per2, input_kind, bounds, sigma, a0, a1, a2, dt, out):
        n0, n1, n2 = V.shape
        m = G.shape[4]
        for i in numba.prange(n0):
            for j in range(n1):
                for k in range(n2):
                    if per0:
                        im = i - 1 if i > 0 else n0 - 1
                        ip = i + 1 if i < n0 - 1 else 0
                        dm0 = (V[i, j, k] - V[im, j, k]) / dx0
                        dp0 = (V[ip, j, k] - V[i, j, k]) / dx0
                    else:
                        dm0 = (V[i, j, k] - V[i - 1, j, k]) / dx0 if i > 0 else (V[1, j, k] - V[0, j, k]) / dx0
                        dp0 = (V[i + 1, j, k] - V[i, j, k]) / dx0 if i < n0 - 1 else (V[n0 - 1, j, k] - V[n0 - 2, j, k]) / dx0
                    if per1:
                        jm = j - 1 if j > 0 else n1 - 1
                        jp = j + 1 if j < n1 - 1 else 0
                        dm1 = (V[i, j, k] - V[i, jm, k]) / dx1
                        dp1 = (V[i, jp, k] - V[i, j, k]) / dx1
                    else:
                        dm1 = (V[i, j, k] - V[i, j - 1, k]) / dx1 if j > 0 else (V[i, 1, k] - V[i, 0, k]) / dx1
                        dp1 = (V[i, j + 1, k] - V[i, j, k]) / dx1 if j < n1 - 1 else (V[i, n1 - 1, k] - V[i, n1 - 2, k]) / dx1
                    if per2:
                        km = k - 1 if k > 0 else n2 - 1
                        kp = k + 1 if k < n2 - 1 else 0
                        dm2 = (V[i, j, k] - V[i, j, km]) / dx2
                        dp2 = (V[i, j, kp] - V[i, j, k]) / dx2
                    else:
                        dm2 = (V[i, j, k] - V[i, j, k - 1]) / dx2 if k > 0 else (V[i, j, 1] - V[i, j, 0]) / dx2
                        dp2 = (V[i, j, k + 1] - V[i, j, k]) / dx2 if k < n2 - 1 else (V[i, j, n2 - 1] - V[i, j, n2 - 2]) / dx2
                    p0 = 0.5 * (dm0 + dp0)
                    p1 = 0.5 * (dm1 + dp1)
                    p2 = 0.5 * (dm2 + dp2)
                    H = p0 * F[i, j, k, 0] + p1 * F[i, j, k, 1] + p2 * F[i, j, k, 2]
                    acc = 0.0
                    for jj in range(m):
                        aj = p0 * G[i, j, k, 0, jj] + p1 * G[i, j, k, 1, jj] + p2 * G[i, j, k, 2, jj]
                        if input_kind == 0:
                            acc += bounds[jj] * abs(aj)
                        else:
                            acc += aj * aj
                    if input_kind == 1:
                        acc = bounds[0] * np.sqrt(acc)
                    H += sigma * acc
                    H += 0.5 * (a0 * (dp0 - dm0) + a1 * (dp1 - dm1) + a2 * (dp2 - dm2))
                    out[i, j, k] = V[i, j, k] + dt * H
        return out


def lf_step_numba(V, F, G, dxs, periodic, input_kind, bounds, sigma, alphas, dt):
    """Numba path for 2-D and 3-D grids."""
    if not HAS_NUMBA:
        raise RuntimeError("numba is not available")
    out = np.empty_like(V)
    bounds = np.asarray(bounds, dtype=float)
    if V.ndim == 2:
        return _lf_step_2d(
            V, F, G, dxs[0], dxs[1], periodic[0], periodic[1],
            input_kind, bounds, sigma, alphas[0], alphas[1], dt, out,
        )
    if V.ndim == 3:
        return _lf_step_3d(
            V, F, G, dxs[0], dxs[1], dxs[2], periodic[0], periodic[1], periodic[2],
            input_kind, bounds, sigma, alphas[0], alphas[1], alphas[2], dt, out,
        )
    raise ValueError("numba kernels cover 2-D and 3-D grids only")


def lf_step(V, F, G, dxs, periodic, input_kind, bounds, sigma, alphas, dt):
    """Selected implementation: numba when available and not disabled
    via STLT_PURE_NUMPY, numpy otherwise or for dimensions > 3."""
    if USE_NUMBA and V.ndim in (2, 3):
        return lf_step_numba(V, F, G, dxs, periodic, input_kind, bounds, sigma, alphas, dt)
    return lf_step_numpy(V, F, G, dxs, periodic, input_kind, bounds, sigma, alphas, dt)
