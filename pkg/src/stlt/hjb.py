"""Backward level-set solver for reachability value functions.

Solves

    dV/dt + opt_{u in U} <grad V, f(x) + g(x) u> = 0,   V(x, t_end) = h(x)

backward from t_end to t_start, with opt = max or min.  The scheme is
first-order Lax-Friedrichs with upwind dissipation (see _kernels) and
an explicit CFL-limited time step: slices are stored on a uniform grid
no coarser than `step`, and each stored interval is subdivided further
whenever the CFL bound 0.5 requires it.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .dynamics import Dynamics
from .regions import GridAxis, Region, ValueField, grid_points, sample_region

__all__ = ["solve_backward"]

MAX_SUBSTEPS = 100_000


def _reach_input(dyn: Dynamics, scale: float):
    """Input set assumed by set computations: (kernel kind, bounds)."""
    if dyn.reach_kind == "ball":
        return _kernels.KIND_BALL, (scale * dyn.ball_speed(),)
    return _kernels.KIND_BOX, tuple(scale * b for b in dyn.bounds)


def _dissipation_bounds(F: np.ndarray, G: np.ndarray, kind: int, bounds) -> np.ndarray:
    """Per-dimension bounds alpha_i >= max |dH/dp_i| over the grid."""
    b = np.asarray(bounds)
    if kind == _kernels.KIND_BOX:
        gain = np.abs(G) @ b
    else:
        gain = b[0] * np.sqrt(np.sum(G * G, axis=-1))
    return np.max(np.abs(F) + gain, axis=0)


def solve_backward(
    terminal: Region,
    dyn: Dynamics,
    t_start: float,
    t_end: float,
    axes,
    mode: str = "max",
    step: float = 0.05,
    cfl: float = 0.5,
    input_scale: float = 1.0,
):
    """Integrate backward and return (times, fields) with times
    ascending from t_start to t_end and V(t_end) = terminal samples.

    `input_scale` shrinks the input set used in the Hamiltonian, which
    trades tracking margin for smaller computed sets.
    """
    if t_end < t_start:
        raise ValueError("t_end must not precede t_start")
    if mode not in ("max", "min"):
        raise ValueError("mode must be 'max' or 'min'")
    axes = tuple(axes)
    shape = tuple(ax.count for ax in axes)
    ndim = len(axes)

    V = sample_region(terminal, axes)
    span = t_end - t_start
    n_slices = max(1, int(math.ceil(span / step - 1e-9))) if span > 0 else 0
    times = np.linspace(t_start, t_end, n_slices + 1)
    # slices are stored in float32 (a grid cell is wider than float32
    # resolution by many orders of magnitude) to halve the footprint of
    # long solves; the marching state V itself stays float64
    block = np.empty((n_slices + 1,) + shape, dtype=np.float32)
    block[n_slices] = V
    fields = [ValueField(axes, block[k]) for k in range(n_slices + 1)]
    if n_slices == 0:
        return times, fields

    pts = grid_points(axes)
    F = dyn.f_batch(pts).reshape(shape + (ndim,))
    G = dyn.g_batch(pts).reshape(shape + (ndim, dyn.m))
    kind, bounds = _reach_input(dyn, input_scale)
    alphas = _dissipation_bounds(dyn.f_batch(pts), dyn.g_batch(pts), kind, bounds)
    dxs = np.array([ax.spacing for ax in axes])
    periodic = tuple(ax.periodic for ax in axes)
    denom = float(np.sum(alphas / dxs))
    dt_max = cfl / denom if denom > 0 else np.inf

    sigma = 1.0 if mode == "max" else -1.0
    slice_dt = span / n_slices
    n_sub = max(1, int(math.ceil(slice_dt / dt_max - 1e-12)))
    if n_sub * n_slices > MAX_SUBSTEPS:
        raise RuntimeError(
            "CFL condition needs %d substeps, over the %d cap"
            % (n_sub * n_slices, MAX_SUBSTEPS)
        )
    dt_sub = slice_dt / n_sub

    for k in range(n_slices - 1, -1, -1):
        for _ in range(n_sub):
            V = _kernels.lf_step(
                V, F, G, dxs, periodic, kind, bounds, sigma, alphas, dt_sub
            )
        block[k] = V
    return times, fields
