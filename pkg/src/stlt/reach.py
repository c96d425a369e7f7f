"""Reachability operators that turn child regions into tree set nodes.

For dynamics that can hold position, reaching a target set at some
time inside a window reduces to reaching it at a single time:

  * eventually over [a, b]: the maximal reach set of S over horizon b,
  * always over [a, b]: the complement of the minimal reach set of the
    complement of S over horizon a (reach S by a, then stay).

The analytic engine implements these for single-integrator dynamics
and disk-like targets, where they are closed form: a disk inflates by
speed * horizon.  The grid engine integrates the backward level-set
equation for any control-affine dynamics and stores a time-indexed
value function, which the barrier construction reuses directly.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import hjb
from .dynamics import Dynamics
from .formula import Interval
from .regions import (
    Box,
    Complement,
    Disk,
    GridAxis,
    GridRegion,
    Intersection,
    Region,
    Universe,
    ValueField,
)

__all__ = [
    "as_disk",
    "max_reach_analytic",
    "always_set_analytic",
    "TimeValueFunction",
    "hjb_solve",
    "ReachEngine",
    "write_time_value_function",
    "read_time_value_function",
    "load_time_value_function",
]

_CONTAIN_TOL = 1e-12


def as_disk(region: Region) -> Disk:
    """Reduce a region to a disk, under-approximating where needed.

    Boxes become their largest inscribed disk.  An intersection reduces
    to its smallest member disk when that disk lies inside every other
    member; anything else is rejected.
    """
    if isinstance(region, Disk):
        return region
    if isinstance(region, Box):
        lo = np.asarray(region.lo)
        hi = np.asarray(region.hi)
        center = 0.5 * (lo + hi)
        radius = float(np.min(0.5 * (hi - lo)))
        return Disk(tuple(center), radius, projected=region.projected)
    if isinstance(region, Intersection):
        disks = [as_disk(p) for p in region.parts]
        for cand in disks:
            if all(_disk_inside(cand, other) for other in disks):
                return replace(cand, projected=region.projected)
        raise ValueError(
            "intersection does not reduce to a disk: no member disk is "
            "contained in all others"
        )
    raise ValueError("cannot reduce %s to a disk" % type(region).__name__)


def _disk_inside(a: Disk, b: Disk) -> bool:
    gap = np.linalg.norm(np.asarray(a.center) - np.asarray(b.center))
    return gap + a.radius <= b.radius + _CONTAIN_TOL


def _inflate(region: Region, amount: float) -> Region:
    """Exact-time maximal reach set for a single integrator: disks
    inflate, complements of disks erode."""
    if isinstance(region, Complement):
        disk = as_disk(region.inner)
        return Complement(
            Disk(disk.center, max(disk.radius - amount, 0.0), projected=disk.projected)
        )
    disk = as_disk(region)
    return Disk(disk.center, disk.radius + amount, projected=disk.projected)


def max_reach_analytic(region: Region, window: Interval, speed: float) -> Region:
    """States from which the region is reachable at some time in the
    window: inflate by speed * window.hi."""
    return _inflate(region, speed * window.hi)


def always_set_analytic(region: Region, window: Interval, speed: float) -> Region:
    """States from which the region can be occupied through the whole
    window: reach it by window.lo and hold, so inflate by
    speed * window.lo."""
    return _inflate(region, speed * window.lo)


# ---------------------------------------------------------------------------
# Time-indexed value functions


@dataclass
class TimeValueFunction:
    """Value function slices V(., t_k) at ascending times, the output
    of one backward solve.  The slice at the last time equals the
    terminal condition samples exactly."""

    times: np.ndarray
    fields: list
    mode: str

    @property
    def t_start(self):
        return float(self.times[0])

    @property
    def t_end(self):
        return float(self.times[-1])

    def earliest(self) -> ValueField:
        return self.fields[0]

    def _bracket(self, t: float):
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(k, 0), len(self.times) - 1)

    def value(self, x, t: float) -> float:
        k = self._bracket(t)
        if k == len(self.times) - 1:
            return self.fields[k].interpolate(x)
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        w = min(max(w, 0.0), 1.0)
        v0 = self.fields[k].interpolate(x)
        v1 = self.fields[k + 1].interpolate(x)
        return (1.0 - w) * v0 + w * v1

    def gradient(self, x, t: float) -> np.ndarray:
        k = self._bracket(t)
        if k == len(self.times) - 1:
            return self.fields[k].gradient(x)
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        w = min(max(w, 0.0), 1.0)
        return (1.0 - w) * self.fields[k].gradient(x) + w * self.fields[k + 1].gradient(x)

    def d_dt(self, x, t: float) -> float:
        """Forward difference between the bracketing stored slices,
        backward at the last slice."""
        if len(self.times) == 1:
            return 0.0
        k = self._bracket(t)
        if k == len(self.times) - 1:
            k -= 1
        t0, t1 = self.times[k], self.times[k + 1]
        v0 = self.fields[k].interpolate(x)
        v1 = self.fields[k + 1].interpolate(x)
        return (v1 - v0) / (t1 - t0)


def hjb_solve(
    terminal: Region,
    dyn: Dynamics,
    t_start: float,
    t_end: float,
    axes,
    mode: str = "max",
    step: float = 0.05,
    cfl: float = 0.5,
    input_scale: float = 1.0,
) -> TimeValueFunction:
    times, fields = hjb.solve_backward(
        terminal, dyn, t_start, t_end, axes, mode, step, cfl, input_scale
    )
    return TimeValueFunction(times, fields, mode)


# ---------------------------------------------------------------------------
# Binary cache format for time value functions
#
# Layout, all little endian: magic "TV01"; mode (u64, 0 max / 1 min);
# slice count (u64); slice times (f8 each); axis count (u64); per-axis
# (lo f8, hi f8, count u64, periodic u64); bytes per sample (u64, 4 or
# 8); then count x grid samples, row major, slices consecutive.  The
# flat sample block lets readers memory-map the file so that long
# solves do not have to be resident all at once.

_TV_MAGIC = b"TV01"


def write_time_value_function(fh, tvf: TimeValueFunction):
    first = tvf.fields[0]
    fh.write(_TV_MAGIC)
    fh.write(struct.pack("<QQ", 0 if tvf.mode == "max" else 1, len(tvf.times)))
    fh.write(np.ascontiguousarray(tvf.times, dtype="<f8").tobytes())
    fh.write(struct.pack("<Q", first.ndim))
    for ax in first.axes:
        fh.write(struct.pack("<ddQQ", ax.lo, ax.hi, ax.count, 1 if ax.periodic else 0))
    fh.write(struct.pack("<Q", 4))
    for vf in tvf.fields:
        fh.write(np.ascontiguousarray(vf.values, dtype="<f4").tobytes())


def _read_tv_header(fh):
    magic = fh.read(4)
    if magic != _TV_MAGIC:
        raise ValueError("bad time value function magic %r" % magic)
    mode_code, count = struct.unpack("<QQ", fh.read(16))
    times = np.frombuffer(fh.read(8 * count), dtype="<f8", count=count).copy()
    (ndim,) = struct.unpack("<Q", fh.read(8))
    axes = []
    for _ in range(ndim):
        lo, hi, n, per = struct.unpack("<ddQQ", fh.read(32))
        axes.append(GridAxis(lo, hi, int(n), bool(per)))
    (itemsize,) = struct.unpack("<Q", fh.read(8))
    if itemsize not in (4, 8):
        raise ValueError("unsupported sample width %d" % itemsize)
    mode = "max" if mode_code == 0 else "min"
    return mode, times, tuple(axes), "<f%d" % itemsize


def _tv_from_block(mode, times, axes, block) -> TimeValueFunction:
    fields = [ValueField(axes, block[k]) for k in range(block.shape[0])]
    return TimeValueFunction(times, fields, mode)


def read_time_value_function(fh) -> TimeValueFunction:
    """Read fully into memory from any binary stream."""
    mode, times, axes, dtype = _read_tv_header(fh)
    shape = (len(times),) + tuple(ax.count for ax in axes)
    n = int(np.prod(shape))
    itemsize = int(dtype[-1])
    data = np.frombuffer(fh.read(itemsize * n), dtype=dtype, count=n)
    return _tv_from_block(mode, times, axes, data.reshape(shape).copy())


def load_time_value_function(path) -> TimeValueFunction:
    """Open a cache file with its sample block memory mapped, so slices
    are paged in on demand and can be evicted under memory pressure."""
    with open(path, "rb") as fh:
        mode, times, axes, dtype = _read_tv_header(fh)
        offset = fh.tell()
    shape = (len(times),) + tuple(ax.count for ax in axes)
    block = np.memmap(path, dtype=dtype, mode="r", offset=offset, shape=shape)
    return _tv_from_block(mode, times, axes, block)


# ---------------------------------------------------------------------------
# Region fingerprints for cache keys


def region_fingerprint(region: Region) -> str:
    if isinstance(region, Disk):
        return "disk(%s;%.17g;%d)" % (
            ",".join("%.17g" % c for c in region.center),
            region.radius,
            region.projected,
        )
    if isinstance(region, Box):
        return "box(%s;%s;%d)" % (
            ",".join("%.17g" % c for c in region.lo),
            ",".join("%.17g" % c for c in region.hi),
            region.projected,
        )
    if isinstance(region, Complement):
        return "comp(%s)" % region_fingerprint(region.inner)
    if isinstance(region, Intersection):
        return "inter(%s)" % ";".join(region_fingerprint(p) for p in region.parts)
    if isinstance(region, Universe):
        return "universe"
    if isinstance(region, GridRegion):
        digest = hashlib.sha256()
        for ax in region.vf.axes:
            digest.update(struct.pack("<ddQQ", ax.lo, ax.hi, ax.count, ax.periodic))
        digest.update(np.ascontiguousarray(region.vf.values, dtype="<f8").tobytes())
        return "grid(%s)" % digest.hexdigest()
    from .regions import HalfPlane, Union

    if isinstance(region, HalfPlane):
        return "half(%s;%.17g;%d)" % (
            ",".join("%.17g" % c for c in region.normal),
            region.offset,
            region.projected,
        )
    if isinstance(region, Union):
        return "union(%s)" % ";".join(region_fingerprint(p) for p in region.parts)
    raise TypeError("no fingerprint for %r" % (region,))


# ---------------------------------------------------------------------------
# Engine


@dataclass
class ReachEngine:
    """Computes set nodes and barrier value functions, analytically or
    on a grid, with optional on-disk caching of grid solves."""

    kind: str
    dyn: Dynamics
    axes: tuple | None = None
    step: float = 0.05
    cfl: float = 0.5
    input_scale: float = 1.0
    cache_dir: str | None = None
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("analytic", "grid"):
            raise ValueError("engine kind must be 'analytic' or 'grid'")
        if self.kind == "analytic" and self.dyn.kind != "single_integrator":
            raise ValueError(
                "the analytic engine covers single-integrator dynamics only"
            )
        if self.kind == "grid" and self.axes is None:
            raise ValueError("the grid engine needs grid axes")

    @property
    def speed(self) -> float:
        return self.input_scale * self.dyn.ball_speed()

    def set_node_region(self, op: str, interval: Interval, child: Region) -> Region:
        """Region of the set node above an operator node: op is "F" or
        "G" with its interval, applied to the child set node region."""
        if op == "F":
            horizon = interval.hi
        elif op == "G":
            horizon = interval.lo
        else:
            raise ValueError("op must be 'F' or 'G'")
        if self.kind == "analytic":
            if op == "F":
                return max_reach_analytic(child, interval, self.speed)
            return always_set_analytic(child, interval, self.speed)
        if horizon <= 0.0:
            return child
        if op == "F":
            tvf = self.solve(child, 0.0, horizon, "max")
            return GridRegion(tvf.earliest())
        tvf = self.solve(Complement(child), 0.0, horizon, "min")
        neg = tvf.earliest()
        return GridRegion(ValueField(neg.axes, -neg.values))

    def reach_value_function(self, target: Region, t_lo: float, t_hi: float) -> TimeValueFunction:
        """Backward maximal-reach solve used for barrier reach phases:
        terminal condition h_target at t_hi, integrated back to t_lo."""
        return self.solve(target, t_lo, t_hi, "max")

    def solve(self, terminal: Region, t_start: float, t_end: float, mode: str) -> TimeValueFunction:
        if self.kind != "grid":
            raise RuntimeError("grid solves need a grid engine")
        key = self._cache_key(terminal, t_start, t_end, mode)
        if key in self._memo:
            return self._memo[key]
        path = None
        if self.cache_dir is not None:
            os.makedirs(self.cache_dir, exist_ok=True)
            path = os.path.join(self.cache_dir, "tv_%s.bin" % key)
            if os.path.exists(path):
                tvf = load_time_value_function(path)
                self._memo[key] = tvf
                return tvf
        tvf = hjb_solve(
            terminal, self.dyn, t_start, t_end, self.axes,
            mode, self.step, self.cfl, self.input_scale,
        )
        if path is not None:
            tmp = path + ".tmp"
            with open(tmp, "wb") as fh:
                write_time_value_function(fh, tvf)
            os.replace(tmp, path)
            # reopen memory mapped and drop the in-memory block
            tvf = load_time_value_function(path)
        self._memo[key] = tvf
        return tvf

    def _cache_key(self, terminal: Region, t_start: float, t_end: float, mode: str) -> str:
        parts = [
            self.dyn.fingerprint(),
            ";".join(
                "%.17g,%.17g,%d,%d" % (ax.lo, ax.hi, ax.count, ax.periodic)
                for ax in self.axes
            ),
            region_fingerprint(terminal),
            "%.17g" % t_start,
            "%.17g" % t_end,
            mode,
            "%.17g" % self.step,
            "%.17g" % self.cfl,
            "%.17g" % self.input_scale,
        ]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:24]
