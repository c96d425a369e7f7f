"""State-space regions represented by value functions.

A region S is the zero superlevel set of a function h, that is
S = {x : h(x) >= 0}.  Shapes are closed under complement, intersection
and union through the usual min/max algebra:

    complement   h -> -h
    intersection h = min(h_1, ..., h_k)
    union        h = max(h_1, ..., h_k)

Analytic shapes (disks, axis-aligned boxes, half planes) use signed
distance style value functions.  Numerical regions store samples on a
rectangular grid in a ValueField and interpolate multilinearly.

A region whose intrinsic dimension is smaller than the state dimension
can be marked projected, in which case it constrains only the leading
position coordinates (a planar disk used with a planar-plus-heading
state, for example).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Region",
    "Disk",
    "Box",
    "HalfPlane",
    "Complement",
    "Intersection",
    "Union",
    "Universe",
    "GridRegion",
    "region_value",
    "region_gradient",
    "GridAxis",
    "ValueField",
    "grid_points",
    "sample_region",
    "write_value_field",
    "read_value_field",
]


class Region:
    """Base class.  `dim` is the intrinsic dimension of the shape and
    `projected` marks regions that apply to the leading coordinates of
    a larger state."""

    dim: int
    projected: bool = False


@dataclass(frozen=True)
class Disk(Region):
    center: tuple
    radius: float
    projected: bool = False

    @property
    def dim(self):
        return len(self.center)


@dataclass(frozen=True)
class Box(Region):
    """Axis-aligned box [lo, hi] with an exact signed distance value
    function (Euclidean corner distance outside)."""

    lo: tuple
    hi: tuple
    projected: bool = False

    @property
    def dim(self):
        return len(self.lo)


@dataclass(frozen=True)
class HalfPlane(Region):
    """Half space {x : normal . x <= offset}."""

    normal: tuple
    offset: float
    projected: bool = False

    @property
    def dim(self):
        return len(self.normal)


@dataclass(frozen=True)
class Complement(Region):
    inner: Region

    @property
    def dim(self):
        return self.inner.dim

    @property
    def projected(self):
        return self.inner.projected


@dataclass(frozen=True)
class Intersection(Region):
    parts: tuple

    @property
    def dim(self):
        return max(p.dim for p in self.parts)

    @property
    def projected(self):
        return any(p.projected for p in self.parts)


@dataclass(frozen=True)
class Union(Region):
    parts: tuple

    @property
    def dim(self):
        return max(p.dim for p in self.parts)

    @property
    def projected(self):
        return any(p.projected for p in self.parts)


@dataclass(frozen=True)
class Universe(Region):
    """The whole state space, h = +inf."""

    dim: int = 0
    projected: bool = True


@dataclass(frozen=True)
class GridRegion(Region):
    """Region stored as sampled values on a grid."""

    vf: "ValueField"
    projected: bool = False

    @property
    def dim(self):
        return self.vf.ndim


def _slice_state(region: Region, x: np.ndarray) -> np.ndarray:
    d = region.dim
    if isinstance(region, Universe):
        return x
    if x.shape[-1] == d:
        return x
    if region.projected and x.shape[-1] > d:
        return x[..., :d]
    raise ValueError(
        "region of dimension %d cannot evaluate state of dimension %d"
        % (d, x.shape[-1])
    )


def region_value(region: Region, x) -> np.ndarray:
    """Evaluate h(x).  Accepts a single state of shape (d,) or a batch
    of shape (N, d); returns a scalar or a length-N array."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    vals = _values(region, pts)
    return float(vals[0]) if single else vals


def _values(region: Region, pts: np.ndarray) -> np.ndarray:
    pts = _slice_state(region, pts)
    if isinstance(region, Disk):
        d = np.linalg.norm(pts - np.asarray(region.center), axis=-1)
        return region.radius - d
    if isinstance(region, Box):
        lo = np.asarray(region.lo)
        hi = np.asarray(region.hi)
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        q = np.abs(pts - center) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return -(outside + inside)
    if isinstance(region, HalfPlane):
        n = np.asarray(region.normal)
        scale = np.linalg.norm(n)
        return (region.offset - pts @ n) / scale
    if isinstance(region, Complement):
        return -_values(region.inner, pts)
    if isinstance(region, Intersection):
        return np.minimum.reduce([_values(p, pts) for p in region.parts])
    if isinstance(region, Union):
        return np.maximum.reduce([_values(p, pts) for p in region.parts])
    if isinstance(region, Universe):
        return np.full(pts.shape[0], np.inf)
    if isinstance(region, GridRegion):
        return region.vf.interpolate(pts)
    raise TypeError("not a region: %r" % (region,))


def region_gradient(region: Region, x) -> np.ndarray:
    """Gradient of h at a single state x, padded with zeros in any
    trailing coordinates a projected region does not constrain.  At
    nonsmooth points one active branch is chosen."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    gr = _gradient(region, x)
    g[: gr.shape[0]] = gr
    return g


def _gradient(region: Region, x: np.ndarray) -> np.ndarray:
    pt = _slice_state(region, x)
    if isinstance(region, Disk):
        delta = pt - np.asarray(region.center)
        d = np.linalg.norm(delta)
        if d == 0.0:
            return np.zeros_like(delta)
        return -delta / d
    if isinstance(region, Box):
        lo = np.asarray(region.lo)
        hi = np.asarray(region.hi)
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        rel = pt - center
        q = np.abs(rel) - half
        qp = np.maximum(q, 0.0)
        norm = np.linalg.norm(qp)
        if norm > 0.0:
            return -(qp / norm) * np.sign(rel)
        g = np.zeros_like(pt)
        j = int(np.argmax(q))
        g[j] = -np.sign(rel[j]) if rel[j] != 0.0 else 0.0
        return g
    if isinstance(region, HalfPlane):
        n = np.asarray(region.normal, dtype=float)
        return -n / np.linalg.norm(n)
    if isinstance(region, Complement):
        return -_gradient(region.inner, x)
    if isinstance(region, Intersection):
        vals = [_values(p, pt[None, :])[0] for p in region.parts]
        pick = region.parts[int(np.argmin(vals))]
        return _pad(_gradient(pick, x), pt.shape[0])
    if isinstance(region, Union):
        vals = [_values(p, pt[None, :])[0] for p in region.parts]
        pick = region.parts[int(np.argmax(vals))]
        return _pad(_gradient(pick, x), pt.shape[0])
    if isinstance(region, Universe):
        return np.zeros_like(pt)
    if isinstance(region, GridRegion):
        return region.vf.gradient(pt)
    raise TypeError("not a region: %r" % (region,))


def _pad(g: np.ndarray, d: int) -> np.ndarray:
    if g.shape[0] == d:
        return g
    out = np.zeros(d)
    out[: g.shape[0]] = g
    return out


# ---------------------------------------------------------------------------
# Sampled value functions


@dataclass(frozen=True)
class GridAxis:
    """One grid dimension.  Non-periodic axes include both endpoints
    with spacing (hi-lo)/(count-1); periodic axes cover [lo, hi) with
    spacing (hi-lo)/count."""

    lo: float
    hi: float
    count: int
    periodic: bool = False

    @property
    def spacing(self):
        if self.periodic:
            return (self.hi - self.lo) / self.count
        return (self.hi - self.lo) / (self.count - 1)

    def points(self):
        return self.lo + self.spacing * np.arange(self.count)


def grid_points(axes) -> np.ndarray:
    """All grid nodes as an (N, d) array in row-major node order."""
    mesh = np.meshgrid(*[ax.points() for ax in axes], indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def sample_region(region: Region, axes) -> np.ndarray:
    """Sample h on a grid, returning an array shaped like the grid."""
    shape = tuple(ax.count for ax in axes)
    vals = region_value(region, grid_points(axes))
    return np.asarray(vals, dtype=float).reshape(shape)


@dataclass
class ValueField:
    """Multilinear interpolation of values sampled on a rectangular grid.

    Interpolation is exact at grid nodes and exact for functions that
    are linear in each coordinate.  Queries outside a non-periodic axis
    clamp to the boundary; periodic axes wrap.  Gradients interpolate
    central differences of the samples (one-sided at non-periodic
    edges), evaluated on the local stencil of the query cell so that no
    full-grid derivative arrays are ever materialized.

    `values` may be any float dtype, including a read-only memory map;
    arithmetic is carried out in float64.
    """

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(ax.count for ax in self.axes)
        if self.values.shape != shape:
            raise ValueError(
                "values shape %r does not match grid %r" % (self.values.shape, shape)
            )

    @property
    def ndim(self):
        return len(self.axes)

    def _locate(self, pts: np.ndarray):
        """Cell indices and fractional offsets for each query point."""
        idx = []
        frac = []
        for d, ax in enumerate(self.axes):
            u = (pts[:, d] - ax.lo) / ax.spacing
            if ax.periodic:
                u = np.mod(u, ax.count)
                i = np.floor(u).astype(np.int64)
                f = u - i
                i = np.mod(i, ax.count)
            else:
                u = np.clip(u, 0.0, ax.count - 1.0)
                i = np.minimum(np.floor(u).astype(np.int64), ax.count - 2)
                i = np.maximum(i, 0)
                f = u - i
            idx.append(i)
            frac.append(f)
        return idx, frac

    def _corner_indices(self, idx, corner):
        ii = []
        for dim in range(self.ndim):
            ax = self.axes[dim]
            if corner >> dim & 1:
                i1 = idx[dim] + 1
                if ax.periodic:
                    i1 = np.mod(i1, ax.count)
                else:
                    i1 = np.minimum(i1, ax.count - 1)
                ii.append(i1)
            else:
                ii.append(idx[dim])
        return ii

    def _corner_weight(self, frac, corner, n):
        w = np.ones(n)
        for dim in range(self.ndim):
            w = w * (frac[dim] if corner >> dim & 1 else 1.0 - frac[dim])
        return w

    def interpolate(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        idx, frac = self._locate(pts)
        n = pts.shape[0]
        out = np.zeros(n)
        for corner in range(1 << self.ndim):
            ii = self._corner_indices(idx, corner)
            out += self._corner_weight(frac, corner, n) * self.values[tuple(ii)]
        return float(out[0]) if single else out

    def _node_diff(self, ii, dim) -> np.ndarray:
        """Central difference along `dim` at the nodes indexed by `ii`,
        one-sided at non-periodic edges (the np.gradient convention)."""
        ax = self.axes[dim]
        i = ii[dim]
        if ax.periodic:
            ip = np.mod(i + 1, ax.count)
            im = np.mod(i - 1, ax.count)
            gap = 2.0
        else:
            ip = np.minimum(i + 1, ax.count - 1)
            im = np.maximum(i - 1, 0)
            gap = (ip - im).astype(float)
        up = list(ii)
        up[dim] = ip
        dn = list(ii)
        dn[dim] = im
        vals_up = np.asarray(self.values[tuple(up)], dtype=float)
        vals_dn = np.asarray(self.values[tuple(dn)], dtype=float)
        return (vals_up - vals_dn) / (gap * ax.spacing)

    def gradient(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        idx, frac = self._locate(pts)
        n = pts.shape[0]
        out = np.zeros((n, self.ndim))
        for corner in range(1 << self.ndim):
            ii = self._corner_indices(idx, corner)
            w = self._corner_weight(frac, corner, n)
            for dim in range(self.ndim):
                out[:, dim] += w * self._node_diff(ii, dim)
        return out[0] if single else out


# ---------------------------------------------------------------------------
# Binary cache format for value fields

_VF_MAGIC = b"VF01"


def write_value_field(fh, vf: ValueField):
    """Write magic "VF01", the dimension count, per-axis (lo, hi,
    count, periodic) records, then the samples row-major, all little
    endian 64 bit."""
    fh.write(_VF_MAGIC)
    fh.write(struct.pack("<Q", vf.ndim))
    for ax in vf.axes:
        fh.write(struct.pack("<ddQQ", ax.lo, ax.hi, ax.count, 1 if ax.periodic else 0))
    fh.write(np.ascontiguousarray(vf.values, dtype="<f8").tobytes())


def read_value_field(fh) -> ValueField:
    magic = fh.read(4)
    if magic != _VF_MAGIC:
        raise ValueError("bad value field magic %r" % magic)
    (ndim,) = struct.unpack("<Q", fh.read(8))
    axes = []
    for _ in range(ndim):
        lo, hi, count, per = struct.unpack("<ddQQ", fh.read(32))
        axes.append(GridAxis(lo, hi, int(count), bool(per)))
    shape = tuple(ax.count for ax in axes)
    n = int(np.prod(shape))
    data = np.frombuffer(fh.read(8 * n), dtype="<f8", count=n)
    return ValueField(tuple(axes), data.reshape(shape).copy())
