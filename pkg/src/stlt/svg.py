"""Plain SVG rendering of a planar run: predicate regions, trajectory,
start and end markers.  Only the first two state coordinates are drawn,
so unicycle headings are simply projected away."""

from __future__ import annotations

import io

import numpy as np

from .regions import Box, Disk, HalfPlane, Region

__all__ = ["render_run", "write_run_svg"]

_SIZE = 640
_MARGIN = 40
_COLORS = ["#4878cf", "#6acc65", "#d65f5f", "#b47cc7", "#c4ad66", "#77bedb"]


def _bounds(predicates: dict, states: np.ndarray):
    xs, ys = [states[:, 0]], [states[:, 1]]
    for region in predicates.values():
        if isinstance(region, Disk):
            cx, cy = region.center[:2]
            r = region.radius
            xs.append(np.array([cx - r, cx + r]))
            ys.append(np.array([cy - r, cy + r]))
        elif isinstance(region, Box):
            xs.append(np.array([region.lo[0], region.hi[0]]))
            ys.append(np.array([region.lo[1], region.hi[1]]))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    pad = 0.05 * max(x.max() - x.min(), y.max() - y.min(), 1.0) + 0.5
    return x.min() - pad, x.max() + pad, y.min() - pad, y.max() + pad


class _Mapper:
    def __init__(self, xmin, xmax, ymin, ymax):
        span = max(xmax - xmin, ymax - ymin)
        self.scale = (_SIZE - 2 * _MARGIN) / span
        self.xmin, self.ymin = xmin, ymin
        self.ymax = ymax

    def __call__(self, x, y):
        sx = _MARGIN + (x - self.xmin) * self.scale
        sy = _MARGIN + (self.ymax - y) * self.scale
        return sx, sy


def render_run(predicates: dict, states, title: str = "") -> str:
    states = np.asarray(states, dtype=float)
    m = _Mapper(*_bounds(predicates, states))
    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" '
        f'viewBox="0 0 {_SIZE} {_SIZE}">\n'
    )
    out.write(f'<rect width="{_SIZE}" height="{_SIZE}" fill="white"/>\n')
    if title:
        out.write(f'<text x="{_MARGIN}" y="24" font-family="sans-serif" '
                  f'font-size="16">{title}</text>\n')
    for k, (name, region) in enumerate(sorted(predicates.items())):
        color = _COLORS[k % len(_COLORS)]
        _draw_region(out, m, region, color, name)
    pts = " ".join("%.2f,%.2f" % m(x, y) for x, y in states[:, :2])
    out.write(f'<polyline points="{pts}" fill="none" stroke="#222222" '
              f'stroke-width="1.6"/>\n')
    sx, sy = m(states[0, 0], states[0, 1])
    out.write(f'<circle cx="{sx:.2f}" cy="{sy:.2f}" r="5" fill="#222222"/>\n')
    ex, ey = m(states[-1, 0], states[-1, 1])
    out.write(f'<rect x="{ex - 4:.2f}" y="{ey - 4:.2f}" width="8" height="8" '
              f'fill="none" stroke="#222222" stroke-width="2"/>\n')
    out.write("</svg>\n")
    return out.getvalue()


def _draw_region(out, m, region: Region, color: str, name: str):
    if isinstance(region, Disk):
        cx, cy = m(region.center[0], region.center[1])
        out.write(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{region.radius * m.scale:.2f}" '
            f'fill="{color}" fill-opacity="0.25" stroke="{color}"/>\n'
        )
        lx, ly = cx, cy
    elif isinstance(region, Box):
        x0, y1 = m(region.lo[0], region.lo[1])
        x1, y0 = m(region.hi[0], region.hi[1])
        out.write(
            f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0:.2f}" '
            f'height="{y1 - y0:.2f}" fill="{color}" fill-opacity="0.25" '
            f'stroke="{color}"/>\n'
        )
        lx, ly = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    elif isinstance(region, HalfPlane):
        return
    else:
        return
    out.write(f'<text x="{lx:.2f}" y="{ly:.2f}" font-family="sans-serif" '
              f'font-size="13" text-anchor="middle" fill="#333333">{name}</text>\n')


def write_run_svg(path, predicates: dict, states, title: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(render_run(predicates, states, title))
