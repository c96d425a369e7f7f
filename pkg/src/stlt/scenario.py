"""Scenario files: one TOML document describing a complete problem.

A scenario bundles the dynamics preset, the formula text, the
predicate regions, the reachability engine configuration and the run
settings, for example:

    schema = 1
    name = "example1_integrator"

    [dynamics]
    kind = "single_integrator"   # or "unicycle"
    vmax = 1.0                   # plus wmax for the unicycle

    [formula]
    text = "F[0,15] (G[2,10] mu1 | mu2 U[5,10] mu3)"

    [predicates.mu1]
    shape = "disk"               # disk | rect | halfplane
    center = [-4.0, -4.0]
    radius = 1.0

    [reach]
    engine = "analytic"          # or "grid", then [reach.grid] applies

    [run]
    dt = 0.05
    t_end = 25.0
    starts = [[-6.0, 2.0], [-2.0, 3.5]]

Planar predicates used with the unicycle are marked projected
automatically, so they constrain position and leave the heading free.
A handful of ready-made scenarios ship with the package; `load` takes
either a file path or a bundled scenario name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .controller import RunConfig
from .dynamics import Dynamics, single_integrator, unicycle
from .formula import Formula, horizon, parse, to_desired_form
from .reach import ReachEngine
from .regions import Box, Disk, GridAxis, HalfPlane, Region

__all__ = ["Scenario", "ScenarioError", "load_scenario", "bundled_scenarios"]


class ScenarioError(ValueError):
    """Raised for a malformed or inconsistent scenario document."""


@dataclass
class Scenario:
    name: str
    dyn: Dynamics
    formula_text: str
    phi: Formula  # as written
    phi_desired: Formula  # rewritten for tree construction
    predicates: dict
    engine_kind: str
    axes: tuple | None
    starts: list
    run: RunConfig
    reach_step: float = 0.05
    input_scale: float = 1.0

    def engine(self, cache_dir: str | None = None) -> ReachEngine:
        return ReachEngine(
            kind=self.engine_kind, dyn=self.dyn, axes=self.axes,
            step=self.reach_step, input_scale=self.input_scale,
            cache_dir=cache_dir,
        )


def bundled_scenarios() -> list[str]:
    base = resources.files("stlt") / "scenarios"
    return sorted(p.name[: -len(".toml")] for p in base.iterdir()
                  if p.name.endswith(".toml"))


def load_scenario(source) -> Scenario:
    """Load from a path, or by bundled name when `source` has no .toml
    suffix and no path separator."""
    path = Path(source)
    if path.suffix != ".toml" and path.name == str(source):
        ref = resources.files("stlt") / "scenarios" / f"{source}.toml"
        if not ref.is_file():
            raise ScenarioError(
                f"unknown scenario {source!r}; bundled: {', '.join(bundled_scenarios())}")
        text = ref.read_text()
    else:
        if not path.is_file():
            raise ScenarioError(f"scenario file not found: {source}")
        text = path.read_text()
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"invalid TOML: {exc}") from None
    return _from_document(doc, default_name=path.stem)


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ScenarioError(f"missing key {key!r} in {where}")
    return doc[key]


def _from_document(doc: dict, default_name: str) -> Scenario:
    if doc.get("schema") != 1:
        raise ScenarioError("scenario must declare schema = 1")
    name = doc.get("name", default_name)

    dyn_doc = _require(doc, "dynamics", "scenario")
    kind = _require(dyn_doc, "kind", "[dynamics]")
    if kind == "single_integrator":
        dyn = single_integrator(float(dyn_doc.get("vmax", 1.0)))
    elif kind == "unicycle":
        dyn = unicycle(float(dyn_doc.get("vmax", 1.0)), float(dyn_doc.get("wmax", 1.0)))
    else:
        raise ScenarioError(f"unknown dynamics kind {kind!r}")

    text = _require(_require(doc, "formula", "scenario"), "text", "[formula]")
    try:
        phi = parse(text)
    except ValueError as exc:
        raise ScenarioError(f"formula: {exc}") from None
    phi_desired = to_desired_form(phi)

    predicates = {}
    for pname, pdoc in _require(doc, "predicates", "scenario").items():
        predicates[pname] = _parse_region(pname, pdoc, dyn.n)

    reach_doc = doc.get("reach", {})
    engine_kind = reach_doc.get("engine", "analytic")
    reach_step = float(reach_doc.get("step", 0.05))
    input_scale = float(reach_doc.get("input_scale", 1.0))
    axes = None
    if engine_kind == "grid":
        grid = _require(reach_doc, "grid", "[reach]")
        lo = _require(grid, "lo", "[reach.grid]")
        hi = _require(grid, "hi", "[reach.grid]")
        count = _require(grid, "count", "[reach.grid]")
        periodic = grid.get("periodic", [False] * len(lo))
        if not len(lo) == len(hi) == len(count) == len(periodic) == dyn.n:
            raise ScenarioError("[reach.grid] arrays must have one entry per state")
        axes = tuple(
            GridAxis(float(a), float(b), int(c), bool(p))
            for a, b, c, p in zip(lo, hi, count, periodic)
        )
    elif engine_kind != "analytic":
        raise ScenarioError(f"unknown reach engine {engine_kind!r}")

    run_doc = doc.get("run", {})
    t_end = float(run_doc.get("t_end", horizon(phi)))
    if t_end + 1e-9 < horizon(phi):
        raise ScenarioError(
            f"t_end={t_end:g} is shorter than the formula horizon {horizon(phi):g}")
    branch = run_doc.get("branch", "auto")
    if branch != "auto":
        branch = int(branch)
    run = RunConfig(
        dt=float(run_doc.get("dt", 0.05)),
        t_end=t_end,
        alpha=float(run_doc.get("alpha", 1.0)),
        soft=bool(run_doc.get("soft", False)),
        use_nominal=bool(run_doc.get("use_nominal", True)),
        branch=branch,
        start_check=run_doc.get("start_check", "warn"),
    )

    starts = [np.asarray(s, dtype=float) for s in run_doc.get("starts", [])]
    for s in starts:
        if s.shape != (dyn.n,):
            raise ScenarioError(
                f"start state {s.tolist()} has {s.size} entries, state needs {dyn.n}")

    used = _predicate_names(phi)
    missing = used - set(predicates)
    if missing:
        raise ScenarioError(f"formula uses undeclared predicates: {', '.join(sorted(missing))}")

    return Scenario(
        name=name, dyn=dyn, formula_text=text, phi=phi, phi_desired=phi_desired,
        predicates=predicates, engine_kind=engine_kind, axes=axes,
        starts=starts, run=run, reach_step=reach_step, input_scale=input_scale,
    )


def _parse_region(name: str, doc: dict, state_dim: int) -> Region:
    shape = _require(doc, "shape", f"[predicates.{name}]")
    if shape == "disk":
        center = tuple(float(v) for v in _require(doc, "center", name))
        region: Region = Disk(center, float(_require(doc, "radius", name)))
        d = len(center)
    elif shape == "rect":
        lo = tuple(float(v) for v in _require(doc, "lo", name))
        hi = tuple(float(v) for v in _require(doc, "hi", name))
        if len(lo) != len(hi):
            raise ScenarioError(f"[predicates.{name}] lo and hi differ in length")
        region = Box(lo, hi)
        d = len(lo)
    elif shape == "halfplane":
        normal = tuple(float(v) for v in _require(doc, "normal", name))
        region = HalfPlane(normal, float(_require(doc, "offset", name)))
        d = len(normal)
    else:
        raise ScenarioError(f"[predicates.{name}] has unknown shape {shape!r}")
    if d > state_dim:
        raise ScenarioError(
            f"[predicates.{name}] has dimension {d} but the state has {state_dim}")
    if d < state_dim or doc.get("projected", False):
        region = _as_projected(region)
    return region


def _as_projected(region: Region) -> Region:
    from dataclasses import replace

    return replace(region, projected=True)


def _predicate_names(phi: Formula) -> set:
    from .formula import NegPredicate, Predicate

    names: set = set()

    def walk(node):
        if isinstance(node, (Predicate, NegPredicate)):
            names.add(node.name)
        for child in getattr(node, "children", ()) or ():
            walk(child)
        for attr in ("child", "left", "right"):
            sub = getattr(node, attr, None)
            if sub is not None:
                walk(sub)

    walk(phi)
    return names
