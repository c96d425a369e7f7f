"""Closed-loop control under a family of time-varying barriers.

Every controller step performs, in order:

1. the tree's online start-time update at the current state, which may
   fix set nodes and tighten the windows of their descendants,
2. a resynchronization of each barrier whose set node moved, shifting
   its time profile by the change in the node's latest start,
3. assembly of one linear constraint per barrier that is active at the
   current instant:  a.u >= c  with  a = g(x)^T grad_x b  and
   c = -(grad_x b . f(x) + db/dt + alpha(b)),
4. a nominal input that steers toward the most urgent barrier (the one
   whose active window ends soonest), saturating the input box,
5. a small quadratic program projecting the nominal input onto the
   constraints, or its slack-relaxed variant in soft mode,
6. a fourth-order Runge-Kutta step with the input held constant.

The loop stops early and reports a diagnostic if the program is ever
infeasible in hard mode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cbf import Cbf
from .dynamics import BALL, Dynamics
from .qp import QpResult, solve_qp, solve_qp_soft
from .tree import Tree

__all__ = [
    "RunConfig",
    "RunResult",
    "cbf_row",
    "nominal_control",
    "rk4_step",
    "pick_branch",
    "run_closed_loop",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_events_jsonl",
]

_EPS = 1e-9


@dataclass
class RunConfig:
    dt: float = 0.05
    t_end: float = 0.0
    alpha: float = 1.0
    soft: bool = False
    use_nominal: bool = True
    branch: int | str = "auto"  # branch index, or "auto" to pick by admissibility
    start_check: str = "warn"  # "warn" | "error" | "ignore"


@dataclass
class RunResult:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    statuses: list[str]
    active_labels: list[tuple[str, ...]]
    events: list[dict]
    barrier_log: list[tuple[float, int, float]]  # (t, fragment index, value)
    branch_index: int
    status: str  # "completed" | "infeasible"
    diagnostic: str | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.status == "completed"


def cbf_row(cbf: Cbf, dyn: Dynamics, x: np.ndarray, t: float, alpha: float = 1.0):
    """Linear constraint a . u >= c enforcing db/dt >= -alpha * b along
    the dynamics, evaluated at (x, t)."""
    ev = cbf.eval(x, t)
    a = dyn.g(x).T @ ev.grad
    c = -(float(ev.grad @ dyn.f(x)) + ev.d_dt + alpha * ev.value)
    return a, c, ev


def nominal_control(pairs, dyn: Dynamics, x: np.ndarray) -> np.ndarray:
    """Steepest-ascent input for the most urgent active barrier: the one
    whose window closes soonest, ties broken toward the least satisfied
    one (smallest current value).  pairs is a list of (cbf, eval)."""
    u = np.zeros(dyn.m)
    if not pairs:
        return u
    cbf, ev = min(pairs, key=lambda p: (round(p[0].window()[1], 6), p[1].value))
    a = dyn.g(x).T @ ev.grad
    if dyn.input_kind == BALL:
        norm = float(np.linalg.norm(a))
        if norm > _EPS:
            u = dyn.ball_speed() * a / norm
    else:
        for j in range(dyn.m):
            if abs(a[j]) > _EPS:
                u[j] = dyn.bounds[j] * np.sign(a[j])
    return u


def rk4_step(dyn: Dynamics, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    k1 = dyn.deriv(x, u)
    k2 = dyn.deriv(x + 0.5 * dt * k1, u)
    k3 = dyn.deriv(x + 0.5 * dt * k2, u)
    k4 = dyn.deriv(x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def pick_branch(tree: Tree, x0: np.ndarray, choice: int | str = "auto"):
    """Resolve the branch to follow.  "auto" selects the first branch
    whose gate set contains x0; an explicit index is honored even when
    inadmissible (a warning is returned alongside)."""
    branches = tree.branches()
    warnings: list[str] = []
    if choice == "auto":
        for br in branches:
            if tree.set_node(br.gate_id).contains(x0):
                return br, warnings
        warnings.append("no branch gate contains the start state; using branch 0")
        return branches[0], warnings
    idx = int(choice)
    if not 0 <= idx < len(branches):
        raise ValueError(f"branch index {idx} out of range (tree has {len(branches)})")
    br = branches[idx]
    if not tree.set_node(br.gate_id).contains(x0):
        warnings.append(f"branch {idx} gate does not contain the start state")
    return br, warnings


def run_closed_loop(tree: Tree, cbfs: list[Cbf], dyn: Dynamics, x0,
                    cfg: RunConfig) -> RunResult:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (dyn.n,):
        raise ValueError(f"start state has shape {x0.shape}, expected ({dyn.n},)")
    warnings: list[str] = []
    root = tree.set_node(tree.root)
    if cfg.start_check != "ignore" and not root.contains(x0):
        msg = "start state lies outside the root set; no guarantee applies"
        if cfg.start_check == "error":
            raise ValueError(msg)
        warnings.append(msg)

    branch, branch_warnings = pick_branch(tree, x0, cfg.branch)
    warnings.extend(branch_warnings)
    frag_by_index = {f.index: f for f in tree.fragments()}
    branch_cbfs = [c for c in cbfs if c.fragment_index in branch.fragment_indices]
    branch_cbfs.sort(key=lambda c: c.fragment_index)

    n_steps = int(round(cfg.t_end / cfg.dt))
    times = np.arange(n_steps + 1) * cfg.dt
    states = np.zeros((n_steps + 1, dyn.n))
    inputs = np.zeros((n_steps + 1, dyn.m))
    statuses: list[str] = []
    active_labels: list[tuple[str, ...]] = []
    events: list[dict] = []
    barrier_log: list[tuple[float, int, float]] = []
    states[0] = x0
    x = x0.copy()
    status = "completed"
    diagnostic = None
    k_stop = n_steps

    for k in range(n_steps):
        t = float(times[k])
        for set_id, fix_t in tree.online_update(t, x):
            events.append({
                "t": t,
                "node_id": tree.set_node(set_id).label,
                "fixed_to": fix_t,
            })
        for cbf in branch_cbfs:
            node = tree.set_node(frag_by_index[cbf.fragment_index].set_id)
            delta = node.start_hi - cbf.applied_start_hi
            if abs(delta) > _EPS:
                cbf.shift(delta, now=t)

        pairs = []
        rows_a: list[np.ndarray] = []
        rows_c: list[float] = []
        for cbf in branch_cbfs:
            if not cbf.active(t):
                continue
            a, c, ev = cbf_row(cbf, dyn, x, t, cfg.alpha)
            pairs.append((cbf, ev))
            rows_a.append(a)
            rows_c.append(c)
            barrier_log.append((t, cbf.fragment_index, ev.value))

        u_nom = nominal_control(pairs, dyn, x) if cfg.use_nominal else np.zeros(dyn.m)
        u_max = np.asarray(dyn.bounds, dtype=float)
        if rows_a:
            solver = solve_qp_soft if cfg.soft else solve_qp
            sol: QpResult = solver(np.array(rows_a), np.array(rows_c), u_max, u_nom)
        else:
            sol = solve_qp(np.zeros((0, dyn.m)), np.zeros(0), u_max, u_nom)
        if not sol.ok:
            status = "infeasible"
            labels = ", ".join(c.label for c, _ in pairs)
            diagnostic = (f"control program infeasible at t={t:.3f}, "
                          f"x={np.array2string(x, precision=3)}, active: {labels}")
            k_stop = k
            break
        u = sol.u
        inputs[k] = u
        statuses.append(sol.status if not cfg.soft or sol.slack <= 1e-6 else "soft")
        active_labels.append(tuple(c.label for c, _ in pairs))
        x = rk4_step(dyn, x, u, cfg.dt)
        if dyn.kind == "unicycle":
            x[2] = (x[2] + np.pi) % (2.0 * np.pi) - np.pi
        states[k + 1] = x

    if status == "infeasible":
        times = times[: k_stop + 1]
        states = states[: k_stop + 1]
        inputs = inputs[: k_stop + 1]
        statuses.append("infeasible")
    else:
        statuses.append("end")
    active_labels.append(())
    return RunResult(times, states, inputs, statuses, active_labels, events,
                     barrier_log, branch.index, status, diagnostic, warnings)


def write_trajectory_csv(path, result: RunResult) -> None:
    n = result.states.shape[1]
    m = result.inputs.shape[1]
    header = (["t"] + [f"x{i + 1}" for i in range(n)]
              + [f"u{j + 1}" for j in range(m)]
              + ["qp_status", "active_fragments"])
    lines = [",".join(header)]
    for k, t in enumerate(result.times):
        cells = [_num(t)]
        cells += [_num(v) for v in result.states[k]]
        cells += [_num(v) for v in result.inputs[k]]
        cells.append(result.statuses[k])
        cells.append(";".join(result.active_labels[k]))
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory_csv(path):
    """Returns (times, states) from a trajectory file; inputs and status
    columns are ignored."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        n = sum(1 for name in header if name.startswith("x") and name[1:].isdigit())
        times = []
        states = []
        for line in fh:
            cells = line.strip().split(",")
            if not cells or cells[0] == "":
                continue
            times.append(float(cells[0]))
            states.append([float(v) for v in cells[1 : 1 + n]])
    return np.asarray(times), np.asarray(states)


def write_events_jsonl(path, events: list[dict]) -> None:
    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")


def _num(v: float) -> str:
    return "%.12g" % float(v)
