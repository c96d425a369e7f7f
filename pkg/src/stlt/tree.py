"""Tree of set nodes and operator nodes built from a formula.

Set nodes and operator nodes alternate: the root and the leaves are
set nodes, every non-leaf set node has exactly one operator child, and
the children of operator nodes are set nodes.  Leaves carry predicate
regions; the set node above an operator is computed from its children
(reachability for F and G, lazy intersection or union for the Boolean
operators).  Because construction requires desired form, disjunctions
appear only in the top layers.

Each set node X carries a start-time interval [start_lo, start_hi] and
a duration D, filled in by compute_time_codes:

    root gets [0, 0] and D = 0, and walking down one level through
    operator node OP from grandparent set node P,

        start(X) = start(P) + offset(OP)
        D(X)     = D(P) + extra(OP)

    with offset [0,0] for Boolean operators, [a,b] for F[a,b], [a,a]
    for G[a,b], and extra = b - a for G[a,b], else 0.

The end time t_e(X) = start_hi + D is when the obligation attached to
X can expire.  While a controller runs, online_update fixes start
times to the current time whenever the state enters a set node inside
its start window, then re-propagates the codes of the still-undecided
nodes below.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .formula import (
    And,
    Eventually,
    Always,
    Formula,
    Interval,
    NegPredicate,
    Or,
    Predicate,
    TrueFormula,
    is_desired_form,
)
from .reach import ReachEngine
from .regions import Complement, Intersection, Region, Union, Universe, region_value

__all__ = ["SetNode", "OpNode", "TemporalFragment", "Branch", "Tree", "build_tree"]

_EPS = 1e-9


@dataclass
class SetNode:
    id: int
    region: Region
    parent: int | None = None
    children: tuple = ()
    start_lo: float = 0.0
    start_hi: float = 0.0
    duration: float = 0.0
    fixed: bool = False
    label: str = ""

    @property
    def t_end(self) -> float:
        return self.start_hi + self.duration

    def contains(self, x) -> bool:
        return region_value(self.region, x) >= 0.0


@dataclass
class OpNode:
    id: int
    kind: str  # "and" | "or" | "F" | "G"
    interval: Interval | None = None
    parent: int | None = None
    children: tuple = ()

    @property
    def temporal(self) -> bool:
        return self.kind in ("F", "G")

    def describe(self) -> str:
        if self.temporal:
            return "%s%s" % (self.kind, self.interval)
        return "AND" if self.kind == "and" else "OR"


@dataclass(frozen=True)
class TemporalFragment:
    """A temporal operator node together with its child set node."""

    index: int
    op_id: int
    set_id: int
    kind: str
    interval: Interval
    predecessor: int | None
    top_layer: bool

    @property
    def label(self) -> str:
        return "f%d" % (self.index + 1)


@dataclass(frozen=True)
class Branch:
    """Complete paths grouped by their prefix through the last
    disjunction.  The gate set node decides admissibility: a branch can
    be pursued from x0 only if x0 lies in its gate region."""

    index: int
    gate_id: int
    path_indices: tuple
    fragment_indices: tuple


class Tree:
    def __init__(self, engine: ReachEngine):
        self.engine = engine
        self.nodes: list = []
        self.root: int = -1

    # -- construction ------------------------------------------------------

    def _add_set(self, region: Region) -> int:
        node = SetNode(id=len(self.nodes), region=region)
        self.nodes.append(node)
        return node.id

    def _add_op(self, kind: str, interval: Interval | None, parent: int, children) -> int:
        node = OpNode(id=len(self.nodes), kind=kind, interval=interval,
                      parent=parent, children=tuple(children))
        self.nodes.append(node)
        self.nodes[parent].children = (node.id,)
        for c in children:
            self.nodes[c].parent = node.id
        return node.id

    def set_node(self, i: int) -> SetNode:
        node = self.nodes[i]
        if not isinstance(node, SetNode):
            raise TypeError("node %d is not a set node" % i)
        return node

    def op_node(self, i: int) -> OpNode:
        node = self.nodes[i]
        if not isinstance(node, OpNode):
            raise TypeError("node %d is not an operator node" % i)
        return node

    def set_nodes(self):
        return [n for n in self.nodes if isinstance(n, SetNode)]

    def op_nodes(self):
        return [n for n in self.nodes if isinstance(n, OpNode)]

    def _assign_labels(self):
        """Level-order labels X0, X1, ... for set nodes."""
        order = self._bfs_set_ids()
        for k, i in enumerate(order):
            self.set_node(i).label = "X%d" % k

    def _bfs_set_ids(self):
        order, queue = [], [self.root]
        while queue:
            i = queue.pop(0)
            node = self.nodes[i]
            if isinstance(node, SetNode):
                order.append(i)
            queue.extend(node.children)
        return order

    def labelled(self, label: str) -> SetNode:
        for n in self.set_nodes():
            if n.label == label:
                return n
        raise KeyError(label)

    # -- structure queries -------------------------------------------------

    def complete_paths(self):
        """Root-to-leaf node id sequences, leftmost leaf first."""
        paths = []

        def walk(i, prefix):
            node = self.nodes[i]
            prefix = prefix + [i]
            if not node.children:
                paths.append(tuple(prefix))
                return
            for c in node.children:
                walk(c, prefix)

        walk(self.root, [])
        return paths

    def fragments(self):
        """Temporal fragments in depth-first preorder, each with its
        closest temporal ancestor (predecessor) resolved."""
        frags: list[TemporalFragment] = []
        by_op: dict[int, int] = {}

        def pred_of(op: OpNode):
            cur = op.parent  # parent set node
            while cur is not None:
                above = self.nodes[cur].parent
                if above is None:
                    return None, True
                above_op = self.op_node(above)
                if above_op.temporal:
                    return by_op[above_op.id], False
                cur = above_op.parent
            return None, True

        def walk(i):
            node = self.nodes[i]
            if isinstance(node, OpNode) and node.temporal:
                pred, top = pred_of(node)
                frag = TemporalFragment(
                    index=len(frags), op_id=node.id, set_id=node.children[0],
                    kind=node.kind, interval=node.interval,
                    predecessor=pred, top_layer=top,
                )
                by_op[node.id] = frag.index
                frags.append(frag)
            for c in node.children:
                walk(c)

        walk(self.root)
        return frags

    def branches(self):
        """Group complete paths by their prefix through the last
        disjunction on the path (the whole tree if no disjunction)."""
        paths = self.complete_paths()
        frags = self.fragments()
        op_to_frag = {f.op_id: f.index for f in frags}
        groups: dict[tuple, list] = {}
        for pi, path in enumerate(paths):
            last_or = None
            for k, node_id in enumerate(path):
                node = self.nodes[node_id]
                if isinstance(node, OpNode) and node.kind == "or":
                    last_or = k
            key = path[: last_or + 2] if last_or is not None else (self.root,)
            groups.setdefault(key, []).append(pi)
        branches = []
        for key in sorted(groups, key=lambda k: groups[k][0]):
            path_idx = groups[key]
            frag_idx = sorted(
                {op_to_frag[n] for pi in path_idx for n in paths[pi] if n in op_to_frag}
            )
            branches.append(
                Branch(
                    index=len(branches), gate_id=key[-1],
                    path_indices=tuple(path_idx), fragment_indices=tuple(frag_idx),
                )
            )
        return branches

    def check_disjunction_layers(self):
        """All complete paths pass through a disjunction, or none do."""
        flags = {
            any(isinstance(self.nodes[i], OpNode) and self.nodes[i].kind == "or" for i in path)
            for path in self.complete_paths()
        }
        if len(flags) > 1:
            raise AssertionError("some complete paths pass a disjunction and some do not")

    # -- time codes ----------------------------------------------------------

    @staticmethod
    def _op_offsets(op: OpNode):
        if op.kind in ("and", "or"):
            return 0.0, 0.0, 0.0
        a, b = op.interval.lo, op.interval.hi
        if op.kind == "F":
            return a, b, 0.0
        return a, a, b - a

    def compute_time_codes(self):
        root = self.set_node(self.root)
        root.start_lo = root.start_hi = 0.0
        root.duration = 0.0
        for i in self._bfs_set_ids():
            node = self.set_node(i)
            if i == self.root:
                node.fixed = True
                continue
            op = self.op_node(node.parent)
            parent_set = self.set_node(op.parent)
            lo, hi, extra = self._op_offsets(op)
            node.start_lo = parent_set.start_lo + lo
            node.start_hi = parent_set.start_hi + hi
            node.duration = parent_set.duration + extra
            node.fixed = abs(node.start_hi - node.start_lo) <= _EPS

    def online_update(self, t: float, x) -> list:
        """Fix the start time of every set node the state has reached
        inside its start window, then re-propagate the start intervals
        of the still-undecided nodes.  Repeats until no new node fires
        (fixing a node can move a descendant window onto t).  Returns
        (set_id, t) pairs for the nodes fixed by this call.

        Only children of temporal operators fix themselves: their start
        is the operator's quantified instant, so entering the set picks
        the witness.  Children of Boolean operators share their parent's
        start and become fixed through propagation alone; letting one
        conjunct fix early would desynchronize its siblings."""
        events = []
        while True:
            fired = []
            for i in self._bfs_set_ids():
                node = self.set_node(i)
                if node.fixed or node.start_hi - node.start_lo <= _EPS:
                    continue
                if not self.op_node(node.parent).temporal:
                    continue
                if node.start_lo - _EPS <= t <= node.start_hi + _EPS and node.contains(x):
                    node.start_lo = node.start_hi = t
                    node.fixed = True
                    fired.append((i, t))
            if not fired:
                break
            events.extend(fired)
            for i in self._bfs_set_ids():
                node = self.set_node(i)
                if i == self.root or node.fixed:
                    continue
                op = self.op_node(node.parent)
                parent_set = self.set_node(op.parent)
                lo, hi, _ = self._op_offsets(op)
                node.start_lo = parent_set.start_lo + lo
                node.start_hi = parent_set.start_hi + hi
                if node.start_hi - node.start_lo <= _EPS:
                    node.fixed = True
        return events

    # -- export --------------------------------------------------------------

    def to_dot(self) -> str:
        out = io.StringIO()
        out.write("digraph tree {\n  ordering=out;\n")
        for node in self.nodes:
            if isinstance(node, SetNode):
                out.write(
                    '  n%d [shape=ellipse, label="%s\\n[%g,%g] D=%g"];\n'
                    % (node.id, node.label, node.start_lo, node.start_hi, node.duration)
                )
            else:
                out.write('  n%d [shape=box, label="%s"];\n' % (node.id, node.describe()))
        for node in self.nodes:
            for c in node.children:
                out.write("  n%d -> n%d;\n" % (node.id, c))
        out.write("}\n")
        return out.getvalue()

    def codes_csv(self) -> str:
        rows = ["node,start_lo,start_hi,duration,t_end,fixed"]
        for i in self._bfs_set_ids():
            node = self.set_node(i)
            rows.append(
                "%s,%.10g,%.10g,%.10g,%.10g,%d"
                % (node.label, node.start_lo, node.start_hi, node.duration,
                   node.t_end, node.fixed)
            )
        return "\n".join(rows) + "\n"


def build_tree(phi: Formula, predicates: dict, engine: ReachEngine) -> Tree:
    """Build the tree for a desired-form formula.

    `predicates` maps predicate names to regions; a negated predicate
    becomes the complement of its declared region.
    """
    if not is_desired_form(phi):
        raise ValueError("formula is not in desired form; call to_desired_form first")
    tree = Tree(engine)

    def region_for(name: str) -> Region:
        try:
            return predicates[name]
        except KeyError:
            raise KeyError("formula uses undeclared predicate %r" % name) from None

    def build(node: Formula) -> int:
        if isinstance(node, TrueFormula):
            return tree._add_set(Universe())
        if isinstance(node, Predicate):
            return tree._add_set(region_for(node.name))
        if isinstance(node, NegPredicate):
            return tree._add_set(Complement(region_for(node.name)))
        if isinstance(node, (And, Or)):
            child_ids = [build(c) for c in node.children]
            regions = tuple(tree.set_node(c).region for c in child_ids)
            if isinstance(node, And):
                parent = tree._add_set(Intersection(regions))
                tree._add_op("and", None, parent, child_ids)
            else:
                parent = tree._add_set(Union(regions))
                tree._add_op("or", None, parent, child_ids)
            return parent
        if isinstance(node, (Eventually, Always)):
            kind = "F" if isinstance(node, Eventually) else "G"
            child_id = build(node.child)
            region = engine.set_node_region(kind, node.interval, tree.set_node(child_id).region)
            parent = tree._add_set(region)
            tree._add_op(kind, node.interval, parent, [child_id])
            return parent
        raise TypeError("cannot build a tree from %r" % (node,))

    tree.root = build(phi)
    tree._assign_labels()
    tree.compute_time_codes()
    tree.check_disjunction_layers()
    return tree
