"""Circuit graph, normal tree and fundamental loop/cut-set matrices.

Canonical edge order is twigs first (voltage sources E, capacitors C, twig
resistors R_t) followed by links (link resistors R_l, inductors L, current
sources I). Within a class, netlist order is kept. With that order

    B = [B_twig | 1],   Q = [1 | Q_link],   B_twig = -Q_link^T.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditionViolation, DisconnectedGraphError, RLCError
from .netlist import CircuitSpec

__all__ = [
    "Edge",
    "CircuitGraph",
    "NormalTreeDecomposition",
    "LoopCutsetMatrices",
    "ThermoConsistencyReport",
    "build_graph",
    "find_normal_tree",
    "build_matrices",
    "check_thermo_consistency",
    "analyze",
]

# netlist letter -> class label used for the block partition
_CLASS = {"V": "E", "C": "C", "R": "R", "L": "L", "I": "I"}
_PRIORITY = {"E": 4, "C": 3, "R": 2, "L": 1, "I": 0}
TWIG_CLASSES = ("E", "C", "R")
LINK_CLASSES = ("R", "L", "I")


@dataclass(frozen=True)
class Edge:
    name: str
    cls: str  # one of E, C, R, L, I
    tail: int
    head: int
    element_index: int


@dataclass(frozen=True)
class CircuitGraph:
    """Oriented multigraph with one edge per two-terminal element."""

    nodes: tuple
    edges: tuple

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def b(self) -> int:
        return len(self.edges)

    def edge_index(self, name: str) -> int:
        for i, e in enumerate(self.edges):
            if e.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class NormalTreeDecomposition:
    """Twig and link edge indices in canonical order.

    ``twigs`` are ordered E, C, R_t and ``links`` R_l, L, I.
    """

    twigs: tuple
    links: tuple
    twig_classes: tuple
    link_classes: tuple

    @property
    def order(self) -> tuple:
        return self.twigs + self.links

    def count(self, side: str, cls: str) -> int:
        classes = self.twig_classes if side == "twig" else self.link_classes
        return sum(1 for c in classes if c == cls)


@dataclass(frozen=True)
class LoopCutsetMatrices:
    """Fundamental loop and cut-set matrices in canonical column order.

    ``B`` is ``b_l x b`` and ``Q`` is ``b_t x b``; ``blocks`` maps names such
    as ``"CL"`` to the corresponding sub-block of ``Q_link`` (rows: twig
    class, columns: link class).
    """

    B: np.ndarray
    Q: np.ndarray
    B_twig: np.ndarray
    Q_link: np.ndarray
    twig_names: tuple
    link_names: tuple
    blocks: dict = field(repr=False)

    def block(self, rows: str, cols: str) -> np.ndarray:
        return self.blocks[rows + cols]

    @property
    def Q_RR(self) -> np.ndarray:
        return self.blocks["RR"]


@dataclass(frozen=True)
class ThermoConsistencyReport:
    """Outcome of the two equivalent consistency tests.

    Attributes
    ----------
    qrr_zero : bool
        Whether the Q_RR block vanishes.
    r_network_acyclic : bool
        Tree-free test: after removing L and I edges and contracting every
        E/C component, the remaining resistor multigraph is acyclic.
    cycle : tuple of str
        Resistors closing a surviving cycle (empty when consistent).
    """

    qrr_zero: bool
    r_network_acyclic: bool
    cycle: tuple = ()

    @property
    def consistent(self) -> bool:
        return self.qrr_zero and self.r_network_acyclic

    @property
    def agree(self) -> bool:
        return self.qrr_zero == self.r_network_acyclic

    def message(self) -> str:
        if self.consistent:
            return "thermodynamically consistent: Q_RR = 0, resistor network acyclic after contraction"
        names = ", ".join(self.cycle)
        return (
            "Q_RR != 0: resistors "
            + names
            + " form a loop once capacitors and voltage sources are shorted; local heat currents "
            "diverge in the white-noise limit (add a series inductance or a parallel capacitance)"
        )


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def build_graph(spec: CircuitSpec) -> CircuitGraph:
    """One oriented edge per element; K lines add no edge."""
    nodes = spec.nodes
    index = {nd: i for i, nd in enumerate(nodes)}
    edges = []
    for k, el in enumerate(spec.elements):
        if el.kind == "K":
            continue
        edges.append(Edge(el.name, _CLASS[el.kind], index[el.node_a], index[el.node_b], k))
    g = CircuitGraph(tuple(nodes), tuple(edges))
    uf = _UnionFind(g.n)
    for e in edges:
        uf.union(e.tail, e.head)
    if len({uf.find(i) for i in range(g.n)}) > 1:
        spec.check_connected()
        raise DisconnectedGraphError("circuit graph is disconnected")
    return g


def _tree_path_edges(g, tree_edges, start, goal):
    """Edges (as indices) on the unique tree path from start to goal."""
    adj = {i: [] for i in range(g.n)}
    for ei in tree_edges:
        e = g.edges[ei]
        adj[e.tail].append((e.head, ei))
        adj[e.head].append((e.tail, ei))
    prev = {start: None}
    queue = deque([start])
    while queue:
        a = queue.popleft()
        if a == goal:
            break
        for b, ei in adj[a]:
            if b not in prev:
                prev[b] = (a, ei)
                queue.append(b)
    path = []
    a = goal
    while prev.get(a) is not None:
        a, ei = prev[a]
        path.append(ei)
    return path[::-1]


def find_normal_tree(g: CircuitGraph) -> NormalTreeDecomposition:
    """Maximum-priority spanning tree (E > C > R > L > I, netlist order on ties).

    Raises
    ------
    ConditionViolation
        ``condition == "i"`` if a capacitor or voltage source closes a loop of
        such elements; ``condition == "ii"`` if an inductor or current source
        is forced into the tree (it spans a cut-set of L/I edges only).
    """
    order = sorted(range(g.b), key=lambda i: (-_PRIORITY[g.edges[i].cls], g.edges[i].element_index))
    uf = _UnionFind(g.n)
    tree = []
    for ei in order:
        e = g.edges[ei]
        if uf.union(e.tail, e.head):
            tree.append(ei)
        elif e.cls in ("E", "C"):
            loop = _tree_path_edges(g, tree, e.head, e.tail)
            names = [e.name] + [g.edges[k].name for k in loop]
            raise ConditionViolation(
                "i",
                names,
                "capacitors/voltage sources form a loop ("
                + ", ".join(names)
                + "); add a small stray inductance in series",
            )
    in_tree = set(tree)
    for ei in tree:
        e = g.edges[ei]
        if e.cls in ("L", "I"):
            side = _component_without(g, tree, ei, e.tail)
            cut = [
                g.edges[k].name
                for k in range(g.b)
                if (g.edges[k].tail in side) != (g.edges[k].head in side)
            ]
            raise ConditionViolation(
                "ii",
                cut,
                "inductors/current sources form a cut-set ("
                + ", ".join(cut)
                + "); add a small stray capacitance in parallel",
            )

    def ordered(idx, classes):
        out = []
        for cls in classes:
            out += sorted((i for i in idx if g.edges[i].cls == cls), key=lambda i: g.edges[i].element_index)
        return tuple(out)

    twigs = ordered(in_tree, TWIG_CLASSES)
    links = ordered(set(range(g.b)) - in_tree, LINK_CLASSES)
    return NormalTreeDecomposition(
        twigs=twigs,
        links=links,
        twig_classes=tuple(g.edges[i].cls for i in twigs),
        link_classes=tuple(g.edges[i].cls for i in links),
    )


def _component_without(g, tree, removed, start):
    adj = {i: [] for i in range(g.n)}
    for ei in tree:
        if ei == removed:
            continue
        e = g.edges[ei]
        adj[e.tail].append(e.head)
        adj[e.head].append(e.tail)
    seen = {start}
    queue = deque([start])
    while queue:
        a = queue.popleft()
        for b in adj[a]:
            if b not in seen:
                seen.add(b)
                queue.append(b)
    return seen


def build_matrices(g: CircuitGraph, t: NormalTreeDecomposition) -> LoopCutsetMatrices:
    """Fundamental loop matrix from tree paths, cut-set matrix from tree cuts.

    The two are computed independently and cross-checked (``B_twig == -Q_link^T``).
    """
    bt, bl = len(t.twigs), len(t.links)
    twig_pos = {ei: k for k, ei in enumerate(t.twigs)}

    B_twig = np.zeros((bl, bt), dtype=np.int64)
    for row, li in enumerate(t.links):
        link = g.edges[li]
        # loop: along the link tail -> head, then back head -> tail through the tree
        node = link.head
        for ei in _tree_path_edges(g, t.twigs, link.head, link.tail):
            e = g.edges[ei]
            if e.tail == node:
                B_twig[row, twig_pos[ei]] = 1
                node = e.head
            else:
                B_twig[row, twig_pos[ei]] = -1
                node = e.tail

    Q_full = np.zeros((bt, bt + bl), dtype=np.int64)
    for row, ti in enumerate(t.twigs):
        twig = g.edges[ti]
        side = _component_without(g, t.twigs, ti, twig.tail)
        for col, ei in enumerate(t.order):
            e = g.edges[ei]
            a, b = e.tail in side, e.head in side
            if a and not b:
                Q_full[row, col] = 1
            elif b and not a:
                Q_full[row, col] = -1
    Q_link = Q_full[:, bt:]
    if not np.array_equal(Q_full[:, :bt], np.eye(bt, dtype=np.int64)) or not np.array_equal(B_twig, -Q_link.T):
        raise RLCError("internal error: loop and cut-set matrices are inconsistent")

    B = np.hstack([B_twig, np.eye(bl, dtype=np.int64)])
    blocks = {}
    for rc in TWIG_CLASSES:
        rows = [k for k, c in enumerate(t.twig_classes) if c == rc]
        for cc in LINK_CLASSES:
            cols = [k for k, c in enumerate(t.link_classes) if c == cc]
            blocks[rc + cc] = Q_link[np.ix_(rows, cols)]
    return LoopCutsetMatrices(
        B=B,
        Q=Q_full,
        B_twig=B_twig,
        Q_link=Q_link,
        twig_names=tuple(g.edges[i].name for i in t.twigs),
        link_names=tuple(g.edges[i].name for i in t.links),
        blocks=blocks,
    )


def check_thermo_consistency(g: CircuitGraph, m: LoopCutsetMatrices) -> ThermoConsistencyReport:
    """Compare the Q_RR = 0 test with the tree-free contraction test."""
    qrr_zero = not np.any(m.Q_RR)
    uf = _UnionFind(g.n)
    for e in g.edges:
        if e.cls in ("E", "C"):
            uf.union(e.tail, e.head)
    acyclic = True
    cycle: tuple = ()
    forest: list = []
    for ei, e in enumerate(g.edges):
        if e.cls != "R":
            continue
        a, b = uf.find(e.tail), uf.find(e.head)
        if a == b:
            # both ends shorted by E/C: internal edge, dropped by the contraction
            continue
        if not _contracted_union(forest, a, b):
            acyclic = False
            cycle = (e.name,) + _contracted_path(g, uf, forest, a, b)
            break
        forest.append((a, b, e.name))
    return ThermoConsistencyReport(qrr_zero, acyclic, cycle)


def _contracted_union(forest, a, b) -> bool:
    # connectivity of the contracted resistor forest built so far
    adj: dict = {}
    for x, y, _ in forest:
        adj.setdefault(x, []).append(y)
        adj.setdefault(y, []).append(x)
    seen = {a}
    queue = deque([a])
    while queue:
        x = queue.popleft()
        if x == b:
            return False
        for y in adj.get(x, []):
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return True


def _contracted_path(g, uf, forest, a, b):
    adj: dict = {}
    for x, y, nm in forest:
        adj.setdefault(x, []).append((y, nm))
        adj.setdefault(y, []).append((x, nm))
    prev = {a: None}
    queue = deque([a])
    while queue:
        x = queue.popleft()
        for y, nm in adj.get(x, []):
            if y not in prev:
                prev[y] = (x, nm)
                queue.append(y)
    names = []
    x = b
    while prev.get(x) is not None:
        x, nm = prev[x]
        names.append(nm)
    return tuple(names)


def analyze(spec: CircuitSpec):
    """Convenience pipeline: graph, tree, matrices and consistency report."""
    g = build_graph(spec)
    t = find_normal_tree(g)
    m = build_matrices(g, t)
    return g, t, m, check_thermo_consistency(g, m)
