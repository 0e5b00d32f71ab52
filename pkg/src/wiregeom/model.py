"""Quotient-graph models of periodic wire networks and their spanning-tree gauges.

A model is a finite directed multigraph whose edges carry integer
translation vectors in the basis of the period lattice.  An edge
``tail -> head`` with translation ``t`` joins the tail site in cell 0 to
the head site in cell ``t``; the reverse orientation is implied.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from numbers import Integral, Real
from typing import Any, Sequence

import numpy as np

__all__ = [
    "BUILTIN_NAMES",
    "Edge",
    "GaugeChoice",
    "ModelError",
    "QuotientGraphModel",
    "builtin",
    "dump_model",
    "load_model",
    "make_gauge",
    "random_gauge",
]

BUILTIN_NAMES = ("P", "D", "G", "honeycomb")

_TOP_FIELDS = {"name", "dim", "lattice_basis", "vertices", "positions", "edges"}
_REQUIRED_TOP = {"name", "dim", "lattice_basis", "vertices", "edges"}
_EDGE_FIELDS = {"from", "to", "translation", "weight"}


class ModelError(ValueError):
    """A model file or model object violates the schema or an invariant."""


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    translation: tuple[int, ...]
    weight: complex = 1.0

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head


@dataclass(frozen=True)
class QuotientGraphModel:
    """Finite quotient graph with per-edge lattice translations.

    Attributes
    ----------
    name : str
    dim : int
        Rank ``n`` of the translation lattice.
    lattice_basis : tuple of tuples
        ``n`` Cartesian vectors of length ``d >= n``.  Only used for
        reporting and for magnetic-flux conversion.
    vertices : tuple of str
    edges : tuple of Edge
    positions : tuple of tuples or None
        Optional fractional (lattice-basis) coordinates of each vertex.
        Needed only when a magnetic field is attached to the model.
    """

    name: str
    dim: int
    lattice_basis: tuple[tuple[float, ...], ...]
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    positions: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def has_loops(self) -> bool:
        return any(e.is_loop for e in self.edges)

    @property
    def is_real(self) -> bool:
        return all(complex(e.weight).imag == 0 for e in self.edges)

    def is_simply_laced(self) -> bool:
        """No self-loops and no two edges joining the same vertex pair."""
        pairs = [frozenset((e.tail, e.head)) for e in self.edges]
        return not self.has_loops and len(set(pairs)) == len(pairs)

    def with_weights(self, weights: Sequence[complex]) -> QuotientGraphModel:
        if len(weights) != self.num_edges:
            raise ModelError(f"expected {self.num_edges} weights, got {len(weights)}")
        edges = tuple(
            Edge(e.tail, e.head, e.translation, complex(w)) for e, w in zip(self.edges, weights)
        )
        return QuotientGraphModel(
            self.name, self.dim, self.lattice_basis, self.vertices, edges, self.positions
        )


def _validate(m: QuotientGraphModel) -> None:
    if not isinstance(m.dim, Integral) or isinstance(m.dim, bool) or m.dim < 1:
        raise ModelError(f"dim must be a positive integer, got {m.dim!r}")
    if len(m.vertices) < 1:
        raise ModelError("model needs at least one vertex")
    if len(m.edges) < 1:
        raise ModelError("model needs at least one edge")
    if len(m.lattice_basis) != m.dim:
        raise ModelError(f"lattice_basis must have {m.dim} vectors, got {len(m.lattice_basis)}")
    lens = {len(b) for b in m.lattice_basis}
    if len(lens) != 1 or min(lens) < m.dim:
        raise ModelError("lattice_basis vectors must share one length d >= dim")
    k = len(m.vertices)
    for i, e in enumerate(m.edges):
        for end in (e.tail, e.head):
            if not 0 <= end < k:
                raise ModelError(f"edge {i}: vertex index {end} out of range [0, {k})")
        if len(e.translation) != m.dim:
            raise ModelError(f"edge {i}: translation must have length {m.dim}")
        if e.is_loop and not any(e.translation):
            raise ModelError(f"edge {i}: self-loop with zero translation")
        if not np.isfinite(complex(e.weight)):
            raise ModelError(f"edge {i}: weight must be finite")
    if m.positions is not None:
        if len(m.positions) != k or any(len(p) != m.dim for p in m.positions):
            raise ModelError(f"positions must be {k} vectors of length {m.dim}")
    # connectivity
    parent = list(range(k))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in m.edges:
        parent[find(e.tail)] = find(e.head)
    if len({find(v) for v in range(k)}) != 1:
        raise ModelError("graph is not connected")


# -- serialization -------------------------------------------------------


def _need(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise ModelError(f"{where}: {msg}")


def _as_int(x: Any, where: str) -> int:
    _need(isinstance(x, int) and not isinstance(x, bool), where, f"expected integer, got {x!r}")
    return int(x)


def _as_real(x: Any, where: str) -> float:
    _need(isinstance(x, Real) and not isinstance(x, bool), where, f"expected number, got {x!r}")
    return float(x)


def _parse_weight(x: Any, where: str) -> complex:
    if isinstance(x, list):
        _need(len(x) == 2, where, "complex weight must be a [re, im] pair")
        return complex(_as_real(x[0], where), _as_real(x[1], where))
    return complex(_as_real(x, where))


def _vectors(x: Any, where: str, conv) -> tuple[tuple, ...]:
    _need(isinstance(x, list), where, "expected an array of arrays")
    out = []
    for i, row in enumerate(x):
        _need(isinstance(row, list), f"{where}[{i}]", "expected an array")
        out.append(tuple(conv(v, f"{where}[{i}]") for v in row))
    return tuple(out)


def model_from_dict(data: Any) -> QuotientGraphModel:
    _need(isinstance(data, dict), "model", "top level must be an object")
    unknown = set(data) - _TOP_FIELDS
    _need(not unknown, "model", f"unknown field(s) {sorted(unknown)}")
    missing = _REQUIRED_TOP - set(data)
    _need(not missing, "model", f"missing field(s) {sorted(missing)}")
    name = data["name"]
    _need(isinstance(name, str), "name", "expected a string")
    dim = _as_int(data["dim"], "dim")
    basis = _vectors(data["lattice_basis"], "lattice_basis", _as_real)
    verts = data["vertices"]
    _need(isinstance(verts, list) and all(isinstance(v, str) for v in verts),
          "vertices", "expected an array of strings")
    positions = None
    if "positions" in data:
        positions = _vectors(data["positions"], "positions", _as_real)
    _need(isinstance(data["edges"], list), "edges", "expected an array")
    edges = []
    for i, rec in enumerate(data["edges"]):
        where = f"edges[{i}]"
        _need(isinstance(rec, dict), where, "expected an object")
        unknown = set(rec) - _EDGE_FIELDS
        _need(not unknown, where, f"unknown field(s) {sorted(unknown)}")
        for key in ("from", "to", "translation"):
            _need(key in rec, where, f"missing field '{key}'")
        trans = rec["translation"]
        _need(isinstance(trans, list), f"{where}.translation", "expected an array of integers")
        edges.append(Edge(
            tail=_as_int(rec["from"], f"{where}.from"),
            head=_as_int(rec["to"], f"{where}.to"),
            translation=tuple(_as_int(t, f"{where}.translation") for t in trans),
            weight=_parse_weight(rec.get("weight", 1.0), f"{where}.weight"),
        ))
    return QuotientGraphModel(name, dim, basis, tuple(verts), tuple(edges), positions)


def load_model(text: str) -> QuotientGraphModel:
    """Parse and validate a JSON model file.

    Raises
    ------
    ModelError
        On malformed JSON (with line and column), schema violations
        (naming the field) or broken invariants.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return model_from_dict(data)


def model_to_dict(model: QuotientGraphModel) -> dict:
    edges = []
    for e in model.edges:
        rec: dict[str, Any] = {"from": e.tail, "to": e.head, "translation": list(e.translation)}
        w = complex(e.weight)
        if w != 1:
            rec["weight"] = w.real if w.imag == 0 else [w.real, w.imag]
        edges.append(rec)
    out: dict[str, Any] = {
        "name": model.name,
        "dim": model.dim,
        "lattice_basis": [list(b) for b in model.lattice_basis],
        "vertices": list(model.vertices),
    }
    if model.positions is not None:
        out["positions"] = [list(p) for p in model.positions]
    out["edges"] = edges
    return out


def dump_model(model: QuotientGraphModel) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def builtin(name: str) -> QuotientGraphModel:
    """One of the shipped geometries: ``"P"``, ``"D"``, ``"G"``, ``"honeycomb"``."""
    if name not in BUILTIN_NAMES:
        raise ModelError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    text = resources.files("wiregeom.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return load_model(text)


# -- gauges ---------------------------------------------------------------


@dataclass(frozen=True)
class GaugeChoice:
    """Rooted spanning tree plus vertex order.

    ``loop_vectors[i]`` is the net translation of the loop
    root -> tail -> head -> root for edge ``i`` in its stored
    orientation; the reverse orientation carries the negative.
    ``tree_paths[v]`` lists ``(edge, sign)`` steps from the root to
    ``v`` along the tree, ``sign = +1`` meaning tail-to-head.
    """

    root: int
    tree_edges: tuple[int, ...]
    order: tuple[int, ...]
    loop_vectors: tuple[tuple[int, ...], ...]
    tree_paths: tuple[tuple[tuple[int, int], ...], ...] = field(repr=False)

    @property
    def position(self) -> tuple[int, ...]:
        """Row index of each vertex under ``order``."""
        pos = [0] * len(self.order)
        for i, v in enumerate(self.order):
            pos[v] = i
        return tuple(pos)


def _bfs_tree(model: QuotientGraphModel, root: int) -> tuple[list[int], list[int]]:
    incident: list[list[int]] = [[] for _ in model.vertices]
    for i, e in enumerate(model.edges):
        if not e.is_loop:
            incident[e.tail].append(i)
            incident[e.head].append(i)
    seen = {root}
    order = [root]
    tree = []
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for i in incident[v]:
            e = model.edges[i]
            w = e.head if e.tail == v else e.tail
            if w not in seen:
                seen.add(w)
                tree.append(i)
                order.append(w)
                queue.append(w)
    return sorted(tree), order


def _tree_paths(model: QuotientGraphModel, root: int, tree: Sequence[int]):
    k = model.num_vertices
    if len(tree) != k - 1:
        raise ModelError(f"tree must have {k - 1} edges, got {len(tree)}")
    adj: list[list[tuple[int, int, int]]] = [[] for _ in range(k)]
    for i in tree:
        if not 0 <= i < model.num_edges:
            raise ModelError(f"tree edge index {i} out of range")
        e = model.edges[i]
        if e.is_loop:
            raise ModelError(f"tree edge {i} is a self-loop; tree is not acyclic")
        adj[e.tail].append((e.head, i, 1))
        adj[e.head].append((e.tail, i, -1))
    paths: list[tuple | None] = [None] * k
    paths[root] = ()
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for w, i, s in adj[v]:
            if paths[w] is None:
                paths[w] = paths[v] + ((i, s),)
                queue.append(w)
    if any(p is None for p in paths):
        raise ModelError("supplied tree does not span all vertices")
    return tuple(paths)


def make_gauge(
    model: QuotientGraphModel,
    root: int = 0,
    tree: Sequence[int] | None = None,
    order: Sequence[int] | None = None,
) -> GaugeChoice:
    """Fix a spanning-tree gauge and compute the loop vectors.

    Defaults are a breadth-first tree from ``root`` (incident edges
    visited in index order) and the breadth-first vertex order.

    Raises
    ------
    ModelError
        If the tree does not span or is not acyclic, or ``order`` is not
        a permutation starting at ``root``.
    """
    k = model.num_vertices
    if not 0 <= root < k:
        raise ModelError(f"root {root} out of range [0, {k})")
    bfs_tree, bfs_order = _bfs_tree(model, root)
    tree = bfs_tree if tree is None else sorted(int(i) for i in tree)
    if len(set(tree)) != len(tree):
        raise ModelError("tree lists an edge twice")
    paths = _tree_paths(model, root, tree)
    order = bfs_order if order is None else [int(v) for v in order]
    if sorted(order) != list(range(k)):
        raise ModelError("order is not a permutation of the vertices")
    if order[0] != root:
        raise ModelError("order must start at the root")

    # cell offset of each vertex copy reached from the root along the tree
    cell = np.zeros((k, model.dim), dtype=np.int64)
    for v, path in enumerate(paths):
        for i, s in path:
            cell[v] += s * np.asarray(model.edges[i].translation)
    loops = []
    for e in model.edges:
        m = cell[e.tail] + np.asarray(e.translation) - cell[e.head]
        loops.append(tuple(int(x) for x in m))
    return GaugeChoice(root, tuple(tree), tuple(order), tuple(loops), paths)


def random_gauge(model: QuotientGraphModel, rng: np.random.Generator) -> GaugeChoice:
    """Random root, random spanning tree (Kruskal on shuffled edges), random order."""
    k = model.num_vertices
    root = int(rng.integers(k))
    parent = list(range(k))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for i in rng.permutation(model.num_edges):
        e = model.edges[int(i)]
        a, b = find(e.tail), find(e.head)
        if a != b:
            parent[a] = b
            tree.append(int(i))
    rest = [int(v) for v in rng.permutation(k) if v != root]
    return make_gauge(model, root, tree, [root] + rest)
