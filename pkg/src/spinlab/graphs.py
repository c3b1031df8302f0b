"""Finite simple graphs, named generators, Laplacians and random-walk Green's functions.

Vertices are labelled ``1..n`` in every public function; arrays are indexed
from zero internally, so vertex ``i`` lives at position ``i - 1``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    Disconnected,
    DuplicateEdge,
    InvalidParameter,
    SameVertex,
    SelfLoop,
    SolverFailure,
)
from .rng import make_rng
from .stats import Estimate


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable connected simple graph on vertices ``1..n``.

    Use :func:`from_edge_list` or :func:`generate` rather than calling the
    constructor with raw data; the constructor still validates everything.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameter("graph needs at least one vertex")
        seen = set()
        canon = []
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise SelfLoop(f"self-loop at vertex {a}")
            if not (1 <= a <= self.n and 1 <= b <= self.n):
                raise InvalidParameter(f"edge ({a},{b}) outside 1..{self.n}")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise DuplicateEdge(f"duplicate edge {key}")
            seen.add(key)
            canon.append(key)
        object.__setattr__(self, "edges", tuple(sorted(canon)))
        if not self._connected():
            raise Disconnected("graph is not connected")

    def _connected(self) -> bool:
        adj = self.adjacency
        seen = {1}
        stack = [1]
        while stack:
            v = stack.pop()
            for w in adj[v - 1]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        """Sorted neighbour list (1-based labels) per vertex."""
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.edges:
            nbrs[a - 1].append(b)
            nbrs[b - 1].append(a)
        return tuple(tuple(sorted(x)) for x in nbrs)

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.array([len(x) for x in self.adjacency], dtype=np.int64)
        d.setflags(write=False)
        return d

    def degree(self, i: int) -> int:
        return int(self.degrees[self._index(i)])

    @cached_property
    def adjacency_matrix(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for a, b in self.edges:
            A[a - 1, b - 1] = A[b - 1, a - 1] = 1.0
        A.setflags(write=False)
        return A

    @cached_property
    def laplacian(self) -> np.ndarray:
        """Combinatorial Laplacian ``diag(d) - A``."""
        L = np.diag(self.degrees.astype(float)) - self.adjacency_matrix
        L.setflags(write=False)
        return L

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` with zero-based neighbour indices."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(self.degrees)
        indices = np.array([w - 1 for nb in self.adjacency for w in nb], dtype=np.int64)
        return indptr, indices

    @cached_property
    def edge_array(self) -> np.ndarray:
        """``(m, 2)`` zero-based endpoint indices."""
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2) - 1

    def _index(self, v: int) -> int:
        v = int(v)
        if not 1 <= v <= self.n:
            raise InvalidParameter(f"vertex {v} outside 1..{self.n}")
        return v - 1

    def to_edge_list(self) -> str:
        header = f"# {self.name}\n" if self.name else ""
        return header + "".join(f"{a} {b}\n" for a, b in self.edges)

    def __repr__(self) -> str:
        label = self.name or "graph"
        return f"<Graph {label}: n={self.n}, m={self.m}>"


def from_edge_list(pairs: Iterable[tuple[int, int]], name: str = "") -> Graph:
    """Build a graph from 1-based vertex pairs, relabelling to contiguous ``1..n``."""
    pairs = [(int(a), int(b)) for a, b in pairs]
    if not pairs:
        raise InvalidParameter("edge list is empty")
    labels = sorted({v for p in pairs for v in p})
    if labels[0] < 1:
        raise InvalidParameter("vertex labels must be positive integers")
    relabel = {v: k + 1 for k, v in enumerate(labels)}
    return Graph(len(labels), tuple((relabel[a], relabel[b]) for a, b in pairs), name=name)


def parse_edge_list(text: str, name: str = "") -> Graph:
    """Parse ``i j`` lines; ``#`` starts a comment, blank lines are skipped."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidParameter(f"line {lineno}: expected two vertex labels, got {raw!r}")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise InvalidParameter(f"line {lineno}: non-integer vertex label in {raw!r}") from None
    return from_edge_list(pairs, name=name)


def read_edge_list(path: str | Path) -> Graph:
    path = Path(path)
    return parse_edge_list(path.read_text(), name=str(path))


def write_edge_list(g: Graph, path: str | Path) -> None:
    Path(path).write_text(g.to_edge_list())


# -- generators ---------------------------------------------------------------


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidParameter(msg)


def star(n0: int) -> Graph:
    """Centre vertex 1 joined to leaves ``2..n0+1``."""
    _need(n0 >= 1, "star needs n0 >= 1")
    return Graph(n0 + 1, tuple((1, k) for k in range(2, n0 + 2)), name=f"star:{n0}")


def path(n: int) -> Graph:
    _need(n >= 2, "path needs n >= 2")
    return Graph(n, tuple((k, k + 1) for k in range(1, n)), name=f"path:{n}")


def cycle(n: int) -> Graph:
    _need(n >= 3, "cycle needs n >= 3")
    edges = tuple((k, k + 1) for k in range(1, n)) + ((1, n),)
    return Graph(n, edges, name=f"cycle:{n}")


def complete(n: int) -> Graph:
    _need(n >= 2, "complete graph needs n >= 2")
    return Graph(n, tuple(itertools.combinations(range(1, n + 1), 2)), name=f"complete:{n}")


def perfect_binary_tree(k: int) -> Graph:
    """Depth-``k`` tree with ``2**k - 1`` vertices; children of ``i`` are ``2i`` and ``2i+1``."""
    _need(k >= 1, "binary tree needs depth k >= 1")
    n = 2**k - 1
    edges = tuple((i // 2, i) for i in range(2, n + 1))
    return Graph(n, edges, name=f"tree:{k}")


def parallel_paths(l: int, d: int) -> Graph:
    """Vertices 1 and ``l*d + 2`` joined by ``d`` disjoint paths of ``l`` internal vertices.

    Path ``p`` (0-based) runs ``1, 2 + p*l, ..., 1 + (p+1)*l, l*d + 2``.
    """
    _need(l >= 1 and d >= 1, "parallel_paths needs l, d >= 1")
    end = l * d + 2
    edges = []
    for p in range(d):
        chain = [1] + [2 + p * l + s for s in range(l)] + [end]
        edges.extend(zip(chain[:-1], chain[1:]))
    return Graph(end, tuple(edges), name=f"paths:{l}x{d}")


def torus(L: int, D: int) -> Graph:
    """``L**D`` nearest-neighbour torus; for ``L == 2`` the wrap-around edge coincides
    with the direct one and is kept once."""
    _need(L >= 2 and D >= 1, "torus needs side L >= 2 and dimension D >= 1")
    n = L**D
    edges = set()
    for idx in range(n):
        coords = np.unravel_index(idx, (L,) * D)
        for axis in range(D):
            nxt = list(coords)
            nxt[axis] = (nxt[axis] + 1) % L
            j = int(np.ravel_multi_index(nxt, (L,) * D))
            edges.add((min(idx, j) + 1, max(idx, j) + 1))
    return Graph(n, tuple(sorted(edges)), name=f"torus:{L}x{D}d")


def random_connected(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Random spanning tree plus independent extra edges with probability ``p``."""
    _need(n >= 2, "random graph needs n >= 2")
    order = rng.permutation(n) + 1
    edges = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    for a, b in itertools.combinations(range(1, n + 1), 2):
        if (a, b) not in edges and rng.random() < p:
            edges.add((a, b))
    return Graph(n, tuple(sorted(edges)), name=f"random:{n}")


_SPEC = re.compile(r"^(?P<family>[a-z0-9]+)(?::(?P<args>[0-9x]+d?))?$")


def generate(spec: str) -> Graph:
    """Build a named family from a string such as ``"star:11"``, ``"tree:4"``,
    ``"paths:3x3"`` or ``"torus:4x2d"``."""
    m = _SPEC.match(spec.strip().lower())
    if not m:
        raise InvalidParameter(f"unrecognised graph spec {spec!r}")
    family, args = m["family"], m["args"] or ""
    nums = [int(x) for x in re.findall(r"\d+", args)]
    try:
        if family == "k2":
            return Graph(2, ((1, 2),), name="k2")
        if family == "star":
            return star(*nums)
        if family == "path":
            return path(*nums)
        if family == "cycle":
            return cycle(*nums)
        if family == "complete":
            return complete(*nums)
        if family == "tree":
            return perfect_binary_tree(*nums)
        if family == "paths":
            return parallel_paths(*nums)
        if family == "torus":
            return torus(*nums)
    except TypeError:
        raise InvalidParameter(f"wrong number of parameters in {spec!r}") from None
    raise InvalidParameter(f"unknown graph family {family!r}")


def load_graph(spec: str) -> Graph:
    """Generator string, or path to an edge-list file if one exists at ``spec``."""
    if Path(spec).is_file():
        return read_edge_list(spec)
    return generate(spec)


# -- Laplacian and Green's functions -----------------------------------------


def laplacian_apply(g: Graph, f) -> np.ndarray:
    """``s -> sum over neighbours l of f(s) - f(l)``."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != g.n:
        raise DimensionMismatch(f"vector has length {f.shape[0]}, graph has {g.n} vertices")
    return g.laplacian @ f


@dataclass(frozen=True)
class GreenTable:
    """Expected visits to ``source`` before the walk is absorbed at ``sink``."""

    source: int
    sink: int
    values: np.ndarray

    def __getitem__(self, s: int) -> float:
        return float(self.values[int(s) - 1])

    @property
    def at_source(self) -> float:
        return self[self.source]


def _pinned_factor(g: Graph, sink: int):
    keep = np.delete(np.arange(g.n), g._index(sink))
    Lr = g.laplacian[np.ix_(keep, keep)]
    try:
        factor = scipy.linalg.cho_factor(Lr)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(f"pinned Laplacian is singular at sink {sink}") from exc
    return keep, factor


def greens_function(g: Graph, i: int, j: int) -> GreenTable:
    """Solve the Laplacian system with ``u(j) = 0`` and ``(Lu)(i) = d(i)``."""
    if int(i) == int(j):
        raise SameVertex("source and sink coincide")
    ii = g._index(i)
    keep, factor = _pinned_factor(g, j)
    rhs = np.zeros(g.n)
    rhs[ii] = g.degrees[ii]
    u = np.zeros(g.n)
    u[keep] = scipy.linalg.cho_solve(factor, rhs[keep])
    if not np.all(np.isfinite(u)):
        raise SolverFailure("non-finite Green's function")
    u.setflags(write=False)
    return GreenTable(int(i), int(j), u)


def renormalized_green(g: Graph, x: int, y: int) -> float:
    """``u_xy(x) / d(x)``, symmetric in ``x`` and ``y`` (it is the effective resistance)."""
    return greens_function(g, x, y).at_source / g.degree(x)


def max_renormalized_green(g: Graph) -> float:
    """Largest ``u_ij(i)/d(i)`` over distinct pairs."""
    best = 0.0
    for x, y in itertools.combinations(range(1, g.n + 1), 2):
        best = max(best, renormalized_green(g, x, y))
    return best


def greens_rw_oracle(
    g: Graph, i: int, j: int, s: int, trials: int, seed: int, chunk: int = 1 << 18
) -> Estimate:
    """Average visits to ``i`` by simple random walks from ``s`` absorbed at ``j``."""
    if int(i) == int(j):
        raise SameVertex("source and sink coincide")
    if trials < 1:
        raise InvalidParameter("trials must be >= 1")
    ii, jj, ss = g._index(i), g._index(j), g._index(s)
    indptr, indices = g.csr
    deg = np.asarray(g.degrees)
    total = 0.0
    total_sq = 0.0
    done = 0
    for c, start in enumerate(range(0, trials, chunk)):
        size = min(chunk, trials - start)
        rng = make_rng(seed, 0x6772, c)
        pos = np.full(size, ss, dtype=np.int64)
        visits = np.zeros(size)
        alive = pos != jj
        while alive.any():
            idx = np.flatnonzero(alive)
            cur = pos[idx]
            visits[idx] += cur == ii
            step = (rng.random(idx.size) * deg[cur]).astype(np.int64)
            pos[idx] = indices[indptr[cur] + step]
            alive[idx] = pos[idx] != jj
        total += visits.sum()
        total_sq += (visits**2).sum()
        done += size
    mean = total / done
    var = max(total_sq / done - mean**2, 0.0)
    se = np.sqrt(var / done) if done > 1 else 0.0
    return Estimate(float(mean), float(se), done)
