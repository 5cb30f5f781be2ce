"""Graph ingestion and row-stochastic transition matrices.

Three graph families are supported: generic weighted edge lists, grid worlds
under a uniform random-walk policy, and k-nearest-neighbour cosine similarity
graphs over embedding vectors.

Node indexing is the input order for edge lists and row-major over free cells
for grid worlds.
"""

from __future__ import annotations

import csv
import enum
import io
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from pprsr.errors import InvariantError, ParseError

ROW_SUM_TOL = 1e-12


class DanglingPolicy(enum.Enum):
    """What to do with a node that has no outgoing weight."""

    UNIFORM = "uniform"
    TELEPORT_TO_RESTART = "teleport"


@dataclass(frozen=True)
class GraphSpec:
    """Weighted directed graph on ``node_count`` nodes.

    ``edges`` holds ``(src, dst, weight)`` triples with duplicates already
    summed, ordered by first appearance.
    """

    node_count: int
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if int(self.node_count) < 1:
            raise InvariantError("node_count must be a positive integer")
        merged: dict[tuple[int, int], float] = {}
        for src, dst, w in self.edges:
            src, dst, w = int(src), int(dst), float(w)
            if not (0 <= src < self.node_count and 0 <= dst < self.node_count):
                raise InvariantError(
                    f"edge ({src}, {dst}) out of range for {self.node_count} nodes"
                )
            if not np.isfinite(w) or w < 0:
                raise InvariantError(f"edge ({src}, {dst}) has invalid weight {w}")
            merged[(src, dst)] = merged.get((src, dst), 0.0) + w
        object.__setattr__(self, "node_count", int(self.node_count))
        object.__setattr__(
            self, "edges", tuple((s, d, w) for (s, d), w in merged.items())
        )

    def weight_matrix(self) -> sparse.csr_matrix:
        n = self.node_count
        if not self.edges:
            return sparse.csr_matrix((n, n))
        src, dst, w = zip(*self.edges)
        return sparse.csr_matrix((w, (src, dst)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic ``n x n`` matrix, stored dense or as CSR.

    Both storages are semantically equivalent; :meth:`dense` always returns
    an ndarray. The stored array is made read-only.
    """

    entries: np.ndarray | sparse.csr_matrix

    def __post_init__(self):
        m = self.entries
        if sparse.issparse(m):
            m = sparse.csr_matrix(m, dtype=float, copy=True)
            m.sum_duplicates()
            m.data.setflags(write=False)
            data = m.data
        else:
            m = np.array(m, dtype=float)
            m.setflags(write=False)
            data = m
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InvariantError(f"transition matrix must be square, got {m.shape}")
        if not np.all(np.isfinite(data)):
            raise InvariantError("transition matrix has non-finite entries")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise InvariantError("transition matrix entries must lie in [0, 1]")
        sums = np.asarray(m.sum(axis=1)).ravel()
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise InvariantError(
                f"row {bad[0]} sums to {sums[bad[0]]!r}, not 1 (±{ROW_SUM_TOL})"
            )
        object.__setattr__(self, "entries", m)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.entries)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.entries.toarray()
        return self.entries

    def __eq__(self, other):
        if not isinstance(other, TransitionMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.dense(), other.dense())

    def __hash__(self):
        return hash(self.dense().tobytes())


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """``m`` embedding vectors of dimension ``dim`` with optional labels."""

    vectors: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise InvariantError(f"embeddings must be a non-empty 2-D array, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvariantError("embeddings contain non-finite values")
        zero = np.flatnonzero(~np.any(v != 0.0, axis=1))
        if zero.size:
            raise InvariantError(f"embedding {zero[0]} is the zero vector")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != v.shape[0]:
                raise InvariantError(
                    f"{len(labels)} labels for {v.shape[0]} embedding vectors"
                )
            object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def unit_vectors(self) -> np.ndarray:
        return self.vectors / np.linalg.norm(self.vectors, axis=1, keepdims=True)


def load_edge_list(text: str) -> GraphSpec:
    """Parse a tab-separated edge list.

    The first non-comment line must be ``nodes<TAB>N``; every following line
    is ``src<TAB>dst<TAB>weight``. Lines starting with ``#`` and blank lines
    are skipped. Duplicate ``(src, dst)`` pairs are summed.

    Raises
    ------
    ParseError
        On a malformed line, a negative weight or an out-of-range index.
    """
    node_count = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if node_count is None:
            if len(parts) != 2 or parts[0].strip() != "nodes":
                raise ParseError("expected header 'nodes<TAB>N'", lineno)
            try:
                node_count = int(parts[1])
            except ValueError:
                raise ParseError(f"bad node count {parts[1]!r}", lineno) from None
            if node_count < 1:
                raise ParseError("node count must be positive", lineno)
            continue
        if len(parts) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", lineno)
        try:
            src, dst, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"cannot parse edge {line!r}", lineno) from None
        if not np.isfinite(w) or w < 0:
            raise ParseError(f"invalid weight {parts[2]!r}", lineno)
        if not (0 <= src < node_count and 0 <= dst < node_count):
            raise ParseError(f"node index out of range [0, {node_count})", lineno)
        edges.append((src, dst, w))
    if node_count is None:
        raise ParseError("missing 'nodes<TAB>N' header")
    return GraphSpec(node_count, tuple(edges))


def dump_edge_list(g: GraphSpec) -> str:
    lines = [f"nodes\t{g.node_count}"]
    lines += [f"{s}\t{d}\t{w!r}" for s, d, w in g.edges]
    return "\n".join(lines) + "\n"


def load_embeddings(text: str, labels: bool = False) -> EmbeddingSet:
    """Read embeddings from CSV, one vector per row.

    With ``labels=True`` the first column of each row is an item label.
    """
    rows, names = [], []
    for lineno, rec in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not rec or not "".join(rec).strip() or rec[0].lstrip().startswith("#"):
            continue
        if labels:
            names.append(rec[0].strip())
            rec = rec[1:]
        try:
            rows.append([float(x) for x in rec])
        except ValueError:
            raise ParseError(f"non-numeric embedding value in {rec!r}", lineno) from None
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(
                f"expected {len(rows[0])} components, got {len(rows[-1])}", lineno
            )
    if not rows:
        raise ParseError("no embedding vectors found")
    try:
        return EmbeddingSet(np.array(rows), tuple(names) if labels else None)
    except InvariantError as exc:
        raise ParseError(str(exc)) from None


def to_transition_matrix(
    g: GraphSpec,
    dangling: DanglingPolicy = DanglingPolicy.UNIFORM,
    restart: np.ndarray | None = None,
    *,
    sparse_output: bool = False,
) -> TransitionMatrix:
    """Row-normalize edge weights into a transition matrix.

    Rows with zero total out-weight are dangling; they become ``1/n``
    everywhere under ``UNIFORM`` or a copy of ``restart`` under
    ``TELEPORT_TO_RESTART``.
    """
    n = g.node_count
    if dangling is DanglingPolicy.TELEPORT_TO_RESTART:
        if restart is None:
            raise ValueError("TELEPORT_TO_RESTART requires a restart distribution")
        from pprsr.ppr import as_distribution

        fill = as_distribution(restart, n)
    else:
        fill = np.full(n, 1.0 / n)

    W = g.weight_matrix()
    out = np.asarray(W.sum(axis=1)).ravel()
    live = out > 0
    inv = np.zeros(n)
    inv[live] = 1.0 / out[live]
    P = sparse.diags(inv) @ W
    dangling_rows = np.flatnonzero(~live)

    if sparse_output:
        if dangling_rows.size:
            fill_rows = sparse.csr_matrix(
                (np.ones(dangling_rows.size), (dangling_rows, np.zeros(dangling_rows.size, int))),
                shape=(n, 1),
            ) @ sparse.csr_matrix(fill[None, :])
            P = P + fill_rows
        return TransitionMatrix(sparse.csr_matrix(P))
    P = P.toarray()
    P[dangling_rows] = fill
    return TransitionMatrix(P)


def _free_cells(width, height, obstacles):
    blocked = set()
    for cell in obstacles:
        r, c = (int(x) for x in cell)
        if not (0 <= r < height and 0 <= c < width):
            raise InvariantError(f"obstacle {cell} outside {height}x{width} grid")
        blocked.add((r, c))
    return [(r, c) for r in range(height) for c in range(width) if (r, c) not in blocked]


def build_gridworld(
    width: int, height: int, obstacles: Iterable[Sequence[int]] = ()
) -> TransitionMatrix:
    """Uniform random walk over the 4-neighbourhood of a grid.

    Cells are ``(row, col)`` with ``0 <= row < height``; states are the free
    cells in row-major order. A free cell with no free neighbour gets a
    self-loop.

    Raises
    ------
    InvariantError
        If every cell is an obstacle or the free cells are not connected.
    """
    if int(width) < 1 or int(height) < 1:
        raise InvariantError("grid width and height must be positive")
    cells = _free_cells(width, height, obstacles)
    if not cells:
        raise InvariantError("grid has no free cells")
    index = {cell: i for i, cell in enumerate(cells)}
    n = len(cells)
    P = np.zeros((n, n))
    for i, (r, c) in enumerate(cells):
        nbrs = [
            index[cell]
            for cell in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c))
            if cell in index
        ]
        if nbrs:
            P[i, nbrs] = 1.0 / len(nbrs)
        else:
            P[i, i] = 1.0

    reached = _reachable(P, 0)
    if len(reached) != n:
        missing = cells[min(set(range(n)) - reached)]
        raise InvariantError(f"free region is disconnected; cell {missing} unreachable")
    return TransitionMatrix(P)


def _reachable(P, start):
    seen = {start}
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(P[i]):
            if j not in seen:
                seen.add(int(j))
                queue.append(int(j))
    return seen


def cosine_matrix(e: EmbeddingSet) -> np.ndarray:
    u = e.unit_vectors()
    return u @ u.T


def build_similarity_graph(e: EmbeddingSet, k: int) -> TransitionMatrix:
    """k-nearest-neighbour cosine similarity graph.

    Item ``i`` links to its ``k`` most similar other items (ties to the lower
    index) with weight ``max(0, cosine)``. Rows left with no positive weight
    are dangling and become uniform.
    """
    m = e.m
    if not (1 <= k < m):
        raise ValueError(f"need 1 <= k < m, got k={k}, m={m}")
    S = cosine_matrix(e)
    edges = []
    for i in range(m):
        others = np.delete(np.arange(m), i)
        sims = S[i, others]
        order = np.argsort(-sims, kind="stable")[:k]
        for j, s in zip(others[order], sims[order]):
            if s > 0:
                edges.append((int(i), int(j), float(s)))
    return to_transition_matrix(GraphSpec(m, tuple(edges)), DanglingPolicy.UNIFORM)
