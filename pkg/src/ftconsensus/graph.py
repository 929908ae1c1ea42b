"""Directed communication topologies and the column-stochastic update weights.

Nodes are numbered ``0 .. n-1``.  An edge ``(i, j)`` means node ``i`` transmits
to node ``j``; ``j`` therefore lists ``i`` among its in-neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    pass


class NotStronglyConnectedError(GraphError):
    pass


class GraphGenerationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Digraph:
    """Static digraph stored as parallel ``src``/``dst`` edge arrays.

    Edges are kept sorted by ``(src, dst)`` so that two graphs built from the
    same edge set are indistinguishable, including iteration order.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Digraph":
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        return cls.from_arrays(n, arr[:, 0], arr[:, 1])

    @classmethod
    def from_arrays(cls, n: int, src, dst) -> "Digraph":
        n = int(n)
        if n < 1:
            raise GraphError(f"node count must be positive, got {n}")
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape or src.ndim != 1:
            raise GraphError("src and dst must be 1-d arrays of equal length")
        if src.size and (src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n):
            raise GraphError(f"edge endpoint outside [0, {n - 1}]")
        if np.any(src == dst):
            raise GraphError("self-edges are implicit and must not be listed")
        key = np.unique(src * n + dst)
        src, dst = np.divmod(key, n)
        src.setflags(write=False)
        dst.setflags(write=False)
        return cls(n, src, dst)

    @property
    def edge_count(self) -> int:
        return int(self.src.size)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n)

    @cached_property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n)

    @cached_property
    def _forward(self) -> tuple[np.ndarray, np.ndarray]:
        # src is already sorted, so dst is the CSR column array as-is
        indptr = np.concatenate(([0], np.cumsum(self.out_degree)))
        return indptr, self.dst

    @cached_property
    def _backward(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.lexsort((self.src, self.dst))
        indptr = np.concatenate(([0], np.cumsum(self.in_degree)))
        return indptr, self.src[order]

    def out_neighbors(self, j: int) -> np.ndarray:
        indptr, indices = self._forward
        return indices[indptr[j]:indptr[j + 1]]

    def in_neighbors(self, j: int) -> np.ndarray:
        indptr, indices = self._backward
        return indices[indptr[j]:indptr[j + 1]]

    def adjacency(self) -> sp.csr_matrix:
        """Boolean matrix with ``A[j, i]`` set when ``i`` transmits to ``j``."""
        data = np.ones(self.edge_count, dtype=bool)
        return sp.csr_matrix((data, (self.dst, self.src)), shape=(self.n, self.n))

    def __repr__(self) -> str:
        return f"Digraph(n={self.n}, edges={self.edge_count})"


def directed_cycle(n: int) -> Digraph:
    nodes = np.arange(n)
    return Digraph.from_arrays(n, nodes, (nodes + 1) % n)


def complete_digraph(n: int) -> Digraph:
    i, j = np.nonzero(~np.eye(n, dtype=bool))
    return Digraph.from_arrays(n, i, j)


def five_node_example() -> Digraph:
    """Five-node strongly connected digraph of diameter 4 (a directed ring)."""
    return directed_cycle(5)


def _gather(indptr: np.ndarray, indices: np.ndarray, frontier: np.ndarray) -> np.ndarray:
    starts = indptr[frontier]
    lens = indptr[frontier + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return indices[:0]
    offsets = np.repeat(starts - (np.cumsum(lens) - lens), lens)
    return indices[offsets + np.arange(total)]


def _bfs_depth(indptr, indices, n: int, source: int, limit: int | None = None) -> tuple[int, int]:
    """Return ``(depth, reached)`` of a BFS from ``source``, stopping at ``limit`` levels."""
    seen = np.zeros(n, dtype=bool)
    seen[source] = True
    frontier = np.array([source])
    reached, depth = 1, 0
    while frontier.size:
        if limit is not None and depth >= limit:
            break
        nxt = _gather(indptr, indices, frontier)
        nxt = np.unique(nxt[~seen[nxt]])
        if nxt.size == 0:
            break
        seen[nxt] = True
        reached += nxt.size
        depth += 1
        frontier = nxt
    return depth, reached


def is_strongly_connected(g: Digraph) -> bool:
    if g.n == 1:
        return True
    for indptr, indices in (g._forward, g._backward):
        _, reached = _bfs_depth(indptr, indices, g.n, 0)
        if reached < g.n:
            return False
    return True


def diameter(g: Digraph) -> int:
    """Longest shortest directed path, by breadth-first search from every node."""
    indptr, indices = g._forward
    best = 0
    for s in range(g.n):
        depth, reached = _bfs_depth(indptr, indices, g.n, s)
        if reached < g.n:
            raise NotStronglyConnectedError(
                f"node {s} reaches only {reached} of {g.n} nodes; diameter undefined")
        best = max(best, depth)
    return best


def diameter_at_most(g: Digraph, bound: int) -> bool:
    indptr, indices = g._forward
    for s in range(g.n):
        _, reached = _bfs_depth(indptr, indices, g.n, s, limit=bound)
        if reached < g.n:
            return False
    return True


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Column-stochastic weights: node ``j`` splits its mass equally over itself
    and its out-neighbours, ``p_lj = 1 / (1 + out_degree(j))``.

    ``self_weight[j]`` is ``p_jj``; ``edge_weight[e]`` is the weight on edge ``e``
    of the owning graph (``p_{dst,src}``).
    """

    graph: Digraph
    self_weight: np.ndarray
    edge_weight: np.ndarray

    @property
    def n(self) -> int:
        return self.graph.n

    def to_sparse(self) -> sp.csr_matrix:
        g = self.graph
        rows = np.concatenate((g.dst, np.arange(g.n)))
        cols = np.concatenate((g.src, np.arange(g.n)))
        data = np.concatenate((self.edge_weight, self.self_weight))
        return sp.csr_matrix((data, (rows, cols)), shape=(g.n, g.n))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def column_sums(self) -> np.ndarray:
        g = self.graph
        return self.self_weight + np.bincount(g.src, weights=self.edge_weight, minlength=g.n)


def build_weights(g: Digraph) -> WeightMatrix:
    share = 1.0 / (1.0 + g.out_degree)
    return WeightMatrix(g, share, share[g.src])


def generate_random_digraph(
    n: int,
    edge_density: float,
    target_diameter_max: int | None = None,
    seed: int = 0,
    max_retries: int = 100,
) -> Digraph:
    """Random strongly connected digraph.

    A random Hamiltonian ring is planted first, so the result is strongly
    connected by construction.  Uniform random edges are then added until
    ``edge_density * n * (n - 1)`` edges exist.  With ``target_diameter_max``
    set, batches of random chords are added until the bound holds or
    ``max_retries`` batches have been tried.
    """
    if n < 2:
        raise GraphError("need at least two nodes")
    if not 0.0 < edge_density <= 1.0:
        raise GraphError(f"edge_density must lie in (0, 1], got {edge_density}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    keys = np.unique(perm * n + np.roll(perm, -1))

    possible = n * (n - 1)
    target = min(possible, max(int(round(edge_density * possible)), keys.size))
    keys = _add_random_edges(rng, n, keys, target - keys.size)
    g = _from_keys(n, keys)
    if target_diameter_max is None or diameter_at_most(g, target_diameter_max):
        return g

    for _ in range(max_retries):
        if keys.size >= possible:
            break
        batch = max(n, keys.size // 4)
        keys = _add_random_edges(rng, n, keys, min(batch, possible - keys.size))
        g = _from_keys(n, keys)
        if diameter_at_most(g, target_diameter_max):
            return g
    raise GraphGenerationError(
        f"could not reach diameter <= {target_diameter_max} for n={n} "
        f"after {max_retries} chord batches")


def _add_random_edges(rng: np.random.Generator, n: int, keys: np.ndarray, count: int) -> np.ndarray:
    want = keys.size + count
    while keys.size < want:
        short = want - keys.size
        k = rng.integers(0, n * n, size=short + short // 8 + 16)
        k = k[k // n != k % n]
        fresh = k[~np.isin(k, keys)]
        # truncate in draw order; a sorted truncation would favour low indices
        _, first = np.unique(fresh, return_index=True)
        fresh = fresh[np.sort(first)]
        keys = np.union1d(keys, fresh[:short])
    return keys


def _from_keys(n: int, keys: np.ndarray) -> Digraph:
    src, dst = np.divmod(keys, n)
    return Digraph.from_arrays(n, src, dst)


def to_dot(g: Digraph, name: str = "G") -> str:
    lines = [f"digraph {name} {{"]
    lines += [f"  {i} -> {j};" for i, j in g.edges]
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_dot(g: Digraph, path: str | Path) -> None:
    Path(path).write_text(to_dot(g))


def read_edge_list(path: str | Path, n: int | None = None) -> Digraph:
    """Read ``i j`` lines (``i`` transmits to ``j``); ``#`` starts a comment."""
    pairs = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        if n is None and raw.startswith("# n="):
            n = int(raw[4:])
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
        pairs.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max((max(p) for p in pairs), default=0)
    return Digraph.from_edges(n, pairs)


def write_edge_list(g: Digraph, path: str | Path) -> None:
    body = "".join(f"{i} {j}\n" for i, j in g.edges)
    Path(path).write_text(f"# n={g.n}\n" + body)
