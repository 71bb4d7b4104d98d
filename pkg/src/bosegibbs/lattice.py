"""Finite simple graphs and the discrete Laplacian."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class Graph:
    """Finite simple undirected graph with vertices ``0..vertex_count-1``.

    Edges are stored as sorted pairs ``(x, y)`` with ``x < y``, in first-seen
    input order.
    """

    vertex_count: int
    edges: tuple[tuple[int, int], ...] = ()
    _neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.vertex_count) != self.vertex_count or self.vertex_count < 1:
            raise ValueError(f"vertex_count must be a positive integer, got {self.vertex_count!r}")
        seen = set()
        canon = []
        for e in self.edges:
            x, y = (int(v) for v in e)
            if x == y:
                raise ValueError(f"loop at vertex {x} is not allowed in a simple graph")
            for v in (x, y):
                if not 0 <= v < self.vertex_count:
                    raise ValueError(f"edge {e!r} references vertex {v} outside 0..{self.vertex_count - 1}")
            key = (min(x, y), max(x, y))
            if key in seen:
                raise ValueError(f"duplicate edge {key!r}")
            seen.add(key)
            canon.append(key)
        object.__setattr__(self, "edges", tuple(canon))
        nbrs: list[list[int]] = [[] for _ in range(self.vertex_count)]
        for x, y in canon:
            nbrs[x].append(y)
            nbrs[y].append(x)
        object.__setattr__(self, "_neighbors", tuple(tuple(sorted(n)) for n in nbrs))

    @classmethod
    def from_edges(cls, vertex_count: int, edges: Iterable[Iterable[int]]) -> "Graph":
        return cls(int(vertex_count), tuple(tuple(e) for e in edges))

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(n, tuple((i, i + 1) for i in range(n - 1)))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        if n < 3:
            raise ValueError("a simple cycle needs at least 3 vertices")
        return cls(n, tuple((i, (i + 1) % n) for i in range(n)))

    def neighbors(self, x: int) -> tuple[int, ...]:
        self._check_vertex(x)
        return self._neighbors[x]

    def degree(self, x: int) -> int:
        return len(self.neighbors(x))

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(n) for n in self._neighbors], dtype=np.int64)

    def relabel(self, perm) -> "Graph":
        """Graph with vertex ``x`` renamed to ``perm[x]``."""
        perm = [int(p) for p in perm]
        if sorted(perm) != list(range(self.vertex_count)):
            raise ValueError("perm must be a permutation of the vertices")
        return Graph(self.vertex_count, tuple((perm[x], perm[y]) for x, y in self.edges))

    def _check_vertex(self, x: int) -> None:
        if not 0 <= int(x) < self.vertex_count:
            raise IndexError(f"vertex {x} outside 0..{self.vertex_count - 1}")

    def to_dict(self) -> dict:
        return {"vertex_count": self.vertex_count, "edges": [list(e) for e in self.edges]}


def build_laplacian(g: Graph) -> np.ndarray:
    """Matrix of ``(Δu)(x) = -deg(x) u(x) + sum_{y~x} u(y)``.

    Real symmetric, zero row sums, and ``-Δ`` is positive semidefinite.
    """
    lap = np.zeros((g.vertex_count, g.vertex_count))
    for x, y in g.edges:
        lap[x, y] = lap[y, x] = 1.0
    lap[np.diag_indices(g.vertex_count)] = -g.degrees
    return lap
