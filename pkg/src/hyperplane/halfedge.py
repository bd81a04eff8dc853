"""Half-edge (doubly connected edge list) maps tolerant of loops and
multiple edges, as required by type-I triangulations.

A map is three parallel arrays: twin, next-in-face, and origin vertex. Faces
are the cycles of the next permutation; no geometric embedding is stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hyperplane.errors import DomainError


@dataclass
class HalfEdgeMap:
    """Immutable rooted map. root_he sits on the root face of the rooted
    1-gon presentation; outer_he sits on the unexplored/outer face (-1 when
    the map has no distinguished outer face)."""

    twin: np.ndarray
    nxt: np.ndarray
    orig: np.ndarray
    n_vertices: int
    root_he: int
    outer_he: int = -1

    def __post_init__(self):
        self.twin = np.asarray(self.twin, dtype=np.int64)
        self.nxt = np.asarray(self.nxt, dtype=np.int64)
        self.orig = np.asarray(self.orig, dtype=np.int64)
        n = len(self.twin)
        if not (self.twin[self.twin] == np.arange(n)).all():
            raise DomainError("twin is not an involution")
        seen = np.zeros(n, dtype=bool)
        seen[self.nxt] = True
        if not seen.all():
            raise DomainError("next is not a permutation")

    # -- basic counts ---------------------------------------------------------

    @property
    def n_half_edges(self) -> int:
        return len(self.twin)

    @property
    def n_edges(self) -> int:
        return self.n_half_edges // 2

    def face_labels(self) -> np.ndarray:
        """Face id per half-edge (cycles of nxt)."""
        from hyperplane._mapanalytics import face_labels_kernel

        labels, _ = face_labels_kernel(self.nxt)
        return labels

    @property
    def n_faces(self) -> int:
        return int(self.face_labels().max()) + 1

    def csr(self):
        """Cached CSR vertex adjacency (indptr, indices)."""
        cached = getattr(self, "_csr", None)
        if cached is None:
            from hyperplane._mapanalytics import csr_adjacency

            cached = csr_adjacency(self.orig, self.twin, self.n_vertices)
            object.__setattr__(self, "_csr", cached)
        return cached

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    def face_degrees(self) -> np.ndarray:
        label = self.face_labels()
        return np.bincount(label)

    def adjacency(self) -> list:
        """Vertex adjacency lists (one entry per edge; loops appear once to
        themselves, parallel edges repeatedly)."""
        adj: list = [[] for _ in range(self.n_vertices)]
        for h in range(self.n_half_edges):
            if h < self.twin[h]:
                u = int(self.orig[h])
                v = int(self.orig[self.twin[h]])
                adj[u].append(v)
                if u != v:
                    adj[v].append(u)
        return adj

    def edge_list(self) -> list:
        return [
            (int(self.orig[h]), int(self.orig[self.twin[h]]))
            for h in range(self.n_half_edges)
            if h < self.twin[h]
        ]

    # -- serialization --------------------------------------------------------

    def to_text(self) -> str:
        """Edge-list dump: one "v1 v2" line per edge plus the root."""
        lines = [f"root {int(self.orig[self.root_he])}"]
        for u, v in self.edge_list():
            lines.append(f"{u} {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def graph_from_text(cls, text: str):
        """Round-trip reader for the edge-list format. The combinatorial
        embedding is not serialized, so this returns (root, edges)."""
        lines = [ln for ln in text.strip().splitlines() if ln]
        if not lines or not lines[0].startswith("root "):
            raise DomainError("missing root line")
        root = int(lines[0].split()[1])
        edges = [tuple(int(x) for x in ln.split()) for ln in lines[1:]]
        return root, edges


def distance_field(m: HalfEdgeMap, source: int | None = None) -> np.ndarray:
    """BFS graph distances from the root vertex (or a given source)."""
    from hyperplane._mapanalytics import bfs_csr

    src = int(m.orig[m.root_he]) if source is None else source
    indptr, indices = m.csr()
    return bfs_csr(indptr, indices, src, m.n_vertices)
