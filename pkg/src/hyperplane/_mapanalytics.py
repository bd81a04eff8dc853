"""Numba helpers for map analytics: face labeling, CSR adjacency, BFS."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def face_labels_kernel(nxt):
    n = nxt.shape[0]
    label = np.full(n, -1, dtype=np.int64)
    fid = 0
    for h in range(n):
        if label[h] >= 0:
            continue
        k = h
        while label[k] < 0:
            label[k] = fid
            k = nxt[k]
        fid += 1
    return label, fid


def csr_adjacency(orig: np.ndarray, twin: np.ndarray, n_vertices: int):
    """Vertex adjacency in CSR form; loops contribute a single self-arc."""
    h = np.arange(len(twin))
    sel = h < twin
    u = orig[sel]
    v = orig[twin[sel]]
    loops = u == v
    src = np.concatenate([u, v[~loops]])
    dst = np.concatenate([v, u[~loops]])
    order = np.argsort(src, kind="stable")
    src = src[order]
    dst = dst[order]
    indptr = np.zeros(n_vertices + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst.astype(np.int64)


@njit(cache=True)
def bfs_csr(indptr, indices, src, n):
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    dist[src] = 0
    queue[0] = src
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if dist[v] < 0:
                dist[v] = du + 1
                queue[tail] = v
                tail += 1
    return dist


@njit(cache=True)
def bfs_csr_masked(indptr, indices, src, n, allowed):
    dist = np.full(n, -1, dtype=np.int64)
    if not allowed[src]:
        return dist
    queue = np.empty(n, dtype=np.int64)
    dist[src] = 0
    queue[0] = src
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if allowed[v] and dist[v] < 0:
                dist[v] = du + 1
                queue[tail] = v
                tail += 1
    return dist


@njit(cache=True)
def hull_outside_kernel(labels, twin_face, face_indptr, face_halves, in_ball,
                        outer, n_faces):
    """Mark complement components reachable from the outer face through
    non-ball faces."""
    outside = np.zeros(n_faces, dtype=np.bool_)
    stack = np.empty(n_faces, dtype=np.int64)
    outside[outer] = True
    stack[0] = outer
    top = 1
    while top > 0:
        top -= 1
        f = stack[top]
        for k in range(face_indptr[f], face_indptr[f + 1]):
            g = twin_face[face_halves[k]]
            if not outside[g] and not in_ball[g]:
                outside[g] = True
                stack[top] = g
                top += 1
    return outside


@njit(cache=True)
def bfs_csr_capped(indptr, indices, src, n, allowed, use_mask, depth_cap):
    """BFS stopping at depth_cap; unreached vertices stay -1."""
    dist = np.full(n, -1, dtype=np.int64)
    if use_mask and not allowed[src]:
        return dist
    queue = np.empty(n, dtype=np.int64)
    dist[src] = 0
    queue[0] = src
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        if du >= depth_cap:
            continue
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if dist[v] < 0 and (not use_mask or allowed[v]):
                dist[v] = du + 1
                queue[tail] = v
                tail += 1
    return dist


@njit(cache=True)
def geodesic_check_kernel(indptr, indices, n, sources, allowed, depth_cap):
    """True iff for every source pair the distances agree between the full
    graph and the allowed-restricted graph. Pairwise distances are bounded by
    depth_cap (both legs run through the root), so deeper search is pruned;
    a restricted distance that escapes the cap counts as a mismatch."""
    for si in range(sources.shape[0]):
        x = sources[si]
        d_full = bfs_csr_capped(indptr, indices, x, n, allowed, False, depth_cap)
        d_sub = bfs_csr_capped(indptr, indices, x, n, allowed, True, depth_cap)
        for sj in range(sources.shape[0]):
            y = sources[sj]
            if d_sub[y] != d_full[y]:
                return False
    return True
