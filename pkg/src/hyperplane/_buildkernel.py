"""Numba kernel for materializing peeling runs as half-edge maps.

Logic mirrors mapbuild's reference surgeon exactly, including the order in
which uniforms are consumed: peeling events come from one stream, all pocket
fillings from a second. State lives in plain int64 arrays so a run can pause
and resume across capacity growth and uniform-block refills.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# return codes
DONE = 0
NEED_EV_UNIFORMS = 1
NEED_FILL_UNIFORMS = 2
NEED_EVENT_TABLES = 3
NEED_FILL_TABLES = 4
NEED_VERTEX_CAP = 5
NEED_HALFEDGE_CAP = 6
NEED_QUEUE_CAP = 7
NEED_FILLSTACK_CAP = 8
BROKEN = 9

# state slots
(QHEAD, QTAIL, NLOW, PERIM, VOL, STEPS, LAYER, EUIDX, FUIDX, NPOCK, NEXTV,
 NEXTHE, RINGHEAD, FILLTOP, ROWPEND) = range(15)
STATE_LEN = 16


@njit(cache=True, inline="always")
def _add_edge(state, twin, nxt, prv, orig, u, v):
    h = state[NEXTHE]
    twin[h] = h + 1
    twin[h + 1] = h
    orig[h] = u
    orig[h + 1] = v
    state[NEXTHE] = h + 2
    return h


@njit(cache=True, inline="always")
def _link(nxt, prv, a, b):
    nxt[a] = b
    prv[b] = a


@njit(cache=True)
def _reveal_new_vertex(state, twin, nxt, prv, orig, h):
    """Triangle with a fresh third vertex on the hole side of h.
    Returns (o_ac, o_cb, c)."""
    a = orig[h]
    e1 = nxt[h]
    ph = prv[h]
    b = orig[twin[h]]
    c = state[NEXTV]
    state[NEXTV] = c + 1
    n_bc = _add_edge(state, twin, nxt, prv, orig, b, c)
    o_cb = n_bc + 1
    n_ca = _add_edge(state, twin, nxt, prv, orig, c, a)
    o_ac = n_ca + 1
    _link(nxt, prv, h, n_bc)
    _link(nxt, prv, n_bc, n_ca)
    _link(nxt, prv, n_ca, h)
    _link(nxt, prv, o_ac, o_cb)
    if ph == h:
        _link(nxt, prv, o_cb, o_ac)
    else:
        _link(nxt, prv, ph, o_ac)
        _link(nxt, prv, o_cb, e1)
    return o_ac, o_cb, c


@njit(cache=True)
def _split(state, twin, nxt, prv, orig, h, j, p):
    """Split the hole at h with the third vertex j hole-edges past head(h).
    Returns (s_cb, s_ac); head side has perimeter j+1, origin side p-j."""
    a = orig[h]
    b = orig[twin[h]]
    ph = prv[h]
    e = nxt[h]
    first = e
    last = -1
    for _ in range(j):
        last = e
        e = nxt[e]
    c = b if j == 0 else orig[twin[last]]
    after = e  # for j == 0 this is nxt[h]
    t_bc = _add_edge(state, twin, nxt, prv, orig, b, c)
    s_cb = t_bc + 1
    t_ca = _add_edge(state, twin, nxt, prv, orig, c, a)
    s_ac = t_ca + 1
    _link(nxt, prv, h, t_bc)
    _link(nxt, prv, t_bc, t_ca)
    _link(nxt, prv, t_ca, h)
    if j == 0:
        _link(nxt, prv, s_cb, s_cb)
    else:
        _link(nxt, prv, s_cb, first)
        _link(nxt, prv, last, s_cb)
    if after == h:  # j == p-1
        _link(nxt, prv, s_ac, s_ac)
    else:
        _link(nxt, prv, s_ac, after)
        _link(nxt, prv, ph, s_ac)
    return s_cb, s_ac


@njit(cache=True)
def _split_left(state, twin, nxt, prv, orig, h, i, p):
    """Same topology as _split(h, p-1-i, p) but found by walking i hole
    edges backward from orig(h), so the cost is O(i) on both sides.
    Returns (s_cb, s_ac); the origin side (pocket) has perimeter i+1."""
    a = orig[h]
    b = orig[twin[h]]
    e1 = nxt[h]
    arc_end = prv[h]
    first_back = -1
    e = prv[h]
    for _ in range(i):
        first_back = e
        e = prv[e]
    c = a if i == 0 else orig[first_back]
    before = e  # half-edge into c
    t_bc = _add_edge(state, twin, nxt, prv, orig, b, c)
    s_cb = t_bc + 1
    t_ca = _add_edge(state, twin, nxt, prv, orig, c, a)
    s_ac = t_ca + 1
    _link(nxt, prv, h, t_bc)
    _link(nxt, prv, t_bc, t_ca)
    _link(nxt, prv, t_ca, h)
    # origin-side pocket: [s_ac, e_{p-i}, ..., e_{p-1}]
    if i == 0:
        _link(nxt, prv, s_ac, s_ac)
    else:
        _link(nxt, prv, s_ac, first_back)
        _link(nxt, prv, arc_end, s_ac)
    # head-side hole: [s_cb, e_1, ..., e_{p-1-i}]
    if i == p - 1:
        _link(nxt, prv, s_cb, s_cb)
    else:
        _link(nxt, prv, s_cb, e1)
        _link(nxt, prv, before, s_cb)
    return s_cb, s_ac


@njit(cache=True)
def build_kernel(state, twin, nxt, prv, orig, dead, height, bhe, queue,
                 fs_handle, fs_perim,
                 ev_flat, ev_off, built_pmax, exact_cap,
                 fill_flat, fill_off, fill_pmax, fill_cap,
                 ev_u, n_ev_u, fill_u, n_fill_u,
                 row_perim, row_vol, row_steps, r_max):
    vcap = height.shape[0]
    hecap = twin.shape[0]
    qcap = queue.shape[0]
    fscap = fs_handle.shape[0]

    while True:
        # ---- drain pending pocket fillings first ----
        if state[FILLTOP] > 0:
            if state[FUIDX] + 1 > n_fill_u:
                return NEED_FILL_UNIFORMS
            if state[NEXTHE] + 4 > hecap:
                return NEED_HALFEDGE_CAP
            if state[NEXTV] + 1 > vcap:
                return NEED_VERTEX_CAP
            if state[FILLTOP] + 2 > fscap:
                return NEED_FILLSTACK_CAP
            top = state[FILLTOP] - 1
            p = fs_perim[top]
            if p >= fill_pmax and fill_pmax < fill_cap:
                return NEED_FILL_TABLES
            q = p if p < fill_pmax else fill_pmax  # limit law past the cap
            h = fs_handle[top]
            state[FILLTOP] = top
            off = fill_off[q]
            u = fill_u[state[FUIDX]]
            state[FUIDX] += 1
            k = np.searchsorted(fill_flat[off : off + q + 2], u, side="right")
            if k == 0:
                h2, _, _ = _reveal_new_vertex(state, twin, nxt, prv, orig, h)
                state[VOL] += 1
                fs_handle[state[FILLTOP]] = h2
                fs_perim[state[FILLTOP]] = p + 1
                state[FILLTOP] += 1
            elif k <= p:
                j = k - 1
                s_cb, s_ac = _split(state, twin, nxt, prv, orig, h, j, p)
                fs_handle[state[FILLTOP]] = s_ac
                fs_perim[state[FILLTOP]] = p - j
                state[FILLTOP] += 1
                fs_handle[state[FILLTOP]] = s_cb
                fs_perim[state[FILLTOP]] = j + 1
                state[FILLTOP] += 1
            else:
                # glue the 2-gon shut
                g = nxt[h]
                o1 = twin[h]
                o2 = twin[g]
                twin[o1] = o2
                twin[o2] = o1
                dead[h] = 1
                dead[g] = 1
            continue

        # ---- layer bookkeeping ----
        if state[ROWPEND] == 1:
            layer = state[LAYER]
            row_perim[layer] = state[PERIM]
            row_vol[layer] = state[VOL]
            row_steps[layer] = state[STEPS]
            state[LAYER] = layer + 1
            state[ROWPEND] = 0
        if state[LAYER] >= r_max:
            return DONE

        p = state[PERIM]
        if state[NLOW] == 0:
            if p > qcap:
                return NEED_QUEUE_CAP
            state[QHEAD] = 0
            state[QTAIL] = 0
            k = bhe[state[RINGHEAD]]
            for _ in range(p):
                queue[state[QTAIL]] = orig[k]
                state[QTAIL] += 1
                k = nxt[k]
            state[NLOW] = p

        # ---- one peeling step ----
        if state[EUIDX] + 2 > n_ev_u:
            return NEED_EV_UNIFORMS
        if p >= built_pmax and built_pmax < exact_cap:
            return NEED_EVENT_TABLES
        if state[NEXTV] + 1 > vcap:
            return NEED_VERTEX_CAP
        if state[NEXTHE] + 4 > hecap:
            return NEED_HALFEDGE_CAP
        if state[QTAIL] + 1 > qcap:
            return NEED_QUEUE_CAP

        a = -1
        while state[QHEAD] < state[QTAIL]:
            cand = queue[state[QHEAD]]
            state[QHEAD] += 1
            if height[cand] == state[LAYER]:
                a = cand
                break
        if a < 0:
            return BROKEN

        q = p if p < built_pmax else built_pmax
        off = ev_off[q]
        u = ev_u[state[EUIDX]]
        state[EUIDX] += 1
        k = np.searchsorted(ev_flat[off : off + q + 1], u, side="right")
        state[STEPS] += 1
        h = bhe[a]

        if k == 0:
            o_ac, o_cb, c = _reveal_new_vertex(state, twin, nxt, prv, orig, h)
            height[c] = state[LAYER] + 1
            bhe[a] = o_ac
            bhe[c] = o_cb
            state[PERIM] = p + 1
            state[VOL] += 1
            queue[state[QTAIL]] = a
            state[QTAIL] += 1
        else:
            i = k - 1
            u2 = ev_u[state[EUIDX]]
            state[EUIDX] += 1
            right = u2 < 0.5
            if right:
                s_cb, s_ac = _split(state, twin, nxt, prv, orig, h, i, p)
                pocket_handle = s_cb
                pocket_per = i + 1
                hole_handle = s_ac
                hole_per = p - i
                state[RINGHEAD] = a
            else:
                s_cb, s_ac = _split_left(state, twin, nxt, prv, orig, h, i, p)
                pocket_handle = s_ac
                pocket_per = i + 1
                hole_handle = s_cb
                hole_per = p - i
                state[RINGHEAD] = orig[twin[s_cb]]  # b survives on the hole
            c = orig[s_cb]
            walk = nxt[pocket_handle]
            while walk != pocket_handle:
                v = orig[walk]
                if v != c:
                    if height[v] == state[LAYER]:
                        state[NLOW] -= 1
                    height[v] = -1
                walk = nxt[walk]
            v = orig[pocket_handle]
            if v != c:
                if height[v] == state[LAYER]:
                    state[NLOW] -= 1
                height[v] = -1
            bhe[orig[hole_handle]] = hole_handle
            if right or i == 0:
                queue[state[QTAIL]] = a
                state[QTAIL] += 1
            state[PERIM] = hole_per
            state[NPOCK] += 1
            fs_handle[0] = pocket_handle
            fs_perim[0] = pocket_per
            state[FILLTOP] = 1

        if state[NLOW] == 0:
            state[ROWPEND] = 1
