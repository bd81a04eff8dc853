"""Materialize peeling runs as explicit half-edge maps.

The surgery engine mirrors the trace kernel event for event: it consumes the
same event-uniform stream against the same cumulative tables, so a build and
a trace run with one seed realize the same peeling history. Swallowed pockets
are filled by recursive Boltzmann peeling from a dedicated fill stream, and
the realized interior sizes feed the build's own hull trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import deque

import mpmath as mp
import numpy as np

from hyperplane.combinatorics import BoltzmannTables
from hyperplane.errors import CapacityError, DomainError
from hyperplane.halfedge import HalfEdgeMap, distance_field
from hyperplane.peeling import EventTables, HullTrace
from hyperplane.rngstreams import coerce_streams

_FILL_PMAX_HARD = 1 << 15


class _Surgeon:
    """Mutable half-edge arrays plus the three peeling surgeries."""

    def __init__(self):
        self.twin: list[int] = []
        self.nxt: list[int] = []
        self.prv: list[int] = []
        self.orig: list[int] = []
        self.dead: list[bool] = []
        self.n_vertices = 0

    def add_vertex(self) -> int:
        v = self.n_vertices
        self.n_vertices += 1
        return v

    def add_edge(self, u: int, v: int) -> tuple[int, int]:
        """New edge as a twin pair (u->v, v->u); next pointers unset."""
        h = len(self.twin)
        self.twin.extend((h + 1, h))
        self.nxt.extend((-1, -1))
        self.prv.extend((-1, -1))
        self.orig.extend((u, v))
        self.dead.extend((False, False))
        return h, h + 1

    def link(self, a: int, b: int) -> None:
        self.nxt[a] = b
        self.prv[b] = a

    def head(self, h: int) -> int:
        return self.orig[self.twin[h]]

    # -- peeling surgeries ----------------------------------------------------

    def reveal_new_vertex(self, h: int) -> tuple[int, int, int]:
        """Triangle on the hole side of h with a fresh third vertex c.

        Returns (hole half out of a, hole half out of c, c). The hole gains
        one boundary edge.
        """
        a = self.orig[h]
        e1 = self.nxt[h]
        ph = self.prv[h]
        b = self.head(h)
        c = self.add_vertex()
        n_bc, o_cb = self.add_edge(b, c)
        n_ca, o_ac = self.add_edge(c, a)
        # triangle a -> b -> c
        self.link(h, n_bc)
        self.link(n_bc, n_ca)
        self.link(n_ca, h)
        # hole: ... ph -> o_ac -> o_cb -> e1 ... (1-gon hole collapses ph/e1 to h)
        self.link(o_ac, o_cb)
        if ph == h:  # hole was the single loop h
            self.link(o_cb, o_ac)
        else:
            self.link(ph, o_ac)
            self.link(o_cb, e1)
        return o_ac, o_cb, c

    def split(self, h: int, j: int, p: int) -> tuple[tuple[int, int], tuple[int, int], list[int]]:
        """Triangle on the hole side of h whose third vertex c sits j hole
        edges past the head of h (0 <= j <= p-1).

        Returns ((handle, perimeter) of the head-side region, the same for
        the origin-side region, and the arc half-edges enclosed on the head
        side). Head-side perimeter is j+1, origin-side is p-j.
        """
        a = self.orig[h]
        b = self.head(h)
        ph = self.prv[h]
        arc = []
        e = self.nxt[h]
        for _ in range(j):
            arc.append(e)
            e = self.nxt[e]
        c = b if j == 0 else self.head(arc[-1])
        after = e if j > 0 else self.nxt[h]  # hole half-edge out of c
        t_bc, s_cb = self.add_edge(b, c)
        t_ca, s_ac = self.add_edge(c, a)
        # triangle a -> b -> c
        self.link(h, t_bc)
        self.link(t_bc, t_ca)
        self.link(t_ca, h)
        # head-side region: s_cb then the arc
        if j == 0:
            self.link(s_cb, s_cb)
        else:
            self.link(s_cb, arc[0])
            self.link(arc[-1], s_cb)
        # origin-side region: s_ac then the rest of the old cycle
        if after == h:  # j == p-1, nothing remains on that side
            self.link(s_ac, s_ac)
        else:
            self.link(s_ac, after)
            self.link(ph, s_ac)
        return (s_cb, j + 1), (s_ac, p - j), arc

    def glue_bigon(self, h: int) -> None:
        """Close a 2-gon hole by identifying its two boundary edges."""
        g = self.nxt[h]
        if self.nxt[g] != h or g == h:
            raise DomainError("glue requires a 2-gon hole")
        o1 = self.twin[h]
        o2 = self.twin[g]
        if o1 == g:
            raise DomainError("degenerate 2-gon bounded by one edge")
        self.twin[o1] = o2
        self.twin[o2] = o1
        self.dead[h] = True
        self.dead[g] = True

    # -- finalization ---------------------------------------------------------

    def freeze(self, root_he: int, outer_he: int = -1) -> HalfEdgeMap:
        """Compact away dead half-edges into an immutable map."""
        n = len(self.twin)
        keep = ~np.asarray(self.dead, dtype=bool)
        new_id = np.cumsum(keep) - 1
        twin = np.asarray(self.twin)[keep]
        nxt = np.asarray(self.nxt)[keep]
        orig = np.asarray(self.orig)[keep]
        return HalfEdgeMap(
            twin=new_id[twin],
            nxt=new_id[nxt],
            orig=orig,
            n_vertices=self.n_vertices,
            root_he=int(new_id[root_he]),
            outer_he=int(new_id[outer_he]) if outer_he >= 0 else -1,
        )


class FillLaw:
    """Cumulative event arrays for free Boltzmann filling of a p-gon.

    Events at perimeter p: reveal a triangle with a new inner vertex (weight
    lambda Z_{p+1}), or with its third vertex at hole position j splitting
    the hole into a (j+1)-gon and a (p-j)-gon (weight Z_{j+1} Z_{p-j}), or,
    for p = 2 only, glue the two boundary edges shut (weight 1). All relative
    to Z_p; the identity Z_p = lambda Z_{p+1} + sum_j Z_{j+1} Z_{p-j} + [p=2]
    makes these a probability law.
    """

    def __init__(self, tables: BoltzmannTables):
        self.tables = tables
        self._cums: dict[int, np.ndarray] = {}

    def ensure_tables(self, p: int) -> None:
        if p + 1 > self.tables.p_max:
            if p + 1 > _FILL_PMAX_HARD:
                raise CapacityError(f"filler perimeter {p} beyond hard cap")
            self.tables = self.tables.extended(max(2 * self.tables.p_max, p + 1))
            self._cums.clear()

    def cum(self, p: int) -> np.ndarray:
        seg = self._cums.get(p)
        if seg is not None:
            return seg
        self.ensure_tables(p)
        log_z = self.tables.log_z
        n_events = p + 2 if p == 2 else p + 1
        w = np.empty(n_events)
        w[0] = np.exp(self.tables.log_lam + log_z[p + 1] - log_z[p])
        j = np.arange(p)
        w[1 : p + 1] = np.exp(log_z[j + 1] + log_z[p - j] - log_z[p])
        if p == 2:
            w[p + 1] = np.exp(-log_z[2])
        seg = np.cumsum(w)
        seg[-1] = 1.0
        self._cums[p] = seg
        return seg

    def sum_error(self, p: int) -> float:
        self.ensure_tables(p)
        with mp.workdps(self.tables.params.dps):
            total = self.tables.params.lam * self.tables.z(p + 1) / self.tables.z(p)
            for j in range(p):
                total += self.tables.z(j + 1) * self.tables.z(p - j) / self.tables.z(p)
            if p == 2:
                total += 1 / self.tables.z(2)
            return float(abs(total - 1))


def fill_hole(surgeon: _Surgeon, law: FillLaw, handle: int, perimeter: int,
              rng: np.random.Generator) -> int:
    """Fill the hole at the given half-edge by recursive Boltzmann peeling;
    returns the number of inner vertices created."""
    stack = [(handle, perimeter)]
    n_inner = 0
    while stack:
        h, p = stack.pop()
        seg = law.cum(p)
        k = int(np.searchsorted(seg, rng.random(), side="right"))
        if k == 0:
            h2, _, _ = surgeon.reveal_new_vertex(h)
            n_inner += 1
            stack.append((h2, p + 1))
        elif k <= p:
            side_b, side_a, _ = surgeon.split(h, k - 1, p)
            stack.append(side_a)
            stack.append(side_b)  # head side fills first
        else:
            surgeon.glue_bigon(h)
    return n_inner


def fill_size_only(law: FillLaw, perimeter: int, rng: np.random.Generator) -> int:
    """Inner-vertex count of a filling, consuming uniforms exactly like
    fill_hole but without building the map."""
    stack = [perimeter]
    n_inner = 0
    while stack:
        p = stack.pop()
        seg = law.cum(p)
        k = int(np.searchsorted(seg, rng.random(), side="right"))
        if k == 0:
            n_inner += 1
            stack.append(p + 1)
        elif k <= p:
            stack.append(p - k + 1)
            stack.append(k)  # head-side (j+1)-gon with j = k-1 fills first
        # else: glue, nothing pushed
    return n_inner


def boltzmann_polygon(p: int) -> tuple[_Surgeon, int, int]:
    """Fresh surgeon holding a bare p-gon; returns (surgeon, hole handle,
    outer handle). The outer side of the cycle is the distinguished p-gon
    face, the inner side is the hole to fill."""
    if p < 1:
        raise DomainError("p >= 1 required")
    s = _Surgeon()
    verts = [s.add_vertex() for _ in range(p)]
    inner = []
    outer = []
    for i in range(p):
        u = verts[i]
        v = verts[(i + 1) % p]
        hin, hout = s.add_edge(u, v)
        inner.append(hin)
        outer.append(hout)
    for i in range(p):
        s.link(inner[i], inner[(i + 1) % p])
        s.link(outer[(i + 1) % p], outer[i])
    return s, inner[0], outer[0]


def fill_boltzmann(p: int, weight, rng) -> tuple[HalfEdgeMap, int]:
    """Random free Boltzmann triangulation of a p-gon.

    weight is a BoltzmannTables or a LambdaParams (tables are then built on
    the fly). Returns (map, inner vertex count); the total inner-vertex law
    is the acceptance contract, checked against the exact tables. rng may be
    a Generator or anything coerce_streams accepts.
    """
    if isinstance(weight, BoltzmannTables):
        tables = weight
    else:
        tables = BoltzmannTables(weight, p_max=max(2 * p, 32))
    if isinstance(rng, np.random.Generator):
        gen = rng
    else:
        gen = coerce_streams(rng).pocket(0)
    surgeon, hole, outer = boltzmann_polygon(p)
    law = FillLaw(tables)
    n_inner = fill_hole(surgeon, law, hole, p, gen)
    m = surgeon.freeze(root_he=outer, outer_he=outer)
    return m, n_inner


# ---------------------------------------------------------------------------
# hull construction for the full-plane ensemble
# ---------------------------------------------------------------------------


@dataclass
class BallBuild:
    """A materialized hull together with the trace of its own peeling run."""

    map: HalfEdgeMap
    trace: HullTrace
    distances: np.ndarray

    @property
    def explored_radius(self) -> int:
        return len(self.trace)

    def hull(self, r: int) -> "HullView":
        return hull_of_radius(self.map, self.distances, r, self.explored_radius)


class FillEventTables:
    """Flattened per-perimeter cumulative filler-event arrays for the build
    kernel: segment p holds [new, split_0..split_{p-1}, glue], with the glue
    slot padded to 1 for p != 2. Past exact_cap the cap segment serves as the
    large-perimeter limit law, as in EventTables."""

    def __init__(self, tables: BoltzmannTables, built_pmax: int = 64,
                 exact_cap: int = 4096):
        self.tables = tables
        self.exact_cap = exact_cap
        self.built_pmax = 0
        self.rebuild(min(built_pmax, exact_cap))

    def rebuild(self, built_pmax: int) -> None:
        built_pmax = min(built_pmax, self.exact_cap)
        if built_pmax + 1 > self.tables.p_max:
            self.tables = self.tables.extended(built_pmax + 1)
        log_z = self.tables.log_z
        log_lam = self.tables.log_lam
        offsets = np.zeros(built_pmax + 2, dtype=np.int64)
        for p in range(1, built_pmax + 1):
            offsets[p + 1] = offsets[p] + p + 2
        flat = np.empty(offsets[built_pmax + 1])
        for p in range(1, built_pmax + 1):
            seg = np.empty(p + 2)
            seg[0] = np.exp(log_lam + log_z[p + 1] - log_z[p])
            j = np.arange(p)
            seg[1 : p + 1] = np.exp(log_z[j + 1] + log_z[p - j] - log_z[p])
            seg[p + 1] = np.exp(-log_z[2]) if p == 2 else 0.0
            cum = np.cumsum(seg)
            if p != 2:
                cum[p] = 1.0
            cum[p + 1] = 1.0
            flat[offsets[p] : offsets[p + 1]] = cum
        self.flat = flat
        self.offsets = offsets
        self.built_pmax = built_pmax

    def ensure(self, p: int) -> bool:
        if p < self.built_pmax or self.built_pmax >= self.exact_cap:
            return p < self.built_pmax
        self.rebuild(max(2 * self.built_pmax, p + 1))
        return p < self.built_pmax


def build_pshit_ball(tables: BoltzmannTables, target_radius: int, rng,
                     replica: int = 0, events: EventTables | None = None) -> BallBuild:
    """Materialize one peeling run into an explicit map of the hull of the
    given radius, returning the map, its trace, and BFS distances.

    Mirrors the trace kernel's event-uniform protocol on the same stream, so
    one (seed, replica) yields the same peeling history in both; the vertex
    counts here are the realized interior sizes of the pocket fillings.
    """
    from hyperplane import _buildkernel as bk

    if target_radius < 1:
        raise DomainError("target_radius >= 1 required")
    streams = coerce_streams(rng, replica)
    if events is None:
        events = EventTables(tables)
    fills = FillEventTables(events.tables)
    event_rng = streams.events()
    fill_rng = streams.extra(0)

    vcap = 1 << 12
    hecap = 1 << 13
    qcap = 1 << 12
    fscap = 1 << 10
    twin = np.zeros(hecap, dtype=np.int64)
    nxt = np.zeros(hecap, dtype=np.int64)
    prv = np.zeros(hecap, dtype=np.int64)
    orig = np.zeros(hecap, dtype=np.int64)
    dead = np.zeros(hecap, dtype=np.uint8)
    height = np.full(vcap, -1, dtype=np.int64)
    bhe = np.zeros(vcap, dtype=np.int64)
    queue = np.zeros(qcap, dtype=np.int64)
    fs_handle = np.zeros(fscap, dtype=np.int64)
    fs_perim = np.zeros(fscap, dtype=np.int64)
    row_perim = np.zeros(target_radius, dtype=np.int64)
    row_vol = np.zeros(target_radius, dtype=np.int64)
    row_steps = np.zeros(target_radius, dtype=np.int64)

    state = np.zeros(bk.STATE_LEN, dtype=np.int64)
    # root vertex 0 with its loop; half 0 faces the root 1-gon, half 1 the hole
    twin[0], twin[1] = 1, 0
    nxt[0], prv[0] = 0, 0
    nxt[1], prv[1] = 1, 1
    height[0] = 0
    bhe[0] = 1
    queue[0] = 0
    state[bk.QTAIL] = 1
    state[bk.NLOW] = 1
    state[bk.PERIM] = 1
    state[bk.NEXTV] = 1
    state[bk.NEXTHE] = 2
    state[bk.VOL] = 1
    state[bk.RINGHEAD] = 0

    ev_u = event_rng.random(1 << 14)
    fill_u = fill_rng.random(1 << 14)
    while True:
        status = bk.build_kernel(
            state, twin, nxt, prv, orig, dead, height, bhe, queue,
            fs_handle, fs_perim,
            events.cum_flat, events.offsets, events.built_pmax, events.exact_cap,
            fills.flat, fills.offsets, fills.built_pmax, fills.exact_cap,
            ev_u, len(ev_u), fill_u, len(fill_u),
            row_perim, row_vol, row_steps, target_radius,
        )
        if status == bk.DONE:
            break
        if status == bk.NEED_EV_UNIFORMS:
            ev_u = np.concatenate([ev_u[state[bk.EUIDX]:], event_rng.random(1 << 15)])
            state[bk.EUIDX] = 0
        elif status == bk.NEED_FILL_UNIFORMS:
            fill_u = np.concatenate([fill_u[state[bk.FUIDX]:], fill_rng.random(1 << 15)])
            state[bk.FUIDX] = 0
        elif status == bk.NEED_EVENT_TABLES:
            events.ensure(int(state[bk.PERIM]) + 2)
        elif status == bk.NEED_FILL_TABLES:
            fills.ensure(int(fs_perim[state[bk.FILLTOP] - 1]) + 2)
        elif status == bk.NEED_VERTEX_CAP:
            grow = len(height)
            height = np.concatenate([height, np.full(grow, -1, dtype=np.int64)])
            bhe = np.concatenate([bhe, np.zeros(grow, dtype=np.int64)])
        elif status == bk.NEED_HALFEDGE_CAP:
            grow = len(twin)
            twin = np.concatenate([twin, np.zeros(grow, dtype=np.int64)])
            nxt = np.concatenate([nxt, np.zeros(grow, dtype=np.int64)])
            prv = np.concatenate([prv, np.zeros(grow, dtype=np.int64)])
            orig = np.concatenate([orig, np.zeros(grow, dtype=np.int64)])
            dead = np.concatenate([dead, np.zeros(grow, dtype=np.uint8)])
        elif status == bk.NEED_QUEUE_CAP:
            queue = np.concatenate([queue, np.zeros(len(queue), dtype=np.int64)])
        elif status == bk.NEED_FILLSTACK_CAP:
            fs_handle = np.concatenate([fs_handle, np.zeros(len(fs_handle), dtype=np.int64)])
            fs_perim = np.concatenate([fs_perim, np.zeros(len(fs_perim), dtype=np.int64)])
        else:
            raise RuntimeError("build kernel invariant broken")

    n_he = int(state[bk.NEXTHE])
    keep = dead[:n_he] == 0
    new_id = np.cumsum(keep) - 1
    outer_raw = int(bhe[state[bk.RINGHEAD]])
    m = HalfEdgeMap(
        twin=new_id[twin[:n_he][keep]],
        nxt=new_id[nxt[:n_he][keep]],
        orig=orig[:n_he][keep],
        n_vertices=int(state[bk.NEXTV]),
        root_he=int(new_id[0]),
        outer_he=int(new_id[outer_raw]),
    )
    meta = {
        "lambda": mp.nstr(tables.params.lam, 17),
        "h": mp.nstr(tables.params.h, 17),
        "seed": streams.seed,
        "replica": streams.replica,
    }
    trace = HullTrace(
        np.arange(1, target_radius + 1, dtype=np.int64),
        row_perim, row_vol, row_steps, meta,
    )
    return BallBuild(map=m, trace=trace, distances=distance_field(m))


def build_pshit_ball_reference(tables: BoltzmannTables, target_radius: int, rng,
                               replica: int = 0, events: EventTables | None = None) -> BallBuild:
    """Pure-Python reference implementation of build_pshit_ball; same streams,
    same uniform protocol, kept for cross-validation on small radii."""
    if target_radius < 1:
        raise DomainError("target_radius >= 1 required")
    streams = coerce_streams(rng, replica)
    if events is None:
        events = EventTables(tables)
    law = FillLaw(events.tables)
    event_rng = streams.events()
    fill_rng = streams.extra(0)

    s = _Surgeon()
    root = s.add_vertex()
    l_root, l_hole = s.add_edge(root, root)
    s.link(l_root, l_root)
    s.link(l_hole, l_hole)

    height = {root: 0}
    bhe = {root: l_hole}  # live boundary vertex -> its outgoing hole half-edge
    queue: deque[int] = deque([root])
    ring_head = root
    p = 1
    n_low = 1
    layer = 0
    steps = 0
    n_pockets = 0
    volume = 1
    rows = []

    while layer < target_radius:
        if n_low == 0:
            # fresh layer: reload the queue with the whole ring, mirroring
            # the kernel's walk order from the head vertex
            queue.clear()
            k = bhe[ring_head]
            for _ in range(p):
                queue.append(s.orig[k])
                k = s.nxt[k]
            n_low = p

        a = queue.popleft()
        if height.get(a, -1) != layer:
            continue  # stale entry
        if p >= events.built_pmax and events.built_pmax < events.exact_cap:
            events.ensure(p + 2)
        q = p if p < events.built_pmax else events.built_pmax
        off = events.offsets[q]
        seg = events.cum_flat[off : off + q + 1]
        u = event_rng.random()
        k = int(np.searchsorted(seg, u, side="right"))
        steps += 1
        h = bhe[a]

        if k == 0:
            o_ac, o_cb, c = s.reveal_new_vertex(h)
            height[c] = layer + 1
            bhe[a] = o_ac
            bhe[c] = o_cb
            p += 1
            volume += 1
            queue.append(a)
        else:
            i = k - 1
            right = event_rng.random() < 0.5
            j = i if right else p - 1 - i
            (s_cb, per_b), (s_ac, per_a), _ = s.split(h, j, p)
            if right:
                pocket_handle, pocket_per = s_cb, per_b
                hole_handle, hole_per = s_ac, per_a
                ring_head = a
            else:
                pocket_handle, pocket_per = s_ac, per_a
                hole_handle, hole_per = s_cb, per_b
                ring_head = s.head(s_cb)  # b survives on the hole side
            # enclosed vertices: every vertex on the pocket cycle except the
            # split vertex c = orig(s_cb), which stays on the hole
            c = s.orig[s_cb]
            walk = s.nxt[pocket_handle]
            while walk != pocket_handle:
                v = s.orig[walk]
                if v != c:
                    if height.get(v, -1) == layer:
                        n_low -= 1
                    height[v] = -1
                    bhe.pop(v, None)
                walk = s.nxt[walk]
            if s.orig[pocket_handle] != c:  # left split: handle starts at a
                v = s.orig[pocket_handle]
                if height.get(v, -1) == layer:
                    n_low -= 1
                height[v] = -1
                bhe.pop(v, None)
            bhe[s.orig[hole_handle]] = hole_handle
            if right or i == 0:
                queue.append(a)
            p = hole_per
            n_inner = fill_hole(s, law, pocket_handle, pocket_per, fill_rng)
            n_pockets += 1
            volume += n_inner

        if n_low == 0:
            rows.append((layer + 1, p, volume, steps))
            layer += 1

    m = s.freeze(root_he=l_root, outer_he=bhe[ring_head])
    rows_arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
    meta = {
        "lambda": mp.nstr(tables.params.lam, 17),
        "h": mp.nstr(tables.params.h, 17),
        "seed": streams.seed,
        "replica": streams.replica,
    }
    trace = HullTrace(rows_arr[:, 0], rows_arr[:, 1], rows_arr[:, 2], rows_arr[:, 3], meta)
    return BallBuild(map=m, trace=trace, distances=distance_field(m))


# ---------------------------------------------------------------------------
# BFS oracles over materialized maps
# ---------------------------------------------------------------------------


@dataclass
class HullView:
    """Hull of one radius inside an explored map."""

    r: int
    face_mask: np.ndarray  # over face ids
    vertex_ids: np.ndarray
    boundary_edges: int

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)


def _face_structure(m: HalfEdgeMap):
    """(labels, n_faces, outer face id, face->halves CSR), cached on the map."""
    cached = getattr(m, "_faces", None)
    if cached is None:
        from hyperplane._mapanalytics import face_labels_kernel

        labels, n_faces = face_labels_kernel(m.nxt)
        order = np.argsort(labels, kind="stable")
        indptr = np.searchsorted(labels[order], np.arange(n_faces + 1))
        cached = (labels, n_faces, order, indptr)
        object.__setattr__(m, "_faces", cached)
    return cached


def hull_of_radius(m: HalfEdgeMap, dist: np.ndarray, r: int,
                   explored_radius: int | None = None) -> HullView:
    """Faces with a vertex at distance <= r-1, plus the bounded components of
    their complement relative to the outer face; the map-level hull.

    The outer face must be the unexplored region (m.outer_he >= 0). Pass the
    explored radius to guard against asking for hulls the exploration cannot
    certify.
    """
    from hyperplane._mapanalytics import hull_outside_kernel

    if r < 1:
        raise DomainError("r >= 1 required")
    if explored_radius is not None and r > explored_radius:
        raise DomainError(f"hull radius {r} exceeds explored radius {explored_radius}")
    if m.outer_he < 0:
        raise DomainError("map carries no outer face")
    labels, n_faces, face_halves, face_indptr = _face_structure(m)
    outer = int(labels[m.outer_he])

    face_min = np.full(n_faces, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(face_min, labels, dist[m.orig])
    in_ball = face_min <= r - 1
    in_ball[outer] = False

    twin_face = labels[m.twin]
    outside = hull_outside_kernel(labels, twin_face, face_indptr, face_halves,
                                  in_ball, outer, n_faces)
    face_mask = ~outside
    face_mask[outer] = False

    hull_halves = face_mask[labels]
    verts = np.unique(m.orig[hull_halves])
    boundary = int((hull_halves & ~face_mask[twin_face]).sum())
    return HullView(r=r, face_mask=face_mask, vertex_ids=verts, boundary_edges=boundary)


def check_hull_against_trace(build: BallBuild) -> bool:
    """Same-run oracle: BFS-derived hull sizes equal the trace rows exactly."""
    for r, b_edges, verts in zip(build.trace.radii, build.trace.boundary_edges,
                                 build.trace.vertices):
        view = hull_of_radius(build.map, build.distances, int(r))
        if view.boundary_edges != int(b_edges) or view.n_vertices != int(verts):
            return False
    return True


def check_geodesic_containment(m: HalfEdgeMap, dist: np.ndarray, r: int,
                               explored_radius: int) -> bool:
    """True iff every vertex pair of the hull of radius r has the same
    distance inside the hull of radius 2r as in the whole explored map."""
    from hyperplane._mapanalytics import geodesic_check_kernel

    if 2 * r > explored_radius:
        raise DomainError("containment check needs exploration to radius 2r")
    inner = hull_of_radius(m, dist, r)
    outer_view = hull_of_radius(m, dist, 2 * r)
    allowed = np.zeros(m.n_vertices, dtype=bool)
    allowed[outer_view.vertex_ids] = True
    indptr, indices = m.csr()
    # pocket interiors sit deeper than r, so pairwise distances inside the
    # hull are bounded by twice its maximal root distance, not by 2r
    depth_cap = 2 * int(dist[inner.vertex_ids].max()) + 1
    return bool(geodesic_check_kernel(indptr, indices, m.n_vertices,
                                      inner.vertex_ids, allowed, depth_cap))


def find_containment_counterexample(m: HalfEdgeMap, dist: np.ndarray, r: int):
    """Look for a vertex pair in the hull of radius r whose distance computed
    inside that same hull exceeds the true distance (shows radius r is not
    enough; 2r is needed). Returns (x, y, d_restricted, d_full) or None."""
    from hyperplane._mapanalytics import bfs_csr, bfs_csr_masked

    inner = hull_of_radius(m, dist, r)
    allowed = np.zeros(m.n_vertices, dtype=bool)
    allowed[inner.vertex_ids] = True
    indptr, indices = m.csr()
    for x in inner.vertex_ids:
        d_full = bfs_csr(indptr, indices, int(x), m.n_vertices)
        d_sub = bfs_csr_masked(indptr, indices, int(x), m.n_vertices, allowed)
        for y in inner.vertex_ids:
            if d_sub[y] != d_full[y]:
                return int(x), int(y), int(d_sub[y]), int(d_full[y])
    return None


def structural_summary(m: HalfEdgeMap) -> dict:
    """Euler characteristic and face-degree census, for invariant checks."""
    degrees = m.face_degrees()
    return {
        "euler": m.euler_characteristic(),
        "n_vertices": m.n_vertices,
        "n_edges": m.n_edges,
        "n_faces": m.n_faces,
        "face_degrees": degrees,
    }


def check_filler_output(m: HalfEdgeMap, p: int, n_inner: int) -> None:
    """Structural contract of a Boltzmann filling: all faces triangles except
    the distinguished p-gon, Euler relation, and the edge-count identity
    E = 3n + 2p - 3."""
    info = structural_summary(m)
    if info["euler"] != 2:
        raise DomainError(f"Euler characteristic {info['euler']} != 2")
    if m.n_vertices != n_inner + p:
        raise DomainError("vertex count mismatch")
    if m.n_edges != 3 * n_inner + 2 * p - 3:
        raise DomainError(f"edge count {m.n_edges} != 3n+2p-3 = {3 * n_inner + 2 * p - 3}")
    labels = m.face_labels()
    degs = np.bincount(labels)
    outer = labels[m.outer_he]
    if degs[outer] != p:
        raise DomainError("distinguished face is not a p-gon")
    rest = np.delete(degs, outer)
    if not (rest == 3).all():
        raise DomainError("non-triangular interior face")
