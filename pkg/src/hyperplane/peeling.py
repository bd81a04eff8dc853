"""Peeling-by-layers sampler for the Markovian triangulations of the plane.

The boundary of the explored region is a doubly linked ring of vertices
carrying their (final) graph distance from the root. Building layer r peels
only edges with an endpoint at distance r-1; the layer closes when no such
vertex remains on the ring, at which point the explored region is exactly
the hull of radius r. Swallowed pockets contribute their inner-vertex counts
to the hull volume; the sizes are drawn from a dedicated stream after the
walk, which keeps the event stream identical between trace-only runs and
map-materializing runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from numba import njit

from hyperplane.combinatorics import BoltzmannTables, LambdaParams
from hyperplane.errors import CapacityError, DomainError
from hyperplane.rngstreams import RunStreams, coerce_streams
from hyperplane.sizelaws import PocketSizeSampler

UNIFORM_BLOCK = 1 << 16

# kernel return codes
_DONE = 0
_NEED_UNIFORMS = 1
_NEED_TABLES = 2
_NEED_VERTEX_CAP = 3
_NEED_QUEUE_CAP = 4
_NEED_POCKET_CAP = 5
_BROKEN = 6

# state slots
_QHEAD, _QTAIL, _NLOW, _PERIM, _NEWV, _STEPS, _LAYER, _UIDX, _NPOCK, _NEXTV, _HEAD = range(11)


class PeelEvent:
    """One peeling step outcome. kind is 'new_vertex', 'swallow_left', or
    'swallow_right'; i is the number of boundary edges enclosed on that side,
    whose pocket is a Boltzmann (i+1)-gon with swallowed_inner_vertices
    interior vertices (0 for a new-vertex step)."""

    __slots__ = ("kind", "i", "swallowed_inner_vertices")

    def __init__(self, kind: str, i: int = 0, swallowed_inner_vertices: int = 0):
        self.kind = kind
        self.i = i
        self.swallowed_inner_vertices = swallowed_inner_vertices

    @property
    def perimeter_delta(self) -> int:
        return 1 if self.kind == "new_vertex" else -self.i

    def __repr__(self):
        if self.kind == "new_vertex":
            return "PeelEvent(new_vertex)"
        return (f"PeelEvent({self.kind}, i={self.i}, "
                f"swallowed={self.swallowed_inner_vertices})")


def step_distribution(tables: BoltzmannTables, p: int):
    """Exact one-step law of the peeling at boundary perimeter p.

    Returns (p_new, swallow) where swallow[i] is the probability of enclosing
    i boundary edges on one given side (left and right are equal), all as
    mpf at table precision. p_new + 2 sum(swallow) = 1 up to precision.
    """
    if p < 1:
        raise DomainError("p >= 1 required")
    if p + 1 > tables.p_max + 1:
        raise CapacityError(
            f"step distribution at p={p} needs C_{p + 1}; extend tables past {tables.p_max}"
        )
    with mp.workdps(tables.params.dps):
        cp = tables.c(p)
        p_new = tables.params.lam * tables.c(p + 1) / cp
        swallow = [tables.c(p - i) * tables.z(i + 1) / cp for i in range(p)]
        return p_new, swallow


def step_distribution_vector(tables: BoltzmannTables, p: int) -> np.ndarray:
    """Float probability vector [new, L0..L_{p-1}, R0..R_{p-1}]."""
    p_new, swallow = step_distribution(tables, p)
    vec = np.empty(2 * p + 1)
    vec[0] = float(p_new)
    half = np.array([float(s) for s in swallow])
    vec[1 : p + 1] = half
    vec[p + 1 :] = half
    return vec


class EventTables:
    """Per-perimeter cumulative event arrays consumed by the kernels.

    Layout: for perimeter p, cum_flat[off[p] : off[p] + p + 1] holds the
    cumulative probabilities of [new_vertex, pair(0), ..., pair(p-1)] where
    pair(i) sums the two sides. The final entry is clamped to 1.

    Exact vectors are built up to exact_cap; past the cap the boundary-length
    dependence of the one-step law has converged (geometrically fast below
    criticality, like (1 - i/p)^{3/2} at it), and the cap vector is used as
    the large-perimeter limit law.
    """

    def __init__(self, tables: BoltzmannTables, built_pmax: int = 512,
                 exact_cap: int = 4096):
        self.tables = tables
        self.exact_cap = exact_cap
        self.built_pmax = 0
        self.cum_flat = np.empty(0)
        self.offsets = np.zeros(1, dtype=np.int64)
        self.rebuild(min(built_pmax, exact_cap))

    def rebuild(self, built_pmax: int) -> None:
        built_pmax = min(built_pmax, self.exact_cap)
        if built_pmax > self.tables.p_max:
            self.tables = self.tables.extended(built_pmax)
        t = self.tables
        log_c = t.log_c
        log_z = t.log_z
        offsets = np.zeros(built_pmax + 2, dtype=np.int64)
        for p in range(1, built_pmax + 1):
            offsets[p + 1] = offsets[p] + p + 1
        flat = np.empty(offsets[built_pmax + 1])
        for p in range(1, built_pmax + 1):
            seg = np.empty(p + 1)
            seg[0] = np.exp(t.log_lam + log_c[p + 1] - log_c[p])
            i = np.arange(p)
            seg[1:] = 2.0 * np.exp(log_c[p - i] + log_z[i + 1] - log_c[p])
            cum = np.cumsum(seg)
            cum[-1] = 1.0
            flat[offsets[p] : offsets[p + 1]] = cum
        self.cum_flat = flat
        self.offsets = offsets
        self.built_pmax = built_pmax

    def ensure(self, p: int) -> bool:
        """Grow toward p; returns False when p exceeds the exact cap and the
        limit law applies instead."""
        if p < self.built_pmax or self.built_pmax >= self.exact_cap:
            return p < self.built_pmax
        self.rebuild(max(2 * self.built_pmax, p + 1))
        return p < self.built_pmax

    def sum_error(self, p: int) -> float:
        """|1 - sum of the unclamped event probabilities| at perimeter p."""
        t = self.tables
        seg = np.empty(p + 1)
        seg[0] = np.exp(t.log_lam + t.log_c[p + 1] - t.log_c[p])
        i = np.arange(p)
        seg[1:] = 2.0 * np.exp(t.log_c[p - i] + t.log_z[i + 1] - t.log_c[p])
        return abs(seg.sum() - 1.0)


@njit(cache=True)
def _peel_kernel(nxt, prv, height, queue, state, cum_flat, offsets, built_pmax,
                 exact_cap, uniforms, n_uniforms, row_perim, row_newv, row_steps,
                 pocket_layer, pocket_perim, r_max):
    qhead = state[_QHEAD]
    qtail = state[_QTAIL]
    n_low = state[_NLOW]
    p = state[_PERIM]
    newv = state[_NEWV]
    steps = state[_STEPS]
    layer = state[_LAYER]
    uidx = state[_UIDX]
    npock = state[_NPOCK]
    nextv = state[_NEXTV]
    head = state[_HEAD]
    vcap = nxt.shape[0]
    qcap = queue.shape[0]
    pcap = pocket_layer.shape[0]

    status = _BROKEN
    while True:
        if layer >= r_max:
            status = _DONE
            break
        if uidx + 2 > n_uniforms:
            status = _NEED_UNIFORMS
            break
        if p >= built_pmax and built_pmax < exact_cap:
            status = _NEED_TABLES
            break
        if nextv + 1 > vcap:
            status = _NEED_VERTEX_CAP
            break
        if qtail + 1 > qcap:
            status = _NEED_QUEUE_CAP
            break
        if npock + 1 > pcap:
            status = _NEED_POCKET_CAP
            break
        if n_low == 0:
            # fresh layer: every ring vertex sits at the new low height
            if p > qcap:
                status = _NEED_QUEUE_CAP
                break
            qhead = 0
            qtail = 0
            v = head
            for _ in range(p):
                queue[qtail] = v
                qtail += 1
                v = nxt[v]
            n_low = p

        # pop a live low vertex; stale entries are skipped
        a = -1
        while qhead < qtail:
            cand = queue[qhead]
            qhead += 1
            if height[cand] == layer:
                a = cand
                break
        if a < 0:
            status = _BROKEN  # invariant: n_low == 0 must have been seen
            break

        b = nxt[a]
        q = p if p < built_pmax else built_pmax  # limit law past the cap
        off = offsets[q]
        u = uniforms[uidx]
        uidx += 1
        k = np.searchsorted(cum_flat[off : off + q + 1], u, side="right")
        steps += 1

        if k == 0:
            c = nextv
            nextv += 1
            height[c] = layer + 1
            nxt[a] = c
            prv[c] = a
            nxt[c] = b
            prv[b] = c
            p += 1
            newv += 1
            queue[qtail] = a
            qtail += 1
        else:
            i = k - 1
            u2 = uniforms[uidx]
            uidx += 1
            right = u2 < 0.5
            if right:
                v = b
                for _ in range(i):
                    w = nxt[v]
                    if height[v] == layer:
                        n_low -= 1
                    height[v] = -1
                    v = w
                c = v
                nxt[a] = c
                prv[c] = a
                queue[qtail] = a
                qtail += 1
                head = a
            else:
                v = a
                for _ in range(i):
                    w = prv[v]
                    if height[v] == layer:
                        n_low -= 1
                    height[v] = -1
                    v = w
                c = v
                nxt[c] = b
                prv[b] = c
                if i == 0:
                    queue[qtail] = a
                    qtail += 1
                head = b
            p -= i
            pocket_layer[npock] = layer + 1
            pocket_perim[npock] = i + 1
            npock += 1

        if n_low == 0:
            row_perim[layer] = p
            row_newv[layer] = newv
            row_steps[layer] = steps
            layer += 1  # refill happens at the top of the next iteration

    state[_QHEAD] = qhead
    state[_QTAIL] = qtail
    state[_NLOW] = n_low
    state[_PERIM] = p
    state[_NEWV] = newv
    state[_STEPS] = steps
    state[_LAYER] = layer
    state[_UIDX] = uidx
    state[_NPOCK] = npock
    state[_NEXTV] = nextv
    state[_HEAD] = head
    return status


@dataclass
class HullTrace:
    """Per-radius hull boundary lengths, vertex counts, and peel-step counts."""

    radii: np.ndarray
    boundary_edges: np.ndarray
    vertices: np.ndarray
    peel_steps: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.radii)
        if len(r) and not (np.diff(r) == 1).all():
            raise DomainError("radii must increase by 1")
        if (np.asarray(self.boundary_edges) < 1).any():
            raise DomainError("boundary must stay nonempty")
        if len(r) and (np.diff(np.asarray(self.vertices)) < 0).any():
            raise DomainError("vertex counts must be nondecreasing")

    def __len__(self):
        return len(self.radii)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("r,boundary_edges,vertices,peel_steps\n")
            for r, b, v, s in zip(self.radii, self.boundary_edges, self.vertices, self.peel_steps):
                fh.write(f"{int(r)},{int(b)},{int(v)},{int(s)}\n")

    def write_sidecar(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.meta, fh, indent=1, sort_keys=True)

    @classmethod
    def read_csv(cls, path, meta=None) -> "HullTrace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        if data.size == 0:
            data = data.reshape(0, 4)
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3], meta or {})


class PeelEngine:
    """Reusable kernel driver holding the event tables for one weight.

    max_vertices bounds the explored hull; deep subcritical runs grow by
    multiple e-folds per layer and would otherwise exhaust memory silently.
    """

    def __init__(self, tables: BoltzmannTables, built_pmax: int = 512,
                 max_vertices: int = 40_000_000):
        self.events = EventTables(tables, built_pmax)
        self.sampler = PocketSizeSampler(self.events.tables)
        self.max_vertices = max_vertices

    @property
    def tables(self) -> BoltzmannTables:
        return self.events.tables

    def run(self, r_max: int, streams: RunStreams) -> HullTrace:
        if r_max < 0:
            raise DomainError("r_max >= 0 required")
        meta = {
            "lambda": mp.nstr(self.tables.params.lam, 17),
            "h": mp.nstr(self.tables.params.h, 17),
            "seed": streams.seed,
            "replica": streams.replica,
        }
        if r_max == 0:
            empty = np.empty(0, dtype=np.int64)
            return HullTrace(empty, empty, empty, empty, meta)

        event_rng = streams.events()
        vcap = 1 << 12
        qcap = 1 << 12
        pcap = 1 << 12
        nxt = np.zeros(vcap, dtype=np.int64)
        prv = np.zeros(vcap, dtype=np.int64)
        height = np.full(vcap, -1, dtype=np.int64)
        queue = np.zeros(qcap, dtype=np.int64)
        pocket_layer = np.zeros(pcap, dtype=np.int64)
        pocket_perim = np.zeros(pcap, dtype=np.int64)
        row_perim = np.zeros(r_max, dtype=np.int64)
        row_newv = np.zeros(r_max, dtype=np.int64)
        row_steps = np.zeros(r_max, dtype=np.int64)

        state = np.zeros(16, dtype=np.int64)
        # root vertex 0: height 0, self-loop ring of perimeter 1
        height[0] = 0
        nxt[0] = 0
        prv[0] = 0
        queue[0] = 0
        state[_QTAIL] = 1
        state[_NLOW] = 1
        state[_PERIM] = 1
        state[_NEXTV] = 1
        state[_HEAD] = 0

        uniforms = event_rng.random(UNIFORM_BLOCK)
        while True:
            status = _peel_kernel(
                nxt, prv, height, queue, state,
                self.events.cum_flat, self.events.offsets,
                self.events.built_pmax, self.events.exact_cap,
                uniforms, len(uniforms),
                row_perim, row_newv, row_steps,
                pocket_layer, pocket_perim, r_max,
            )
            if status == _DONE:
                break
            if status == _NEED_UNIFORMS:
                tail = uniforms[state[_UIDX] :]
                uniforms = np.concatenate([tail, event_rng.random(UNIFORM_BLOCK)])
                state[_UIDX] = 0
            elif status == _NEED_TABLES:
                self.events.ensure(int(state[_PERIM]) + 2)
                self.sampler = PocketSizeSampler(self.events.tables)
            elif status == _NEED_VERTEX_CAP:
                if len(nxt) >= self.max_vertices:
                    raise CapacityError(
                        f"hull exceeded max_vertices={self.max_vertices}; "
                        "this weight/radius pair grows too fast to materialize"
                    )
                grow = len(nxt)
                nxt = np.concatenate([nxt, np.zeros(grow, dtype=np.int64)])
                prv = np.concatenate([prv, np.zeros(grow, dtype=np.int64)])
                height = np.concatenate([height, np.full(grow, -1, dtype=np.int64)])
            elif status == _NEED_QUEUE_CAP:
                queue = np.concatenate([queue, np.zeros(len(queue), dtype=np.int64)])
            elif status == _NEED_POCKET_CAP:
                grow = len(pocket_layer)
                pocket_layer = np.concatenate([pocket_layer, np.zeros(grow, dtype=np.int64)])
                pocket_perim = np.concatenate([pocket_perim, np.zeros(grow, dtype=np.int64)])
            else:
                raise RuntimeError("peeling invariant broken: empty queue with live layer")

        npock = int(state[_NPOCK])
        sizes_rng = streams.sizes()
        sizes = self.sampler.sample(pocket_perim[:npock], sizes_rng) if npock else np.empty(0, dtype=np.int64)
        vol = np.zeros(r_max + 1)
        if npock:
            np.add.at(vol, pocket_layer[:npock], sizes.astype(np.float64))
        pocket_cum = np.cumsum(vol)[1:]
        vertices = 1 + row_newv + pocket_cum.astype(np.int64)
        radii = np.arange(1, r_max + 1, dtype=np.int64)
        return HullTrace(radii, row_perim, vertices, row_steps, meta)


def peel_to_radius(tables: BoltzmannTables, r_max: int, rng, replica: int = 0,
                   engine: PeelEngine | None = None) -> HullTrace:
    """Hull trace of one peeling run to the given radius.

    rng is an int seed, SeedSequence, or RunStreams; plain Generators are
    rejected because the run needs several coordinated counter-based streams.
    """
    streams = coerce_streams(rng, replica)
    if engine is None:
        engine = PeelEngine(tables)
    return engine.run(r_max, streams)


@dataclass
class NearCriticalRun:
    """Rescaled hull observables of near-critical runs at one size parameter."""

    n: int
    r_grid: np.ndarray
    perimeter_rescaled: np.ndarray  # (replicas, len(r_grid)): |bdry B_{rn}| / n^2
    volume_rescaled: np.ndarray  # (replicas, len(r_grid)): |B_{rn}| / n^4
    seed: int


def near_critical_run(n: int, r_grid, replicas: int, rng,
                      tables: BoltzmannTables | None = None) -> NearCriticalRun:
    """Peel replicas of the near-critical ensemble at size parameter n and
    return (|bdry B_{rn}|/n^2, |B_{rn}|/n^4) for each r in r_grid."""
    if n < 4:
        raise DomainError("n >= 4 required")
    r_grid = np.asarray(r_grid, dtype=np.float64)
    if (r_grid <= 0).any():
        raise DomainError("r_grid must be positive")
    streams0 = coerce_streams(rng)
    if tables is None:
        params = LambdaParams.near_critical(n)
        tables = BoltzmannTables(params, p_max=256)
    engine = PeelEngine(tables)
    radii = np.maximum(np.ceil(r_grid * n).astype(np.int64), 1)
    r_max = int(radii.max())
    per = np.empty((replicas, len(r_grid)))
    vol = np.empty((replicas, len(r_grid)))
    for k in range(replicas):
        trace = engine.run(r_max, RunStreams(streams0.seed, k))
        idx = radii - 1
        per[k] = trace.boundary_edges[idx] / n**2
        vol[k] = trace.vertices[idx] / n**4
    return NearCriticalRun(n, r_grid, per, vol, streams0.seed)
