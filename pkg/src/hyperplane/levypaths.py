"""Path simulators for the continuum perimeter/volume processes.

The workhorse is the spectrally negative Levy process with exponent
E[e^{u Y_t}] = exp(t sqrt(8/3) u sqrt(u+3)): positive drift 2 sqrt2, negative
jumps with the exponentially tilted 3/2-stable measure, compensated. Small
jumps below a cut are replaced by their compensator plus a variance-matched
Gaussian. The tilted hull pair (P_r, V_r) is its Lamperti time change run
from a positive start and conditioned (by rejection) to stay positive, with
independent volume marks attached to every jump.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from hyperplane.continuum import (
    GROWTH_RATE,
    STABLE_MU_CONST,
    psi_martingale,
    sample_nu,
    stable_jump_density,
    tilted_jump_density,
)
from hyperplane.errors import DomainError, RejectionBudgetError

SQRT2 = np.sqrt(2.0)


@dataclass
class CadlagPath:
    """Right-continuous path carried by a time grid plus an explicit jump list.

    values[i] is the path value at times[i] (after any jump there); jumps are
    recorded separately as (jump_times, jump_sizes) for counting statistics.
    """

    times: np.ndarray
    values: np.ndarray
    jump_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_sizes: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.jump_times = np.asarray(self.jump_times, dtype=float)
        self.jump_sizes = np.asarray(self.jump_sizes, dtype=float)
        if len(self.jump_times) > 1 and not (np.diff(self.jump_times) > 0).all():
            raise DomainError("jump times must strictly increase")

    def __call__(self, t):
        """Right-continuous evaluation."""
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.values[np.clip(idx, 0, len(self.values) - 1)]

    @property
    def terminal(self) -> float:
        return float(self.values[-1])

    def to_csv(self, path) -> None:
        jumpset = set(np.round(self.jump_times, 12))
        with open(path, "w") as fh:
            fh.write("t,value,jump_flag\n")
            for t, v in zip(self.times, self.values):
                flag = 1 if np.round(t, 12) in jumpset else 0
                fh.write(f"{t:.12g},{v:.12g},{flag}\n")


# ---------------------------------------------------------------------------
# jump sampling from the tilted measure
# ---------------------------------------------------------------------------


def _split_quad(f, lo: float, hi: float) -> float:
    """Quadrature with a split at 1; the lower panel is computed in the
    variable u = sqrt(x), which removes the x -> -1/2 power singularity the
    integrands here can carry at the origin."""
    total = 0.0
    if lo < 1.0:
        a, b = np.sqrt(lo), np.sqrt(min(hi, 1.0))
        val, _ = integrate.quad(lambda u: 2.0 * u * f(u * u), a, b,
                                epsabs=1e-13, limit=300)
        total += val
    if hi > 1.0:
        val, _ = integrate.quad(f, max(lo, 1.0), hi, epsabs=1e-13, limit=300)
        total += val
    return total


def tilted_jump_rate(lo: float, hi: float = np.inf) -> float:
    """Integral of the tilted jump density over [lo, hi)."""
    return _split_quad(tilted_jump_density, lo, hi)


def tilted_jump_moment(lo: float, hi: float, k: int) -> float:
    """Integral of x^k against the tilted jump density over [lo, hi)."""
    return _split_quad(lambda x: x**k * tilted_jump_density(x), lo, hi)


def sample_tilted_jumps(lo: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Jump sizes from the tilted measure restricted to [lo, inf), by Pareto
    proposal with acceptance (1+2x) e^{-3x} / ((1+2 lo) e^{-3 lo})."""
    out = np.empty(count)
    filled = 0
    ceiling = (1.0 + 2.0 * lo) * np.exp(-3.0 * lo)
    while filled < count:
        m = min(max(int((count - filled) * 1.8), 256), 16_000_000)
        x = lo * (1.0 - rng.random(m)) ** (-2.0 / 3.0)
        acc = rng.random(m) < (1.0 + 2.0 * x) * np.exp(-3.0 * x) / ceiling
        got = x[acc]
        take = min(len(got), count - filled)
        out[filled : filled + take] = got[:take]
        filled += take
    return out


def simulate_backward_levy(T: float, eps_cut: float, rng: np.random.Generator,
                           n_grid: int = 256) -> CadlagPath:
    """One path of the upward-drifting tilted Levy process on [0, T].

    Jumps of size >= eps_cut are placed individually (as negative jumps);
    smaller ones enter through their exact compensator plus a Brownian
    correction with matched variance, so E[path(t)] = 2 sqrt2 t exactly.
    """
    if T <= 0:
        raise DomainError("T > 0 required")
    if not (0 < eps_cut <= 0.1):
        raise DomainError("eps_cut must lie in (0, 0.1]")
    rate = tilted_jump_rate(eps_cut)
    mean_big = tilted_jump_moment(eps_cut, np.inf, 1)
    var_small = tilted_jump_moment(0.0, eps_cut, 2)
    n_jumps = rng.poisson(rate * T)
    jt = np.sort(rng.random(n_jumps) * T)
    js = -sample_tilted_jumps(eps_cut, n_jumps, rng)
    grid = np.linspace(0.0, T, n_grid + 1)
    times = np.unique(np.concatenate([grid, jt]))
    # Brownian small-jump correction accumulated along the grid
    dW = rng.normal(0.0, 1.0, len(times) - 1) * np.sqrt(np.diff(times) * var_small)
    brown = np.concatenate([[0.0], np.cumsum(dW)])
    drift = (GROWTH_RATE + mean_big) * times
    jump_part = np.zeros(len(times))
    if n_jumps:
        idx = np.searchsorted(times, jt, side="left")
        np.add.at(jump_part, idx, js)
        jump_part = np.cumsum(jump_part)
    values = drift + brown + jump_part
    return CadlagPath(times, values, jt, js)


def backward_levy_terminal(T: float, eps_cut: float, n_paths: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Terminal values of many independent tilted-Levy paths (the same
    construction as simulate_backward_levy, vectorized, no path storage)."""
    if T <= 0:
        raise DomainError("T > 0 required")
    if not (0 < eps_cut <= 0.1):
        raise DomainError("eps_cut must lie in (0, 0.1]")
    rate = tilted_jump_rate(eps_cut)
    mean_big = tilted_jump_moment(eps_cut, np.inf, 1)
    var_small = tilted_jump_moment(0.0, eps_cut, 2)
    tot = np.empty(n_paths)
    chunk = max(int(8_000_000 / max(rate * T, 1.0)), 16)
    done = 0
    while done < n_paths:
        n = min(chunk, n_paths - done)
        counts = rng.poisson(rate * T, n)
        jumps = sample_tilted_jumps(eps_cut, int(counts.sum()), rng)
        owner = np.repeat(np.arange(n), counts)
        part = np.zeros(n)
        np.add.at(part, owner, -jumps)
        tot[done : done + n] = part
        done += n
    tot += (GROWTH_RATE + mean_big) * T
    tot += rng.normal(0.0, np.sqrt(var_small * T), n_paths)
    return tot


# ---------------------------------------------------------------------------
# martingale check for the jump-reweighted stable process
# ---------------------------------------------------------------------------


def martingale_check(t: float, replicas: int, eps_cut: float,
                     rng: np.random.Generator, band_split: float = 0.02) -> tuple[float, float]:
    """Monte Carlo estimate of E[M_t] for
    M_t = e^{-S_t} prod (1 + 2 dS) e^{-2 dS}, S the compensated spectrally
    positive 3/2-stable process truncated at eps_cut.

    Jumps above band_split are simulated individually; the band
    [eps_cut, band_split) enters through a moment-matched bivariate normal
    for the pair (sum of jumps, sum of log-weights); jumps below eps_cut are
    carried by their exact analytic contribution exp(t kappa(eps_cut)), which
    vanishes as eps_cut -> 0. Returns (estimate, stderr); the target is 1.
    """
    if t <= 0:
        raise DomainError("t > 0 required")
    if not (0 < eps_cut <= band_split):
        raise DomainError("need 0 < eps_cut <= band_split")
    g = lambda x: np.log1p(2.0 * x) - 2.0 * x

    def mu_int(f, lo, hi):
        return _split_quad(lambda x: f(x) * stable_jump_density(x), lo, hi)

    # analytic sub-cut factor: int (e^{-x}(1+2x)e^{-2x} - 1 + x) mu(dx);
    # the integrand is ~ -1.5 x^2 at 0 and must be evaluated cancellation-free
    kappa = mu_int(lambda x: (1.0 + 2.0 * x) * np.expm1(-3.0 * x) + 3.0 * x,
                   0.0, eps_cut)

    # band cumulants of (X, G) = (sum jumps, sum g(jumps))
    m_x = mu_int(lambda x: x, eps_cut, band_split)
    m_g = mu_int(g, eps_cut, band_split)
    v_xx = mu_int(lambda x: x * x, eps_cut, band_split)
    v_gg = mu_int(lambda x: g(x) ** 2, eps_cut, band_split)
    v_xg = mu_int(lambda x: x * g(x), eps_cut, band_split)
    cov = np.array([[v_xx, v_xg], [v_xg, v_gg]]) * t
    mean = np.array([m_x, m_g]) * t
    chol = np.linalg.cholesky(cov + 1e-18 * np.eye(2))

    # individually simulated jumps above the band
    rate_big = STABLE_MU_CONST * (2.0 / 3.0) * band_split ** -1.5
    comp_big = STABLE_MU_CONST * 2.0 * band_split ** -0.5  # int_{band_split}^inf x mu(dx)

    est = np.empty(replicas)
    done = 0
    chunk = max(min(replicas, 200_000), 1)
    while done < replicas:
        n = min(chunk, replicas - done)
        counts = rng.poisson(rate_big * t, n)
        jumps = band_split * (1.0 - rng.random(int(counts.sum()))) ** (-2.0 / 3.0)
        owner = np.repeat(np.arange(n), counts)
        s_big = np.zeros(n)
        g_big = np.zeros(n)
        np.add.at(s_big, owner, jumps)
        np.add.at(g_big, owner, g(jumps))
        z = rng.normal(0.0, 1.0, (n, 2)) @ chol.T + mean
        s_band, g_band = z[:, 0], z[:, 1]
        s_total = s_big + s_band - (comp_big + m_x) * t
        log_m = -s_total + g_big + g_band + t * kappa
        est[done : done + n] = np.exp(log_m)
        done += n
    return float(est.mean()), float(est.std(ddof=1) / np.sqrt(replicas))


# ---------------------------------------------------------------------------
# the conditioned pair (P_r, V_r)
# ---------------------------------------------------------------------------


@dataclass
class PVPaths:
    P: CadlagPath
    V: CadlagPath
    retries: int


class _PVWalker:
    """One attempt at a conditioned tilted-Levy path in Lamperti time."""

    def __init__(self, x0: float):
        self.level = x0
        self.r = 0.0
        self.vol = 0.0
        self.r_times = [0.0]
        self.p_vals = [x0]
        self.v_vals = [0.0]
        self.p_jt: list[float] = []
        self.p_js: list[float] = []
        self.v_jt: list[float] = []
        self.v_js: list[float] = []
        self.alive = True
        self.done = False

    def record(self):
        self.r_times.append(self.r)
        self.p_vals.append(self.level)
        self.v_vals.append(self.vol)

    def advance(self, seg: float, drift: float, var_small: float,
                small_mark: float, T: float, rng) -> None:
        """Linear segment of Levy-time length seg with Gaussian band noise,
        cut exactly at the r-horizon if it crosses it."""
        if seg <= 0:
            return
        gauss = rng.normal(0.0, np.sqrt(var_small * seg))
        new_level = self.level + drift * seg + gauss
        if new_level <= 0:
            self.alive = False
            return
        slope = (new_level - self.level) / seg
        if abs(slope) * seg < 1e-12 * self.level:
            dr = seg / self.level
        else:
            dr = np.log(new_level / self.level) / slope
        if self.r + dr >= T:
            target = T - self.r
            if abs(slope) * seg < 1e-12 * self.level:
                s_cut = target * self.level
            else:
                s_cut = (np.exp(target * slope) - 1.0) * self.level / slope
            s_cut = min(max(s_cut, 0.0), seg)
            self.level += slope * s_cut
            self.vol += small_mark * s_cut
            self.r = T
            self.done = True
            self.record()
            return
        self.level = new_level
        self.vol += small_mark * seg
        self.r += dr
        self.record()

    def jump(self, size: float, rng) -> None:
        after = self.level - size
        if after <= 0:
            self.alive = False
            return
        mark = sample_nu(size, rng)
        self.level = after
        self.vol += mark
        self.p_jt.append(self.r)
        self.p_js.append(-size)
        self.v_jt.append(self.r)
        self.v_js.append(mark)
        self.record()


def exact_marginal_start(r0: float, rng: np.random.Generator) -> float:
    """Exact draw of the tilted hull perimeter at radius r0.

    Its Laplace transform (1 + a lam)^{-1} (1 + b lam)^{-1/2} with
    a = sinh^2(sqrt2 r0)/3 and b = tanh^2(sqrt2 r0)/3 factorizes into an
    independent Exp(mean a) plus Gamma(1/2, scale b)."""
    a = np.sinh(SQRT2 * r0) ** 2 / 3.0
    b = np.tanh(SQRT2 * r0) ** 2 / 3.0
    return float(rng.exponential(a) + rng.gamma(0.5, b))


def _mean_volume(r: float) -> float:
    """E[V_r] of the tilted hull, from the joint transform."""
    from hyperplane.continuum import joint_transform

    dmu = 1e-7
    return (1.0 - joint_transform(0.0, dmu, r)) / dmu


def simulate_PV(T: float, x0: float | None, eps_cut: float, rng: np.random.Generator,
                jump_floor: float | None = None, level_frac: float = 0.05,
                max_retries: int = 4000) -> PVPaths:
    """The tilted hull pair (P_r, V_r) on r in [0, T].

    With x0 = None (the exact-start mode) the path begins at radius
    r0 = min(1, T/2) from an exact draw of the perimeter marginal, with the
    volume seeded by its mean at r0; passing a float starts the driving path
    at that level at radius 0 instead. Either way the continuation is the
    tilted Levy process in Lamperti time, conditioned to stay positive by
    retrying the continuation of the same start until it survives (so the
    start marginal is never biased by the conditioning). Jumps above
    max(eps_cut, level_frac * level) are explicit, each carrying an
    independent nu-mark for the volume; the band below enters the path as
    compensator drift plus variance-matched Gaussian and contributes its mean
    mark rate to the volume. jump_floor caps the explicit-jump threshold, for
    mark-counting studies at large levels.
    """
    if T <= 0:
        raise DomainError("need T > 0")
    if x0 is not None and x0 <= 0:
        raise DomainError("x0 must be positive (or None for the exact start)")
    if not (0 < eps_cut <= 0.1):
        raise DomainError("eps_cut must lie in (0, 0.1]")
    if x0 is None:
        r_start = min(1.0, T / 2.0)
        level0 = max(exact_marginal_start(r_start, rng), 1e-9)
        vol0 = _mean_volume(r_start)
    else:
        r_start = 0.0
        level0 = float(x0)
        vol0 = 0.0

    mark_cache: dict[float, float] = {}

    def small_mark_rate(hi):
        if hi not in mark_cache:
            val, _ = integrate.quad(
                lambda x: (x * x / (2 * x + 1)) * tilted_jump_density(x), 0.0, hi,
                epsabs=1e-13, limit=200,
            )
            mark_cache[hi] = float(val)
        return mark_cache[hi]

    band_cache: dict[float, tuple[float, float, float]] = {}

    def band_stats(floor):
        if floor not in band_cache:
            band_cache[floor] = (
                tilted_jump_rate(floor),
                tilted_jump_moment(floor, np.inf, 1),
                tilted_jump_moment(0.0, floor, 2),
            )
        return band_cache[floor]

    def quantized_floor(level):
        # quantize the adaptive threshold so the moment caches stay small
        raw = max(eps_cut, level * level_frac)
        if jump_floor is not None:
            raw = max(eps_cut, min(raw, jump_floor))
        return float(2.0 ** np.ceil(np.log2(raw)))

    for attempt in range(max_retries):
        w = _PVWalker(level0)
        w.r = r_start
        w.r_times[0] = r_start
        w.vol = vol0
        w.v_vals[0] = vol0
        while not w.done and w.alive:
            floor = quantized_floor(w.level)
            rate, mean_big, var_small = band_stats(floor)
            drift = GROWTH_RATE + mean_big
            small_mark = small_mark_rate(floor)
            ds = max(w.level * level_frac / GROWTH_RATE, 1e-9)
            n_j = rng.poisson(rate * ds)
            if n_j == 0:
                w.advance(ds, drift, var_small, small_mark, T, rng)
                continue
            jt = np.sort(rng.random(n_j)) * ds
            js = sample_tilted_jumps(floor, n_j, rng)
            prev = 0.0
            for m in range(n_j):
                w.advance(jt[m] - prev, drift, var_small, small_mark, T, rng)
                if w.done or not w.alive:
                    break
                w.jump(js[m], rng)
                if not w.alive:
                    break
                prev = jt[m]
            if not w.done and w.alive:
                w.advance(ds - prev, drift, var_small, small_mark, T, rng)
        if w.done:
            rt = np.asarray(w.r_times)
            keep = np.concatenate([np.diff(rt) > 0, [True]])
            p_path = CadlagPath(rt[keep], np.asarray(w.p_vals)[keep],
                                _strict(np.asarray(w.p_jt)), np.asarray(w.p_js))
            v_path = CadlagPath(rt[keep], np.asarray(w.v_vals)[keep],
                                _strict(np.asarray(w.v_jt)), np.asarray(w.v_js))
            return PVPaths(P=p_path, V=v_path, retries=attempt)
    raise RejectionBudgetError(
        f"positivity conditioning failed {max_retries} times from level {level0:.3g}"
    )


def _strict(times: np.ndarray) -> np.ndarray:
    """Nudge equal consecutive jump times so they strictly increase."""
    if len(times) < 2:
        return times
    out = times.copy()
    for i in range(1, len(out)):
        if out[i] <= out[i - 1]:
            out[i] = np.nextafter(out[i - 1], np.inf)
    return out
