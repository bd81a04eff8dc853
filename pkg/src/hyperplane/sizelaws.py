"""Inner-vertex-count laws of Boltzmann triangulations of a p-gon.

A filled p-gon has n inner vertices with probability #T_{n,p} lambda^n / Z_p.
The bulk of each law is tabulated from float64 log-weights; the far tail,
where the count sequence has already entered its n^{-5/2} regime, is sampled
from the asymptotic continuation so that no truncation bias is introduced.
Pockets with large perimeter use the two-parameter asymptotic law directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy.special import gammaln
from scipy.stats import geninvgauss

from hyperplane.combinatorics import BoltzmannTables, LambdaParams, count_asymptotic_constant
from hyperplane.errors import DomainError

# Perimeters above this use the asymptotic two-parameter sampler outright.
TABLE_P_LIMIT = 64
# Hard cap on table length; beyond it the tail continuation takes over.
TABLE_N_CAP = 1 << 21


def _log_double_factorial(k: np.ndarray) -> np.ndarray:
    """log k!! for integer arrays, k >= -1, with (-1)!! = 0!! = 1."""
    k = np.asarray(k, dtype=np.int64)
    out = np.zeros(k.shape, dtype=np.float64)
    even = (k % 2 == 0) & (k > 0)
    odd = (k % 2 != 0) & (k > 0)
    m = k[even] // 2
    out[even] = m * np.log(2.0) + gammaln(m + 1.0)
    m = (k[odd] + 1) // 2
    out[odd] = gammaln(2 * m + 1.0) - gammaln(m + 1.0) - m * np.log(2.0)
    return out


def log_count_triangulations(n: np.ndarray, p: int) -> np.ndarray:
    """log #T_{n,p} as float64, vectorized over n. The (0,1) convention hole
    is returned as -inf (its series-oracle value is zero)."""
    n = np.asarray(n, dtype=np.int64)
    out = (
        np.log(float(p))
        + gammaln(2.0 * p + 1)
        - 2 * gammaln(p + 1.0)
        + (n - 1) * np.log(4.0)
        + _log_double_factorial(2 * p + 3 * n - 5)
        - gammaln(n + 1.0)
        - _log_double_factorial(2 * p + n - 1)
    )
    if p == 1:
        out = np.where(n == 0, -np.inf, out)
    return out


def tail_cutoff(params: LambdaParams, p: int, tail_rel: float = 1e-9) -> int:
    """Smallest N with the asymptotic tail bound
    sum_{n>N} C(p) (lambda/lambda_c)^n n^{-5/2} < tail_rel * Z_p."""
    with mp.workdps(params.dps):
        from hyperplane.combinatorics import lambda_critical, partition_function

        cp = count_asymptotic_constant(p, params.dps)
        zp = partition_function(params, p)
        rho = float(mp.log(lambda_critical(params.dps) / params.lam))
        budget = float(tail_rel * zp / cp)
    # solve (approximately) integral_N^inf x^{-5/2} e^{-rho x} dx < budget
    n = 64
    while n < (1 << 60):
        tail = (2.0 / 3.0) * n ** -1.5 * np.exp(-rho * n)
        if tail < budget:
            return n
        n *= 2
    return n


@dataclass
class SizeDistribution:
    """Truncated body of the inner-vertex-count law of a Boltzmann p-gon.

    weights[n] = #T_{n,p} lambda^n / Z_p for n = 0..n_cut, normalized so that
    the body sums to exactly 1 (tail events are folded back into the body,
    i.e. sampling is conditioned on n <= n_cut). tail_mass records the mass
    that was folded.
    """

    p: int
    weights: np.ndarray
    tail_mass: float
    lam_over_crit: float

    @property
    def n_cut(self) -> int:
        return len(self.weights) - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.weights)), self.weights))

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.weights)


def build_size_distribution(
    params: LambdaParams,
    p: int,
    tail_rel: float = 1e-9,
    n_cap: int | None = None,
) -> SizeDistribution:
    if p < 1:
        raise DomainError("p >= 1 required")
    n_cut = tail_cutoff(params, p, tail_rel)
    if n_cap is not None:
        n_cut = min(n_cut, n_cap)
    n_cut = min(n_cut, TABLE_N_CAP)
    ns = np.arange(0, n_cut + 1)
    logw = log_count_triangulations(ns, p) + ns * float(mp.log(params.lam))
    logw -= logw[np.isfinite(logw)].max()
    w = np.exp(logw)
    # folded tail mass, from the asymptotic bound at the cut
    with mp.workdps(params.dps):
        from hyperplane.combinatorics import partition_function

        zp = partition_function(params, p)
        cp = float(count_asymptotic_constant(p, params.dps) / zp)
    rho = max(-np.log(float(params.lam * 12 * np.sqrt(3))), 0.0)
    tail = cp * (2.0 / 3.0) * (n_cut + 1) ** -1.5 * np.exp(-rho * (n_cut + 1))
    return SizeDistribution(
        p=p,
        weights=w / w.sum(),
        tail_mass=float(tail),
        lam_over_crit=float(params.lam * 12 * np.sqrt(3)),
    )


def sample_swallowed_size(dist: SizeDistribution, rng: np.random.Generator, size=None):
    """Draw inner-vertex counts from the truncated body.

    Tail events (mass <= dist.tail_mass) are resampled from the body, which
    the normalized weights implement directly.
    """
    cum = dist.cumulative()
    u = rng.random(size)
    return np.searchsorted(cum, u, side="right").clip(0, dist.n_cut)


class PocketSizeSampler:
    """Vectorized pocket-size draws for the peeling engine.

    For perimeters up to TABLE_P_LIMIT a tabulated body is used and the far
    tail (past the table cap) is drawn from the n^{-5/2} e^{-rho n}
    continuation. Larger perimeters use the saddle-regime law
    n^{-5/2} exp(-2p^2/(3n) - rho n), a generalized inverse Gaussian.
    """

    def __init__(self, tables: BoltzmannTables, tail_rel: float = 1e-9,
                 table_cap: int = 1 << 17):
        self.params = tables.params
        self.tail_rel = tail_rel
        self.table_cap = table_cap
        self.rho = max(float(-mp.log(self.params.lam * 12 * mp.sqrt(3))), 0.0)
        self._bodies: dict[int, tuple[np.ndarray, float]] = {}
        self._windows: dict[int, np.ndarray | None] = {}

    def _body(self, p: int) -> tuple[np.ndarray, float]:
        """(cumulative weights incl. tail mass past the cut) for small p."""
        cached = self._bodies.get(p)
        if cached is not None:
            return cached
        n_cut = min(tail_cutoff(self.params, p, self.tail_rel), self.table_cap)
        ns = np.arange(0, n_cut + 1)
        logw = log_count_triangulations(ns, p) + ns * float(mp.log(self.params.lam))
        shift = logw[np.isfinite(logw)].max()
        w = np.exp(logw - shift)
        tail = self._tail_mass(p, n_cut, shift)
        cum = np.cumsum(w)
        total = cum[-1] + tail
        cum /= total
        tailfrac = tail / total
        self._bodies[p] = (cum, tailfrac)
        return cum, tailfrac

    def _tail_mass(self, p: int, n_cut: int, shift: float) -> float:
        """Mass past the cut from the continuation
        w(n) ~= w(n_cut) (n/n_cut)^{-5/2} e^{-rho (n - n_cut)}."""
        log_at_cut = float(
            log_count_triangulations(np.array([n_cut]), p)[0]
            + n_cut * float(mp.log(self.params.lam))
            - shift
        )
        if self.rho > 0:
            ns = n_cut * np.exp(np.linspace(0.0, np.log(1e6), 4000))
            vals = np.exp(log_at_cut) * (ns / n_cut) ** -2.5 * np.exp(-self.rho * (ns - n_cut))
            return float(np.trapezoid(vals, ns))
        return float(np.exp(log_at_cut) * n_cut * (2.0 / 3.0))

    def sample(self, perims: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sizes for a batch of pockets with the given perimeters."""
        perims = np.asarray(perims, dtype=np.int64)
        out = np.zeros(perims.shape, dtype=np.int64)
        for p in np.unique(perims):
            sel = perims == p
            k = int(sel.sum())
            if p <= TABLE_P_LIMIT:
                out[sel] = self._sample_small(int(p), k, rng)
            else:
                out[sel] = self._sample_large(int(p), k, rng)
        return out

    def _sample_small(self, p: int, k: int, rng: np.random.Generator) -> np.ndarray:
        cum, tailfrac = self._body(p)
        u = rng.random(k)
        res = np.searchsorted(cum, u, side="right")
        n_cut = len(cum) - 1
        in_tail = res > n_cut
        if in_tail.any():
            res[in_tail] = self._tail_continuation(n_cut, int(in_tail.sum()), rng)
        return res

    def _tail_continuation(self, n_cut: int, k: int, rng: np.random.Generator) -> np.ndarray:
        """Draw from n^{-5/2} e^{-rho n} conditioned on n > n_cut: power-law
        inverse CDF proposal with geometric thinning."""
        out = np.empty(k, dtype=np.int64)
        filled = 0
        while filled < k:
            m = max(2 * (k - filled), 64)
            prop = n_cut * (1 - rng.random(m)) ** (-2.0 / 3.0)
            if self.rho > 0:
                acc = rng.random(m) < np.exp(-self.rho * (prop - n_cut))
                prop = prop[acc]
            take = min(len(prop), k - filled)
            out[filled : filled + take] = np.round(prop[:take]).astype(np.int64)
            filled += take
        return out

    def _sample_large(self, p: int, k: int, rng: np.random.Generator) -> np.ndarray:
        """Large-perimeter pockets.

        With enough geometric damping the law is light-tailed and an exact
        windowed table is affordable; otherwise fall back on the saddle-regime
        law n^{-5/2} exp(-2p^2/(3n) - rho n), a generalized inverse Gaussian.
        """
        chi = 4.0 * p * p / 3.0
        if self.rho * chi / 2.0 > 0.3:
            cum = self._exact_window(p)
            if cum is not None:
                u = rng.random(k)
                return np.searchsorted(cum, u, side="right").astype(np.int64)
        if self.rho <= 0:
            # inverse gamma with shape 3/2, scale chi/2
            g = rng.gamma(1.5, 1.0, size=k)
            vals = (chi / 2.0) / g
        else:
            b = np.sqrt(chi * 2 * self.rho)
            y = geninvgauss.rvs(-1.5, b, size=k, random_state=rng)
            vals = np.sqrt(chi / (2 * self.rho)) * y
        return np.maximum(np.round(vals).astype(np.int64), 0)

    def _exact_window(self, p: int) -> np.ndarray | None:
        """Cumulative exact weights on a window covering all but ~e^-45 of
        the mass; None when the window would be too large to tabulate."""
        if p in self._windows:
            return self._windows[p]
        log_lam = float(mp.log(self.params.lam))
        n_hi = 1 << 10
        cum = None
        while n_hi <= (1 << 19):
            ns = np.arange(0, n_hi + 1)
            logw = log_count_triangulations(ns, p) + ns * log_lam
            peak = logw[np.isfinite(logw)].max()
            if logw[-1] < peak - 45.0:
                w = np.exp(logw - peak)
                cum = np.cumsum(w)
                cum /= cum[-1]
                break
            n_hi *= 2
        self._windows[p] = cum
        return cum

    def mean_size(self, p: int) -> float:
        """Exact-to-table mean pocket size, for test oracles (small p only)."""
        cum, tailfrac = self._body(p)
        w = np.diff(np.concatenate([[0.0], cum]))
        return float(np.dot(np.arange(len(w)), w))
