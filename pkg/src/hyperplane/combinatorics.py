"""Exact and high-precision enumeration layer for type-I triangulations.

Counting of triangulations of a p-gon, the weight/parameter change between
the Boltzmann weight and its algebraic parametrization, partition functions,
Markovian constants, and the generating functions tying them together.
Everything downstream (peeling laws, samplers, map builders) consumes the
tables built here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import mpmath as mp
import numpy as np
from scipy import integrate

from hyperplane.errors import CapacityError, ConventionHoleError, DomainError

DEFAULT_DPS = 60


def lambda_critical(dps: int = DEFAULT_DPS) -> mp.mpf:
    """Critical weight 1/(12*sqrt(3)), the radius of convergence of Z_p."""
    with mp.workdps(dps):
        return 1 / (12 * mp.sqrt(3))


def double_factorial(k: int) -> int:
    """k!! with the conventions (-1)!! = 0!! = 1.

    Raises ConventionHoleError for k <= -3: those values are not defined by
    the counting formula and must come from the series oracle.
    """
    if k <= -3:
        raise ConventionHoleError(f"({k})!! is undefined; use the series oracle")
    if k in (-1, 0):
        return 1
    result = 1
    while k >= 2:
        result *= k
        k -= 2
    return result


def count_triangulations(n: int, p: int) -> int:
    """Exact number of type-I triangulations of a simple p-gon with n inner
    vertices.

    The (n, p) = (0, 1) case falls into the double-factorial convention hole;
    the series oracle assigns it the value 0 and callers wanting that value
    should use `lambda_series_of_z(1, ...)` instead.
    """
    if p < 1 or n < 0:
        raise DomainError(f"need p >= 1 and n >= 0, got (n={n}, p={p})")
    top = double_factorial(2 * p + 3 * n - 5)  # raises on the convention hole
    bottom = double_factorial(2 * p + n - 1)
    value = (
        Fraction(p * factorial(2 * p), factorial(p) ** 2)
        * Fraction(4) ** (n - 1)
        * Fraction(top, factorial(n) * bottom)
    )
    if value.denominator != 1:
        raise ConventionHoleError(f"count formula non-integral at (n={n}, p={p})")
    return value.numerator


def count_asymptotic_constant(p: int, dps: int = DEFAULT_DPS) -> mp.mpf:
    """Constant C(p) in the n^{-5/2} growth of the counting sequence:
    #T_{n,p} ~ C(p) lambda_c^{-n} n^{-5/2}."""
    with mp.workdps(dps):
        return (
            mp.mpf(3) ** (p - 2)
            * p
            * mp.factorial(2 * p)
            / (4 * mp.sqrt(2 * mp.pi) * mp.factorial(p) ** 2)
        )


def count_asymptotic_sqrt_regime(n: int, p: int, dps: int = DEFAULT_DPS) -> mp.mpf:
    """Second-order asymptotic count, valid for n, p large with p = O(sqrt(n)):
    (1/(36 pi sqrt(2))) lambda_c^{-n} n^{-5/2} 12^p sqrt(p) exp(-2p^2/(3n))."""
    with mp.workdps(dps):
        lc = lambda_critical(dps)
        return (
            lc ** (-n)
            * mp.mpf(n) ** mp.mpf("-2.5")
            * mp.mpf(12) ** p
            * mp.sqrt(p)
            * mp.exp(-2 * mp.mpf(p) ** 2 / (3 * n))
            / (36 * mp.pi * mp.sqrt(2))
        )


def h_from_lambda(lam, dps: int = DEFAULT_DPS) -> mp.mpf:
    """Invert lambda = h/(1+8h)^{3/2} on (0, 1/4].

    Bisection bracket followed by a Newton polish; the map is strictly
    increasing on the bracket so both stages are safe. Residual <= 1e-13.
    """
    with mp.workdps(dps):
        lam = mp.mpf(lam)
        lc = lambda_critical(dps)
        if not (0 < lam <= lc * (1 + mp.mpf("1e-15"))):
            raise DomainError(
                f"lambda must lie in (0, lambda_c]; got {mp.nstr(lam, 17)} "
                f"with lambda_c = {mp.nstr(lc, 17)}"
            )
        if lam >= lc:
            return mp.mpf("0.25")

        def f(h):
            return h / (1 + 8 * h) ** mp.mpf("1.5") - lam

        lo, hi = mp.mpf("1e-45"), mp.mpf("0.25")
        for _ in range(80):
            mid = (lo + hi) / 2
            if f(mid) > 0:
                hi = mid
            else:
                lo = mid
        h = (lo + hi) / 2
        for _ in range(60):
            denom = (1 - 4 * h) / (1 + 8 * h) ** mp.mpf("2.5")
            if denom == 0:
                break
            step = f(h) / denom
            h_new = h - step
            if not (0 < h_new <= mp.mpf("0.25")):
                break
            h = h_new
            if abs(step) < mp.mpf(10) ** (-(dps - 5)):
                break
        return h


@dataclass(frozen=True)
class LambdaParams:
    """The coupled weight pair (lambda, h) of one triangulation ensemble."""

    lam: mp.mpf
    h: mp.mpf
    is_critical: bool
    dps: int = DEFAULT_DPS

    @classmethod
    def from_lambda(cls, lam, dps: int = DEFAULT_DPS) -> "LambdaParams":
        with mp.workdps(dps):
            lam = mp.mpf(lam)
            h = h_from_lambda(lam, dps)
            crit = abs(h - mp.mpf("0.25")) <= mp.mpf("1e-12")
            return cls(lam=lam, h=h, is_critical=crit, dps=dps)

    @classmethod
    def from_ratio(cls, ratio, dps: int = DEFAULT_DPS) -> "LambdaParams":
        """Build from lambda/lambda_c; avoids decimal ambiguity of lambda_c."""
        with mp.workdps(dps):
            return cls.from_lambda(mp.mpf(ratio) * lambda_critical(dps), dps)

    @classmethod
    def near_critical(cls, n: int, dps: int = DEFAULT_DPS) -> "LambdaParams":
        """The near-critical weight lambda_n = lambda_c (1 - 2/(3 n^4)),
        with the o(1/n^4) term set to zero."""
        if n < 4:
            raise DomainError("near-critical parameter needs n >= 4")
        with mp.workdps(dps):
            ratio = 1 - mp.mpf(2) / (3 * mp.mpf(n) ** 4)
            return cls.from_ratio(ratio, dps)

    def residual(self) -> mp.mpf:
        """Defining relation residual |lambda - h/(1+8h)^{3/2}| / lambda."""
        with mp.workdps(self.dps):
            return abs(self.lam - self.h / (1 + 8 * self.h) ** mp.mpf("1.5")) / self.lam


def partition_function(params: LambdaParams, p: int) -> mp.mpf:
    """Boltzmann partition function Z_p of the p-gon.

    p = 1 has its own closed form; p >= 2 uses the product formula with the
    (-1)!! = 1 convention covering p = 2.
    """
    if p < 1:
        raise DomainError("p >= 1 required")
    h = params.h
    with mp.workdps(params.dps):
        if p == 1:
            return mp.mpf(1) / 2 - (1 + 2 * h) / (2 * mp.sqrt(1 + 8 * h))
        df = mp.mpf(double_factorial(2 * p - 5))
        return (
            (2 + 16 * h) ** p
            * df
            / mp.factorial(p)
            * ((1 - 4 * h) * p + 6 * h)
            / (4 * (1 + 8 * h) ** mp.mpf("1.5"))
        )


def markov_constant(params: LambdaParams, p: int) -> mp.mpf:
    """Markovian constant C_p = (1/lambda) (8 + 1/h)^{p-1} sum_q binom(2q,q) h^q."""
    if p < 1:
        raise DomainError("p >= 1 required")
    h = params.h
    with mp.workdps(params.dps):
        s = mp.mpf(0)
        term = mp.mpf(1)
        for q in range(p):
            if q > 0:
                term *= h * 2 * (2 * q - 1) / q  # binom(2q,q) h^q from predecessor
            s += term
        return (8 + 1 / h) ** (p - 1) * s / params.lam


def markov_constant_critical(p: int, dps: int = DEFAULT_DPS) -> mp.mpf:
    """Closed form at the critical point: 2 sqrt(3) 3^p p (2p)! / (p!)^2."""
    with mp.workdps(dps):
        return 2 * mp.sqrt(3) * mp.mpf(3) ** p * p * mp.factorial(2 * p) / mp.factorial(p) ** 2


# ---------------------------------------------------------------------------
# Power series helpers (dense lists of mpf coefficients). These exist so the
# generating-function coefficients can be extracted by generic algebra rather
# than by the same closed forms they are meant to check.
# ---------------------------------------------------------------------------


def _series_mul(a, b, n):
    out = [mp.mpf(0)] * (n + 1)
    for i, ai in enumerate(a[: n + 1]):
        if ai == 0:
            continue
        for j, bj in enumerate(b[: n + 1 - i]):
            out[i + j] += ai * bj
    return out


def _series_recip(a, n):
    if a[0] == 0:
        raise DomainError("series has no reciprocal: zero constant term")
    out = [mp.mpf(0)] * (n + 1)
    out[0] = 1 / a[0]
    for k in range(1, n + 1):
        acc = mp.mpf(0)
        for i in range(1, k + 1):
            if i < len(a):
                acc += a[i] * out[k - i]
        out[k] = -acc / a[0]
    return out


def _series_sqrt(a, n):
    """Square root with a[0] > 0, by the triangular recurrence b*b = a."""
    if a[0] <= 0:
        raise DomainError("series sqrt needs positive constant term")
    out = [mp.mpf(0)] * (n + 1)
    out[0] = mp.sqrt(a[0])
    for k in range(1, n + 1):
        acc = a[k] if k < len(a) else mp.mpf(0)
        for i in range(1, k):
            acc -= out[i] * out[k - i]
        out[k] = acc / (2 * out[0])
    return out


def _series_compose(a, b, n):
    """a(b(x)) truncated at order n; requires b[0] = 0."""
    if b[0] != 0:
        raise DomainError("composition needs zero constant term")
    out = [mp.mpf(0)] * (n + 1)
    out[0] = a[0]
    power = [mp.mpf(0)] * (n + 1)
    power[0] = mp.mpf(1)
    for k in range(1, min(len(a), n + 1)):
        power = _series_mul(power, b, n)
        if a[k] == 0:
            continue
        for i in range(n + 1):
            out[i] += a[k] * power[i]
    return out


def _series_revert(a, n):
    """Compositional inverse of a with a[0] = 0, a[1] != 0."""
    if a[0] != 0 or a[1] == 0:
        raise DomainError("reversion needs a[0]=0 and a[1]!=0")
    inv = [mp.mpf(0), 1 / a[1]]
    for k in range(2, n + 1):
        comp = _series_compose(a[: k + 1], inv + [mp.mpf(0)], k)
        inv.append(-comp[k] / a[1])
    return inv


def _g_closed_series(h, n_order: int):
    """x-coefficients of the closed-form disk generating function at fixed h,
    computed by generic series algebra (sqrt, products)."""
    with mp.extradps(10):
        h = mp.mpf(h)
        lam = h / (1 + 8 * h) ** mp.mpf("1.5")
        u = 4 * (1 + 8 * h)
        v = (1 + 8 * h) / h
        root = _series_sqrt([mp.mpf(1), -u] + [mp.mpf(0)] * n_order, n_order)
        poly = [mp.mpf(1), -v] + [mp.mpf(0)] * n_order
        prod = _series_mul(poly, root, n_order)
        out = []
        for p in range(n_order + 1):
            extra = mp.mpf(0)
            if p == 0:
                extra = -1
            elif p == 1:
                extra = 1 / lam
            out.append(lam / 2 * (prod[p] + extra))
        return out, lam, u, v, root


def g_series_coefficients(params: LambdaParams, n_order: int) -> list:
    """Coefficients [x^p] of the closed-form G at this weight, p = 0..n_order.

    Independent oracle for partition_function: uses only series algebra on
    the algebraic closed form.
    """
    with mp.workdps(params.dps):
        out, _, _, _, _ = _g_closed_series(params.h, n_order)
        return out


def f_series_coefficients(params: LambdaParams, n_order: int) -> list:
    """Coefficients [x^p] of the closed-form F, p = 0..n_order.

    Independent oracle for markov_constant.
    """
    with mp.workdps(params.dps):
        _, lam, u, v, root = _g_closed_series(params.h, n_order)
        geom = _series_recip([mp.mpf(1), -v] + [mp.mpf(0)] * n_order, n_order)
        invroot = _series_recip(root, n_order)
        prod = _series_mul(geom, invroot, n_order)
        c1 = 1 / lam
        out = [mp.mpf(0)] * (n_order + 1)
        for p in range(1, n_order + 1):
            out[p] = c1 * prod[p - 1]
        return out


def generating_functions(params: LambdaParams, x) -> tuple:
    """Closed-form values (G(x), F(x)) of the disk and cylinder generating
    functions. x must stay strictly below the branch point 1/(4(1+8h))."""
    h = params.h
    with mp.workdps(params.dps):
        x = mp.mpf(x)
        branch = 1 / (4 * (1 + 8 * h))
        if abs(x) >= branch:
            raise DomainError(
                f"|x| = {mp.nstr(abs(x), 8)} is at or beyond the branch point "
                f"{mp.nstr(branch, 8)}"
            )
        lam = params.lam
        root = mp.sqrt(1 - 4 * (1 + 8 * h) * x)
        g = lam / 2 * ((1 - (1 + 8 * h) / h * x) * root - 1 + x / lam)
        f = (1 / lam) * x / ((1 - (1 + 8 * h) / h * x) * root)
        return g, f


_H_SERIES_CACHE: dict = {}


def _h_series(work: int, dps: int) -> list:
    """Series of the inverse weight map h(lambda), cached per (order, dps)."""
    key = (work, dps)
    cached = _H_SERIES_CACHE.get(key)
    if cached is not None:
        return cached
    with mp.workdps(dps):
        lam_of_h = [mp.mpf(0)] * (work + 1)
        for k in range(1, work + 1):
            lam_of_h[k] = mp.binomial(mp.mpf("-1.5"), k - 1) * mp.mpf(8) ** (k - 1)
        h_of_lam = _series_revert(lam_of_h, work)
    _H_SERIES_CACHE[key] = h_of_lam
    return h_of_lam


def lambda_series_of_z(p: int, n_order: int, dps: int = DEFAULT_DPS) -> list:
    """Coefficients [lambda^n] Z_p for n = 0..n_order, from the closed form.

    This is the series oracle for count_triangulations: expand the weight map
    lambda(h) as a series, revert it, and compose with the h-series of the
    closed-form Z_p. Only series algebra is used.
    """
    if p < 1:
        raise DomainError("p >= 1 required")
    work = n_order + p + 6
    with mp.workdps(dps):
        h_of_lam = _h_series(work, dps)

        # Z_p as an h-series via generic algebra on the closed form
        one_plus_8h = [mp.mpf(1), mp.mpf(8)] + [mp.mpf(0)] * work
        root = _series_sqrt(one_plus_8h, work)  # (1+8h)^{1/2}
        inv_root3 = _series_recip(_series_mul(one_plus_8h, root, work), work)
        if p == 1:
            # 1/2 - (1+2h)/(2 sqrt(1+8h))
            invroot = _series_recip(root, work)
            num = _series_mul([mp.mpf(1), mp.mpf(2)], invroot, work)
            zh = [mp.mpf(0.5) - num[0] / 2] + [-c / 2 for c in num[1:]]
        else:
            df = mp.mpf(double_factorial(2 * p - 5))
            base = [mp.mpf(2), mp.mpf(16)] + [mp.mpf(0)] * work
            powp = [mp.mpf(1)] + [mp.mpf(0)] * work
            for _ in range(p):
                powp = _series_mul(powp, base, work)
            lin = [mp.mpf(0)] * (work + 1)
            lin[0] = mp.mpf(p)  # (1-4h)p + 6h = p + (6-4p)h
            lin[1] = mp.mpf(6 - 4 * p)
            zh = _series_mul(_series_mul(powp, lin, work), inv_root3, work)
            zh = [c * df / mp.factorial(p) / 4 for c in zh]
        z_of_lam = _series_compose(zh, h_of_lam, work)
        return z_of_lam[: n_order + 1]


def lemcombi2_limit(p, p_n: int, h_n) -> tuple:
    """Finite binomial-h sum against its integral limit.

    Returns (finite_sum, limit) with
      finite_sum = p_n^{-1/2} sum_{q<p_n} binom(2q,q) h_n^q,
      limit = (2/sqrt(pi)) int_0^1 exp(-3 p x^2) dx  (adaptive quadrature).
    """
    if p_n < 1:
        raise DomainError("p_n >= 1 required")
    with mp.workdps(DEFAULT_DPS):
        h_n = mp.mpf(h_n)
        if not (0 < h_n <= mp.mpf("0.25")):
            raise DomainError("h_n must lie in (0, 1/4]")
        s = mp.mpf(0)
        term = mp.mpf(1)
        for q in range(p_n):
            if q > 0:
                term *= h_n * 2 * (2 * q - 1) / q
            s += term
        finite_sum = float(s / mp.sqrt(p_n))
    p = float(p)
    val, _ = integrate.quad(lambda x: np.exp(-3 * p * x * x), 0.0, 1.0, epsabs=1e-12)
    limit = 2.0 / np.sqrt(np.pi) * val
    return finite_sum, limit


class BoltzmannTables:
    """Precomputed Z_p and C_p arrays for one weight, plus float64 log tables
    used by the samplers.

    Immutable by convention after construction; `extended` returns a larger
    copy instead of mutating. Z is indexed 1..p_max, C is indexed 1..p_max+1.
    """

    def __init__(self, params: LambdaParams, p_max: int = 256):
        if p_max < 1:
            raise DomainError("p_max >= 1 required")
        self.params = params
        self.p_max = p_max
        with mp.workdps(params.dps):
            h = params.h
            lam = params.lam
            z = [mp.mpf(0)] * (p_max + 1)
            c = [mp.mpf(0)] * (p_max + 2)
            z[1] = partition_function(params, 1)
            # running product pieces of the p >= 2 closed form
            base = 2 + 16 * h
            powp = base  # base^p, starts at p=1
            df = mp.mpf(1)  # (2p-5)!! with (-1)!! = 1
            denom_fact = mp.mpf(1)  # p!
            tail_const = 4 * (1 + 8 * h) ** mp.mpf("1.5")
            for p in range(2, p_max + 1):
                powp *= base
                if p > 2:
                    df *= 2 * p - 5
                denom_fact *= p
                z[p] = powp * df / denom_fact * ((1 - 4 * h) * p + 6 * h) / tail_const
            # C_p via the running binomial sum
            s = mp.mpf(0)
            term = mp.mpf(1)
            powc = mp.mpf(1)  # (8+1/h)^{p-1}
            for p in range(1, p_max + 2):
                if p > 1:
                    term *= h * 2 * (2 * (p - 1) - 1) / (p - 1)
                    powc *= 8 + 1 / h
                s += term
                c[p] = powc * s / lam
            self._z = z
            self._c = c
            self.log_z = np.full(p_max + 1, -np.inf)
            self.log_c = np.full(p_max + 2, -np.inf)
            for p in range(1, p_max + 1):
                self.log_z[p] = float(mp.log(z[p]))
            for p in range(1, p_max + 2):
                self.log_c[p] = float(mp.log(c[p]))
            self.log_lam = float(mp.log(lam))

    def z(self, p: int) -> mp.mpf:
        if not 1 <= p <= self.p_max:
            raise CapacityError(f"Z_{p} outside table range 1..{self.p_max}")
        return self._z[p]

    def c(self, p: int) -> mp.mpf:
        if not 1 <= p <= self.p_max + 1:
            raise CapacityError(f"C_{p} outside table range 1..{self.p_max + 1}")
        return self._c[p]

    def extended(self, p_max: int) -> "BoltzmannTables":
        return BoltzmannTables(self.params, max(p_max, self.p_max))

    def recurrence_residual(self, p: int) -> mp.mpf:
        """Relative residual of C_p = lambda C_{p+1} + 2 sum C_{p-i} Z_{i+1}."""
        with mp.workdps(self.params.dps):
            rhs = self.params.lam * self.c(p + 1)
            for i in range(p):
                rhs += 2 * self.c(p - i) * self.z(i + 1)
            return abs(self.c(p) - rhs) / self.c(p)

    def filler_residual(self, p: int) -> mp.mpf:
        """Relative residual of the disk analog
        Z_p = lambda Z_{p+1} + sum Z_{i+1} Z_{p-i} (+1 when p = 2)."""
        with mp.workdps(self.params.dps):
            rhs = self.params.lam * self.z(p + 1)
            for i in range(p):
                rhs += self.z(i + 1) * self.z(p - i)
            if p == 2:
                rhs += 1
            return abs(self.z(p) - rhs) / self.z(p)

    # -- persistence ---------------------------------------------------------

    def to_json(self) -> str:
        dps = self.params.dps
        with mp.workdps(dps):
            payload = {
                "lambda": mp.nstr(self.params.lam, dps, strip_zeros=False),
                "h": mp.nstr(self.params.h, dps, strip_zeros=False),
                "precision_digits": dps,
                "p_max": self.p_max,
                "Z": [mp.nstr(self._z[p], dps, strip_zeros=False) for p in range(1, self.p_max + 1)],
                "C": [mp.nstr(self._c[p], dps, strip_zeros=False) for p in range(1, self.p_max + 2)],
            }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "BoltzmannTables":
        payload = json.loads(text)
        dps = int(payload["precision_digits"])
        with mp.workdps(dps):
            lam = mp.mpf(payload["lambda"])
            params = LambdaParams.from_lambda(lam, dps)
            tables = cls(params, int(payload["p_max"]))
            # verify the dump is consistent with a fresh build
            for p in range(1, tables.p_max + 1):
                stored = mp.mpf(payload["Z"][p - 1])
                if abs(stored - tables._z[p]) > abs(tables._z[p]) * mp.mpf("1e-40"):
                    raise DomainError(f"stored Z_{p} inconsistent with parameters")
        return tables
