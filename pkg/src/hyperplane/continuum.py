"""Closed-form transform oracles for the continuum limits.

Branching mechanisms, the tilted CSBP semigroup and extinction densities,
perimeter/volume joint Laplace transforms of the critical and tilted hull
processes, the volume-mark law, and the jump-tail measure of the volume
subordinator. Everything here is a pure function; path simulation lives in
levypaths.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate
from scipy.special import erf, gamma

from hyperplane.errors import DomainError, RejectionBudgetError

SQRT2 = np.sqrt(2.0)
SQRT83 = np.sqrt(8.0 / 3.0)

# growth rate of the tilted perimeter process: E[drift] = 2 sqrt(2)
GROWTH_RATE = 2.0 * SQRT2
# limiting exponential rate of e^{-2 sqrt2 r} P_r
PERIMETER_EXP_RATE = 12.0
# limiting volume/perimeter ratio
VOLUME_PERIMETER_RATIO = 0.25


def phi(p: float, v: float) -> float:
    """Density weight phi(p, v) = e^{-2v} e^p int_0^1 e^{-3 p x^2} dx of the
    tilted hull against the critical one, by adaptive quadrature."""
    if p < 0 or v < 0:
        raise DomainError("phi needs p, v >= 0")
    val, _ = integrate.quad(lambda x: np.exp(-3.0 * p * x * x), 0.0, 1.0,
                            epsabs=1e-12, epsrel=1e-12)
    return float(np.exp(-2.0 * v + p) * val)


def phi_closed(p: float, v: float) -> float:
    """Error-function form of phi, the cross-check for the quadrature."""
    if p == 0:
        return float(np.exp(-2.0 * v))
    return float(np.exp(-2.0 * v + p) * 0.5 * np.sqrt(np.pi / (3.0 * p)) * erf(np.sqrt(3.0 * p)))


def psi_stable(u):
    """Branching mechanism of the critical hull process: sqrt(8/3) u^{3/2}."""
    u = np.asarray(u, dtype=float)
    return SQRT83 * u ** 1.5


def psi_tilted(u):
    """Tilted branching mechanism sqrt(8/3) u sqrt(u+3)."""
    u = np.asarray(u, dtype=float)
    return SQRT83 * u * np.sqrt(u + 3.0)


def psi_martingale(u):
    """Exponent of the jump-reweighted stable process:
    sqrt(8/3) (u^2 + u - 2)/sqrt(u + 2); vanishes at u = 1."""
    u = np.asarray(u, dtype=float)
    return SQRT83 * (u * u + u - 2.0) / np.sqrt(u + 2.0)


def branching_mechanisms(u: float) -> tuple[float, float, float]:
    """(stable, tilted, reweighting) mechanisms at one argument."""
    if u < 0:
        raise DomainError("u >= 0 required")
    return float(psi_stable(u)), float(psi_tilted(u)), float(psi_martingale(u))


def csbp_marginal(lam: float, t: float) -> float:
    """Laplace-exponent flow u_t(lam) of the tilted branching process:
    the solution of du/dt = -sqrt(8/3) u sqrt(u+3), u_0 = lam, in closed form
    3 / sinh^2(asinh(sqrt(3/lam)) + sqrt(2) t)."""
    if lam <= 0 or t < 0:
        raise DomainError("need lam > 0 and t >= 0")
    return float(3.0 / np.sinh(np.arcsinh(np.sqrt(3.0 / lam)) + SQRT2 * t) ** 2)


def csbp_marginal_rk4(lam: float, t: float, n_steps: int = 20000) -> float:
    """Independent RK4 integration of the defining ODE, for verification."""
    u = float(lam)
    dt = t / n_steps
    f = lambda x: -SQRT83 * x * np.sqrt(x + 3.0)
    for _ in range(n_steps):
        k1 = f(u)
        k2 = f(u + 0.5 * dt * k1)
        k3 = f(u + 0.5 * dt * k2)
        k4 = f(u + dt * k3)
        u += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def extinction_density_tilted(x: float, t: float) -> float:
    """Extinction-time density of the tilted branching process started at x:
    6 sqrt2 x cosh(sqrt2 t)/sinh^3(sqrt2 t) exp(-3x/sinh^2(sqrt2 t))."""
    if x <= 0 or t <= 0:
        raise DomainError("need x, t > 0")
    st = np.sinh(SQRT2 * t)
    if not np.isfinite(st) or st > 1e130:
        return 0.0
    return float(6.0 * SQRT2 * x * np.cosh(SQRT2 * t) / st**3 * np.exp(-3.0 * x / st**2))


def extinction_density_critical(x: float, t: float) -> float:
    """Critical analog (3x/t^3) exp(-3x/(2t^2))."""
    if x <= 0 or t <= 0:
        raise DomainError("need x, t > 0")
    return float(3.0 * x / t**3 * np.exp(-3.0 * x / (2.0 * t * t)))


def extinction_densities(x: float, t: float) -> tuple[float, float]:
    return extinction_density_tilted(x, t), extinction_density_critical(x, t)


def extinction_cdf_tilted(x: float, t: float) -> float:
    """P(extinct by t | started at x) = exp(-3x/sinh^2(sqrt2 t))."""
    st = np.sinh(SQRT2 * t)
    return float(np.exp(-3.0 * x / st**2))


def marginal_transform_X(lam: float, t: float) -> float:
    """One-dimensional Laplace transform of the time-reversed tilted process:
    (1 + (lam/3) sinh^2(sqrt2 t))^{-1} (1 + (lam/3) tanh^2(sqrt2 t))^{-1/2}."""
    if lam < 0 or t < 0:
        raise DomainError("need lam, t >= 0")
    sh2 = np.sinh(SQRT2 * t) ** 2
    th2 = np.tanh(SQRT2 * t) ** 2
    return float((1.0 + lam / 3.0 * sh2) ** -1 * (1.0 + lam / 3.0 * th2) ** -0.5)


def joint_transform(lam: float, mu: float, r: float) -> float:
    """E[exp(-lam P_r - mu V_r)] for the tilted hull perimeter/volume pair.

    mu >= 0; lam may go negative as long as both bases stay positive (the
    transform diverges at the boundary).
    """
    if mu < 0 or r < 0:
        raise DomainError("need mu >= 0 and r >= 0")
    s = np.sqrt(2.0 * mu + 4.0)
    q = (2.0 * mu + 4.0) ** 0.25
    b1 = 1.0 + (2.0 * lam - 2.0 + s) / (3.0 * s) * np.sinh(q * r) ** 2
    b2 = 1.0 + (2.0 * lam + 4.0 - 2.0 * s) / (3.0 * s) * np.tanh(q * r) ** 2
    if b1 <= 0 or b2 <= 0:
        raise DomainError(f"transform diverges at (lam={lam}, mu={mu}, r={r})")
    return float(b1**-1 * b2**-0.5)


def joint_transform_critical(lam: float, mu: float, r: float) -> float:
    """E[exp(-lam P_r - mu V_r)] for the critical hull pair, assembled from
    the P-marginal (1 + 2 lam r^2/3)^{-3/2} and the exponential-affine
    conditional volume transform."""
    if mu < 0 or r <= 0:
        raise DomainError("need mu >= 0 and r > 0")
    if mu == 0:
        base = 1.0 + 2.0 * lam * r * r / 3.0
        if base <= 0:
            raise DomainError("transform diverges")
        return float(base**-1.5)
    s = np.sqrt(2.0 * mu)
    q = (2.0 * mu) ** 0.25
    sh = np.sinh(q * r)
    inner = lam + s / 2.0 + 1.5 * s / sh**2
    if inner <= 0:
        raise DomainError("transform diverges")
    return float((1.5 * s) ** 1.5 * np.cosh(q * r) / sh**3 * inner**-1.5)


def check_mass(r: float) -> float:
    """The no-mass-escapes identity: int_0^1 E[e^{-(3x^2-1) P_r - 2 V_r}] dx,
    equal to 1 for every r. Uses the critical transform, whose phi-average
    this is."""
    val, _ = integrate.quad(
        lambda x: joint_transform_critical(3.0 * x * x - 1.0, 2.0, r),
        0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=300,
    )
    return float(val)


def limiting_transform(lam: float, mu: float) -> float:
    """r -> infinity limit of the rescaled joint transform:
    (1 + lam/12 + mu/48)^{-1}."""
    return float(1.0 / (1.0 + lam / 12.0 + mu / 48.0))


# ---------------------------------------------------------------------------
# volume-mark law
# ---------------------------------------------------------------------------


class NuDeltaLaw:
    """Law of the volume mark attached to a perimeter jump of size delta:
    density (delta^3 e^{2 delta}/(1+2 delta)) e^{-delta^2/(2x) - 2x} /
    sqrt(2 pi x^5)."""

    def __init__(self, delta: float):
        if delta <= 0:
            raise DomainError("delta > 0 required")
        self.delta = float(delta)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        d = self.delta
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = (
            d**3 * np.exp(2 * d) / (1 + 2 * d)
            * np.exp(-d * d / (2 * x[pos]) - 2 * x[pos])
            / np.sqrt(2 * np.pi * x[pos] ** 5)
        )
        return out

    def total_mass(self) -> float:
        val, _ = integrate.quad(self.density, 0, np.inf, epsabs=1e-12, limit=200)
        return float(val)

    def mean(self) -> float:
        """delta^2 / (1 + 2 delta)."""
        d = self.delta
        return d * d / (1 + 2 * d)

    def laplace(self, beta: float) -> float:
        """(1 + delta sqrt(4+2 beta)) e^{-delta sqrt(4+2 beta)}
        / ((1+2 delta) e^{-2 delta})."""
        d = self.delta
        s = np.sqrt(4.0 + 2.0 * beta)
        return float((1 + d * s) * np.exp(-d * s) / ((1 + 2 * d) * np.exp(-2 * d)))


def sample_nu(delta: float, rng: np.random.Generator, size: int | None = None,
              max_batches: int = 10000):
    """Draw volume marks from the law of NuDeltaLaw(delta).

    Base variable: xi = 1/Y with Y gamma(3/2, rate 1/2), whose law has density
    e^{-1/(2x)} / sqrt(2 pi x^5); accept with probability e^{-2 delta^2 xi}
    and return delta^2 xi. Acceptance probability is (1+2d) e^{-2d} > 0.
    """
    if delta <= 0:
        raise DomainError("delta > 0 required")
    n = 1 if size is None else int(size)
    accept_rate = (1 + 2 * delta) * np.exp(-2 * delta)
    out = np.empty(n)
    filled = 0
    for _ in range(max_batches):
        if filled >= n:
            break
        m = max(int((n - filled) / max(accept_rate, 1e-6) * 1.3), 128)
        m = min(m, 20_000_000)
        y = rng.gamma(1.5, 2.0, size=m)  # shape 3/2, scale 2 == rate 1/2
        xi = 1.0 / y
        acc = rng.random(m) < np.exp(-2.0 * delta * delta * xi)
        got = xi[acc]
        take = min(len(got), n - filled)
        out[filled : filled + take] = delta * delta * got[:take]
        filled += take
    if filled < n:
        raise RejectionBudgetError("nu_delta sampler exhausted its batch budget")
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# jump measures and the volume-jump tail
# ---------------------------------------------------------------------------

STABLE_MU_CONST = np.sqrt(3.0 / (2.0 * np.pi))


def stable_jump_density(x):
    """Levy measure density of the spectrally one-sided 3/2-stable process
    with exponent sqrt(8/3) u^{3/2}: sqrt(3/(2 pi)) x^{-5/2}."""
    x = np.asarray(x, dtype=float)
    return STABLE_MU_CONST * x ** -2.5


def tilted_jump_density(x):
    """Levy measure density of the tilted process with exponent
    sqrt(8/3) u sqrt(u+3): sqrt(3/(2 pi)) (1+2x) x^{-5/2} e^{-3x}.

    The reweighting tilts the stable measure by (1+2x) e^{-2x} and the
    exponential change of measure contributes another e^{-x}.
    """
    x = np.asarray(x, dtype=float)
    return STABLE_MU_CONST * (1.0 + 2.0 * x) * x ** -2.5 * np.exp(-3.0 * x)


SIGMA_TAIL_CONSTANT = 2 ** 0.75 * gamma(0.75) / (np.pi * np.sqrt(3.0))


def sigma_tail(eps: float) -> float:
    """Tail mass sigma([eps, inf)) of the volume-subordinator jump measure,
    the image of mu x nu under (x, y) -> x^2 y, by nested quadrature.

    Scales exactly like eps^{-3/4}; the constant is
    2^{3/4} Gamma(3/4) / (pi sqrt(3)).
    """
    if eps <= 0:
        raise DomainError("eps > 0 required")

    def inner(y):
        lo = np.sqrt(eps / y)
        val, _ = integrate.quad(lambda x: STABLE_MU_CONST * x ** -2.5, lo, np.inf,
                                epsabs=1e-11, epsrel=1e-11)
        return val

    def outer(y):
        nu_dens = np.exp(-1.0 / (2.0 * y)) / np.sqrt(2.0 * np.pi * y**5)
        return nu_dens * inner(y)

    val, _ = integrate.quad(outer, 0, np.inf, epsabs=1e-11, epsrel=1e-11, limit=400)
    return float(val)
