"""Statistical estimators and the discrete-to-continuum experiment suite."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import stats

from hyperplane.combinatorics import BoltzmannTables, LambdaParams
from hyperplane.continuum import joint_transform
from hyperplane.errors import DomainError
from hyperplane.levypaths import CadlagPath
from hyperplane.peeling import near_critical_run


@dataclass
class TestReport:
    """Outcome of one named check."""

    __test__ = False  # not a pytest collectible

    name: str
    statistic: float
    threshold: float
    passed: bool
    p_value: float | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.statistic = float(self.statistic)
        self.threshold = float(self.threshold)
        self.passed = bool(self.passed)
        if self.p_value is not None:
            self.p_value = float(self.p_value)

    def to_dict(self) -> dict:
        return asdict(self)


def write_reports(reports: list[TestReport], path) -> int:
    """Write the report array as JSON; returns the exit code (nonzero iff
    any check failed)."""
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=1, sort_keys=True)
    return 0 if all(r.passed for r in reports) else 1


@dataclass
class EmpiricalTransform:
    """Empirical Laplace transform estimates on a grid of arguments."""

    s_grid: np.ndarray
    estimates: np.ndarray
    stderrs: np.ndarray
    replicas: int

    @classmethod
    def from_samples(cls, samples: np.ndarray, s_grid) -> "EmpiricalTransform":
        samples = np.asarray(samples, dtype=float)
        s_grid = np.asarray(s_grid, dtype=float)
        vals = np.exp(-np.outer(s_grid, samples))
        est = vals.mean(axis=1)
        err = vals.std(axis=1, ddof=1) / np.sqrt(samples.size)
        return cls(s_grid, est, err, samples.size)


def ks_exponential_test(samples, rate: float, alpha: float = 1e-3,
                        name: str = "ks_exponential") -> TestReport:
    """Kolmogorov-Smirnov test of the samples against Exp(rate)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 100:
        raise DomainError("need at least 100 samples")
    if rate <= 0:
        raise DomainError("rate > 0 required")
    stat, pval = stats.kstest(samples, "expon", args=(0.0, 1.0 / rate))
    return TestReport(
        name=name,
        statistic=float(stat),
        threshold=alpha,
        passed=bool(pval > alpha),
        p_value=float(pval),
        config={"rate": rate, "n": int(samples.size)},
    )


def jump_counter(path: CadlagPath, a: float, b: float, h: float) -> int:
    """Number of jumps of the path in [a, b] with size at least h."""
    if a > b or h <= 0:
        raise DomainError("need a <= b and h > 0")
    sel = (path.jump_times >= a) & (path.jump_times <= b) & (np.abs(path.jump_sizes) >= h)
    return int(sel.sum())


@dataclass
class BridgeResult:
    """Per-size discrepancies of the near-critical rescaled transforms."""

    n_list: list[int]
    r: float
    s_grid: np.ndarray
    perimeter_discrepancy: np.ndarray  # (len(n_list),) sup over s-grid
    volume_discrepancy: np.ndarray
    perimeter_stderr: np.ndarray
    volume_stderr: np.ndarray
    report: TestReport


def bridge_experiment(n_list, r: float, replicas: int, rng,
                      s_grid=(0.25, 0.5, 1.0, 2.0)) -> BridgeResult:
    """Near-critical bridge: peel at sizes n, compare the empirical Laplace
    transforms of the rescaled hull observables against the continuum
    targets, and require the discrepancy to decrease along n_list (one
    inversion within combined error allowed)."""
    n_list = [int(n) for n in n_list]
    if any(n < 4 for n in n_list):
        raise DomainError("bridge needs n >= 4")
    s_grid = np.asarray(s_grid, dtype=float)
    per_disc = np.zeros(len(n_list))
    vol_disc = np.zeros(len(n_list))
    per_err = np.zeros(len(n_list))
    vol_err = np.zeros(len(n_list))
    for k, n in enumerate(n_list):
        run = near_critical_run(n, [r], replicas, rng)
        # rescale to the continuum normalization of the limit pair
        per = run.perimeter_rescaled[:, 0] / 1.5
        vol = run.volume_rescaled[:, 0] / 3.0
        tp = EmpiricalTransform.from_samples(per, s_grid)
        tv = EmpiricalTransform.from_samples(vol, s_grid)
        target_p = np.array([joint_transform(s, 0.0, r) for s in s_grid])
        target_v = np.array([joint_transform(0.0, s, r) for s in s_grid])
        ip = np.argmax(np.abs(tp.estimates - target_p))
        iv = np.argmax(np.abs(tv.estimates - target_v))
        per_disc[k] = abs(tp.estimates[ip] - target_p[ip])
        vol_disc[k] = abs(tv.estimates[iv] - target_v[iv])
        per_err[k] = tp.stderrs[ip]
        vol_err[k] = tv.stderrs[iv]
    # trend check with one inversion within combined stderr allowed
    def decreasing(disc, err):
        violations = 0
        for k in range(1, len(disc)):
            if disc[k] > disc[k - 1]:
                if disc[k] - disc[k - 1] > 2.0 * np.hypot(err[k], err[k - 1]):
                    return False
                violations += 1
        return violations <= 1

    ok = decreasing(per_disc, per_err)
    report = TestReport(
        name="near_critical_bridge",
        statistic=float(per_disc[-1]),
        threshold=float(per_disc[0]),
        passed=bool(ok),
        config={
            "n_list": n_list,
            "r": r,
            "replicas": replicas,
            "s_grid": s_grid.tolist(),
            "perimeter_discrepancy": per_disc.tolist(),
            "volume_discrepancy": vol_disc.tolist(),
        },
    )
    return BridgeResult(n_list, r, s_grid, per_disc, vol_disc, per_err, vol_err, report)


def quick_validation_reports() -> list[TestReport]:
    """Deterministic (no Monte Carlo) invariant checks: exact recurrences,
    series oracles, transform identities, quadratures."""
    import mpmath as mp

    from hyperplane.combinatorics import (
        count_triangulations,
        lambda_series_of_z,
        markov_constant,
        markov_constant_critical,
    )
    from hyperplane.continuum import (
        SIGMA_TAIL_CONSTANT,
        check_mass,
        csbp_marginal,
        csbp_marginal_rk4,
        psi_martingale,
        sigma_tail,
    )

    reports = []

    worst = mp.mpf(0)
    for ratio in ("1", "0.9", "0.5"):
        tables = BoltzmannTables(LambdaParams.from_ratio(ratio), p_max=70)
        for p in range(1, 65):
            worst = max(worst, tables.recurrence_residual(p))
    reports.append(TestReport("markov_recurrence", float(worst), 1e-10, float(worst) <= 1e-10))

    worst_f = 0.0
    for p in range(1, 13):
        coeffs = lambda_series_of_z(p, 12)
        for n in range(13):
            if n == 0 and p == 1:
                continue
            exact = count_triangulations(n, p)
            worst_f = max(worst_f, abs(float(coeffs[n]) / exact - 1.0))
    reports.append(TestReport("series_oracle", worst_f, 1e-9, worst_f <= 1e-9))

    params = LambdaParams.from_ratio(1)
    worst = mp.mpf(0)
    for p in range(1, 101):
        a = markov_constant(params, p)
        b = markov_constant_critical(p)
        worst = max(worst, abs(a - b) / b)
    reports.append(TestReport("critical_identity", float(worst), 1e-12, float(worst) <= 1e-12))

    worst_f = 0.0
    for lam in (0.1, 1.0, 10.0):
        for t in (0.5, 1.5, 3.0):
            worst_f = max(worst_f, abs(csbp_marginal(lam, t) - csbp_marginal_rk4(lam, t)))
    reports.append(TestReport("csbp_ode", worst_f, 1e-8, worst_f <= 1e-8))

    worst_f = max(abs(check_mass(r) - 1.0) for r in (0.1, 1.0, 5.0))
    reports.append(TestReport("mass_identity", worst_f, 1e-8, worst_f <= 1e-8))

    reports.append(TestReport("martingale_root", abs(float(psi_martingale(1.0))), 1e-14,
                              abs(float(psi_martingale(1.0))) <= 1e-14))

    worst_f = max(abs(sigma_tail(e) * e**0.75 / SIGMA_TAIL_CONSTANT - 1.0) for e in (0.01, 0.1, 1.0))
    reports.append(TestReport("sigma_tail_constant", worst_f, 1e-4, worst_f <= 1e-4))

    return reports
