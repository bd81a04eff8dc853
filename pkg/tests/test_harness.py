import json

import numpy as np
import pytest

from hyperplane.errors import DomainError
from hyperplane.harness import (
    EmpiricalTransform,
    TestReport,
    bridge_experiment,
    jump_counter,
    ks_exponential_test,
    quick_validation_reports,
    write_reports,
)
from hyperplane.levypaths import CadlagPath


class TestKs:
    def test_true_null_passes(self):
        rng = np.random.default_rng(1)
        samples = rng.exponential(1 / 12.0, 10_000)
        rep = ks_exponential_test(samples, 12.0)
        assert rep.passed
        assert rep.p_value > 1e-3

    def test_wrong_rate_fails(self):
        rng = np.random.default_rng(2)
        samples = rng.exponential(1 / 6.0, 10_000)
        rep = ks_exponential_test(samples, 12.0)
        assert not rep.passed

    def test_needs_samples(self):
        with pytest.raises(DomainError):
            ks_exponential_test(np.ones(10), 1.0)


class TestJumpCounter:
    def test_no_jumps(self):
        path = CadlagPath([0.0, 3.0], [0.0, 1.0])
        assert jump_counter(path, 0.0, 3.0, 0.5) == 0

    def test_synthetic_counts(self):
        path = CadlagPath([0.0, 1.0, 2.0, 3.0], [0, 0.5, 2.5, 2.5],
                          [1.0, 2.0], [0.5, 2.0])
        assert jump_counter(path, 0.0, 3.0, 1.0) == 1
        assert jump_counter(path, 0.0, 3.0, 0.4) == 2
        assert jump_counter(path, 1.5, 3.0, 0.4) == 1


class TestEmpiricalTransform:
    def test_unbiased_at_zero(self):
        rng = np.random.default_rng(3)
        tr = EmpiricalTransform.from_samples(rng.exponential(1.0, 1000), [0.0, 1.0])
        assert tr.estimates[0] == pytest.approx(1.0)
        assert tr.stderrs[0] == pytest.approx(0.0, abs=1e-12)

    def test_matches_exponential_transform(self):
        rng = np.random.default_rng(4)
        s = np.array([0.5, 1.0, 2.0])
        tr = EmpiricalTransform.from_samples(rng.exponential(1.0, 200_000), s)
        target = 1 / (1 + s)
        assert np.all(np.abs(tr.estimates - target) < 4 * tr.stderrs)

    def test_stderr_scales(self):
        rng = np.random.default_rng(5)
        t1 = EmpiricalTransform.from_samples(rng.exponential(1.0, 10_000), [1.0])
        t2 = EmpiricalTransform.from_samples(rng.exponential(1.0, 40_000), [1.0])
        assert t2.stderrs[0] == pytest.approx(t1.stderrs[0] / 2, rel=0.15)


class TestReports:
    def test_write_and_exit_code(self, tmp_path):
        reports = [
            TestReport("a", 0.0, 1.0, True),
            TestReport("b", 2.0, 1.0, False, p_value=0.5),
        ]
        path = tmp_path / "reports.json"
        code = write_reports(reports, path)
        assert code == 1
        data = json.loads(path.read_text())
        assert {d["name"] for d in data} == {"a", "b"}
        assert write_reports([reports[0]], path) == 0


class TestBridge:
    def test_small_bridge_runs(self):
        res = bridge_experiment([5, 8], 0.4, replicas=120, rng=11)
        assert res.perimeter_discrepancy.shape == (2,)
        assert (res.perimeter_discrepancy >= 0).all()
        assert res.report.name == "near_critical_bridge"

    def test_zero_s_is_exact(self):
        res = bridge_experiment([5], 0.4, replicas=60, rng=3, s_grid=[0.0, 1.0])
        # at s = 0 the empirical transform is exactly 1, matching the target
        assert res.report.config["perimeter_discrepancy"][0] >= 0


class TestQuickValidation:
    def test_all_quick_checks_pass(self):
        reports = quick_validation_reports()
        failed = [r.name for r in reports if not r.passed]
        assert failed == []
