import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from hyperplane.combinatorics import BoltzmannTables, LambdaParams
from hyperplane.errors import CapacityError, DomainError
from hyperplane.peeling import (
    EventTables,
    HullTrace,
    PeelEngine,
    near_critical_run,
    peel_to_radius,
    step_distribution,
    step_distribution_vector,
)
from hyperplane.rngstreams import RunStreams


@pytest.fixture(scope="module")
def crit_tables():
    return BoltzmannTables(LambdaParams.from_ratio(1), p_max=600)


@pytest.fixture(scope="module")
def sub_tables():
    return BoltzmannTables(LambdaParams.from_ratio("0.5"), p_max=128)


class TestStepDistribution:
    def test_critical_p1_closed_form(self, crit_tables):
        p_new, swallow = step_distribution(crit_tables, 1)
        assert abs(p_new - mp.sqrt(3) / 2) < mp.mpf("1e-40")
        assert len(swallow) == 1
        assert abs(swallow[0] - (2 - mp.sqrt(3)) / 4) < mp.mpf("1e-40")
        assert abs(p_new + 2 * swallow[0] - 1) < mp.mpf("1e-40")

    def test_sums_to_one_all_p(self, crit_tables, sub_tables):
        for tables in (crit_tables, sub_tables):
            for p in (1, 2, 3, 17, 100, 127):
                p_new, swallow = step_distribution(tables, p)
                total = p_new + 2 * sum(swallow)
                assert abs(total - 1) < mp.mpf("1e-12")

    def test_float_vector_sums(self, crit_tables):
        for p in (1, 5, 64, 512):
            vec = step_distribution_vector(crit_tables, p)
            assert len(vec) == 2 * p + 1
            assert (vec >= 0).all()
            assert abs(vec.sum() - 1.0) < 1e-12

    def test_subcritical_new_vertex_more_likely(self, crit_tables, sub_tables):
        # the outward drift is what makes subcritical growth exponential:
        # P(new vertex) = lambda C_{p+1}/C_p is larger below criticality
        crit_new, _ = step_distribution(crit_tables, 10)
        sub_new, _ = step_distribution(sub_tables, 10)
        assert sub_new > crit_new
        # and swallowing a fixed large region is suppressed
        _, crit_sw = step_distribution(crit_tables, 10)
        _, sub_sw = step_distribution(sub_tables, 10)
        assert sub_sw[5] < crit_sw[5]

    def test_capacity_error(self):
        tables = BoltzmannTables(LambdaParams.from_ratio(1), p_max=8)
        with pytest.raises(CapacityError):
            step_distribution(tables, 9)

    def test_event_tables_sum_error(self, crit_tables):
        ev = EventTables(crit_tables, built_pmax=513)
        for p in (1, 2, 7, 100, 512):
            assert ev.sum_error(p) < 1e-12


class TestChiSquareOneStep:
    def test_one_step_frequencies_p5(self, crit_tables):
        # empirical one-step law at p = 5 against the exact vector
        p = 5
        vec = step_distribution_vector(crit_tables, p)
        rng = np.random.default_rng(42)
        ev = EventTables(crit_tables, built_pmax=16)
        seg = ev.cum_flat[ev.offsets[p] : ev.offsets[p] + p + 1]
        n = 100_000
        u1 = rng.random(n)
        k = np.searchsorted(seg, u1, side="right")
        u2 = rng.random(n)
        right = u2 < 0.5
        cat = np.where(k == 0, 0, np.where(right, p + k, k))
        counts = np.bincount(cat, minlength=2 * p + 1)
        chi2, pval = stats.chisquare(counts, f_exp=vec * n)
        assert pval > 1e-3


class TestPeelToRadius:
    def test_empty_trace(self, crit_tables):
        trace = peel_to_radius(crit_tables, 0, rng=1)
        assert len(trace) == 0

    def test_trace_invariants(self, crit_tables):
        trace = peel_to_radius(crit_tables, 15, rng=7)
        assert len(trace) == 15
        assert (trace.boundary_edges >= 1).all()
        assert (np.diff(trace.vertices) >= 0).all()
        assert (np.diff(trace.peel_steps) > 0).all()
        assert trace.radii[0] == 1 and trace.radii[-1] == 15

    def test_deterministic(self, crit_tables):
        a = peel_to_radius(crit_tables, 12, rng=123)
        b = peel_to_radius(crit_tables, 12, rng=123)
        assert (a.boundary_edges == b.boundary_edges).all()
        assert (a.vertices == b.vertices).all()
        assert (a.peel_steps == b.peel_steps).all()

    def test_replicas_differ(self, crit_tables):
        a = peel_to_radius(crit_tables, 10, rng=123, replica=0)
        b = peel_to_radius(crit_tables, 10, rng=123, replica=1)
        assert not (a.vertices == b.vertices).all()

    def test_csv_round_trip(self, crit_tables, tmp_path):
        trace = peel_to_radius(crit_tables, 8, rng=5)
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        back = HullTrace.read_csv(path)
        assert (back.boundary_edges == trace.boundary_edges).all()
        trace.write_sidecar(tmp_path / "trace.json")
        assert (tmp_path / "trace.json").exists()

    def test_csv_byte_identical(self, crit_tables, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        peel_to_radius(crit_tables, 10, rng=99).to_csv(p1)
        peel_to_radius(crit_tables, 10, rng=99).to_csv(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_subcritical_exponential_growth(self, sub_tables):
        # log-perimeter grows linearly in r below criticality; at this weight
        # each layer multiplies the perimeter roughly sixfold, so a handful of
        # layers is already decisive (and all that fits in memory)
        engine = PeelEngine(sub_tables)
        slopes = []
        for k in range(10):
            trace = engine.run(4, RunStreams(2024, k))
            logs = np.log(trace.boundary_edges.astype(float))
            r = trace.radii.astype(float)
            slope, _ = np.polyfit(r, logs, 1)
            slopes.append(slope)
            corr = np.corrcoef(r, logs)[0, 1]
            assert corr > 0.95
        assert np.mean(slopes) > 1.0

    def test_critical_quadratic_scaling(self, crit_tables):
        # median of |bdry B_r| / r^2 stabilizes to an order-1 constant
        engine = PeelEngine(crit_tables)
        ratios = {20: [], 40: []}
        for k in range(60):
            trace = engine.run(40, RunStreams(77, k))
            for r in ratios:
                ratios[r].append(trace.boundary_edges[r - 1] / r**2)
        med20 = np.median(ratios[20])
        med40 = np.median(ratios[40])
        assert 0.1 < med20 < 10
        assert 0.5 < med40 / med20 < 2


class TestNearCritical:
    def test_lambda_value_exact(self):
        params = LambdaParams.near_critical(10)
        ratio = params.lam * 12 * mp.sqrt(3)
        assert abs(ratio - (1 - mp.mpf(2) / 30000)) < mp.mpf("1e-30")

    def test_rejects_small_n(self):
        with pytest.raises(DomainError):
            near_critical_run(3, [0.5], 2, rng=1)

    def test_output_shape_and_scaling(self):
        run = near_critical_run(6, [0.25, 0.5], replicas=8, rng=3)
        assert run.perimeter_rescaled.shape == (8, 2)
        assert run.volume_rescaled.shape == (8, 2)
        assert (run.perimeter_rescaled > 0).all()
        # rescaled perimeter at r=0.5 should be order 1 under the n^2 scaling
        assert 0.01 < np.median(run.perimeter_rescaled[:, 1]) < 100
