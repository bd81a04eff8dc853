import numpy as np
import pytest

from hyperplane.continuum import GROWTH_RATE, psi_tilted
from hyperplane.errors import DomainError
from hyperplane.levypaths import (
    CadlagPath,
    backward_levy_terminal,
    martingale_check,
    sample_tilted_jumps,
    simulate_backward_levy,
    simulate_PV,
    tilted_jump_moment,
    tilted_jump_rate,
)

SQRT2 = np.sqrt(2.0)


class TestCadlagPath:
    def test_right_continuous_eval(self):
        path = CadlagPath([0.0, 1.0, 2.0], [1.0, 3.0, 2.0], [1.0, 2.0], [2.0, -1.0])
        assert path(0.5) == 1.0
        assert path(1.0) == 3.0
        assert path(1.999) == 3.0
        assert path(2.5) == 2.0

    def test_rejects_nonincreasing_jumps(self):
        with pytest.raises(DomainError):
            CadlagPath([0, 1], [0, 1], [1.0, 1.0], [1.0, 1.0])

    def test_csv(self, tmp_path):
        path = CadlagPath([0.0, 1.0], [0.0, 2.0], [1.0], [2.0])
        f = tmp_path / "p.csv"
        path.to_csv(f)
        lines = f.read_text().strip().splitlines()
        assert lines[0] == "t,value,jump_flag"
        assert len(lines) == 3


class TestTiltedJumps:
    def test_rate_and_sampling(self):
        rng = np.random.default_rng(0)
        lo = 0.01
        draws = sample_tilted_jumps(lo, 60_000, rng)
        assert (draws >= lo).all()
        # empirical mean against the measure's normalized mean
        mean = tilted_jump_moment(lo, np.inf, 1) / tilted_jump_rate(lo)
        assert draws.mean() == pytest.approx(mean, rel=0.02)

    def test_path_mean(self):
        rng = np.random.default_rng(1)
        term = backward_levy_terminal(1.0, 4e-3, 30_000, rng)
        stderr = term.std() / np.sqrt(len(term))
        assert abs(term.mean() - GROWTH_RATE) < 3 * stderr

    def test_transform_value(self):
        rng = np.random.default_rng(2)
        u = 0.5
        term = backward_levy_terminal(1.0, 4e-3, 30_000, rng)
        emp = np.exp(u * term)
        target = np.exp(float(psi_tilted(u)))
        stderr = emp.std() / np.sqrt(len(emp))
        assert abs(emp.mean() - target) < 3.5 * stderr

    def test_eps_insensitivity(self):
        rng = np.random.default_rng(3)
        a = backward_levy_terminal(1.0, 8e-3, 20_000, rng).mean()
        b = backward_levy_terminal(1.0, 4e-3, 20_000, rng).mean()
        assert abs(a - b) < 0.05

    def test_path_object(self):
        rng = np.random.default_rng(4)
        path = simulate_backward_levy(1.0, 1e-2, rng)
        assert path.times[0] == 0.0
        assert path.times[-1] == pytest.approx(1.0)
        assert (path.jump_sizes < 0).all()
        assert path.values[0] == pytest.approx(0.0)


class TestMartingale:
    def test_mean_one(self):
        rng = np.random.default_rng(7)
        est, err = martingale_check(1.0, 30_000, 1e-4, rng)
        assert abs(est - 1.0) < 3 * err
        assert err < 0.05

    def test_eps_sweep_agrees(self):
        rng = np.random.default_rng(8)
        a, ea = martingale_check(1.0, 20_000, 1e-3, rng)
        b, eb = martingale_check(1.0, 20_000, 1e-4, rng)
        assert abs(a - b) < 3 * np.hypot(ea, eb)

    def test_weight_bound(self):
        x = np.linspace(0, 50, 1000)[1:]
        f = (1 + 2 * x) * np.exp(-2 * x)
        assert (f <= 1.0).all()


class TestSimulatePV:
    def test_paths_positive_and_spectrally_negative(self):
        rng = np.random.default_rng(11)
        out = simulate_PV(1.5, 1.0, 1e-3, rng)
        assert (out.P.values > 0).all()
        assert (out.P.jump_sizes <= 0).all()
        assert (np.diff(out.V.values) >= -1e-12).all()
        assert out.P.times[-1] == pytest.approx(1.5)

    def test_exact_start_marginal(self):
        # the r0 start is an exact draw of the perimeter marginal
        from hyperplane.levypaths import exact_marginal_start
        from hyperplane.continuum import marginal_transform_X

        rng = np.random.default_rng(12)
        r0 = 1.0
        draws = np.array([exact_marginal_start(r0, rng) for _ in range(40_000)])
        for lam in (0.1, 0.5):
            emp = np.exp(-lam * draws)
            target = marginal_transform_X(lam, r0)
            assert abs(emp.mean() - target) < 3.5 * emp.std() / np.sqrt(len(emp))

    def test_terminal_law_matches_marginal_transform(self):
        # end-to-end law check of the exact-start pipeline at a moderate radius
        from hyperplane.continuum import marginal_transform_X

        rng = np.random.default_rng(13)
        T = 2.0
        vals = np.array([simulate_PV(T, None, 1e-2, rng).P.terminal for _ in range(400)])
        scale = np.sinh(SQRT2 * T) ** 2 / 3
        for lam_scaled in (0.5, 1.5):
            lam = lam_scaled / scale
            emp = np.exp(-lam * vals)
            target = marginal_transform_X(lam, T)
            stderr = emp.std() / np.sqrt(len(emp))
            assert abs(emp.mean() - target) < 3.5 * stderr

    def test_growth_scale(self):
        # e^{-2 sqrt2 r} P_r has mean sinh^2/3 + tanh^2/6 rescaled, near 1/12
        rng = np.random.default_rng(14)
        T = 2.5
        vals = [simulate_PV(T, None, 1e-2, rng).P.terminal * np.exp(-2 * SQRT2 * T)
                for _ in range(300)]
        target = (np.sinh(SQRT2 * T) ** 2 / 3 + np.tanh(SQRT2 * T) ** 2 / 6) * np.exp(-2 * SQRT2 * T)
        stderr = np.std(vals) / np.sqrt(len(vals))
        assert abs(np.mean(vals) - target) < 3.5 * stderr

    def test_volume_tracks_quarter(self):
        rng = np.random.default_rng(17)
        ratios = []
        for _ in range(60):
            out = simulate_PV(3.0, None, 1e-2, rng)
            ratios.append(out.V.terminal / out.P.terminal)
        assert np.mean(ratios) == pytest.approx(0.25, abs=0.05)

    def test_jump_floor_densifies_marks(self):
        rng = np.random.default_rng(19)
        coarse = simulate_PV(1.0, 1.0, 1e-2, rng, jump_floor=None)
        fine = simulate_PV(1.0, 1.0, 1e-2, np.random.default_rng(19), jump_floor=0.02)
        assert len(fine.P.jump_times) >= len(coarse.P.jump_times)
