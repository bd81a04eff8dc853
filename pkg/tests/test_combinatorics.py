import mpmath as mp
import numpy as np
import pytest

from hyperplane.combinatorics import (
    BoltzmannTables,
    LambdaParams,
    ConventionHoleError,
    count_asymptotic_constant,
    count_asymptotic_sqrt_regime,
    count_triangulations,
    f_series_coefficients,
    g_series_coefficients,
    generating_functions,
    h_from_lambda,
    lambda_critical,
    lambda_series_of_z,
    lemcombi2_limit,
    markov_constant,
    markov_constant_critical,
    partition_function,
)
from hyperplane.errors import DomainError


def mpf_close(a, b, rel):
    a, b = mp.mpf(a), mp.mpf(b)
    scale = max(abs(a), abs(b), mp.mpf("1e-300"))
    return abs(a - b) / scale <= rel


class TestHFromLambda:
    def test_critical_maps_to_quarter(self):
        h = h_from_lambda(lambda_critical())
        assert mpf_close(h, "0.25", mp.mpf("1e-13"))

    def test_small_lambda_linear(self):
        lam = mp.mpf("1e-8")
        h = h_from_lambda(lam)
        assert mpf_close(h, lam, mp.mpf("1e-6"))

    def test_near_critical_expansion(self):
        # lambda_n with n = 10 should give h close to 1/4 - 1/(2 * 10^2)
        params = LambdaParams.near_critical(10)
        assert abs(params.h - (mp.mpf("0.25") - mp.mpf("0.005"))) < mp.mpf("2e-4")

    def test_residual_bound(self):
        for ratio in ("0.999999", "0.9", "0.5", "0.01"):
            params = LambdaParams.from_ratio(ratio)
            assert params.residual() <= mp.mpf("1e-12")

    def test_out_of_range_rejected(self):
        with pytest.raises(DomainError):
            h_from_lambda(0)
        with pytest.raises(DomainError):
            h_from_lambda(float(lambda_critical()) * 1.001)

    def test_near_critical_ratio_exact(self):
        params = LambdaParams.near_critical(10)
        ratio = params.lam / lambda_critical()
        assert mpf_close(ratio, 1 - mp.mpf(2) / (3 * 10**4), mp.mpf("1e-25"))


class TestCounting:
    def test_small_values(self):
        assert count_triangulations(1, 1) == 1
        assert count_triangulations(2, 1) == 4
        assert count_triangulations(0, 2) == 1
        assert count_triangulations(0, 3) == 1

    def test_convention_hole(self):
        with pytest.raises(ConventionHoleError):
            count_triangulations(0, 1)

    def test_matches_series_oracle(self):
        # exact counts agree with the lambda-expansion of the closed form
        for p in range(1, 13):
            coeffs = lambda_series_of_z(p, 12)
            for n in range(0, 13):
                if n == 0 and p == 1:
                    assert abs(coeffs[0]) < mp.mpf("1e-30")
                    continue
                exact = count_triangulations(n, p)
                assert mpf_close(coeffs[n], exact, mp.mpf("1e-9")), (n, p)

    def test_asymptotic_constant(self):
        # #T_{n,p} lambda_c^n n^{5/2} -> C(p) within 1% at n = 10^4, p = 3
        n, p = 10**4, 3
        exact = count_triangulations(n, p)
        with mp.workdps(60):
            ratio = (
                mp.mpf(exact)
                * lambda_critical() ** n
                * mp.mpf(n) ** mp.mpf("2.5")
                / count_asymptotic_constant(p)
            )
        assert abs(ratio - 1) < 0.01

    def test_sqrt_regime_asymptotic(self):
        # second-order regime with p of order sqrt(n): ratio -> 1, improving with n
        ratios = []
        for n in (10**4, 4 * 10**4):
            p = int(mp.ceil(mp.sqrt(n)))
            exact = count_triangulations(n, p)
            with mp.workdps(80):
                ratios.append(abs(mp.mpf(exact) / count_asymptotic_sqrt_regime(n, p, 80) - 1))
        assert ratios[1] < 0.02
        assert ratios[1] < ratios[0]


class TestPartitionFunction:
    def test_critical_values(self):
        params = LambdaParams.from_ratio(1)
        z1 = partition_function(params, 1)
        z2 = partition_function(params, 2)
        assert mpf_close(z1, mp.mpf(1) / 2 - mp.sqrt(3) / 4, mp.mpf("1e-40"))
        assert mpf_close(z2, 3 * mp.sqrt(3) / 4, mp.mpf("1e-40"))

    def test_truncated_series_increases_to_z(self):
        params = LambdaParams.from_ratio("0.6")
        z3 = partition_function(params, 3)
        partials = []
        acc = mp.mpf(0)
        for n in range(0, 400):
            acc += count_triangulations(n, 3) * params.lam**n
            if n in (10, 50, 399):
                partials.append(acc)
        assert partials[0] < partials[1] < partials[2] <= z3 * (1 + mp.mpf("1e-30"))
        assert mpf_close(partials[-1], z3, mp.mpf("1e-9"))

    def test_series_coefficients_match(self):
        params = LambdaParams.from_ratio("0.8")
        coeffs = g_series_coefficients(params, 12)
        for p in range(1, 13):
            assert mpf_close(coeffs[p], partition_function(params, p), mp.mpf("1e-9"))
        assert abs(coeffs[0]) < mp.mpf("1e-40")


class TestMarkovConstant:
    def test_c1_is_inverse_lambda(self):
        for ratio in ("1", "0.9", "0.5"):
            params = LambdaParams.from_ratio(ratio)
            assert mpf_close(markov_constant(params, 1), 1 / params.lam, mp.mpf("1e-45"))

    def test_critical_values(self):
        params = LambdaParams.from_ratio(1)
        assert mpf_close(markov_constant(params, 1), 12 * mp.sqrt(3), mp.mpf("1e-40"))
        assert mpf_close(markov_constant(params, 2), 216 * mp.sqrt(3), mp.mpf("1e-40"))

    def test_critical_closed_form_identity(self):
        params = LambdaParams.from_ratio(1)
        for p in range(1, 101):
            a = markov_constant(params, p)
            b = markov_constant_critical(p)
            assert mpf_close(a, b, mp.mpf("1e-12"))

    def test_recurrence(self):
        for ratio in ("1", "0.9", "0.5"):
            tables = BoltzmannTables(LambdaParams.from_ratio(ratio), p_max=70)
            for p in range(1, 65):
                assert tables.recurrence_residual(p) <= mp.mpf("1e-10")

    def test_series_coefficients_match(self):
        params = LambdaParams.from_ratio("0.7")
        coeffs = f_series_coefficients(params, 12)
        for p in range(1, 13):
            assert mpf_close(coeffs[p], markov_constant(params, p), mp.mpf("1e-9"))


class TestGeneratingFunctions:
    def test_value_at_zero(self):
        params = LambdaParams.from_ratio("0.9")
        g, f = generating_functions(params, 0)
        assert abs(g) < mp.mpf("1e-40")
        assert abs(f) < mp.mpf("1e-40")

    def test_branch_point_rejected(self):
        params = LambdaParams.from_ratio(1)
        with pytest.raises(DomainError):
            generating_functions(params, mp.mpf(1) / 12)

    def test_matches_series_sum(self):
        # F's series radius is the pole h/(1+8h), inside G's branch point
        params = LambdaParams.from_ratio("0.5")
        x = params.h / (2 * (1 + 8 * params.h))
        g, f = generating_functions(params, x)
        gs = sum(partition_function(params, p) * x**p for p in range(1, 220))
        fs = sum(markov_constant(params, p) * x**p for p in range(1, 220))
        assert mpf_close(g, gs, mp.mpf("1e-18"))
        assert mpf_close(f, fs, mp.mpf("1e-18"))


class TestLemcombi2:
    def test_p_zero_limit(self):
        _, limit = lemcombi2_limit(0.0, 10, 0.2)
        assert abs(limit - 2 / np.sqrt(np.pi)) < 1e-10

    def test_convergence_to_limit(self):
        p = 1.0
        errs = []
        for n in (50, 100, 200):
            p_n = int(np.ceil(1.5 * n * n))
            h_n = mp.mpf("0.25") - mp.mpf(1) / (2 * n * n)
            fs, limit = lemcombi2_limit(p, p_n, h_n)
            errs.append(abs(fs - limit))
        assert errs[2] < errs[1] < errs[0]
        assert errs[2] / abs(lemcombi2_limit(p, 1, "0.25")[1]) < 0.02


class TestBoltzmannTables:
    def test_positive(self):
        tables = BoltzmannTables(LambdaParams.from_ratio("0.9"), p_max=40)
        for p in range(1, 41):
            assert tables.z(p) > 0
            assert tables.c(p) > 0

    def test_matches_direct_evaluation(self):
        params = LambdaParams.from_ratio("0.77")
        tables = BoltzmannTables(params, p_max=30)
        for p in (1, 2, 3, 17, 30):
            assert mpf_close(tables.z(p), partition_function(params, p), mp.mpf("1e-45"))
            assert mpf_close(tables.c(p), markov_constant(params, p), mp.mpf("1e-45"))

    def test_filler_recurrence(self):
        for ratio in ("1", "0.9", "0.5"):
            tables = BoltzmannTables(LambdaParams.from_ratio(ratio), p_max=24)
            for p in range(1, 20):
                assert tables.filler_residual(p) <= mp.mpf("1e-40")

    def test_json_round_trip(self):
        tables = BoltzmannTables(LambdaParams.from_ratio("0.85"), p_max=12)
        text = tables.to_json()
        back = BoltzmannTables.from_json(text)
        assert back.p_max == tables.p_max
        for p in range(1, 13):
            assert mpf_close(back.z(p), tables.z(p), mp.mpf("1e-40"))

    def test_extended_agrees(self):
        tables = BoltzmannTables(LambdaParams.from_ratio("0.9"), p_max=8)
        big = tables.extended(20)
        for p in range(1, 9):
            assert mpf_close(big.z(p), tables.z(p), mp.mpf("1e-45"))
        assert big.p_max == 20
