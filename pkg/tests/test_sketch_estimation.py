import math
import warnings

import mpmath
import numpy as np
import pytest

from sparsity_sketch import (
    DegenerateSketchError,
    DomainError,
    HypothesisViolationError,
    NoiseSpec,
    ParameterError,
    RngStream,
    VectorSketch,
    acquire_sketch,
    acquire_sketch_by_law,
    ci_half_widths,
    estimate_l1,
    estimate_l2,
    estimate_sparsity,
    normal_quantile,
    numerical_sparsity,
)
from sparsity_sketch.experiments import Experiment, ExperimentConfig, make_power_law_signal, run_fig2
from sparsity_sketch.stable_sampling import StableKind, draw_stable_vector

mpmath.mp.dps = 40


def series_cdf(z):
    # Phi via the Maclaurin series of erf, summed in high precision
    t = mpmath.mpf(z) / mpmath.sqrt(2)
    total, term, k = mpmath.mpf(0), t, 0
    while True:
        add = term / (2 * k + 1)
        total += add
        if abs(add) < mpmath.mpf(10) ** -35:
            break
        k += 1
        term = -term * t * t / k
    return 0.5 + total / mpmath.sqrt(mpmath.pi)


def bisect_quantile(u):
    lo, hi = mpmath.mpf(-9), mpmath.mpf(9)
    for _ in range(120):
        mid = (lo + hi) / 2
        if series_cdf(mid) < u:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


class TestNormalQuantile:
    def test_median(self):
        assert normal_quantile(0.5) == 0.0

    @pytest.mark.parametrize("u", [0.75, 0.95, 0.975, 0.999, 0.3, 0.01, 0.6, 1e-6, 1 - 1e-7])
    def test_against_series_oracle(self, u):
        assert abs(normal_quantile(u) - bisect_quantile(u)) < 1e-8

    def test_reference_values(self):
        assert normal_quantile(0.75) == pytest.approx(0.67449, abs=5e-6)
        assert normal_quantile(0.95) == pytest.approx(1.64485, abs=5e-6)

    def test_symmetry(self):
        for u in np.linspace(0.001, 0.499, 37):
            assert normal_quantile(u) == pytest.approx(-normal_quantile(1 - u), abs=1e-12)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, u):
        with pytest.raises(ParameterError):
            normal_quantile(u)


class TestAcquisition:
    def test_basis_vector_reads_first_entries(self):
        x = np.zeros(7)
        x[0] = 1.0
        rng = RngStream(13)
        sk = acquire_sketch(x, 1, 1, 1.0, rng=rng)
        a_c = draw_stable_vector(StableKind.CAUCHY, 1.0, 7, rng.child(0, 0))
        a_g = draw_stable_vector(StableKind.GAUSSIAN, 1.0, 7, rng.child(1, 0))
        assert sk.y_cauchy[0] == a_c[0]
        assert sk.y_gauss[0] == a_g[0]

    def test_noiseless_values_are_inner_products(self):
        x = np.random.default_rng(0).standard_normal(40)
        sk = acquire_sketch(x, 9, 11, 2.0, rng=RngStream(4))
        A_c = sk_rows(StableKind.CAUCHY, 9, 40, 2.0, RngStream(4).child(0))
        A_g = sk.gauss_operator.to_dense()
        np.testing.assert_allclose(sk.y_cauchy, A_c @ x, rtol=1e-12)
        np.testing.assert_allclose(sk.y_gauss, A_g @ x, rtol=1e-12)

    def test_noise_is_bounded(self):
        x = make_power_law_signal(300, 1.0)
        sigma0 = 0.1
        noisy = acquire_sketch(x, 200, 200, 1.0, NoiseSpec(sigma0), RngStream(8))
        clean = acquire_sketch(x, 200, 200, 1.0, rng=RngStream(8))
        d = np.concatenate([noisy.y_cauchy - clean.y_cauchy, noisy.y_gauss - clean.y_gauss])
        assert np.all(np.abs(d) <= sigma0)
        assert np.abs(d).max() > 0.5 * sigma0

    def test_zero_signal(self):
        with pytest.raises(DomainError):
            acquire_sketch(np.zeros(4), 3, 3)

    def test_bad_sizes(self):
        with pytest.raises(ParameterError):
            acquire_sketch(np.ones(4), 0, 3)

    def test_law_path_matches_row_path_in_distribution(self):
        from scipy import stats

        x = make_power_law_signal(200, 0.8)
        full = np.concatenate([acquire_sketch(x, 50, 50, rng=RngStream(1, k)).y_cauchy for k in range(40)])
        law = np.concatenate([acquire_sketch_by_law(x, 50, 50, rng=RngStream(2, k)).y_cauchy for k in range(40)])
        assert stats.ks_2samp(full, law).pvalue > 1e-3
        full = np.concatenate([acquire_sketch(x, 50, 50, rng=RngStream(1, k)).y_gauss for k in range(40)])
        law = np.concatenate([acquire_sketch_by_law(x, 50, 50, rng=RngStream(2, k)).y_gauss for k in range(40)])
        assert stats.ks_2samp(full, law).pvalue > 1e-3


def sk_rows(kind, n, p, gamma, rng):
    from sparsity_sketch.operators import StreamedOperator

    return StreamedOperator(kind, n, p, gamma, rng).to_dense()


class TestEstimators:
    def test_l1_odd(self):
        assert estimate_l1([-1.0, 2.0, -3.0], 1.0) == 2.0

    def test_l1_even(self):
        assert estimate_l1([4.0, -6.0], 2.0) == 2.5

    def test_l2_single(self):
        assert estimate_l2([3.0], 1.0) == 3.0

    def test_l2_flat(self):
        assert estimate_l2([1.0, 1.0, 1.0, 1.0], 2.0) == 0.5

    @pytest.mark.parametrize("f", [estimate_l1, estimate_l2])
    def test_empty(self, f):
        with pytest.raises(ParameterError):
            f([], 1.0)

    def test_large_sample_norms(self):
        x = make_power_law_signal(500, 1.0)
        sk = acquire_sketch(x, 100_000, 100_000, rng=RngStream(31))
        assert estimate_l1(sk.y_cauchy) == pytest.approx(np.abs(x).sum(), rel=0.01)
        assert estimate_l2(sk.y_gauss) == pytest.approx(np.linalg.norm(x), rel=0.01)


class TestEstimateSparsity:
    def test_half_widths(self):
        d, e = ci_half_widths(0.05, 0.0, 1000)
        z = 1.6448536269514722
        assert d == pytest.approx(math.pi * z / math.sqrt(2000), rel=1e-9)
        assert e == pytest.approx(z / math.sqrt(1000), rel=1e-9)
        assert d == pytest.approx(0.1155, abs=1e-4)
        assert e == pytest.approx(0.0520, abs=1e-4)

    def test_large_n_consistency(self):
        x = make_power_law_signal(10_000, 1.0)
        sk = acquire_sketch_by_law(x, 50_000, 50_000, rng=RngStream(3))
        est = estimate_sparsity(sk)
        assert 0.97 <= est.s_hat / numerical_sparsity(x) <= 1.03

    def test_hypothesis_violation_names_rho(self):
        sk = VectorSketch(np.ones(50), np.ones(50), 1.0, 10)
        with pytest.raises(HypothesisViolationError) as ei:
            estimate_sparsity(sk, 0.05, 1.2)
        assert ei.value.parameter == "rho"

    def test_hypothesis_violation_names_n(self):
        sk = VectorSketch(np.ones(1), np.ones(1), 1.0, 10)
        with pytest.raises(HypothesisViolationError) as ei:
            estimate_sparsity(sk, 0.05, 0.0)
        assert ei.value.parameter == "n"

    def test_degenerate(self):
        sk = VectorSketch(np.ones(5), np.zeros(5), 1.0, 10)
        with pytest.raises(DegenerateSketchError):
            estimate_sparsity(sk)

    def test_noisy_sketch_requires_rho(self):
        sk = acquire_sketch(np.ones(5), 5, 5, noise=NoiseSpec(0.1), rng=RngStream(0))
        with pytest.raises(ParameterError):
            estimate_sparsity(sk)

    def test_interval_brackets_estimate_and_is_clipped(self):
        x = make_power_law_signal(100, 0.2)
        for k in range(30):
            est = estimate_sparsity(acquire_sketch(x, 40, 40, rng=RngStream(9, k)), 0.05)
            assert 1.0 <= est.ci_low <= est.s_hat <= est.ci_high <= 100
            assert est.s_hat_raw == pytest.approx((est.t1_hat / est.t2_hat) ** 2)

    def test_interval_formula(self):
        rng = np.random.default_rng(4)
        yc, yg = rng.standard_cauchy(400) * 6.0, rng.standard_normal(400)
        est = estimate_sparsity(VectorSketch(yc, yg, 1.0, 10 ** 6), 0.1, 0.01)
        d, e = ci_half_widths(0.1, 0.01, 800)
        s = np.median(np.abs(yc)) ** 2 / np.mean(yg ** 2)
        assert est.s_hat == pytest.approx(s, rel=1e-12)
        assert est.ci_low == pytest.approx(s * ((1 - e) / (1 + d)) ** 2, rel=1e-12)
        assert est.ci_high == pytest.approx(s * ((1 + e) / (1 - d)) ** 2, rel=1e-12)

    def test_unbalanced_sizes_warn_and_use_min(self):
        sk = VectorSketch(np.ones(30), np.ones(50), 1.0, 10)
        with pytest.warns(UserWarning):
            est = estimate_sparsity(sk)
        assert est.unbalanced and est.n == 60

    def test_scale_invariance_same_seed(self):
        x = make_power_law_signal(1000, 1.0)
        a = estimate_sparsity(acquire_sketch(x, 300, 300, rng=RngStream(5)))
        b = estimate_sparsity(acquire_sketch(7.5 * x, 300, 300, rng=RngStream(5)))
        assert b.s_hat == pytest.approx(a.s_hat, rel=1e-12)

    def test_coverage_p1e4_noiseless(self):
        x = make_power_law_signal(10_000, 1.0)
        s = numerical_sparsity(x)
        hits = [estimate_sparsity(acquire_sketch_by_law(x, 500, 500, rng=RngStream(77, t)), 0.05).covers(s)
                for t in range(500)]
        assert np.mean(hits) >= (1 - 2 * 0.05) ** 2 - 0.03

    def test_noise_monotonicity(self):
        cfg = ExperimentConfig(Experiment.RELATIVE_ERROR_VS_RHO, p=[10_000], nu=[1.0], n_grid=[1000],
                               rho_grid=[1e-3, 1e-2, 1e-1], trials=100)
        med = run_fig2(cfg).values("median_rel_err")
        assert list(med) == sorted(med)

    def test_sparsity_freeness(self):
        cfg = ExperimentConfig(Experiment.RELATIVE_ERROR_VS_N, p=[10_000], nu=[2.0, 1.0, 0.5, 0.1],
                               n_grid=[1000], rho_grid=[1e-2], trials=100)
        table = run_fig2(cfg)
        assert [round(v) for v in table.values("s_true")] == [2, 58, 4028, 9878]
        med = table.values("median_rel_err")
        assert max(med) / min(med) < 1.5

    def test_dimension_freeness(self):
        cfg = ExperimentConfig(Experiment.RELATIVE_ERROR_VS_N, p=[100, 1000, 10_000], nu=[1.0],
                               n_grid=[1000], rho_grid=[1e-2], trials=100)
        med = run_fig2(cfg).values("median_rel_err")
        assert max(med) / min(med) < 1.5

    def test_inverse_sqrt_decay(self):
        cfg = ExperimentConfig(Experiment.RELATIVE_ERROR_VS_N, p=[10_000], nu=[1.0],
                               n_grid=[250, 500, 1000, 2000, 4000], rho_grid=[0.0], trials=100)
        med = run_fig2(cfg).values("median_rel_err")
        slope = np.polyfit(np.log([250, 500, 1000, 2000, 4000]), np.log(med), 1)[0]
        assert abs(slope + 0.5) <= 0.15

def test_sketch_dataclass_validation():
    with pytest.raises(ParameterError):
        VectorSketch(np.array([]), np.ones(2), 1.0, 3)
    with pytest.raises(ParameterError):
        VectorSketch(np.ones(2), np.ones(2), 0.0, 3)


def test_noise_spec_validation():
    with pytest.raises(ParameterError):
        NoiseSpec(-1.0)
    with pytest.raises(ParameterError):
        NoiseSpec(0.1, "gaussian")
    assert not NoiseSpec(0.0).active
    np.testing.assert_array_equal(NoiseSpec(0.5, "none").sample(3, RngStream(0)), np.zeros(3))
