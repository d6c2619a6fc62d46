import math

import numpy as np
import pytest

from gibbslab import hill_spectrum as hs
from gibbslab.fourier_field import (
    PeriodicField,
    default_grid_size,
    evaluate,
    field_from_modes,
    zero_field,
)
from gibbslab.gibbs_sampler import GibbsParams, importance_ensemble


def mathieu(eps: float) -> PeriodicField:
    return field_from_modes(2, {2: eps, -2: eps})  # 2*eps*cos(2x)


def rescale_l1(q: PeriodicField, target: float) -> PeriodicField:
    vals = np.real(evaluate(q, default_grid_size(q.cutoff)).values)
    return q * (target / np.mean(np.abs(vals)))


class TestMonodromy:
    def test_free_values(self):
        assert hs.hill_discriminant(zero_field(1), 1.0) == pytest.approx(-2.0, abs=1e-9)
        assert hs.hill_discriminant(zero_field(1), 4.0) == pytest.approx(2.0, abs=1e-9)

    def test_constant_shift_closed_form(self):
        c = 0.4
        q = field_from_modes(0, {0: c}).with_cutoff(2)
        for lam in (0.7, 2.0, 9.3):
            expect = 2 * np.cos(np.pi * np.sqrt(complex(lam - c)))
            assert hs.hill_discriminant(q, lam) == pytest.approx(
                float(expect.real), abs=1e-8
            )

    def test_rejects_odd_modes(self):
        q = field_from_modes(1, {1: 0.1, -1: 0.1})
        with pytest.raises(hs.OddModeError):
            hs.hill_monodromy(q, 1.0)

    def test_rejects_complex_potential(self):
        q = field_from_modes(2, {2: 0.1})
        with pytest.raises(ValueError):
            hs.hill_monodromy(q, 1.0)

    def test_wronskian(self):
        m = hs.hill_monodromy(mathieu(0.3), 2.2)
        assert abs(m.determinant - 1.0) < 1e-9


class TestSpectrum:
    def test_free_spectrum(self):
        data = hs.hill_periodic_spectrum(zero_field(1), 30.0)
        expect = [0, 1, 1, 4, 4, 9, 9, 16, 16, 25, 25]
        assert data.eigenvalues.size == len(expect)
        assert np.abs(data.eigenvalues - np.array(expect, float)).max() < 1e-7
        assert np.abs(data.midpoints - np.arange(6.0)).max() < 1e-7
        assert all(g[2] == pytest.approx(0.0, abs=1e-7) for g in data.gaps)
        assert data.period_convention == "pi"
        assert data.ordering_ok

    def test_series_labels_free(self):
        data = hs.hill_periodic_spectrum(zero_field(1), 20.0)
        assert data.series[0] == "periodic"
        assert data.series[1] == data.series[2] == "antiperiodic"
        assert data.series[3] == data.series[4] == "periodic"

    def test_mathieu_first_gap(self):
        eps = 0.1
        data = hs.hill_periodic_spectrum(mathieu(eps), 12.0)
        lo, hi, length = data.gaps[0]
        assert 0.8 < lo < 1.0 < hi < 1.2
        assert length == pytest.approx(2 * eps, abs=0.01)  # classical leading term

    def test_residuals(self):
        data = hs.hill_periodic_spectrum(mathieu(0.1), 40.0)
        assert np.max(data.residuals) < 1e-6

    def test_constant_shift_covariance(self):
        eps, c = 0.1, 0.35
        base = hs.hill_periodic_spectrum(mathieu(eps), 26.0)
        shifted_q = PeriodicField(
            2, mathieu(eps).coeffs + np.array([0, 0, c, 0, 0], dtype=complex)
        )
        shifted = hs.hill_periodic_spectrum(shifted_q, 26.0 + c)
        n = min(base.eigenvalues.size, shifted.eigenvalues.size)
        assert np.abs(shifted.eigenvalues[:n] - base.eigenvalues[:n] - c).max() < 1e-7

    def test_midpoints_structure(self):
        data = hs.hill_periodic_spectrum(mathieu(0.2), 40.0)
        t = data.two_sided_t(4)
        assert t[4] == 0.0
        assert np.all(np.diff(t) > 0)
        assert np.allclose(t, -t[::-1])


class TestBorg:
    def test_free_margins_maximal(self):
        data = hs.hill_periodic_spectrum(zero_field(1), 40.0)
        rep = hs.borg_check(zero_field(1), data, 4)
        assert rep.passed and rep.hypotheses_ok
        assert rep.max_center_offset < 1e-7
        assert rep.max_square_offset < 1e-6

    def test_mathieu_passes(self):
        eps = 0.1  # int |q|/2pi = 4 eps / pi ~ 0.127 < 1/2
        q = mathieu(eps)
        data = hs.hill_periodic_spectrum(q, 40.0)
        rep = hs.borg_check(q, data, 5)
        assert rep.hypotheses_ok
        # |cos| has kinks, so the quadrature is second order here
        assert rep.mean_abs == pytest.approx(4 * eps / math.pi, abs=1e-3)
        assert rep.passed

    def test_gibbs_samples_pass(self):
        params = GibbsParams(
            p=4.0, beta=-1.0, ball_radius=1.0, cutoff=8, kind="kdv", pi_periodic=True
        )
        ens = importance_ensemble(6, params, seed=3)
        for f in ens.samples:
            q = rescale_l1(f, 0.45)
            data = hs.hill_periodic_spectrum(q, 40.0, steps=1024)
            rep = hs.borg_check(q, data, 5)
            assert rep.hypotheses_ok and rep.passed

    def test_violated_hypotheses_reported(self):
        q = rescale_l1(mathieu(0.1), 0.9)  # L1 mean above 1/2
        data = hs.hill_periodic_spectrum(q, 40.0)
        rep = hs.borg_check(q, data, 4)
        assert not rep.hypotheses_ok and not rep.passed


class TestFrameBounds:
    def test_family_norm_oracle(self):
        # closed-form norms against brute-force quadrature on a long interval
        x = np.linspace(-3000, 3000, 2_400_001)
        dx = x[1] - x[0]
        for g in hs.default_test_family(8):
            num = np.sum(g(x) ** 2) * dx
            assert num == pytest.approx(g.norm_sq(), rel=2e-3)

    def test_free_ratio_direct_summation(self):
        g = hs.default_test_family(1)[0]  # pure sinc of band 2
        t = np.arange(-10, 11).astype(float)
        expected = np.sum(g(t) ** 2) / g.norm_sq()
        est = hs.frame_bounds_estimate(t, 10, family_size=1)
        assert est.lower == pytest.approx(expected, rel=1e-12)
        assert est.upper == pytest.approx(expected, rel=1e-12)

    def test_scaling_invariance(self):
        g = hs.default_test_family(16)[7]
        t = np.arange(-8, 9).astype(float) + 0.1
        base = hs.sampling_ratio(g, t)
        for c in (1e-3, 2.0, 57.0):
            vals = c * g(t)
            ratio = np.sum(np.abs(vals) ** 2) / (c * c * g.norm_sq())
            assert abs(ratio - base) <= 1e-10 * max(1.0, abs(base))

    def test_perturbed_sequences_keep_positive_lower_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            ns = np.arange(-10, 11).astype(float)
            t = ns + rng.uniform(-0.24, 0.24, ns.size)
            t[10] = 0.0
            t = np.sort(t)
            est = hs.frame_bounds_estimate(t, 10)
            assert est.lower > 0
            assert est.lower <= est.upper

    def test_family_size(self):
        fam = hs.default_test_family(64)
        assert len(fam) == 64
        with pytest.raises(ValueError):
            hs.default_test_family(100)


class TestPwStatistic:
    def test_free_even_indices(self):
        recs = hs.pw_statistic_contour(zero_field(1), [2, 4])
        assert recs[0]["t_sq"] == pytest.approx(4.0, abs=1e-7)
        assert recs[1]["t_sq"] == pytest.approx(16.0, abs=1e-7)
        for r in recs:
            assert abs(r["count"] - 2.0) <= 0.1

    def test_mathieu_cross_method(self):
        q = mathieu(0.05)
        data = hs.hill_periodic_spectrum(q, 80.0)
        recs = hs.pw_statistic_contour(q, [1, 2, 3, 4])
        for r in recs:
            direct = data.t(r["index"]) ** 2
            assert abs(r["t_sq"] - direct) < 1e-6


class TestGapSummability:
    def test_free_all_zero(self):
        data = hs.hill_periodic_spectrum(zero_field(1), 30.0)
        rep = hs.gap_summability_report(data)
        assert rep["l2_total"] == pytest.approx(0.0, abs=1e-12)

    def test_mathieu_decay(self):
        data = hs.hill_periodic_spectrum(mathieu(0.2), 110.0)
        rep = hs.gap_summability_report(data)
        assert rep["tail_l2"] < rep["head_l2"]
        assert np.isfinite(rep["l2_total"])
