"""Tabulated densities, skew-Normal marginals, mixing, and TV distance."""

import numpy as np
import pytest
from scipy import stats

from lapgm.marginals import (MarginalDensity, SkewNormalMarginal,
                             gaussian_marginal, mix_over_theta, tv_distance)


def normal_density(mean=0.0, sd=1.0, num=801, span=8.0):
    x = np.linspace(mean - span * sd, mean + span * sd, num)
    return MarginalDensity(x, stats.norm.pdf(x, mean, sd))


class TestMarginalDensity:
    def test_normalization(self):
        x = np.linspace(-3, 3, 101)
        d = MarginalDensity(x, np.exp(-0.5 * x * x) * 7.3)
        assert d.integral() == pytest.approx(1.0, abs=1e-12)

    def test_moments_of_standard_normal(self):
        d = normal_density()
        assert abs(d.mean()) < 1e-10
        assert d.var() == pytest.approx(1.0, abs=1e-4)
        assert d.sd() == pytest.approx(1.0, abs=1e-4)
        assert abs(d.skewness()) < 1e-8

    def test_quantiles_of_standard_normal(self):
        d = normal_density()
        assert d.quantile(0.5) == pytest.approx(0.0, abs=1e-8)
        assert d.quantile(0.975) == pytest.approx(1.959964, abs=1e-3)
        s = d.summary()
        assert set(s) == {"mean", "sd", "q0.025", "q0.5", "q0.975"}
        assert s["q0.025"] == pytest.approx(-1.959964, abs=1e-3)

    def test_mode(self):
        d = normal_density(mean=0.7)
        assert d.mode() == pytest.approx(0.7, abs=0.02)

    def test_from_log_handles_large_offsets(self):
        x = np.linspace(-4, 4, 401)
        d = MarginalDensity.from_log(x, -0.5 * x * x + 1000.0)
        assert tv_distance(d, normal_density()) < 1e-4

    def test_cdf_endpoints_and_monotone(self):
        d = normal_density()
        c = d.cdf()
        assert c[0] == 0.0 and c[-1] == pytest.approx(1.0, abs=1e-12)
        assert (np.diff(c) >= 0).all()

    def test_transform_with_jacobian(self):
        """exp of a Normal must give the matching log-Normal density."""
        d = normal_density(mean=0.2, sd=0.5, num=2001)
        t = d.transform(np.exp, np.exp)
        ref_x = t.x
        ref = stats.lognorm.pdf(ref_x, s=0.5, scale=np.exp(0.2))
        assert np.abs(t.pdf - ref).max() < 1e-4

    def test_transform_decreasing_map(self):
        d = normal_density(mean=0.3)
        t = d.transform(lambda x: -x, lambda x: -np.ones_like(x))
        assert t.mean() == pytest.approx(-0.3, abs=1e-6)
        assert (np.diff(t.x) > 0).all()

    def test_validation_errors(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            MarginalDensity([0.0, 0.0, 1.0], [1.0, 1.0, 1.0])
        with pytest.raises(ValueError, match="finite and nonnegative"):
            MarginalDensity([0.0, 1.0], [1.0, -0.5])
        with pytest.raises(ValueError, match="finite and nonnegative"):
            MarginalDensity([0.0, 1.0], [1.0, np.inf])
        with pytest.raises(ValueError, match="equal-length"):
            MarginalDensity([0.0, 1.0], [1.0, 1.0, 1.0])
        with pytest.raises(ValueError, match="integrates to zero"):
            MarginalDensity([0.0, 1.0], [0.0, 0.0])

    def test_gaussian_marginal_helper(self):
        g = gaussian_marginal(1.5, 2.0)
        assert g.mean() == pytest.approx(1.5, abs=1e-8)
        assert g.sd() == pytest.approx(2.0, rel=1e-3)


class TestSkewNormal:
    def test_zero_shape_is_gaussian(self):
        sn = SkewNormalMarginal(xi=0.3, omega=1.2, a=0.0)
        assert sn.mean() == pytest.approx(0.3)
        assert sn.sd() == pytest.approx(1.2)
        assert sn.skewness() == 0.0
        tab = sn.tabulate(num=801, span=8.0)
        assert tv_distance(tab, normal_density(0.3, 1.2)) < 1e-5

    def test_moments_match_scipy(self):
        sn = SkewNormalMarginal(xi=-0.5, omega=0.8, a=3.0)
        ref_mean, ref_var, ref_skew = stats.skewnorm.stats(
            3.0, loc=-0.5, scale=0.8, moments="mvs")
        assert sn.mean() == pytest.approx(float(ref_mean), rel=1e-12)
        assert sn.var() == pytest.approx(float(ref_var), rel=1e-12)
        assert sn.skewness() == pytest.approx(float(ref_skew), rel=1e-10)

    def test_pdf_matches_scipy(self):
        sn = SkewNormalMarginal(xi=0.1, omega=1.5, a=-2.0)
        x = np.linspace(-6, 4, 57)
        ref = stats.skewnorm.pdf(x, -2.0, loc=0.1, scale=1.5)
        assert np.abs(sn.pdf(x) - ref).max() < 1e-12

    def test_tabulate_covers_the_mass(self):
        sn = SkewNormalMarginal(xi=0.0, omega=1.0, a=4.0)
        d = sn.tabulate(num=401, span=7.0)
        assert d.integral() == pytest.approx(1.0, abs=1e-12)
        assert d.mean() == pytest.approx(sn.mean(), abs=1e-4)

    def test_summary_keys(self):
        s = SkewNormalMarginal(xi=0.0, omega=1.0, a=1.0).summary()
        assert set(s) == {"mean", "sd", "q0.025", "q0.5", "q0.975"}


class TestMixing:
    def test_two_symmetric_components(self):
        """A 50/50 mixture of N(-1,1) and N(+1,1): mean 0, variance 2."""
        left = normal_density(-1.0)
        right = normal_density(1.0)
        mixed = mix_over_theta([0.5, 0.5], [left, right])
        assert abs(mixed.mean()) < 1e-8
        assert mixed.var() == pytest.approx(2.0, abs=1e-3)

    def test_single_component_identity(self):
        d = normal_density(0.4)
        out = mix_over_theta([1.0], [d])
        assert out is d

    def test_weights_need_not_be_normalized(self):
        a = normal_density(-1.0)
        b = normal_density(1.0)
        m1 = mix_over_theta([0.5, 0.5], [a, b])
        m2 = mix_over_theta([2.0, 2.0], [a, b])
        assert tv_distance(m1, m2) < 1e-12

    def test_skew_normal_components_accepted(self):
        sn = SkewNormalMarginal(xi=0.0, omega=1.0, a=2.0)
        mixed = mix_over_theta([0.7, 0.3], [sn, normal_density()])
        assert mixed.integral() == pytest.approx(1.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError, match="empty"):
            mix_over_theta([], [])
        with pytest.raises(ValueError, match="equal length"):
            mix_over_theta([0.5], [normal_density(), normal_density()])


class TestTvDistance:
    def test_identical_densities(self):
        d = normal_density()
        assert tv_distance(d, d) == 0.0

    def test_symmetry(self):
        p = normal_density(0.0)
        q = normal_density(0.5)
        assert tv_distance(p, q) == pytest.approx(tv_distance(q, p), abs=1e-15)

    def test_range(self):
        # essentially disjoint supports approach TV = 1
        p = normal_density(0.0, 0.1)
        q = normal_density(50.0, 0.1)
        assert 0.999 < tv_distance(p, q) <= 1.0

    def test_known_value_for_shifted_normals(self):
        # TV(N(0,1), N(d,1)) = 2*Phi(d/2) - 1
        p = normal_density(0.0, 1.0, num=4001)
        q = normal_density(1.0, 1.0, num=4001)
        want = 2 * stats.norm.cdf(0.5) - 1
        assert tv_distance(p, q) == pytest.approx(want, abs=1e-6)

    def test_triangle_inequality(self):
        p = normal_density(0.0)
        q = normal_density(0.7)
        r = normal_density(1.4)
        assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12
