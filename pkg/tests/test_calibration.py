import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import stats
from scipy.integrate import trapezoid

from circtests.ancova import GroupedSample, stat_c3, stat_c4
from circtests.calibration import (
    TestReport,
    bootstrap_indices,
    chi2_quadform_pvalue,
    exceedance_pvalue,
    quadform_cumulants,
    smoothing_label,
)
from circtests.errors import DegenerateCumulants, InvalidInput
from circtests.estimators import RegressionSample
from circtests.noeffect import stat_c1


def mc_probability(C, draws=100_000, seed=0):
    """Monte Carlo oracle for P(z'Cz > 0), z iid standard normal."""
    z = np.random.default_rng(seed).normal(size=(draws, C.shape[0]))
    return float(np.mean(np.einsum("bi,ij,bj->b", z, C, z) > 0))


def application_matrices():
    """Forms B - Obs A and Q - Obs G from C1, C3 and C4 on small datasets."""
    out = []
    for seed in range(8):
        rng = np.random.default_rng(seed)
        theta = rng.uniform(0, 2 * np.pi, 40)
        y = rng.normal(0, 0.25, 40) + (0.3 * np.sin(theta) * np.cos(theta) if seed % 2 else 0.0)
        s = RegressionSample(theta, y)
        for kappa in (1.0, 5.0):
            obs, forms = stat_c1(s, kappa)
            out.append(forms.B - obs * forms.A)
        g = GroupedSample((RegressionSample(theta[:20], y[:20]), RegressionSample(theta[20:], y[20:])))
        for fn in (stat_c3, stat_c4):
            r = fn(g, 3.0)
            out.append(r.Q - r.statistic * r.G)
    return out


class TestCumulants:
    def test_trace_formula(self):
        M = np.random.default_rng(1).normal(size=(6, 6))
        C = M + M.T
        nu = quadform_cumulants(C)
        assert_allclose(nu, [np.trace(C), 2 * np.trace(C @ C), 8 * np.trace(C @ C @ C)], rtol=1e-10)


class TestChi2Approximation:
    def test_identity(self):
        assert chi2_quadform_pvalue(np.eye(5)) == pytest.approx(1.0)

    def test_negative_identity(self):
        assert chi2_quadform_pvalue(-np.eye(5)) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("lam, rank, n", [(2.0, 3, 7), (0.5, 4, 6), (-1.5, 3, 8)])
    def test_exact_for_scaled_chi_square(self, lam, rank, n):
        Q, _ = np.linalg.qr(np.random.default_rng(rank).normal(size=(n, n)))
        P = Q[:, :rank] @ Q[:, :rank].T
        C = lam * P
        # z'Cz > 0 is certain / impossible for a semidefinite form
        assert chi2_quadform_pvalue(C) == pytest.approx(1.0 if lam > 0 else 0.0, abs=1e-12)
        # a scaled projection matched on three cumulants is recovered exactly
        nu1, nu2, nu3 = quadform_cumulants(C)
        a, b = abs(nu3) / (4 * nu2), 8 * nu2**3 / nu3**2
        assert_allclose([a, b], [abs(lam), rank], rtol=1e-10)

    def test_two_eigenvalue_form_against_exact_law(self):
        # C = P_3 - 0.4 I_7 gives 0.6 chi2_3 - 0.4 chi2_4, whose law is known
        # by numerical convolution; the approximation must be close
        Q, _ = np.linalg.qr(np.random.default_rng(3).normal(size=(7, 7)))
        P = Q[:, :3] @ Q[:, :3].T
        C = P - 0.4 * np.eye(7)
        # P(0.6 X > 0.4 Y) = E[ P(X > 2Y/3) ] with X ~ chi2_3, Y ~ chi2_4
        y = np.linspace(0, 80, 200_001)
        exact = trapezoid(stats.chi2.pdf(y, 4) * stats.chi2.sf(2 * y / 3, 3), y)
        assert abs(chi2_quadform_pvalue(C) - exact) < 0.01
        assert abs(mc_probability(C) - exact) < 0.005

    @pytest.mark.xfail(strict=True, reason="three-cumulant matching errs by up to ~.06 on mean-zero random forms")
    def test_random_8x8_within_stated_tolerance(self):
        M = np.random.default_rng(0).normal(size=(8, 8))
        C = (M + M.T) / 2
        assert abs(chi2_quadform_pvalue(C) - mc_probability(C)) < 0.01

    def test_application_forms_against_monte_carlo(self):
        errors, tail_errors, branches = [], [], set()
        for k, C in enumerate(application_matrices()):
            mc = mc_probability(C, seed=k)
            err = abs(chi2_quadform_pvalue(C) - mc)
            errors.append(err)
            if mc <= 0.10:
                tail_errors.append(err)
            branches.add(np.sign(quadform_cumulants(C)[2]))
        assert branches == {-1.0, 1.0}
        assert max(errors) < 0.03
        assert tail_errors and max(tail_errors) < 0.01

    def test_negative_skew_branch_mirrors_positive(self):
        M = np.random.default_rng(5).normal(size=(9, 9))
        C = M @ M.T / 9 - 0.3 * np.eye(9)
        assert quadform_cumulants(C)[2] > 0
        # P(z'(-C)z > 0) = 1 - P(z'Cz > 0) for continuous forms
        assert_allclose(chi2_quadform_pvalue(-C), 1 - chi2_quadform_pvalue(C), atol=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateCumulants):
            chi2_quadform_pvalue(np.zeros((4, 4)))
        with pytest.raises(DegenerateCumulants):
            chi2_quadform_pvalue(np.diag([1.0, -1.0]))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10**6), st.integers(3, 12))
    def test_in_unit_interval(self, seed, n):
        M = np.random.default_rng(seed).normal(size=(n, n))
        p = chi2_quadform_pvalue(M + M.T)
        assert 0 <= p <= 1


class TestBootstrapPlumbing:
    def test_rows_depend_only_on_seed_and_index(self):
        full = bootstrap_indices(10, 50, 3)
        assert np.array_equal(full[:20], bootstrap_indices(10, 20, 3))
        assert full.min() >= 0 and full.max() < 10

    def test_needs_seed(self):
        with pytest.raises(InvalidInput):
            bootstrap_indices(5, 10, None)
        with pytest.raises(InvalidInput):
            bootstrap_indices(5, 0, 1)

    @settings(max_examples=100)
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=40), st.floats(-5, 5))
    def test_pvalue_on_lattice(self, boot, obs):
        p = exceedance_pvalue(boot, obs)
        B = len(boot)
        assert 0 <= p <= 1
        assert_allclose(p * B, round(p * B), atol=1e-9)


class TestReportType:
    def test_validation(self):
        with pytest.raises(InvalidInput):
            TestReport("noeffect", 1.0, 1.5, "chi2", smoothing_label("circular", 1.0))
        with pytest.raises(InvalidInput):
            TestReport("noeffect", 1.0, 0.5, "bootstrap", smoothing_label("circular", 1.0))

    def test_to_dict(self):
        r = TestReport("equality", 2.0, 0.05, "bootstrap", smoothing_label("linear", 0.3), 100, 7)
        d = r.to_dict(0.05)
        assert d["reject"] is True and d["smoothing"] == {"kind": "h", "value": 0.3}
        assert set(d) == {"test", "statistic", "p_value", "calibration", "smoothing", "boot_reps", "seed", "alpha", "reject"}
