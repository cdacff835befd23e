from fractions import Fraction

import numpy as np
import pytest

from panel_epa import (
    DegenerateVarianceError,
    DistanceMatrix,
    InfeasibleTestError,
    IndefiniteCovarianceError,
    KernelSpec,
    LossPanel,
    SingularCovarianceError,
    demean_by_unit,
    pc_fit,
)
from panel_epa import variance as V
from panel_epa.kernels import space_weight, time_weight


def naive_lrcov(x, spec):
    n, T = x.shape
    G = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            G[i, j] = sum(time_weight(spec, abs(t - s)) * x[i, t] * x[j, s]
                          for t in range(T) for s in range(T)) / T
    return G


def line_dist(n):
    idx = np.arange(n, dtype=float)
    return DistanceMatrix(np.abs(idx[:, None] - idx[None, :]))


def dm_of(rng, n, T):
    return demean_by_unit(LossPanel(rng.standard_normal((n, T))))


def test_alternating_series_exact_value():
    # (1/4) * (4 + 2 * 0.5 * (-3)) = 1/4
    dm = demean_by_unit(LossPanel([[1.0, -1.0, 1.0, -1.0]]))
    assert V.lrv_per_unit(dm, KernelSpec(bandwidth=1), 0) == 0.25


@pytest.mark.parametrize("lt", [0, 1, 2, 5])
def test_per_unit_hac_matches_rational_double_sum(lt):
    x = [3, -1, 0, 2, -2, 1, -4, 1]  # mean zero
    T = len(x)
    w = lambda h: max(Fraction(0), 1 - Fraction(h, lt + 1))
    exact = sum(w(abs(t - s)) * x[t] * x[s] for t in range(T) for s in range(T)) / T
    dm = demean_by_unit(LossPanel([x]))
    assert V.lrv_per_unit(dm, KernelSpec(bandwidth=lt), 0) == pytest.approx(float(exact), rel=1e-15)


@pytest.mark.parametrize("kern, lt", [("bartlett", 0), ("bartlett", 3), ("truncated", 2)])
def test_lrcov_matches_double_sum(rng, kern, lt):
    dm = dm_of(rng, 4, 9)
    spec = KernelSpec(kern, lt)
    np.testing.assert_allclose(V.lrcov(dm.dlt, spec), naive_lrcov(dm.dlt, spec), rtol=1e-12, atol=1e-14)


def test_shac_matches_quadruple_sum(rng):
    dm = dm_of(rng, 6, 8)
    spec = KernelSpec(bandwidth=2, distance_threshold=3.0)
    d = line_dist(6)
    G = naive_lrcov(dm.dlt, spec)
    direct = sum(space_weight(spec, d.d[i, j]) * G[i, j] for i in range(6) for j in range(6)) / 6
    assert V.lrv_shac(dm, spec, d).value == pytest.approx(direct, rel=1e-12)


def test_dk_equals_mean_of_lrcov(rng):
    dm = dm_of(rng, 10, 20)
    spec = KernelSpec(bandwidth=2)
    assert V.lrv_dk(dm, spec).value == pytest.approx(V.lrcov(dm.dlt, spec).sum() / 100, rel=1e-12)


def test_partial_sample_uses_leading_block(rng):
    dm = dm_of(rng, 10, 15)
    spec = KernelSpec(bandwidth=1)
    n_p = V.partial_sample_size(10)
    assert n_p == 4
    G = V.lrcov(dm.dlt, spec)
    assert V.lrv_partial_sample(dm, spec).value == pytest.approx(G[:4, :4].sum() / 4, rel=1e-12)


@pytest.mark.parametrize("n, n_p", [(1, 1), (4, 2), (5, 3), (9, 3), (10, 4), (100, 10)])
def test_partial_sample_size(n, n_p):
    assert V.partial_sample_size(n) == n_p


def test_rates():
    assert V.ScalarLrv(1.0, "per_unit_avg").rate == V.SQRT_NT
    assert V.ScalarLrv(1.0, "dk").rate == V.SQRT_T


def test_degenerate_scalar():
    with pytest.raises(DegenerateVarianceError):
        V.ScalarLrv(0.0, "dk")
    with pytest.raises(DegenerateVarianceError):
        V.lrv_dk(demean_by_unit(LossPanel(np.ones((3, 4)))), KernelSpec())


def test_factor_common_term_matches_quadruple_sum(rng):
    dm = dm_of(rng, 10, 20)
    fit = pc_fit(dm, 2)
    spec = KernelSpec(bandwidth=2)
    c = fit.lambda_hat @ fit.f_hat.T  # n x T common component
    n, T = c.shape
    direct = sum(time_weight(spec, abs(t - s)) * c[i, t] * c[j, s]
                 for i in range(n) for j in range(n) for t in range(T) for s in range(T))
    direct /= n * n * T
    assert V.factor_common_term(fit, spec) == pytest.approx(direct, rel=1e-10)


def test_factor_lrv_idio_options(rng):
    dm = dm_of(rng, 9, 30)
    fit = pc_fit(dm, 1)
    spec = KernelSpec()
    d = line_dist(9)
    common = V.factor_common_term(fit, spec)
    Ge = V.lrcov(fit.resid, spec)
    assert V.lrv_factor(dm, spec, fit, "diagonal").value == pytest.approx(common + np.trace(Ge) / 81)
    K = np.vectorize(lambda x: space_weight(spec, x, 2.0))(d.d)
    assert V.lrv_factor(dm, spec, fit, "shac", d).value == pytest.approx(common + (K * Ge).sum() / 81)
    assert V.lrv_factor(dm, spec, fit, "partial_sample").value == pytest.approx(
        common + Ge[:3, :3].sum() / 3 / 9)


def test_unit_space_kernel_shac_is_n_times_dk(rng):
    dm = dm_of(rng, 7, 12)
    spec = KernelSpec(space_kernel="unit", bandwidth=1)
    shac = V.lrv_shac(dm, spec, line_dist(7)).value
    assert shac == pytest.approx(7 * V.lrv_dk(dm, spec).value, rel=1e-12)


def test_shift_and_scale_invariance(rng):
    x = rng.standard_normal((5, 11))
    spec = KernelSpec(bandwidth=2)
    a = V.lrv_dk(demean_by_unit(LossPanel(x)), spec).value
    b = V.lrv_dk(demean_by_unit(LossPanel(3.0 * x + 7.0)), spec).value
    assert b == pytest.approx(9.0 * a, rel=1e-12)


def test_omega_shapes_and_diagonals(rng):
    dm = dm_of(rng, 5, 30)
    spec = KernelSpec(distance_threshold=2.0)
    o1 = V.cov_omega1(dm, spec).omega
    o2 = V.cov_omega2(dm, spec, line_dist(5)).omega
    o3 = V.cov_omega3(dm, spec).omega
    np.testing.assert_allclose(np.diag(o1), np.diag(o3))
    np.testing.assert_allclose(np.diag(o2), np.diag(o3))
    assert o2[0, 2] == 0.0
    assert o2[0, 1] == pytest.approx(0.5 * o3[0, 1])


def test_omega3_infeasible_when_n_ge_T(rng):
    with pytest.raises(InfeasibleTestError, match="J3 infeasible"):
        V.cov_omega3(dm_of(rng, 6, 6), KernelSpec())


def test_omega1_degenerate_unit():
    x = np.vstack([np.arange(5.0), np.full(5, 2.0)])
    with pytest.raises(DegenerateVarianceError, match="unit 1"):
        V.cov_omega1(demean_by_unit(LossPanel(x)), KernelSpec())


def test_omega4_without_factors_is_residual_covariance(rng):
    dm = dm_of(rng, 4, 20)
    fit = pc_fit(dm, 0)
    spec = KernelSpec()
    np.testing.assert_allclose(V.cov_omega4(dm, spec, fit).omega, V.lrcov(dm.dlt, spec))
    diag = V.cov_omega4(dm, spec, fit, idio="diagonal").omega
    np.testing.assert_allclose(diag, np.diag(np.diag(V.lrcov(dm.dlt, spec))))


def test_quadratic_form_matches_solve(rng):
    A = rng.standard_normal((5, 5))
    om = A @ A.T + np.eye(5)
    v = rng.standard_normal(5)
    assert V.quadratic_form_inverse(om, v) == pytest.approx(v @ np.linalg.solve(om, v), rel=1e-10)


def test_quadratic_form_rejects_bad_matrices():
    with pytest.raises(IndefiniteCovarianceError):
        V.quadratic_form_inverse(np.diag([1.0, -1.0]), np.ones(2))
    with pytest.raises(SingularCovarianceError):
        V.quadratic_form_inverse(np.ones((2, 2)), np.ones(2))
    with pytest.raises(SingularCovarianceError):
        V.quadratic_form_inverse(np.diag([1.0, 1e-14]), np.ones(2))
