import numpy as np
import pytest

from panel_epa import InputError, LossPanel, demean_by_unit, pc_fit, select_num_factors
from panel_epa.factors import ic_p1


def rank_k_panel(rng, n, T, k, noise=1e-3):
    x = rng.standard_normal((n, k)) @ rng.standard_normal((k, T))
    return demean_by_unit(LossPanel(x + noise * rng.standard_normal((n, T))))


def test_ssr_equals_trailing_gram_eigenvalues(rng):
    dm = demean_by_unit(LossPanel(rng.standard_normal((12, 20))))
    vals = np.sort(np.linalg.eigvalsh(dm.dlt.T @ dm.dlt))[::-1]
    for m in range(0, 6):
        fit = pc_fit(dm, m)
        assert fit.ssr == pytest.approx(vals[m:].sum(), rel=1e-8)


def test_normalisation_and_reconstruction(rng):
    dm = demean_by_unit(LossPanel(rng.standard_normal((8, 15))))
    fit = pc_fit(dm, 3)
    np.testing.assert_allclose(fit.f_hat.T @ fit.f_hat / 15, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(fit.common + fit.resid, dm.dlt, atol=1e-12)
    # residuals are orthogonal to the estimated factors
    np.testing.assert_allclose(fit.resid @ fit.f_hat, 0.0, atol=1e-10)


def test_loading_sign_convention(rng):
    fit = pc_fit(demean_by_unit(LossPanel(rng.standard_normal((6, 10)))), 3)
    assert np.all(fit.lambda_hat.sum(axis=0) >= 0)


def test_ssr_is_a_local_minimum(rng):
    # perturbing the loadings cannot lower the sum of squared residuals
    dm = demean_by_unit(LossPanel(rng.standard_normal((7, 12))))
    fit = pc_fit(dm, 2)
    base = np.sum((dm.dlt - fit.lambda_hat @ fit.f_hat.T) ** 2)
    for _ in range(5):
        lam = fit.lambda_hat + 1e-4 * rng.standard_normal(fit.lambda_hat.shape)
        assert np.sum((dm.dlt - lam @ fit.f_hat.T) ** 2) >= base


def test_zero_factors(rng):
    dm = demean_by_unit(LossPanel(rng.standard_normal((3, 5))))
    fit = pc_fit(dm, 0)
    assert fit.f_hat.shape == (5, 0)
    np.testing.assert_array_equal(fit.resid, dm.dlt)


def test_invalid_m(rng):
    dm = demean_by_unit(LossPanel(rng.standard_normal((3, 5))))
    with pytest.raises(InputError):
        pc_fit(dm, 4)
    with pytest.raises(InputError):
        pc_fit(dm, -1)
    with pytest.raises(InputError):
        select_num_factors(dm, 0)


def test_selects_rank_two(rng):
    assert select_num_factors(rank_k_panel(rng, 30, 40, 2), 5) == 2


def test_single_candidate(rng):
    assert select_num_factors(rank_k_panel(rng, 10, 10, 3), 1) == 1


def test_ic_values_are_finite(rng):
    dm = demean_by_unit(LossPanel(rng.standard_normal((10, 10))))
    ic = ic_p1(dm, 3)
    assert ic.shape == (3,)
    assert np.all(np.isfinite(ic))
