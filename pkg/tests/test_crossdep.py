import math

import numpy as np
import pytest

from panel_epa import InputError, LossPanel, bp_lm, bp_lm_bias_corrected, defactor, demean_by_unit
from panel_epa.crossdep import _puy_moments, cd_suite


def test_bp_lm_by_hand(rng):
    x = rng.standard_normal((4, 12))
    r = np.corrcoef(x)
    stat = 12 * sum(r[i, j] ** 2 for i in range(4) for j in range(i + 1, 4))
    rep = bp_lm(x)
    assert rep.statistic == pytest.approx(stat, rel=1e-12)
    assert rep.df == 6


def test_bias_corrected_by_hand(rng):
    n, T = 5, 20
    x = rng.standard_normal((n, T))
    r = np.corrcoef(x)
    tr = T - 1
    Tk = T - 1
    a2 = 3 * (((Tk - 8) * (Tk + 2) + 24) / ((Tk + 2) * (Tk - 2) * (Tk - 4))) ** 2
    a1 = a2 - 1 / Tk ** 2
    mu, v = tr / Tk, math.sqrt(tr ** 2 * a1 + 2 * tr * a2)
    s = sum(((T - 1) * r[i, j] ** 2 - mu) / v for i in range(n) for j in range(i + 1, n))
    rep = bp_lm_bias_corrected(x)
    assert rep.statistic == pytest.approx(math.sqrt(2 / (n * (n - 1))) * s, rel=1e-12)


def test_moments_are_exact_under_normality():
    # E[(T-1) rho^2] = 1 for independent normal series, for any T
    mu, sd = _puy_moments(30, 1)
    assert mu == 1.0
    assert sd > 0


def test_reference_p_value():
    from panel_epa import normal_p
    assert round(normal_p(2.745), 3) == 0.006


def test_short_panel_rejected(rng):
    with pytest.raises(InputError, match="T - k > 4"):
        bp_lm_bias_corrected(rng.standard_normal((3, 5)))


def test_plain_standardised_variant(rng):
    x = rng.standard_normal((3, 6))
    rep = bp_lm_bias_corrected(x, corrected=False)
    r = np.corrcoef(x)
    s = sum(6 * r[i, j] ** 2 - 1 for i in range(3) for j in range(i + 1, 3))
    assert rep.statistic == pytest.approx(s / math.sqrt(6))
    assert rep.variant == "standardized"


def test_zero_variance_unit(rng):
    x = rng.standard_normal((3, 10))
    x[2] = 4.2
    with pytest.raises(InputError, match="unit 2"):
        bp_lm(x)


def test_strong_dependence_detected(rng):
    f = rng.standard_normal(40)
    x = np.outer(np.ones(10), f) + 0.3 * rng.standard_normal((10, 40))
    assert bp_lm(x).p_value < 1e-6
    assert bp_lm_bias_corrected(x).p_value < 1e-6


def test_defactoring_removes_common_factor(rng):
    f = rng.standard_normal(60)
    x = np.outer(rng.uniform(1, 2, 15), f) + rng.standard_normal((15, 60))
    dm = demean_by_unit(LossPanel(x))
    res = defactor(dm, 1)
    assert bp_lm(res).statistic < bp_lm(dm.dlt).statistic / 5
    suite = cd_suite(LossPanel(x), m=1)
    assert [r.defactored for r in suite] == [False, False, True, True]
    assert suite[-1].m_used == 1
