"""Cross-sectional dependence pretests (Breusch-Pagan LM and its
bias-corrected standardisation)."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _hot
from .epa import chisq_p, normal_p
from .errors import InputError
from .factors import pc_fit
from .panel import DemeanedPanel, demean_by_unit


@dataclass(frozen=True)
class CdReport:
    name: str
    statistic: float
    distribution: str
    p_value: float
    df: Optional[int] = None
    defactored: bool = False
    m_used: int = 0
    variant: str = ""

    def as_row(self):
        return {
            "test": self.name,
            "statistic": self.statistic,
            "distribution": self.distribution,
            "df": "" if self.df is None else self.df,
            "p_value": self.p_value,
            "defactored": self.defactored,
            "m_used": self.m_used,
            "variant": self.variant,
        }


def _rho_sq(rows):
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InputError("CD tests need an n x T array with n >= 2")
    scale = np.max(np.abs(x), axis=1)
    x = x - x.mean(axis=1, keepdims=True)
    ss = np.einsum("it,it->i", x, x)
    # rounding residue of a constant row counts as zero variance
    bad = np.flatnonzero(ss <= (1e-12 * scale) ** 2 * x.shape[1])
    if bad.size:
        raise InputError(f"zero-variance series at unit {bad[0]}")
    return _hot.corr_sq_sum(x), x.shape


def bp_lm(panel_rows, defactored=False, m_used=0) -> CdReport:
    """LM = T * sum_{i<j} rho_ij^2, chi2 with n(n-1)/2 degrees of freedom."""
    r2, (n, T) = _rho_sq(panel_rows)
    stat = T * float(np.sum(r2))
    q = n * (n - 1) // 2
    return CdReport("BP-LM", stat, "chi_square", chisq_p(stat, q), q, defactored, m_used, "bp")


def _puy_moments(T, k):
    """Exact null mean and std of ``(T-k) rho^2`` for mean-only regressions."""
    Tk = T - k
    if Tk <= 4:
        raise InputError(f"bias-corrected LM needs T - k > 4, got T={T}, k={k}")
    # M_i = M_j = I - 11'/T, so tr(M_i M_j) = tr((M_i M_j)^2) = T - 1
    tr1 = tr2 = T - 1.0
    a2 = 3.0 * (((Tk - 8) * (Tk + 2) + 24) / ((Tk + 2) * (Tk - 2) * (Tk - 4))) ** 2
    a1 = a2 - 1.0 / Tk ** 2
    mu = tr1 / Tk
    var = tr1 ** 2 * a1 + 2.0 * tr2 * a2
    return mu, math.sqrt(var)


def bp_lm_bias_corrected(panel_rows, corrected=True, k=1, defactored=False, m_used=0) -> CdReport:
    """Standardised LM with exact finite-T mean/variance correction.

    With ``corrected=False`` returns the plain standardised LM,
    ``sqrt(1/(n(n-1))) * sum_{i<j} (T rho_ij^2 - 1)``. Both are referred to
    a standard normal with a two-sided p-value.
    """
    r2, (n, T) = _rho_sq(panel_rows)
    if corrected:
        mu, sd = _puy_moments(T, k)
        stat = math.sqrt(2.0 / (n * (n - 1))) * float(np.sum(((T - k) * r2 - mu) / sd))
        variant = f"bias_corrected(k={k})"
    else:
        stat = math.sqrt(1.0 / (n * (n - 1))) * float(np.sum(T * r2 - 1.0))
        variant = "standardized"
    return CdReport("LM-adj" if corrected else "LM-s", stat, "std_normal", normal_p(stat),
                    None, defactored, m_used, variant)


def defactor(dm: DemeanedPanel, m: int) -> np.ndarray:
    """Residuals of an ``m``-factor PC fit (``m = 0`` returns the input)."""
    if m == 0:
        return np.array(dm.dlt)
    return np.array(pc_fit(dm, m).resid)


def cd_suite(panel, m: int = 0):
    """BP-LM and bias-corrected LM on the raw panel and, when ``m > 0``, on the
    ``m``-factor residuals."""
    dm = demean_by_unit(panel) if not isinstance(panel, DemeanedPanel) else panel
    out = [bp_lm(dm.dlt), bp_lm_bias_corrected(dm.dlt)]
    if m > 0:
        res = defactor(dm, m)
        out += [bp_lm(res, True, m), bp_lm_bias_corrected(res, defactored=True, m_used=m)]
    return out
