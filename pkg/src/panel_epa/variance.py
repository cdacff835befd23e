"""Long-run variance estimators for the overall tests and long-run covariance
matrices for the joint tests.

All estimators work on a :class:`~panel_epa.panel.DemeanedPanel` and share
one building block: the kernel-weighted cross-covariance
``G[i, j] = (1/T) sum_{t,s} k_T(|t-s|) x[i, t] x[j, s]``.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _hot
from .errors import (
    DegenerateVarianceError,
    InfeasibleTestError,
    IndefiniteCovarianceError,
    InputError,
    SingularCovarianceError,
)
from .factors import FactorFit
from .kernels import KernelSpec, space_weight_matrix, time_weights
from .panel import DemeanedPanel, DistanceMatrix

SQRT_NT = "sqrt_nT"
SQRT_T = "sqrt_T"

_RATES = {
    "per_unit_avg": SQRT_NT,
    "shac": SQRT_NT,
    "partial_sample": SQRT_NT,
    "dk": SQRT_T,
    "factor": SQRT_T,
}

COND_LIMIT = 1e12
NEG_EIG_TOL = 1e-10


@dataclass(frozen=True)
class ScalarLrv:
    value: float
    estimator: str
    rate: str = None

    def __post_init__(self):
        if self.estimator not in _RATES:
            raise InputError(f"unknown scalar estimator {self.estimator!r}")
        if not (self.value > 0 and math.isfinite(self.value)):
            raise DegenerateVarianceError(
                f"degenerate variance ({self.estimator}): {self.value!r}"
            )
        object.__setattr__(self, "rate", _RATES[self.estimator])


@dataclass(frozen=True)
class CovMatrix:
    omega: np.ndarray
    estimator: str

    @property
    def n(self):
        return self.omega.shape[0]


# ----------------------------------------------------------------- helpers

def _w(spec, T):
    return time_weights(spec, T)


def lrcov(x, spec: KernelSpec) -> np.ndarray:
    """Kernel-weighted long-run cross-covariance matrix of the rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    return _hot.lrcov_matrix(x, _w(spec, x.shape[1]))


def partial_sample_size(n: int) -> int:
    return math.isqrt(n - 1) + 1 if n > 0 else 0


def _dist_array(dist, n):
    d = dist.d if isinstance(dist, DistanceMatrix) else np.asarray(dist, dtype=np.float64)
    if d.shape != (n, n):
        raise InputError(f"distance matrix is {d.shape}, panel has n={n}")
    return d


# ----------------------------------------------------------------- scalar

def lrv_per_unit(dm: DemeanedPanel, spec: KernelSpec, i: int) -> float:
    """HAC long-run variance of unit ``i``. May be <= 0 for truncated kernels."""
    if not 0 <= i < dm.n:
        raise InputError(f"unit index {i} out of range for n={dm.n}")
    return _hot.lrv_series(dm.dlt[i], _w(spec, dm.T))


def lrv_units(dm: DemeanedPanel, spec: KernelSpec) -> np.ndarray:
    return _hot.lrv_rows(dm.dlt, _w(spec, dm.T))


def lrv_avg(dm: DemeanedPanel, spec: KernelSpec) -> ScalarLrv:
    return ScalarLrv(float(np.mean(lrv_units(dm, spec))), "per_unit_avg")


def lrv_shac(dm: DemeanedPanel, spec: KernelSpec, dist) -> ScalarLrv:
    K = space_weight_matrix(spec, _dist_array(dist, dm.n))
    G = lrcov(dm.dlt, spec)
    return ScalarLrv(float(np.sum(K * G)) / dm.n, "shac")


def _partial_sum(x, spec):
    n_p = partial_sample_size(x.shape[0])
    # sum_{i,j<=n_p} G_ij is the long-run variance of the summed rows
    s = x[:n_p].sum(axis=0)
    return _hot.lrv_series(s, _w(spec, x.shape[1])) / n_p


def lrv_partial_sample(dm: DemeanedPanel, spec: KernelSpec) -> ScalarLrv:
    """Uses the first ``ceil(sqrt(n))`` units in stored order."""
    return ScalarLrv(_partial_sum(dm.dlt, spec), "partial_sample")


def lrv_dk(dm: DemeanedPanel, spec: KernelSpec) -> ScalarLrv:
    vbar = dm.dlt.mean(axis=0)
    return ScalarLrv(_hot.lrv_series(vbar, _w(spec, dm.T)), "dk")


def _idio_term(resid, spec, idio, dist):
    n = resid.shape[0]
    if idio == "shac":
        if dist is None:
            raise InputError("idiosyncratic term 'shac' needs a distance matrix")
        K = space_weight_matrix(spec, _dist_array(dist, n))
        return float(np.sum(K * lrcov(resid, spec))) / n ** 2
    if idio == "partial_sample":
        return _partial_sum(resid, spec) / n
    if idio == "diagonal":
        return float(np.sum(_hot.lrv_rows(resid, _w(spec, resid.shape[1])))) / n ** 2
    raise InputError(f"unknown idiosyncratic estimator {idio!r}")


def factor_common_term(fit: FactorFit, spec: KernelSpec) -> float:
    """``(1/(n^2 T)) sum_{i,j,t,s} k_T lambda_i' f_t f_s' lambda_j``."""
    n = fit.lambda_hat.shape[0]
    T = fit.f_hat.shape[0]
    if fit.m == 0:
        return 0.0
    cbar = fit.f_hat @ fit.lambda_hat.sum(axis=0) / n
    return _hot.lrv_series(cbar, _w(spec, T))


def lrv_factor(
    dm: DemeanedPanel,
    spec: KernelSpec,
    fit: FactorFit,
    idio: str = "shac",
    dist: Optional[DistanceMatrix] = None,
) -> ScalarLrv:
    """Factor-based long-run variance: common component plus an
    idiosyncratic term estimated by ``idio`` in {"shac", "partial_sample",
    "diagonal"}."""
    if fit.resid.shape != dm.dlt.shape:
        raise InputError("factor fit does not match the panel dimensions")
    value = factor_common_term(fit, spec) + _idio_term(fit.resid, spec, idio, dist)
    return ScalarLrv(value, "factor")


# ----------------------------------------------------------------- matrices

def cov_omega1(dm: DemeanedPanel, spec: KernelSpec) -> CovMatrix:
    d = lrv_units(dm, spec)
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise DegenerateVarianceError(f"degenerate variance at unit {bad[0]}")
    return CovMatrix(np.diag(d), "omega1")


def cov_omega2(dm: DemeanedPanel, spec: KernelSpec, dist) -> CovMatrix:
    K = space_weight_matrix(spec, _dist_array(dist, dm.n))
    om = K * lrcov(dm.dlt, spec)
    return CovMatrix(0.5 * (om + om.T), "omega2")


def cov_omega3(dm: DemeanedPanel, spec: KernelSpec) -> CovMatrix:
    if dm.n >= dm.T:
        raise InfeasibleTestError(f"J3 infeasible: n >= T (n={dm.n}, T={dm.T})")
    return CovMatrix(lrcov(dm.dlt, spec), "omega3")


def cov_omega4(
    dm: DemeanedPanel,
    spec: KernelSpec,
    fit: FactorFit,
    dist: Optional[DistanceMatrix] = None,
    idio: str = "kernel",
) -> CovMatrix:
    """Factor-based covariance ``Lambda F Lambda' + Sigma``.

    ``idio="kernel"`` weights residual cross-covariances by the space kernel
    (every pair with weight one when ``dist`` is ``None``); ``"diagonal"``
    keeps only the residual long-run variances.
    """
    if fit.resid.shape != dm.dlt.shape:
        raise InputError("factor fit does not match the panel dimensions")
    n = dm.n
    Ge = lrcov(fit.resid, spec)
    if idio == "diagonal":
        sigma = np.diag(np.diag(Ge))
    elif idio == "kernel":
        if dist is None:
            sigma = Ge
        else:
            sigma = space_weight_matrix(spec, _dist_array(dist, n)) * Ge
    else:
        raise InputError(f"unknown idiosyncratic estimator {idio!r}")
    if fit.m:
        Gf = lrcov(fit.f_hat.T, spec)
        om = fit.lambda_hat @ Gf @ fit.lambda_hat.T + sigma
    else:
        om = sigma
    return CovMatrix(0.5 * (om + om.T), "omega4")


def quadratic_form_inverse(omega: np.ndarray, v: np.ndarray) -> float:
    """``v' omega^{-1} v`` for a symmetric ``omega``.

    Eigenvalues below ``-1e-10 * trace`` raise
    :class:`IndefiniteCovarianceError`; smaller negative ones are clipped to
    zero. A clipped spectrum with condition number above ``1e12`` raises
    :class:`SingularCovarianceError`.
    """
    omega = np.asarray(omega, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if omega.ndim == 0 or omega.shape == (1, 1):
        val = float(np.reshape(omega, -1)[0])
        if not val > 0:
            raise SingularCovarianceError("singular covariance")
        return float(np.reshape(v, -1)[0]) ** 2 / val
    sym = 0.5 * (omega + omega.T)
    try:
        vals, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError("singular covariance") from exc
    if not np.all(np.isfinite(vals)):
        raise SingularCovarianceError("singular covariance")
    scale = max(float(np.trace(sym)), 0.0)
    if vals[0] < 0 and vals[0] < -NEG_EIG_TOL * scale:
        raise IndefiniteCovarianceError(
            f"indefinite covariance (min eigenvalue {vals[0]:.3g})"
        )
    vals = np.clip(vals, 0.0, None)
    if vals[0] <= 0 or vals[-1] / vals[0] > COND_LIMIT:
        raise SingularCovarianceError("singular covariance")
    z = vecs.T @ v
    return float(np.sum(z * z / vals))
