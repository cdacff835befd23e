"""Principal-components estimation of an approximate factor model."""
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .panel import DemeanedPanel


@dataclass(frozen=True)
class FactorFit:
    """PC estimates on a demeaned ``n x T`` panel.

    ``f_hat`` is ``T x m`` normalised so ``f_hat.T @ f_hat / T = I``,
    ``lambda_hat`` is ``n x m``, and ``resid = dlt - lambda_hat @ f_hat.T``.
    """

    m: int
    f_hat: np.ndarray
    lambda_hat: np.ndarray
    resid: np.ndarray
    ssr: float
    eigenvalues: np.ndarray

    @property
    def common(self):
        return self.lambda_hat @ self.f_hat.T


def _gram_eigh(x):
    try:
        vals, vecs = np.linalg.eigh(x.T @ x)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition failed") from exc
    order = np.argsort(vals, kind="stable")[::-1]
    return vals[order], vecs[:, order]


def pc_fit(dm: DemeanedPanel, m: int) -> FactorFit:
    """Fit ``m`` factors by principal components of the ``T x T`` Gram matrix.

    ``m = 0`` is accepted and returns the panel itself as residuals. Each
    factor's sign is chosen so its loadings sum to a nonnegative number.
    """
    x = dm.dlt
    n, T = x.shape
    if m < 0 or m > min(n, T):
        raise InputError(f"number of factors must lie in [0, {min(n, T)}], got {m}")
    vals, vecs = _gram_eigh(x)
    f = np.sqrt(T) * vecs[:, :m]
    lam = x @ f / T
    flip = np.where(lam.sum(axis=0) < 0, -1.0, 1.0)
    f = f * flip
    lam = lam * flip
    resid = x - lam @ f.T
    ssr = float(np.sum(resid ** 2))
    for a in (f, lam, resid, vals):
        a.setflags(write=False)
    return FactorFit(m, f, lam, resid, ssr, vals)


def ic_p1(dm: DemeanedPanel, m_max: int) -> np.ndarray:
    """``IC_p1(k)`` for ``k = 1 .. m_max`` (Bai and Ng's first criterion)."""
    x = dm.dlt
    n, T = x.shape
    if m_max < 1:
        raise InputError("m_max must be at least 1")
    if m_max > min(n, T):
        raise InputError(f"m_max must not exceed min(n, T) = {min(n, T)}")
    vals, _ = _gram_eigh(x)
    vals = np.clip(vals, 0.0, None)
    total = float(np.sum(x ** 2))
    ks = np.arange(1, m_max + 1)
    # ssr(k) is the sum of the trailing Gram eigenvalues
    ssr = np.array([max(total - vals[:k].sum(), 0.0) for k in ks])
    V = ssr / (n * T)
    penalty = ks * (n + T) / (n * T) * np.log(n * T / (n + T))
    with np.errstate(divide="ignore"):
        return np.log(V) + penalty


def select_num_factors(dm: DemeanedPanel, m_max: int) -> int:
    ic = ic_p1(dm, m_max)
    return int(np.argmin(ic)) + 1
