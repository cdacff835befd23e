"""Hot numeric kernels.

Every kernel has a numba version (``*_nb``) and a numpy version (``*_np``).
The public names dispatch on :data:`panel_epa._jit.USE_JIT`. Both paths use a
fixed summation order, so repeated calls on the same input are bitwise equal.

Time weights are passed as a vector ``w`` with ``w[h]`` the kernel weight of
lag ``h``; ``w[0]`` is always 1 and trailing zero weights may be dropped.
"""
import numpy as np

from ._jit import USE_JIT, njit


# ---------------------------------------------------------------- numpy path

def lrcov_matrix_np(x, w):
    n, T = x.shape
    out = x @ x.T
    for h in range(1, min(len(w), T)):
        if w[h] == 0.0:
            continue
        c = x[:, h:] @ x[:, :-h].T
        out = out + w[h] * (c + c.T)
    out = out / T
    return 0.5 * (out + out.T)


def lrv_series_np(x, w):
    T = x.shape[0]
    acc = float(x @ x)
    for h in range(1, min(len(w), T)):
        if w[h] == 0.0:
            continue
        acc += 2.0 * w[h] * float(x[h:] @ x[:-h])
    return acc / T


def lrv_rows_np(x, w):
    T = x.shape[1]
    acc = np.einsum("it,it->i", x, x)
    for h in range(1, min(len(w), T)):
        if w[h] == 0.0:
            continue
        acc = acc + 2.0 * w[h] * np.einsum("it,it->i", x[:, h:], x[:, :-h])
    return acc / T


def corr_sq_sum_np(x):
    # x: demeaned rows with nonzero norms
    z = x / np.sqrt(np.einsum("it,it->i", x, x))[:, None]
    r = z @ z.T
    iu = np.triu_indices(x.shape[0], k=1)
    return r[iu] ** 2


# ---------------------------------------------------------------- numba path

@njit(cache=True)
def _band_smooth_nb(x, w):
    # y[i, t] = sum_s w(|t - s|) x[i, s], one pass over the band
    n, T = x.shape
    L = min(w.shape[0], T)
    y = x.copy()
    for h in range(1, L):
        wh = w[h]
        if wh == 0.0:
            continue
        for i in range(n):
            for t in range(h, T):
                y[i, t] += wh * x[i, t - h]
                y[i, t - h] += wh * x[i, t]
    return y


@njit(cache=True)
def lrcov_matrix_nb(x, w):
    T = x.shape[1]
    out = np.dot(_band_smooth_nb(x, w), x.T) / T
    return 0.5 * (out + out.T)


@njit(cache=True)
def lrv_series_nb(x, w):
    T = x.shape[0]
    L = min(w.shape[0], T)
    acc = 0.0
    for t in range(T):
        acc += x[t] * x[t]
    for h in range(1, L):
        wh = w[h]
        if wh == 0.0:
            continue
        s = 0.0
        for t in range(h, T):
            s += x[t] * x[t - h]
        acc += 2.0 * wh * s
    return acc / T


@njit(cache=True)
def lrv_rows_nb(x, w):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = lrv_series_nb(x[i], w)
    return out


@njit(cache=True)
def corr_sq_sum_nb(x):
    n, T = x.shape
    z = np.empty((n, T))
    for i in range(n):
        s = 0.0
        for t in range(T):
            s += x[i, t] * x[i, t]
        z[i] = x[i] / np.sqrt(s)
    r = np.dot(z, z.T)
    out = np.empty(n * (n - 1) // 2)
    k = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            out[k] = r[i, j] * r[i, j]
            k += 1
    return out


# ---------------------------------------------------------------- dispatch

def _prep(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def lrcov_matrix(x, w):
    """``(1/T) sum_{t,s} w(|t-s|) x_it x_js`` for all unit pairs (n x n)."""
    x, w = _prep(x), _prep(w)
    if USE_JIT:
        return lrcov_matrix_nb(x, w)
    return lrcov_matrix_np(x, w)


def lrv_series(x, w):
    """Kernel long-run variance ``(1/T) sum_{t,s} w(|t-s|) x_t x_s``."""
    x, w = _prep(x), _prep(w)
    if USE_JIT:
        return float(lrv_series_nb(x, w))
    return lrv_series_np(x, w)


def lrv_rows(x, w):
    """:func:`lrv_series` applied to every row of ``x``."""
    x, w = _prep(x), _prep(w)
    if USE_JIT:
        return lrv_rows_nb(x, w)
    return lrv_rows_np(x, w)


def corr_sq_sum(x):
    """Squared pairwise correlations ``rho_ij**2`` for ``i < j`` (row-major)."""
    x = _prep(x)
    if USE_JIT:
        return corr_sq_sum_nb(x)
    return corr_sq_sum_np(x)
