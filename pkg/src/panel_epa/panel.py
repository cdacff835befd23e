"""Panels of forecast errors and loss differentials.

All arrays are stored dense, unit-major (``n x T``) and frozen read-only on
construction.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import InputError

LossFn = Callable[[np.ndarray], np.ndarray]


def _frozen(a, name):
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != 2:
        raise InputError(f"{name} must be a 2-d (n x T) array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_finite(arr, name):
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        i, t = bad[0]
        raise InputError(f"non-finite value in {name} at (i={i}, t={t})")


def _labels(labels, k, prefix):
    if labels is None:
        return tuple(f"{prefix}{j}" for j in range(k))
    labels = tuple(str(s) for s in labels)
    if len(labels) != k:
        raise InputError(f"expected {k} {prefix} labels, got {len(labels)}")
    return labels


@dataclass(frozen=True)
class ErrorPanel:
    """Forecast errors of two forecasters for ``n`` units over ``T`` periods."""

    e1: np.ndarray
    e2: np.ndarray
    unit_labels: Sequence[str] = None
    time_labels: Sequence[str] = None

    def __post_init__(self):
        e1 = _frozen(self.e1, "e1")
        e2 = _frozen(self.e2, "e2")
        if e1.shape != e2.shape:
            raise InputError(f"e1 and e2 shapes differ: {e1.shape} vs {e2.shape}")
        if e1.shape[0] < 1 or e1.shape[1] < 1:
            raise InputError("panel needs n >= 1 and T >= 1")
        object.__setattr__(self, "e1", e1)
        object.__setattr__(self, "e2", e2)
        object.__setattr__(self, "unit_labels", _labels(self.unit_labels, e1.shape[0], "unit"))
        object.__setattr__(self, "time_labels", _labels(self.time_labels, e1.shape[1], "t"))

    @property
    def n(self):
        return self.e1.shape[0]

    @property
    def T(self):
        return self.e1.shape[1]


@dataclass(frozen=True)
class LossPanel:
    """Loss differentials ``dl[i, t] = L(e1[i, t]) - L(e2[i, t])``."""

    dl: np.ndarray
    loss_kind: str = "custom"
    unit_labels: Sequence[str] = None
    time_labels: Sequence[str] = None

    def __post_init__(self):
        dl = _frozen(self.dl, "dl")
        if dl.shape[0] < 1 or dl.shape[1] < 1:
            raise InputError("panel needs n >= 1 and T >= 1")
        _check_finite(dl, "dl")
        if self.loss_kind not in ("absolute", "quadratic", "custom"):
            raise InputError(f"unknown loss_kind {self.loss_kind!r}")
        object.__setattr__(self, "dl", dl)
        object.__setattr__(self, "unit_labels", _labels(self.unit_labels, dl.shape[0], "unit"))
        object.__setattr__(self, "time_labels", _labels(self.time_labels, dl.shape[1], "t"))

    @property
    def n(self):
        return self.dl.shape[0]

    @property
    def T(self):
        return self.dl.shape[1]

    def unit_means(self):
        return self.dl.mean(axis=1)


@dataclass(frozen=True)
class DemeanedPanel:
    """Loss differentials with each unit's time mean removed."""

    dlt: np.ndarray
    unit_means: np.ndarray

    def __post_init__(self):
        dlt = _frozen(self.dlt, "dlt")
        means = np.array(self.unit_means, dtype=np.float64).reshape(-1)
        if means.shape[0] != dlt.shape[0]:
            raise InputError("unit_means length must equal the number of rows")
        means.setflags(write=False)
        object.__setattr__(self, "dlt", dlt)
        object.__setattr__(self, "unit_means", means)

    @property
    def n(self):
        return self.dlt.shape[0]

    @property
    def T(self):
        return self.dlt.shape[1]


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative ``n x n`` distances with a zero diagonal."""

    d: np.ndarray
    labels: Optional[Sequence[str]] = field(default=None)

    def __post_init__(self):
        d = _frozen(self.d, "d")
        if d.shape[0] != d.shape[1]:
            raise InputError(f"distance matrix must be square, got {d.shape}")
        _check_finite(d, "distance matrix")
        if np.any(d < 0):
            raise InputError("distances must be nonnegative")
        if not np.array_equal(d, d.T):
            raise InputError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0):
            raise InputError("distance matrix must have a zero diagonal")
        object.__setattr__(self, "d", d)
        if self.labels is not None:
            object.__setattr__(self, "labels", _labels(self.labels, d.shape[0], "unit"))

    @property
    def n(self):
        return self.d.shape[0]


_LOSSES = {
    "absolute": np.abs,
    "quadratic": np.square,
}


def loss_differential(errors: ErrorPanel, loss_kind: Union[str, LossFn] = "quadratic") -> LossPanel:
    """Pointwise loss differential of two forecast-error panels.

    ``loss_kind`` is ``"absolute"``, ``"quadratic"`` or a callable applied
    elementwise to each error array (tagged ``custom``).
    """
    for name, arr in (("e1", errors.e1), ("e2", errors.e2)):
        _check_finite(arr, name)
    if callable(loss_kind):
        fn, kind = loss_kind, "custom"
    else:
        try:
            fn, kind = _LOSSES[loss_kind], loss_kind
        except KeyError:
            raise InputError(f"unknown loss_kind {loss_kind!r}") from None
    l1 = np.asarray(fn(errors.e1), dtype=np.float64)
    l2 = np.asarray(fn(errors.e2), dtype=np.float64)
    if l1.shape != errors.e1.shape or l2.shape != errors.e2.shape:
        raise InputError("custom loss must be pointwise (shape preserving)")
    dl = l1 - l2
    _check_finite(dl, "loss differential")
    return LossPanel(dl, kind, errors.unit_labels, errors.time_labels)


def demean_by_unit(panel: Union[LossPanel, DemeanedPanel]) -> DemeanedPanel:
    if isinstance(panel, DemeanedPanel):
        x, base = panel.dlt, panel.unit_means
    else:
        x, base = panel.dl, 0.0
    means = x.mean(axis=1)
    return DemeanedPanel(x - means[:, None], means + base)


def grand_mean(panel: LossPanel) -> float:
    return float(panel.dl.mean())
