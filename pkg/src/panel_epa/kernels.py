"""Time and space kernels and bandwidth rules."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError

TIME_KERNELS = ("bartlett", "truncated")
SPACE_KERNELS = ("bartlett", "truncated", "unit")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice and bandwidths for space-time HAC estimation.

    Parameters
    ----------
    time_kernel : {"bartlett", "truncated"}
    bandwidth : int
        Time bandwidth ``l_T``; the Bartlett weight at lag ``h`` is
        ``1 - h / (l_T + 1)``. ``0`` means no autocovariances are used.
    space_kernel : {"bartlett", "truncated", "unit"}
    distance_threshold : float, optional
        Space bandwidth ``d_n``. When ``None`` the ``ceil(n ** 0.25)`` rule is
        applied at evaluation time.
    """

    time_kernel: str = "bartlett"
    bandwidth: int = 0
    space_kernel: str = "bartlett"
    distance_threshold: Optional[float] = None

    def __post_init__(self):
        if self.time_kernel not in TIME_KERNELS:
            raise InputError(f"unknown time kernel {self.time_kernel!r}")
        if self.space_kernel not in SPACE_KERNELS:
            raise InputError(f"unknown space kernel {self.space_kernel!r}")
        if int(self.bandwidth) != self.bandwidth or self.bandwidth < 0:
            raise InputError("time bandwidth must be a nonnegative integer")
        object.__setattr__(self, "bandwidth", int(self.bandwidth))
        if self.distance_threshold is not None and not self.distance_threshold > 0:
            raise InputError("distance threshold must be positive")

    def threshold_for(self, n):
        if self.distance_threshold is not None:
            return float(self.distance_threshold)
        return default_space_bandwidth(n)


def time_weight(spec: KernelSpec, lag: int) -> float:
    if lag < 0:
        raise InputError("lag must be nonnegative")
    l_T = spec.bandwidth
    if spec.time_kernel == "bartlett":
        return max(0.0, 1.0 - lag / (l_T + 1))
    return 1.0 if lag <= l_T else 0.0


def time_weights(spec: KernelSpec, T: int) -> np.ndarray:
    """Weights for lags ``0 .. min(l_T, T - 1)``; all later lags weigh zero."""
    L = min(spec.bandwidth, max(T - 1, 0))
    return np.array([time_weight(spec, h) for h in range(L + 1)])


def space_weight(spec: KernelSpec, distance, threshold: Optional[float] = None):
    """Space kernel at ``distance``; scalar in, float out, array in, array out."""
    d = np.asarray(distance, dtype=np.float64)
    if np.any(d < 0):
        raise InputError("distance must be nonnegative")
    if threshold is None:
        threshold = spec.distance_threshold
    if spec.space_kernel == "unit":
        out = np.ones_like(d)
    else:
        if threshold is None or not threshold > 0:
            raise InputError("space kernel needs a positive distance threshold")
        if spec.space_kernel == "bartlett":
            out = np.maximum(0.0, 1.0 - d / threshold)
        else:
            out = (d <= threshold).astype(np.float64)
    return float(out) if out.ndim == 0 else out


def space_weight_matrix(spec: KernelSpec, dist) -> np.ndarray:
    """Kernel weights ``k_S(d_ij / d_n)`` for a whole distance matrix."""
    d = dist.d if hasattr(dist, "d") else np.asarray(dist, dtype=np.float64)
    return space_weight(spec, d, spec.threshold_for(d.shape[0]))


def default_space_bandwidth(n: int) -> float:
    if n < 1:
        raise InputError("n must be positive")
    # exact integer fourth-root ceiling; avoids 16 ** 0.25 -> 2.0000000000000004
    r = math.isqrt(math.isqrt(n))
    while r ** 4 < n:
        r += 1
    return float(r)


def default_time_bandwidth(T: int) -> int:
    """``floor(T ** (1/3))``, the usual HAC rule of thumb."""
    r = int(round(T ** (1.0 / 3.0)))
    while r ** 3 > T:
        r -= 1
    while (r + 1) ** 3 <= T:
        r += 1
    return r
