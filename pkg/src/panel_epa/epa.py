"""Equal-predictive-ability test statistics for panels.

Overall tests (``S1`` .. ``S4``) compare the grand mean loss differential
with zero; joint tests (``J1`` .. ``J4``) test that every unit mean is zero.
``Z*`` statistics are the centred and scaled joint statistics.

Guidance from simulation evidence: ``S3`` is the safest overall test for
moderate and large ``T``; ``J3`` is the preferred joint test when ``T`` is
large relative to ``n``.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from scipy import special

from .errors import DegenerateVarianceError, InputError
from .factors import FactorFit
from .kernels import KernelSpec
from .panel import DistanceMatrix, LossPanel, demean_by_unit, grand_mean
from . import variance as V

P_FLOOR = 1e-300

OVERALL = ("S1", "S2", "S2_partial", "S3", "S4")
JOINT = ("J1", "J2", "J3", "J4")


@dataclass(frozen=True)
class TestReport:
    name: str
    statistic: float
    distribution: str
    p_value: float
    df: Optional[int] = None
    two_sided: bool = True
    variance_provenance: str = ""
    notes: Tuple[str, ...] = field(default_factory=tuple)

    __test__ = False  # keep pytest from collecting this class

    def as_row(self):
        return {
            "test": self.name,
            "statistic": self.statistic,
            "distribution": self.distribution,
            "df": "" if self.df is None else self.df,
            "p_value": self.p_value,
            "two_sided": self.two_sided,
            "variance": self.variance_provenance,
            "notes": "; ".join(self.notes),
        }


def normal_p(statistic: float, two_sided: bool = True) -> float:
    s = float(statistic)
    if two_sided:
        return float(special.erfc(abs(s) / math.sqrt(2.0)))
    return float(special.ndtr(-s))


def chisq_p(statistic: float, df: int) -> float:
    if df < 1:
        raise InputError("chi-square degrees of freedom must be >= 1")
    x = max(float(statistic), 0.0)
    return max(float(special.gammaincc(df / 2.0, x / 2.0)), P_FLOOR)


def _normal_report(name, stat, provenance, notes=()):
    return TestReport(name, float(stat), "std_normal", normal_p(stat), None, True,
                      provenance, tuple(notes))


def dm_unit_test(panel: LossPanel, spec: KernelSpec, i: int) -> TestReport:
    """Single-unit DM statistic ``sqrt(T) * mean_i / sigma_i``."""
    dm = demean_by_unit(panel)
    s2 = V.lrv_per_unit(dm, spec, i)
    if not s2 > 0:
        raise DegenerateVarianceError(f"degenerate variance at unit {i}")
    stat = math.sqrt(panel.T) * float(dm.unit_means[i]) / math.sqrt(s2)
    return _normal_report(f"DM[{panel.unit_labels[i]}]", stat, "per_unit")


def overall_test(
    panel: LossPanel,
    spec: KernelSpec,
    estimator: str = "S3",
    dist: Optional[DistanceMatrix] = None,
    fit: Optional[FactorFit] = None,
    idio: str = "shac",
) -> TestReport:
    """Overall EPA test.

    ``estimator`` selects the long-run variance: ``S1`` per-unit average,
    ``S2`` spatial HAC (needs ``dist``), ``S2_partial`` partial sample,
    ``S3`` Driscoll-Kraay, ``S4`` factor based (needs ``fit``; ``idio`` in
    {"shac", "partial_sample", "diagonal"}).
    """
    dm = demean_by_unit(panel)
    if estimator == "S1":
        lrv = V.lrv_avg(dm, spec)
    elif estimator == "S2":
        if dist is None:
            raise InputError("S2 needs a distance matrix")
        lrv = V.lrv_shac(dm, spec, dist)
    elif estimator == "S2_partial":
        lrv = V.lrv_partial_sample(dm, spec)
    elif estimator == "S3":
        lrv = V.lrv_dk(dm, spec)
    elif estimator == "S4":
        if fit is None:
            raise InputError("S4 needs a FactorFit")
        lrv = V.lrv_factor(dm, spec, fit, idio, dist)
    else:
        raise InputError(f"unknown overall estimator {estimator!r}")
    scale = panel.n * panel.T if lrv.rate == V.SQRT_NT else panel.T
    stat = grand_mean(panel) / (math.sqrt(lrv.value) / math.sqrt(scale))
    prov = lrv.estimator if estimator != "S4" else f"factor/{idio}"
    return _normal_report(estimator, stat, prov)


def joint_statistic(panel: LossPanel, omega: np.ndarray) -> float:
    """``T * m' omega^{-1} m`` with ``m`` the vector of unit means."""
    return panel.T * V.quadratic_form_inverse(omega, panel.unit_means())


def joint_test(
    panel: LossPanel,
    spec: KernelSpec,
    estimator: str = "J3",
    dist: Optional[DistanceMatrix] = None,
    fit: Optional[FactorFit] = None,
    idio: str = "kernel",
    omega: Optional[np.ndarray] = None,
) -> TestReport:
    """Joint EPA test against ``chi2(n)``.

    Pass ``omega`` to evaluate the quadratic form against a caller-supplied
    covariance (``estimator`` is then only used as the report name).
    """
    dm = demean_by_unit(panel)
    notes = []
    if omega is None:
        if estimator == "J1":
            omega = V.cov_omega1(dm, spec).omega
        elif estimator == "J2":
            if dist is None:
                raise InputError("J2 needs a distance matrix")
            omega = V.cov_omega2(dm, spec, dist).omega
        elif estimator == "J3":
            omega = V.cov_omega3(dm, spec).omega
        elif estimator == "J4":
            if fit is None:
                raise InputError("J4 needs a FactorFit")
            omega = V.cov_omega4(dm, spec, fit, dist, idio).omega
        else:
            raise InputError(f"unknown joint estimator {estimator!r}")
    if estimator in ("J2", "J4"):
        notes.append("chi2(n) reference distribution is not guaranteed for this estimator")
    stat = joint_statistic(panel, omega)
    n = panel.n
    return TestReport(estimator, stat, "chi_square", chisq_p(stat, n), n, False,
                      "omega" + estimator[1:], tuple(notes))


def standardized_joint(j_report: TestReport, n: Optional[int] = None,
                       two_sided: bool = False) -> TestReport:
    """``(J - n) / sqrt(2n)`` against a standard normal.

    The default p-value is upper-tail: only large ``J`` is evidence against
    the null, matching the chi-square test it standardises.
    """
    if n is None:
        n = j_report.df
    z = (j_report.statistic - n) / math.sqrt(2 * n)
    name = "Z" + j_report.name[1:] if j_report.name.startswith("J") else "Z"
    return replace(
        j_report,
        name=name,
        statistic=z,
        distribution="std_normal",
        p_value=normal_p(z, two_sided),
        df=None,
        two_sided=two_sided,
    )
