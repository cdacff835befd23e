"""Panel-data tests of equal predictive ability."""
from .errors import (
    DegenerateVarianceError,
    EPAError,
    IndefiniteCovarianceError,
    InfeasibleTestError,
    InputError,
    NumericalError,
    SingularCovarianceError,
)
from .panel import (
    DemeanedPanel,
    DistanceMatrix,
    ErrorPanel,
    LossPanel,
    demean_by_unit,
    grand_mean,
    loss_differential,
)
from .kernels import KernelSpec, default_space_bandwidth, space_weight, time_weight
from .factors import FactorFit, pc_fit, select_num_factors
from .epa import (
    TestReport,
    chisq_p,
    dm_unit_test,
    joint_test,
    normal_p,
    overall_test,
    standardized_joint,
)
from .crossdep import CdReport, bp_lm, bp_lm_bias_corrected, defactor

__version__ = "0.1.0"
