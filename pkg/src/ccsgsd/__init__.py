"""Group sequential designs for nested populations using the complete correlation structure."""

from .closed_test import (
    AnalysisData,
    IntersectionBoundsTable,
    SubsetBounds,
    TestOutcome,
    algorithm1_plan,
    algorithm1_update,
    algorithm2_update,
    algorithm3_update,
    closed_test,
    closed_test_batch,
    plan,
    subset_level_check,
    union_probability,
    update,
)
from .correlation import InformationTable, StatIndex, ccs_matrix, ccs_matrix_planned, shared_control_matrix
from .design import (
    DesignReport,
    DesignSpec,
    design_report,
    drift,
    enrollment_for_events,
    expected_events,
    hr_bound,
    population_power,
    prevalence_sweep,
    required_events,
)
from .estimator import CCSGroupSequentialDesign
from .exceptions import (
    CCSError,
    CorrelationError,
    DataError,
    InputError,
    NestingError,
    NumericalError,
    SequencingError,
)
from .graph import MultiplicityGraph
from .gs import GsBounds, bounds_from_spending, crossing_prob, nominal_sum
from .mvn import ProbabilityEstimate, normal_cdf, normal_quantile, rect_prob, upper_rect_prob
from .simulation import SimConfig, SimResult, estimate_fwer, estimate_power, sample_statistics
from .spending import SpendingSpec, spend

__version__ = "0.1.0"
