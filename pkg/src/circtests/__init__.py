"""Kernel regression and nonparametric tests for circular data."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    KernelSpec,
    bessel_i0,
    circ_distance,
    circular_variance,
    geodesic_distance,
    kernel_eval,
    mean_direction,
    sample_von_mises,
    wrap_angle,
)
from .estimators import (  # noqa: E402
    RegressionSample,
    cv_select,
    fit,
    fit_circ_lin,
    fit_circ_response,
    local_linear_weights,
    preliminary_param_vector,
    smoothing_matrix_circ_lin,
)
from .calibration import TestReport, chi2_quadform_pvalue  # noqa: E402
from .noeffect import (  # noqa: E402
    noeffect_test_circ_lin,
    noeffect_test_circ_response,
    stat_c1,
    stat_c2,
)
from .ancova import (  # noqa: E402
    GroupedSample,
    ancova_test_circ_lin,
    ancova_test_circ_response,
    dbar,
    estimate_shifts_circular,
    estimate_shifts_linear,
    periodic_pseudoresiduals,
    pooled_variance,
    stat_c3,
    stat_c4,
    stat_c5,
    stat_c6,
)
from .simulation import ScenarioSpec, StudyRow, generate_dataset, rejection_study, rows_to_csv  # noqa: E402

__all__ = [
    "GroupedSample",
    "KernelSpec",
    "RegressionSample",
    "ScenarioSpec",
    "StudyRow",
    "TestReport",
    "ancova_test_circ_lin",
    "ancova_test_circ_response",
    "bessel_i0",
    "chi2_quadform_pvalue",
    "circ_distance",
    "circular_variance",
    "cv_select",
    "dbar",
    "estimate_shifts_circular",
    "estimate_shifts_linear",
    "fit",
    "fit_circ_lin",
    "fit_circ_response",
    "generate_dataset",
    "geodesic_distance",
    "kernel_eval",
    "local_linear_weights",
    "mean_direction",
    "noeffect_test_circ_lin",
    "noeffect_test_circ_response",
    "periodic_pseudoresiduals",
    "pooled_variance",
    "preliminary_param_vector",
    "rejection_study",
    "rows_to_csv",
    "sample_von_mises",
    "smoothing_matrix_circ_lin",
    "stat_c1",
    "stat_c2",
    "stat_c3",
    "stat_c4",
    "stat_c5",
    "stat_c6",
    "wrap_angle",
]
