from .calibration import (
    ReadoutCalibration,
    bootstrap_population,
    calibrate_readout,
    extract_populations,
    project_values,
)
from .fidelity import EmptyClassError, assignment_matrix, readout_infidelity
from .histogram import freedman_diaconis_bins, histogram_for, make_histogram, make_histogram_2d
from .mixture import (
    FitConvergenceError,
    SingularCovarianceError,
    classify,
    classify_array,
    component_masses,
    expected_counts,
    fit_amplitudes,
    fit_mixture,
    gaussian_pdf_curve,
    overlap,
    snr,
    threshold_populations,
)
from .weights import (
    DegenerateWeightsError,
    LengthMismatchError,
    estimate_orthonormal_pair,
    estimate_weights,
    integrate,
    integrate_many,
    mean_signal,
    orthonormal_pair_from_means,
    weights_from_means,
)

__all__ = [
    # weights
    "estimate_weights",
    "estimate_orthonormal_pair",
    "weights_from_means",
    "orthonormal_pair_from_means",
    "mean_signal",
    "integrate",
    "integrate_many",
    "DegenerateWeightsError",
    "LengthMismatchError",
    # histograms and fits
    "freedman_diaconis_bins",
    "make_histogram",
    "make_histogram_2d",
    "histogram_for",
    "fit_mixture",
    "fit_amplitudes",
    "component_masses",
    "expected_counts",
    "classify",
    "classify_array",
    "threshold_populations",
    "overlap",
    "snr",
    "gaussian_pdf_curve",
    "FitConvergenceError",
    "SingularCovarianceError",
    # fidelity
    "assignment_matrix",
    "readout_infidelity",
    "EmptyClassError",
    # calibration
    "ReadoutCalibration",
    "calibrate_readout",
    "extract_populations",
    "bootstrap_population",
    "project_values",
]
