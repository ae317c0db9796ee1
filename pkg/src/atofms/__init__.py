"""Overlapped-scan time-of-flight mass spectrometry toolkit.

Simulates traces in which randomly fired scans overlap, detects ion-impact
events, reconstructs the underlying sparse spectrum by l1-regularized
maximum likelihood, and scores reconstructions against ground truth.
"""

from .baselines import SpectrumEstimate, average_scans, naive_atof
from .config import RunConfig
from .estimators import (
    AtofReconstructor,
    AveragingReconstructor,
    NaiveAtofReconstructor,
)
from .evaluate import (
    Calibration,
    InsufficientDataError,
    MatchReport,
    curve_sweep,
    estimate_single_ion_weight,
    iteration_curve,
    match_events,
    match_peaks,
    pick_peaks,
    width_intensity_cdf,
)
from .experiment import (
    Experiment,
    empirical_truth_spectrum,
    ground_truth_from_config,
    simulate_from_config,
)
from .model import (
    LikelihoodEvalContext,
    ModelParams,
    bessel_i_scaled,
    event_density,
    log_bessel_ratio_term,
    nll,
    nll_gradient,
)
from .preprocess import DetectionParams, Event, EventList, detect_events, events_to_context
from .schedule import (
    FiringSchedule,
    dense_adjacency,
    event_neighbors,
    generate_schedule,
    sample_neighbors,
)
from .simulate import (
    Acquisition,
    GroundTruthSpec,
    Trace,
    acquisition_stats,
    assemble_trace,
    draw_scan,
    expected_spectrum,
    gaussian_kernel,
    rate_vector_of,
    simulate_acquisition,
    simulate_scans,
    synthetic_peaks,
)
from .solver import (
    SolverParams,
    SolverState,
    assign_events,
    ista_solve,
    reconstruct,
    soft_threshold,
)

__version__ = "0.1.0"
