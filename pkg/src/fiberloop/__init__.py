"""Modeling, Fisher analysis and maximum-likelihood reconstruction for
multi-channel fiber-loop photon-counting detectors."""

__version__ = "0.1.0"

from .calibrate import CalibrationRecord, calibrate, estimate_efficiencies, infer_transmissions
from .detector import (
    DetectorConfig,
    ResponseMatrix,
    channel_efficiencies,
    ideal_detector_probs,
    ideal_response_matrix,
    no_coincidence_probs,
    outcome_probs,
    response_matrix,
    response_matrix_from_efficiencies,
    two_channel_probs,
    zero_arbitrary_prob,
)
from .fisher import (
    FisherReport,
    cr_information,
    equivalent_efficiency,
    exact_information,
    fisher_matrix,
    fisher_report,
    ideal_info_approx,
    loop_info_approx,
)
from .fock import IntensityLaw, PhotonDistribution, hs_distance, poisson_transform, truncated_state
from .reconstruct import EmResult, em_reconstruct, em_step, kl_divergence
from .simulate import EventHistogram, frequencies, sample_events
