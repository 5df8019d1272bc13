"""
Detection analysis and joint waveform/filter design for one-bit MIMO radar.

The closed-form QSINR lives in the ``qsinr`` submodule; it is not re-exported
here so that ``onebit_mimo.qsinr`` keeps referring to the module.
"""

from .files import load_scene, save_scene
from .greet import GreetConfig, greet, mvdr_filter
from .montecarlo import (McConfig, empirical_pd, empirical_pf, moment_error_mc, qsinr_mc,
                         sigma_in_sq_mc)
from .qsinr import (Filter, detection_report, pd_nft, pd_rft, pf, phi_matrix, rho,
                    sigma_in_sq, threshold_for_pf, xi_matrix)
from .radar_model import (ArrayGeometry, InterferenceSource, RadarScene, TargetModel, Waveform,
                          matched_phase_onebit_waveform, phase_matched_waveform,
                          transmit_beampattern)

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry", "Filter", "GreetConfig", "InterferenceSource", "McConfig", "RadarScene",
    "TargetModel", "Waveform", "detection_report", "empirical_pd", "empirical_pf", "greet",
    "load_scene", "matched_phase_onebit_waveform", "moment_error_mc", "mvdr_filter", "pd_nft",
    "pd_rft", "pf", "phase_matched_waveform", "phi_matrix", "qsinr_mc", "rho", "save_scene",
    "sigma_in_sq", "sigma_in_sq_mc", "threshold_for_pf", "transmit_beampattern", "xi_matrix",
]
