"""Driven quantum dot-cavity system: Mollow triplet spectra, sideband
linewidths and phonon-rate calibration."""

__version__ = "0.1.0"

from .analysis import (
    analyze,
    extract_rabi,
    fit_four_peaks,
    fit_lower_sideband,
    sideband_intensity_ratio,
)
from .calibration import LinewidthCurve, fit_phonon_rates, predict_linewidths, synthetic_curve
from .dynamics import converge_fock, correlation, propagator, simulate, spectrum, steady_state
from .lorentzian import LorentzianPeak, fit_lorentzians, instrument_convolve
from .model import (
    SystemParams,
    bare_rabi_frequency,
    build_hamiltonian,
    build_liouvillian,
    drive_for_rabi,
    paper_params,
    vacuum_rabi_splitting,
)
from .operators import Operator, SpaceDims, make_ops
from .transition import segmented_regression, transition_locator

__all__ = [
    "LinewidthCurve",
    "LorentzianPeak",
    "Operator",
    "SpaceDims",
    "SystemParams",
    "analyze",
    "bare_rabi_frequency",
    "build_hamiltonian",
    "build_liouvillian",
    "converge_fock",
    "correlation",
    "drive_for_rabi",
    "extract_rabi",
    "fit_four_peaks",
    "fit_lorentzians",
    "fit_lower_sideband",
    "fit_phonon_rates",
    "instrument_convolve",
    "make_ops",
    "paper_params",
    "predict_linewidths",
    "propagator",
    "segmented_regression",
    "sideband_intensity_ratio",
    "simulate",
    "spectrum",
    "steady_state",
    "synthetic_curve",
    "transition_locator",
    "vacuum_rabi_splitting",
]
