import math

import numpy as np
import pytest
from scipy.signal import find_peaks

from mollow_cqed.analysis import (
    MissingSidebandError,
    analyze,
    extract_rabi,
    fit_four_peaks,
    lower_sideband_fwhm,
    sideband_intensity_ratio,
    sideband_window,
)
from mollow_cqed.dynamics import simulate
from mollow_cqed.lorentzian import LorentzianFitResult, LorentzianPeak, fit_lorentzians
from mollow_cqed.model import SystemParams, build_liouvillian, drive_for_rabi, paper_params


def driven(delta_cx, omega, **kw):
    p = paper_params(delta_cx, frame="displaced", **kw)
    return p.with_(drive_J=drive_for_rabi(p, omega))


def fit_result(peaks, labels=None):
    return LorentzianFitResult(
        peaks=tuple(peaks), baseline=0.0, residual_norm=0.0, converged=True,
        iterations=0, parameter_uncertainties=np.zeros(3 * len(peaks) + 1), labels=labels,
    )


def sideband_eigenvalues(p, near):
    """(frequency, FWHM) of the narrowest Liouvillian mode within 2 GHz of ``near``."""
    ev = np.linalg.eigvals(build_liouvillian(p).matrix)
    freq, width = ev.imag / (2 * math.pi), -ev.real / math.pi
    sel = np.abs(freq - near) < 2.0
    j = np.argmin(np.where(sel, width, np.inf))
    return freq[j], width[j]


def test_rabi_from_symmetric_sidebands():
    fit = fit_result([LorentzianPeak(-100, 5, 1), LorentzianPeak(0, 5, 1), LorentzianPeak(100, 5, 1)])
    assert extract_rabi(fit) == pytest.approx(100.0)


def test_rabi_from_pulled_sidebands():
    fit = fit_result([LorentzianPeak(-40, 5, 1), LorentzianPeak(44, 5, 1)])
    assert extract_rabi(fit) == pytest.approx(42.0)


def test_rabi_label_exchange():
    lo, hi = LorentzianPeak(-40, 5, 1), LorentzianPeak(44, 5, 2)
    a = fit_result([lo, hi], labels=("lower", "upper"))
    b = fit_result([hi, lo], labels=("lower", "upper"))
    assert extract_rabi(a) == extract_rabi(b)
    assert sideband_intensity_ratio(a) == sideband_intensity_ratio(b) == 2.0


def test_missing_sideband():
    with pytest.raises(MissingSidebandError):
        extract_rabi(fit_result([LorentzianPeak(3, 5, 1), LorentzianPeak(44, 5, 1)]))
    lo, hi = LorentzianPeak(-40, 5, 0.0), LorentzianPeak(44, 5, 1)
    with pytest.raises(MissingSidebandError):
        sideband_intensity_ratio(fit_result([lo, hi], labels=("lower", "upper")))


def test_sideband_window():
    assert sideband_window(40.0) == (-60.0, -20.0)


def test_mollow_rabi_matches_correlation_frequency():
    p = SystemParams(
        g=0.0, uncoupled_ok=True, drive_target="qubit", drive_qubit=20.0, gamma=0.16,
        gamma_d=0.0, gamma_ph_ads=0.0, gamma_ph_asp=0.0, delta_c=0.0, fock_dim=2,
    )
    sim = simulate(p)
    fit = fit_lorentzians(sim.spectrum, 3, window=(-25, 25))
    peaks, _ = find_peaks(np.abs(sim.correlation.values))
    f_corr = 1 / np.mean(np.diff(np.asarray(sim.correlation.tau)[peaks]))
    assert extract_rabi(fit) == pytest.approx(f_corr, rel=0.02)


@pytest.mark.parametrize("omega", [30.0, 58.0])
def test_sideband_matches_regression_eigenfrequency(omega):
    p = driven(42.0, omega)
    a = analyze(simulate(p))
    f_low, _ = sideband_eigenvalues(p, -a.omega_low)
    assert a.omega_low == pytest.approx(-f_low, rel=0.02)


@pytest.mark.parametrize("omega", [15.0, 40.0, 70.0])
def test_lower_linewidth_vs_eigenvalue_oracle(omega):
    p = driven(42.0, omega)
    sim = simulate(p)
    a = analyze(sim)
    _, width = sideband_eigenvalues(p, -a.omega_low)
    assert a.lower_fwhm == pytest.approx(width, rel=0.1)


def test_four_peak_fit_isolates_components():
    a = analyze(simulate(driven(42.0, 58.0)))
    fit = a.full_fit
    assert fit.converged
    assert fit.peak("lower").center == pytest.approx(-58.0, abs=3.0)
    assert fit.peak("upper").center == pytest.approx(58.0, abs=3.0)
    assert abs(fit.peak("central").center) < 3.0
    assert fit.peak("cavity").center == 42.0 and fit.peak("cavity").fwhm == 36.0
    assert all(pk.area > 0 for pk in fit.peaks)


def test_held_cavity_component():
    sim = simulate(driven(42.0, 40.0))
    cav = LorentzianPeak(42.0, 36.0, 0.002)
    fit = fit_four_peaks(sim.spectrum, sim.params, 40.0, cavity=cav)
    assert fit.peak("cavity") == cav


def test_far_detuned_cavity_gives_symmetric_triplet():
    p = driven(3000.0, 20.0)
    sim = simulate(p, omega=np.arange(-40, 40.0001, 0.2))
    init = [LorentzianPeak(c, 2.0, 1e-3) for c in (-20.0, 0.0, 20.0)]
    fit = fit_lorentzians(sim.spectrum, 3, init=init)
    assert sideband_intensity_ratio(fit) == pytest.approx(1.0, abs=0.05)


def test_undriven_has_no_sideband():
    assert lower_sideband_fwhm(simulate(paper_params(42.0, frame="displaced"))) is None


def test_intensity_asymmetry_sign():
    # the sideband on the cavity side is the brighter one
    a = analyze(simulate(driven(42.0, 40.0)))
    assert a.area_high > a.area_low


@pytest.mark.xfail(
    strict=True,
    reason="simulated ratio peaks where the upper sideband reaches the cavity (Omega ~ 35-40 GHz), "
    "not at the measured 57.8 GHz drive; see the decisions ledger",
)
def test_ratio_maximal_at_measured_drive():
    omegas = np.linspace(15, 75, 13)
    ratios = [analyze(simulate(driven(42.0, w))).area_high / analyze(simulate(driven(42.0, w))).area_low for w in omegas]
    near = int(np.argmin(np.abs(omegas - 57.8)))
    assert int(np.argmax(ratios)) == near
