"""Sideband extraction from simulated Mollow spectra.

Two fit protocols are used:

* lower sideband: two Lorentzians (sideband + central line) plus a constant
  on the window ``[-1.5 h, -0.5 h]`` around the expected sideband position
  ``-h``; the central line is pinned to the laser frequency.  The window
  depends only on the hint so the extracted width is a smooth function of
  the model parameters;
* full spectrum: four labelled Lorentzians (lower, central, upper, cavity).
  The cavity line sits at (delta_c, kappa) and only its area is fitted, or
  it is held completely fixed inside the cavity exclusion window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Simulation, SpectrumTrace
from .lorentzian import LorentzianFitResult, LorentzianPeak, fit_lorentzians
from .model import SystemParams, bare_rabi_frequency

FOUR_LABELS = ("lower", "central", "upper", "cavity")


class MissingSidebandError(ValueError):
    pass


def sideband_window(hint: float) -> tuple[float, float]:
    h = abs(hint)
    return (-1.5 * h, -0.5 * h)


def fit_lower_sideband(trace: SpectrumTrace, hint: float) -> LorentzianFitResult:
    """Two-Lorentzian fit of the lower sideband expected near ``-hint``.

    The central line only enters through its tail, so its seed is matched to
    the sample nearest the laser; two seed widths are tried and the better
    fit (converged first, then residual) is kept.  Seeds use in-window
    samples only, so any grid covering the window gives the same result.
    """
    if not hint > 0:
        raise MissingSidebandError("no drive: there is no sideband to fit")
    lo, hi = sideband_window(hint)
    omega = np.asarray(trace.omega)
    sel = (omega >= lo) & (omega <= hi)
    if sel.sum() < 15:
        raise MissingSidebandError(f"fewer than 15 samples in sideband window [{lo:.3g}, {hi:.3g}]")
    w, v = omega[sel], np.asarray(trace.values)[sel]
    i0 = int(np.argmax(v))
    h0 = max(v[i0] - v.min(), 1e-300)
    f0 = max(0.2 * hint, 4 * trace.spacing)
    j = int(np.argmin(np.abs(w)))
    edge, tail = abs(w[j]), max(float(v[j]), 1e-300)
    best = None
    for fc in (hint, 2 * hint):
        hc = tail * (1 + (2 * edge / fc) ** 2)
        init = [
            LorentzianPeak(float(w[i0]), f0, h0 * math.pi * f0 / 2),
            LorentzianPeak(0.0, fc, hc * math.pi * fc / 2),
        ]
        fit = fit_lorentzians(
            (w, v), 2, init=init, baseline=0.0, labels=("lower", "central"), hold=[(1, "center")]
        )
        if best is None or (fit.converged, -fit.residual_norm) > (best.converged, -best.residual_norm):
            best = fit
    return best


def rabi_hint(sim: Simulation) -> float:
    return bare_rabi_frequency(sim.params)


def lower_sideband_fwhm(sim: Simulation, hint: float | None = None) -> float | None:
    """FWHM of the lower sideband, or None for an undriven system."""
    h = rabi_hint(sim) if hint is None else hint
    if h <= 0:
        return None
    return fit_lower_sideband(sim.spectrum, h).peak("lower").fwhm


def fit_four_peaks(
    trace: SpectrumTrace,
    params: SystemParams,
    hint: float,
    cavity: LorentzianPeak | None = None,
) -> LorentzianFitResult:
    """Lower/central/upper sideband plus cavity component.

    With ``cavity`` given, that component is held fixed (used inside the
    window where the upper sideband sits on the cavity resonance).
    """
    h = abs(hint)
    omega = np.asarray(trace.omega)
    vals = np.asarray(trace.values)

    def height_at(x):
        return max(float(vals[int(np.argmin(np.abs(omega - x)))]), 1e-300)

    fs = max(0.15 * h, 4 * trace.spacing, 2.0)
    guesses = [
        LorentzianPeak(-h, fs, height_at(-h) * math.pi * fs / 2),
        LorentzianPeak(0.0, fs, height_at(0.0) * math.pi * fs / 2),
        LorentzianPeak(h, fs, height_at(h) * math.pi * fs / 2),
    ]
    if cavity is None:
        fc = max(params.kappa, 4 * trace.spacing)
        guesses.append(
            LorentzianPeak(params.delta_c, fc, 0.2 * height_at(params.delta_c) * math.pi * fc / 2)
        )
        # the cavity line keeps its bare position and width; only its weight is fitted
        return fit_lorentzians(
            trace,
            4,
            init=guesses,
            baseline=0.0,
            labels=FOUR_LABELS,
            hold=[(3, "center"), (3, "fwhm")],
        )
    return fit_lorentzians(
        trace, 3, init=guesses, fixed=(cavity,), baseline=0.0, labels=FOUR_LABELS
    )


def _sideband_pair(fit: LorentzianFitResult) -> tuple[LorentzianPeak, LorentzianPeak]:
    if fit.labels is not None and "lower" in fit.labels and "upper" in fit.labels:
        return fit.peak("lower"), fit.peak("upper")
    neg = [p for p in fit.peaks if p.center < 0]
    pos = [p for p in fit.peaks if p.center > 0]
    if not neg or not pos:
        raise MissingSidebandError("fit has no pair of sidebands on opposite sides of the laser")
    # the most symmetric opposite-sign pair, ignoring near-laser components
    best = min(
        ((lo, hi) for lo in neg for hi in pos),
        key=lambda pr: abs(pr[0].center + pr[1].center) / (pr[1].center - pr[0].center),
    )
    return best


def extract_rabi(fit: LorentzianFitResult) -> float:
    """Half the splitting between the two Mollow sidebands."""
    lo, hi = _sideband_pair(fit)
    a, b = sorted((lo.center, hi.center))
    return (b - a) / 2


def sideband_intensity_ratio(fit: LorentzianFitResult) -> float:
    """Area of the upper (higher-energy) sideband over the lower one."""
    lo, hi = _sideband_pair(fit)
    if lo.center > hi.center:
        lo, hi = hi, lo
    if not lo.area > 0:
        raise MissingSidebandError("lower-sideband area vanishes")
    return hi.area / lo.area


@dataclass(frozen=True)
class PointAnalysis:
    omega_rabi: float
    omega_low: float
    lower_fwhm: float
    upper_fwhm: float | None
    area_low: float
    area_high: float
    cavity_area: float
    upper_center: float
    lower_converged: bool
    full_converged: bool
    full_fit: LorentzianFitResult | None = None


def analyze(sim: Simulation, hint: float | None = None, cavity: LorentzianPeak | None = None) -> PointAnalysis:
    h = rabi_hint(sim) if hint is None else hint
    low = fit_lower_sideband(sim.spectrum, h)
    full = fit_four_peaks(sim.spectrum, sim.params, h, cavity=cavity)
    lo, hi = full.peak("lower"), full.peak("upper")
    return PointAnalysis(
        omega_rabi=extract_rabi(full),
        omega_low=abs(low.peak("lower").center),
        lower_fwhm=low.peak("lower").fwhm,
        upper_fwhm=hi.fwhm,
        area_low=lo.area,
        area_high=hi.area,
        cavity_area=full.peak("cavity").area,
        upper_center=hi.center,
        lower_converged=low.converged,
        full_converged=full.converged,
        full_fit=full,
    )
