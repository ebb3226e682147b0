"""Least-squares estimation of the two phonon rates from a linewidth curve."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator

from .analysis import fit_lower_sideband, sideband_window
from .dynamics import default_tmax, simulate
from .model import SystemParams, drive_for_rabi

log = logging.getLogger(__name__)

DEFAULT_SIGMA_FRACTION = 0.05
START = (0.2, 0.3)
TABLE_POINTS = 8


class CalibrationError(RuntimeError):
    pass


class InversionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LinewidthCurve:
    """Lower-sideband FWHM against |Omega/2pi|^2 at one dot-cavity detuning.

    ``fixed_params`` carries everything except the phonon rates (which are
    ignored); its detuning must match ``delta_cx``.
    """

    omega_sq: np.ndarray
    fwhm: np.ndarray
    delta_cx: float
    fixed_params: SystemParams
    fwhm_sigma: np.ndarray | None = None
    sigma_defaulted: bool = False

    def __post_init__(self):
        x = np.array(self.omega_sq, dtype=float)
        y = np.array(self.fwhm, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size == 0:
            raise ValueError("omega_sq and fwhm must be equal-length 1-d arrays")
        if np.any(np.diff(x) <= 0):
            raise ValueError("omega_sq must be strictly increasing")
        if np.any(y <= 0) or np.any(x <= 0):
            raise ValueError("omega_sq and fwhm must be positive")
        if abs(self.fixed_params.delta_cx - self.delta_cx) > 1e-9:
            raise ValueError("fixed_params detuning does not match delta_cx")
        if self.fwhm_sigma is None:
            s = DEFAULT_SIGMA_FRACTION * y
            object.__setattr__(self, "sigma_defaulted", True)
        else:
            s = np.array(self.fwhm_sigma, dtype=float)
            if s.shape != y.shape or np.any(s <= 0):
                raise ValueError("fwhm_sigma must be positive and match fwhm")
        for name, arr in (("omega_sq", x), ("fwhm", y), ("fwhm_sigma", s)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_points(cls, omega_sq, fwhm, delta_cx, fixed_params, fwhm_sigma=None) -> LinewidthCurve:
        """Build from points in any order (sorted here on omega_sq)."""
        order = np.argsort(np.asarray(omega_sq, dtype=float), kind="stable")
        pick = lambda v: None if v is None else np.asarray(v, dtype=float)[order]  # noqa: E731
        return cls(pick(omega_sq), pick(fwhm), delta_cx, fixed_params, pick(fwhm_sigma))

    def __len__(self):
        return self.omega_sq.size

    def with_fwhm(self, fwhm, fwhm_sigma=None) -> LinewidthCurve:
        return LinewidthCurve(self.omega_sq, fwhm, self.delta_cx, self.fixed_params, fwhm_sigma)

    def params_with(self, rates) -> SystemParams:
        a, b = rates
        return self.fixed_params.with_(gamma_ph_ads=float(a), gamma_ph_asp=float(b))


def _sideband(p: SystemParams, J: float, hint: float):
    q = p.with_(drive_J=float(J))
    lo, hi = sideband_window(hint)
    # only the sideband window is transformed; spacing fixed by the rate-independent T_max
    step = max(0.1, 1.0 / (2 * default_tmax(q)))
    grid = np.arange(math.floor(lo / step), math.ceil(hi / step) + 1) * step
    sim = simulate(q, omega=grid)
    fit = fit_lower_sideband(sim.spectrum, hint)
    pk = fit.peak("lower")
    return abs(pk.center), pk.fwhm


@lru_cache(maxsize=512)
def _rabi_table(p: SystemParams, omega_lo: float, omega_hi: float, n: int):
    targets = np.linspace(omega_lo, omega_hi, n)
    js = np.array([drive_for_rabi(p, om) for om in targets])
    omegas = np.array([_sideband(p, j, om)[0] for j, om in zip(js, targets)])
    if np.any(np.diff(omegas) <= 0):
        raise InversionError("simulated sideband splitting is not monotone in the drive")
    return js, omegas


def drive_for_sideband(p: SystemParams, omega_sq, table_range=None, n_table: int = TABLE_POINTS):
    """Invert the simulated Omega(J) relation at the requested |Omega|^2 values.

    Omega here is the lower-sideband detuning from the laser, the quantity
    the linewidth axis is measured in.
    """
    om = np.sqrt(np.asarray(omega_sq, dtype=float))
    lo, hi = table_range if table_range is not None else (0.85 * om.min(), 1.15 * om.max())
    js, omegas = _rabi_table(p, float(lo), float(hi), n_table)
    if om.min() < omegas[0] or om.max() > omegas[-1]:
        raise InversionError(
            f"requested Omega in [{om.min():.3g}, {om.max():.3g}] outside tabulated "
            f"[{omegas[0]:.3g}, {omegas[-1]:.3g}] GHz"
        )
    return PchipInterpolator(omegas**2, js)(om**2)


def predict_linewidths(rates, curve: LinewidthCurve) -> np.ndarray:
    """Simulated lower-sideband FWHM at each point of ``curve``."""
    a, b = rates
    if a < 0 or b < 0:
        raise ValueError("phonon rates must be >= 0")
    p = curve.params_with(rates)
    om = np.sqrt(curve.omega_sq)
    js = drive_for_sideband(p, curve.omega_sq)
    return np.array([_sideband(p, j, o)[1] for j, o in zip(js, om)])


@dataclass(frozen=True, eq=False)
class PhononFitResult:
    gamma_ph_ads: float
    gamma_ph_asp: float
    sigma_ads: float
    sigma_asp: float
    residual_norm: float
    curve_predicted: LinewidthCurve
    iterations: int
    clamped: bool = False
    history: tuple = field(default=(), repr=False)

    @property
    def rates(self) -> tuple[float, float]:
        return (self.gamma_ph_ads, self.gamma_ph_asp)


def fit_phonon_rates(
    data: LinewidthCurve,
    start=START,
    max_iter: int = 50,
    fd_step: float = 0.01,
    xtol: float = 1e-6,
    ftol: float = 1e-9,
    max_rejects: int = 4,
) -> PhononFitResult:
    """Damped Gauss-Newton on the weighted residual (predicted - measured)/sigma.

    The forward model is nonlinear in the rates, so each step solves the
    locally linearized least-squares problem; the Jacobian is a forward
    difference of width ``fd_step`` GHz.  Uncertainties come from the
    linearized normal equations scaled by the reduced chi-square.
    """
    if len(data) < 4:
        raise ValueError("need at least 4 linewidth points")
    sigma = data.fwhm_sigma

    def residual(x):
        return (predict_linewidths(x, data) - data.fwhm) / sigma

    def jacobian(x, r0):
        cols = []
        for i in range(2):
            xp = x.copy()
            xp[i] += fd_step
            cols.append((residual(xp) - r0) / fd_step)
        return np.column_stack(cols)

    x = np.array(start, dtype=float)
    r = residual(x)
    cost = float(r @ r)
    history = [cost]
    clamped = False
    lam = 1e-3
    jac = jacobian(x, r)
    for it in range(1, max_iter + 1):
        grad = jac.T @ r
        a = jac.T @ jac
        d = np.maximum(np.diag(a), 1e-12)
        step_taken = None
        prev = cost
        for _ in range(max_rejects + 1):
            delta = np.linalg.solve(a + lam * np.diag(d), -grad)
            trial = x + delta
            hit = bool(np.any(trial < 0))
            trial = np.maximum(trial, 0.0)
            tr = residual(trial)
            tcost = float(tr @ tr)
            if tcost <= cost:
                step_taken = trial - x
                clamped = clamped or hit
                x, r, cost = trial, tr, tcost
                lam = max(lam / 10, 1e-9)
                break
            lam *= 10
        history.append(cost)
        # a rejected step near the optimum is finite-difference noise, not failure
        if step_taken is None:
            break
        jac = jacobian(x, r)
        if np.linalg.norm(step_taken) <= xtol * (np.linalg.norm(x) + xtol):
            break
        if prev - cost <= ftol * max(prev, 1e-300):
            break
    else:
        raise CalibrationError(f"no convergence after {max_iter} iterations (rates {x})")

    if clamped:
        log.warning("negative rate iterate clamped to zero during the fit")
    dof = max(len(data) - 2, 1)
    cov = np.linalg.pinv(jac.T @ jac) * (cost / dof)
    sig = np.sqrt(np.abs(np.diag(cov)))
    predicted = data.with_fwhm(predict_linewidths(x, data), data.fwhm_sigma)
    return PhononFitResult(
        gamma_ph_ads=float(x[0]),
        gamma_ph_asp=float(x[1]),
        sigma_ads=float(sig[0]),
        sigma_asp=float(sig[1]),
        residual_norm=math.sqrt(cost),
        curve_predicted=predicted,
        iterations=it,
        clamped=clamped,
        history=tuple(history),
    )


def synthetic_curve(
    fixed: SystemParams,
    omegas,
    rates=(0.19, 0.28),
    noise: float = 0.0,
    seed: int | None = None,
) -> LinewidthCurve:
    """Linewidth data generated by the forward model with multiplicative noise."""
    omega_sq = np.asarray(omegas, dtype=float) ** 2
    template = LinewidthCurve(omega_sq, np.ones_like(omega_sq), fixed.delta_cx, fixed)
    clean = predict_linewidths(rates, template)
    if noise:
        rng = np.random.default_rng(seed)
        clean = clean * (1.0 + noise * rng.standard_normal(clean.size))
    return template.with_fwhm(clean)
