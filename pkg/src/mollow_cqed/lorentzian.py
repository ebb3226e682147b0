"""Multi-Lorentzian peak model and Levenberg-Marquardt fitting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .dynamics import SpectrumTrace

GRAD_TOL = 1e-10
MAX_ITER = 200
DEGENERATE_SEPARATION = 1e-3  # GHz

INSTRUMENTS = {"fabry_perot": 0.9, "spectrometer": 7.0}


@dataclass(frozen=True)
class LorentzianPeak:
    center: float
    fwhm: float
    area: float

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError(f"fwhm must be > 0, got {self.fwhm}")

    @property
    def height(self) -> float:
        return 2.0 * self.area / (math.pi * self.fwhm)

    def __call__(self, omega):
        hw = self.fwhm / 2
        u = np.asarray(omega, dtype=float) - self.center
        return (self.area / math.pi) * hw / (u * u + hw * hw)


def eval_model(peaks, baseline: float, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    out = np.full(omega.shape, float(baseline))
    for pk in peaks:
        out += pk(omega)
    return out


@dataclass(frozen=True, eq=False)
class LorentzianFitResult:
    peaks: tuple
    baseline: float
    residual_norm: float
    converged: bool
    iterations: int
    parameter_uncertainties: np.ndarray
    relative_gradient: float = float("nan")
    degenerate: bool = False
    rank_deficient: bool = False
    n_fixed: int = 0
    labels: tuple | None = None
    history: tuple = field(default=(), repr=False)

    @property
    def free_peaks(self) -> tuple:
        return self.peaks[: len(self.peaks) - self.n_fixed]

    def peak(self, label: str) -> LorentzianPeak:
        if self.labels is None or label not in self.labels:
            raise KeyError(f"no peak labelled {label!r}")
        return self.peaks[self.labels.index(label)]

    def uncertainty(self, index: int) -> tuple[float, float, float]:
        """1-sigma (center, fwhm, area) of a free peak."""
        s = self.parameter_uncertainties
        return tuple(float(v) for v in s[3 * index : 3 * index + 3])

    def model(self, omega) -> np.ndarray:
        return eval_model(self.peaks, self.baseline, omega)


def _unpack(theta, k):
    peaks = [theta[3 * i : 3 * i + 3] for i in range(k)]
    return peaks, theta[3 * k]


def _model_and_jac(theta, k, omega, const):
    m = omega.size
    jac = np.empty((m, 3 * k + 1))
    out = const + theta[3 * k]
    for i in range(k):
        c, f, a = theta[3 * i : 3 * i + 3]
        hw = f / 2
        u = omega - c
        den = u * u + hw * hw
        shape = hw / (math.pi * den)
        out = out + a * shape
        jac[:, 3 * i] = a * hw * 2 * u / (math.pi * den * den)
        jac[:, 3 * i + 1] = a * (u * u - hw * hw) / (2 * math.pi * den * den)
        jac[:, 3 * i + 2] = shape
    jac[:, 3 * k] = 1.0
    return out, jac


def initial_guesses(omega, values, k: int) -> list[LorentzianPeak]:
    """k most prominent local maxima at least two grid steps apart, then shoulders.

    Ranking by topographic prominence rather than raw height keeps noise
    wiggles on the flank of a tall line from outranking a second line.
    """
    omega = np.asarray(omega, dtype=float)
    values = np.asarray(values, dtype=float)
    step = float(np.median(np.diff(omega)))
    floor = float(np.min(values))
    idx, props = find_peaks(values, prominence=0)
    prom = dict(zip(idx, props["prominences"]))
    order = sorted(idx, key=lambda i: (prom[i], values[i]), reverse=True)
    chosen: list[int] = []
    for i in order:
        if all(abs(i - j) >= 2 for j in chosen):
            chosen.append(i)
        if len(chosen) == k:
            break
    if len(chosen) < k:
        # shoulders show up as maxima of the negative curvature
        curv = -np.gradient(np.gradient(values, omega), omega)
        sidx, _ = find_peaks(curv)
        for i in sorted(sidx, key=lambda i: curv[i], reverse=True):
            if all(abs(i - j) >= 2 for j in chosen):
                chosen.append(i)
            if len(chosen) == k:
                break
    while len(chosen) < k:
        chosen.append(int(np.argmax(values)))
    guesses = []
    for i in chosen:
        try:
            w = peak_widths(values - floor, [i], rel_height=0.5)[0][0] * step
        except ValueError:
            w = 0.0
        w = max(w, 2 * step)
        h = max(values[i] - floor, 1e-300)
        guesses.append(LorentzianPeak(float(omega[i]), float(w), float(h * math.pi * w / 2)))
    return guesses


def fit_lorentzians(
    trace,
    k: int,
    init=None,
    fixed=(),
    window: tuple[float, float] | None = None,
    baseline: float | None = None,
    gtol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
    labels=None,
    hold=(),
) -> LorentzianFitResult:
    """Damped least-squares fit of ``k`` Lorentzians plus a constant.

    ``trace`` is a :class:`SpectrumTrace` or an ``(omega, values)`` pair.
    ``fixed`` peaks are added to the model but not varied; ``hold`` lists
    ``(peak_index, "center" | "fwhm" | "area")`` pairs kept at their initial
    values while the rest of that peak is fitted.  Damping follows
    the classic x10 / /10 schedule on a Marquardt-scaled normal matrix; the
    fit is converged when ``|J^T r| <= gtol |J|_F |y|``.
    """
    if isinstance(trace, SpectrumTrace):
        omega, y = np.asarray(trace.omega), np.asarray(trace.values)
    else:
        omega, y = (np.asarray(v, dtype=float) for v in trace)
    if window is not None:
        sel = (omega >= window[0]) & (omega <= window[1])
        omega, y = omega[sel], y[sel]
    if not 1 <= k <= 5:
        raise ValueError("k must be between 1 and 5")
    if omega.size < 5 * k + 5:
        raise ValueError(f"need at least {5 * k + 5} samples for {k} peaks, got {omega.size}")
    fixed = tuple(fixed)
    const = eval_model(fixed, 0.0, omega)

    if init is None:
        init = initial_guesses(omega, y - const, k)
    init = list(init)
    if len(init) != k:
        raise ValueError(f"expected {k} initial peaks, got {len(init)}")
    b0 = float(np.min(y - const)) if baseline is None else float(baseline)
    theta = np.array([v for pk in init for v in (pk.center, pk.fwhm, pk.area)] + [b0])

    slot = {"center": 0, "fwhm": 1, "area": 2}
    held = {3 * i + slot[name] for i, name in hold}
    free = np.array([j for j in range(theta.size) if j not in held])

    def evaluate(th):
        mod, full_jac = _model_and_jac(th, k, omega, const)
        return mod, full_jac[:, free]

    ynorm = float(np.linalg.norm(y)) or 1.0
    model, jac = evaluate(theta)
    r = model - y
    cost = float(r @ r)
    lam = 1e-3
    history = [cost]
    converged = False
    it = 0
    rel_grad = float("inf")
    for it in range(1, max_iter + 1):
        grad = jac.T @ r
        rel_grad = float(np.linalg.norm(grad) / (np.linalg.norm(jac) * ynorm))
        if rel_grad <= gtol:
            converged = True
            it -= 1
            break
        a = jac.T @ jac
        d = np.maximum(np.diag(a), 1e-30 * np.max(np.diag(a)))
        accepted = False
        while lam < 1e16:
            try:
                delta = np.linalg.solve(a + lam * np.diag(d), -grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = theta.copy()
            trial[free] += delta
            if np.all(trial[1 : 3 * k : 3] > 0) and np.all(np.isfinite(trial)):
                tmodel, tjac = evaluate(trial)
                tr = tmodel - y
                tcost = float(tr @ tr)
                if tcost < cost:
                    theta, jac, r, cost = trial, tjac, tr, tcost
                    lam = max(lam / 10, 1e-12)
                    accepted = True
                    break
            lam *= 10
        history.append(cost)
        if not accepted:
            # no descent direction left at machine precision
            grad = jac.T @ r
            rel_grad = float(np.linalg.norm(grad) / (np.linalg.norm(jac) * ynorm))
            converged = rel_grad <= gtol
            break

    p = free.size
    m = omega.size
    jtj = jac.T @ jac
    sv = np.linalg.svd(jac, compute_uv=False)
    rank_deficient = bool(sv[-1] <= 1e-12 * sv[0])
    s2 = cost / max(m - p, 1)
    sig = np.zeros(theta.size)
    try:
        cov = s2 * np.linalg.pinv(jtj)
        sig[free] = np.sqrt(np.abs(np.diag(cov)))
    except np.linalg.LinAlgError:
        sig[free] = np.nan

    free, base = _unpack(theta, k)
    peaks = tuple(LorentzianPeak(float(c), float(f), float(a_)) for c, f, a_ in free) + fixed
    centers = [pk.center for pk in peaks[:k]]
    degenerate = any(
        abs(centers[i] - centers[j]) < DEGENERATE_SEPARATION
        for i in range(k)
        for j in range(i + 1, k)
    )
    return LorentzianFitResult(
        peaks=peaks,
        baseline=float(base),
        residual_norm=math.sqrt(cost),
        converged=converged,
        iterations=it,
        parameter_uncertainties=sig,
        relative_gradient=rel_grad,
        degenerate=degenerate,
        rank_deficient=rank_deficient,
        n_fixed=len(fixed),
        labels=None if labels is None else tuple(labels),
        history=tuple(history),
    )


def instrument_convolve(trace: SpectrumTrace, response="fabry_perot") -> SpectrumTrace:
    """Convolve with a unit-area Lorentzian instrument response.

    ``response`` is ``"fabry_perot"`` (0.9 GHz), ``"spectrometer"`` (7 GHz)
    or an explicit FWHM in GHz.
    """
    fwhm = INSTRUMENTS[response] if isinstance(response, str) else float(response)
    omega = np.asarray(trace.omega)
    step = trace.spacing
    if not np.allclose(np.diff(omega), step, rtol=1e-6, atol=1e-12):
        raise ValueError("instrument convolution needs a uniform grid")
    span = omega[-1] - omega[0]
    if fwhm >= span / 4:
        raise ValueError(f"response FWHM {fwhm} GHz too wide for a {span:.3g} GHz trace")
    if step > fwhm / 4:
        raise ValueError(f"grid spacing {step:.3g} GHz too coarse for a {fwhm} GHz response")
    n = omega.size
    offsets = (np.arange(2 * n - 1) - (n - 1)) * step
    kernel = LorentzianPeak(0.0, fwhm, 1.0)(offsets) * step
    full = np.convolve(np.asarray(trace.values), kernel, mode="full")
    out = full[n - 1 : 2 * n - 1]
    return SpectrumTrace(omega, out, trace.coherent_amplitude)
