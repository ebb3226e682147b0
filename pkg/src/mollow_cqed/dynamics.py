"""Steady state, propagation, two-time correlations and emission spectra."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .model import (
    TWO_PI,
    Superoperator,
    SystemParams,
    bare_rabi_frequency,
    build_liouvillian,
    emission_operator,
    unvec,
    vec,
)
from .operators import GROUND, Operator, SpaceDims

log = logging.getLogger(__name__)

# ||L dt||_1 above this would need more than ~20 squarings of the Pade-13
# approximant (theta_13 = 5.37), where rounding in the squaring phase dominates
MAX_EXPM_NORM = 5.37 * 2**20

TAIL_TOLERANCE = 0.01


class SteadyStateError(RuntimeError):
    pass


class PropagatorError(RuntimeError):
    pass


class GridResolutionError(ValueError):
    pass


class FockConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    dims: SpaceDims
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.dims.total
        if m.shape != (d, d):
            raise ValueError(f"density matrix shape {m.shape} != ({d}, {d})")
        if np.max(np.abs(m - m.conj().T)) > 1e-9:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > 1e-9:
            raise ValueError(f"density matrix trace {np.trace(m).real:.3g} != 1")
        if np.linalg.eigvalsh(m).min() < -1e-8:
            raise ValueError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def expect(self, op: Operator) -> complex:
        return op.expect(self.matrix)

    def fock_populations(self) -> np.ndarray:
        """Photon-number distribution of the (frame) cavity mode."""
        n = self.dims.fock_dim
        diag = np.real(np.diag(self.matrix)).reshape(2, n)
        return diag.sum(axis=0)

    def excited_population(self) -> float:
        n = self.dims.fock_dim
        return float(np.real(np.diag(self.matrix))[:n].sum())


def steady_state(L: Superoperator, replace_index: int = 0, rtol: float = 1e-9) -> DensityMatrix:
    """Null vector of ``L`` normalized to unit trace.

    The equation for the diagonal element ``rho[k, k]`` (``k = replace_index``)
    is redundant for a trace-preserving generator and is swapped for the trace
    constraint; the bordered system is solved by dense LU.
    """
    d = L.dims.total
    if not 0 <= replace_index < d:
        raise ValueError(f"replace_index must be in [0, {d})")
    row = replace_index * (d + 1)
    m = np.array(L.matrix)
    m[row, :] = vec(np.eye(d))
    rhs = np.zeros(d * d, dtype=complex)
    rhs[row] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            x = sla.solve(m, rhs)
        except (np.linalg.LinAlgError, sla.LinAlgWarning) as exc:
            raise SteadyStateError(
                "bordered Liouvillian is singular: the steady state is not unique"
            ) from exc
    rho = unvec(x, d)
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho).real
    scale = np.linalg.norm(L.matrix, 1)
    resid = np.linalg.norm(L.matrix @ vec(rho))
    if resid > rtol * max(scale, 1.0):
        raise SteadyStateError(f"steady-state residual {resid:.3e} exceeds {rtol:.0e} * ||L||")
    return DensityMatrix(L.dims, rho)


def propagator(L: Superoperator, dt: float) -> np.ndarray:
    """exp(L dt) by Pade-13 scaling and squaring."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    ldt = L.matrix * dt
    nrm = np.linalg.norm(ldt, 1)
    if not math.isfinite(nrm) or nrm > MAX_EXPM_NORM:
        raise PropagatorError(
            f"||L dt||_1 = {nrm:.3g} exceeds {MAX_EXPM_NORM:.3g}; use a smaller step"
        )
    out = sla.expm(ldt)
    if not np.all(np.isfinite(out)):
        raise PropagatorError("matrix exponential overflowed")
    return out


def _regression_series(prop, x, probe, count, block=32):
    """probe . prop^k x for k < count, advanced ``block`` steps per matrix product."""
    block = min(block, count)
    cols = np.empty((x.size, block), dtype=complex)
    cols[:, 0] = x
    for j in range(1, block):
        cols[:, j] = prop @ cols[:, j - 1]
    jump = np.linalg.matrix_power(prop, block)
    out = np.empty(count, dtype=complex)
    for start in range(0, count, block):
        stop = min(start + block, count)
        out[start:stop] = (probe @ cols)[: stop - start]
        if stop < count:
            cols = jump @ cols
    return out


@dataclass(frozen=True, eq=False)
class CorrelationTrace:
    """g(tau) = <a^dag(tau) a(0)> in the steady state on a uniform grid."""

    tau: np.ndarray
    values: np.ndarray
    coherent_offset: complex
    tail_unresolved: bool = False

    @property
    def dt(self) -> float:
        return float(self.tau[1] - self.tau[0])

    @property
    def t_max(self) -> float:
        return float(self.tau[-1])


def correlation(
    L: Superoperator,
    rho_ss: DensityMatrix,
    a: Operator,
    T_max: float,
    n_steps: int,
) -> CorrelationTrace:
    """Quantum-regression evaluation of tr[a^dag exp(L tau)(a rho_ss)]."""
    if n_steps < 2 or not T_max > 0:
        raise ValueError("need T_max > 0 and n_steps >= 2")
    dt = T_max / n_steps
    prop = propagator(L, dt)
    x = vec(a.matrix @ rho_ss.matrix)
    # tr(A X) = vec(A^T) . vec(X)
    probe = vec(a.matrix.conj())
    vals = _regression_series(prop, x, probe, n_steps + 1)
    mean = rho_ss.expect(a)
    offset = np.conj(mean) * mean
    # judged against the incoherent part: in the displaced frame |<a>|^2
    # can dwarf it and would hide an undecayed tail
    unresolved = bool(abs(vals[-1] - offset) > TAIL_TOLERANCE * abs(vals[0] - offset))
    if unresolved:
        log.warning("correlation tail not decayed at T_max=%.3g ns", T_max)
    tau = np.arange(n_steps + 1) * dt
    vals.setflags(write=False)
    tau.setflags(write=False)
    return CorrelationTrace(tau, vals, complex(offset), unresolved)


@dataclass(frozen=True, eq=False)
class SpectrumTrace:
    """Incoherent emission spectrum on a grid of omega' = omega - omega_L (GHz).

    ``coherent_amplitude`` is the integrated weight of the elastic line at
    omega' = 0 in the same normalization as ``values`` (the incoherent
    density integrates to (g(0) - |<a>|^2)/2 and the elastic line to |<a>|^2/2).
    """

    omega: np.ndarray
    values: np.ndarray
    coherent_amplitude: float = 0.0

    def __post_init__(self):
        for name in ("omega", "values"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.omega.shape != self.values.shape or self.omega.ndim != 1:
            raise ValueError("omega and values must be 1-d arrays of equal length")

    @property
    def spacing(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.omega))


def _trapezoid_weights(n: int, dt: float) -> np.ndarray:
    w = np.full(n, dt)
    w[0] = w[-1] = dt / 2
    return w


def spectrum(
    c: CorrelationTrace,
    omega: np.ndarray | None = None,
    window: str | None = None,
) -> SpectrumTrace:
    """S(omega) = Re int_0^T exp(-i 2pi omega tau) (g(tau) - offset) dtau.

    The kernel sign puts a component oscillating like exp(+i 2pi f tau) in
    g at omega = +f, i.e. higher-energy emission at positive omega'.
    ``window="cosine"`` applies a cos^2 taper (for noisy imported data only).
    """
    dt, t_max = c.dt, c.t_max
    nyquist = 1.0 / (2 * dt)
    if omega is None:
        step = max(0.1, 1.0 / (2 * t_max))
        half = math.floor(0.9 * nyquist / step) * step
        omega = np.arange(-half, half + step / 2, step)
    omega = np.asarray(omega, dtype=float)
    if omega.size > 1:
        spacing = np.min(np.diff(omega))
        if spacing <= 0:
            raise ValueError("omega grid must be strictly increasing")
        if spacing < 1.0 / (2 * t_max) * (1 - 1e-9):
            raise GridResolutionError(
                f"grid spacing {spacing:.3g} GHz finer than 1/(2 T_max) = {1 / (2 * t_max):.3g} GHz"
            )
    if np.max(np.abs(omega)) > nyquist:
        raise GridResolutionError(f"grid extends beyond the Nyquist frequency {nyquist:.3g} GHz")
    y = np.asarray(c.values) - c.coherent_offset
    if window == "cosine":
        y = y * np.cos(0.5 * math.pi * np.asarray(c.tau) / t_max) ** 2
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    wy = y * _trapezoid_weights(y.size, dt)
    tau = np.asarray(c.tau)
    out = np.empty(omega.size)
    for start in range(0, omega.size, 256):
        blk = omega[start : start + 256]
        out[start : start + 256] = (np.exp(-1j * TWO_PI * np.outer(blk, tau)) @ wy).real
    return SpectrumTrace(omega, out, abs(c.coherent_offset) / 2)


# shortest default window: keeps the default 1/(2 T) grid at 0.2 GHz, fine
# enough for the 0.9 GHz filter convolution (spacing <= FWHM/4)
MIN_TMAX = 2.5


def default_tmax(p: SystemParams) -> float:
    """Eight decay times of the slowest emitter coherence, pi (gamma + gamma_d)."""
    slow = math.pi * (p.gamma + p.gamma_d)
    if slow <= 0:
        slow = math.pi * (p.gamma_ph_ads + p.gamma_ph_asp + p.kappa)
    if slow <= 0:
        raise ValueError("no dissipative channel: the correlation never decays")
    return min(max(8.0 / slow, MIN_TMAX), 400.0)


def default_dt(p: SystemParams) -> float:
    """Step resolving every spectral feature: 1/(2 f_max)."""
    reach = abs(p.delta_c) + abs(p.delta_x) + bare_rabi_frequency(p)
    f_max = max(100.0, 1.5 * reach + p.kappa + 2 * p.g)
    return 1.0 / (2.0 * f_max)


@dataclass(frozen=True, eq=False)
class Simulation:
    params: SystemParams
    rho_ss: DensityMatrix
    correlation: CorrelationTrace
    spectrum: SpectrumTrace

    @property
    def top_fock_population(self) -> float:
        return float(self.rho_ss.fock_populations()[-1])


def _grid_key(omega):
    if omega is None:
        return None
    omega = np.asarray(omega, dtype=float)
    return (omega.tobytes(),)


@lru_cache(maxsize=2048)
def _simulate_cached(p: SystemParams, grid_key, T_max, dt, max_doublings):
    omega = None if grid_key is None else np.frombuffer(grid_key[0], dtype=float)
    L = build_liouvillian(p)
    rho = steady_state(L)
    a = emission_operator(p)
    t = default_tmax(p) if T_max is None else T_max
    step = default_dt(p) if dt is None else dt
    for attempt in range(max_doublings + 1):
        n = max(2, math.ceil(t / step))
        corr = correlation(L, rho, a, n * step, n)
        if not corr.tail_unresolved or T_max is not None:
            break
        t *= 2
    return Simulation(p, rho, corr, spectrum(corr, omega))


def simulate(
    p: SystemParams,
    omega: np.ndarray | None = None,
    T_max: float | None = None,
    dt: float | None = None,
    max_doublings: int = 3,
    cache: bool = True,
) -> Simulation:
    """Steady state -> regression correlation -> spectrum for one parameter set.

    Results are memoized on (params, grid, T_max, dt) unless ``cache`` is
    False.  With ``T_max=None`` the window starts at :func:`default_tmax`
    and is doubled while the correlation tail is unresolved.
    """
    fn = _simulate_cached if cache else _simulate_cached.__wrapped__
    return fn(p, _grid_key(omega), T_max, dt, max_doublings)


def clear_cache():
    _simulate_cached.cache_clear()


def converge_fock(
    p: SystemParams,
    observable: Callable[[Simulation], float | None] | None = None,
    n_start: int = 10,
    n_max: int = 80,
    rtol: float = 0.005,
    **sim_kw,
) -> tuple[Simulation, int]:
    """Double ``fock_dim`` until ``observable`` moves by less than ``rtol``.

    The default observable is the lower-sideband FWHM.  Returns the
    simulation at the first truncation whose doubling agrees, and that
    truncation.  An observable returning None on both sides (no sideband,
    e.g. an undriven system) counts as converged.
    """
    if observable is None:
        from .analysis import lower_sideband_fwhm

        observable = lower_sideband_fwhm
    n = n_start
    cur = simulate(p.with_(fock_dim=n), **sim_kw)
    val = observable(cur)
    while 2 * n <= n_max:
        nxt = simulate(p.with_(fock_dim=2 * n), **sim_kw)
        nval = observable(nxt)
        if val is None and nval is None:
            return cur, n
        if val is not None and nval is not None and abs(nval - val) <= rtol * abs(nval):
            return cur, n
        log.info("fock_dim %d -> %d: observable %s -> %s", n, 2 * n, val, nval)
        n, cur, val = 2 * n, nxt, nval
    pops = cur.rho_ss.fock_populations()
    raise FockConvergenceError(
        f"no convergence up to fock_dim={n_max}; top Fock populations {pops[-3:]}"
    )


def ground_vacuum_index(dims: SpaceDims) -> int:
    return dims.index(GROUND, 0)
