"""Hamiltonian and Liouvillian of the driven dot-cavity system.

Every rate and detuning is an ordinary frequency in GHz (the ``X/2pi``
value); time is in ns.  The generator returned by :func:`build_liouvillian`
carries the explicit ``2*pi`` so that ``drho/dt = L rho`` with t in ns.

Density matrices are vectorized by column stacking,
``vec(A rho B) = (B^T (x) A) vec(rho)``.

Two frames are supported.  ``frame="lab"`` is the plain rotating frame of
the laser.  ``frame="displaced"`` applies the exact unitary displacement
``a -> alpha + b`` with ``alpha`` the steady amplitude of the empty driven
cavity, so the Fock truncation only has to hold the fluctuations around the
coherent field.  Both frames describe the same dynamics; the displaced one
converges at far smaller ``fock_dim`` under strong drive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .operators import Operator, SpaceDims, make_ops

TWO_PI = 2.0 * math.pi

# rates used in the simulation section of the source measurement (GHz)
PAPER_RATES = dict(
    g=15.3,
    kappa=36.0,
    gamma=0.16,
    gamma_d=1.0,
    gamma_ph_ads=0.19,
    gamma_ph_asp=0.28,
)


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters, all in GHz (ordinary frequency).

    ``drive_J`` multiplies ``sqrt(kappa)`` in the cavity drive term and so
    carries units of GHz^(1/2).  ``drive_qubit`` is the direct Rabi
    frequency used only when ``drive_target == "qubit"``.
    """

    delta_c: float = 42.0
    delta_x: float = 0.0
    g: float = 15.3
    kappa: float = 36.0
    gamma: float = 0.16
    gamma_d: float = 1.0
    gamma_ph_ads: float = 0.19
    gamma_ph_asp: float = 0.28
    drive_J: float = 0.0
    drive_target: str = "cavity"
    drive_qubit: float = 0.0
    fock_dim: int = 10
    frame: str = "lab"
    uncoupled_ok: bool = False

    def __post_init__(self):
        for name in ("kappa", "gamma", "gamma_d", "gamma_ph_ads", "gamma_ph_asp"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a finite rate >= 0, got {v}")
        if self.g < 0 or (self.g == 0 and not self.uncoupled_ok):
            raise ValueError("g must be > 0 (pass uncoupled_ok=True for g = 0)")
        if self.drive_target not in ("cavity", "qubit"):
            raise ValueError(f"drive_target must be 'cavity' or 'qubit', got {self.drive_target!r}")
        if self.frame not in ("lab", "displaced"):
            raise ValueError(f"frame must be 'lab' or 'displaced', got {self.frame!r}")
        for name in ("delta_c", "delta_x", "drive_J", "drive_qubit"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        SpaceDims(self.fock_dim)

    @property
    def delta_cx(self) -> float:
        """Cavity-dot detuning omega_c - omega_x."""
        return self.delta_c - self.delta_x

    @property
    def dims(self) -> SpaceDims:
        return SpaceDims(self.fock_dim)

    def with_(self, **changes) -> SystemParams:
        return replace(self, **changes)


def paper_params(delta_cx: float = 42.0, **overrides) -> SystemParams:
    """Parameter set of the simulations, laser resonant with the dot."""
    kw = dict(PAPER_RATES, delta_c=delta_cx, delta_x=0.0)
    kw.update(overrides)
    return SystemParams(**kw)


@dataclass(frozen=True, eq=False)
class Superoperator:
    dims: SpaceDims
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d2 = self.dims.total**2
        if m.shape != (d2, d2):
            raise ValueError(f"superoperator shape {m.shape} != ({d2}, {d2})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other):
        if not isinstance(other, Superoperator) or other.dims != self.dims:
            return NotImplemented
        return Superoperator(self.dims, self.matrix + other.matrix)

    def __mul__(self, c):
        return Superoperator(self.dims, c * self.matrix)

    __rmul__ = __mul__

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Act on an unvectorized D x D matrix."""
        d = self.dims.total
        return unvec(self.matrix @ vec(rho), d)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


def spre(x: np.ndarray) -> np.ndarray:
    """Matrix of rho -> x rho."""
    return np.kron(np.eye(x.shape[0]), x)


def spost(x: np.ndarray) -> np.ndarray:
    """Matrix of rho -> rho x."""
    return np.kron(x.T, np.eye(x.shape[0]))


def dissipator(c: Operator) -> Superoperator:
    """Lindblad form D(C) rho = C rho C^dag - {C^dag C, rho}/2."""
    m = c.matrix
    cdc = m.conj().T @ m
    return Superoperator(c.dims, np.kron(m.conj(), m) - 0.5 * spre(cdc) - 0.5 * spost(cdc))


def commutator_super(h: Operator) -> Superoperator:
    """Matrix of rho -> -i[H, rho] (no 2*pi)."""
    m = h.matrix
    return Superoperator(h.dims, -1j * (spre(m) - spost(m)))


def cavity_amplitude(p: SystemParams) -> complex:
    """Steady coherent amplitude of the driven cavity without the dot."""
    if p.drive_target != "cavity" or p.drive_J == 0:
        return 0j
    return -math.sqrt(p.kappa) * p.drive_J / complex(p.delta_c, -p.kappa / 2)


def bare_rabi_frequency(p: SystemParams) -> float:
    """Rabi frequency 2 g |alpha| the empty-cavity field imposes on the dot."""
    if p.drive_target == "qubit":
        return abs(p.drive_qubit)
    return 2.0 * p.g * abs(cavity_amplitude(p))


def drive_for_rabi(p: SystemParams, omega: float) -> float:
    """Drive amplitude J whose empty-cavity field gives Rabi frequency ``omega``."""
    if p.g <= 0 or p.kappa <= 0:
        raise ValueError("needs g > 0 and kappa > 0")
    return abs(omega) * abs(complex(p.delta_c, -p.kappa / 2)) / (2.0 * p.g * math.sqrt(p.kappa))


def drive_from_power(power, eta: float, photon_energy: float = 1.0):
    """J = sqrt(eta P / (hbar omega)); only used to label axes in power units."""
    return np.sqrt(eta * np.asarray(power, dtype=float) / photon_energy)


def frame_operators(p: SystemParams):
    """Operators of the chosen frame: (cavity a, a^dag, sigma_-, sigma_+, sigma_z, I)."""
    ops = make_ops(p.dims)
    if p.frame == "displaced":
        alpha = cavity_amplitude(p)
        a = ops.a + alpha * ops.identity
        return ops._replace(a=a, a_dag=a.dag())
    return ops


def cavity_operator(p: SystemParams) -> Operator:
    """The cavity annihilation operator expressed in the frame of ``p``."""
    return frame_operators(p).a


def emission_operator(p: SystemParams) -> Operator:
    """Operator whose two-time correlation gives the emission spectrum.

    The cavity field for every physical run; the bare emitter lowering
    operator in the direct-drive validation mode, where the analytic
    two-level (Mollow) results apply.
    """
    o = frame_operators(p)
    return o.sigma_m if p.drive_target == "qubit" else o.a


def build_hamiltonian(p: SystemParams) -> Operator:
    """H/hbar in GHz.

    Cavity drive: ``Dc a^dag a + Dx sz/2 + g (s+ a + a^dag s-) + sqrt(kappa) J (a + a^dag)``.
    Qubit drive (validation only) replaces the last term with ``drive_qubit/2 (s+ + s-)``.
    """
    o = frame_operators(p)
    h = p.delta_c * (o.a_dag @ o.a) + (p.delta_x / 2) * o.sigma_z
    h = h + p.g * (o.sigma_p @ o.a + o.a_dag @ o.sigma_m)
    if p.drive_target == "cavity":
        h = h + (math.sqrt(p.kappa) * p.drive_J) * (o.a + o.a_dag)
    else:
        h = h + (p.drive_qubit / 2) * (o.sigma_p + o.sigma_m)
    # the displaced frame adds alpha*I pieces; keep the matrix exactly Hermitian
    m = h.matrix
    return Operator(h.dims, (m + m.conj().T) / 2)


def collapse_operators(p: SystemParams) -> list[tuple[float, Operator]]:
    o = frame_operators(p)
    return [
        (p.gamma, o.sigma_m),
        (p.kappa, o.a),
        (p.gamma_d, o.sigma_p @ o.sigma_m),
        (p.gamma_ph_ads, o.a_dag @ o.sigma_m),
        (p.gamma_ph_asp, o.a @ o.sigma_p),
    ]


def build_liouvillian(p: SystemParams) -> Superoperator:
    """Full generator in 1/ns: -i 2pi [H, .] + 2pi sum_k rate_k D(C_k)."""
    total = commutator_super(build_hamiltonian(p)).matrix.copy()
    for rate, c in collapse_operators(p):
        if rate:
            total += rate * dissipator(c).matrix
    return Superoperator(p.dims, TWO_PI * total)


def vacuum_rabi_splitting(g: float, kappa: float) -> float:
    """Anti-crossing gap 2 sqrt(g^2 - (kappa/4)^2); zero below strong coupling."""
    if g < 0 or kappa < 0:
        raise ValueError("g and kappa must be >= 0")
    disc = g * g - (kappa / 4) ** 2
    return 2.0 * math.sqrt(disc) if disc > 0 else 0.0
