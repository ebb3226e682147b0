"""Operators on the truncated two-level (x) Fock space.

Basis ordering is fixed throughout the package: the qubit factor comes first
and the Fock factor second, so the composite index of ``|q, n>`` is
``k = q * N + n`` with ``q = 0`` the excited state ``|e>`` and ``q = 1`` the
ground state ``|g>``.  The ground/vacuum state ``|g, 0>`` therefore sits at
index ``N``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import NamedTuple

import numpy as np

EXCITED = 0
GROUND = 1


@dataclass(frozen=True)
class SpaceDims:
    fock_dim: int
    qubit_dim: int = 2

    def __post_init__(self):
        if self.qubit_dim != 2:
            raise ValueError(f"qubit_dim must be 2, got {self.qubit_dim}")
        if int(self.fock_dim) != self.fock_dim or self.fock_dim < 2:
            raise ValueError(f"fock_dim must be an integer >= 2, got {self.fock_dim}")

    @property
    def total(self) -> int:
        return self.qubit_dim * self.fock_dim

    def index(self, qubit: int, n: int) -> int:
        """Composite index of ``|qubit, n>`` (qubit 0 = excited, 1 = ground)."""
        if qubit not in (0, 1) or not 0 <= n < self.fock_dim:
            raise IndexError(f"state |{qubit}, {n}> outside {self}")
        return qubit * self.fock_dim + n

    def basis(self, qubit: int, n: int) -> np.ndarray:
        v = np.zeros(self.total, dtype=complex)
        v[self.index(qubit, n)] = 1.0
        return v


def _frozen(m) -> np.ndarray:
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense complex matrix on the composite space, tagged with its dims."""

    dims: SpaceDims
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        d = self.dims.total
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match dims {d}x{d}")
        object.__setattr__(self, "matrix", m)

    def dag(self) -> Operator:
        return dagger(self)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            return matmul(self, other)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, Operator):
            return add(self, other)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            return add(self, scale(other, -1.0))
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            return scale(self, c)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __eq__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    def expect(self, rho: np.ndarray) -> complex:
        """tr(O rho) for a density matrix given as a D x D array."""
        return complex(np.einsum("ij,ji->", self.matrix, np.asarray(rho)))


def _check_conformable(x: Operator, y: Operator):
    if x.dims != y.dims:
        raise ValueError(f"dimension mismatch: {x.dims} vs {y.dims}")


def dagger(x: Operator) -> Operator:
    return Operator(x.dims, x.matrix.conj().T)


def matmul(x: Operator, y: Operator) -> Operator:
    _check_conformable(x, y)
    return Operator(x.dims, x.matrix @ y.matrix)


def add(x: Operator, y: Operator) -> Operator:
    _check_conformable(x, y)
    return Operator(x.dims, x.matrix + y.matrix)


def scale(x: Operator, c: complex) -> Operator:
    return Operator(x.dims, c * x.matrix)


def identity(dims: SpaceDims) -> Operator:
    return Operator(dims, np.eye(dims.total))


def tensor(*factors) -> np.ndarray:
    """Plain Kronecker product of square factor matrices, left factor outermost."""
    mats = [np.asarray(f, dtype=complex) for f in factors]
    for m in mats:
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"factors must be square matrices, got shape {m.shape}")
    return reduce(np.kron, mats)


def kron(qubit_factor, fock_factor) -> Operator:
    """Composite operator ``qubit_factor (x) fock_factor`` in qubit-first order."""
    q = np.asarray(qubit_factor, dtype=complex)
    f = np.asarray(fock_factor, dtype=complex)
    if q.shape != (2, 2):
        raise ValueError(f"qubit factor must be 2x2, got {q.shape}")
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError(f"Fock factor must be square, got {f.shape}")
    return Operator(SpaceDims(f.shape[0]), tensor(q, f))


def destroy_fock(n: int) -> np.ndarray:
    """Truncated annihilation operator, <n-1|a|n> = sqrt(n)."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


# qubit factors in the (e, g) basis
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |g><e|
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


class Ops(NamedTuple):
    a: Operator
    a_dag: Operator
    sigma_m: Operator
    sigma_p: Operator
    sigma_z: Operator
    identity: Operator


def make_ops(dims: SpaceDims | int) -> Ops:
    """Build a, a^dag, sigma_-, sigma_+, sigma_z and the identity.

    Accepts either a :class:`SpaceDims` or the Fock truncation directly.
    """
    if not isinstance(dims, SpaceDims):
        dims = SpaceDims(dims)
    n = dims.fock_dim
    i2, i_n = np.eye(2), np.eye(n)
    a = kron(i2, destroy_fock(n))
    sm = kron(SIGMA_MINUS, i_n)
    return Ops(
        a=a,
        a_dag=a.dag(),
        sigma_m=sm,
        sigma_p=sm.dag(),
        sigma_z=kron(SIGMA_Z, i_n),
        identity=identity(dims),
    )
