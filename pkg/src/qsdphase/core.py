"""Shared value types for two-level open-system trajectories.

Conventions: hbar = 1, basis ordering ``(up, down)``, ``sigma_z = diag(1, -1)``
and ``sigma_minus = |down><up|``.  A state with Bloch angle ``theta`` is
``(cos(theta/2), sin(theta/2))`` and maps to the Bloch vector
``(sin theta, 0, cos theta)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class QSDPhaseError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(QSDPhaseError, ValueError):
    pass


class DegenerateStateError(QSDPhaseError):
    pass


class CouplingKind(str, enum.Enum):
    DISSIPATIVE = "dissipative"
    DEPHASING = "dephasing"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_j = j * dt`` for ``j = 0 .. n_steps``."""

    t_final: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t_final) and self.t_final > 0):
            raise DomainError(f"t_final must be positive and finite, got {self.t_final}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise DomainError(f"n_steps must be an integer >= 2, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_dt(cls, t_final: float, dt: float) -> "TimeGrid":
        """Grid ending exactly at ``t_final`` with step no larger than ``dt``."""
        if dt <= 0:
            raise DomainError(f"dt must be positive, got {dt}")
        n = max(2, int(math.ceil(t_final / dt - 1e-9)))
        return cls(t_final, n)

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1) * self.dt
        t[-1] = self.t_final
        return t

    @property
    def half_times(self) -> np.ndarray:
        """Grid points and step midpoints, ``2 * n_steps + 1`` values."""
        t = np.arange(2 * self.n_steps + 1) * (0.5 * self.dt)
        t[-1] = self.t_final
        return t

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t_final, self.n_steps * int(factor))

    def __len__(self):
        return self.n_steps + 1


@dataclass(frozen=True)
class PureState:
    """Unnormalized two-level amplitudes; never renormalized implicitly."""

    c_up: complex
    c_down: complex

    def __post_init__(self):
        cu, cd = complex(self.c_up), complex(self.c_down)
        if not (np.isfinite(cu) and np.isfinite(cd)):
            raise DomainError("state amplitudes must be finite")
        object.__setattr__(self, "c_up", cu)
        object.__setattr__(self, "c_down", cd)

    @classmethod
    def from_array(cls, v) -> "PureState":
        return cls(v[0], v[1])

    def to_array(self) -> np.ndarray:
        return np.array([self.c_up, self.c_down], dtype=np.complex128)

    @property
    def norm2(self) -> float:
        return abs(self.c_up) ** 2 + abs(self.c_down) ** 2

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm2)

    def normalized(self) -> "PureState":
        n = self.norm
        if n == 0.0:
            raise DegenerateStateError("cannot normalize a zero-norm state")
        return PureState(self.c_up / n, self.c_down / n)

    def inner(self, other: "PureState") -> complex:
        """``<self|other>``."""
        return self.c_up.conjugate() * other.c_up + self.c_down.conjugate() * other.c_down

    def projector(self) -> "DensityMatrix":
        v = self.to_array()
        return DensityMatrix(np.outer(v, v.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        if m.shape != (2, 2):
            raise DomainError(f"density matrix must be 2x2, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    @property
    def determinant(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=atol, rtol=0.0))

    def eigenvalues(self) -> np.ndarray:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return np.linalg.eigvalsh(h)

    def bloch_vector(self) -> np.ndarray:
        m = self.matrix
        tr = m[0, 0].real + m[1, 1].real
        x = 2.0 * m[1, 0].real
        y = 2.0 * m[1, 0].imag
        z = m[0, 0].real - m[1, 1].real
        return np.array([x, y, z]) / tr


@dataclass(frozen=True)
class SystemModel:
    """Two-level system ``H = omega sigma_z / 2`` with coupling ``lam * sigma_-`` or ``lam * sigma_z``."""

    omega: float
    lam: float
    coupling_kind: CouplingKind
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coupling_kind", CouplingKind(self.coupling_kind))
        if not math.isfinite(self.omega):
            raise DomainError("omega must be finite")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise DomainError(f"lambda must be >= 0, got {self.lam}")
        _check_theta(self.theta)

    def with_theta(self, theta: float) -> "SystemModel":
        return SystemModel(self.omega, self.lam, self.coupling_kind, theta)

    def operators(self):
        """Return ``(-i H_sys, L, L^dagger M)`` where the O-bar operator is ``F(t) * M``."""
        w, lam = self.omega, self.lam
        minus_ih = np.array([[-0.5j * w, 0.0], [0.0, 0.5j * w]], dtype=np.complex128)
        if self.coupling_kind is CouplingKind.DISSIPATIVE:
            lop = np.array([[0.0, 0.0], [lam, 0.0]], dtype=np.complex128)
            # L^dag sigma_- = lam |up><up|
            kop = np.array([[lam, 0.0], [0.0, 0.0]], dtype=np.complex128)
        else:
            lop = np.array([[lam, 0.0], [0.0, -lam]], dtype=np.complex128)
            kop = np.array([[lam, 0.0], [0.0, lam]], dtype=np.complex128)
        return minus_ih, lop, kop


@dataclass(frozen=True)
class BathSpectrum:
    """Lorentzian bath, ``alpha(t, s) = Gamma*gamma/2 * exp(-gamma|t-s| - i Omega (t-s))``."""

    Gamma: float
    gamma: float
    Omega: float = 0.0

    def __post_init__(self):
        for name in ("Gamma", "gamma", "Omega"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.Gamma < 0:
            raise DomainError(f"Gamma must be >= 0, got {self.Gamma}")
        if self.gamma <= 0:
            raise DomainError(f"gamma must be > 0, got {self.gamma}")

    @property
    def amplitude(self) -> float:
        return 0.5 * self.Gamma * self.gamma


def _check_theta(theta: float) -> None:
    if not (0.0 <= theta <= math.pi):
        raise DomainError(f"theta must lie in [0, pi], got {theta}")


def initial_state(theta: float) -> PureState:
    _check_theta(theta)
    return PureState(math.cos(0.5 * theta), math.sin(0.5 * theta))


def bloch_vectors(states: np.ndarray) -> np.ndarray:
    """Vectorized Bloch map for an ``(..., 2)`` array of amplitudes."""
    states = np.asarray(states)
    cu, cd = states[..., 0], states[..., 1]
    n2 = np.abs(cu) ** 2 + np.abs(cd) ** 2
    if np.any(n2 == 0.0):
        raise DegenerateStateError("zero-norm state has no Bloch vector")
    cross = cu.conj() * cd
    out = np.stack([2.0 * cross.real, 2.0 * cross.imag, np.abs(cu) ** 2 - np.abs(cd) ** 2], axis=-1)
    return out / n2[..., None]


def bloch_vector(state: PureState) -> np.ndarray:
    return bloch_vectors(state.to_array())


@dataclass(frozen=True, eq=False)
class BlochPath:
    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3:
            raise DomainError(f"Bloch path must have shape (n, 3), got {p.shape}")
        if not np.allclose(np.linalg.norm(p, axis=1), 1.0, atol=1e-12, rtol=0):
            raise DomainError("Bloch path points must be unit vectors")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @classmethod
    def from_states(cls, states: np.ndarray) -> "BlochPath":
        p = bloch_vectors(states)
        # the Bloch map is exact only up to rounding
        return cls(p / np.linalg.norm(p, axis=1, keepdims=True))

    def __len__(self):
        return len(self.points)
