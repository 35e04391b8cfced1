"""O-bar operators for the two solvable models and the linear QSD integrator.

The linear QSD generator is ``h(t) = -i H_sys + u(t) L - L^dag Obar(t)`` with
``Obar(t) = F(t) M`` where ``M = sigma_-`` (dissipative) or ``sigma_z``
(dephasing).  ``F`` is tabulated on grid points and step midpoints so the
RK4 stages never re-evaluate it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .core import (BathSpectrum, CouplingKind, PureState, QSDPhaseError, SystemModel, TimeGrid,
                   initial_state)
from .noise import NoiseRealization


class PoleError(QSDPhaseError):
    """F(t) diverges at a finite real time."""

    def __init__(self, t_pole, message=None):
        self.t_pole = float(t_pole)
        super().__init__(message or f"O-operator coefficient diverges at t = {self.t_pole:.6g}")


class TrajectoryOverflowError(QSDPhaseError):
    def __init__(self, t, index=None):
        self.t = float(t)
        self.index = index
        where = "" if index is None else f" (trajectory {index})"
        super().__init__(f"state magnitude exceeded {_kernels.OVERFLOW_LIMIT:g} at t = {self.t:.6g}{where}")


class VanishingNormError(QSDPhaseError):
    def __init__(self, index):
        self.index = int(index)
        super().__init__(f"state norm below floor at grid index {self.index}")


class OOperatorKind(str, enum.Enum):
    DISSIPATIVE_CLOSED_FORM = "dissipative_closed_form"
    DISSIPATIVE_RICCATI = "dissipative_riccati"
    DEPHASING_INTEGRAL = "dephasing_integral"


# ------------------------------------------------------------ complex helpers

def _stable_tan(z):
    """tan(z) without overflow for large |Im z|."""
    z = np.asarray(z, dtype=np.complex128)
    x2 = 2.0 * z.real
    y2 = 2.0 * z.imag
    e = np.exp(-np.abs(y2))
    den = 2.0 * e * np.cos(x2) + 1.0 + e * e
    with np.errstate(divide="ignore", invalid="ignore"):
        return (2.0 * e * np.sin(x2) + 1j * np.sign(y2) * (1.0 - e * e)) / den


def _log_cos(z):
    """A branch of log(cos z) that never overflows; only exp() and Re() of it are used."""
    z = np.asarray(z, dtype=np.complex128)
    s = np.where(z.imag >= 0.0, -1.0, 1.0)
    with np.errstate(divide="ignore"):
        return s * 1j * z + np.log1p(np.exp(-2.0 * s * 1j * z)) - math.log(2.0)


@dataclass(frozen=True)
class _DissipativeParams:
    c: complex  # gamma - i(omega - Omega)
    omega_p: complex
    a: complex  # arctan(c / omega_p)
    lam: float
    degenerate: bool  # omega_p ~ 0

    @classmethod
    def from_model(cls, model: SystemModel, bath: BathSpectrum) -> "_DissipativeParams":
        g, lam = bath.gamma, model.lam
        delta = model.omega - bath.Omega
        c = complex(g, -delta)
        # omega_p^2 = -gamma^2 + 2 gamma (Gamma lam^2 + i delta) + delta^2, principal branch.
        # Gamma enters only through Gamma * lam^2 (rescale F -> sqrt(Gamma) F).
        op = np.sqrt(complex(-g * g + delta * delta, 2.0 * g * delta) + 2.0 * g * bath.Gamma * lam * lam)
        degenerate = abs(op) < 1e-6 * max(1.0, abs(c))
        a = 0j if degenerate else complex(np.arctan(c / op))
        return cls(c, complex(op), a, lam, degenerate)


def _dissipative_pole(p: _DissipativeParams, t_max: float, rtol: float = 1e-9):
    """Earliest t in [0, t_max] where cos(a - omega_p t / 2) = 0, else None."""
    if p.degenerate:
        # 1 + c t / 2 = 0 needs c real and negative, impossible for gamma > 0
        return None
    q = 2.0 / p.omega_p
    base = q * (p.a - 0.5 * math.pi)
    step = math.pi * q  # t_k = base - k * step
    scale = 1.0 + abs(t_max)
    candidates = []
    if abs(step.imag) > 1e-14 * abs(step):
        k0 = base.imag / step.imag
        for k in (math.floor(k0), math.ceil(k0)):
            t = base - k * step
            if abs(t.imag) <= rtol * scale:
                candidates.append(t.real)
    elif abs(base.imag) <= rtol * scale:
        s = step.real
        k_lo = math.ceil((base.real - t_max) / s) if s > 0 else math.ceil(base.real / s)
        k_hi = math.floor(base.real / s) if s > 0 else math.floor((base.real - t_max) / s)
        for k in range(k_lo, k_hi + 1):
            candidates.append((base - k * step).real)
    hits = [t for t in candidates if -rtol * scale <= t <= t_max * (1 + rtol)]
    return max(0.0, min(hits)) if hits else None


def f_coefficient_dissipative(model: SystemModel, bath: BathSpectrum, t, check_poles: bool = True):
    """Closed-form F(t) for the dissipative model (``Obar = F sigma_-``)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    if model.lam == 0.0 or bath.Gamma == 0.0:
        out = np.zeros(t_arr.shape, dtype=np.complex128)
        return complex(out) if out.ndim == 0 else out
    p = _DissipativeParams.from_model(model, bath)
    if check_poles and t_arr.size:
        t_pole = _dissipative_pole(p, float(t_arr.max()))
        if t_pole is not None:
            raise PoleError(t_pole)
    lam = p.lam
    if p.degenerate:
        x = 0.5 * p.c * t_arr
        out = p.c * x / (1.0 + x) / (2.0 * lam)
    else:
        out = (p.c - p.omega_p * _stable_tan(p.a - 0.5 * p.omega_p * t_arr)) / (2.0 * lam)
    out = np.where(t_arr == 0.0, 0.0, out)  # exact boundary value, free of cancellation
    if not np.all(np.isfinite(out)):
        bad = np.flatnonzero(~np.isfinite(np.atleast_1d(out)))[0]
        raise PoleError(np.atleast_1d(t_arr)[bad])
    return complex(out) if np.ndim(out) == 0 else out


def dissipative_decay(model: SystemModel, bath: BathSpectrum, t):
    """``exp(-lam * g(t))`` with ``g(t) = int_0^t F``, from the antiderivative of tan."""
    t_arr = np.asarray(t, dtype=float)
    if model.lam == 0.0 or bath.Gamma == 0.0:
        return np.ones(t_arr.shape, dtype=np.complex128)
    p = _DissipativeParams.from_model(model, bath)
    if p.degenerate:
        return np.exp(-0.5 * p.c * t_arr) * (1.0 + 0.5 * p.c * t_arr)
    w = p.a - 0.5 * p.omega_p * t_arr
    return np.exp(-0.5 * p.c * t_arr + _log_cos(w) - _log_cos(p.a))


def g_dissipative(model: SystemModel, bath: BathSpectrum, t):
    """``g(t) = int_0^t F(s) ds`` in closed form (imaginary part on a continuous branch)."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if model.lam == 0.0 or bath.Gamma == 0.0:
        out = np.zeros(t_arr.shape, dtype=np.complex128)
    else:
        decay = dissipative_decay(model, bath, t_arr)
        order = np.argsort(t_arr)
        # continuous phase along increasing t, anchored at g(0) = 0
        ts = np.concatenate([[0.0], t_arr[order]])
        dense = np.linspace(0.0, ts[-1], max(2, int(ts[-1] * 200) + 2))
        grid = np.union1d(dense, ts)
        ph = np.unwrap(np.angle(dissipative_decay(model, bath, grid)))
        phase = np.interp(t_arr, grid, ph)
        out = -(np.log(np.abs(decay)) + 1j * phase) / model.lam
    return complex(out[0]) if np.ndim(t) == 0 else out


def f_riccati_dissipative(model: SystemModel, bath: BathSpectrum, t, rtol: float = 1e-12, atol: float = 1e-14):
    """F(t) from ``dF/dt = lam alpha(t,t) - (gamma + i Omega) F + (i omega + lam F) F``, F(0) = 0."""
    from scipy.integrate import solve_ivp

    t_arr = np.asarray(t, dtype=float)
    if model.lam == 0.0 or bath.Gamma == 0.0:
        out = np.zeros(t_arr.shape, dtype=np.complex128)
        return complex(out) if out.ndim == 0 else out
    lam, w = model.lam, model.omega
    src = lam * bath.amplitude
    k = complex(bath.gamma, bath.Omega)

    def rhs(_, y):
        f = complex(y[0], y[1])
        d = src - k * f + (1j * w + lam * f) * f
        return [d.real, d.imag]

    t_max = float(t_arr.max()) if t_arr.size else 0.0
    sol = solve_ivp(rhs, (0.0, max(t_max, 1e-300)), [0.0, 0.0], method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True)
    if sol.status != 0:
        raise PoleError(sol.t[-1], f"Riccati integration failed near t = {sol.t[-1]:.6g}: {sol.message}")
    y = sol.sol(t_arr.ravel())
    out = (y[0] + 1j * y[1]).reshape(t_arr.shape)
    return complex(out) if out.ndim == 0 else out


def obar_dephasing(model: SystemModel, bath: BathSpectrum, t):
    """Coefficient of sigma_z in Obar: ``lam * int_0^t alpha(t, s) ds``."""
    t_arr = np.asarray(t, dtype=float)
    k = complex(bath.gamma, bath.Omega)
    out = model.lam * bath.amplitude * -np.expm1(-k * t_arr) / k
    return complex(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class OOperatorSpec:
    """Tabulated O-bar coefficient on grid points and midpoints (``2 n + 1`` values)."""

    kind: OOperatorKind
    grid: TimeGrid
    half_values: np.ndarray

    def __post_init__(self):
        v = np.array(self.half_values, dtype=np.complex128)
        if v.shape != (2 * self.grid.n_steps + 1,):
            raise ValueError("half_values must hold 2 * n_steps + 1 entries")
        if not np.all(np.isfinite(v)):
            raise PoleError(self.grid.half_times[np.argmax(~np.isfinite(v))])
        v.setflags(write=False)
        object.__setattr__(self, "kind", OOperatorKind(self.kind))
        object.__setattr__(self, "half_values", v)

    @property
    def values(self) -> np.ndarray:
        """F(t_j) on the grid."""
        return self.half_values[::2]

    @property
    def coupling_kind(self) -> CouplingKind:
        if self.kind is OOperatorKind.DEPHASING_INTEGRAL:
            return CouplingKind.DEPHASING
        return CouplingKind.DISSIPATIVE

    @classmethod
    def build(cls, model: SystemModel, bath: BathSpectrum, grid: TimeGrid, kind=None) -> "OOperatorSpec":
        if kind is None:
            kind = (OOperatorKind.DISSIPATIVE_CLOSED_FORM if model.coupling_kind is CouplingKind.DISSIPATIVE
                    else OOperatorKind.DEPHASING_INTEGRAL)
        kind = OOperatorKind(kind)
        t = grid.half_times
        if kind is OOperatorKind.DISSIPATIVE_CLOSED_FORM:
            vals = f_coefficient_dissipative(model, bath, t)
        elif kind is OOperatorKind.DISSIPATIVE_RICCATI:
            vals = f_riccati_dissipative(model, bath, t)
        else:
            vals = obar_dephasing(model, bath, t)
        spec = cls(kind, grid, vals)
        if spec.coupling_kind is not model.coupling_kind:
            raise ValueError(f"{kind.value} O-operator does not match {model.coupling_kind.value} coupling")
        return spec


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Unnormalized states ``psi(t_j)`` plus what is needed to re-evaluate the generator."""

    grid: TimeGrid
    states: np.ndarray  # (n_steps + 1, 2)
    noise_seed: object
    model: SystemModel
    bath: BathSpectrum
    noise: np.ndarray = field(default=None)  # u(t_j)
    obar: np.ndarray = field(default=None)  # O-bar coefficient at t_j

    def __post_init__(self):
        s = np.array(self.states, dtype=np.complex128)
        if s.shape != (len(self.grid), 2):
            raise ValueError(f"states must have shape ({len(self.grid)}, 2), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("trajectory states must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)
        for name in ("noise", "obar"):
            v = getattr(self, name)
            v = np.zeros(len(self.grid), dtype=np.complex128) if v is None else np.array(v, dtype=np.complex128)
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def __len__(self):
        return len(self.states)

    def state(self, j: int) -> PureState:
        return PureState.from_array(self.states[j])

    def with_states(self, states) -> "Trajectory":
        return replace(self, states=states)

    def generators(self) -> np.ndarray:
        """``h(t_j)`` for every grid point, shape ``(n_steps + 1, 2, 2)``."""
        A, L, K = self.model.operators()
        return A[None] + self.noise[:, None, None] * L[None] - self.obar[:, None, None] * K[None]


def integrate_trajectory(model: SystemModel, bath: BathSpectrum, ospec: OOperatorSpec,
                         noise: NoiseRealization, psi0=None, backend=None) -> Trajectory:
    """Fixed-step RK4 solution of the linear QSD equation along one noise path."""
    if noise.grid != ospec.grid:
        raise ValueError("noise grid and O-operator grid differ")
    if ospec.coupling_kind is not model.coupling_kind:
        raise ValueError("O-operator kind does not match the model's coupling")
    grid = noise.grid
    psi = initial_state(model.theta) if psi0 is None else psi0
    psi = psi.to_array() if isinstance(psi, PureState) else np.asarray(psi, dtype=np.complex128)
    states, status = _kernels.propagate(model.operators(), noise.values[None, :], ospec.half_values,
                                        grid.dt, psi[None, :], backend=backend)
    if status[0] >= 0:
        raise TrajectoryOverflowError(grid.times[status[0]])
    return Trajectory(grid, states[0], noise.seed, model, bath, noise.values, ospec.values)


def normalize_trajectory(traj: Trajectory, floor: float = 1e-12) -> Trajectory:
    norms = np.linalg.norm(traj.states, axis=1)
    low = np.flatnonzero(~(norms > floor))
    if low.size:
        raise VanishingNormError(low[0])
    return traj.with_states(traj.states / norms[:, None])
