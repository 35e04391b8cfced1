"""Lorentzian bath correlation and colored complex Gaussian noise paths.

The stored values ``u_j`` are the noise that multiplies ``L`` in the linear
QSD equation.  They satisfy ``E[conj(u_j) u_k] = alpha(t_j, t_k)`` and
``E[u_j u_k] = 0``.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import BathSpectrum, QSDPhaseError, TimeGrid


class GeneratorKind(str, enum.Enum):
    RECURSIVE = "recursive"
    COVARIANCE_FACTOR = "covariance_factor"


class FactorizationError(QSDPhaseError):
    pass


def correlation(bath: BathSpectrum, t, s):
    """``alpha(t, s) = Gamma*gamma/2 * exp(-gamma|t-s| - i Omega (t-s))``."""
    tau = np.subtract(t, s)
    val = bath.amplitude * np.exp(-bath.gamma * np.abs(tau) - 1j * bath.Omega * tau)
    return complex(val) if np.ndim(val) == 0 else val


def derive_seed(root_seed: int, index: int) -> np.random.SeedSequence:
    """Per-trajectory stream, independent of evaluation order."""
    return np.random.SeedSequence(entropy=int(root_seed), spawn_key=(int(index),))


def _circular_normals(seed, size: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal(2 * size)
    return (x[:size] + 1j * x[size:]) * np.sqrt(0.5)


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    grid: TimeGrid
    values: np.ndarray
    seed: int | tuple
    generator_kind: GeneratorKind

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128)
        if v.shape != (len(self.grid),):
            raise ValueError(f"noise length {v.shape} does not match grid of {len(self.grid)} points")
        if not np.all(np.isfinite(v)):
            raise ValueError("noise values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def refine(self, factor: int) -> "NoiseRealization":
        """Same piecewise-linear path sampled on a grid ``factor`` times finer."""
        fine = self.grid.refine(factor)
        t = fine.times
        re = np.interp(t, self.grid.times, self.values.real)
        im = np.interp(t, self.grid.times, self.values.imag)
        return NoiseRealization(fine, re + 1j * im, self.seed, self.generator_kind)


@functools.lru_cache(maxsize=8)
def _covariance_factor(bath: BathSpectrum, grid: TimeGrid) -> np.ndarray:
    t = grid.times
    # cov[j, k] = E[u_j conj(u_k)] = conj(alpha(t_j, t_k)) = alpha(t_k, t_j)
    cov = correlation(bath, t[None, :], t[:, None])
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            f"noise covariance is not positive definite on grid t_final={grid.t_final}, "
            f"n_steps={grid.n_steps} (dt={grid.dt:g})"
        ) from exc
    factor.setflags(write=False)
    return factor


def _seed_for(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, tuple):
        return derive_seed(*seed)
    return np.random.SeedSequence(int(seed))


def sample_noise_batch(bath: BathSpectrum, grid: TimeGrid, seeds, kind=GeneratorKind.RECURSIVE,
                       backend=None) -> np.ndarray:
    """Noise paths for several seeds, shape ``(len(seeds), n_steps + 1)``."""
    kind = GeneratorKind(kind)
    n1 = len(grid)
    out = np.zeros((len(seeds), n1), dtype=np.complex128)
    if bath.Gamma == 0.0 or len(seeds) == 0:
        return out
    w = np.stack([_circular_normals(_seed_for(s), n1) for s in seeds])
    if kind is GeneratorKind.RECURSIVE:
        dt = grid.dt
        a = np.exp(-(bath.gamma + 1j * bath.Omega) * dt)
        b = np.sqrt(bath.amplitude * -np.expm1(-2.0 * bath.gamma * dt))
        zeta = _kernels.ou_recursion(w, a, b, np.sqrt(bath.amplitude), backend=backend)
        return np.conj(zeta)
    factor = _covariance_factor(bath, grid)
    return w @ factor.T


def sample_noise(bath: BathSpectrum, grid: TimeGrid, seed, kind=GeneratorKind.RECURSIVE) -> NoiseRealization:
    """One noise path.  ``seed`` may be an int, ``(root_seed, index)`` or a SeedSequence."""
    values = sample_noise_batch(bath, grid, [seed], kind)[0]
    return NoiseRealization(grid, values, seed, GeneratorKind(kind))
