"""Independent reference values.

Two families live here:

* closed forms for the solvable dissipative (``L = lambda sigma_-``) and
  dephasing (``L = lambda sigma_z``) models, with their Markov, strong-memory
  and large-``gamma`` limits;
* brute-force evolution of the full system plus a discretized bath, used to
  validate the unraveling ``rho(t) = M[|psi><psi|]``.

Phases follow the conventions of :mod:`qsdphase.phase`:
``gamma_tot = arg M[<psi(0)|psi(t)>]`` and ``gamma_geo = gamma_tot - gamma_dyn``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import BathSpectrum, CouplingKind, QSDPhaseError, SystemModel, TimeGrid, _check_theta
from .qsd import dissipative_decay, f_coefficient_dissipative


class BathFitError(QSDPhaseError):
    pass


def _unwrapped_arg(z_of_t, t: float, n_dense: int = 4001) -> float:
    ts = np.linspace(0.0, t, max(2, n_dense))
    return float(np.unwrap(np.angle(z_of_t(ts)))[-1])


# ------------------------------------------------------------------ dissipative

def _dissipative_model(theta, omega, lam):
    return SystemModel(omega, lam, CouplingKind.DISSIPATIVE, theta)


def dissipative_total_overlap(theta, omega, lam, bath: BathSpectrum, t):
    """Exact ``M[<psi(0)|psi(t)>]`` for the dissipative model."""
    model = _dissipative_model(theta, omega, lam)
    t = np.asarray(t, dtype=float)
    decay = dissipative_decay(model, bath, t)
    c2, s2 = math.cos(0.5 * theta) ** 2, math.sin(0.5 * theta) ** 2
    return c2 * np.exp(-0.5j * omega * t) * decay + s2 * np.exp(0.5j * omega * t)


def dissipative_phases_analytic(theta, omega, lam, bath: BathSpectrum, t, n_dense: int = 4001):
    """``(gamma_tot, gamma_dyn)`` in closed form; ``gamma_tot`` unwrapped in time."""
    _check_theta(theta)
    model = _dissipative_model(theta, omega, lam)
    f_coefficient_dissipative(model, bath, np.array([t]))  # pole check over [0, t]
    tot = _unwrapped_arg(lambda ts: dissipative_total_overlap(theta, omega, lam, bath, ts), t, n_dense)
    c2 = math.cos(0.5 * theta) ** 2

    def integrand(s):
        d = abs(complex(dissipative_decay(model, bath, s))) ** 2
        f = complex(f_coefficient_dissipative(model, bath, s, check_poles=False))
        return 0.5 * omega - d * c2 * (omega + 2.0 * lam * f.imag)

    dyn, _ = integrate.quad(integrand, 0.0, t, limit=400, epsabs=1e-13, epsrel=1e-12)
    return tot, dyn


def dissipative_geometric_phase(theta, omega, lam, bath: BathSpectrum, t) -> float:
    tot, dyn = dissipative_phases_analytic(theta, omega, lam, bath, t)
    return tot - dyn


def markov_reduction_factor(omega, lam, Gamma: float = 1.0) -> float:
    """``(1 - exp(-x)) / x`` with ``x = 2 pi Gamma lambda^2 / omega``."""
    x = 2.0 * math.pi * Gamma * lam ** 2 / omega
    return 1.0 if x == 0.0 else -math.expm1(-x) / x


def dissipative_markov_value(theta, omega, lam, Gamma: float = 1.0) -> float:
    """Markov-limit geometric phase at ``t = 2 pi / omega``."""
    _check_theta(theta)
    return math.pi * (math.cos(theta) + 1.0) * markov_reduction_factor(omega, lam, Gamma)


def dissipative_strong_memory_value(theta, gamma, Gamma, lam) -> float:
    """First-order small-``gamma`` geometric phase at ``t = 2 pi / omega``."""
    return math.pi * (math.cos(theta) + 1.0) * (1.0 - gamma * Gamma * lam ** 2 / 2.0)


# -------------------------------------------------------------------- dephasing

def _dephasing_exponent(lam, bath: BathSpectrum, t):
    """``lambda^2 int_0^t int_0^tau alpha(tau, s) ds dtau``."""
    k = bath.gamma + 1j * bath.Omega
    t = np.asarray(t, dtype=float)
    return lam ** 2 * bath.amplitude * (k * t + np.expm1(-k * t)) / k ** 2


def dephasing_total_overlap(theta, omega, lam, bath: BathSpectrum, t):
    """Exact ``M[<psi(0)|psi(t)>]`` for the dephasing model."""
    t = np.asarray(t, dtype=float)
    c = math.cos(theta)
    return 0.5 * ((c + 1.0) - (c - 1.0) * np.exp(1j * omega * t)) * np.exp(
        -_dephasing_exponent(lam, bath, t) - 0.5j * omega * t)


def dephasing_dynamical_analytic(theta, omega, lam, bath: BathSpectrum, t) -> float:
    g, W = bath.gamma, bath.Omega
    q = g ** 2 + W ** 2
    bath_part = bath.Gamma * g * lam ** 2 * (
        W * (g * (g * t - 2.0) + W ** 2 * t) + math.exp(-g * t) * ((g ** 2 - W ** 2) * math.sin(W * t)
                                                               + 2.0 * g * W * math.cos(W * t))) / q ** 2
    return bath_part - 0.5 * omega * t * math.cos(theta)


def dephasing_phases_analytic(theta, omega, lam, bath: BathSpectrum, t, n_dense: int = 4001):
    """``(gamma_tot, gamma_dyn)``; ``gamma_tot`` unwrapped in time."""
    _check_theta(theta)
    tot = _unwrapped_arg(lambda ts: dephasing_total_overlap(theta, omega, lam, bath, ts), t, n_dense)
    return tot, dephasing_dynamical_analytic(theta, omega, lam, bath, t)


def dephasing_phase_analytic(theta, omega, lam, bath: BathSpectrum, t) -> float:
    tot, dyn = dephasing_phases_analytic(theta, omega, lam, bath, t)
    return tot - dyn


def dephasing_phase_one_period(theta, omega, lam, bath: BathSpectrum) -> float:
    """Closed form of the dephasing geometric phase at ``t = 2 pi / omega`` (principal-branch arg)."""
    _check_theta(theta)
    g, W, G, w = bath.gamma, bath.Omega, bath.Gamma, omega
    q = g ** 2 + W ** 2
    e = math.exp(2.0 * math.pi * g / w)
    inner = 2.0 * e * (-math.pi * q * (g ** 2 * w + g * G * lam ** 2 * W + w * W ** 2)
                       + g ** 2 * G * lam ** 2 * w * W + math.pi * w * q ** 2 * math.cos(theta))
    inner += g * G * lam ** 2 * w * ((W ** 2 - g ** 2) * math.sin(2.0 * math.pi * W / w)
                                     - 2.0 * g * W * math.cos(2.0 * math.pi * W / w))
    return inner / (e * 2.0 * w * q ** 2)


def closed_system_phase(theta) -> float:
    """``pi (cos theta - 1)``, the isolated-system value at ``t = 2 pi / omega``."""
    return math.pi * (math.cos(theta) - 1.0)


def dephasing_shift(omega, lam, Gamma, gamma) -> float:
    """Theta-independent reduction of the geometric phase for ``Omega = omega``, ``t = 2 pi / omega``."""
    q = gamma ** 2 + omega ** 2
    return gamma * Gamma * lam ** 2 * (math.pi * q + gamma * omega * math.expm1(-2.0 * math.pi * gamma / omega)) / q ** 2


def dephasing_large_gamma(theta, omega, lam, Gamma, gamma, Omega) -> float:
    """Second-order ``1/gamma`` expansion around the Markov value."""
    return (closed_system_phase(theta) - math.pi * Gamma * lam ** 2 * Omega / (gamma * omega)
            + Gamma * lam ** 2 * Omega / gamma ** 2)


def shift_maximum(omega=1.0, lam=1.0, Gamma=1.0, bounds=(0.05, 20.0)):
    """``(gamma*, shift(gamma*))`` maximizing :func:`dephasing_shift`."""
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda lg: -dephasing_shift(omega, lam, Gamma, math.exp(lg)),
                          bounds=tuple(math.log(b) for b in bounds), method="bounded",
                          options={"xatol": 1e-10})
    gs = math.exp(res.x)
    return gs, dephasing_shift(omega, lam, Gamma, gs)


# ------------------------------------------------------------ discretized bath

@dataclass(frozen=True, eq=False)
class DiscretizedBath:
    """Finite set of bath modes with ``sum_k |g_k|^2 e^{-i w_k tau}`` approximating ``alpha(tau)``."""

    omegas: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        w = np.array(self.omegas, dtype=float)
        g = np.array(self.couplings, dtype=np.complex128)
        if w.ndim != 1 or w.size < 1 or g.shape != w.shape:
            raise ValueError("need K >= 1 mode frequencies and the same number of couplings")
        w.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "couplings", g)

    @classmethod
    def lorentzian(cls, bath: BathSpectrum, n_modes: int = 201, half_width: float | None = None):
        """Uniform grid over ``[Omega - W, Omega + W]`` with ``|g_k|^2 = J(w_k) dw``; default ``W = 20 gamma``."""
        W = 20.0 * bath.gamma if half_width is None else float(half_width)
        w = np.linspace(bath.Omega - W, bath.Omega + W, int(n_modes))
        dw = w[1] - w[0] if n_modes > 1 else 2.0 * W
        J = (bath.Gamma * bath.gamma ** 2 / (2.0 * math.pi)) / ((w - bath.Omega) ** 2 + bath.gamma ** 2)
        return cls(w, np.sqrt(J * dw))

    @property
    def n_modes(self) -> int:
        return len(self.omegas)

    @property
    def recurrence_time(self) -> float:
        if self.n_modes < 2:
            return math.inf
        return 2.0 * math.pi / float(np.min(np.diff(self.omegas)))

    def correlation(self, tau):
        tau = np.asarray(tau, dtype=float)
        w2 = np.abs(self.couplings) ** 2
        return np.exp(-1j * np.multiply.outer(tau, self.omegas)) @ w2

    def fit_residual(self, bath: BathSpectrum, t_max: float, n_points: int = 2001) -> float:
        tau = np.linspace(0.0, t_max, n_points)
        ref = bath.amplitude * np.exp(-bath.gamma * tau - 1j * bath.Omega * tau)
        return float(np.abs(self.correlation(tau) - ref).max())

    def check(self, bath: BathSpectrum, t_max: float, tolerance: float | None = None) -> float:
        """Raise :class:`BathFitError` if the kernel fit or recurrence window fails on ``[0, t_max]``."""
        tol = 1e-3 * bath.amplitude if tolerance is None else tolerance
        if t_max >= self.recurrence_time:
            raise BathFitError(f"t_max={t_max} exceeds the recurrence time {self.recurrence_time:.4g}")
        r = self.fit_residual(bath, t_max)
        if r > tol:
            raise BathFitError(f"correlation fit residual {r:.3g} exceeds tolerance {tol:.3g}")
        return r


def brute_force_dissipative_density(theta, omega, lam, dbath: DiscretizedBath, grid: TimeGrid,
                                    bath: BathSpectrum | None = None, fit_tolerance: float | None = None):
    """Reduced density matrices ``(n_steps + 1, 2, 2)`` from the single-excitation sector.

    The amplitudes of ``|up, vac>`` and ``|down, 1_k>`` evolve under an exact
    eigendecomposition; ``|down, vac>`` only acquires the phase ``e^{i omega t/2}``.
    Passing ``bath`` validates the discretization against it first.
    """
    _check_theta(theta)
    if bath is not None:
        dbath.check(bath, grid.t_final, fit_tolerance)
    K = dbath.n_modes
    real = not np.any(dbath.couplings.imag)
    H = np.zeros((K + 1, K + 1), dtype=float if real else np.complex128)
    H[0, 0] = 0.5 * omega
    H[np.arange(1, K + 1), np.arange(1, K + 1)] = -0.5 * omega + dbath.omegas
    g = dbath.couplings.real if real else dbath.couplings
    H[1:, 0] = lam * g
    H[0, 1:] = lam * np.conj(g)
    E, V = np.linalg.eigh(H)
    c0 = V[0].conj() * math.cos(0.5 * theta)  # V^dagger e_0 scaled
    t = grid.times
    c_up = (np.exp(-1j * np.outer(t, E)) * c0) @ V[0]
    excited = np.abs((np.exp(-1j * np.outer(t, E)) * c0) @ V[1:].T) ** 2
    c_dn = math.sin(0.5 * theta) * np.exp(0.5j * omega * t)
    rho = np.empty((len(t), 2, 2), dtype=np.complex128)
    rho[:, 0, 0] = np.abs(c_up) ** 2
    rho[:, 1, 1] = np.abs(c_dn) ** 2 + excited.sum(axis=1)
    rho[:, 0, 1] = c_up * np.conj(c_dn)
    rho[:, 1, 0] = np.conj(rho[:, 0, 1])
    return rho


def dephasing_coherence_quadrature(theta, omega, lam, bath: BathSpectrum, t) -> complex:
    """``rho_updown(t)`` with the decoherence exponent from adaptive double quadrature."""
    _check_theta(theta)
    t = float(t)

    def re_alpha(s, tau):
        return bath.amplitude * math.exp(-bath.gamma * (tau - s)) * math.cos(bath.Omega * (tau - s))

    expo = 0.0
    if t > 0.0:
        expo, _ = integrate.dblquad(re_alpha, 0.0, t, 0.0, lambda tau: tau, epsabs=1e-14, epsrel=1e-12)
    rho0 = 0.5 * math.sin(theta)
    return complex(rho0 * np.exp(-1j * omega * t) * math.exp(-4.0 * lam ** 2 * expo))


def dephasing_coherence_modes(theta, omega, lam, dbath: DiscretizedBath, t):
    """``rho_updown(t)`` from exact coherent-state displacement of each discrete mode."""
    _check_theta(theta)
    t = np.asarray(t, dtype=float)
    w2 = np.abs(dbath.couplings) ** 2
    # (1 - cos wt) / w^2 written to stay finite at w = 0
    x = np.multiply.outer(t, dbath.omegas)
    kern = 0.5 * np.multiply.outer(t, np.ones_like(dbath.omegas)) ** 2 * np.sinc(x / (2.0 * math.pi)) ** 2
    expo = kern @ w2
    return 0.5 * math.sin(theta) * np.exp(-1j * omega * t) * np.exp(-4.0 * lam ** 2 * expo)


def brute_force_dephasing_coherence(theta, omega, lam, bath: BathSpectrum, t) -> complex:
    """Exact ``rho_updown(t)`` of the dephasing model; populations stay ``cos^2``, ``sin^2`` of ``theta/2``."""
    return dephasing_coherence_quadrature(theta, omega, lam, bath, t)


def brute_force_dephasing_density(theta, omega, lam, bath: BathSpectrum, grid: TimeGrid):
    """Density matrices on a grid (closed-form exponent, validated against the quadrature in tests)."""
    _check_theta(theta)
    t = grid.times
    coh = 0.5 * math.sin(theta) * np.exp(-1j * omega * t) * np.exp(-4.0 * _dephasing_exponent(lam, bath, t).real)
    rho = np.empty((len(t), 2, 2), dtype=np.complex128)
    rho[:, 0, 0] = math.cos(0.5 * theta) ** 2
    rho[:, 1, 1] = math.sin(0.5 * theta) ** 2
    rho[:, 0, 1] = coh
    rho[:, 1, 0] = np.conj(coh)
    return rho
