"""Total, dynamical and geometric phases of two-level trajectories.

Sign conventions (``hbar = 1``):

* ``gamma_tot(t) = arg <psi(0)|psi(t)>``, tracked continuously in time;
* ``gamma_dyn = sum_j arg <psi_j|psi_{j+1}>``, which tends to ``-int <H> dt``
  for a closed system;
* ``gamma_geo = gamma_tot - gamma_dyn`` (the Pancharatnam phase).

Ensemble estimators work on :class:`~qsdphase.ensemble.EnsembleSums` (or a
list of trajectories, which is converted to one block per trajectory) and
attach blocked-jackknife standard errors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import BlochPath, QSDPhaseError
from .ensemble import ConfigurationError, EnsembleSums
from .qsd import Trajectory, VanishingNormError

TWO_PI = 2.0 * math.pi


class UndefinedPhaseError(QSDPhaseError):
    def __init__(self, index, what="link overlap"):
        self.index = index
        super().__init__(f"vanishing {what} at index {index}; phase undefined")


class SectionUndefinedError(UndefinedPhaseError):
    def __init__(self, index):
        super().__init__(index, "overlap with the initial state")


class GeodesicAmbiguousError(QSDPhaseError):
    pass


class NumericalDegeneracyError(QSDPhaseError):
    pass


class IndeterminateLinkError(QSDPhaseError):
    def __init__(self, index, theta_index, magnitude, std_error):
        self.index = index
        self.theta_index = theta_index
        super().__init__(
            f"averaged link {index} (theta #{theta_index}) has |mean|={magnitude:.3g} "
            f"below 10 standard errors ({std_error:.3g}); increase n_traj"
        )


class IndeterminatePhaseWarning(UserWarning):
    pass


def wrap(x):
    """Map angles to ``(-pi, pi]``."""
    y = np.mod(np.asarray(x, dtype=float) + math.pi, TWO_PI) - math.pi
    y = np.where(y == -math.pi, math.pi, y)
    return float(y) if np.ndim(y) == 0 else y


def angle_diff(a, b):
    """``a - b`` reduced to ``(-pi, pi]``."""
    return wrap(np.subtract(a, b))


@dataclass(frozen=True)
class PhaseDecomposition:
    gamma_tot: float
    gamma_dyn: float
    gamma_geo: float
    n_traj: int = 1
    std_error: float = 0.0
    std_error_tot: float = 0.0
    std_error_dyn: float = 0.0
    indeterminate: bool = False

    def __post_init__(self):
        vals = (self.gamma_tot, self.gamma_dyn, self.gamma_geo, self.std_error)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite phase decomposition {vals}")

    @property
    def principal_geo(self) -> float:
        return wrap(self.gamma_geo)


@dataclass(frozen=True)
class PhaseEstimate:
    """A single ensemble phase with its jackknife error."""

    value: float
    std_error: float
    n_traj: int
    residue: float = 0.0  # imaginary-part diagnostic where meaningful
    residue_error: float = 0.0
    indeterminate: bool = False

    @property
    def principal(self) -> float:
        return wrap(self.value)


# ----------------------------------------------------------- single trajectory

def _checked_states(traj: Trajectory, floor: float) -> np.ndarray:
    s = traj.states
    norms = np.linalg.norm(s, axis=1)
    low = np.flatnonzero(~(norms > floor))
    if low.size:
        raise VanishingNormError(int(low[0]))
    return s / norms[:, None]


def _link_overlaps(s: np.ndarray) -> np.ndarray:
    return np.einsum("ja,ja->j", s[:-1].conj(), s[1:])


def _total_phase_path(s: np.ndarray, tol: float) -> np.ndarray:
    # interior zeros only make the unwrapped representative ambiguous
    ov = s @ s[0].conj()
    if abs(ov[-1]) < tol:
        raise UndefinedPhaseError(len(ov) - 1, "final overlap with the initial state")
    return np.unwrap(np.angle(ov))


def pancharatnam_series(traj: Trajectory, floor: float = 1e-12, tol: float = 1e-12):
    """``(gamma_tot, gamma_dyn, gamma_geo)`` at every grid time, each shape ``(n_steps + 1,)``."""
    s = _checked_states(traj, floor)
    links = _link_overlaps(s)
    bad = np.flatnonzero(np.abs(links) < tol)
    if bad.size:
        raise UndefinedPhaseError(int(bad[0]))
    dyn = np.concatenate([[0.0], np.cumsum(np.angle(links))])
    tot = _total_phase_path(s, tol)
    return tot, dyn, tot - dyn


def pancharatnam_phase(traj: Trajectory, floor: float = 1e-12, tol: float = 1e-12) -> PhaseDecomposition:
    """Pancharatnam decomposition of one trajectory at its final time."""
    tot, dyn, geo = pancharatnam_series(traj, floor, tol)
    return PhaseDecomposition(float(tot[-1]), float(dyn[-1]), float(geo[-1]))


def reference_section_phase(traj: Trajectory, method: str = "log", floor: float = 1e-12,
                            tol: float = 1e-12) -> float:
    """Geometric phase from the parallel section ``chi = xi * psi~``.

    ``xi(t)`` removes the phase of ``<psi~(t)|psi~(0)>``.  The connection is
    discretized as ``-arg <chi_j|chi_{j+1}>`` (``method="log"``, exact for the
    sampled path and robust to sign flips of the section) or as the forward
    difference ``-Im <chi_j|chi_{j+1}>`` (``method="difference"``).
    """
    s = _checked_states(traj, floor)
    ov0 = s @ s[0].conj()
    mag = np.abs(ov0)
    bad = np.flatnonzero(mag < tol)
    if bad.size:
        raise SectionUndefinedError(int(bad[0]))
    chi = s * (ov0.conj() / mag)[:, None]  # xi_j = <psi_j|psi_0> / |<psi_j|psi_0>|
    links = _link_overlaps(chi)
    if method == "log":
        return float(-np.angle(links).sum())
    if method == "difference":
        return float(-links.imag.sum())
    raise ValueError(f"unknown method {method!r}")


# ----------------------------------------------------------------- solid angle

def _triangle_areas(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Signed solid angles of geodesic triangles ``(p, a_j, b_j)``."""
    num = np.einsum("i,ji->j", p, np.cross(a, b))
    den = 1.0 + a @ p + np.einsum("ji,ji->j", a, b) + b @ p
    return 2.0 * np.arctan2(num, den)


_FAN_CANDIDATES = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
    + [[sx, sy, sz] for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)],
    dtype=float,
)
_FAN_CANDIDATES /= np.linalg.norm(_FAN_CANDIDATES, axis=1, keepdims=True)


def _fan_points(points: np.ndarray) -> np.ndarray:
    # stay away from every path point and its antipode
    clearance = 1.0 - np.abs(points @ _FAN_CANDIDATES.T).max(axis=0)
    order = np.argsort(-clearance, kind="stable")
    return _FAN_CANDIDATES[order[:2]]


def _slerp_arc(a: np.ndarray, b: np.ndarray, step: float) -> np.ndarray:
    ang = math.acos(min(1.0, max(-1.0, float(a @ b))))
    n = max(1, int(math.ceil(ang / step))) if step > 0 else 1
    s = np.linspace(0.0, 1.0, n + 1)[1:-1]
    if ang < 1e-15 or s.size == 0:
        return np.empty((0, 3))
    w0 = np.sin((1 - s) * ang) / math.sin(ang)
    w1 = np.sin(s * ang) / math.sin(ang)
    return w0[:, None] * a + w1[:, None] * b


def _wrap_area(x):
    y = np.mod(np.asarray(x) + 2 * math.pi, 4 * math.pi) - 2 * math.pi
    return np.where(y <= -2 * math.pi + 1e-12, y + 4 * math.pi, y)


def _check_endpoints(a, b):
    if a @ b < -1.0 + 1e-12:
        raise GeodesicAmbiguousError("path endpoints are antipodal; closing geodesic is not unique")


def solid_angle_geodesic_closed(path: BlochPath) -> float:
    """Signed area enclosed by the path closed with the minor geodesic.

    The sign is such that half the returned value equals the Pancharatnam
    geometric phase of the corresponding two-level states (modulo ``2 pi``).
    The result lies in ``(-2 pi, 2 pi]``.
    """
    pts = path.points
    if len(pts) < 2:
        return 0.0
    _check_endpoints(pts[-1], pts[0])
    steps = np.arccos(np.clip(np.einsum("ji,ji->j", pts[:-1], pts[1:]), -1.0, 1.0))
    closing = _slerp_arc(pts[-1], pts[0], float(steps.mean()))
    loop = np.concatenate([pts, closing, pts[:1]])
    areas = []
    for p in _fan_points(pts):
        areas.append(float(_wrap_area(-_triangle_areas(p, loop[:-1], loop[1:]).sum())))
    d = _wrap_area(areas[0] - areas[1])
    if abs(d) > 1e-9:
        raise NumericalDegeneracyError(f"fan-point dependence {d:.3g} sr exceeds 1e-9")
    return areas[0]


def half_solid_angle_series(path: BlochPath) -> np.ndarray:
    """Half the geodesic-closed area of the sub-path ``0..k`` for every ``k``."""
    pts = path.points
    if np.any(pts @ pts[0] < -1.0 + 1e-12):
        raise GeodesicAmbiguousError("a sub-path ends antipodal to the start")
    out = []
    for p in _fan_points(pts):
        edges = -_triangle_areas(p, pts[:-1], pts[1:])
        closing = -_triangle_areas(p, pts[1:], np.repeat(pts[:1], len(pts) - 1, axis=0))
        out.append(np.concatenate([[0.0], _wrap_area(np.cumsum(edges) + closing)]))
    if np.abs(_wrap_area(out[0] - out[1])).max() > 1e-9:
        raise NumericalDegeneracyError("fan-point dependence exceeds 1e-9")
    return 0.5 * out[0]


def bloch_path(traj: Trajectory) -> BlochPath:
    return BlochPath.from_states(traj.states)


# -------------------------------------------------------------------- ensemble

def _as_sums(data) -> EnsembleSums:
    if isinstance(data, EnsembleSums):
        return data
    if isinstance(data, Trajectory):
        data = [data]
    return EnsembleSums.from_trajectories(data)


def _loo(total, blocks, counts):
    """Leave-one-block-out means, shape ``(B, ...)``, plus the full mean."""
    n = counts.sum()
    shape = (-1,) + (1,) * (blocks.ndim - 1)
    full = total / n
    if len(counts) == 1:
        return full[None], full
    return (total[None] - blocks) / (n - counts).reshape(shape), full


def _jackknife_se(dev: np.ndarray) -> np.ndarray:
    """Standard error from replicate deviations along axis 0."""
    b = dev.shape[0]
    if b < 2:
        return np.zeros(dev.shape[1:])
    d = dev - dev.mean(axis=0)
    return np.sqrt((b - 1) / b * (d ** 2).sum(axis=0))


def _select(values, theta_index):
    if theta_index is None:
        return values if len(values) > 1 else values[0]
    return values[theta_index]


def _total_phase_arrays(sums: EnsembleSums):
    """Unwrapped final total phase per angle, its SE and indeterminacy flags."""
    ov = sums.ov
    tot_ov = ov.sum(axis=0)
    full_path = np.unwrap(np.angle(tot_ov), axis=-1)
    value = full_path[:, -1]
    reps, mean = _loo(tot_ov[:, -1], ov[:, :, -1], sums.counts)
    se = _jackknife_se(angle_diff(np.angle(reps), np.angle(mean)[None]))
    # jackknife SE of the complex mean overlap
    mean_se = np.sqrt(_jackknife_se(reps.real - mean.real) ** 2 + _jackknife_se(reps.imag - mean.imag) ** 2)
    indeterminate = np.abs(mean) < 10.0 * mean_se
    return value, se, indeterminate, reps, mean


def ensemble_total_phase(data, theta_index: int | None = None):
    """``arg M[<psi(0)|psi(t)>]`` at the final time, unwrapped in time."""
    sums = _as_sums(data)
    value, se, indet, _, _ = _total_phase_arrays(sums)
    res = []
    for k in range(len(value)):
        if indet[k]:
            warnings.warn(f"averaged overlap for theta #{k} is below 10 standard errors; total phase is "
                          "indeterminate", IndeterminatePhaseWarning, stacklevel=2)
        res.append(PhaseEstimate(float(value[k]), float(se[k]), sums.n_traj, indeterminate=bool(indet[k])))
    return _select(res, theta_index)


def _trapezoid_weights(n1: int, dt: float) -> np.ndarray:
    w = np.full(n1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def ensemble_dynamical_phase(data, theta_index: int | None = None):
    """Average dynamical phase ``int Im M[<psi|h|psi>] dtau`` (trapezoid rule).

    The real part of the same integral is returned as ``residue``; it
    vanishes in expectation and shrinks like ``n_traj**-1/2``.
    """
    sums = _as_sums(data)
    w = _trapezoid_weights(len(sums.grid), sums.grid.dt)
    integ = sums.hexp @ w  # (B, n_theta)
    reps, mean = _loo(integ.sum(0), integ, sums.counts)
    se_im = _jackknife_se(reps.imag - mean.imag)
    se_re = _jackknife_se(reps.real - mean.real)
    res = [PhaseEstimate(float(mean[k].imag), float(se_im[k]), sums.n_traj, float(mean[k].real), float(se_re[k]))
           for k in range(len(mean))]
    return _select(res, theta_index)


def ensemble_density(data) -> np.ndarray:
    """``M[|psi><psi|]`` on the grid, shape ``(n_theta, n_steps + 1, 2, 2)``."""
    sums = _as_sums(data)
    if not sums.has_density:
        raise ConfigurationError("ensemble was accumulated without densities (want_rho=False)")
    return sums.rho.sum(axis=0) / sums.n_traj


def ensemble_density_std_error(data) -> np.ndarray:
    """Jackknife standard error of each density entry (real and imaginary parts combined)."""
    sums = _as_sums(data)
    if not sums.has_density:
        raise ConfigurationError("ensemble was accumulated without densities (want_rho=False)")
    reps, mean = _loo(sums.rho.sum(0), sums.rho, sums.counts)
    return np.sqrt(_jackknife_se(reps.real - mean.real) ** 2 + _jackknife_se(reps.imag - mean.imag) ** 2)


def density_dynamical_integrand(model, obar, rho):
    """``-(Tr[H rho] + 2 Im(F Tr[K rho]))`` for a noise-independent O-bar ``F K``."""
    A, _, K = model.operators()
    H = 1j * A
    tr_h = np.einsum("ab,...ba->...", H, rho).real
    tr_k = np.einsum("ab,...ba->...", K, rho)
    return -(tr_h + 2.0 * np.imag(obar * tr_k))


def ensemble_dynamical_phase_density(data, theta_index: int | None = None):
    """Dynamical phase from the ensemble density and the noise-independent O-bar."""
    sums = _as_sums(data)
    if not sums.has_density:
        raise ConfigurationError("ensemble was accumulated without densities (want_rho=False)")
    w = _trapezoid_weights(len(sums.grid), sums.grid.dt)
    integ = density_dynamical_integrand(sums.model, sums.obar, sums.rho) @ w  # linear in rho
    reps, mean = _loo(integ.sum(0), integ, sums.counts)
    se = _jackknife_se(reps - mean)
    res = [PhaseEstimate(float(mean[k]), float(se[k]), sums.n_traj) for k in range(len(mean))]
    return _select(res, theta_index)


def _check_links(sums: EnsembleSums):
    n = sums.n_traj
    mean = sums.link.sum(0) / n
    if n < 2:
        return mean
    var = np.maximum(sums.link_sq.sum(0) / n - np.abs(mean) ** 2, 0.0)
    se = np.sqrt(var / n)
    bad = np.argwhere(np.abs(mean) < 10.0 * se)
    if bad.size:
        k, j = bad[0]
        raise IndeterminateLinkError(int(j), int(k), float(abs(mean[k, j])), float(se[k, j]))
    return mean


def ensemble_geometric_phase_product(data, theta_index: int | None = None, check_links: bool = True):
    """Pancharatnam formula on ensemble-averaged overlaps.

    ``-arg(prod_j M[<psi_j|psi_{j+1}>] M[<psi_N|psi_0>])`` accumulated as the
    continuously unwrapped ``arg M[<psi_0|psi_N>]`` minus the sum of link
    phases, so no raw product is formed.  Returns :class:`PhaseDecomposition`
    objects whose ``gamma_dyn`` is the link-phase sum.
    """
    sums = _as_sums(data)
    if check_links:
        _check_links(sums)
    tot, tot_se, indet, tot_reps, tot_mean = _total_phase_arrays(sums)
    link_tot = sums.link.sum(0)
    link_full = np.angle(link_tot)  # (n_theta, n)
    dyn = link_full.sum(-1)
    if sums.n_blocks > 1:
        n = sums.n_traj
        reps = (link_tot[None] - sums.link) / (n - sums.counts)[:, None, None]
        dyn_dev = angle_diff(np.angle(reps), link_full[None]).sum(-1)  # (B, n_theta)
        tot_dev = angle_diff(np.angle(tot_reps), np.angle(tot_mean)[None])
        geo_se = _jackknife_se(tot_dev - dyn_dev)
        dyn_se = _jackknife_se(dyn_dev)
    else:
        geo_se = dyn_se = np.zeros_like(tot)
    res = [PhaseDecomposition(float(tot[k]), float(dyn[k]), float(tot[k] - dyn[k]), sums.n_traj,
                              float(geo_se[k]), float(tot_se[k]), float(dyn_se[k]), bool(indet[k]))
           for k in range(len(tot))]
    return _select(res, theta_index)


def ensemble_geometric_phase_difference(data, theta_index: int | None = None):
    """``gamma_tot - gamma_dyn`` with the dynamical phase from the generator expectation."""
    sums = _as_sums(data)
    tot, _, indet, tot_reps, tot_mean = _total_phase_arrays(sums)
    w = _trapezoid_weights(len(sums.grid), sums.grid.dt)
    integ = sums.hexp @ w
    reps, mean = _loo(integ.sum(0), integ, sums.counts)
    dev = angle_diff(np.angle(tot_reps), np.angle(tot_mean)[None]) - (reps.imag - mean.imag)
    se = _jackknife_se(dev)
    res = [PhaseDecomposition(float(tot[k]), float(mean[k].imag), float(tot[k] - mean[k].imag), sums.n_traj,
                              float(se[k]), indeterminate=bool(indet[k])) for k in range(len(tot))]
    return _select(res, theta_index)


def geometric_estimator_difference(data):
    """Link-product minus total-minus-dynamical geometric phase, with a paired jackknife error.

    Both estimators are evaluated on the same leave-one-block-out replicates,
    so their correlated fluctuations cancel in the error.  Returns
    ``(difference, std_error)`` arrays over initial angles; the difference is
    reduced to ``(-pi, pi]``.
    """
    sums = _as_sums(data)
    prod = _as_list(ensemble_geometric_phase_product(sums, check_links=False))
    diff = _as_list(ensemble_geometric_phase_difference(sums))
    value = wrap(np.array([a.gamma_geo - b.gamma_geo for a, b in zip(prod, diff)]))
    if sums.n_blocks < 2:
        return value, np.zeros_like(value)
    n = sums.n_traj
    link_tot = sums.link.sum(0)
    reps = (link_tot[None] - sums.link) / (n - sums.counts)[:, None, None]
    link_dev = angle_diff(np.angle(reps), np.angle(link_tot)[None]).sum(-1)
    w = _trapezoid_weights(len(sums.grid), sums.grid.dt)
    integ = sums.hexp @ w
    ireps, imean = _loo(integ.sum(0), integ, sums.counts)
    # total-phase replicates cancel between the two estimators
    return value, _jackknife_se((ireps.imag - imean.imag) - link_dev)


def _as_list(x):
    return x if isinstance(x, list) else [x]


def dynamical_phase_route_difference(data):
    """Generator-expectation minus density-route dynamical phase, with a paired jackknife error.

    Returns ``(difference, std_error)`` arrays over initial angles.
    """
    sums = _as_sums(data)
    if not sums.has_density:
        raise ConfigurationError("ensemble was accumulated without densities (want_rho=False)")
    w = _trapezoid_weights(len(sums.grid), sums.grid.dt)
    direct = (sums.hexp @ w).imag
    via_rho = density_dynamical_integrand(sums.model, sums.obar, sums.rho) @ w
    diff = direct - via_rho  # (B, n_theta), linear in the block sums
    reps, mean = _loo(diff.sum(0), diff, sums.counts)
    return mean, _jackknife_se(reps - mean)


__all__ = [
    "GeodesicAmbiguousError", "IndeterminateLinkError", "IndeterminatePhaseWarning",
    "NumericalDegeneracyError", "PhaseDecomposition", "PhaseEstimate", "SectionUndefinedError",
    "UndefinedPhaseError", "angle_diff", "bloch_path", "density_dynamical_integrand",
    "dynamical_phase_route_difference", "ensemble_density", "ensemble_density_std_error",
    "ensemble_dynamical_phase", "ensemble_dynamical_phase_density", "ensemble_geometric_phase_difference",
    "ensemble_geometric_phase_product", "ensemble_total_phase", "geometric_estimator_difference",
    "half_solid_angle_series", "pancharatnam_phase", "pancharatnam_series", "reference_section_phase",
    "solid_angle_geodesic_closed", "wrap",
]
