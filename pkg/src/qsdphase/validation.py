"""Cross-checks of the QSD stack against the analytic and brute-force oracles.

Each ``check_*`` function returns a list of :class:`Check` records.  The
``validate`` subcommand, the figure modes and the acceptance tests all call
these with their own ensemble sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .config import Tolerances
from .core import BathSpectrum, CouplingKind, SystemModel, TimeGrid
from .ensemble import run_ensemble, simulate_trajectories
from .noise import GeneratorKind, correlation, derive_seed, sample_noise, sample_noise_batch
from .phase import (
    IndeterminateLinkError,
    bloch_path,
    dynamical_phase_route_difference,
    ensemble_density,
    ensemble_density_std_error,
    ensemble_geometric_phase_difference,
    ensemble_geometric_phase_product,
    geometric_estimator_difference,
    half_solid_angle_series,
    pancharatnam_phase,
    pancharatnam_series,
    reference_section_phase,
    wrap,
)
from .qsd import (
    OOperatorSpec,
    f_coefficient_dissipative,
    f_riccati_dissipative,
    integrate_trajectory,
)

TWO_PI = 2.0 * math.pi
FIG2_GAMMAS = (0.1, 0.5, 1.2, 100.0)
FIG3_GAMMAS = (100.0, 7.0, 0.3, 0.7)


@dataclass(frozen=True)
class Check:
    name: str
    deviation: float
    tolerance: float
    value: float | None = None
    reference: float | None = None
    std_error: float | None = None

    @property
    def passed(self) -> bool:
        return bool(self.deviation <= self.tolerance)  # NaN fails

    def as_dict(self) -> dict:
        d = {"name": self.name, "deviation": self.deviation, "tolerance": self.tolerance,
             "verdict": "pass" if self.passed else "fail"}
        for k in ("value", "reference", "std_error"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d


@dataclass
class EnsembleSettings:
    n_traj: int = 2000
    dt: float = 1e-3
    root_seed: int = 0
    workers: int = 1
    n_blocks: int = 100
    checkpoint_dir: str | None = None
    tol: Tolerances = field(default_factory=Tolerances)

    def checkpoint(self, tag: str):
        if not self.checkpoint_dir:
            return None
        return f"{self.checkpoint_dir}/{tag}.npz"


def _stat_check(name, value, reference, se, tol: Tolerances, n_sigma=None):
    n_sigma = tol.n_sigma if n_sigma is None else n_sigma
    dev = abs(wrap(value - reference))
    return Check(name, float(dev), float(n_sigma * se + tol.deterministic), float(value), float(reference), float(se))


def _as_list(x):
    return x if isinstance(x, list) else [x]


def theta_grid(n: int = 9):
    return [math.pi * k / (n - 1) for k in range(n)] if n > 1 else [1.0]


# ---------------------------------------------------------------- criterion 1

def figure1_data(seed: int = 0, dt: float = 1e-3, t_final: float = TWO_PI, gamma: float = 1.0):
    """Single dissipative trajectory at ``omega = lambda = 1``, ``theta = 1``."""
    model = SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, 1.0)
    bath = BathSpectrum(1.0, gamma, 0.0)
    grid = TimeGrid.from_dt(t_final, dt)
    traj = integrate_trajectory(model, bath, OOperatorSpec.build(model, bath, grid), sample_noise(bath, grid, seed))
    tot, dyn, geo = pancharatnam_series(traj)
    path = bloch_path(traj)
    half = half_solid_angle_series(path)
    # report the solid-angle series on the Pancharatnam branch
    half_branch = geo + wrap(half - geo)
    return traj, {"t": grid.times, "tot": tot, "dyn": dyn, "geo": geo, "half_solid_angle": half_branch,
                  "bloch": path.points, "norm2": np.sum(np.abs(traj.states) ** 2, axis=1)}


def check_solid_angle(seed: int = 0, dt: float = 1e-3, tol: Tolerances = Tolerances()):
    _, d = figure1_data(seed, dt)
    dev = float(np.abs(wrap(d["geo"] - d["half_solid_angle"])).max())
    return [Check("solid_angle_law/max_pointwise", dev, tol.solid_angle)]


# ---------------------------------------------------------- criteria 2, 3, 4

@dataclass
class Curve:
    """Rows ``(theta, analytic, ensemble, std_error)`` plus the estimator that produced them."""

    rows: list
    estimator: str

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def ensemble_curve(kind, gamma, Omega, thetas, s: EnsembleSettings, analytic, lam=1.0, Gamma=1.0, tag=""):
    """One theta sweep; the ensemble value is put on the analytic branch.

    The link-product estimator is used unless one of its averaged links is
    indeterminate, in which case the total-minus-dynamical estimator (whose
    only nonlinear step is the final overlap) replaces it for the whole curve.
    """
    model = SystemModel(1.0, lam, kind, thetas[0])
    bath = BathSpectrum(Gamma, gamma, Omega)
    grid = TimeGrid.from_dt(TWO_PI, s.dt)
    sums = run_ensemble(model, bath, grid, s.n_traj, thetas, root_seed=s.root_seed, n_blocks=s.n_blocks,
                        workers=s.workers, checkpoint=s.checkpoint(tag or f"{kind}_{gamma:g}_{Omega:g}"))
    try:
        est = _as_list(ensemble_geometric_phase_product(sums))
        estimator = "link_product"
    except IndeterminateLinkError:
        est = _as_list(ensemble_geometric_phase_difference(sums))
        estimator = "total_minus_dynamical"
    rows = []
    for th, e in zip(thetas, est):
        ref = analytic(th)
        rows.append((th, ref, ref + wrap(e.gamma_geo - ref), e.std_error))
    return Curve(rows, estimator)


def figure2_data(s: EnsembleSettings, thetas=None, gammas=FIG2_GAMMAS):
    thetas = theta_grid() if thetas is None else list(thetas)
    out = {}
    for g in gammas:
        bath = BathSpectrum(1.0, g, 0.0)
        out[g] = ensemble_curve(CouplingKind.DISSIPATIVE, g, 0.0, thetas, s,
                                lambda th, b=bath: oracle.dissipative_geometric_phase(th, 1.0, 1.0, b, TWO_PI),
                                tag=f"fig2_gamma_{g:g}")
    return out


def check_dissipative(s: EnsembleSettings, thetas=None, data=None):
    data = figure2_data(s, thetas) if data is None else data
    checks = []
    for g, rows in data.items():
        for th, ref, ens, se in rows:
            checks.append(_stat_check(f"fig2/gamma={g:g}/theta={th:.4f}", ens, ref, se, s.tol))
    if 100.0 in data:
        for th, ref, _, _ in data[100.0]:
            mk = oracle.dissipative_markov_value(th, 1.0, 1.0)
            checks.append(Check(f"fig2/markov/theta={th:.4f}", abs(wrap(ref - mk)), s.tol.markov, ref, mk))
    return checks


def check_dephasing_exactness(s: EnsembleSettings, thetas=None, gamma=1.0, lam=1.0, Gamma=1.0):
    thetas = theta_grid() if thetas is None else list(thetas)
    bath = BathSpectrum(Gamma, gamma, 0.0)
    dense = np.linspace(0.0, math.pi, 20)
    dev = max(abs(wrap(oracle.dephasing_phase_analytic(th, 1.0, lam, bath, TWO_PI) - oracle.closed_system_phase(th)))
              for th in dense)
    checks = [Check("dephasing_omega0/analytic", float(dev), 1e-12)]
    rows = ensemble_curve(CouplingKind.DEPHASING, gamma, 0.0, thetas, s, oracle.closed_system_phase,
                          lam=lam, Gamma=Gamma, tag="dephasing_omega0")
    for th, ref, ens, se in rows:
        checks.append(_stat_check(f"dephasing_omega0/ensemble/theta={th:.4f}", ens, ref, se, s.tol))
    return checks


def figure3_data(s: EnsembleSettings, thetas=None, gammas=FIG3_GAMMAS):
    thetas = theta_grid() if thetas is None else list(thetas)
    out = {}
    for g in gammas:
        bath = BathSpectrum(1.0, g, 1.0)
        out[g] = ensemble_curve(CouplingKind.DEPHASING, g, 1.0, thetas, s,
                                lambda th, b=bath: oracle.dephasing_phase_analytic(th, 1.0, 1.0, b, TWO_PI),
                                tag=f"fig3_gamma_{g:g}")
    return out


def check_shift(s: EnsembleSettings, thetas=None, data=None, with_ensemble=True):
    dense = np.linspace(0.0, math.pi, 20)
    worst = 0.0
    for g in FIG3_GAMMAS:
        bath = BathSpectrum(1.0, g, 1.0)
        shift = oracle.dephasing_shift(1.0, 1.0, 1.0, g)
        for th in dense:
            c2 = oracle.dephasing_phase_one_period(th, 1.0, 1.0, bath)
            worst = max(worst, abs(oracle.closed_system_phase(th) - c2 - shift))
    g_star, peak = oracle.shift_maximum()
    checks = [Check("shift/theta_independence", worst, 1e-10),
              Check("shift/maximum_value", abs(peak - 1.32), 0.01, peak, 1.32),
              Check("shift/maximum_location", abs(g_star - 1.0), 0.1, g_star, 1.0)]
    if not with_ensemble:
        return checks
    data = figure3_data(s, thetas) if data is None else data
    for g, rows in data.items():
        shift = oracle.dephasing_shift(1.0, 1.0, 1.0, g)
        for th, ref, ens, se in rows:
            shift_ens = oracle.closed_system_phase(th) - ens
            checks.append(_stat_check(f"fig3/shift/gamma={g:g}/theta={th:.4f}", shift_ens, shift, se, s.tol))
    return checks


# ---------------------------------------------------------------- criterion 5

def check_unraveling(s: EnsembleSettings, t_final: float = 2.0, n_modes: int = 201):
    tol = s.tol
    checks = []
    grid = TimeGrid.from_dt(t_final, s.dt)
    # dissipative: single-excitation brute force with the discretized bath
    theta = 1.0
    bath = BathSpectrum(1.0, 1.0, 0.0)
    dbath = oracle.DiscretizedBath.lorentzian(bath, n_modes)
    fit = dbath.fit_residual(bath, t_final)
    checks.append(Check("unraveling/dissipative/bath_fit", fit, tol.bath_fit * bath.amplitude))
    ref = oracle.brute_force_dissipative_density(theta, 1.0, 1.0, dbath, grid, bath, tol.bath_fit * bath.amplitude)
    model = SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, theta)
    sums = run_ensemble(model, bath, grid, s.n_traj, [theta], root_seed=s.root_seed, n_blocks=s.n_blocks,
                        workers=s.workers, want_rho=True, checkpoint=s.checkpoint("unraveling_dissipative"))
    checks.append(_density_check("unraveling/dissipative/density", sums, ref, tol))
    # dephasing: decoherence functional, itself checked against the mode sum
    theta = math.pi / 2
    bath = BathSpectrum(1.0, 1.0, 1.0)
    fine = oracle.DiscretizedBath.lorentzian(bath, 2001, 200.0)
    worst = 0.0
    for t in (0.5, 1.0, 1.5, 2.0):
        q = oracle.dephasing_coherence_quadrature(theta, 1.0, 1.0, bath, t)
        worst = max(worst, abs(q - complex(oracle.dephasing_coherence_modes(theta, 1.0, 1.0, fine, t))))
    checks.append(Check("unraveling/dephasing/quadrature_vs_modes", worst, 1e-6))
    ref = oracle.brute_force_dephasing_density(theta, 1.0, 1.0, bath, grid)
    q_end = oracle.dephasing_coherence_quadrature(theta, 1.0, 1.0, bath, grid.t_final)
    checks.append(Check("unraveling/dephasing/closed_form_vs_quadrature", abs(ref[-1, 0, 1] - q_end), 1e-10))
    model = SystemModel(1.0, 1.0, CouplingKind.DEPHASING, theta)
    sums = run_ensemble(model, bath, grid, s.n_traj, [theta], root_seed=s.root_seed, n_blocks=s.n_blocks,
                        workers=s.workers, want_rho=True, checkpoint=s.checkpoint("unraveling_dephasing"))
    checks.append(_density_check("unraveling/dephasing/density", sums, ref, tol, bath_tol=0.0))
    return checks


def _density_check(name, sums, ref, tol: Tolerances, bath_tol=None):
    """Worst entry of ``|rho_ens - rho_ref| / (n_sigma SE + bath tolerance)``, reported as a ratio against 1."""
    bath_tol = tol.bath_density if bath_tol is None else bath_tol
    rho = ensemble_density(sums)[0]
    se = ensemble_density_std_error(sums)[0]
    dev = np.abs(rho - ref)
    allowed = tol.density_n_sigma * se + bath_tol + tol.deterministic
    ratio = dev / allowed
    k = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return Check(name + "/worst_entry_ratio", float(ratio[k]), 1.0, float(dev[k]), 0.0, float(se[k]))


# ---------------------------------------------------------------- criterion 6

def check_noise(n_seeds: int = 20000, dt: float = 0.01, t_final: float = 5.0, root_seed: int = 0,
                n_sigma: float = 5.0, chunk: int = 2000):
    """Entrywise covariance and pseudo-covariance tests for both generators."""
    bath = BathSpectrum(1.0, 1.0, 0.0)
    grid = TimeGrid.from_dt(t_final, dt)
    t = grid.times
    alpha = correlation(bath, t[:, None], t[None, :])  # alpha(t_j, t_k)
    checks = []
    for kind in GeneratorKind:
        n1 = len(grid)
        cov = np.zeros((n1, n1), dtype=np.complex128)
        pse = np.zeros((n1, n1), dtype=np.complex128)
        sq = np.zeros((n1, n1))
        for lo in range(0, n_seeds, chunk):
            seeds = [derive_seed(root_seed, i) for i in range(lo, min(lo + chunk, n_seeds))]
            u = sample_noise_batch(bath, grid, seeds, kind)
            cov += u.conj().T @ u
            pse += u.T @ u
            a2 = np.abs(u) ** 2
            sq += a2.T @ a2  # |conj(u_j) u_k|^2 = |u_j u_k|^2
        cov /= n_seeds
        pse /= n_seeds
        m2 = sq / n_seeds
        se_cov = np.sqrt(np.maximum(m2 - np.abs(cov) ** 2, 0.0) / (n_seeds - 1))
        se_pse = np.sqrt(np.maximum(m2 - np.abs(pse) ** 2, 0.0) / (n_seeds - 1))
        r_cov = float((np.abs(cov - alpha) / se_cov).max())
        r_pse = float((np.abs(pse) / se_pse).max())
        checks.append(Check(f"noise/{kind.value}/covariance_max_z", r_cov, n_sigma))
        checks.append(Check(f"noise/{kind.value}/pseudo_covariance_max_z", r_pse, n_sigma))
    return checks


def check_cross_generator(n_traj: int = 4000, dt: float = 0.01, root_seed: int = 0, n_blocks: int = 100,
                          tol: Tolerances = Tolerances()):
    model = SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, 1.0)
    bath = BathSpectrum(1.0, 0.5, 0.0)
    grid = TimeGrid.from_dt(TWO_PI, dt)
    thetas = [0.5, 1.0, 2.0]
    res = {}
    for kind in GeneratorKind:
        sums = run_ensemble(model, bath, grid, n_traj, thetas, root_seed=root_seed, n_blocks=n_blocks, kind=kind)
        res[kind] = _as_list(ensemble_geometric_phase_product(sums))
    checks = []
    a, b = res[GeneratorKind.RECURSIVE], res[GeneratorKind.COVARIANCE_FACTOR]
    for th, x, y in zip(thetas, a, b):
        se = math.hypot(x.std_error, y.std_error)
        checks.append(_stat_check(f"noise/cross_generator/theta={th:.2f}", x.gamma_geo, y.gamma_geo, se, tol))
    return checks


# ---------------------------------------------------------------- criterion 7

def check_gauge_invariance(seed: int = 3, dt: float = 1e-3):
    traj, _ = figure1_data(seed, dt)
    rng = np.random.default_rng(seed)
    phases = np.exp(1j * rng.uniform(0, TWO_PI, len(traj)))
    g0 = pancharatnam_phase(traj).gamma_geo
    g1 = pancharatnam_phase(traj.with_states(traj.states * phases[:, None])).gamma_geo
    return [Check("property/gauge_invariance", abs(wrap(g1 - g0)), 1e-10)]


def check_reparametrization(seed: int = 4, dt: float = 1e-4, stride: int = 10, tol: float = 1e-3):
    traj, _ = figure1_data(seed, dt)
    n = len(traj)
    uniform = np.arange(0, n, stride)
    if uniform[-1] != n - 1:
        uniform = np.append(uniform, n - 1)
    rng = np.random.default_rng(seed)
    inner = np.sort(rng.choice(np.arange(1, n - 1), size=len(uniform) - 2, replace=False))
    nonuniform = np.concatenate([[0], inner, [n - 1]])
    g_u = pancharatnam_phase(_subsample(traj, uniform)).gamma_geo
    g_n = pancharatnam_phase(_subsample(traj, nonuniform)).gamma_geo
    return [Check("property/reparametrization_invariance", abs(wrap(g_u - g_n)), tol)]


def _subsample(traj, idx):
    from .qsd import Trajectory

    # only the state sequence matters for the Pancharatnam phase
    grid = TimeGrid(traj.grid.t_final, len(idx) - 1)
    return Trajectory(grid, traj.states[idx], traj.noise_seed, traj.model, traj.bath)


def check_decomposition(s: EnsembleSettings):
    traj, _ = figure1_data(5, s.dt)
    pd = pancharatnam_phase(traj)
    checks = [Check("property/decomposition/single", abs(wrap(pd.gamma_tot - pd.gamma_dyn - pd.gamma_geo)), 1e-10)]
    model = SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, 1.0)
    bath = BathSpectrum(1.0, 0.5, 0.0)
    grid = TimeGrid.from_dt(TWO_PI, 1e-2)
    sums = run_ensemble(model, bath, grid, 200, [1.0], root_seed=s.root_seed, n_blocks=20)
    e = ensemble_geometric_phase_product(sums, check_links=False)
    checks.append(Check("property/decomposition/ensemble", abs(wrap(e.gamma_tot - e.gamma_dyn - e.gamma_geo)), 1e-10))
    return checks


def check_dynamical_routes(s: EnsembleSettings, t_final: float = TWO_PI):
    """Generator-expectation and density-route dynamical phases agree (noise-independent O-bar)."""
    checks = []
    thetas = [0.5, 1.0, 2.0]
    cases = [("dissipative", SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, 1.0), BathSpectrum(1.0, 0.5, 0.0)),
             ("dephasing", SystemModel(1.0, 1.0, CouplingKind.DEPHASING, 1.0), BathSpectrum(1.0, 1.0, 1.0))]
    grid = TimeGrid.from_dt(t_final, s.dt)
    for name, model, bath in cases:
        sums = run_ensemble(model, bath, grid, s.n_traj, thetas, root_seed=s.root_seed, n_blocks=s.n_blocks,
                            workers=s.workers, want_rho=True, checkpoint=s.checkpoint(f"routes_{name}"))
        diff, se = dynamical_phase_route_difference(sums)
        for th, d, e in zip(thetas, diff, se):
            checks.append(Check(f"property/dynamical_routes/{name}/theta={th:.2f}", float(abs(d)),
                                float(s.tol.n_sigma * e + s.tol.deterministic), float(d), 0.0, float(e)))
    return checks


def check_riccati(tol: float = 1e-7):
    checks = []
    cases = [(1.0, 1.0, 1.0, 0.0), (0.1, 1.0, 1.0, 0.0), (0.5, 1.0, 1.0, 0.0), (1.2, 1.0, 1.0, 0.0),
             (1.0, 1.0, 0.5, 0.3), (2.0, 0.7, 1.3, -0.4)]
    for gamma, Gamma, lam, Omega in cases:
        model = SystemModel(1.0, lam, CouplingKind.DISSIPATIVE, 1.0)
        bath = BathSpectrum(Gamma, gamma, Omega)
        t = np.linspace(0.0, TWO_PI, 629)
        d = float(np.abs(f_coefficient_dissipative(model, bath, t) - f_riccati_dissipative(model, bath, t)).max())
        checks.append(Check(f"property/riccati/gamma={gamma:g},Gamma={Gamma:g},lambda={lam:g},Omega={Omega:g}",
                            d, tol))
    return checks


def step_halving_order(kind=CouplingKind.DISSIPATIVE, seed: int = 11, n_coarse: int = 200, t_final: float = 2.0):
    """Observed order ``log2(e1/e2)`` from three nested grids sharing one piecewise-linear noise path."""
    model = SystemModel(1.0, 1.0, kind, 1.0)
    bath = BathSpectrum(1.0, 1.0, 0.5)
    noise = sample_noise(bath, TimeGrid(t_final, n_coarse), seed)
    finals = []
    for f in (1, 2, 4):
        nz = noise.refine(f) if f > 1 else noise
        spec = OOperatorSpec.build(model, bath, nz.grid)
        finals.append(integrate_trajectory(model, bath, spec, nz).states[-1])
    e1 = np.abs(finals[0] - finals[1]).max()
    e2 = np.abs(finals[1] - finals[2]).max()
    return math.log2(e1 / e2)


def check_step_halving(min_order: float = 2.0):
    checks = []
    for k in CouplingKind:
        p = step_halving_order(k)
        # deviation is the shortfall below the required order
        checks.append(Check(f"property/step_halving_order/{k.value}", max(0.0, min_order - p), 0.0, p, min_order))
    return checks


def check_link_consistency(s: EnsembleSettings):
    """With lambda = 0 all trajectories coincide, so the ensemble formula equals the single-trajectory one."""
    model = SystemModel(1.0, 0.0, CouplingKind.DISSIPATIVE, 1.0)
    bath = BathSpectrum(1.0, 1.0, 0.0)
    grid = TimeGrid.from_dt(TWO_PI, s.dt)
    trajs = simulate_trajectories(model, bath, grid, 8, root_seed=s.root_seed)
    single = pancharatnam_phase(trajs[0]).gamma_geo
    ens = ensemble_geometric_phase_product(trajs).gamma_geo
    return [Check("property/lambda0_ensemble_equals_single", abs(wrap(ens - single)), 1e-10)]


def check_estimator_agreement(s: EnsembleSettings, theta: float = 1.0, gamma: float = 0.5):
    """Link-product and total-minus-dynamical estimates agree within their paired error."""
    model = SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, theta)
    bath = BathSpectrum(1.0, gamma, 0.0)
    grid = TimeGrid.from_dt(TWO_PI, s.dt)
    sums = run_ensemble(model, bath, grid, s.n_traj, [theta], root_seed=s.root_seed, n_blocks=s.n_blocks,
                        workers=s.workers, checkpoint=s.checkpoint(f"estimators_gamma_{gamma:g}"))
    diff, se = geometric_estimator_difference(sums)
    return [Check(f"property/estimator_agreement/gamma={gamma:g}/theta={theta:g}", float(abs(diff[0])),
                  float(s.tol.n_sigma * se[0] + s.tol.deterministic), float(diff[0]), 0.0, float(se[0]))]


def check_reference_section(seed: int = 9, n_coarse: int = 250, t_final: float = 3.0):
    """Finite-difference reference-section phase converges to the Pancharatnam phase under step halving."""
    model = SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, 1.0)
    bath = BathSpectrum(1.0, 1.0, 0.0)
    base = sample_noise(bath, TimeGrid(t_final, n_coarse), seed)
    errs = []
    for f in (1, 2, 4):
        nz = base.refine(f) if f > 1 else base
        tr = integrate_trajectory(model, bath, OOperatorSpec.build(model, bath, nz.grid), nz)
        errs.append(abs(wrap(reference_section_phase(tr, "difference") - pancharatnam_phase(tr).gamma_geo)))
    order = math.log2(errs[1] / errs[2])
    return [Check("property/reference_section/error_at_finest_grid", errs[2], 1e-3),
            Check("property/reference_section/convergence_order", max(0.0, 1.0 - order), 0.0, order, 1.0)]


def properties(s: EnsembleSettings):
    out = []
    out += check_gauge_invariance(dt=s.dt)
    out += check_reparametrization()
    out += check_decomposition(s)
    out += check_dynamical_routes(s)
    out += check_riccati(s.tol.riccati)
    out += check_step_halving()
    out += check_link_consistency(s)
    out += check_estimator_agreement(s)
    out += check_reference_section()
    return out


def full_suite(s: EnsembleSettings, thetas=None):
    """Every check, in criterion order, as ``(group, checks)`` pairs."""
    yield "solid_angle", check_solid_angle(s.root_seed, s.dt, s.tol)
    yield "dissipative_ensemble", check_dissipative(s, thetas)
    yield "dephasing_exactness", check_dephasing_exactness(s, thetas)
    yield "dephasing_shift", check_shift(s, thetas)
    yield "unraveling", check_unraveling(s)
    yield "noise", check_noise(n_seeds=max(2000, s.n_traj), root_seed=s.root_seed) + check_cross_generator(
        n_traj=s.n_traj, root_seed=s.root_seed, n_blocks=s.n_blocks, tol=s.tol)
    yield "properties", properties(s)
