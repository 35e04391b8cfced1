import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsdphase import oracle
from qsdphase.core import BathSpectrum, BlochPath, CouplingKind, SystemModel, TimeGrid
from qsdphase.ensemble import EnsembleSums, run_ensemble, simulate_trajectories
from qsdphase.noise import sample_noise
from qsdphase.phase import (
    GeodesicAmbiguousError,
    IndeterminateLinkError,
    SectionUndefinedError,
    UndefinedPhaseError,
    bloch_path,
    ensemble_dynamical_phase,
    ensemble_geometric_phase_difference,
    ensemble_geometric_phase_product,
    ensemble_total_phase,
    half_solid_angle_series,
    pancharatnam_phase,
    reference_section_phase,
    solid_angle_geodesic_closed,
    wrap,
)
from qsdphase.qsd import OOperatorSpec, integrate_trajectory
from qsdphase.validation import (
    check_decomposition,
    check_estimator_agreement,
    check_gauge_invariance,
    check_link_consistency,
    check_reference_section,
    check_reparametrization,
    check_solid_angle,
    EnsembleSettings,
)

TWO_PI = 2.0 * math.pi


def _traj(model, bath, grid, seed=0):
    return integrate_trajectory(model, bath, OOperatorSpec.build(model, bath, grid), sample_noise(bath, grid, seed))


def _closed(theta, n=1001, t=TWO_PI):
    m = SystemModel(1.0, 0.0, CouplingKind.DISSIPATIVE, theta)
    b = BathSpectrum(1.0, 1.0)
    return _traj(m, b, TimeGrid(t, n))


def test_wrap_range():
    x = np.array([-math.pi, math.pi, 3 * math.pi, 0.1 - TWO_PI])
    np.testing.assert_allclose(wrap(x), [math.pi, math.pi, math.pi, 0.1], atol=1e-15)


def test_constant_trajectory():
    m = SystemModel(0.0, 0.0, CouplingKind.DISSIPATIVE, 1.0)
    tr = _traj(m, BathSpectrum(1.0, 1.0), TimeGrid(1.0, 20))
    d = pancharatnam_phase(tr)
    assert d.gamma_geo == d.gamma_tot == d.gamma_dyn == 0.0
    assert reference_section_phase(tr) == 0.0
    assert solid_angle_geodesic_closed(bloch_path(tr)) == 0.0


@pytest.mark.parametrize("theta", np.linspace(0.0, math.pi, 7))
def test_closed_system_phase(theta):
    # the sampled path is a geodesic polygon: O(dt^2) away from the smooth loop
    d = pancharatnam_phase(_closed(theta, n=4001))
    assert abs(wrap(d.gamma_geo - math.pi * (math.cos(theta) - 1))) < 1e-6
    assert abs(wrap(d.gamma_tot - d.gamma_dyn - d.gamma_geo)) < 1e-10


def test_vanishing_final_overlap_raises():
    # equator state after half a period is orthogonal to the start
    with pytest.raises(UndefinedPhaseError):
        pancharatnam_phase(_closed(math.pi / 2, n=1000, t=math.pi))


def test_reference_section_closed_equator():
    val = reference_section_phase(_closed(math.pi / 2, n=6283))
    assert abs(wrap(val + math.pi)) < 1e-3
    with pytest.raises(SectionUndefinedError):
        reference_section_phase(_closed(math.pi / 2, n=6284))  # grid hits the node at t = pi


def test_reference_section_converges(dissipative, unit_bath):
    # one noise path, resampled on finer grids
    base = sample_noise(unit_bath, TimeGrid(3.0, 250), 9)
    errs = []
    for f in (1, 2, 4):
        z = base.refine(f)
        tr = integrate_trajectory(dissipative, unit_bath, OOperatorSpec.build(dissipative, unit_bath, z.grid), z)
        geo = pancharatnam_phase(tr).gamma_geo
        assert abs(wrap(reference_section_phase(tr) - geo)) < 1e-12
        errs.append(abs(wrap(reference_section_phase(tr, "difference") - geo)))
    # at least first-order shrinkage under step halving
    assert errs[0] / errs[1] > 1.8 and errs[1] / errs[2] > 1.8


def test_equator_loop_solid_angle():
    phi = np.linspace(0.0, TWO_PI, 400)
    pts = np.stack([np.cos(phi), np.sin(phi), np.zeros_like(phi)], axis=1)
    assert abs(abs(solid_angle_geodesic_closed(BlochPath(pts))) - TWO_PI) < 1e-9
    assert solid_angle_geodesic_closed(BlochPath(np.tile([0.0, 0.6, 0.8], (5, 1)))) == 0.0


def test_antipodal_endpoints():
    with pytest.raises(GeodesicAmbiguousError):
        solid_angle_geodesic_closed(BlochPath(np.array([[0, 0, 1.0], [1.0, 0, 0], [0, 0, -1.0]])))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, math.pi - 0.05), st.floats(0.1, 5.0))
def test_solid_angle_cap(theta, t):
    # closed-system precession: enclosed area is a spherical lune closed by a geodesic
    tr = _closed(theta, n=400, t=t)
    d = pancharatnam_phase(tr)
    half = half_solid_angle_series(bloch_path(tr))[-1]
    assert abs(wrap(d.gamma_geo - half)) < 1e-9


def test_solid_angle_law_fig1():
    for c in check_solid_angle(seed=0):
        assert c.passed, c


def test_gauge_and_reparametrization():
    for c in check_gauge_invariance() + check_reparametrization():
        assert c.passed, c


def test_decomposition_identity():
    for c in check_decomposition(EnsembleSettings(n_traj=200, dt=1e-2, n_blocks=20)):
        assert c.passed, c


def test_product_equals_single_when_closed():
    m = SystemModel(1.0, 0.0, CouplingKind.DISSIPATIVE, 1.0)
    b, g = BathSpectrum(1.0, 1.0), TimeGrid(TWO_PI, 500)
    sums = run_ensemble(m, b, g, 50, [1.0], n_blocks=5)
    single = pancharatnam_phase(_traj(m, b, g))
    est = ensemble_geometric_phase_product(sums)
    assert abs(est.gamma_geo - single.gamma_geo) < 1e-12
    assert est.std_error < 1e-12


def test_closed_dynamical_and_total():
    m = SystemModel(1.0, 0.0, CouplingKind.DISSIPATIVE, math.pi / 2)
    b, g = BathSpectrum(1.0, 1.0), TimeGrid(2.0, 200)
    sums = run_ensemble(m, b, g, 20, [0.7, math.pi / 2], n_blocks=4)
    dyn = ensemble_dynamical_phase(sums, 0)
    assert abs(dyn.value + 0.5 * math.cos(0.7) * 2.0) < 1e-12
    assert abs(ensemble_total_phase(sums, 1).value) < 1e-12


def test_permutation_invariance(dissipative, unit_bath):
    trajs = simulate_trajectories(dissipative, unit_bath, TimeGrid(2.0, 200), 30, root_seed=3)
    a = ensemble_geometric_phase_product(EnsembleSums.from_trajectories(trajs), check_links=False)
    perm = np.random.default_rng(1).permutation(len(trajs))
    b = ensemble_geometric_phase_product(EnsembleSums.from_trajectories([trajs[i] for i in perm]),
                                         check_links=False)
    assert abs(a.gamma_geo - b.gamma_geo) < 1e-9
    assert abs(a.gamma_tot - b.gamma_tot) < 1e-9


def test_indeterminate_link_error_has_index():
    m = SystemModel(1.0, 1.0, CouplingKind.DEPHASING, 1.0)
    sums = run_ensemble(m, BathSpectrum(1.0, 100.0, 1.0), TimeGrid(TWO_PI, 400), 40, [1.0], n_blocks=10)
    with pytest.raises(IndeterminateLinkError) as info:
        ensemble_geometric_phase_product(sums)
    assert 0 <= info.value.index < 400


def test_lambda0_ensemble_equals_single():
    for c in check_link_consistency(EnsembleSettings(n_traj=8, dt=1e-2)):
        assert c.passed, c


def test_product_matches_difference_route():
    checks = check_estimator_agreement(EnsembleSettings(n_traj=2000, dt=1e-2, n_blocks=50, root_seed=3))
    for c in checks:
        assert c.passed, c
    assert checks[0].std_error > 0


def test_reference_section_property():
    for c in check_reference_section():
        assert c.passed, c


def test_dissipative_ensemble_small():
    m = SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, 1.0)
    b = BathSpectrum(1.0, 0.5, 0.0)
    sums = run_ensemble(m, b, TimeGrid.from_dt(TWO_PI, 1e-2), 2000, [1.0], root_seed=5, n_blocks=50)
    ref = oracle.dissipative_geometric_phase(1.0, 1.0, 1.0, b, TWO_PI)
    for est in (ensemble_geometric_phase_product(sums), ensemble_geometric_phase_difference(sums)):
        assert abs(wrap(est.gamma_geo - ref)) < 3 * est.std_error + 1e-3
