import math

import numpy as np
import pytest
from scipy.integrate import quad

from qsdphase.core import BathSpectrum, CouplingKind, SystemModel, TimeGrid, initial_state
from qsdphase.ensemble import run_ensemble
from qsdphase.noise import correlation, sample_noise
from qsdphase.qsd import (
    OOperatorKind,
    OOperatorSpec,
    PoleError,
    TrajectoryOverflowError,
    VanishingNormError,
    f_coefficient_dissipative,
    f_riccati_dissipative,
    integrate_trajectory,
    normalize_trajectory,
    obar_dephasing,
)
from qsdphase.validation import check_riccati, step_halving_order


def _traj(model, bath, grid, seed=0, psi0=None):
    return integrate_trajectory(model, bath, OOperatorSpec.build(model, bath, grid), sample_noise(bath, grid, seed),
                                psi0=psi0)


def test_f_at_zero(dissipative, unit_bath):
    assert f_coefficient_dissipative(dissipative, unit_bath, 0.0) == 0
    assert obar_dephasing(dissipative, unit_bath, 0.0) == 0


def test_f_matches_riccati(dissipative, unit_bath):
    t = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(f_coefficient_dissipative(dissipative, unit_bath, t),
                               f_riccati_dissipative(dissipative, unit_bath, t), atol=1e-8, rtol=0)


def test_riccati_grid_agreement():
    for c in check_riccati():
        assert c.passed, c


def test_markov_fixed_point():
    m = SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE)
    f = f_coefficient_dissipative(m, BathSpectrum(1.0, 1000.0, 0.0), 50.0)
    assert abs(f - 0.5) < 1e-3


def test_pole_detected_with_time():
    m = SystemModel(0.0, 1.0, CouplingKind.DISSIPATIVE)
    with pytest.raises(PoleError) as info:
        f_coefficient_dissipative(m, BathSpectrum(1.0, 0.5, 0.0), 10.0)
    # dF/dt = (F - 1/4)^2 + 3/16 with F(0) = 0 diverges at t = 8 pi / (3 sqrt 3)
    assert abs(info.value.t_pole - 8 * math.pi / (3 * math.sqrt(3))) < 1e-6


def test_obar_dephasing_examples():
    m = SystemModel(1.0, 1.0, CouplingKind.DEPHASING)
    assert abs(obar_dephasing(m, BathSpectrum(1.0, 1.0, 0.0), 60.0) - 0.5) < 1e-15
    b = BathSpectrum(1.0, 1.0, 1.0)
    re = quad(lambda s: correlation(b, 1.0, s).real, 0, 1, epsabs=1e-14)[0]
    im = quad(lambda s: correlation(b, 1.0, s).imag, 0, 1, epsabs=1e-14)[0]
    assert abs(obar_dephasing(m, b, 1.0) - (re + 1j * im)) < 1e-10


def test_ospec_kind_mismatch(dissipative, unit_bath):
    grid = TimeGrid(1.0, 10)
    with pytest.raises(ValueError):
        OOperatorSpec.build(dissipative, unit_bath, grid, OOperatorKind.DEPHASING_INTEGRAL)


@pytest.mark.parametrize("kind", list(CouplingKind))
@pytest.mark.parametrize("theta", [0.0, 1.0, math.pi / 2, math.pi])
def test_closed_system_rotation(kind, theta, unit_bath):
    m = SystemModel(1.0, 0.0, kind, theta)
    grid = TimeGrid(3.0, 300)
    tr = _traj(m, unit_bath, grid)
    t = grid.times
    expect = np.stack([np.exp(-0.5j * t) * math.cos(theta / 2), np.exp(0.5j * t) * math.sin(theta / 2)], axis=1)
    np.testing.assert_allclose(tr.states, expect, atol=1e-12)
    np.testing.assert_allclose(np.sum(np.abs(tr.states) ** 2, axis=1), 1.0, atol=1e-13)


def test_dark_state(unit_bath):
    m = SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, math.pi)
    grid = TimeGrid(2.0, 200)
    for seed in range(3):
        tr = _traj(m, unit_bath, grid, seed)
        np.testing.assert_allclose(tr.states[:, 0], 0.0, atol=1e-15)
        np.testing.assert_allclose(tr.states[:, 1], np.exp(0.5j * grid.times), atol=1e-12)


def test_initial_state_recorded(dissipative, unit_bath):
    tr = _traj(dissipative, unit_bath, TimeGrid(1.0, 50))
    np.testing.assert_array_equal(tr.states[0], initial_state(1.0).to_array())


def test_linearity(dissipative, unit_bath):
    grid = TimeGrid(2.0, 400)
    a, b = np.array([0.3 + 0.1j, -0.7]), np.array([0.2j, 1.1])
    ta = _traj(dissipative, unit_bath, grid, 5, a)
    tb = _traj(dissipative, unit_bath, grid, 5, b)
    tab = _traj(dissipative, unit_bath, grid, 5, a + b)
    np.testing.assert_allclose(tab.states, ta.states + tb.states, atol=1e-9)


def test_dephasing_populations_preserved_on_average():
    m = SystemModel(1.0, 1.0, CouplingKind.DEPHASING, 1.0)
    bath = BathSpectrum(1.0, 1.0, 1.0)
    s = run_ensemble(m, bath, TimeGrid(2.0, 200), 4000, [1.0], root_seed=2, n_blocks=40, want_rho=True)
    pop = s.rho[:, 0, -1, 0, 0].real
    mean = pop.sum() / s.counts.sum()
    blocks = pop / s.counts
    se = blocks.std(ddof=1) / math.sqrt(len(blocks))
    assert abs(mean - math.cos(0.5) ** 2) < 5 * se


def test_trace_preserved_on_average(dissipative, unit_bath):
    s = run_ensemble(dissipative, unit_bath, TimeGrid(2.0, 200), 2000, [1.0], root_seed=4, n_blocks=40,
                     want_rho=True)
    tr = np.trace(s.rho[:, 0, -1], axis1=-2, axis2=-1).real / s.counts
    assert abs(tr.mean() - 1.0) < 5 * tr.std(ddof=1) / math.sqrt(len(tr))


@pytest.mark.parametrize("kind", list(CouplingKind))
def test_step_halving_order(kind):
    assert step_halving_order(kind) >= 2.0


def test_overflow_error():
    m = SystemModel(1.0, 6.0, CouplingKind.DEPHASING, 1.0)
    bath = BathSpectrum(50.0, 1.0, 0.0)
    with pytest.raises(TrajectoryOverflowError):
        for seed in range(20):
            _traj(m, bath, TimeGrid(40.0, 4000), seed)


def test_normalize_trajectory(dissipative, unit_bath):
    tr = _traj(dissipative, unit_bath, TimeGrid(2.0, 200), 1)
    nt = normalize_trajectory(tr)
    np.testing.assert_allclose(np.linalg.norm(nt.states, axis=1), 1.0, atol=1e-15)
    again = normalize_trajectory(nt)
    np.testing.assert_allclose(again.states, nt.states, atol=1e-15)
    from qsdphase.core import bloch_vectors
    np.testing.assert_allclose(bloch_vectors(nt.states), bloch_vectors(tr.states), atol=1e-13)


def test_normalize_examples_and_floor(unit_bath):
    m = SystemModel(1.0, 0.0, CouplingKind.DISSIPATIVE, 0.0)
    tr = _traj(m, unit_bath, TimeGrid(1.0, 10))
    doubled = tr.with_states(2.0 * tr.states)
    np.testing.assert_allclose(normalize_trajectory(doubled).states[0], [1.0, 0.0])
    zeroed = tr.with_states(np.vstack([tr.states[:5], np.zeros((6, 2))]))
    with pytest.raises(VanishingNormError) as info:
        normalize_trajectory(zeroed)
    assert info.value.index == 5
