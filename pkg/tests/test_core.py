import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsdphase.core import (
    BathSpectrum,
    BlochPath,
    CouplingKind,
    DegenerateStateError,
    DensityMatrix,
    DomainError,
    PureState,
    SystemModel,
    TimeGrid,
    bloch_vector,
    initial_state,
)

thetas = st.floats(0.0, math.pi)
phases = st.floats(-10.0, 10.0)


def test_time_grid_endpoints():
    g = TimeGrid.from_dt(2.0 * math.pi, 1e-3)
    t = g.times
    assert t[0] == 0.0 and t[-1] == 2.0 * math.pi
    assert np.all(np.diff(t) > 0)
    assert len(g) == g.n_steps + 1
    assert g.dt <= 1e-3


@pytest.mark.parametrize("kw", [dict(t_final=1.0, n_steps=1), dict(t_final=0.0, n_steps=10),
                                dict(t_final=float("nan"), n_steps=10)])
def test_time_grid_rejects(kw):
    with pytest.raises(DomainError):
        TimeGrid(**kw)


@pytest.mark.parametrize("theta,expected", [(0.0, (1, 0)), (math.pi, (0, 1)),
                                            (math.pi / 2, (2 ** -0.5, 2 ** -0.5))])
def test_initial_state_examples(theta, expected):
    np.testing.assert_allclose(initial_state(theta).to_array(), expected, atol=1e-15)


@pytest.mark.parametrize("theta", [-0.1, math.pi + 1e-9])
def test_initial_state_domain(theta):
    with pytest.raises(DomainError):
        initial_state(theta)


def test_bloch_vector_examples():
    np.testing.assert_allclose(bloch_vector(PureState(1, 0)), [0, 0, 1])
    np.testing.assert_allclose(bloch_vector(initial_state(math.pi)), [0, 0, -1], atol=1e-15)
    np.testing.assert_allclose(bloch_vector(initial_state(1.0)), [math.sin(1), 0, math.cos(1)], atol=1e-15)
    with pytest.raises(DegenerateStateError):
        bloch_vector(PureState(0, 0))


def test_bloch_of_initial_states_sampled():
    for th in np.random.default_rng(0).uniform(0, math.pi, 100):
        np.testing.assert_allclose(bloch_vector(initial_state(th)), [math.sin(th), 0, math.cos(th)], atol=1e-12)


@given(thetas, phases)
def test_bloch_global_phase_invariance(theta, phi):
    psi = initial_state(theta).to_array()
    np.testing.assert_allclose(bloch_vector(PureState.from_array(np.exp(1j * phi) * psi)),
                               bloch_vector(PureState.from_array(psi)), atol=1e-12)


@settings(max_examples=50)
@given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_projector_trace_and_rank(a, b):
    psi = PureState(a, b)
    rho = psi.projector()
    assert abs(rho.trace - psi.norm2) <= 1e-12 * max(1.0, psi.norm2)
    assert abs(rho.determinant) <= 1e-12 * max(1.0, psi.norm2 ** 2)
    assert rho.is_hermitian()


def test_normalized_is_explicit():
    psi = PureState(2.0, 0.0)
    assert psi.norm2 == 4.0
    np.testing.assert_allclose(psi.normalized().to_array(), [1, 0])


def test_state_rejects_nonfinite():
    with pytest.raises((DomainError, ValueError)):
        PureState(float("nan"), 0)


def test_model_and_bath_validation():
    with pytest.raises(DomainError):
        SystemModel(1.0, -1.0, CouplingKind.DISSIPATIVE, 0.0)
    with pytest.raises(DomainError):
        SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, 4.0)
    with pytest.raises(DomainError):
        BathSpectrum(1.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        BathSpectrum(-1.0, 1.0, 0.0)
    assert BathSpectrum(1.0, 2.0).amplitude == 1.0


def test_operators():
    A, L, K = SystemModel(2.0, 0.5, "dissipative").operators()
    np.testing.assert_allclose(A, -1j * np.diag([1.0, -1.0]))
    np.testing.assert_allclose(K, L.conj().T @ np.array([[0, 0], [1, 0]]))
    A, L, K = SystemModel(2.0, 0.5, "dephasing").operators()
    np.testing.assert_allclose(K, L.conj().T @ np.diag([1.0, -1.0]))


def test_bloch_path_unit_norm():
    with pytest.raises(DomainError):
        BlochPath(np.array([[0.0, 0.0, 2.0]]))
    p = BlochPath.from_states(np.array([[1.0, 1.0j], [3.0, 0.0]]))
    np.testing.assert_allclose(np.linalg.norm(p.points, axis=1), 1.0, atol=1e-15)


def test_density_matrix_hermitian_check():
    rho = DensityMatrix(np.array([[0.5, 0.1j], [-0.1j, 0.5]]))
    assert rho.is_hermitian()
    np.testing.assert_allclose(sorted(rho.eigenvalues()), [0.4, 0.6])
