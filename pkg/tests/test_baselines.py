import numpy as np
import pytest
import scipy.linalg as sl

from linfsat.baselines import BaselineSpec, care_residual, lqr_gain, pole_place_gain
from linfsat.errors import BadInput, DimensionMismatch, NotControllable, NotStabilizable
from linfsat.model import PlantModel
from oracles import high_precision_eigs, match_error


def plant(A, B):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return PlantModel(A=A, B_w=B, B_u=B, C=np.eye(A.shape[0])[:1])


def test_scalar_riccati():
    K, P = lqr_gain(plant([[1.0]], [[1.0]]), [[1.0]], [[1.0]])
    assert P[0, 0] == pytest.approx(1 + np.sqrt(2), abs=1e-12)
    assert K[0, 0] == pytest.approx(1 + np.sqrt(2), abs=1e-12)


def test_zero_state_weight_on_stable_plant():
    K, P = lqr_gain(plant([[-1.0, 0.0], [0.0, -2.0]], [1.0, 1.0]), np.zeros((2, 2)), [[1.0]])
    assert np.allclose(K, 0.0, atol=1e-12) and np.allclose(P, 0.0, atol=1e-12)


def test_freq_model_identity_weights(freq_model):
    K, P = lqr_gain(freq_model, np.eye(2), [[1.0]])
    assert care_residual(freq_model.A, freq_model.B_u, np.eye(2), [[1.0]], P) <= 1e-8 * np.linalg.norm(P)
    assert np.all(np.linalg.eigvals(freq_model.A - freq_model.B_u @ K).real < 0)


def test_riccati_matches_scipy(rng):
    for _ in range(30):
        n = int(rng.integers(1, 5))
        A, B = rng.normal(size=(n, n)), rng.normal(size=(n, 1))
        Qw = np.diag(rng.uniform(0.1, 2.0, n))
        Rw = np.array([[rng.uniform(0.1, 2.0)]])
        _, P = lqr_gain(plant(A, B), Qw, Rw)
        assert np.allclose(P, sl.solve_continuous_are(A, B, Qw, Rw), rtol=1e-8, atol=1e-10)


def test_unstabilizable_rejected():
    m = plant([[1.0, 0.0], [0.0, 2.0]], [1.0, 0.0])
    with pytest.raises(NotStabilizable):
        lqr_gain(m, np.eye(2), [[1.0]])


def test_weight_validation(freq_model):
    with pytest.raises(BadInput):
        lqr_gain(freq_model, -np.eye(2), [[1.0]])
    with pytest.raises(BadInput):
        lqr_gain(freq_model, np.eye(2), [[0.0]])
    with pytest.raises(DimensionMismatch):
        lqr_gain(freq_model, np.eye(3), [[1.0]])


def test_double_integrator_poles():
    K = pole_place_gain(plant([[0.0, 1.0], [0.0, 0.0]], [0.0, 1.0]), [-1.0, -2.0])
    assert np.allclose(K, [[2.0, 3.0]], atol=1e-12)


def test_open_loop_poles_give_zero_gain(freq_model):
    K = pole_place_gain(freq_model, np.linalg.eigvals(freq_model.A))
    assert np.allclose(K, 0.0, atol=1e-12)


def test_freq_model_pole_pair(freq_model):
    poles = [-4.0 + 3.0j, -4.0 - 3.0j]
    K = pole_place_gain(freq_model, poles)
    assert match_error(np.linalg.eigvals(freq_model.A - freq_model.B_u @ K), poles) <= 1e-8


def test_pole_place_complex_and_validation(rng):
    A, B = rng.normal(size=(3, 3)), rng.normal(size=(3, 1))
    poles = [-1.0, -2.0 + 1.5j, -2.0 - 1.5j]
    K = pole_place_gain(plant(A, B), poles)
    assert match_error(high_precision_eigs(A, B, K), poles) <= 1e-8
    with pytest.raises(BadInput):
        pole_place_gain(plant(A, B), [-1.0, -2.0 + 1j, -3.0])
    with pytest.raises(BadInput):
        pole_place_gain(plant(A, B), [-1.0, -2.0])
    with pytest.raises(NotControllable):
        pole_place_gain(plant(np.diag([-1.0, -2.0]), [1.0, 0.0]), [-3.0, -4.0])


@pytest.mark.parametrize("K", [[0.138, 0.0045], [1.70, 0.480]])
def test_literal_gains_stabilize_freq_model(freq_model, K):
    spec = BaselineSpec.literal(K)
    Kg = spec.gain(freq_model)
    assert np.all(np.linalg.eigvals(freq_model.A - freq_model.B_u @ Kg).real < 0)


def test_spec_kinds_dispatch(freq_model):
    assert BaselineSpec.lqr(np.eye(2), [[1.0]]).gain(freq_model).shape == (1, 2)
    assert BaselineSpec.pole_place([-3.0, -4.0]).gain(freq_model).shape == (1, 2)
    with pytest.raises(DimensionMismatch):
        BaselineSpec.literal([1.0, 2.0, 3.0]).gain(freq_model)
