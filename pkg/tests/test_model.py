import numpy as np
import pytest

from linfsat.errors import DimensionMismatch, InvalidParams
from linfsat.model import (BuConvention, FrequencyParams, PlantModel, build_frequency_model, check_ctrb_obsv,
                           is_hurwitz)


def test_swing_derived_reference_params():
    m = build_frequency_model(FrequencyParams(), BuConvention.SWING_DERIVED)
    assert np.allclose(m.A, [[-0.3, 0.5], [-100.0, -5.0]])
    assert np.allclose(m.B_w.ravel(), [-0.05, 0.0])
    assert np.allclose(m.B_u.ravel(), [0.025, 0.0])
    assert m.u_limit == 1.0 and m.u_scale == 0.05


def test_swing_derived_unit_params():
    m = build_frequency_model(FrequencyParams(1, 1, 1, 1, 1, 1), BuConvention.SWING_DERIVED)
    assert np.allclose(m.A, [[-1, 1], [-1, -1]])
    assert np.allclose(m.B_w.ravel(), [-1, 0]) and np.allclose(m.B_u.ravel(), [1, 0])


@pytest.mark.parametrize("p", [FrequencyParams(), FrequencyParams(3, 0.1, 0.2, 1, 0.3, 0.4)])
def test_paper_literal_bu(p):
    m = build_frequency_model(p, BuConvention.PAPER_LITERAL)
    assert np.array_equal(m.B_u.ravel(), [1.0, 0.0])
    assert np.array_equal(m.C, [[1.0, 0.0]])
    assert m.u_limit == p.u_max


@pytest.mark.parametrize("kw", [{"M": 0}, {"rho": -1}, {"u_max": 0}, {"w_max": 0}, {"D": -0.1}])
def test_invalid_params(kw):
    with pytest.raises(InvalidParams):
        FrequencyParams(**kw)


def test_ctrb_obsv_examples(freq_model):
    assert check_ctrb_obsv(freq_model) == (True, True)
    m = PlantModel(A=np.diag([-1.0, -2.0]), B_w=[1, 0], B_u=[1, 0], C=[[1, 1]])
    assert check_ctrb_obsv(m)[0] is False
    m = PlantModel(A=freq_model.A, B_w=freq_model.B_w, B_u=freq_model.B_u, C=[[0, 0]])
    assert check_ctrb_obsv(m)[1] is False


def test_shapes_checked():
    with pytest.raises(DimensionMismatch):
        PlantModel(A=np.eye(2), B_w=[1, 0, 0], B_u=[1, 0], C=[[1, 0]])
    with pytest.raises(DimensionMismatch):
        PlantModel(A=np.ones((2, 3)), B_w=[1, 0], B_u=[1, 0], C=[[1, 0]])


def test_freq_model_is_hurwitz(freq_model):
    assert is_hurwitz(freq_model.A)
    assert not freq_model.A.flags.writeable
