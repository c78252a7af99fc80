"""LTI plant types and the single-area frequency model."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidParams


class BuConvention(str, enum.Enum):
    """How the inverter input and load disturbance enter the swing equation.

    ``PAPER_LITERAL`` uses ``B_u = [1, 0]^T`` and ``B_w = [-w_max, 0]^T`` with
    the control limit kept in physical p.u.; ``SWING_DERIVED`` keeps the
    ``1/M`` factor and normalizes both inputs, so the model input is limited
    to ``|u| <= 1`` and ``u_scale = u_max`` converts back to p.u.
    """

    PAPER_LITERAL = "paper_literal"
    SWING_DERIVED = "swing_derived"


@dataclass(frozen=True)
class FrequencyParams:
    M: float = 2.0
    D: float = 0.6
    rho: float = 0.05
    k: float = 5.0
    w_max: float = 0.1
    u_max: float = 0.05

    def __post_init__(self):
        problems = []
        if not self.M > 0:
            problems.append("M must be > 0")
        if not self.D >= 0:
            problems.append("D must be >= 0")
        if not self.rho > 0:
            problems.append("rho must be > 0")
        if not self.k >= 0:
            problems.append("k must be >= 0")
        if not self.w_max > 0:
            problems.append("w_max must be > 0")
        if not self.u_max > 0:
            problems.append("u_max must be > 0")
        if problems:
            raise InvalidParams("; ".join(problems))


@dataclass(frozen=True)
class PlantModel:
    """State-space plant ``x' = A x + B_w w + B_u u``, ``y = C x``.

    ``u_limit`` is the actuator bound in the model's own input units and
    ``u_scale`` converts a model input into physical p.u. power.
    """

    A: np.ndarray
    B_w: np.ndarray
    B_u: np.ndarray
    C: np.ndarray
    state_labels: tuple = ()
    u_limit: float = 1.0
    u_scale: float = 1.0
    params: FrequencyParams | None = None
    convention: BuConvention | None = None

    def __post_init__(self):
        A = _mat(self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        B_w = _col(self.B_w, n, "B_w")
        B_u = _col(self.B_u, n, "B_u")
        C = _mat(self.C)
        if C.shape[1] != n:
            raise DimensionMismatch(f"C must have {n} columns, got {C.shape}")
        for name, val in (("A", A), ("B_w", B_w), ("B_u", B_u), ("C", C)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        labels = tuple(self.state_labels) or tuple(f"x{i}" for i in range(n))
        if len(labels) != n:
            raise DimensionMismatch("one state label per state required")
        object.__setattr__(self, "state_labels", labels)
        if not self.u_limit > 0:
            raise InvalidParams("u_limit must be > 0")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_w(self) -> int:
        return self.B_w.shape[1]

    @property
    def n_u(self) -> int:
        return self.B_u.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    def replace(self, **changes) -> "PlantModel":
        fields = dict(A=self.A, B_w=self.B_w, B_u=self.B_u, C=self.C,
                      state_labels=self.state_labels, u_limit=self.u_limit,
                      u_scale=self.u_scale, params=self.params, convention=self.convention)
        fields.update(changes)
        return PlantModel(**fields)


def _mat(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    return a


def _col(a, n, name) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.ndim <= 1:
        a = a.reshape(-1, 1)
    if a.shape[0] != n:
        raise DimensionMismatch(f"{name} must have {n} rows, got {a.shape}")
    return a


def build_frequency_model(p: FrequencyParams,
                          bu_convention: BuConvention | str = BuConvention.SWING_DERIVED) -> PlantModel:
    """Linearized swing + turbine-governor model with state ``[dw, dP_M]``."""
    if not isinstance(p, FrequencyParams):
        raise InvalidParams("expected FrequencyParams")
    conv = BuConvention(bu_convention)
    A = np.array([[-p.D / p.M, 1.0 / p.M],
                  [-p.k / p.rho, -p.k]])
    C = np.array([[1.0, 0.0]])
    labels = ("dw [p.u. freq]", "dP_M [p.u. power]")
    if conv is BuConvention.SWING_DERIVED:
        # load enters as -dP_L; both inputs scaled so |w|, |u| <= 1
        B_w = np.array([[-p.w_max / p.M], [0.0]])
        B_u = np.array([[p.u_max / p.M], [0.0]])
        u_limit, u_scale = 1.0, p.u_max
    else:
        B_w = np.array([[-p.w_max], [0.0]])
        B_u = np.array([[1.0], [0.0]])
        u_limit, u_scale = p.u_max, 1.0
    return PlantModel(A=A, B_w=B_w, B_u=B_u, C=C, state_labels=labels,
                      u_limit=u_limit, u_scale=u_scale, params=p, convention=conv)


def _full_rank(mat: np.ndarray, n: int) -> bool:
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return False
    return int(np.sum(s > 1e-10 * s[0])) == n


def ctrb(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def obsv(A, C) -> np.ndarray:
    return ctrb(np.asarray(A).T, np.asarray(C).T).T


def check_ctrb_obsv(m: PlantModel) -> tuple[bool, bool]:
    """Kalman rank tests for ``(A, B_w)`` and ``(A, C)``."""
    return _full_rank(ctrb(m.A, m.B_w), m.n), _full_rank(obsv(m.A, m.C), m.n)


def is_hurwitz(A) -> bool:
    return bool(np.all(np.linalg.eigvals(np.asarray(A, dtype=float)).real < 0))
