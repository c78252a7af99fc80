"""Affine matrix expressions and the block LMIs used for synthesis.

Every decision variable is expanded over a fixed basis (one coefficient
matrix per scalar component), so an LMI is a constant block plus a stack of
coefficient blocks per variable. The SDP solver consumes exactly that form.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import BadAlpha, BadInput, DimensionMismatch
from .linalg import SymMatrix, is_pd
from .model import PlantModel

STRICT_MARGIN_REL = 1e-8


class VarKind(str, enum.Enum):
    SCALAR = "scalar"
    SYM = "sym"
    RECT = "rect"


@dataclass(frozen=True)
class VariableSpec:
    id: str
    kind: VarKind = VarKind.SCALAR
    shape: tuple = ()
    lower: float | None = None
    upper: float | None = None

    @classmethod
    def scalar(cls, id, lower=None, upper=None):
        return cls(id, VarKind.SCALAR, (), lower, upper)

    @classmethod
    def sym(cls, id, dim):
        return cls(id, VarKind.SYM, (int(dim), int(dim)))

    @classmethod
    def rect(cls, id, rows, cols):
        return cls(id, VarKind.RECT, (int(rows), int(cols)))

    def __post_init__(self):
        if self.kind is not VarKind.SCALAR and (self.lower is not None or self.upper is not None):
            raise BadInput("bounds are only supported on scalar variables")

    @property
    def size(self) -> int:
        if self.kind is VarKind.SCALAR:
            return 1
        if self.kind is VarKind.SYM:
            d = self.shape[0]
            return d * (d + 1) // 2
        return self.shape[0] * self.shape[1]

    @property
    def value_shape(self) -> tuple:
        return (1, 1) if self.kind is VarKind.SCALAR else self.shape

    def basis(self) -> np.ndarray:
        """Stack of basis matrices, shape ``(size, rows, cols)``."""
        r, c = self.value_shape
        out = np.zeros((self.size, r, c))
        if self.kind is VarKind.SYM:
            for k, (i, j) in enumerate(zip(*np.triu_indices(r))):
                out[k, i, j] = out[k, j, i] = 1.0
        else:
            out.reshape(self.size, -1)[:] = np.eye(self.size)
        return out

    def to_value(self, comps):
        comps = np.asarray(comps, dtype=float)
        if self.kind is VarKind.SCALAR:
            return float(comps[0])
        return np.tensordot(comps, self.basis(), axes=1)

    def to_components(self, value) -> np.ndarray:
        if self.kind is VarKind.SCALAR:
            return np.array([float(np.asarray(value, dtype=float).reshape(-1)[0])])
        a = np.asarray(value, dtype=float).reshape(self.shape)
        if self.kind is VarKind.SYM:
            return a[np.triu_indices(self.shape[0])].copy()
        return a.reshape(-1).copy()


class Affine:
    """Matrix-valued affine function ``const + sum_k x_k * coef_k`` of decision variables."""

    __slots__ = ("const", "terms", "specs")
    __array_ufunc__ = None  # make ndarray @ Affine defer to __rmatmul__

    def __init__(self, const, terms=None, specs=None):
        self.const = np.atleast_2d(np.asarray(const, dtype=float))
        self.terms = dict(terms or {})
        self.specs = dict(specs or {})

    @classmethod
    def var(cls, spec: VariableSpec) -> "Affine":
        r, c = spec.value_shape
        return cls(np.zeros((r, c)), {spec.id: spec.basis()}, {spec.id: spec})

    @property
    def shape(self):
        return self.const.shape

    def _coerce(self, other) -> "Affine":
        if isinstance(other, Affine):
            return other
        return Affine(np.broadcast_to(np.asarray(other, dtype=float), self.shape))

    def _merge(self, other: "Affine", sign: float) -> "Affine":
        if other.shape != self.shape:
            raise DimensionMismatch(f"shape mismatch {self.shape} vs {other.shape}")
        terms = dict(self.terms)
        for vid, coef in other.terms.items():
            terms[vid] = terms[vid] + sign * coef if vid in terms else sign * coef
        specs = {**self.specs, **other.specs}
        return Affine(self.const + sign * other.const, terms, specs)

    def __add__(self, other):
        return self._merge(self._coerce(other), 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._merge(self._coerce(other), -1.0)

    def __rsub__(self, other):
        return self._coerce(other)._merge(self, -1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, k):
        k = float(k)
        return Affine(self.const * k, {v: c * k for v, c in self.terms.items()}, self.specs)

    __rmul__ = __mul__

    def __matmul__(self, mat):
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        return Affine(self.const @ mat, {v: c @ mat for v, c in self.terms.items()}, self.specs)

    def __rmatmul__(self, mat):
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        return Affine(mat @ self.const, {v: mat @ c for v, c in self.terms.items()}, self.specs)

    @property
    def T(self):
        return Affine(self.const.T, {v: c.transpose(0, 2, 1) for v, c in self.terms.items()}, self.specs)

    def evaluate(self, assignment) -> np.ndarray:
        out = self.const.copy()
        for vid, coef in self.terms.items():
            comps = self.specs[vid].to_components(assignment[vid])
            out += np.tensordot(comps, coef, axes=1)
        return out


def bmat(rows) -> Affine:
    """Assemble a block matrix from Affine / ndarray / scalar blocks (``0`` or None for zero)."""
    heights = [None] * len(rows)
    widths = [None] * len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != len(widths):
            raise DimensionMismatch("ragged block rows")
        for j, blk in enumerate(row):
            if blk is None or (np.isscalar(blk) and blk == 0):
                continue
            shape = blk.shape if isinstance(blk, Affine) else np.atleast_2d(blk).shape
            if heights[i] not in (None, shape[0]) or widths[j] not in (None, shape[1]):
                raise DimensionMismatch(f"block ({i},{j}) has inconsistent shape {shape}")
            heights[i], widths[j] = shape
    if None in heights or None in widths:
        raise DimensionMismatch("every block row and column needs one sized block")
    roff = np.concatenate([[0], np.cumsum(heights)])
    coff = np.concatenate([[0], np.cumsum(widths)])
    out = Affine(np.zeros((roff[-1], coff[-1])))
    for i, row in enumerate(rows):
        for j, blk in enumerate(row):
            if blk is None or (np.isscalar(blk) and blk == 0):
                continue
            if not isinstance(blk, Affine):
                blk = Affine(np.atleast_2d(np.asarray(blk, dtype=float)))
            pad_c = np.zeros(out.shape)
            pad_c[roff[i]:roff[i + 1], coff[j]:coff[j + 1]] = blk.const
            terms = {}
            for vid, coef in blk.terms.items():
                big = np.zeros((coef.shape[0],) + out.shape)
                big[:, roff[i]:roff[i + 1], coff[j]:coff[j + 1]] = coef
                terms[vid] = big
            out = out + Affine(pad_c, terms, blk.specs)
    return out


class Sense(str, enum.Enum):
    PSD = "psd"
    NSD = "nsd"
    PD = "pd"
    ND = "nd"

    @property
    def strict(self) -> bool:
        return self in (Sense.PD, Sense.ND)

    @property
    def sign(self) -> float:
        return 1.0 if self in (Sense.PSD, Sense.PD) else -1.0


class LmiExpr:
    """A symmetric affine matrix constrained to a (semi)definite cone.

    Strict senses are enforced as ``sign * M >= margin * I``.
    """

    def __init__(self, matrix: Affine, sense: Sense | str, strictness_margin: float | None = None,
                 name: str = ""):
        self.sense = Sense(sense)
        if matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch(f"LMI block must be square, got {matrix.shape}")
        scale = max(1.0, float(np.abs(matrix.const).max(initial=0.0)),
                    *(float(np.abs(c).max(initial=0.0)) for c in matrix.terms.values()))
        for coef in (matrix.const, *matrix.terms.values()):
            if np.abs(coef - np.swapaxes(coef, -1, -2)).max(initial=0.0) > 1e-12 * scale:
                raise BadInput(f"LMI '{name}' is not symmetric in every variable")
        const = 0.5 * (matrix.const + matrix.const.T)
        terms = {v: 0.5 * (c + c.transpose(0, 2, 1)) for v, c in matrix.terms.items()}
        self.matrix = Affine(const, terms, matrix.specs)
        if strictness_margin is None:
            strictness_margin = STRICT_MARGIN_REL * max(1.0, float(np.linalg.norm(const))) if self.sense.strict else 0.0
        if self.sense.strict and not strictness_margin > 0:
            raise BadInput("strict LMIs need a positive strictness margin")
        if strictness_margin < 0:
            raise BadInput("strictness margin must be >= 0")
        self.strictness_margin = float(strictness_margin)
        self.name = name

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def constant_block(self) -> SymMatrix:
        return SymMatrix(self.matrix.const, check=False)

    @property
    def terms(self):
        return self.matrix.terms

    @property
    def variables(self):
        return self.matrix.specs

    def evaluate(self, assignment) -> SymMatrix:
        return SymMatrix.symmetrize(self.matrix.evaluate(assignment))

    def oriented(self, assignment) -> np.ndarray:
        """``sign * M(x)``; the constraint holds iff this is ``>= margin * I``."""
        return self.sense.sign * np.asarray(self.evaluate(assignment))

    def __repr__(self):
        return f"LmiExpr({self.name or '?'}, dim={self.dim}, sense={self.sense.value})"


def _times(s: Affine, mat) -> Affine:
    """Scalar affine ``s`` times a constant matrix."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    return Affine(s.const[0, 0] * mat, {v: c[:, 0, 0][:, None, None] * mat for v, c in s.terms.items()}, s.specs)


def _check_alpha(alpha):
    if not np.isfinite(alpha) or not alpha > 0:
        raise BadAlpha(f"alpha must be > 0, got {alpha}")


def _sym_var(vid, n):
    return Affine.var(VariableSpec.sym(vid, n))


def _scalar_var(vid, lower=None):
    return Affine.var(VariableSpec.scalar(vid, lower=lower))


def lmi_open_loop(m: PlantModel, alpha: float, Q="Q") -> LmiExpr:
    """Open-loop invariant-ellipsoid condition (NSD, affine in Q)."""
    _check_alpha(alpha)
    Qv = _sym_var(Q, m.n)
    top = m.A @ Qv + Qv @ m.A.T + alpha * Qv
    return LmiExpr(bmat([[top, m.B_w], [m.B_w.T, -alpha * np.eye(m.n_w)]]), Sense.NSD, name="open_loop")


def lmi_output_bound(m: PlantModel, lambda_id="lambda", Q_id="Q") -> LmiExpr:
    """``[[lambda I, C Q], [Q C^T, Q]] >= 0``: output peak inside the ellipsoid below sqrt(lambda)."""
    if m.n_y < 1:
        raise BadInput("output map needs at least one row")
    lam = _scalar_var(lambda_id)
    Qv = _sym_var(Q_id, m.n)
    return LmiExpr(bmat([[_times(lam, np.eye(m.n_y)), m.C @ Qv],
                         [Qv @ m.C.T, Qv]]), Sense.PSD, name="output_bound")


def lmi_fs_closed_loop(m: PlantModel, alpha: float, Q="Q", v="v") -> LmiExpr:
    """Closed-loop Lyapunov condition under ``u = -(v/2) B_u^T Q^{-1} x`` (NSD, affine in Q, v)."""
    _check_alpha(alpha)
    Qv = _sym_var(Q, m.n)
    vv = _scalar_var(v, lower=0.0)
    BB = m.B_u @ m.B_u.T
    top = m.A @ Qv + Qv @ m.A.T - _times(vv, BB) + alpha * Qv
    return LmiExpr(bmat([[top, m.B_w], [m.B_w.T, -alpha * np.eye(m.n_w)]]), Sense.NSD, name="fs_closed_loop")


def lmi_fs_input_bound(m: PlantModel, u_max: float, Q="Q", v="v", strictness_margin=None) -> LmiExpr:
    """``[[4Q, v B_u], [v B_u^T, u_max^2 I]] > 0``: linear control stays below u_max on the ellipsoid."""
    if not u_max > 0:
        raise BadInput("u_max must be > 0")
    Qv = _sym_var(Q, m.n)
    vv = _scalar_var(v, lower=0.0)
    off = _times(vv, m.B_u)
    return LmiExpr(bmat([[4.0 * Qv, off], [off.T, u_max ** 2 * np.eye(m.n_u)]]), Sense.PD,
                   strictness_margin, name="fs_input_bound")


def _check_pd(P, name="P"):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or not is_pd(P, 0.0):
        raise BadInput(f"{name} must be positive definite")
    return 0.5 * (P + P.T)


def lmi_of_closed_loop(m: PlantModel, P, v: float, alpha: float, r: float = 1.0,
                       S="S", W="W") -> LmiExpr:
    """Observer-based closed loop with the low-gain law scaled by ``r`` (NSD, affine in S, W)."""
    _check_alpha(alpha)
    P = _check_pd(P)
    if not r >= 1.0:
        raise BadInput("r must be >= 1")
    n = m.n
    Sv = _sym_var(S, n)
    Wv = Affine.var(VariableSpec.rect(W, n, m.n_y))
    PBBP = P @ m.B_u @ m.B_u.T @ P
    b11 = P @ m.A + m.A.T @ P - r * v * PBBP + alpha * P
    b12 = r * (v / 2.0) * PBBP
    b22 = Sv @ m.A + m.A.T @ Sv - Wv @ m.C - m.C.T @ Wv.T + alpha * Sv
    b23 = Sv @ m.B_w
    mat = bmat([[b11, b12, P @ m.B_w],
                [b12.T, b22, b23],
                [(P @ m.B_w).T, b23.T, -alpha * np.eye(m.n_w)]])
    return LmiExpr(mat, Sense.NSD, name=f"of_closed_loop(r={r:g})")


def lmi_of_input_bound(P, v: float, B_u, u_max: float, S="S", strictness_margin=None) -> LmiExpr:
    """Augmented-state control bound (PD, affine in S)."""
    P = _check_pd(P)
    if not u_max > 0:
        raise BadInput("u_max must be > 0")
    B_u = np.asarray(B_u, dtype=float).reshape(P.shape[0], -1)
    n, mu = B_u.shape
    Sv = _sym_var(S, n)
    hPB = (v / 2.0) * P @ B_u
    mat = bmat([[P, np.zeros((n, n)), -hPB],
                [np.zeros((n, n)), Sv, hPB],
                [-hPB.T, hPB.T, u_max ** 2 * np.eye(mu)]])
    return LmiExpr(mat, Sense.PD, strictness_margin, name="of_input_bound")


def lmi_error_output_bound(m: PlantModel, theta_id="theta", S_id="S") -> LmiExpr:
    """``[[theta I, C], [C^T, S]] >= 0``: bound on the measured estimation error."""
    th = _scalar_var(theta_id)
    Sv = _sym_var(S_id, m.n)
    return LmiExpr(bmat([[_times(th, np.eye(m.n_y)), m.C], [m.C.T, Sv]]), Sense.PSD, name="error_output_bound")
