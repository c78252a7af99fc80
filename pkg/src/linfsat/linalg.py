"""Dense symmetric-matrix kernels.

Matrices here are tiny (at most a few dozen rows), so everything is plain
numpy with a cyclic Jacobi eigensolver that does not depend on LAPACK. The
Jacobi path is what the certificate audits use, which keeps them independent
of the LAPACK calls made inside the SDP solver.
"""
from __future__ import annotations

import numpy as np

from .errors import SingularBlock

DEFAULT_PSD_TOL = 1e-9


class SymMatrix:
    """Read-only symmetric matrix; the lower triangle mirrors the upper on construction."""

    __slots__ = ("_a",)

    def __init__(self, entries, *, check: bool = True, atol: float = 1e-12):
        a = np.array(entries, dtype=float, copy=True)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
        if check:
            scale = max(1.0, float(np.abs(a).max()))
            if np.abs(a - a.T).max() > atol * scale:
                raise ValueError("matrix is not symmetric")
        iu = np.triu_indices(a.shape[0], 1)
        a.T[iu] = a[iu]
        a.setflags(write=False)
        self._a = a

    @classmethod
    def symmetrize(cls, entries) -> "SymMatrix":
        a = np.asarray(entries, dtype=float)
        return cls(0.5 * (a + a.T), check=False)

    @classmethod
    def identity(cls, n: int) -> "SymMatrix":
        return cls(np.eye(n), check=False)

    @classmethod
    def zeros(cls, n: int) -> "SymMatrix":
        return cls(np.zeros((n, n)), check=False)

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self._a

    def __array__(self, dtype=None, copy=None):
        return self._a if dtype is None else self._a.astype(dtype)

    def __add__(self, other):
        return SymMatrix(self._a + _as_array(other), check=False)

    def __sub__(self, other):
        return SymMatrix(self._a - _as_array(other), check=False)

    def __mul__(self, k: float):
        return SymMatrix(self._a * float(k), check=False)

    __rmul__ = __mul__

    def __neg__(self):
        return SymMatrix(-self._a, check=False)

    def __repr__(self):
        return f"SymMatrix({self._a.tolist()!r})"

    def __eq__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self._a.shape == other._a.shape and bool(np.all(self._a == other._a))

    __hash__ = None


def _as_array(m) -> np.ndarray:
    if isinstance(m, SymMatrix):
        return m.entries
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    return a


def _as_sym(m) -> np.ndarray:
    a = _as_array(m)
    if isinstance(m, SymMatrix):
        return a
    return 0.5 * (a + a.T)


def eig_sym(m, *, tol: float = 1e-15, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with ``w`` ascending and ``V`` orthonormal so that
    ``V @ diag(w) @ V.T`` reproduces ``m``.
    """
    a = _as_sym(m).copy()
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a[np.triu_indices(n, 1)])
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-100 * abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = a.diagonal().copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigvals_sym(m) -> np.ndarray:
    return eig_sym(m)[0]


def min_eig(m) -> float:
    return float(eig_sym(m)[0][0])


def is_psd(m, tol: float = DEFAULT_PSD_TOL) -> bool:
    """True iff the smallest eigenvalue is at least ``-tol * max(1, ||m||_F)``."""
    a = _as_sym(m)
    return min_eig(a) >= -tol * max(1.0, float(np.linalg.norm(a)))


def is_pd(m, tol: float = DEFAULT_PSD_TOL) -> bool:
    a = _as_sym(m)
    return min_eig(a) > tol * max(1.0, float(np.linalg.norm(a)))


def cholesky(m) -> np.ndarray:
    """Lower-triangular Cholesky factor; raises SingularBlock unless ``m`` is PD."""
    a = _as_sym(m)
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - low[j, :j] @ low[j, :j]
        if not d > 0.0:
            raise SingularBlock(f"matrix not positive definite (pivot {j} = {d:.3e})")
        low[j, j] = np.sqrt(d)
        low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def inv_sym(m) -> SymMatrix:
    """Inverse of a symmetric positive-definite matrix via its Cholesky factor."""
    low = cholesky(m)
    n = low.shape[0]
    linv = np.linalg.solve(low, np.eye(n)) if n > 1 else 1.0 / low
    return SymMatrix.symmetrize(linv.T @ linv)


def schur_complement(m, block_split: int, tol: float = DEFAULT_PSD_TOL) -> SymMatrix:
    """Complement of the lower-right block: ``m11 - m12 @ inv(m22) @ m12.T``.

    ``block_split`` is the size of the upper-left block.
    """
    a = _as_sym(m)
    n = a.shape[0]
    if not 0 < block_split < n:
        raise ValueError(f"block_split must lie in (0, {n})")
    m11 = a[:block_split, :block_split]
    m12 = a[:block_split, block_split:]
    m22 = a[block_split:, block_split:]
    if not is_pd(m22, tol):
        raise SingularBlock("lower-right block is not positive definite")
    low = cholesky(m22)
    x = np.linalg.solve(low, m12.T)
    return SymMatrix.symmetrize(m11 - x.T @ x)
