"""Comparison controllers: LQR, pole placement, and literal gain vectors."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import BadInput, DimensionMismatch, NotControllable, NotStabilizable
from .linalg import is_pd, is_psd
from .model import PlantModel, ctrb


class BaselineKind(str, enum.Enum):
    LQR = "lqr"
    POLE_PLACE = "pole_place"
    LITERAL = "literal"


@dataclass(frozen=True)
class BaselineSpec:
    kind: BaselineKind
    name: str = ""
    Q_weight: tuple | None = None
    R_weight: tuple | None = None
    poles: tuple | None = None
    K: tuple | None = None

    @classmethod
    def lqr(cls, Q_weight, R_weight, name="lqr"):
        return cls(BaselineKind.LQR, name, Q_weight=_tuplify(Q_weight), R_weight=_tuplify(R_weight))

    @classmethod
    def pole_place(cls, poles, name="pole_place"):
        return cls(BaselineKind.POLE_PLACE, name, poles=tuple(complex(p) for p in poles))

    @classmethod
    def literal(cls, K, name="literal"):
        return cls(BaselineKind.LITERAL, name, K=tuple(float(k) for k in np.ravel(K)))

    def gain(self, m: PlantModel) -> np.ndarray:
        """Feedback gain (model input units) for ``u = -sat(K x)``."""
        if self.kind is BaselineKind.LQR:
            return lqr_gain(m, np.array(self.Q_weight, dtype=float), np.array(self.R_weight, dtype=float))[0]
        if self.kind is BaselineKind.POLE_PLACE:
            return pole_place_gain(m, self.poles)
        K = np.array(self.K, dtype=float).reshape(1, -1)
        if K.shape[1] != m.n:
            raise DimensionMismatch(f"literal gain needs {m.n} entries, got {K.shape[1]}")
        return K


def _tuplify(a):
    return tuple(tuple(float(v) for v in row) for row in np.atleast_2d(np.asarray(a, dtype=float)))


def care(A, B, Qw, Rw):
    """Stabilizing solution of ``A^T P + P A - P B R^-1 B^T P + Q = 0``.

    Hamiltonian eigenvector method: ``P = U2 U1^-1`` from the stable invariant subspace.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    Rinv = np.linalg.inv(Rw)
    H = np.block([[A, -B @ Rinv @ B.T], [-Qw, -A.T]])
    w, V = np.linalg.eig(H)
    stable = w.real < 0
    if int(stable.sum()) != n or np.any(np.abs(w.real) < 1e-12 * max(1.0, np.abs(w).max())):
        raise NotStabilizable("Hamiltonian has eigenvalues on the imaginary axis")
    U = V[:, stable]
    U1, U2 = U[:n], U[n:]
    if np.linalg.cond(U1) > 1e12:
        raise NotStabilizable("stable subspace is not a graph; (A, B) not stabilizable")
    P = np.real(U2 @ np.linalg.inv(U1))
    P = 0.5 * (P + P.T)
    # one Newton (Kleinman) correction tightens the residual to machine precision
    K = Rinv @ B.T @ P
    Acl = A - B @ K
    rhs = -(Qw + K.T @ Rw @ K)
    P_new = _lyap(Acl, rhs)
    if np.all(np.isfinite(P_new)):
        P = 0.5 * (P_new + P_new.T)
    return P


def _lyap(A, Qm):
    """Solve ``A^T X + X A = Qm`` by vectorization (n is tiny)."""
    n = A.shape[0]
    I = np.eye(n)
    M = np.kron(I, A.T) + np.kron(A.T, I)
    x = np.linalg.solve(M, Qm.reshape(-1, order="F"))
    return x.reshape(n, n, order="F")


def care_residual(A, B, Qw, Rw, P) -> float:
    B = np.asarray(B, dtype=float).reshape(np.shape(A)[0], -1)
    return float(np.linalg.norm(A.T @ P + P @ A - P @ B @ np.linalg.solve(Rw, B.T) @ P + Qw))


def lqr_gain(m: PlantModel, Qw, Rw):
    """LQR gain ``K = R^-1 B_u^T P``; returns ``(K, P)``."""
    Qw = np.atleast_2d(np.asarray(Qw, dtype=float))
    Rw = np.atleast_2d(np.asarray(Rw, dtype=float))
    if Qw.shape != (m.n, m.n) or Rw.shape != (m.n_u, m.n_u):
        raise DimensionMismatch("LQR weights do not match the plant")
    if not is_psd(Qw):
        raise BadInput("state weight must be positive semidefinite")
    if not is_pd(Rw, 0.0):
        raise BadInput("input weight must be positive definite")
    P = care(m.A, m.B_u, Qw, Rw)
    K = np.linalg.solve(Rw, m.B_u.T @ P)
    if np.any(np.linalg.eigvals(m.A - m.B_u @ K).real >= 0):
        raise NotStabilizable("LQR closed loop is not Hurwitz")
    return K, P


def pole_place_gain(m: PlantModel, poles) -> np.ndarray:
    """Single-input pole placement by Ackermann's formula."""
    if m.n_u != 1:
        raise BadInput("pole placement is implemented for single-input plants")
    poles = np.asarray(poles, dtype=complex).ravel()
    if poles.size != m.n:
        raise BadInput(f"need {m.n} poles, got {poles.size}")
    if not np.allclose(np.sort_complex(poles), np.sort_complex(poles.conj())):
        raise BadInput("poles must be closed under conjugation")
    Wc = ctrb(m.A, m.B_u)
    s = np.linalg.svd(Wc, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        raise NotControllable("(A, B_u) is not controllable")
    K = _ackermann(m.A, m.B_u, poles)
    return _refine_poles(m.A, m.B_u, K, poles)


def _ackermann(A, B, poles):
    n = A.shape[0]
    phi = np.eye(n, dtype=complex)
    for p in poles:
        phi = phi @ (A - p * np.eye(n))
    e_last = np.zeros((1, n))
    e_last[0, -1] = 1.0
    return e_last @ np.linalg.solve(ctrb(A, B), phi.real)


def _match(eigs, poles):
    """Reorder ``eigs`` to best match ``poles`` (n is tiny; brute force)."""
    best = min(itertools.permutations(range(len(eigs))),
               key=lambda perm: np.abs(eigs[list(perm)] - poles).max())
    return eigs[list(best)], best


def _refine_poles(A, B, K, poles, sweeps=6):
    # Ackermann loses digits when the controllability matrix is poorly
    # conditioned; Newton steps on first-order eigenvalue sensitivities
    # dlam_i/dK = -(y_i^H B) x_i^T / (y_i^H x_i) recover them.
    def err_of(K):
        return np.abs(_match(np.linalg.eigvals(A - B @ K), poles)[0] - poles).max()

    err = err_of(K)
    for _ in range(sweeps):
        lam, X = np.linalg.eig(A - B @ K)
        Y = np.linalg.inv(X).conj().T
        lam, perm = _match(lam, poles)
        X, Y = X[:, perm], Y[:, perm]
        J = np.array([-(Y[:, i].conj() @ B[:, 0]) * X[:, i] / (Y[:, i].conj() @ X[:, i])
                      for i in range(len(poles))])
        r = poles - lam
        dK, *_ = np.linalg.lstsq(np.vstack([J.real, J.imag]), np.concatenate([r.real, r.imag]), rcond=None)
        K_new = K + dK.reshape(1, -1)
        err_new = err_of(K_new)
        if not err_new < err:
            break
        K, err = K_new, err_new
    return K
