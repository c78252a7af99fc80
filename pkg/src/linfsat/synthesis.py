"""Star-norm analysis and saturating L-infinity controller synthesis.

Each design is a line search over the S-procedure multiplier ``alpha``; at a
fixed ``alpha`` the remaining problem is an SDP in (Q, lambda[, v]) or, for
the observer, in (S, W, theta).
"""
from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import lmi
from .errors import BadInput, Infeasible, InfeasibleAtAllAlpha
from .linalg import SymMatrix, inv_sym
from .model import PlantModel, is_hurwitz
from .sdp import SdpProblem, SolverOptions, check_feasible, solve

log = logging.getLogger(__name__)

AUDIT_TOL = 1e-7
DEFAULT_DELTAS = (10.0, 100.0)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchSpec:
    lo: float = 1e-3
    hi: float = 1e3
    n_grid: int = 60
    rel_tol: float = 1e-4
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise BadInput("alpha bracket must satisfy 0 < lo < hi")
        if self.n_grid < 2 or not self.rel_tol > 0:
            raise BadInput("need at least two grid points and a positive tolerance")


def alpha_line_search(spec: SearchSpec, fixed_alpha_solver):
    """Minimize ``fixed_alpha_solver(alpha) -> (objective, payload) | None`` over alpha.

    A log-spaced grid scan is refined by golden-section search in log(alpha)
    between the neighbours of the best grid point. Infeasible alphas count as
    +inf; ties go to the smaller alpha. Returns ``(alpha, objective, payload)``.
    """
    cache = {}

    def evaluate(a):
        if a not in cache:
            res = fixed_alpha_solver(a)
            cache[a] = (math.inf, None) if res is None else (float(res[0]), res[1])
        return cache[a][0]

    grid = np.logspace(math.log10(spec.lo), math.log10(spec.hi), spec.n_grid)
    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            results = list(pool.map(fixed_alpha_solver, grid))
        for a, res in zip(grid, results):
            cache[a] = (math.inf, None) if res is None else (float(res[0]), res[1])
    vals = [evaluate(a) for a in grid]
    i = int(np.argmin(vals))
    if not math.isfinite(vals[i]):
        raise InfeasibleAtAllAlpha(f"no alpha in [{spec.lo:g}, {spec.hi:g}] is feasible")

    lo = math.log(grid[max(i - 1, 0)])
    hi = math.log(grid[min(i + 1, len(grid) - 1)])
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = evaluate(math.exp(c)), evaluate(math.exp(d))
    while hi - lo > spec.rel_tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = evaluate(math.exp(c))
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = evaluate(math.exp(d))

    best = min(cache, key=lambda a: (cache[a][0], a))
    return best, cache[best][0], cache[best][1]


@dataclass(frozen=True)
class StarNormCertificate:
    """Invariant ellipsoid ``{x : x^T Q^{-1} x <= 1}`` with output bound ``sqrt(lambda)``."""

    Q: SymMatrix
    alpha: float
    lam: float
    audit_violation: float = 0.0

    @property
    def star_norm(self) -> float:
        return math.sqrt(max(self.lam, 0.0))

    @property
    def Q_inv(self) -> np.ndarray:
        return np.asarray(inv_sym(self.Q))

    def level(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.Q_inv @ x)


class Mode(str, enum.Enum):
    LOW_GAIN = "low_gain"
    HIGH_GAIN = "high_gain"


@dataclass(frozen=True)
class ControllerDesign:
    """Low-gain law ``u = -K x`` with ``K = (v/2) B_u^T Q^{-1}``, or its saturated
    ``delta``-scaled high-gain variant. ``u_max`` is in the plant model's input units."""

    K: np.ndarray
    v: float
    delta: float
    u_max: float
    certificate: StarNormCertificate
    augmented: bool = False
    u_scale: float = 1.0

    def __post_init__(self):
        if not self.delta >= 1.0:
            raise BadInput("delta must be >= 1")

    @property
    def mode(self) -> Mode:
        return Mode.LOW_GAIN if self.delta == 1.0 else Mode.HIGH_GAIN

    @property
    def K_physical(self) -> np.ndarray:
        """Gain mapping state to inverter power in p.u."""
        return self.u_scale * self.K

    def with_delta(self, delta: float) -> "ControllerDesign":
        return ControllerDesign(self.K, self.v, float(delta), self.u_max, self.certificate,
                                self.augmented, self.u_scale)


@dataclass(frozen=True)
class ObserverDesign:
    S: SymMatrix
    W: np.ndarray
    L: np.ndarray
    theta: float
    delta_used: float
    audit_violation: float = 0.0
    at_norm_bound: bool = False

    @property
    def error_star_norm(self) -> float:
        return math.sqrt(max(self.theta, 0.0))



def _solve_or_none(problem: SdpProblem, what: str, alpha: float):
    sol = solve(problem)
    if not sol.ok:
        log.debug("%s at alpha=%.6g: %s", what, alpha, sol.status.value)
        return None
    return sol


def star_norm(m: PlantModel, alpha_search: SearchSpec = SearchSpec(),
              options: SolverOptions = SolverOptions()) -> StarNormCertificate:
    """Smallest invariant-ellipsoid bound on the peak output of ``x' = A x + B_w w``."""
    if not is_hurwitz(m.A):
        raise InfeasibleAtAllAlpha("open-loop star norm is finite only for Hurwitz A")
    Qs = lmi.VariableSpec.sym("Q", m.n)
    lam = lmi.VariableSpec.scalar("lambda")
    out_bound = lmi.lmi_output_bound(m)

    def at_alpha(alpha):
        cons = [lmi.lmi_open_loop(m, alpha), out_bound]
        sol = _solve_or_none(SdpProblem([Qs, lam], {"lambda": 1.0}, cons, options), "star_norm", alpha)
        return None if sol is None else (sol.objective_value, sol)

    alpha, _, sol = alpha_line_search(alpha_search, at_alpha)
    return _certificate(m, sol.assignment, alpha, [lmi.lmi_open_loop(m, alpha), out_bound])


def _certificate(m, assignment, alpha, constraints):
    viol = check_feasible(assignment, constraints)
    if viol > AUDIT_TOL:
        raise Infeasible(f"certificate audit failed: violation {viol:.3e}", margin=viol)
    return StarNormCertificate(Q=SymMatrix.symmetrize(assignment["Q"]), alpha=float(alpha),
                               lam=float(assignment["lambda"]), audit_violation=viol)


def fs_constraints(m: PlantModel, alpha: float, u_max: float, augmented: bool):
    cons = [lmi.lmi_output_bound(m), lmi.lmi_fs_closed_loop(m, alpha), lmi.lmi_fs_input_bound(m, u_max)]
    if augmented:
        cons.append(lmi.lmi_open_loop(m, alpha))
    return cons


def synth_fs(m: PlantModel, u_max: float | None = None, delta: float = 1.0,
             alpha_search: SearchSpec = SearchSpec(), *, augmented: bool = False,
             options: SolverOptions = SolverOptions()) -> ControllerDesign:
    """Star-norm-optimal full-state gain under the actuator limit.

    ``augmented`` additionally imposes the open-loop invariance LMI on
    (Q, alpha), which the observer design needs in order to be feasible.
    """
    u_max = m.u_limit if u_max is None else float(u_max)
    if not u_max > 0:
        raise BadInput("u_max must be > 0")
    if not delta >= 1.0:
        raise BadInput("delta must be >= 1")
    Qs = lmi.VariableSpec.sym("Q", m.n)
    lam = lmi.VariableSpec.scalar("lambda")
    v = lmi.VariableSpec.scalar("v", lower=0.0)

    def at_alpha(alpha):
        cons = fs_constraints(m, alpha, u_max, augmented)
        sol = _solve_or_none(SdpProblem([Qs, lam, v], {"lambda": 1.0}, cons, options), "synth_fs", alpha)
        return None if sol is None else (sol.objective_value, sol)

    try:
        alpha, _, sol = alpha_line_search(alpha_search, at_alpha)
    except InfeasibleAtAllAlpha as exc:
        raise Infeasible(f"full-state synthesis infeasible: {exc}") from exc
    cert = _certificate(m, sol.assignment, alpha, fs_constraints(m, alpha, u_max, augmented))
    v_val = float(sol.assignment["v"])
    K = (v_val / 2.0) * m.B_u.T @ cert.Q_inv
    return ControllerDesign(K=K, v=v_val, delta=float(delta), u_max=u_max, certificate=cert,
                            augmented=augmented, u_scale=m.u_scale)


def control_law(d: ControllerDesign, x) -> np.ndarray:
    """Low gain: ``-K x``. High gain: ``-sat(delta K x)`` clipped to ``+-u_max``."""
    q = d.K @ np.asarray(x, dtype=float)
    if d.mode is Mode.LOW_GAIN:
        return -q
    return -np.clip(d.delta * q, -d.u_max, d.u_max)


def of_constraints(m: PlantModel, fs: ControllerDesign, delta: float):
    P = fs.certificate.Q_inv
    a, v = fs.certificate.alpha, fs.v
    cons = [lmi.lmi_of_input_bound(P, v, m.B_u, fs.u_max),
            lmi.lmi_error_output_bound(m)]
    for r in sorted({1.0, float(delta)}):
        cons.append(lmi.lmi_of_closed_loop(m, P, v, a, r))
    return cons


def synth_of(m: PlantModel, fs: ControllerDesign, delta: float = 10.0, *,
             options: SolverOptions = SolverOptions()) -> ObserverDesign:
    """Observer gain ``L = S^{-1} W`` minimizing the bound on the measured estimation error.

    Valid for every saturation-induced scaling of the low-gain law in [1, delta].
    """
    if not delta >= 1.0:
        raise BadInput("delta must be >= 1")
    if not fs.augmented:
        ol = lmi.lmi_open_loop(m, fs.certificate.alpha)
        if check_feasible({"Q": fs.certificate.Q.entries}, [ol]) > AUDIT_TOL:
            raise Infeasible("observer design needs a full-state design synthesized with augmented=True")
    S = lmi.VariableSpec.sym("S", m.n)
    W = lmi.VariableSpec.rect("W", m.n, m.n_y)
    theta = lmi.VariableSpec.scalar("theta")
    cons = of_constraints(m, fs, delta)
    sol = solve(SdpProblem([S, W, theta], {"theta": 1.0}, cons, options))
    if not sol.ok:
        raise Infeasible(f"observer design failed: {sol.status.value}", margin=sol.infeasibility_margin)
    viol = check_feasible(sol.assignment, cons)
    if viol > AUDIT_TOL:
        raise Infeasible(f"observer audit failed: violation {viol:.3e}", margin=viol)
    S_val = SymMatrix.symmetrize(sol.assignment["S"])
    W_val = np.asarray(sol.assignment["W"], dtype=float)
    L = np.asarray(inv_sym(S_val)) @ W_val
    return ObserverDesign(S=S_val, W=W_val, L=L, theta=float(sol.assignment["theta"]),
                          delta_used=float(delta), audit_violation=viol, at_norm_bound=sol.at_norm_bound)


def audit_design(m: PlantModel, d: ControllerDesign) -> float:
    """Re-check every LMI behind a full-state design with the independent eigen path."""
    c = d.certificate
    assignment = {"Q": c.Q.entries, "lambda": c.lam, "v": d.v}
    return check_feasible(assignment, fs_constraints(m, c.alpha, d.u_max, d.augmented))


def audit_observer(m: PlantModel, fs: ControllerDesign, obs: ObserverDesign, r_values=None) -> float:
    """Observer LMIs re-checked, optionally at extra scalings ``r`` of the low-gain law."""
    assignment = {"S": obs.S.entries, "W": obs.W, "theta": obs.theta}
    cons = of_constraints(m, fs, obs.delta_used)
    P = fs.certificate.Q_inv
    for r in r_values or ():
        cons.append(lmi.lmi_of_closed_loop(m, P, fs.v, fs.certificate.alpha, r))
    return check_feasible(assignment, cons)
