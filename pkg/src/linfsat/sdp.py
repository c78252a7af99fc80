"""Small dense SDP solver: log-barrier interior point with a Phase-I slack start.

Problems are ``minimize c^T x`` subject to a list of LMIs in the scalar
components ``x`` of the declared variables. All constraint blocks are stacked
into one block-diagonal matrix ``F(x) = F0 + sum_k x_k F_k`` that must stay
positive definite; the barrier is ``-log det F(x)``.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import BadInput
from .lmi import Affine, LmiExpr, Sense, VariableSpec, VarKind
from .linalg import eigvals_sym

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolverOptions:
    feasibility_tol: float = 1e-8
    step_tol: float = 1e-10
    max_iterations: int = 200
    barrier_shrink: float = 0.2
    max_norm: float | None = 1e6
    verbose: bool = False

    def __post_init__(self):
        if not (self.feasibility_tol > 0 and self.step_tol > 0 and self.max_iterations > 0):
            raise BadInput("solver tolerances and iteration limit must be positive")
        if not 0.0 < self.barrier_shrink < 1.0:
            raise BadInput("barrier_shrink must lie in (0, 1)")
        if self.max_norm is not None and not self.max_norm > 0:
            raise BadInput("max_norm must be positive")


@dataclass
class SdpProblem:
    """``objective`` maps a variable id to a float (scalars) or a coefficient matrix
    paired with the variable through the trace inner product."""

    variables: list
    objective: dict
    constraints: list
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        ids = [v.id for v in self.variables]
        if len(set(ids)) != len(ids):
            raise BadInput("variable ids must be unique")
        known = {v.id: v for v in self.variables}
        for con in self.constraints:
            for vid, spec in con.variables.items():
                if vid not in known:
                    raise BadInput(f"constraint {con.name!r} uses undeclared variable {vid!r}")
                if known[vid].kind is not spec.kind or known[vid].value_shape != spec.value_shape:
                    raise BadInput(f"variable {vid!r} declared with a different shape")
        for vid in self.objective:
            if vid not in known:
                raise BadInput(f"objective uses undeclared variable {vid!r}")


@dataclass
class SdpSolution:
    status: Status
    assignment: dict
    objective_value: float
    max_constraint_violation: float
    iterations: int
    infeasibility_margin: float | None = None
    gap: float | None = None
    at_norm_bound: bool = False

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def check_feasible(assignment, constraints) -> float:
    """Largest eigenvalue shortfall over the constraints (0 means every LMI holds).

    Uses the Jacobi eigensolver, independent of the solver's factorizations.
    Strict constraints count their margin, so a point on the boundary of a
    strict LMI reports a violation equal to the margin.
    """
    worst = 0.0
    for con in constraints:
        lam_min = float(eigvals_sym(con.oriented(assignment))[0])
        worst = max(worst, con.strictness_margin - lam_min)
    return worst


class _Stack:
    """Constraints flattened into ``F(x) = F0 + tensordot(x, Fk)``, with per-block margins folded into F0."""

    def __init__(self, problem: SdpProblem):
        self.specs = list(problem.variables)
        self.offsets = {}
        off = 0
        for spec in self.specs:
            self.offsets[spec.id] = off
            off += spec.size
        self.nvar = off
        cons = list(problem.constraints) + self._bound_constraints()
        self.dims = [c.dim for c in cons]
        self.D_user = sum(self.dims)
        R = problem.options.max_norm
        if R is not None:
            # ||x|| <= R as [[R, x^T], [x, R I]] >= 0 keeps every barrier subproblem bounded
            self.dims.append(self.nvar + 1)
        self.max_norm = R
        D = sum(self.dims)
        self.D = D
        F0 = np.zeros((D, D))
        Fk = np.zeros((self.nvar, D, D))
        pos = 0
        for con in cons:
            d = con.dim
            sl = slice(pos, pos + d)
            sign = con.sense.sign
            F0[sl, sl] = sign * con.matrix.const - con.strictness_margin * np.eye(d)
            for vid, coef in con.matrix.terms.items():
                o = self.offsets[vid]
                Fk[o:o + coef.shape[0], sl, sl] += sign * coef
            pos += d
        if R is not None:
            F0[pos:, pos:] = R * np.eye(self.nvar + 1)
            for k in range(self.nvar):
                Fk[k, pos, pos + 1 + k] = Fk[k, pos + 1 + k, pos] = 1.0
        self.F0, self.Fk = F0, Fk
        self.c = self._objective(problem.objective)

    def _bound_constraints(self):
        out = []
        for spec in self.specs:
            if spec.kind is not VarKind.SCALAR:
                continue
            x = Affine.var(spec)
            if spec.lower is not None:
                out.append(LmiExpr(x - spec.lower, Sense.PSD, name=f"{spec.id}>=lower"))
            if spec.upper is not None:
                out.append(LmiExpr(spec.upper - x, Sense.PSD, name=f"{spec.id}<=upper"))
        return out

    def _objective(self, objective):
        c = np.zeros(self.nvar)
        specs = {s.id: s for s in self.specs}
        for vid, coef in objective.items():
            spec = specs[vid]
            o = self.offsets[vid]
            if spec.kind is VarKind.SCALAR:
                c[o] = float(coef)
            else:
                G = np.asarray(coef, dtype=float).reshape(spec.value_shape)
                c[o:o + spec.size] = np.einsum("kij,ij->k", spec.basis(), G)
        return c

    def F(self, x):
        return self.F0 + np.tensordot(x, self.Fk, axes=1)

    def unpack(self, x):
        return {s.id: s.to_value(x[self.offsets[s.id]:self.offsets[s.id] + s.size]) for s in self.specs}


# intermediate centerings stop at this half squared Newton decrement; the last one uses step_tol
_LOOSE_CENTERING = 0.5
_PHASE1_REL_GAP = 1e-13


class _Barrier:
    """Newton centering for ``t * c^T x - log det(F0 + sum x_k Fk)``.

    The line search is exact along the Newton direction: with ``F = L L^T`` and
    ``mu`` the eigenvalues of ``L^-1 dF L^-T``, ``log det(F + s dF)`` is
    ``log det F + sum log(1 + s mu)``, so no refactorization is needed per trial step.
    """

    def __init__(self, F0, Fk, c, opts: SolverOptions, budget):
        self.D = F0.shape[0]
        self.F0 = F0.reshape(-1)
        self.Fk = Fk
        self.Fflat = Fk.reshape(Fk.shape[0], -1)
        self.c, self.opts = c, opts
        self.budget = budget  # shared one-element list of remaining Newton steps

    def center(self, x, t, stop=None, tol=None):
        """Returns ``(x, converged, reason)``; ``stop(x)`` may end centering early."""
        tol = self.opts.step_tol if tol is None else tol
        D = self.D
        for _ in range(100):
            if self.budget[0] <= 0:
                return x, False, "max_iterations"
            self.budget[0] -= 1
            F = (self.F0 + x @ self.Fflat).reshape(D, D)
            try:
                L = np.linalg.cholesky(F)
            except np.linalg.LinAlgError:
                return x, False, "numerical_failure"
            Linv = np.linalg.inv(L)
            G = Linv @ self.Fk @ Linv.T
            Gflat = G.reshape(G.shape[0], -1)
            grad = t * self.c - np.trace(G, axis1=1, axis2=2)
            H = Gflat @ Gflat.T
            try:
                dx = -np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(H, grad, rcond=None)[0]
            if not np.all(np.isfinite(dx)):
                return x, False, "numerical_failure"
            dec2 = float(-grad @ dx)
            if dec2 / 2.0 <= tol:
                return x, True, ""
            mu = np.linalg.eigvalsh((dx @ Gflat).reshape(D, D))
            slope = t * float(self.c @ dx)
            step = 1.0
            if mu[0] < 0:
                step = min(1.0, 0.99 / -mu[0])
            while True:
                # phi(step) - phi(0) for the barrier objective along dx
                delta = slope * step - np.sum(np.log1p(step * mu))
                if delta <= -0.01 * step * dec2:
                    break
                step *= 0.5
                if step < 1e-14:
                    return x, True, "stalled"
            x = x + step * dx
            if stop is not None and stop(x):
                return x, True, "stopped"
        return x, True, "inner_limit"


def _phase1(stack: _Stack, opts: SolverOptions, budget, x0=None):
    """Find a strictly feasible point by minimizing ``s`` subject to ``F(x) + s I > 0``."""
    n, D = stack.nvar, stack.D
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    F = stack.F(x)
    lam_min = float(np.linalg.eigvalsh(F)[0])
    if lam_min > 0:
        return x, lam_min, True
    Du = stack.D_user
    scale = max(1.0, float(np.abs(F[:Du, :Du]).max(initial=0.0)))
    s = -lam_min + scale
    shift = np.zeros((D, D))
    shift[:Du, :Du] = np.eye(Du)
    Fk = np.concatenate([stack.Fk, shift[None]], axis=0)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    bar = _Barrier(stack.F0, Fk, c, opts, budget)
    z = np.append(x, s)
    t = D / s
    # Thin but genuine interiors (margin ~1e-12 relative) occur in observer problems, so
    # only give up once the gap is down at rounding level; a positive lower bound on
    # the shift ends the search much earlier when the problem is truly infeasible.
    gap_tol = _PHASE1_REL_GAP * scale
    while True:
        z, ok, reason = bar.center(z, t, stop=lambda zz: zz[-1] < 0, tol=_LOOSE_CENTERING)
        if z[-1] < 0:
            return z[:-1], -z[-1], True
        if reason in ("max_iterations", "numerical_failure"):
            return z[:-1], -z[-1], None
        # near-central point: s - D/t lower-bounds the optimal shift
        if z[-1] - D / t > 0 or D / t < gap_tol:
            return z[:-1], -z[-1], False
        t /= opts.barrier_shrink


def solve(problem: SdpProblem, x0=None) -> SdpSolution:
    """Minimize the problem's objective; the returned status never hides a failure."""
    opts = problem.options
    stack = _Stack(problem)
    budget = [opts.max_iterations]
    x, margin, feasible = _phase1(stack, opts, budget, x0)
    used = lambda: opts.max_iterations - budget[0]
    if feasible is None:
        status = Status.MAX_ITERATIONS if budget[0] <= 0 else Status.NUMERICAL_FAILURE
        return _finish(problem, stack, x, status, used(), margin=-margin)
    if not feasible:
        if opts.verbose:
            log.info("phase I: infeasible, required shift %.3e", -margin)
        return _finish(problem, stack, x, Status.INFEASIBLE, used(), margin=-margin)

    bar = _Barrier(stack.F0, stack.Fk, stack.c, opts, budget)
    # start where the objective term is worth about as much as the barrier
    obj0 = abs(float(stack.c @ x))
    t = stack.D / obj0 if obj0 > 0 else 1.0
    mu = 1.0 / opts.barrier_shrink
    status = Status.OPTIMAL
    final = False
    while True:
        x, ok, reason = bar.center(x, t, tol=None if final else _LOOSE_CENTERING)
        obj = float(stack.c @ x)
        if opts.verbose:
            log.info("iter %4d  t=%.3e  obj=% .10e  gap<=%.2e", used(), t, obj, stack.D / t)
        if reason == "max_iterations":
            status = Status.MAX_ITERATIONS
            break
        if reason == "numerical_failure" or not np.all(np.isfinite(x)) or np.abs(x).max() > 1e15:
            status = Status.NUMERICAL_FAILURE
            break
        if final:
            break
        if stack.D / (t * mu) <= opts.feasibility_tol * max(1.0, abs(obj)):
            final = True
        t *= mu
    return _finish(problem, stack, x, status, used(), gap=stack.D / t)


def _finish(problem, stack, x, status, iters, margin=None, gap=None):
    assignment = stack.unpack(x)
    viol = check_feasible(assignment, problem.constraints) if problem.constraints else 0.0
    for spec in stack.specs:
        if spec.kind is VarKind.SCALAR:
            val = assignment[spec.id]
            if spec.lower is not None:
                viol = max(viol, spec.lower - val)
            if spec.upper is not None:
                viol = max(viol, val - spec.upper)
    if status is Status.OPTIMAL and viol > problem.options.feasibility_tol:
        status = Status.NUMERICAL_FAILURE
    at_bound = stack.max_norm is not None and float(np.linalg.norm(x)) > 0.99 * stack.max_norm
    return SdpSolution(status=status, assignment=assignment, objective_value=float(stack.c @ x),
                       max_constraint_violation=float(viol), iterations=iters,
                       infeasibility_margin=margin, gap=gap, at_norm_bound=at_bound)
