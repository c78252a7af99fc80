"""Saturated closed-loop simulation, disturbance generation and reachable-set probing.

Integration is fixed-step RK4. The disturbance is held constant over each step
(switch times snap to the grid); the control law is re-evaluated at every RK4
stage. Runs over several seeds are integrated together as one batch.

Disturbances are drawn with numpy's ``default_rng(seed)`` (PCG64: a 128-bit
linear congruential state with a permuted 64-bit output).
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import BaselineSpec
from .errors import BadInput, BadTimestep, DimensionMismatch
from .model import PlantModel
from .synthesis import ControllerDesign, Mode, ObserverDesign

DEFAULT_DT = 1e-3
DEFAULT_HORIZON_S = 60.0
DEFAULT_DWELL_S = 5.0
DEFAULT_SEEDS = 20


class DisturbanceKind(str, enum.Enum):
    STEP_SEQUENCE = "step_sequence"
    CONSTANT_STEP = "constant_step"
    CUSTOM = "custom"


@dataclass(frozen=True)
class DisturbanceProfile:
    """Piecewise-constant scalar disturbance on ``[0, horizon_s]``.

    ``switch_times[i]`` is where ``levels[i]`` takes over; the first switch is at 0.
    """

    kind: DisturbanceKind
    switch_times: tuple
    levels: tuple
    horizon_s: float
    w_norm: float = 1.0
    seed: int | None = None
    dwell_s: float | None = None

    def __post_init__(self):
        if len(self.switch_times) != len(self.levels) or not self.levels:
            raise BadInput("need one level per switch time")
        if self.switch_times[0] != 0.0 or any(b <= a for a, b in zip(self.switch_times, self.switch_times[1:])):
            raise BadInput("switch times must start at 0 and increase")
        if not (self.horizon_s > 0 and self.w_norm >= 0):
            raise BadInput("horizon must be > 0 and w_norm >= 0")
        if max(abs(v) for v in self.levels) > self.w_norm:
            raise BadInput("disturbance level exceeds w_norm")

    @classmethod
    def constant(cls, level: float, horizon_s: float = DEFAULT_HORIZON_S, w_norm: float = 1.0):
        return cls(DisturbanceKind.CONSTANT_STEP, (0.0,), (float(level),), float(horizon_s), float(w_norm))

    @classmethod
    def custom(cls, pairs, horizon_s: float, w_norm: float = 1.0):
        """Zero-order hold through ``(time, value)`` pairs; zero before the first pair."""
        pairs = sorted((float(t), float(v)) for t, v in pairs)
        if not pairs or pairs[0][0] > 0.0:
            pairs.insert(0, (0.0, 0.0))
        times, values = zip(*pairs)
        return cls(DisturbanceKind.CUSTOM, times, values, float(horizon_s), float(w_norm))

    def value(self, t: float) -> float:
        i = int(np.searchsorted(self.switch_times, t, side="right")) - 1
        return self.levels[max(i, 0)]

    def sample(self, dt: float) -> np.ndarray:
        """Held value on each grid interval ``[k dt, (k+1) dt)`` plus the final sample."""
        n = n_steps(self.horizon_s, dt)
        out = np.empty(n + 1)
        starts = [int(round(t / dt)) for t in self.switch_times] + [n + 1]
        for lvl, a, b in zip(self.levels, starts, starts[1:]):
            out[min(a, n + 1):min(b, n + 1)] = lvl
        return out


def gen_disturbance(seed: int, horizon_s: float = DEFAULT_HORIZON_S, dwell_s: float = DEFAULT_DWELL_S,
                    w_norm: float = 1.0) -> DisturbanceProfile:
    """Random step sequence: a fresh uniform level in ``[-w_norm, w_norm]`` every ``dwell_s``."""
    if not (horizon_s > 0 and dwell_s > 0 and w_norm >= 0):
        raise BadInput("horizon and dwell must be > 0, w_norm >= 0")
    count = max(1, math.ceil(horizon_s / dwell_s - 1e-12))
    rng = np.random.default_rng(seed)
    levels = np.clip(rng.uniform(-w_norm, w_norm, count), -w_norm, w_norm)
    times = tuple(i * float(dwell_s) for i in range(count))
    return DisturbanceProfile(DisturbanceKind.STEP_SEQUENCE, times, tuple(float(v) for v in levels),
                              float(horizon_s), float(w_norm), seed=int(seed), dwell_s=float(dwell_s))


def n_steps(horizon_s: float, dt: float) -> int:
    return int(round(horizon_s / dt))


@dataclass
class SimResult:
    times: np.ndarray
    states: np.ndarray          # (N+1, n)
    inputs: np.ndarray          # physical units
    disturbance: np.ndarray
    estimates: np.ndarray | None = None
    levels: np.ndarray | None = None
    u_max: float = math.inf     # physical actuator bound
    output: np.ndarray | None = None
    seed: int | None = None
    peak_abs_freq: float = field(init=False)
    peak_abs_input: float = field(init=False)
    max_ellipsoid_level: float = field(init=False)

    def __post_init__(self):
        if self.output is None:
            self.output = self.states[:, 0] if len(self.states) else np.zeros(0)
        self.peak_abs_freq = float(np.max(np.abs(self.output))) if len(self.output) else 0.0
        self.peak_abs_input = float(np.max(np.abs(self.inputs))) if len(self.inputs) else 0.0
        self.max_ellipsoid_level = (float(np.max(self.levels))
                                    if self.levels is not None and len(self.levels) else math.nan)

    def __len__(self):
        return len(self.times)

    def saturation_fraction(self, frac: float = 0.99) -> float:
        """Share of samples with ``|u| >= frac * u_max``."""
        if not len(self.inputs):
            return 0.0
        return float(np.mean(np.abs(self.inputs) >= frac * self.u_max))

    def summary(self) -> dict:
        return {"seed": self.seed, "samples": len(self), "peak_abs_freq": self.peak_abs_freq,
                "peak_abs_input": self.peak_abs_input,
                "max_ellipsoid_level": None if math.isnan(self.max_ellipsoid_level) else self.max_ellipsoid_level,
                "saturation_fraction": self.saturation_fraction()}


class _Law:
    """Vectorized state-to-input map in model units, actuator clamp included."""

    def __init__(self, m: PlantModel, controller):
        self.Q_inv = None
        gain, inner = 1.0, math.inf
        if controller is None:
            K = np.zeros((m.n_u, m.n))
        elif isinstance(controller, ControllerDesign):
            K = np.asarray(controller.K, dtype=float)
            if controller.mode is Mode.HIGH_GAIN:
                gain, inner = controller.delta, controller.u_max
            self.Q_inv = controller.certificate.Q_inv
        elif isinstance(controller, BaselineSpec):
            K = controller.gain(m)
        else:
            K = np.atleast_2d(np.asarray(controller, dtype=float))
        if K.shape != (m.n_u, m.n):
            raise DimensionMismatch(f"gain must be {m.n_u}x{m.n}, got {K.shape}")
        self.K = K
        # -sat_inner(g K x) followed by the actuator clamp is one clamp at the tighter bound
        self.KgT = -gain * K.T
        self.bound = min(inner, m.u_limit)

    def __call__(self, X):
        u = X @ self.KgT
        return np.minimum(np.maximum(u, -self.bound, out=u), self.bound, out=u)


def _as_batch(x0, n, count):
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    if x0.shape[-1] != n:
        raise DimensionMismatch(f"x0 must have {n} entries")
    if not np.all(np.isfinite(x0)):
        raise BadInput("x0 must be finite")
    return np.broadcast_to(x0, (count, n)).copy()


def simulate_batch(m: PlantModel, controller, observer: ObserverDesign | None, dists, dt: float = DEFAULT_DT,
                   x0=None, xhat0=None, Q=None) -> list[SimResult]:
    """Integrate one closed loop under several disturbance profiles at once.

    All profiles must share the horizon. ``Q`` overrides the certificate used
    for the ellipsoid level ``x' Q^-1 x``.
    """
    dists = list(dists)
    if not dt > 0 or not math.isfinite(dt):
        raise BadTimestep("dt must be positive and finite")
    if m.n_w != 1:
        raise DimensionMismatch("simulation supports scalar disturbances")
    for d in dists:
        if d.dwell_s is not None and dt > d.dwell_s / 10 + 1e-15:
            raise BadTimestep(f"dt={dt} exceeds dwell/10 for dwell {d.dwell_s}")
    if len({d.horizon_s for d in dists}) > 1:
        raise BadInput("batched profiles must share a horizon")
    if not dists:
        return []
    law = _Law(m, controller)
    Q_inv = law.Q_inv if Q is None else np.linalg.inv(np.asarray(Q, dtype=float))
    B = len(dists)
    N = n_steps(dists[0].horizon_s, dt)
    W = np.stack([d.sample(dt) for d in dists], axis=1)     # (N+1, B)

    A, Bw, Bu = m.A, m.B_w, m.B_u
    n = m.n
    X = _as_batch(x0, n, B)
    if observer is not None:
        L = np.asarray(observer.L, dtype=float).reshape(n, -1)
        C = m.C
        if L.shape[1] != C.shape[0]:
            raise DimensionMismatch("observer gain does not match the output dimension")
        Xh = X.copy() if xhat0 is None else _as_batch(xhat0, n, B)
        Z = np.hstack([X, Xh])
        # z' = F z + G w + H u, u evaluated on the estimate
        F = np.block([[A, np.zeros((n, n))], [L @ C, A - L @ C]])
        G = np.vstack([Bw, np.zeros_like(Bw)])
        H = np.vstack([Bu, Bu])
        feedback = slice(n, 2 * n)
    else:
        Z = X
        F, G, H = A, Bw, Bu
        feedback = slice(0, n)
    Ft, Gt, Ht = F.T, G.T, H.T

    KgT, bound = law.KgT, law.bound

    def f(Zs, wG):
        u = Zs[:, feedback] @ KgT
        np.clip(u, -bound, bound, out=u)
        return Zs @ Ft + wG + u @ Ht

    traj = np.empty((N + 1, B, Z.shape[1]))
    traj[0] = Z
    WG = W[:, :, None] * Gt[None, :, :]      # (N+1, B, nz) disturbance forcing per step
    h2, h6 = 0.5 * dt, dt / 6.0
    for k in range(N):
        wG = WG[k]
        k1 = f(Z, wG)
        k2 = f(Z + h2 * k1, wG)
        k3 = f(Z + h2 * k2, wG)
        k4 = f(Z + dt * k3, wG)
        Z = Z + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        traj[k + 1] = Z

    times = dt * np.arange(N + 1)
    results = []
    for b, d in enumerate(dists):
        states = traj[:, b, :n]
        est = traj[:, b, n:] if observer is not None else None
        u = law(traj[:, b, feedback])[:, 0] * m.u_scale
        levels = None
        if Q_inv is not None:
            levels = np.einsum("ti,ij,tj->t", states, Q_inv, states)
        results.append(SimResult(times, states, u, W[:, b].copy(), est, levels,
                                 u_max=m.u_limit * m.u_scale, output=states @ m.C[0], seed=d.seed))
    return results


def simulate(m: PlantModel, controller=None, observer: ObserverDesign | None = None,
             dist: DisturbanceProfile | None = None, dt: float = DEFAULT_DT, x0=None, **kw) -> SimResult:
    """Single run; ``controller`` may be a design, a baseline spec, a raw gain or None (open loop)."""
    if dist is None:
        dist = DisturbanceProfile.constant(0.0)
    return simulate_batch(m, controller, observer, [dist], dt, x0, **kw)[0]


def probe_reachable(m: PlantModel, controller, n_seeds: int = DEFAULT_SEEDS, horizon_s: float = DEFAULT_HORIZON_S,
                    dt: float = DEFAULT_DT, Q=None, *, dwell_s: float = DEFAULT_DWELL_S, first_seed: int = 0,
                    observer: ObserverDesign | None = None):
    """Max ellipsoid level over seeded runs from the origin: ``(max_level, worst_seed, per_seed)``."""
    if n_seeds <= 0:
        return 0.0, None, {}
    if Q is None and not isinstance(controller, ControllerDesign):
        raise BadInput("probing needs Q or a certified controller")
    seeds = range(first_seed, first_seed + n_seeds)
    dists = [gen_disturbance(s, horizon_s, dwell_s) for s in seeds]
    runs = simulate_batch(m, controller, observer, dists, dt, Q=Q)
    per_seed = {r.seed: r.max_ellipsoid_level for r in runs}
    worst = max(per_seed, key=per_seed.get)
    return per_seed[worst], worst, per_seed


def ellipse_polyline(Q, samples: int = 360) -> np.ndarray:
    """Points on ``{x : x' Q^-1 x = 1}`` for a 2-D ``Q``."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (2, 2):
        raise DimensionMismatch("ellipse polyline needs a 2x2 Q")
    Lc = np.linalg.cholesky(Q)
    th = 2.0 * np.pi * np.arange(samples) / samples
    return np.stack([np.cos(th), np.sin(th)], axis=1) @ Lc.T


def _fmt(x: float) -> str:
    return repr(float(x))


def csv_header(r: SimResult) -> list[str]:
    cols = ["t", "dw", "dpm", "u", "w"]
    if r.estimates is not None:
        cols += ["dw_hat", "dpm_hat"]
    if r.levels is not None:
        cols.append("level")
    return cols


def export_csv(r: SimResult, path) -> None:
    """One row per sample; values use the shortest repr that round-trips exactly."""
    if r.states.shape[1:] not in ((2,), (0,)) and len(r):
        raise DimensionMismatch("CSV schema is defined for two-state plants")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(r))
        for k in range(len(r)):
            row = [r.times[k], r.states[k, 0], r.states[k, 1], r.inputs[k], r.disturbance[k]]
            if r.estimates is not None:
                row += [r.estimates[k, 0], r.estimates[k, 1]]
            if r.levels is not None:
                row.append(r.levels[k])
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}
