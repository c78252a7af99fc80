"""Command-line front end: ``linfsat {synthesize,simulate,compare,probe}``.

Exit codes: 0 success, 2 config/parse error, 3 infeasible synthesis, 4 runtime or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import sim
from .config import FeedbackMode, RunConfig, load_config
from .errors import BadInput, Infeasible, InvalidParams, LinfsatError
from .linalg import SymMatrix
from .model import PlantModel
from .sdp import SolverOptions
from .synthesis import (ControllerDesign, ObserverDesign, SearchSpec, StarNormCertificate,
                        audit_design, audit_observer, synth_fs, synth_of)

EXIT_OK, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_RUNTIME = 0, 2, 3, 4
LOG_ENV = "LINFSAT_LOG_LEVEL"
log = logging.getLogger("linfsat.cli")


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


# -- (de)serialization ------------------------------------------------------

def mat_to_json(a) -> dict:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return {"rows": a.shape[0], "cols": a.shape[1], "data": [float(v) for v in a.ravel()]}


def mat_from_json(d) -> np.ndarray:
    return np.array(d["data"], dtype=float).reshape(d["rows"], d["cols"])


def design_to_json(m: PlantModel, d: ControllerDesign, obs: ObserverDesign | None, cfg: RunConfig) -> dict:
    c = d.certificate
    out = {
        "bu_convention": cfg.plant.bu_convention.value,
        "plant": cfg.plant.model_dump(mode="json"),
        "K": mat_to_json(d.K),
        "K_physical": mat_to_json(d.K_physical),
        "v": d.v,
        "u_max_model": d.u_max,
        "u_scale": d.u_scale,
        "deltas": list(cfg.synthesis.deltas),
        "augmented": d.augmented,
        "Q": mat_to_json(c.Q.entries),
        "alpha": c.alpha,
        "lambda": c.lam,
        "star_norm": c.star_norm,
        "audit_violation": audit_design(m, d),
        "observer": None,
    }
    if obs is not None:
        out["observer"] = {
            "S": mat_to_json(obs.S.entries), "W": mat_to_json(obs.W), "L": mat_to_json(obs.L),
            "theta": obs.theta, "delta_used": obs.delta_used, "error_star_norm": obs.error_star_norm,
            "audit_violation": audit_observer(m, d, obs, (1.0, obs.delta_used)),
            "at_norm_bound": obs.at_norm_bound,
        }
    return out


def design_from_json(doc: dict) -> tuple[ControllerDesign, ObserverDesign | None]:
    cert = StarNormCertificate(SymMatrix(mat_from_json(doc["Q"])), float(doc["alpha"]), float(doc["lambda"]),
                               float(doc.get("audit_violation", 0.0)))
    d = ControllerDesign(mat_from_json(doc["K"]), float(doc["v"]), 1.0, float(doc["u_max_model"]), cert,
                         bool(doc["augmented"]), float(doc["u_scale"]))
    obs = None
    if doc.get("observer"):
        o = doc["observer"]
        obs = ObserverDesign(SymMatrix(mat_from_json(o["S"])), mat_from_json(o["W"]), mat_from_json(o["L"]),
                             float(o["theta"]), float(o["delta_used"]), float(o["audit_violation"]),
                             bool(o["at_norm_bound"]))
    return d, obs


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- commands ---------------------------------------------------------------

def _search(cfg: RunConfig) -> SearchSpec:
    s = cfg.synthesis
    return SearchSpec(lo=s.alpha_lo, hi=s.alpha_hi, n_grid=s.alpha_grid)


def _u_max_model(cfg: RunConfig, m: PlantModel) -> float:
    if cfg.synthesis.u_max is None:
        return m.u_limit
    return cfg.synthesis.u_max / m.u_scale


def _synthesize(cfg: RunConfig, m: PlantModel, options: SolverOptions):
    s = cfg.synthesis
    d = synth_fs(m, _u_max_model(cfg, m), 1.0, _search(cfg), augmented=s.use_augmented, options=options)
    obs = None
    if s.feedback is FeedbackMode.OUTPUT:
        obs = synth_of(m, d, s.observer_delta, options=options)
    return d, obs


def _report(doc: dict) -> str:
    k = doc["K_physical"]["data"]
    lines = [
        "Controller design",
        f"  convention      {doc['bu_convention']}",
        f"  K (p.u. power)  [{', '.join(f'{v:.6g}' for v in k)}]",
        f"  v               {doc['v']:.6g}",
        f"  alpha           {doc['alpha']:.6g}",
        f"  star-norm       {doc['star_norm']:.6g}  (certified bound on peak |dw|)",
        f"  high-gain deltas {doc['deltas']}",
        f"  audit violation {doc['audit_violation']:.3g}",
    ]
    o = doc["observer"]
    if o:
        lines += [
            "Observer design",
            f"  L               [{', '.join(f'{v:.6g}' for v in o['L']['data'])}]",
            f"  theta           {o['theta']:.6g}",
            f"  delta used      {o['delta_used']:.6g}",
            f"  audit violation {o['audit_violation']:.3g}",
        ]
        if o["at_norm_bound"]:
            lines.append("  note: observer variables reached the solver's norm bound; L is not unique")
    return "\n".join(lines) + "\n"


def cmd_synthesize(cfg: RunConfig, out: Path, options: SolverOptions) -> dict:
    m = cfg.plant.model()
    d, obs = _synthesize(cfg, m, options)
    doc = design_to_json(m, d, obs, cfg)
    _write_json(out / "design.json", doc)
    report = _report(doc)
    (out / "report.txt").write_text(report)
    print(report, end="")
    return doc


def _load_design(path: Path):
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise CliError(EXIT_RUNTIME, "io_error", f"cannot read design file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, "parse_error", f"design file {path} is not JSON: {exc}") from exc
    try:
        return design_from_json(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_PARSE, "parse_error", f"malformed design file {path}: {exc}") from exc


def _controllers(cfg: RunConfig, d: ControllerDesign):
    yield "low_gain", d
    for delta in cfg.synthesis.deltas:
        if delta != 1.0:
            yield f"high_gain_{delta:g}", d.with_delta(delta)


def _profiles(cfg: RunConfig, seeds):
    s = cfg.simulation
    return [sim.gen_disturbance(seed, s.horizon_s, s.dwell_s) for seed in seeds]


def cmd_simulate(cfg: RunConfig, out: Path, design_path: Path) -> dict:
    m = cfg.plant.model()
    d, obs = _load_design(design_path)
    dists = _profiles(cfg, cfg.simulation.seeds)
    dt = cfg.simulation.dt_s
    runs = [("open_loop", sim.simulate_batch(m, None, None, dists, dt))]
    for name, ctrl in _controllers(cfg, d):
        runs.append((name, sim.simulate_batch(m, ctrl, None, dists, dt)))
        if obs is not None:
            runs.append((name + "_observer", sim.simulate_batch(m, ctrl, obs, dists, dt)))
    table = []
    for name, results in runs:
        for r in results:
            table.append({"controller": name, **r.summary()})
            if "csv" in cfg.output.formats:
                sim.export_csv(r, out / f"sim_{name}_seed{r.seed}.csv")
    summary = {"star_norm": d.certificate.star_norm, "dt_s": dt, "runs": table}
    if "json" in cfg.output.formats:
        _write_json(out / "simulate.json", summary)
    return summary


def cmd_compare(cfg: RunConfig, out: Path, options: SolverOptions) -> dict:
    m = cfg.plant.model()
    d, _ = _synthesize(cfg, m, options)
    proposed = f"high_gain_{cfg.synthesis.compare_delta:g}"
    ctrls = [(proposed, d.with_delta(cfg.synthesis.compare_delta))]
    if not cfg.baselines:
        log.warning("no baselines configured; the table holds the proposed controller only")
    for b in cfg.baselines:
        spec = b.spec(m.u_scale) if b.kind == "literal" else b.spec()
        ctrls.append((b.name, spec))
    seeds = list(range(cfg.simulation.compare_seeds))
    dists = _profiles(cfg, seeds)
    rows = []
    for name, ctrl in ctrls:
        for r in sim.simulate_batch(m, ctrl, None, dists, cfg.simulation.dt_s):
            rows.append({"controller": name, "seed": r.seed, "peak_abs_freq": r.peak_abs_freq,
                         "peak_abs_input": r.peak_abs_input})
    per_seed_min = {}
    for seed in seeds:
        peaks = {r["controller"]: r["peak_abs_freq"] for r in rows if r["seed"] == seed}
        per_seed_min[seed] = peaks[proposed] <= min(peaks.values())
    result = {"proposed": proposed, "rows": rows,
              "proposed_minimal_per_seed": {str(k): v for k, v in per_seed_min.items()},
              "proposed_minimal_all": all(per_seed_min.values())}
    if "json" in cfg.output.formats:
        _write_json(out / "compare.json", result)
    if "csv" in cfg.output.formats:
        with open(out / "compare.csv", "w") as fh:
            fh.write("controller,seed,peak_abs_freq,peak_abs_input\n")
            for r in rows:
                fh.write(f"{r['controller']},{r['seed']},{r['peak_abs_freq']!r},{r['peak_abs_input']!r}\n")
    for r in rows:
        print(f"{r['controller']:>22}  seed {r['seed']:>3}  peak|dw| {r['peak_abs_freq']:.6g}  "
              f"peak|u| {r['peak_abs_input']:.6g}")
    return result


def cmd_probe(cfg: RunConfig, out: Path, design_path: Path) -> dict:
    m = cfg.plant.model()
    d, _ = _load_design(design_path)
    s = cfg.simulation
    first = s.seeds[0] if s.seeds else 0
    report = {"slack": 10 * s.dt_s, "controllers": {}}
    t0 = time.perf_counter()
    for name, ctrl in _controllers(cfg, d):
        level, worst, per_seed = sim.probe_reachable(m, ctrl, s.probe_seeds, s.horizon_s, s.dt_s,
                                                     dwell_s=s.dwell_s, first_seed=first)
        report["controllers"][name] = {"max_level": level, "worst_seed": worst,
                                       "per_seed": {str(k): v for k, v in per_seed.items()},
                                       "within_slack": level <= 1 + 10 * s.dt_s}
    report["runtime_s"] = time.perf_counter() - t0
    if m.n == 2:
        report["ellipse"] = [[float(a), float(b)] for a, b in sim.ellipse_polyline(d.certificate.Q.entries)]
    if "json" in cfg.output.formats:
        _write_json(out / "probe.json", report)
    for name, r in report["controllers"].items():
        print(f"{name:>16}  max level {r['max_level']:.6g}  (worst seed {r['worst_seed']})")
    return report


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linfsat", description="Star-norm optimal saturating controller synthesis.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration (defaults used when omitted)")
    common.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    common.add_argument("--verbose", action="store_true", help="log solver progress")
    common.add_argument("--seed-override", type=int, metavar="N", help="replace configured seeds with N")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synthesize", parents=[common], help="design the controller (and observer)")
    for name, text in (("simulate", "simulate a stored design"), ("probe", "probe the reachable set")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("--design", type=Path, help="design JSON (default: <out>/design.json)")
    sub.add_parser("compare", parents=[common], help="peak table against the configured baselines")
    return p


def _apply_seed_override(cfg: RunConfig, seed: int | None) -> RunConfig:
    if seed is None:
        return cfg
    return cfg.model_copy(update={"simulation": cfg.simulation.model_copy(update={"seeds": [seed]})})


def _error(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO if args.verbose else getattr(logging, os.environ.get(LOG_ENV, "WARNING").upper(),
                                                       logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _apply_seed_override(cfg, args.seed_override)
        cfg.plant.model()
    except OSError as exc:
        return _error(EXIT_RUNTIME, "io_error", str(exc))
    except (json.JSONDecodeError, ValidationError, InvalidParams, BadInput) as exc:
        return _error(EXIT_PARSE, "parse_error", str(exc))

    out = args.out or Path(cfg.output.directory)
    options = SolverOptions(verbose=args.verbose)
    try:
        out.mkdir(parents=True, exist_ok=True)
        design = getattr(args, "design", None) or out / "design.json"
        if args.command == "synthesize":
            cmd_synthesize(cfg, out, options)
        elif args.command == "simulate":
            cmd_simulate(cfg, out, design)
        elif args.command == "compare":
            cmd_compare(cfg, out, options)
        else:
            cmd_probe(cfg, out, design)
    except CliError as exc:
        return _error(exc.code, exc.kind, str(exc))
    except Infeasible as exc:
        return _error(EXIT_INFEASIBLE, "infeasible", str(exc))
    except OSError as exc:
        return _error(EXIT_RUNTIME, "io_error", str(exc))
    except LinfsatError as exc:
        return _error(EXIT_RUNTIME, type(exc).__name__, str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
