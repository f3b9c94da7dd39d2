"""Batch front-end: one JSON config in, CSV/JSON artifacts out.

Usage: ``penlsq <command> --config PATH [--out DIR] [--seed N]`` with
commands ``solve``, ``verify-geometry``, ``constants``, ``simulate`` and
``report``. ``--seed`` overrides every seed the config would supply;
``--out`` overrides the config's output directory.

The config is a single JSON object. Common sections:

* ``"problem"``: either the inline form of :func:`penlsq.model.problem_from_dict`
  (``n, p, X, f, sigma`` plus optional ``seed, y``) or
  ``{"generator": {"n", "p", "sparsity", ...}, "sigma": ...}`` for a
  synthetic design with i.i.d. standard Gaussian entries, columns rescaled
  so ``(1/n)|x_j|_2^2 = 1`` exactly, and a planted sign-random beta*.
* ``"penalty"``: the form of :func:`penlsq.penalties.penalty_from_dict`;
  ``"lambda": "auto"`` (or ``"A"/"mu": "auto"`` for the sorted-l1 kind)
  resolves to the minimal recommended tuning for the problem.
* ``"solver"`` / ``"mc"``: keyword overrides for SolverConfig and
  MonteCarloConfig.

Exit codes: 0 every check passed, 1 a check failed, 2 config or runtime
error (the message names the offending field). Every run writes a
``manifest.json`` with the config hash (sha256 of the canonicalized JSON),
library version, seeds used, and wall time; CSV artifacts are
byte-deterministic given the same config (17 significant digits, '.'
decimal separator, UTF-8, header row).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .concentration import (
    NONCONVERGENCE_THRESHOLD,
    MonteCarloConfig,
    concentration_check,
    event_probability_check,
    oracle_coverage_check,
    simulate_prediction_errors,
)
from .constants import ConeSpec, re_type_constant, recommended_tuning
from .geometry import contraction_check, projection_identity_check
from .model import Problem, as_design, problem_from_dict, sample_observation
from .penalties import (
    GroupPartition,
    Penalty,
    PolyhedralCone,
    SlopeWeights,
    penalty_from_dict,
    slope_weights,
)
from .solvers import SolverConfig, result_to_dict, solve, stationarity_certificate

__all__ = ["ConfigError", "main", "run", "emit_report"]

COMMANDS = ("solve", "verify-geometry", "constants", "simulate", "report")


class ConfigError(Exception):
    """Invalid or inconsistent config; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def _get(doc: dict, field: str, ctx: str = "", required: bool = True, default=None):
    name = f"{ctx}.{field}" if ctx else field
    if field not in doc:
        if required:
            raise ConfigError(name, "missing required field")
        return default
    return doc[field]


def _as_number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"must be a number, got {value!r}")
    return float(value)


# -- config -> domain objects -------------------------------------------------


def load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError("config", f"file not found: {path}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return doc


def config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _generate_problem(gen: dict, sigma: float) -> tuple[Problem, dict]:
    ctx = "problem.generator"
    n = int(_as_number(_get(gen, "n", ctx), f"{ctx}.n"))
    p = int(_as_number(_get(gen, "p", ctx), f"{ctx}.p"))
    if n < 1 or p < 1:
        raise ConfigError(ctx, f"n and p must be positive, got n={n}, p={p}")
    amplitude = _as_number(gen.get("amplitude", 1.0), f"{ctx}.amplitude")
    design_seed = int(gen.get("design_seed", 0))
    beta_seed = int(gen.get("beta_seed", 1))
    rng = np.random.default_rng(design_seed)
    X = rng.standard_normal((n, p))
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0.0):
        raise ConfigError(ctx, "degenerate draw produced a zero column; change design_seed")
    X *= np.sqrt(n) / norms
    if "support" in gen:
        support = sorted(int(j) for j in gen["support"])
        if support and (support[0] < 0 or support[-1] >= p):
            raise ConfigError(f"{ctx}.support", f"indices must lie in 0..{p - 1}")
        if len(set(support)) != len(support):
            raise ConfigError(f"{ctx}.support", "indices must be distinct")
    else:
        s = int(_as_number(_get(gen, "sparsity", ctx), f"{ctx}.sparsity"))
        if not 0 <= s <= p:
            raise ConfigError(f"{ctx}.sparsity", f"must be in 0..{p}, got {s}")
        support = sorted(
            np.random.default_rng(beta_seed).choice(p, size=s, replace=False).tolist()
        )
    beta = np.zeros(p)
    if support:
        signs = np.random.default_rng((beta_seed, 1)).choice([-1.0, 1.0], size=len(support))
        beta[support] = amplitude * signs
    problem = Problem(design=as_design(X), mean=X @ beta, sigma=sigma)
    meta = {
        "support": support,
        "beta_star": beta.tolist(),
        "design_seed": design_seed,
        "beta_seed": beta_seed,
    }
    return problem, meta


def build_problem(cfg: dict) -> tuple[Problem, object, dict]:
    pdoc = _get(cfg, "problem")
    if not isinstance(pdoc, dict):
        raise ConfigError("problem", "must be a JSON object")
    if "generator" in pdoc:
        sigma = _as_number(_get(pdoc, "sigma", "problem"), "problem.sigma")
        problem, meta = _generate_problem(pdoc["generator"], sigma)
        return problem, None, meta
    try:
        problem, obs = problem_from_dict(pdoc)
    except ValueError as exc:
        raise ConfigError("problem", str(exc))
    return problem, obs, {}


def build_penalty(cfg: dict, problem: Problem) -> Penalty:
    pdoc = _get(cfg, "penalty")
    if not isinstance(pdoc, dict) or "kind" not in pdoc:
        raise ConfigError("penalty", "must be an object with a 'kind' field")
    pdoc = dict(pdoc)
    kind = pdoc["kind"]
    n, p = problem.n, problem.p
    if kind == "cone" and "extremal_points" not in pdoc and "partition" in pdoc:
        partition = GroupPartition(tuple(map(tuple, pdoc["partition"])))
        cone = PolyhedralCone.from_partition(partition)
        pdoc["extremal_points"] = cone.extremal_points.tolist()
    if kind == "slope":
        if pdoc.get("A") == "auto":
            pdoc["A"] = recommended_tuning("slope")
        if pdoc.get("mu") == "auto":
            pdoc["mu"] = slope_weights(p, n, problem.sigma).mu.tolist()
    elif pdoc.get("lambda") == "auto":
        pdoc["lambda"] = 1.0  # placeholder; replaced from the built structure
        probe = _build_penalty_doc(pdoc)
        if kind == "l1":
            lam = recommended_tuning("l1", sigma=problem.sigma, n=n, p=p)
        elif kind == "group":
            lam = recommended_tuning("group", X=problem.design, sigma=problem.sigma,
                                     partition=probe.partition)
        elif kind == "cone":
            lam = recommended_tuning("cone", sigma=problem.sigma, n=n, cone=probe.cone)
        else:
            raise ConfigError("penalty.kind", f"unknown kind '{kind}'")
        pdoc["lambda"] = lam
    pen = _build_penalty_doc(pdoc)
    if pen.p is not None and pen.p != p:
        raise ConfigError("penalty", f"penalty expects p={pen.p}, problem has p={p}")
    return pen


def _build_penalty_doc(pdoc: dict) -> Penalty:
    try:
        return penalty_from_dict(pdoc)
    except (ValueError, TypeError) as exc:
        raise ConfigError("penalty", str(exc))


def build_solver_config(cfg: dict) -> SolverConfig | None:
    sdoc = cfg.get("solver")
    if sdoc is None:
        return None
    if not isinstance(sdoc, dict):
        raise ConfigError("solver", "must be a JSON object")
    allowed = {"max_iters", "gap_tol"}
    unknown = set(sdoc) - allowed
    if unknown:
        raise ConfigError(f"solver.{sorted(unknown)[0]}", "unknown field")
    try:
        return SolverConfig(**sdoc)
    except ValueError as exc:
        raise ConfigError("solver", str(exc))


def build_mc_config(cfg: dict, seed_override: int | None) -> MonteCarloConfig:
    mdoc = cfg.get("mc", {})
    if not isinstance(mdoc, dict):
        raise ConfigError("mc", "must be a JSON object")
    allowed = {"replications", "base_seed", "t_grid", "delta_grid", "slack_sigmas"}
    unknown = set(mdoc) - allowed
    if unknown:
        raise ConfigError(f"mc.{sorted(unknown)[0]}", "unknown field")
    kwargs = dict(mdoc)
    for key in ("t_grid", "delta_grid"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    if seed_override is not None:
        kwargs["base_seed"] = seed_override
    try:
        return MonteCarloConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError("mc", str(exc))


def build_cone_spec(doc: dict, problem: Problem, pen: Penalty | None,
                    ctx: str) -> ConeSpec:
    """ConeSpec from JSON; group/cone structure falls back to the penalty's."""
    if not isinstance(doc, dict):
        raise ConfigError(ctx, "must be a JSON object")
    kind = _get(doc, "kind", ctx)
    c0 = _as_number(doc.get("c0", 3.0), f"{ctx}.c0")
    try:
        if kind == "re":
            return ConeSpec.re(_get(doc, "S", ctx), c0=c0)
        if kind == "group_re":
            if "partition" in doc:
                partition = GroupPartition(tuple(map(tuple, doc["partition"])))
            elif pen is not None and pen.kind == "group":
                partition = pen.partition
            else:
                raise ConfigError(f"{ctx}.partition", "missing (no group penalty to inherit from)")
            return ConeSpec.group_re(partition, _get(doc, "S", ctx), c0=c0)
        if kind == "wre":
            mu = doc.get("mu", "auto")
            if mu == "auto":
                weights = slope_weights(problem.p, problem.n, problem.sigma)
            else:
                weights = SlopeWeights(np.asarray(mu, dtype=float))
            return ConeSpec.wre(int(_as_number(_get(doc, "s", ctx), f"{ctx}.s")),
                                weights, c0=c0)
        if kind == "cone_q":
            if "extremal_points" in doc:
                cone = PolyhedralCone(np.asarray(doc["extremal_points"], dtype=float))
            elif pen is not None and pen.kind == "cone":
                cone = pen.cone
            else:
                raise ConfigError(f"{ctx}.extremal_points",
                                  "missing (no cone penalty to inherit from)")
            return ConeSpec.cone_q(cone, _get(doc, "S", ctx), c0=c0)
    except ValueError as exc:
        raise ConfigError(ctx, str(exc))
    raise ConfigError(f"{ctx}.kind", f"unknown kind '{kind}'")


# -- artifact writing ---------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


_CSV_SCHEMAS = {
    "errors": (("rep", "seed", "error", "converged", "gap"), lambda r: r),
    "tails": (("t", "empirical", "bound", "slack", "pass"),
              lambda r: (r.t, r.empirical, r.bound, r.slack, r.passed)),
    "coverage": (("delta", "bound", "violations", "pass"),
                 lambda r: (r.delta, r.bound, r.violations, r.passed)),
    "events": (("event", "frequency", "pass"),
               lambda r: (r.event, r.frequency, r.passed)),
    "constants": (("kind", "S", "c0", "value", "status", "starts"),
                  lambda e: (e.spec.kind, e.spec.support_label(), e.spec.c0,
                             e.value, e.status, e.starts)),
}


def emit_report(out_dir, reports: dict) -> list[Path]:
    """Write artifacts deterministically; returns the paths written.

    Keys with a CSV schema (errors, tails, coverage, events, constants)
    become ``<key>.csv`` with a header row even when empty; every other key
    becomes ``<key>.json`` (sorted keys, 2-space indent).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for key, payload in reports.items():
        if key in _CSV_SCHEMAS:
            header, to_row = _CSV_SCHEMAS[key]
            lines = [",".join(header)]
            lines.extend(",".join(_fmt(v) for v in to_row(row)) for row in payload)
            path = out / f"{key}.csv"
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        else:
            path = out / f"{key}.json"
            path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                            encoding="utf-8")
        written.append(path)
    return written


# -- commands -----------------------------------------------------------------


def _cmd_solve(cfg: dict, seed_override: int | None):
    problem, obs, _ = build_problem(cfg)
    pen = build_penalty(cfg, problem)
    solver_cfg = build_solver_config(cfg)
    seeds = {}
    if obs is None:
        seed = seed_override if seed_override is not None else int(cfg.get("observation_seed", 0))
        obs = sample_observation(problem, seed)
        seeds["observation_seed"] = seed
    res = solve(obs.y, problem.design, pen, solver_cfg)
    cert = stationarity_certificate(res, obs.y, problem.design, pen,
                                    tol=float(cfg.get("certificate_tol", 1e-6)))
    doc = result_to_dict(res)
    doc["certificate"] = {
        "dual_feasibility": cert.dual_feasibility,
        "alignment_gap": cert.alignment_gap,
        "pass": cert.passed,
    }
    return res.converged and cert.passed, {"solution": doc}, seeds


def _cmd_verify_geometry(cfg: dict, seed_override: int | None):
    problem, obs, _ = build_problem(cfg)
    pen = build_penalty(cfg, problem)
    tol = float(cfg.get("tol", 1e-6))
    dykstra_tol = float(cfg.get("dykstra_tol", 1e-8))
    base = seed_override if seed_override is not None else int(cfg.get("observation_seed", 0))
    seeds = {"observation_seed": base}
    if obs is None:
        obs = sample_observation(problem, base)
    reports = [projection_identity_check(
        problem, obs, pen, tol=tol, dykstra_tol=dykstra_tol,
        n_samples=int(cfg.get("n_samples", 1000)), sample_seed=base)]
    n_pairs = int(cfg.get("n_pairs", 50))
    if n_pairs > 0:
        pair_seed = int(cfg.get("pair_seed", base + 1))
        seeds["pair_seed"] = pair_seed
        rng = np.random.default_rng(pair_seed)
        draw = lambda: problem.mean + problem.sigma * rng.standard_normal(problem.n)
        pairs = [(draw(), draw()) for _ in range(n_pairs)]
        reports.extend(contraction_check(problem.design, pen, pairs,
                                         tol=tol, dykstra_tol=dykstra_tol))
    passed = all(r.passed for r in reports)
    return passed, {"geometry": [r.to_dict() for r in reports]}, seeds


def _cmd_constants(cfg: dict, seed_override: int | None):
    problem, _, _ = build_problem(cfg)
    pen = build_penalty(cfg, problem) if "penalty" in cfg else None
    specs_doc = _get(cfg, "constants")
    if not isinstance(specs_doc, list) or not specs_doc:
        raise ConfigError("constants", "must be a nonempty list of cone specs")
    budget = int(cfg.get("budget", 256))
    start_seed = seed_override if seed_override is not None else int(cfg.get("start_seed", 0))
    estimates = []
    for i, doc in enumerate(specs_doc):
        spec = build_cone_spec(doc, problem, pen, ctx=f"constants[{i}]")
        estimates.append(re_type_constant(problem.design, spec, budget=budget,
                                          seed=start_seed))
    passed = all(e.value > 0 for e in estimates)
    return passed, {"constants": estimates}, {"start_seed": start_seed}


def _cmd_simulate(cfg: dict, seed_override: int | None):
    problem, _, meta = build_problem(cfg)
    pen = build_penalty(cfg, problem)
    solver_cfg = build_solver_config(cfg)
    mc = build_mc_config(cfg, seed_override)
    artifacts: dict = {}
    all_pass = True

    sim = simulate_prediction_errors(problem, pen, solver_cfg, mc)
    artifacts["errors"] = [
        (i, int(sim.seeds[i]), float(sim.errors[i]), bool(sim.converged[i]),
         float(sim.gaps[i]))
        for i in range(sim.n)
    ]
    if sim.nonconvergence_fraction > NONCONVERGENCE_THRESHOLD:
        all_pass = False

    if bool(cfg.get("tails", True)):
        tail_rows = concentration_check(sim.converged_errors(), problem.sigma,
                                        problem.n, mc)
        artifacts["tails"] = tail_rows
        all_pass = all_pass and all(r.passed for r in tail_rows)

    cov_doc = cfg.get("coverage")
    if cov_doc is not None:
        if not isinstance(cov_doc, dict):
            raise ConfigError("coverage", "must be a JSON object")
        support = cov_doc.get("support", meta.get("support"))
        if not support:
            raise ConfigError("coverage.support",
                              "missing (and no generator-planted support to inherit)")
        re_doc = _get(cov_doc, "re", "coverage")
        if isinstance(re_doc, (int, float)) and not isinstance(re_doc, bool):
            re_est = float(re_doc)
        elif isinstance(re_doc, dict) and "value" in re_doc:
            re_est = _as_number(re_doc["value"], "coverage.re.value")
        else:
            spec = build_cone_spec(re_doc, problem, pen, ctx="coverage.re")
            re_est = re_type_constant(problem.design, spec,
                                      budget=int(cov_doc.get("budget", 256)))
        support_arg = (pen.partition, support) if pen.kind == "group" else support
        outcome = oracle_coverage_check(problem, pen, support_arg, pen.scale,
                                        re_est, mc, solver_cfg, result=sim)
        artifacts["coverage"] = outcome.rows
        all_pass = all_pass and outcome.passed

    if bool(cfg.get("events", False)):
        event_rows = event_probability_check(problem, pen, mc)
        artifacts["events"] = event_rows
        all_pass = all_pass and all(r.passed for r in event_rows)

    return all_pass, artifacts, {"base_seed": mc.base_seed}


def _collect_pass_flags(node) -> list[bool]:
    flags: list[bool] = []
    if isinstance(node, dict):
        for key, value in node.items():
            if key == "pass" and isinstance(value, bool):
                flags.append(value)
            else:
                flags.extend(_collect_pass_flags(value))
    elif isinstance(node, list):
        for value in node:
            flags.extend(_collect_pass_flags(value))
    return flags


def _cmd_report(cfg: dict, seed_override: int | None):
    runs = _get(cfg, "runs")
    if not isinstance(runs, list) or not runs:
        raise ConfigError("runs", "must be a nonempty list of run directories")
    entries = []
    all_pass = True
    for run_dir in runs:
        d = Path(run_dir)
        manifest_path = d / "manifest.json"
        if not manifest_path.exists():
            raise ConfigError("runs", f"no manifest.json in {run_dir}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        entry = {
            "dir": str(run_dir),
            "command": manifest.get("command"),
            "config_sha256": manifest.get("config_sha256"),
            "artifacts": {},
        }
        for csv_path in sorted(d.glob("*.csv")):
            lines = csv_path.read_text(encoding="utf-8").splitlines()
            header = lines[0].split(",") if lines else []
            info = {"rows": max(len(lines) - 1, 0)}
            if "pass" in header:
                col = header.index("pass")
                failed = sum(1 for line in lines[1:]
                             if line.split(",")[col] == "false")
                info["failed"] = failed
                all_pass = all_pass and failed == 0
            entry["artifacts"][csv_path.name] = info
        for json_path in sorted(d.glob("*.json")):
            if json_path.name in ("manifest.json", "summary.json"):
                continue
            flags = _collect_pass_flags(json.loads(json_path.read_text(encoding="utf-8")))
            info = {"checks": len(flags), "failed": sum(1 for f in flags if not f)}
            all_pass = all_pass and info["failed"] == 0
            entry["artifacts"][json_path.name] = info
        entries.append(entry)
    summary = {"version": __version__, "all_pass": all_pass, "runs": entries}
    return all_pass, {"summary": summary}, {}


_HANDLERS = {
    "solve": _cmd_solve,
    "verify-geometry": _cmd_verify_geometry,
    "constants": _cmd_constants,
    "simulate": _cmd_simulate,
    "report": _cmd_report,
}


def run(config_path, out_dir=None, seed_override: int | None = None,
        command: str | None = None) -> int:
    """Execute one config; returns the exit code (0 pass / 1 fail / 2 error)."""
    start = time.monotonic()
    try:
        cfg = load_config(config_path)
        cfg_command = cfg.get("command")
        if command is None:
            command = cfg_command
        if command is None:
            raise ConfigError("command", "missing (neither in config nor on command line)")
        if cfg_command is not None and cfg_command != command:
            raise ConfigError(
                "command", f"config says '{cfg_command}' but '{command}' was requested")
        if command not in COMMANDS:
            raise ConfigError("command", f"unknown command '{command}'")
        out = Path(out_dir) if out_dir is not None else Path(cfg.get("out", "."))
        passed, artifacts, seeds = _HANDLERS[command](cfg, seed_override)
        files = emit_report(out, artifacts)
        manifest = {
            "version": __version__,
            "command": command,
            "config_sha256": config_hash(cfg),
            "seed_override": seed_override,
            "seeds": seeds,
            "wall_time_seconds": time.monotonic() - start,
            "outputs": sorted(f.name for f in files),
        }
        (out / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return 0 if passed else 1
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="penlsq",
        description="Penalized least squares: solves, geometry certificates, "
                    "design constants, and Monte Carlo verification runs.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override every seed in the config")
    args = parser.parse_args(argv)
    return run(args.config, out_dir=args.out, seed_override=args.seed,
               command=args.command)


if __name__ == "__main__":
    sys.exit(main())
