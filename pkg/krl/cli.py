"""Config-driven runner: ``solve``, ``verify`` and ``sweep`` subcommands.

Exit status: 0 success, 2 configuration error, 3 solver failure,
4 verification failure.
"""
import argparse
import asyncio
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from .config import RunConfig, build_instance, load_config, sweep_target, with_override
from .errors import ConfigError, KRLError, NoConvergence, ResidualTooLarge
from .io import SWEEP_HEADER, write_csv, write_json, write_trace
from .logs import configure_logging, log_json, timed
from .metrics import export_metrics
from .operators import (check_homogeneity, check_monotonicity, check_nonlinearity, check_strong_positivity,
                        find_H_constant, h_constant_report, search_H_constant)
from .solver import continuation, minimality_check, simplicity_check, uniqueness_probe, verify_branch_bounds

EXIT_OK = 0
EXIT_VERIFY_FAILED = 4


def _fail(e: KRLError, command: str) -> int:
    log_json("ERROR", f"{command} failed", component="cli", **e.to_log(exit_code=e.exit_code))
    print(f"error: {e.message}", file=sys.stderr)
    return e.exit_code


def _finish(cfg: RunConfig):
    path = cfg.output_path("metrics")
    if path is not None:
        export_metrics(str(path))


def _write_partial_trace(cfg: RunConfig, e: KRLError):
    trace = getattr(e, "trace", None)
    if trace is not None and len(trace):
        write_trace(cfg.output_path("trace"), trace)


def run_solve(config_path) -> int:
    try:
        cfg = load_config(config_path)
        T = build_instance(cfg)
    except KRLError as e:
        return _fail(e, "solve")
    try:
        with timed("solve", component="cli", operator=T.label):
            u, _ = search_H_constant(T)
            pair, trace = continuation(T, u, cfg.solver.continuation_config())
    except KRLError as e:
        if isinstance(e, (NoConvergence, ResidualTooLarge)):
            _write_partial_trace(cfg, e)
        _finish(cfg)
        return _fail(e, "solve")
    write_trace(cfg.output_path("trace"), trace)
    write_json(cfg.output_path("eigenpair"), pair.to_json_dict())
    _finish(cfg)
    print(f"{T.label}: lambda0={pair.lambda0:.12g} residual={pair.residual:.3e} "
          f"pde_eigenvalue={pair.pde_eigenvalue:.12g}")
    return EXIT_OK


def _is_nonlinear(cfg: RunConfig) -> bool:
    # Pucci inverses are linear on K (nonnegative data gives concave solutions)
    op = cfg.operator
    return op.kind in ("plaplace", "hardy_sobolev") and op.p != 2.0


def verification_reports(cfg: RunConfig, T) -> list:
    v = cfg.verify
    reports = [
        check_homogeneity(T, samples=v.samples, seed=v.seed),
        check_monotonicity(T, samples=v.pairs, seed=v.seed),
    ]
    try:
        u, H = search_H_constant(T)
        reports.append(h_constant_report(T, u))
    except KRLError:
        u = T.default_u()
        reports.append(h_constant_report(T, u))
        return reports
    positivity = check_strong_positivity(T, samples=v.samples, seed=v.seed)
    reports.append(positivity)
    if _is_nonlinear(cfg):
        reports.append(check_nonlinearity(T, samples=v.samples, seed=v.seed))
    solver_cfg = cfg.solver.continuation_config()
    pair, trace = continuation(T, u, solver_cfg)
    reports.append(verify_branch_bounds(T, u, find_H_constant(T, u), trace, depth=v.branch_depth))
    if positivity.passed:
        reports.append(uniqueness_probe(T, solver_cfg, k=v.uniqueness_starts, seed=v.seed))
    if cfg.operator.kind == "matrix":
        # lambda_eps carries an O(eps_min) bias
        tol = max(1e-8, 10.0 * solver_cfg.eps_min)
        reports.append(minimality_check(T, pair.lambda0, pair.x, tol=tol))
        reports.append(simplicity_check(T, pair.lambda0, tol=tol))
    return reports


def run_verify(config_path) -> int:
    try:
        cfg = load_config(config_path)
        T = build_instance(cfg)
    except KRLError as e:
        return _fail(e, "verify")
    try:
        with timed("verify", component="cli", operator=T.label):
            reports = verification_reports(cfg, T)
    except KRLError as e:
        _finish(cfg)
        return _fail(e, "verify")
    write_json(cfg.output_path("report"), [r.to_json_dict() for r in reports])
    _finish(cfg)
    failed = [r.property for r in reports if not r.passed]
    if failed:
        log_json("ERROR", "verification failed", component="cli", failed=failed)
        print(f"failed properties: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    print(f"{T.label}: {len(reports)} checks passed")
    return EXIT_OK


def _solve_one(cfg: RunConfig, section: str, name: str, value: float) -> list:
    try:
        run_cfg = with_override(cfg, section, name, value)
        T = build_instance(run_cfg)
        u, _ = search_H_constant(T)
        pair, trace = continuation(T, u, run_cfg.solver.continuation_config())
    except KRLError as e:
        log_json("WARNING", "sweep value failed", component="cli", **e.to_log(value=value))
        return [repr(value), "", "", "", type(e).__name__]
    except ValueError as e:
        # pydantic validation of the overridden config
        log_json("WARNING", "sweep value rejected", component="cli", value=value, error=str(e))
        return [repr(value), "", "", "", "ConfigError"]
    return [repr(value), repr(pair.lambda0), repr(pair.residual), trace.total_iterations, "ok"]


async def _sweep(cfg: RunConfig, section: str, name: str, values: List[float], workers: int) -> list:
    semaphore = asyncio.Semaphore(workers)

    async def run(value):
        async with semaphore:
            return await asyncio.to_thread(_solve_one, cfg, section, name, value)

    return await asyncio.gather(*(run(v) for v in values))


def parse_values(text: str) -> List[float]:
    items = [item.strip() for item in (text or "").split(",") if item.strip()]
    if not items:
        raise ConfigError("sweep needs at least one value")
    try:
        return [float(item) for item in items]
    except ValueError as e:
        raise ConfigError(f"sweep values must be numbers: {e}")


def _workers() -> int:
    raw = os.getenv("KRL_SWEEP_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"KRL_SWEEP_WORKERS must be an integer, got {raw!r}")


def run_sweep(config_path, key: str, values) -> int:
    try:
        cfg = load_config(config_path)
        values = parse_values(values) if isinstance(values, str) else [float(v) for v in values]
        if not values:
            raise ConfigError("sweep needs at least one value")
        section, name = sweep_target(cfg, key)
        workers = _workers()
    except KRLError as e:
        return _fail(e, "sweep")
    with timed("sweep", component="cli", key=f"{section}.{name}", values=len(values)):
        rows = asyncio.run(_sweep(cfg, section, name, values, workers))
    write_csv(cfg.output_path("sweep"), SWEEP_HEADER, rows)
    _finish(cfg)
    ok = sum(1 for row in rows if row[-1] == "ok")
    print(f"sweep {section}.{name}: {ok}/{len(rows)} values succeeded")
    return EXIT_OK if ok else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="krl", description="Principal eigenpairs of monotone homogeneous operators")
    parser.add_argument("--log-level", default=None, help="overrides KRL_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", help="run continuation and write trace + eigenpair").add_argument("config")
    sub.add_parser("verify", help="run the property suite and write a report").add_argument("config")
    sweep = sub.add_parser("sweep", help="one continuation per value of a scalar config field")
    sweep.add_argument("config")
    sweep.add_argument("--key", required=True)
    sweep.add_argument("--values", required=True, help="comma separated, e.g. 1.5,2,3")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    if args.command == "solve":
        return run_solve(args.config)
    if args.command == "verify":
        return run_verify(args.config)
    return run_sweep(args.config, args.key, args.values)
