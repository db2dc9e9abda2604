"""Command line entry point: ``omplan plan-dpm | plan-rpm | evaluate | sweep | example``.

Every command reads one JSON run config (``--config``) and writes its
results into ``--out``. On failure the process exits nonzero and prints a
JSON error object on stderr (and into ``error.json`` when ``--out`` is set).
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
import time
from dataclasses import asdict, replace
from importlib import resources
from pathlib import Path

from . import __version__
from . import solver as S
from .core import ValidationError, investment_cost
from .dpm import PlanningError, solve_dpm
from .evaluate import SweepSpec, audit, dispatch, sweep, sweep_columns
from .io import RunConfig, emit_results, load_run_config, read_plan, write_table
from .rpm import ccg_solve

log = logging.getLogger("omplan")

EXAMPLE_FILES = ("run.json", "catalog.json", "forecasts.csv")
EXIT_INPUT, EXIT_SOLVE, EXIT_OTHER = 2, 3, 1


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="omplan", description="Offshore microgrid capacity planning.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", required=True, help="run config JSON")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--backend", help="solver backend (highs, glpk); default $OM_SOLVER or highs")
        sp.add_argument("--seed", type=int, help="solver seed (recorded; used where the backend supports it)")
        sp.add_argument("--time-limit", type=float, help="per-solve time limit in seconds")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("plan-dpm", help="deterministic plan for the nominal forecast")
    common(sp)
    for name, helptext in (("plan-rpm", "robust plan by column-and-constraint generation"),
                           ("evaluate", "audit a fixed plan (worst case, or a given realization)"),
                           ("sweep", "run a planning/audit job over a parameter grid")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--method", choices=("dual", "enum", "enumerate"),
                        help="worst-case oracle: dualized MILP or enumeration")
        sp.add_argument("--threads", type=int, help="worker processes for enumeration or sweep cells")
        if name in ("plan-rpm", "sweep"):
            sp.add_argument("--eps", type=float, help="relative gap that stops the iterations")
            sp.add_argument("--max-iter", type=int, help="iteration cap")
        if name == "evaluate":
            sp.add_argument("--plan", help="plan.json to audit (overrides the config)")
    sp = sub.add_parser("example", help="copy the bundled example inputs to a directory")
    sp.add_argument("--out", required=True)
    return p


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "backend", None):
        S.backend_name(args.backend)
        cfg.backend = args.backend
    opts = cfg.options
    if getattr(args, "seed", None) is not None:
        opts = replace(opts, seed=args.seed)
    if getattr(args, "time_limit", None) is not None:
        opts = replace(opts, time_limit=args.time_limit)
    cfg.options = opts
    if getattr(args, "method", None):
        cfg.method = args.method
    if getattr(args, "eps", None) is not None:
        cfg.eps = args.eps
    if getattr(args, "max_iter", None) is not None:
        cfg.max_iter = args.max_iter
    if getattr(args, "threads", None):
        cfg.workers = args.threads
    return cfg


def _manifest(command: str, cfg: RunConfig, wall: float) -> dict:
    return {
        "command": command,
        "package_version": __version__,
        "inputs": dict(sorted(cfg.inputs.items())),
        "config": cfg.echo,
        "solver": {"backend": S.backend_name(cfg.backend), "version": S.backend_version(cfg.backend),
                   "options": asdict(cfg.options)},
        "ccg": {"method": cfg.method, "eps": cfg.eps, "max_iter": cfg.max_iter, "workers": cfg.workers},
        "wall_time_s": wall,
    }


def _costs(status, cinv, cope, schedule, **extra) -> dict:
    out = {"status": status, "cost_inv": cinv, "cost_ope": cope, "cost_total": cinv + cope,
           "load_shed_mw": schedule.total_shed,
           "water_shortfall_t": float(schedule.water_shortfall.sum())}
    out.update(extra)
    return out


def cmd_plan_dpm(cfg: RunConfig, out: Path):
    inst = cfg.instance
    res = solve_dpm(inst, cfg.uconfig.delta_t, cfg.options, cfg.backend)
    emit_results(out, catalog=inst.catalog, plan=res.plan, schedule=res.schedule,
                 costs=_costs(res.outcome.status, res.cost_inv, res.cost_ope, res.schedule))
    return res.cost_inv + res.cost_ope


def cmd_plan_rpm(cfg: RunConfig, out: Path):
    inst = cfg.instance
    res = ccg_solve(inst, cfg.uconfig, eps=cfg.eps, max_iter=cfg.max_iter, method=cfg.method,
                    options=cfg.options, backend=cfg.backend, workers=cfg.workers)
    costs = _costs(res.status, res.cost_inv, res.cost_ope, res.schedule, iterations=res.state.iteration,
                   lower_bound=res.state.lb, upper_bound=res.state.ub, gap=res.state.gap)
    emit_results(out, catalog=inst.catalog, plan=res.plan, schedule=res.schedule, costs=costs,
                 trace=res.state.trace, realization=res.worst)
    return res.cost_total


def cmd_evaluate(cfg: RunConfig, out: Path, plan_path=None):
    inst = cfg.instance
    plan = read_plan(plan_path, inst.catalog) if plan_path else cfg.plan
    if plan is None:
        raise ValidationError("evaluate needs a plan: set 'plan' in the config or pass --plan")
    cinv = investment_cost(inst.catalog, plan, inst.grid, inst.econ)
    if cfg.realization is not None:
        sched = dispatch(inst, plan, cfg.realization, cfg.uconfig, cfg.options, cfg.backend)
        real, status = cfg.realization, "given_realization"
    else:
        wc = audit(inst, plan, cfg.uconfig, cfg.method, cfg.options, cfg.backend)
        sched, real, status = wc.schedule, wc.realization, "worst_case"
    emit_results(out, catalog=inst.catalog, plan=plan, schedule=sched,
                 costs=_costs(status, cinv, sched.cost_ope, sched), realization=real)
    return cinv + sched.cost_ope


def cmd_sweep(cfg: RunConfig, out: Path):
    raw = dict(cfg.sweep)
    axes = raw.pop("axes", None)
    if not axes:
        raise ValidationError("sweep: config needs a 'sweep' object with non-empty 'axes'")
    job = raw.pop("job", "rpm")
    if raw:
        raise ValidationError(f"sweep: unknown fields {sorted(raw)}")
    spec = SweepSpec(axes=axes, job=job, base=cfg.uconfig, plan=cfg.plan, method=cfg.method,
                     eps=cfg.eps, max_iter=cfg.max_iter)
    rows = sweep(cfg.instance, spec, cfg.options, cfg.backend, workers=cfg.workers)
    out.mkdir(parents=True, exist_ok=True)
    cols = [c for c in sweep_columns(rows, axes) if c != "wall_time"]
    write_table(rows, cols, out / "sweep.csv")
    failed = sum(r["status"] == "error" for r in rows)
    if failed:
        log.warning("%d of %d sweep cells failed", failed, len(rows))
    return len(rows)


def cmd_example(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    pkg = resources.files("omplan") / "data"
    for name in EXAMPLE_FILES:
        with resources.as_file(pkg / name) as src:
            shutil.copyfile(src, out / name)
    return str(out / "run.json")


def _fail(code: int, exc: BaseException, out: str | None) -> int:
    err = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ValidationError):
        err["details"] = exc.errors
    outcome = getattr(exc, "outcome", None)
    if outcome is not None:
        err["solver_status"] = outcome.status
    text = json.dumps(err, indent=2)
    print(text, file=sys.stderr)
    if out:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    if args.command == "example":
        print(cmd_example(out))
        return 0
    try:
        cfg = _apply_flags(load_run_config(args.config), args)
        t0 = time.perf_counter()
        if args.command == "plan-dpm":
            result = cmd_plan_dpm(cfg, out)
        elif args.command == "plan-rpm":
            result = cmd_plan_rpm(cfg, out)
        elif args.command == "evaluate":
            result = cmd_evaluate(cfg, out, args.plan)
        else:
            result = cmd_sweep(cfg, out)
        emit_results(out, catalog=cfg.instance.catalog,
                     manifest=_manifest(args.command, cfg, time.perf_counter() - t0))
    except (ValidationError, S.BackendUnavailable) as exc:
        return _fail(EXIT_INPUT, exc, args.out)
    except (PlanningError, S.SolverError) as exc:
        return _fail(EXIT_SOLVE, exc, args.out)
    except OSError as exc:
        return _fail(EXIT_OTHER, exc, args.out)
    print(json.dumps({"command": args.command, "out": str(out), "result": result}))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
