"""Command-line front end.

Every command computes its full result in memory before writing anything,
so a failing run leaves no partial output. Exit codes: 0 success, 1 input
error, 2 Oracle enumeration too large, 3 internal invariant violation.
Set ``ECOSHIFT_LOG`` (e.g. ``DEBUG``) for log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import completion, harness
from .allocator import dp_allocate
from .errors import EcoShiftError, InvalidParamsError, InvariantViolation, TooLargeError
from .options import build_option_table
from .oracle import DEFAULT_LIMIT, brute_force_allocate
from .policies import demand_from_draw, demand_proportional_allocate, fair_share_allocate
from .surface import CapGrid, CapPair, dumps_apps, load_apps
from .synthetic import SyntheticSurfaceParams, random_params, synthetic_app

log = logging.getLogger("ecoshift")

EXIT_OK, EXIT_INPUT, EXIT_TOO_LARGE, EXIT_INTERNAL = 0, 1, 2, 3


def _clean(value):
    """JSON-safe copy: NaN becomes null, numpy scalars become Python numbers."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _json(doc) -> str:
    return json.dumps(_clean(doc), indent=1, sort_keys=True, allow_nan=False) + "\n"


def _cell(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(v) if isinstance(v, float) else v


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    return buf.getvalue()


def _write_all(files: dict[Path, str]) -> None:
    for path, text in files.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _grid_from_args(args) -> CapGrid:
    return CapGrid.regular(tuple(args.cpu_range), tuple(args.gpu_range), args.grid_step)


# ---------------------------------------------------------------- commands

def cmd_allocate(args) -> dict[Path, str]:
    apps = load_apps(args.surfaces)
    budget = args.budget
    if budget < 0:
        raise InvalidParamsError("--budget must be non-negative")
    if args.policy == "ecoshift":
        result = dp_allocate([build_option_table(a, budget) for a in apps], budget)
    elif args.policy == "oracle":
        result = brute_force_allocate([build_option_table(a, budget) for a in apps], budget, limit=args.oracle_limit)
    elif args.policy == "fair-share":
        result = fair_share_allocate(apps, budget)
    else:
        shared = apps[0].grid if all(a.grid == apps[0].grid for a in apps) else None
        result = demand_proportional_allocate(apps, [demand_from_draw(a) for a in apps], budget, shared)
    doc = result.to_dict()
    doc["avg_improvement_pct"] = 100 * result.avg_improvement
    return {Path(args.out): _json(doc)}


def cmd_compare(args) -> dict[Path, str]:
    scenario = harness.load_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.repeats is not None:
        overrides["repeats"] = args.repeats
    if args.budget is not None:
        overrides["budget_w"] = args.budget
    if overrides:
        scenario = dataclasses.replace(scenario, **overrides)
    report = harness.run_comparison(scenario, jobs=args.jobs)
    out = Path(args.out)
    summary = report.summary_rows()
    return {
        out / "summary.csv": _csv(summary),
        out / "allocations.csv": _csv(report.allocation_rows()),
        out / "report.json": _json({"scenario_id": report.scenario_id, "summary": summary}),
    }


def _gap_config(args) -> tuple[harness.GapStudyConfig, dict | None]:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidParamsError(f"{args.config}: not valid JSON ({exc})") from None
    known = {"n_scenarios", "apps_per_scenario", "cap_settings", "budget_levels", "grid", "grid_step",
             "cpu_range", "gpu_range", "baselines", "budgets", "surface_noise_sd", "oracle_limit", "seed",
             "predictor"}
    unknown = set(doc) - known
    if unknown:
        raise InvalidParamsError(f"unknown gap-study config keys: {', '.join(sorted(unknown))}")
    if "grid" in doc:
        grid = CapGrid.from_dict(doc["grid"])
    else:
        step = args.grid_step or doc.get("grid_step", 50)
        grid = CapGrid.regular(tuple(doc.get("cpu_range", (100, 500))), tuple(doc.get("gpu_range", (100, 500))), step)
    cfg = harness.GapStudyConfig(
        n_scenarios=int(doc.get("n_scenarios", 5)),
        apps_per_scenario=int(doc.get("apps_per_scenario", 10)),
        cap_settings=int(doc.get("cap_settings", 5)),
        budget_levels=int(doc.get("budget_levels", 4)),
        grid=grid,
        baselines=tuple(CapPair(*b) for b in doc["baselines"]) if "baselines" in doc else None,
        budgets=tuple(int(b) for b in doc["budgets"]) if "budgets" in doc else None,
        surface_noise_sd=float(doc.get("surface_noise_sd", 0.0)),
        oracle_limit=int(doc.get("oracle_limit", 10**10)),
        seed=args.seed if args.seed is not None else int(doc.get("seed", 0)),
    )
    for b in cfg.resolved_baselines():
        if b not in grid:
            raise InvalidParamsError(f"baseline {b} is not on the gap-study grid")
    predictor = doc.get("predictor")
    if predictor is not None and args.latent_dim is not None:
        predictor = dict(predictor, latent_dim=args.latent_dim)
    return cfg, predictor


def cmd_gap_study(args) -> dict[Path, str]:
    cfg, pspec = _gap_config(args)
    predictor = None
    if pspec is not None:
        predictor = harness.train_predictor(
            cfg.grid,
            n_apps=int(pspec.get("train_apps", 40)),
            latent_dim=int(pspec.get("latent_dim", 8)),
            seed=cfg.seed,
            library_noise_sd=cfg.surface_noise_sd,
            sample_noise_sd=float(pspec.get("sample_noise_sd", 0.0)),
        )
    result = harness.gap_study(cfg, predictor, jobs=args.jobs)
    out = Path(args.out)
    return {
        out / "gaps.csv": _csv(list(result.records)),
        out / "cdf.csv": _csv([{"gap_pp": g, "cumulative_fraction": f} for g, f in result.cdf()]),
        out / "summary.json": _json(result.summary()),
    }


def cmd_fit_predictor(args) -> dict[Path, str]:
    apps = load_apps(args.surfaces)
    model = completion.fit([a.surface for a in apps], latent_dim=args.latent_dim or 8, seed=args.seed or 0)
    return {Path(args.out): json.dumps(completion.model_to_dict(model), sort_keys=True) + "\n"}


def cmd_eval_predictor(args) -> dict[Path, str]:
    model = completion.load_model(args.model)
    apps = load_apps(args.surfaces)
    predictor = harness.CompletionPredictor(model, args.sample_noise_sd)
    rng = np.random.default_rng([args.seed or 0, 5])
    rows = []
    for app in apps:
        predicted = predictor.predict(app, rng)
        rows.append({"app_id": app.id,
                     "accuracy": completion.prediction_accuracy(app.surface, predicted.surface, app.baseline)})
    rows.append({"app_id": "__mean__", "accuracy": float(np.mean([r["accuracy"] for r in rows]))})
    return {Path(args.out): _csv(rows)}


def cmd_generate(args) -> dict[Path, str]:
    grid = _grid_from_args(args)
    seed = args.seed or 0
    if args.params:
        try:
            params = SyntheticSurfaceParams.from_dict(json.loads(Path(args.params).read_text()))
        except json.JSONDecodeError as exc:
            raise InvalidParamsError(f"{args.params}: not valid JSON ({exc})") from None
    elif args.sensitivity_class is None:
        raise InvalidParamsError("generate needs --class or --params")
    else:
        params = random_params(args.sensitivity_class, grid, np.random.default_rng([seed, 11]), args.noise_sd)
        if args.sensitivity_class == "insensitive":
            params = dataclasses.replace(params, cpu_max_speedup=0.0, gpu_max_speedup=0.0)
    baseline = CapPair(*args.baseline) if args.baseline else CapPair(grid.cpu_levels[0], grid.gpu_levels[0])
    app = synthetic_app(args.id, params, baseline, grid, seed=[seed, 13])
    return {Path(args.out): dumps_apps([app])}


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; exit status 2 is reserved for TooLarge
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ecoshift", description="Reclaimed-power distribution for CPU-GPU applications.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("allocate", help="allocate a budget across surfaces with one policy")
    a.add_argument("--surfaces", required=True, help="surface file or directory of surface files")
    a.add_argument("--budget", type=int, required=True, help="reclaimed power budget in watts")
    a.add_argument("--policy", choices=("ecoshift", "fair-share", "demand-proportional", "oracle"), default="ecoshift")
    a.add_argument("--oracle-limit", type=int, default=DEFAULT_LIMIT)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_allocate)

    c = sub.add_parser("compare", help="run every policy on a scenario file")
    c.add_argument("--scenario", required=True)
    c.add_argument("--budget", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--repeats", type=int)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--out", required=True, help="output directory")
    c.set_defaults(func=cmd_compare)

    g = sub.add_parser("gap-study", help="DP-versus-Oracle gap distribution")
    g.add_argument("--config", help="JSON gap-study configuration")
    g.add_argument("--seed", type=int)
    g.add_argument("--grid-step", type=int)
    g.add_argument("--latent-dim", type=int)
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gap_study)

    f = sub.add_parser("fit-predictor", help="fit a completion model on training surfaces")
    f.add_argument("--surfaces", required=True)
    f.add_argument("--latent-dim", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--out", required=True, help="model checkpoint path")
    f.set_defaults(func=cmd_fit_predictor)

    e = sub.add_parser("eval-predictor", help="prediction accuracy of a checkpoint on full surfaces")
    e.add_argument("--model", required=True)
    e.add_argument("--surfaces", required=True)
    e.add_argument("--sample-noise-sd", type=float, default=0.0)
    e.add_argument("--seed", type=int)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval_predictor)

    s = sub.add_parser("generate", help="write a synthetic surface file")
    s.add_argument("--id", default="synthetic")
    s.add_argument("--class", dest="sensitivity_class", choices=("cpu", "gpu", "both", "insensitive"))
    s.add_argument("--params", help="JSON file with synthetic surface parameters")
    s.add_argument("--baseline", type=int, nargs=2, metavar=("CPU_W", "GPU_W"))
    s.add_argument("--grid-step", type=int, default=50)
    s.add_argument("--cpu-range", type=int, nargs=2, default=(100, 500), metavar=("LO", "HI"))
    s.add_argument("--gpu-range", type=int, nargs=2, default=(100, 500), metavar=("LO", "HI"))
    s.add_argument("--noise-sd", type=float, default=0.0)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("ECOSHIFT_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        files = args.func(args)
    except TooLargeError as exc:
        print(f"ecoshift: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except InvariantViolation as exc:
        print(f"ecoshift: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (EcoShiftError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"ecoshift: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        _write_all(files)
    except OSError as exc:
        print(f"ecoshift: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INPUT
    log.info("wrote %d file(s)", len(files))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
