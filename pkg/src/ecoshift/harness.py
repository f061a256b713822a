"""Emulation harness: scenarios, policy comparisons, fairness and the Oracle gap study.

Decisions may be taken on predicted surfaces, but every reported improvement
is the ground-truth improvement at the assigned caps, as if each application
had been re-run under them.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .allocator import AllocationResult, dp_allocate
from .completion import CompletionModel, default_plan, fit, predict_surface, prediction_accuracy, sample_surface
from .errors import InvalidParamsError
from .options import build_option_table
from .oracle import brute_force_allocate, oracle_gap, true_avg_improvement
from .policies import demand_from_draw, demand_proportional_allocate, fair_share_allocate, no_distribution
from .surface import SENSITIVITY_CLASSES, Application, CapGrid, CapPair, load_apps, relative_improvement
from .synthetic import SyntheticSurfaceParams, random_params, synthetic_app

POLICIES = ("no-distribution", "fair-share", "demand-proportional", "ecoshift")


# ---------------------------------------------------------------- metrics

def jain_index(improvements: Sequence[float]) -> float:
    """Jain's fairness index; an all-zero vector counts as perfectly fair (1.0)."""
    x = np.asarray(improvements, dtype=float)
    if x.size == 0:
        raise InvalidParamsError("Jain's index needs at least one value")
    sq = float(np.sum(x * x))
    if sq == 0.0:
        return 1.0
    return float(np.sum(x)) ** 2 / (x.size * sq)


def confidence_interval(samples: Sequence[float], level: float = 0.98) -> tuple[float, float, float]:
    """Mean and Student-t interval; bounds are NaN for fewer than two samples."""
    x = np.asarray(samples, dtype=float)
    mean = float(x.mean())
    if x.size < 2:
        return mean, math.nan, math.nan
    half = float(stats.t.ppf(0.5 + level / 2, df=x.size - 1) * x.std(ddof=1) / math.sqrt(x.size))
    return mean, mean - half, mean + half


def true_improvements(result: AllocationResult, true_apps: Sequence[Application]) -> list[float]:
    by_id = {a.id: a for a in true_apps}
    return [relative_improvement(by_id[a.app_id], a.caps) for a in result.allocations]


# ---------------------------------------------------------------- predictors

@dataclass(frozen=True, eq=False)
class CompletionPredictor:
    """Probe the true surface at the default plan, then complete it with ``model``."""

    model: CompletionModel
    sample_noise_sd: float = 0.0

    def predict(self, app: Application, rng: np.random.Generator) -> Application:
        plan = default_plan(app.grid, app.baseline)
        samples = sample_surface(app.surface, plan, self.sample_noise_sd, rng)
        return app.with_surface(predict_surface(self.model, samples))


def training_library(grid: CapGrid, n_apps: int, seed: int = 0, noise_sd: float = 0.0) -> list[Application]:
    """Fully profiled synthetic applications, classes cycling through all four."""
    rng = np.random.default_rng([seed, 7919])
    apps = []
    for i in range(n_apps):
        cls = SENSITIVITY_CLASSES[i % len(SENSITIVITY_CLASSES)]
        params = random_params(cls, grid, rng, noise_sd)
        apps.append(synthetic_app(f"train{i:03d}", params, CapPair(grid.cpu_levels[0], grid.gpu_levels[0]),
                                  grid, seed=[seed, 104729, i]))
    return apps


def train_predictor(grid: CapGrid, n_apps: int = 40, latent_dim: int = 8, seed: int = 0,
                    library_noise_sd: float = 0.0, sample_noise_sd: float = 0.0) -> CompletionPredictor:
    library = training_library(grid, n_apps, seed, library_noise_sd)
    model = fit([a.surface for a in library], latent_dim=latent_dim, seed=seed)
    return CompletionPredictor(model, sample_noise_sd)


# ---------------------------------------------------------------- scenarios

@dataclass(frozen=True)
class ReceiverSpec:
    id: str
    sensitivity_class: str
    baseline: CapPair
    params: SyntheticSurfaceParams | None = None
    seed: int = 0
    surface_file: str | None = None
    uncapped_draw: CapPair | None = None

    def __post_init__(self):
        if (self.params is None) == (self.surface_file is None):
            raise InvalidParamsError(f"receiver {self.id!r} needs exactly one surface source")


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    budget_w: int
    grid: CapGrid
    receivers: tuple[ReceiverSpec, ...]
    repeats: int = 1
    seed: int = 0
    predictor: dict | None = None

    def __post_init__(self):
        if self.budget_w < 0:
            raise InvalidParamsError("budget must be non-negative")
        if self.repeats < 1:
            raise InvalidParamsError("repeats must be at least 1")
        ids = [r.id for r in self.receivers]
        if len(set(ids)) != len(ids):
            raise InvalidParamsError("receiver ids must be unique")
        for r in self.receivers:
            if r.baseline not in self.grid:
                raise InvalidParamsError(f"baseline of {r.id!r} is not on the scenario grid")


def _pair(value, what: str) -> CapPair:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise InvalidParamsError(f"{what} must be a [cpu_w, gpu_w] pair")
    return CapPair(*value)


def scenario_from_dict(doc: dict, base_dir: Path | str = ".") -> ScenarioSpec:
    base_dir = Path(base_dir)
    try:
        receivers = []
        for r in doc["receivers"]:
            src = r["surface"]
            params = surface_file = None
            if "file" in src:
                surface_file = str(base_dir / src["file"])
            else:
                params = SyntheticSurfaceParams.from_dict(src["synthetic"])
            receivers.append(ReceiverSpec(
                id=str(r["id"]),
                sensitivity_class=r.get("class", params.sensitivity_class if params else "both"),
                baseline=_pair(r["baseline"], "baseline"),
                params=params,
                seed=int(src.get("seed", 0)),
                surface_file=surface_file,
                uncapped_draw=_pair(r["uncapped_draw"], "uncapped_draw") if r.get("uncapped_draw") else None,
            ))
        predictor = doc.get("predictor")
        if predictor and "model" in predictor:
            predictor = dict(predictor, model=str(base_dir / predictor["model"]))
        return ScenarioSpec(
            id=str(doc.get("id", "scenario")),
            budget_w=int(doc["budget_w"]),
            grid=CapGrid.from_dict(doc["grid"]),
            receivers=tuple(receivers),
            repeats=int(doc.get("repeats", 1)),
            seed=int(doc.get("seed", 0)),
            predictor=predictor,
        )
    except (KeyError, TypeError) as exc:
        raise InvalidParamsError(f"malformed scenario: missing or bad field {exc}") from None


def load_scenario(path) -> ScenarioSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidParamsError(f"{path}: not valid JSON ({exc})") from None
    return scenario_from_dict(doc, path.parent)


def mixed_scenario(seed: int, grid: CapGrid, n_apps: int, budget_w: int, baseline: CapPair,
                   noise_sd: float = 0.0, repeats: int = 1) -> ScenarioSpec:
    """Random mixed workload: classes drawn uniformly from the four sensitivity classes."""
    rng = np.random.default_rng([seed, 31337])
    receivers = []
    for i in range(n_apps):
        cls = SENSITIVITY_CLASSES[int(rng.integers(len(SENSITIVITY_CLASSES)))]
        params = random_params(cls, grid, rng, noise_sd)
        receivers.append(ReceiverSpec(f"app{i:03d}", cls, baseline, params=params, seed=int(rng.integers(2**31))))
    return ScenarioSpec(f"mixed-{seed}", budget_w, grid, tuple(receivers), repeats=repeats, seed=seed)


def materialize(scenario: ScenarioSpec, repeat: int = 0) -> list[Application]:
    """Ground-truth applications of one repeat (synthetic noise is re-drawn per repeat)."""
    file_cache: dict[str, dict[str, Application]] = {}
    apps = []
    for r in scenario.receivers:
        if r.surface_file is not None:
            if r.surface_file not in file_cache:
                file_cache[r.surface_file] = {a.id: a for a in load_apps(r.surface_file)}
            found = file_cache[r.surface_file]
            if r.id not in found:
                raise InvalidParamsError(f"{r.surface_file} has no surface for {r.id!r}")
            src = found[r.id]
            if src.grid != scenario.grid:
                raise InvalidParamsError(f"surface of {r.id!r} is not on the scenario grid")
            apps.append(Application(r.id, r.baseline, src.surface, r.sensitivity_class,
                                    r.uncapped_draw or src.uncapped_draw))
        else:
            app = synthetic_app(r.id, r.params, r.baseline, scenario.grid, seed=[r.seed, repeat])
            if r.uncapped_draw is not None:
                app = Application(app.id, app.baseline, app.surface, app.sensitivity_class, r.uncapped_draw)
            apps.append(app)
    return apps


# ---------------------------------------------------------------- comparisons

@dataclass(frozen=True)
class PolicyRun:
    policy: str
    repeat: int
    result: AllocationResult
    true_improvements: tuple[float, ...]

    @property
    def avg_improvement(self) -> float:
        return float(np.mean(self.true_improvements)) if self.true_improvements else 0.0

    @property
    def jain(self) -> float:
        return jain_index(self.true_improvements) if self.true_improvements else 1.0


@dataclass(frozen=True)
class PolicySummary:
    policy: str
    avg_improvement: float
    ci_low: float
    ci_high: float
    jain: float
    power_used_w: float


@dataclass(frozen=True)
class ComparisonReport:
    scenario_id: str
    budget_w: int
    repeats: int
    runs: tuple[PolicyRun, ...]
    summaries: tuple[PolicySummary, ...] = field(default=())

    def summary(self, policy: str) -> PolicySummary:
        return next(s for s in self.summaries if s.policy == policy)

    def summary_rows(self) -> list[dict]:
        return [
            {
                "scenario_id": self.scenario_id,
                "policy": s.policy,
                "budget_w": self.budget_w,
                "repeats": self.repeats,
                "avg_improvement_pct": 100 * s.avg_improvement,
                "ci98_low_pct": 100 * s.ci_low,
                "ci98_high_pct": 100 * s.ci_high,
                "jain": s.jain,
                "power_used_w": s.power_used_w,
            }
            for s in self.summaries
        ]

    def allocation_rows(self) -> list[dict]:
        rows = []
        for run in self.runs:
            for alloc, impr in zip(run.result.allocations, run.true_improvements):
                rows.append({
                    "scenario_id": self.scenario_id,
                    "policy": run.policy,
                    "repeat": run.repeat,
                    "app_id": alloc.app_id,
                    "cpu_w": alloc.caps.cpu_w,
                    "gpu_w": alloc.caps.gpu_w,
                    "extra_power_w": alloc.extra_power_w,
                    "predicted_improvement_pct": 100 * alloc.predicted_improvement,
                    "true_improvement_pct": 100 * impr,
                })
        return rows


def _build_predictor(spec: dict | None):
    if not spec:
        return None
    from .completion import load_model
    return CompletionPredictor(load_model(spec["model"]), float(spec.get("sample_noise_sd", 0.0)))


def run_policies(true_apps: Sequence[Application], budget_w: int, grid: CapGrid,
                 decision_apps: Sequence[Application] | None = None, repeat: int = 0) -> list[PolicyRun]:
    """All four policies on one set of applications, scored on ``true_apps``."""
    decision_apps = list(true_apps) if decision_apps is None else list(decision_apps)
    tables = [build_option_table(a, budget_w) for a in decision_apps]
    demands = [demand_from_draw(a) for a in true_apps]
    results = {
        "no-distribution": no_distribution(true_apps, budget_w),
        "fair-share": fair_share_allocate(true_apps, budget_w, grid),
        "demand-proportional": demand_proportional_allocate(true_apps, demands, budget_w, grid),
        "ecoshift": dp_allocate(tables, budget_w),
    }
    return [PolicyRun(p, repeat, results[p], tuple(true_improvements(results[p], true_apps))) for p in POLICIES]


def _comparison_repeat(args) -> list[PolicyRun]:
    scenario, repeat, predictor = args
    true_apps = materialize(scenario, repeat)
    decision = None
    if predictor is not None:
        rng = np.random.default_rng([scenario.seed, repeat, 2])
        decision = [predictor.predict(a, rng) for a in true_apps]
    return run_policies(true_apps, scenario.budget_w, scenario.grid, decision, repeat)


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def run_comparison(scenario: ScenarioSpec, predictor: CompletionPredictor | None = None,
                   jobs: int = 1) -> ComparisonReport:
    if predictor is None:
        predictor = _build_predictor(scenario.predictor)
    tasks = [(scenario, r, predictor) for r in range(scenario.repeats)]
    runs = [run for batch in _map(_comparison_repeat, tasks, jobs) for run in batch]

    summaries = []
    for policy in POLICIES:
        mine = [r for r in runs if r.policy == policy]
        mean, lo, hi = confidence_interval([r.avg_improvement for r in mine])
        summaries.append(PolicySummary(
            policy, mean, lo, hi,
            jain=float(np.mean([r.jain for r in mine])),
            power_used_w=float(np.mean([r.result.total_power_used for r in mine])),
        ))
    return ComparisonReport(scenario.id, scenario.budget_w, scenario.repeats, tuple(runs), tuple(summaries))


# ---------------------------------------------------------------- gap study

@dataclass(frozen=True)
class GapStudyConfig:
    n_scenarios: int = 5
    apps_per_scenario: int = 10
    cap_settings: int = 5
    budget_levels: int = 4
    grid: CapGrid = field(default_factory=lambda: CapGrid.regular((100, 500), (100, 500), 50))
    baselines: tuple[CapPair, ...] | None = None
    budgets: tuple[int, ...] | None = None
    surface_noise_sd: float = 0.0
    # raw option products reach ~1e9 at B=400 W; the feasible set stays small
    oracle_limit: int = 10**10
    seed: int = 0

    def resolved_baselines(self) -> tuple[CapPair, ...]:
        if self.baselines is not None:
            return self.baselines
        cpu, gpu = self.grid.cpu_levels, self.grid.gpu_levels
        out = []
        for k in range(self.cap_settings):
            frac = 0.5 * k / max(self.cap_settings - 1, 1)  # small .. mid-grid
            out.append(CapPair(cpu[round(frac * (len(cpu) - 1))], gpu[round(frac * (len(gpu) - 1))]))
        return tuple(out)

    def resolved_budgets(self) -> tuple[int, ...]:
        if self.budgets is not None:
            return self.budgets
        return tuple(100 * (k + 1) for k in range(self.budget_levels))


@dataclass(frozen=True)
class GapStudyResult:
    records: tuple[dict, ...]

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r["gap_pp"] for r in self.records])

    def cdf(self) -> list[tuple[float, float]]:
        g = np.sort(self.gaps)
        return [(float(v), (i + 1) / g.size) for i, v in enumerate(g)]

    def summary(self) -> dict:
        g = self.gaps
        acc = [r["prediction_accuracy"] for r in self.records if r["prediction_accuracy"] is not None]
        return {
            "n": int(g.size),
            "median_pp": float(np.median(g)),
            "mean_pp": float(np.mean(g)),
            "p90_pp": float(np.percentile(g, 90)),
            "max_pp": float(np.max(g)),
            "frac_le_1pp": float(np.mean(g <= 1)),
            "frac_le_2pp": float(np.mean(g <= 2)),
            "frac_le_3pp": float(np.mean(g <= 3)),
            "frac_lt_3pp": float(np.mean(g < 3)),
            "mean_prediction_accuracy": float(np.mean(acc)) if acc else None,
        }


def _gap_task(args) -> list[dict]:
    cfg, predictor, sel, cap_idx, workload = args
    baseline = cfg.resolved_baselines()[cap_idx]
    true_apps = [synthetic_app(f"s{sel}a{i}", params, baseline, cfg.grid, seed=[cfg.seed, sel, i])
                 for i, params in enumerate(workload)]
    if predictor is None:
        decision, acc = true_apps, None
    else:
        rng = np.random.default_rng([cfg.seed, sel, cap_idx, 3])
        decision = [predictor.predict(a, rng) for a in true_apps]
        acc = float(np.mean([prediction_accuracy(t.surface, d.surface, t.baseline)
                             for t, d in zip(true_apps, decision)]))

    records = []
    for budget in cfg.resolved_budgets():
        dp = dp_allocate([build_option_table(a, budget) for a in decision], budget)
        oracle = brute_force_allocate([build_option_table(a, budget) for a in true_apps], budget,
                                      limit=cfg.oracle_limit)
        records.append({
            "selection": sel,
            "cap_setting": cap_idx,
            "baseline_cpu_w": baseline.cpu_w,
            "baseline_gpu_w": baseline.gpu_w,
            "budget_w": budget,
            "oracle_avg_pct": 100 * true_avg_improvement(oracle, true_apps),
            "dp_avg_pct": 100 * true_avg_improvement(dp, true_apps),
            "gap_pp": oracle_gap(dp, oracle, true_apps),
            "prediction_accuracy": acc,
        })
    return records


def gap_study(config: GapStudyConfig = GapStudyConfig(), predictor: CompletionPredictor | None = None,
              jobs: int = 1) -> GapStudyResult:
    """DP-on-predictions versus Oracle-on-truth over selections x cap settings x budgets."""
    rng = np.random.default_rng([config.seed, 271828])
    workloads = []
    for _ in range(config.n_scenarios):
        classes = rng.integers(len(SENSITIVITY_CLASSES), size=config.apps_per_scenario)
        workloads.append([random_params(SENSITIVITY_CLASSES[int(c)], config.grid, rng, config.surface_noise_sd)
                          for c in classes])
    tasks = [(config, predictor, s, c, workloads[s])
             for s in range(config.n_scenarios) for c in range(config.cap_settings)]
    records = [rec for batch in _map(_gap_task, tasks, jobs) for rec in batch]
    return GapStudyResult(tuple(records))
