"""Experiment configuration, Monte-Carlo driver, result files, and the
built-in property suite behind ``verify``.

Config files are JSON::

    {
      "scenario": "twoVtwo_suboptimal" | "twoVfour_nearoptimal" | "custom",
      "trials": 50, "seed": 0, "T": 2000,
      "algorithms": ["MetaBSG", "BSG", "CommandOnly"],
      "learner": {"meta_update": "paper"},
      "output": {"directory": "results"},
      "scenario_params": {...},           # keyword overrides for a named scenario
      "world": {...}, "command": {...}    # required for "custom"
    }

``world`` mirrors :class:`~bandit_coord.tracksim.WorldConfig` (``robots``,
``targets``, optional ``bounds``, ``smoothing``, ``step_hz``); ``command``
holds ``polylines`` and ``speeds`` for a waypoint command.
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import oracle as orc
from .coordination import run_episode
from .exceptions import PreconditionError
from .learners import Exp3IX, Strategy
from .submodular import (
    SetFunction,
    normalize,
    random_coverage,
    verify_submodular,
)
from .tracksim import (
    TrackingEnvironment,
    WaypointCommand,
    WorldConfig,
    random_tracking_objective,
    scenario_nearoptimal,
    scenario_suboptimal,
)

SCENARIOS = {
    "twoVtwo_suboptimal": scenario_suboptimal,
    "twoVfour_nearoptimal": scenario_nearoptimal,
}
ALGORITHM_NAMES = {"MetaBSG": "MetaBSG", "BSG": "BSG", "CommandOnly": "CommandOnly",
                   "SG-oracle": "SG", "SG": "SG"}
CSV_HEADER = "trial,algorithm,t,value,total_min_distance,strategy,seed"
CURVE_POINTS = 100
THREADS_ENV = "BANDIT_COORD_THREADS"

_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "scenario": {"enum": ["twoVtwo_suboptimal", "twoVfour_nearoptimal", "custom"]},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "T": {"type": "integer", "minimum": 0},
        "algorithms": {
            "type": "array", "minItems": 1, "uniqueItems": True,
            "items": {"enum": sorted(ALGORITHM_NAMES)},
        },
        "learner": {
            "type": "object",
            "properties": {"meta_update": {"enum": ["paper", "standard"]}},
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"directory": {"type": "string"}},
            "additionalProperties": False,
        },
        "scenario_params": {"type": "object"},
        "world": {
            "type": "object",
            "properties": {
                "robots": {"type": "array", "minItems": 1, "items": {
                    "type": "object",
                    "properties": {
                        "start": _POINT, "speed": {"type": "number"}, "fov": {"type": "number"},
                        "range_sigma0": {"type": "number", "minimum": 0},
                        "bearing_sigma0": {"type": "number", "minimum": 0},
                    },
                    "required": ["start"], "additionalProperties": False}},
                "targets": {"type": "array", "items": {
                    "type": "object",
                    "properties": {"waypoints": {"type": "array", "items": _POINT, "minItems": 1},
                                   "speed": {"type": "number"}},
                    "required": ["waypoints"], "additionalProperties": False}},
                "bounds": {"oneOf": [{"type": "null"}, {
                    "type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}]},
                "smoothing": {"type": "number"},
                "step_hz": {"type": "number"},
            },
            "required": ["robots", "targets"],
            "additionalProperties": False,
        },
        "command": {
            "type": "object",
            "properties": {
                "polylines": {"type": "array", "items": {"type": "array", "items": _POINT}},
                "speeds": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
            "required": ["polylines", "speeds"],
            "additionalProperties": False,
        },
    },
    "required": ["scenario"],
    "additionalProperties": False,
}


class ConfigError(PreconditionError):
    """The experiment configuration is malformed or inconsistent."""


@dataclass
class ExperimentConfig:
    scenario: str
    trials: int = 50
    seed: int = 0
    T: int = 2000
    algorithms: list = field(default_factory=lambda: ["MetaBSG", "BSG", "CommandOnly"])
    meta_update: str = "paper"
    output_dir: str = "results"
    scenario_params: dict = field(default_factory=dict)
    world: dict | None = None
    command: dict | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{where}: {exc.message}") from None
        cfg = cls(
            scenario=raw["scenario"],
            trials=raw.get("trials", 50),
            seed=raw.get("seed", 0),
            T=raw.get("T", 2000),
            algorithms=list(raw.get("algorithms", ["MetaBSG", "BSG", "CommandOnly"])),
            meta_update=raw.get("learner", {}).get("meta_update", "paper"),
            output_dir=raw.get("output", {}).get("directory", "results"),
            scenario_params=dict(raw.get("scenario_params", {})),
            world=raw.get("world"),
            command=raw.get("command"),
        )
        cfg.build()
        return cfg

    def build(self):
        """World config and command source for this experiment."""
        try:
            if self.scenario == "custom":
                if self.world is None or self.command is None:
                    raise ConfigError("custom scenario needs 'world' and 'command' sections")
                world = WorldConfig(**{**self.world, "T": self.T})
                if world.bounds is not None:
                    world.bounds = tuple(world.bounds)
                cmd = WaypointCommand(self.command["polylines"], self.command["speeds"])
                if len(cmd.polylines) != len(world.robots) or len(cmd.speeds) != len(world.robots):
                    raise ConfigError("command needs one polyline and one speed per robot")
                return world, cmd
            if self.world is not None or self.command is not None:
                raise ConfigError("'world' and 'command' are only allowed with scenario 'custom'")
            return SCENARIOS[self.scenario](T=self.T, **self.scenario_params)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        except PreconditionError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(raw)


def worker_count(jobs: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, int(cap))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, min(n, jobs))


# -- Monte-Carlo driver -----------------------------------------------------


def _oracle_stats(traces: dict) -> dict:
    """Per-algorithm hindsight statistics for one trial."""
    solutions = {name: orc.hindsight_optimal(orc.objectives_of(tr)) for name, tr in traces.items()}
    out = {"per_algorithm": {}}
    for name, sol in solutions.items():
        total = traces[name].total
        out["per_algorithm"][name] = {
            "opt_total": sol.total_value,
            "algorithm_total": total,
            "delta_T": orc.delta_T(sol) if len(sol) else 0,
            "min_shift_delta": orc.min_shift_delta(sol) if len(sol) else 0,
        }
    if "CommandOnly" in solutions and solutions["CommandOnly"].total_value > 0:
        out["empirical_beta"] = orc.empirical_beta(traces["CommandOnly"], solutions["CommandOnly"])
    if {"MetaBSG", "BSG", "CommandOnly"} <= set(traces):
        report = orc.bound_report(traces["MetaBSG"], traces["BSG"], traces["CommandOnly"],
                                  solutions["MetaBSG"],
                                  command_solution=solutions["CommandOnly"])
        out["bound_report"] = report.as_dict()
    return out


def run_trial(cfg: ExperimentConfig, trial: int, with_oracle: bool = False) -> dict:
    """All configured algorithms for one trial, sharing the trial's seed."""
    world, command = cfg.build()
    seed = cfg.seed + trial
    series, traces = {}, {}
    for name in cfg.algorithms:
        env = TrackingEnvironment(world)
        trace = run_episode(ALGORITHM_NAMES[name], env, cfg.T, command, seed=seed,
                            meta_mode=cfg.meta_update, keep_objectives=with_oracle)
        strategy = np.array([-1 if r.strategy is None else int(r.strategy) for r in trace.records],
                            dtype=int)
        q_bsg = (trace.strategy_mass(Strategy.BSG) if name == "MetaBSG" and cfg.T
                 else np.full(cfg.T, np.nan))
        series[name] = {"values": trace.values, "metrics": trace.metrics,
                        "strategy": strategy, "q_bsg": q_bsg}
        if with_oracle:
            traces[name] = trace
    result = {"trial": trial, "seed": seed, "series": series}
    if with_oracle:
        result["oracle"] = _oracle_stats(traces)
    return result


def _run_trial_args(args):
    return run_trial(*args)


@dataclass
class RunResult:
    config: ExperimentConfig
    trials: list
    oracle_refused: str | None = None

    def column(self, algorithm, key) -> np.ndarray:
        """``(trials, T)`` array of one per-step series."""
        return np.array([tr["series"][algorithm][key] for tr in self.trials], dtype=float)


def oracle_feasible(cfg: ExperimentConfig) -> tuple[bool, str | None]:
    world, _ = cfg.build()
    size = 8 ** len(world.robots)
    if size > orc.PER_STEP_BUDGET:
        return False, f"per-step joint action space {size} exceeds budget {orc.PER_STEP_BUDGET}"
    return True, None


def simulate(cfg: ExperimentConfig, with_oracle: bool = False, workers: int | None = None) -> RunResult:
    refused = None
    if with_oracle:
        with_oracle, refused = oracle_feasible(cfg)
    jobs = [(cfg, k, with_oracle) for k in range(cfg.trials)]
    workers = worker_count(len(jobs)) if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial_args, jobs))
    else:
        results = [run_trial(*job) for job in jobs]
    results.sort(key=lambda r: r["trial"])
    return RunResult(cfg, results, refused)


def _fmt(x) -> str:
    return "%.9g" % x


def csv_lines(result: RunResult):
    yield CSV_HEADER
    for trial in result.trials:
        for name in sorted(trial["series"]):
            s = trial["series"][name]
            for t in range(len(s["values"])):
                code = s["strategy"][t]
                strategy = "" if code < 0 else Strategy(code).name
                yield (f"{trial['trial']},{name},{t},{_fmt(s['values'][t])},"
                       f"{_fmt(s['metrics'][t])},{strategy},{trial['seed']}")


def _mean_stderr(x) -> dict:
    x = np.asarray(x, dtype=float)
    stderr = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return {"mean": float(x.mean()) if len(x) else math.nan, "stderr": stderr}


def final_quartile(T: int) -> slice:
    return slice(T - T // 4 if T >= 4 else 0, T)


def summarize(result: RunResult) -> dict:
    cfg = result.config
    T = cfg.T
    tail = final_quartile(T)
    idx = np.unique(np.linspace(0, T - 1, min(CURVE_POINTS, T)).round().astype(int)) if T else []
    algorithms = {}
    for name in cfg.algorithms:
        values = result.column(name, "values")
        metrics = result.column(name, "metrics")
        entry = {
            "cumulative_value": _mean_stderr(values.sum(axis=1)),
            "final_quartile_total_min_distance": _mean_stderr(
                metrics[:, tail].mean(axis=1) if T else []),
            "total_min_distance_curve": {
                "t": [int(i) for i in idx],
                "mean": [float(v) for v in metrics.mean(axis=0)[idx]] if T else [],
            },
        }
        if name == "MetaBSG" and T:
            q_bsg = result.column(name, "q_bsg")[:, tail].mean(axis=1)
            entry["final_quartile_strategy_mass"] = {
                "BSG": _mean_stderr(q_bsg), "EXT_COMM": _mean_stderr(1 - q_bsg)}
        algorithms[name] = entry
    summary = {"config": asdict(cfg), "algorithms": algorithms}
    if result.oracle_refused:
        summary["oracle"] = {"refused": result.oracle_refused}
    elif result.trials and "oracle" in result.trials[0]:
        per_trial = [tr["oracle"] for tr in result.trials]
        oracle = {"per_trial": per_trial}
        for name in cfg.algorithms:
            rows = [p["per_algorithm"][name] for p in per_trial]
            algorithms[name]["oracle"] = {
                key: _mean_stderr([r[key] for r in rows])
                for key in ("opt_total", "delta_T", "min_shift_delta")
            }
        betas = [p["empirical_beta"] for p in per_trial if "empirical_beta" in p]
        if betas:
            oracle["empirical_beta"] = _mean_stderr(betas)
        reports = [p["bound_report"] for p in per_trial if "bound_report" in p]
        if reports:
            oracle["meta_slack"] = _mean_stderr([r["meta_slack"] for r in reports])
            oracle["half_slack"] = _mean_stderr([r["half_slack"] for r in reports])
        summary["oracle"] = oracle
    return summary


def write_results(result: RunResult, directory=None) -> Path:
    out = Path(result.config.output_dir if directory is None else directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="\n") as fh:
        for line in csv_lines(result):
            fh.write(line + "\n")
    with open(out / "summary.json", "w", newline="\n") as fh:
        json.dump(summarize(result), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return out


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- bench --------------------------------------------------------------------


def bench(cfg: ExperimentConfig) -> dict:
    """Per-step wall time and gated-evaluation counts for one trial."""
    world, command = cfg.build()
    n = len(world.robots)
    report = {}
    for name in cfg.algorithms:
        env = TrackingEnvironment(world)
        start = time.perf_counter()
        trace = run_episode(ALGORITHM_NAMES[name], env, cfg.T, command, seed=cfg.seed,
                            meta_mode=cfg.meta_update)
        elapsed = time.perf_counter() - start
        per_agent = [0] * n
        for rec in trace.records:
            for q in rec.queries:
                # the k-th prefix query is the one agent k's reward comes from
                per_agent[len(q) - 1] += 1
        report[name] = {
            "T": cfg.T,
            "seconds_per_step": elapsed / cfg.T if cfg.T else 0.0,
            "gated_evaluations_per_agent": per_agent,
            "gated_evaluations_total": sum(per_agent),
            "meta_updates": sum(1 for r in trace.records if r.strategy is not None),
        }
    return report


# -- property suite -------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def supermodular_function(n_agents=2, n_actions=2) -> SetFunction:
    """``|A|^2`` scaled to [0, 1]; violates diminishing returns."""
    return SetFunction(lambda t, A: len(A) ** 2 / n_agents ** 2, [n_actions] * n_agents)


def brute_force_opt(f: SetFunction):
    sol = orc.hindsight_optimal([f])
    return sol.per_step_value[0]


def sg_half_bound_sweep(n_instances=1000, seed=0):
    """First instance where SG falls below half of OPT, or None."""
    from .coordination import sequential_greedy

    rng = np.random.default_rng(seed)
    for k in range(n_instances):
        n_agents = int(rng.integers(1, 4))
        n_actions = int(rng.integers(1, 6))
        f = random_coverage(rng, n_agents, n_actions)
        A = sequential_greedy(f, 0)
        sg, opt = f.evaluate(0, A), brute_force_opt(f)
        if not sg >= 0.5 * opt:
            return k, f, A, sg, opt
    return None


def exp3ix_bernoulli_regret(T, seeds, means=(0.8, 0.2), mode="paper"):
    """Pseudo-regret of EXP3-IX against the best arm, one value per seed.

    Runs all seeds at once with the same arithmetic as :class:`Exp3IX`;
    seed ``s`` consumes ``default_rng(s).random()`` twice per step, first for
    the arm draw and then for the Bernoulli reward.
    """
    means = np.asarray(means, dtype=float)
    seeds = list(seeds)
    probe = Exp3IX(T, mode=mode)
    eta, gamma = probe.eta, probe.gamma
    u = np.stack([np.random.default_rng(s).random((T, 2)) for s in seeds])
    z = np.ones((len(seeds), 2))
    rows = np.arange(len(seeds))
    earned = np.zeros(len(seeds))
    for t in range(T):
        q = z / z.sum(axis=1, keepdims=True)
        c0, c1 = q[:, 0], q[:, 0] + q[:, 1]
        arm = (u[:, t, 0] * c1 >= c0).astype(int)
        reward = (u[:, t, 1] < means[arm]).astype(float)
        r = np.ones_like(z)
        r[rows, arm] = 1.0 - (1.0 - reward) / (q[rows, arm] + gamma)
        if mode == "paper":
            r = r / np.abs(r).sum(axis=1, keepdims=True)
        z = z * np.exp(eta * r)
        top = z.max(axis=1, keepdims=True)
        z = np.where(top > 1e150, z / top, z)
        earned += means[arm]
    return T * means.max() - earned


def run_checks(extra_functions=()) -> list:
    """The built-in property suite. ``extra_functions`` are set functions
    that must also pass the exhaustive submodularity check."""
    checks = []
    rng = np.random.default_rng(20240101)

    def first_violation(functions):
        for k, f in enumerate(functions):
            cex = verify_submodular(f, 0)
            if cex is not None:
                return k, cex
        return None

    cov = [random_coverage(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)))
           for _ in range(50)]
    bad = first_violation(normalize(f, f.upper_bound) for f in cov)
    checks.append(CheckResult("coverage functions are normalized monotone submodular",
                              bad is None, "" if bad is None else f"instance {bad[0]}: {bad[1]}"))

    bad = first_violation(random_tracking_objective(rng) for _ in range(100))
    checks.append(CheckResult("tracking objective is normalized monotone submodular",
                              bad is None, "" if bad is None else f"instance {bad[0]}: {bad[1]}"))

    for k, f in enumerate(extra_functions):
        cex = verify_submodular(f, 0)
        checks.append(CheckResult(f"injected function {k} is normalized monotone submodular",
                                  cex is None, "" if cex is None else str(cex)))

    bad = sg_half_bound_sweep(1000)
    checks.append(CheckResult(
        "sequential greedy reaches half of OPT on 1000 coverage instances", bad is None,
        "" if bad is None else f"instance {bad[0]}: SG={bad[3]!r} OPT={bad[4]!r} actions={bad[2]}"))

    checks.append(_episode_check(rng))

    T = 2000
    regret = exp3ix_bernoulli_regret(T, range(20)).mean()
    limit = 8 * math.sqrt(T * math.log(2))
    checks.append(CheckResult("EXP3-IX regret on a 0.8/0.2 Bernoulli instance",
                              regret <= limit, f"mean regret {regret:.2f}, limit {limit:.2f}"))
    return checks


def _episode_check(rng) -> CheckResult:
    """Telescoping, gate usage and oracle dominance on short episodes."""
    f = random_coverage(rng, 3, 4)
    g = normalize(f, f.upper_bound)
    opt = orc.hindsight_optimal(g, T=50)
    command = lambda t, obs: {0: 0, 1: 1, 2: 2}  # noqa: E731
    for name in ("BSG", "MetaBSG"):
        trace = run_episode(name, g, 50, command, seed=3)
        for rec in trace.records:
            if abs(rec.rewards.sum() - rec.value) > 1e-9:
                return CheckResult("episode invariants", False,
                                   f"{name} t={rec.t}: rewards sum {rec.rewards.sum()!r} "
                                   f"!= value {rec.value!r}")
            if len(rec.queries) != 3:
                return CheckResult("episode invariants", False,
                                   f"{name} t={rec.t}: {len(rec.queries)} gated queries")
        if trace.total > opt.total_value + 1e-9:
            return CheckResult("episode invariants", False,
                               f"{name} total {trace.total!r} exceeds OPT {opt.total_value!r}")
    if orc.delta_T(opt) != 0:
        return CheckResult("episode invariants", False, "static instance has nonzero shifts")
    return CheckResult("episode invariants (telescoping, one query per agent, OPT dominance)", True)
