"""Experiment runner: config parsing, multi-trial orchestration, persistence.

Seeds are split hierarchically from one master seed: the environment of trial
n is seeded by (master, n, 0) and each learner/opponent pair by
(master, n, 1|2, learner_index), so adding or removing learners never
perturbs the environment realization, and every learner plays the exact same
ground truth, expert reveals, and noise stream within a trial.

Outputs under the run directory:

    manifest.json                           resolved config + per-trial seeds
    trials/trial_<n>/<learner>/metrics.csv  long format: series,episode,value
    trials/trial_<n>/<learner>/trace.jsonl  one JSON object per episode
    aggregate/<learner>.csv                 series,episode,mean,stderr

All floats are written with ``repr`` so replaying a manifest reproduces the
metric files byte for byte.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .agents import (
    BestResponderOpponent,
    Exp3Agent,
    FixedOpponent,
    FixedStrategyAgent,
    OFULinMatAgent,
    SaddleOracleOpponent,
    UniformOpponent,
)
from .environment import Environment, EnvironmentConfig, ExpertSpec, ThetaSpec
from .estimator import EstimatorConfig
from .metrics import build_report

OUTPUT_FORMATS = ("csv", "jsonl")


class ConfigError(ValueError):
    """Invalid experiment configuration; carries field-level messages."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _require_keys(section: dict, allowed: set[str], where: str):
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError([f"{where}: unknown key {key!r}" for key in unknown])


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    name: str
    estimator: EstimatorConfig | None = None
    reward_min: float | None = None
    reward_max: float | None = None
    strategy: tuple[float, ...] | None = None

    def build(self, n_actions: int, n_experts: int, seed):
        if self.kind == "ofulinmat":
            return OFULinMatAgent(n_actions, self.estimator, seed=seed)
        if self.kind == "exp3":
            return Exp3Agent(
                n_actions, seed=seed, reward_min=self.reward_min, reward_max=self.reward_max
            )
        if self.kind == "fixed":
            return FixedStrategyAgent(np.asarray(self.strategy), seed=seed)
        if self.kind == "uniform":
            return FixedStrategyAgent.uniform(n_actions, seed=seed)
        raise ConfigError([f"learner: unknown type {self.kind!r}"])


@dataclass(frozen=True)
class OpponentSpec:
    kind: str
    strategy: tuple[float, ...] | None = None

    def build(self, seed):
        if self.kind == "saddle_oracle":
            return SaddleOracleOpponent(seed=seed)
        if self.kind == "uniform":
            return UniformOpponent(seed=seed)
        if self.kind == "best_responder":
            return BestResponderOpponent(seed=seed)
        if self.kind == "fixed":
            return FixedOpponent(np.asarray(self.strategy), seed=seed)
        raise ConfigError([f"opponent: unknown type {self.kind!r}"])


@dataclass(frozen=True)
class ExperimentConfig:
    environment: EnvironmentConfig
    learners: tuple[LearnerSpec, ...]
    opponent: OpponentSpec
    trials: int = 1
    master_seed: int = 0
    output_format: str = "csv"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(["trials: must be at least 1"])
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError([f"output_format: must be one of {OUTPUT_FORMATS}"])
        if not self.learners:
            raise ConfigError(["learners: at least one learner is required"])


def default_paper_config(trials: int = 20, master_seed: int = 0) -> ExperimentConfig:
    """Case-study defaults: 10x10 games, 10 experts, 15 episodes of 200
    rounds, N(0, 0.5) reward noise, mixing weights drawn from N(0.5, I)
    rejected into the norm-3 ball, optimistic learner with ridge 0.1,
    confidence 3e-3, bound 3, plus the adversarial-bandit baseline, both
    against the saddle-point oracle opponent."""
    n_experts = 10
    bound = 3.0
    clip = bound * math.sqrt(n_experts) * n_experts  # loose payoff range for Exp3
    return ExperimentConfig(
        environment=EnvironmentConfig(
            n_rows=10,
            n_cols=10,
            n_experts=n_experts,
            n_episodes=15,
            rounds_per_episode=200,
            noise_variance=0.5,
            theta=ThetaSpec(kind="gaussian", mean=0.5, norm_bound=bound),
            experts=ExpertSpec(kind="uniform"),
            seed=0,
        ),
        learners=(
            LearnerSpec(
                kind="ofulinmat",
                name="ofulinmat",
                estimator=EstimatorConfig(
                    ridge=0.1, param_bound=bound, delta=3e-3, n_experts=n_experts
                ),
            ),
            LearnerSpec(kind="exp3", name="exp3", reward_min=-clip, reward_max=clip),
        ),
        opponent=OpponentSpec(kind="saddle_oracle"),
        trials=trials,
        master_seed=master_seed,
        output_format="csv",
    )


# ---------------------------------------------------------------------------
# Config (de)serialization


def config_to_dict(config: ExperimentConfig) -> dict:
    env = config.environment
    learners = []
    for spec in config.learners:
        entry: dict = {"type": spec.kind, "name": spec.name}
        if spec.kind == "ofulinmat":
            est = spec.estimator
            entry.update(
                ridge=est.ridge,
                param_bound=est.param_bound,
                delta=est.delta,
            )
        elif spec.kind == "exp3":
            entry.update(reward_min=spec.reward_min, reward_max=spec.reward_max)
        elif spec.kind == "fixed":
            entry.update(strategy=list(spec.strategy))
        learners.append(entry)
    opponent: dict = {"type": config.opponent.kind}
    if config.opponent.strategy is not None:
        opponent["strategy"] = list(config.opponent.strategy)
    theta: dict = {"type": env.theta.kind}
    if env.theta.kind == "fixed":
        theta["values"] = list(env.theta.values)
    else:
        theta["mean"] = env.theta.mean
        if env.theta.norm_bound is not None:
            theta["norm_bound"] = env.theta.norm_bound
    experts: dict = {"type": env.experts.kind}
    if env.experts.kind == "fixed":
        experts["matrices"] = np.asarray(env.experts.matrices).tolist()
    return {
        "environment": {
            "n_rows": env.n_rows,
            "n_cols": env.n_cols,
            "n_experts": env.n_experts,
            "n_episodes": env.n_episodes,
            "rounds_per_episode": env.rounds_per_episode,
            "noise_variance": env.noise_variance,
            "theta_star": theta,
            "experts": experts,
        },
        "learners": learners,
        "opponent": opponent,
        "trials": config.trials,
        "master_seed": config.master_seed,
        "output_format": config.output_format,
    }


def _parse_theta(section: dict) -> ThetaSpec:
    _require_keys(section, {"type", "values", "mean", "norm_bound"}, "environment.theta_star")
    kind = section.get("type", "gaussian")
    if kind == "fixed":
        if "values" not in section:
            raise ConfigError(["environment.theta_star: fixed weights need 'values'"])
        return ThetaSpec(kind="fixed", values=tuple(section["values"]))
    return ThetaSpec(
        kind="gaussian",
        mean=float(section.get("mean", 0.5)),
        norm_bound=None if section.get("norm_bound") is None else float(section["norm_bound"]),
    )


def _parse_experts(section: dict) -> ExpertSpec:
    _require_keys(section, {"type", "matrices"}, "environment.experts")
    kind = section.get("type", "uniform")
    if kind == "fixed":
        if "matrices" not in section:
            raise ConfigError(["environment.experts: fixed experts need 'matrices'"])
        return ExpertSpec(kind="fixed", matrices=tuple(section["matrices"]))
    return ExpertSpec(kind="uniform")


def _parse_environment(section: dict) -> EnvironmentConfig:
    allowed = {
        "n_rows",
        "n_cols",
        "n_experts",
        "n_episodes",
        "rounds_per_episode",
        "noise_variance",
        "theta_star",
        "experts",
    }
    _require_keys(section, allowed, "environment")
    missing = [k for k in ("n_rows", "n_cols", "n_experts", "n_episodes", "rounds_per_episode") if k not in section]
    if missing:
        raise ConfigError([f"environment: missing key {k!r}" for k in missing])
    try:
        return EnvironmentConfig(
            n_rows=int(section["n_rows"]),
            n_cols=int(section["n_cols"]),
            n_experts=int(section["n_experts"]),
            n_episodes=int(section["n_episodes"]),
            rounds_per_episode=int(section["rounds_per_episode"]),
            noise_variance=float(section.get("noise_variance", 0.0)),
            theta=_parse_theta(section.get("theta_star", {})),
            experts=_parse_experts(section.get("experts", {})),
            seed=0,  # per-trial seeds come from the master seed
        )
    except ValueError as exc:
        raise ConfigError([f"environment: {exc}"]) from exc


def _parse_learner(section: dict, index: int, env: EnvironmentConfig) -> LearnerSpec:
    where = f"learners[{index}]"
    kind = section.get("type")
    if kind == "ofulinmat":
        _require_keys(section, {"type", "name", "ridge", "param_bound", "delta"}, where)
        try:
            estimator = EstimatorConfig(
                ridge=float(section.get("ridge", 0.1)),
                param_bound=float(section.get("param_bound", 3.0)),
                delta=float(section.get("delta", 3e-3)),
                n_experts=env.n_experts,
            )
        except ValueError as exc:
            raise ConfigError([f"{where}: {exc}"]) from exc
        return LearnerSpec(kind=kind, name=section.get("name", "ofulinmat"), estimator=estimator)
    if kind == "exp3":
        _require_keys(section, {"type", "name", "reward_min", "reward_max"}, where)
        default_clip = 3.0 * math.sqrt(env.n_experts) * env.n_experts
        lo = float(section.get("reward_min", -default_clip))
        hi = float(section.get("reward_max", default_clip))
        if not lo < hi:
            raise ConfigError([f"{where}: reward_min must be strictly below reward_max"])
        return LearnerSpec(kind=kind, name=section.get("name", "exp3"), reward_min=lo, reward_max=hi)
    if kind == "fixed":
        _require_keys(section, {"type", "name", "strategy"}, where)
        if "strategy" not in section:
            raise ConfigError([f"{where}: fixed learner needs 'strategy'"])
        return LearnerSpec(
            kind=kind, name=section.get("name", "fixed"), strategy=tuple(section["strategy"])
        )
    if kind == "uniform":
        _require_keys(section, {"type", "name"}, where)
        return LearnerSpec(kind=kind, name=section.get("name", "uniform"))
    raise ConfigError([f"{where}: unknown or missing learner type {kind!r}"])


def _parse_opponent(section: dict) -> OpponentSpec:
    _require_keys(section, {"type", "strategy"}, "opponent")
    kind = section.get("type")
    if kind in ("saddle_oracle", "uniform", "best_responder"):
        return OpponentSpec(kind=kind)
    if kind == "fixed":
        if "strategy" not in section:
            raise ConfigError(["opponent: fixed opponent needs 'strategy'"])
        return OpponentSpec(kind=kind, strategy=tuple(section["strategy"]))
    raise ConfigError([f"opponent: unknown or missing type {kind!r}"])


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(["config: top level must be an object"])
    allowed = {"environment", "learners", "opponent", "trials", "master_seed", "output_format"}
    _require_keys(raw, allowed, "config")
    for key in ("environment", "learners", "opponent"):
        if key not in raw:
            raise ConfigError([f"config: missing section {key!r}"])
    env = _parse_environment(raw["environment"])
    learner_sections = raw["learners"]
    if not isinstance(learner_sections, list) or not learner_sections:
        raise ConfigError(["learners: must be a non-empty list"])
    learners = tuple(
        _parse_learner(section, i, env) for i, section in enumerate(learner_sections)
    )
    names = [spec.name for spec in learners]
    if len(set(names)) != len(names):
        raise ConfigError(["learners: names must be unique (set 'name' to disambiguate)"])
    return ExperimentConfig(
        environment=env,
        learners=learners,
        opponent=_parse_opponent(raw["opponent"]),
        trials=int(raw.get("trials", 1)),
        master_seed=int(raw.get("master_seed", 0)),
        output_format=str(raw.get("output_format", "csv")),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: not valid JSON ({exc})"]) from exc
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# Running


@dataclass
class RunManifest:
    config: dict
    trial_seeds: list[int]
    version: str
    created_at: str
    elapsed_seconds: float

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "trial_seeds": self.trial_seeds,
            "version": self.version,
            "created_at": self.created_at,
            "elapsed_seconds": self.elapsed_seconds,
        }


def trial_environment(config: ExperimentConfig, trial: int) -> Environment:
    env_cfg = config.environment
    seeded = EnvironmentConfig(
        n_rows=env_cfg.n_rows,
        n_cols=env_cfg.n_cols,
        n_experts=env_cfg.n_experts,
        n_episodes=env_cfg.n_episodes,
        rounds_per_episode=env_cfg.rounds_per_episode,
        noise_variance=env_cfg.noise_variance,
        theta=env_cfg.theta,
        experts=env_cfg.experts,
        seed=[config.master_seed, trial, 0],
    )
    return Environment(seeded)


def run_trial(config: ExperimentConfig, trial: int) -> dict:
    """Run every configured learner on the same environment realization."""
    env = trial_environment(config, trial)
    learners = {}
    for index, spec in enumerate(config.learners):
        learner_seed = np.random.SeedSequence([config.master_seed, trial, 1, index])
        opponent_seed = np.random.SeedSequence([config.master_seed, trial, 2, index])
        learner = spec.build(
            config.environment.n_rows, config.environment.n_experts, np.random.default_rng(learner_seed)
        )
        opponent = config.opponent.build(np.random.default_rng(opponent_seed))
        traces = env.run_trial(learner, opponent)
        learners[spec.name] = {"traces": traces, "report": build_report(traces)}
    return {
        "learners": learners,
        "environment": {
            "theta_star": env.theta_star.tolist(),
            "theta_rejections": env.theta_rejections,
        },
    }


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_metrics_csv(path: Path, report) -> None:
    lines = ["series,episode,value"]
    lines += [f"{name},{episode},{_fmt(value)}" for name, episode, value in report.series_rows()]
    path.write_text("\n".join(lines) + "\n")


def _write_metrics_jsonl(path: Path, report) -> None:
    with path.open("w") as handle:
        for name, episode, value in report.series_rows():
            handle.write(
                json.dumps({"series": name, "episode": episode, "value": value}, sort_keys=True)
                + "\n"
            )


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def _write_trace_jsonl(path: Path, traces) -> None:
    with path.open("w") as handle:
        for trace in traces:
            record = {
                "episode": trace.episode,
                "row_actions": trace.row_actions.tolist(),
                "col_actions": trace.col_actions.tolist(),
                "rewards": trace.rewards.tolist(),
                "true_value": trace.true_value,
                "learner_strategy": _jsonable(trace.learner_strategy),
                "opponent_strategy": _jsonable(trace.opponent_strategy),
                "theta_hat": _jsonable(trace.theta_hat),
                "beta": trace.beta,
                "theta_error": trace.theta_error,
                "metrics": _jsonable(trace.metrics),
                "diagnostics": _jsonable(trace.diagnostics),
            }
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def aggregate_series(reports) -> dict[str, np.ndarray]:
    """Stack (series, episode) -> values across trials into mean and stderr."""
    table: dict[str, dict[int, list[float]]] = {}
    for report in reports:
        for name, episode, value in report.series_rows():
            table.setdefault(name, {}).setdefault(episode, []).append(value)
    out = {}
    for name, by_episode in table.items():
        episodes = sorted(by_episode)
        values = np.array([by_episode[k] for k in episodes])
        mean = values.mean(axis=1)
        if values.shape[1] > 1:
            stderr = values.std(axis=1, ddof=1) / math.sqrt(values.shape[1])
        else:
            stderr = np.zeros(len(episodes))
        out[name] = np.column_stack([episodes, mean, stderr])
    return out


def _write_aggregate_csv(path: Path, aggregated: dict[str, np.ndarray]) -> None:
    lines = ["series,episode,mean,stderr"]
    for name in sorted(aggregated):
        for episode, mean, stderr in aggregated[name]:
            lines.append(f"{name},{int(episode)},{_fmt(float(mean))},{_fmt(float(stderr))}")
    path.write_text("\n".join(lines) + "\n")


def run_experiment(config: ExperimentConfig, out_dir, workers: int = 1) -> RunManifest:
    """Run all trials, persist per-trial and aggregate outputs, return the manifest."""
    start = time.time()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_trial, config, n): n for n in range(config.trials)}
            by_trial = {futures[f]: f.result() for f in concurrent.futures.as_completed(futures)}
        trial_results = [by_trial[n] for n in range(config.trials)]
    else:
        trial_results = [run_trial(config, n) for n in range(config.trials)]

    write_metrics = _write_metrics_csv if config.output_format == "csv" else _write_metrics_jsonl
    suffix = "csv" if config.output_format == "csv" else "jsonl"
    for n, results in enumerate(trial_results):
        trial_root = out / "trials" / f"trial_{n:03d}"
        trial_root.mkdir(parents=True, exist_ok=True)
        (trial_root / "env.json").write_text(
            json.dumps(results["environment"], sort_keys=True) + "\n"
        )
        for name, payload in results["learners"].items():
            learner_dir = trial_root / name
            learner_dir.mkdir(exist_ok=True)
            write_metrics(learner_dir / f"metrics.{suffix}", payload["report"])
            _write_trace_jsonl(learner_dir / "trace.jsonl", payload["traces"])

    aggregate_dir = out / "aggregate"
    aggregate_dir.mkdir(exist_ok=True)
    for spec in config.learners:
        reports = [results["learners"][spec.name]["report"] for results in trial_results]
        _write_aggregate_csv(aggregate_dir / f"{spec.name}.csv", aggregate_series(reports))

    manifest = RunManifest(
        config=config_to_dict(config),
        trial_seeds=[hash_seed(config.master_seed, n) for n in range(config.trials)],
        version=__version__,
        created_at=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(start)),
        elapsed_seconds=time.time() - start,
    )
    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return manifest


def hash_seed(master_seed: int, trial: int) -> int:
    """Stable integer fingerprint of a trial's environment seed sequence."""
    return int(np.random.SeedSequence([master_seed, trial, 0]).generate_state(1)[0])


def replay_manifest(manifest_path, out_dir, workers: int = 1) -> RunManifest:
    with open(manifest_path) as handle:
        manifest = json.load(handle)
    config = config_from_dict(manifest["config"])
    return run_experiment(config, out_dir, workers=workers)


# ---------------------------------------------------------------------------
# Plot data


def _read_metrics_csv(path: Path):
    rows = []
    with path.open() as handle:
        header = handle.readline().strip().split(",")
        assert header == ["series", "episode", "value"]
        for line in handle:
            name, episode, value = line.rstrip("\n").split(",")
            rows.append((name, int(episode), float(value)))
    return rows


def _read_metrics_jsonl(path: Path):
    rows = []
    with path.open() as handle:
        for line in handle:
            record = json.loads(line)
            rows.append((record["series"], record["episode"], record["value"]))
    return rows


def emit_plot_data(run_dir, out_dir=None, series: list[str] | None = None) -> list[Path]:
    """Recompute tidy (series, episode, mean, stderr) tables from the
    per-trial metric files of a completed run."""
    run = Path(run_dir)
    trials_dir = run / "trials"
    if not trials_dir.is_dir():
        raise FileNotFoundError(f"no trials directory under {run}")
    out = Path(out_dir) if out_dir is not None else run / "plot"
    out.mkdir(parents=True, exist_ok=True)

    by_learner: dict[str, list] = {}
    for trial_dir in sorted(trials_dir.iterdir()):
        for learner_dir in sorted(p for p in trial_dir.iterdir() if p.is_dir()):
            csv_path = learner_dir / "metrics.csv"
            jsonl_path = learner_dir / "metrics.jsonl"
            if csv_path.exists():
                rows = _read_metrics_csv(csv_path)
            elif jsonl_path.exists():
                rows = _read_metrics_jsonl(jsonl_path)
            else:
                raise FileNotFoundError(f"no metrics file in {learner_dir}")
            by_learner.setdefault(learner_dir.name, []).append(rows)

    written = []
    for learner, trials in sorted(by_learner.items()):
        table: dict[str, dict[int, list[float]]] = {}
        for rows in trials:
            for name, episode, value in rows:
                table.setdefault(name, {}).setdefault(episode, []).append(value)
        if series is not None:
            missing = sorted(set(series) - set(table))
            if missing:
                raise KeyError(f"series not present in run outputs: {', '.join(missing)}")
            table = {name: table[name] for name in series}
        if not table:
            raise KeyError("no series selected")
        lines = ["series,episode,mean,stderr"]
        for name in sorted(table):
            for episode in sorted(table[name]):
                values = np.array(table[name][episode])
                mean = float(values.mean())
                stderr = (
                    float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
                )
                lines.append(f"{name},{episode},{_fmt(mean)},{_fmt(stderr)}")
        path = out / f"{learner}.csv"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    return written
