"""Experiment runner: pretrain, roll a gating variant, evaluate, report.

One JSON config describes a sweep. Per seed the pipeline is: collect offline
demonstrations, split train/held-out, behavior-clone the policy, resolve the
switching thresholds (fixed fractions or quantile calibration), fit the
classifier where the algorithm needs one, then alternate online epochs with
refits, running supervisor-free test rollouts after every epoch. Artifacts
land under the output directory, one subdirectory per seed plus aggregates.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from .envs import make_env, max_action_discrepancy, ENV_IDS
from .meta import (
    AnalyticSupervisor,
    EpisodeLog,
    LazyConfig,
    Mode,
    StepRecord,
    collect_offline,
    derive_seed,
    run_online_epoch,
    run_test_rollouts,
    _Counters,
)
from .metrics import (
    SCHEMA_VERSION,
    cutoff_latency,
    load_summary,
    summarize,
    write_epochs_csv,
    write_summary_json,
)
from .policy import (
    Dataset,
    LabeledPair,
    RobotPolicy,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    split_dataset,
    train_bc,
)
from .safety import DiscrepancyClassifier, ThresholdPair, calibrate_tau_sup, train_classifier

ALGORITHMS = ("bc", "dagger", "safedagger", "lazydagger", "safedagger-exec", "lazydagger-exec")
EXEC_VARIANTS = ("safedagger-exec", "lazydagger-exec")
GATED = ("safedagger", "lazydagger", "safedagger-exec", "lazydagger-exec")

# seed-derivation stage tags; online epochs use their own 1-based index
_PRETRAIN = 900
_OFFLINE = 901
_SPLIT = 902
_INIT = 903
_TEST = 904


@dataclass
class ExperimentConfig:
    environment: str = "pointgoal2d"
    env_params: dict = field(default_factory=dict)
    algorithm: str = "lazydagger"
    offline_pairs: int = 4000
    bc_pretrain_epochs: int = 5
    epochs: int = 10
    steps_per_epoch: int = 1000
    tau_sup: float | str = "calibrate:0.2"  # fraction of the action diameter
    tau_auto: float | str = "ratio:0.5"  # fraction, or ratio of resolved tau_sup
    sigma2: float = 0.05
    latency_grid: list[float] = field(default_factory=lambda: [0.0, 1.0, 5.0, 10.0])
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    burden_budget: float | None = None  # reporting only
    out_dir: str = "runs/experiment"
    split_fraction: float = 0.7
    test_rollouts: int = 10
    policy_hidden: list[int] = field(default_factory=lambda: [64, 64])
    classifier_hidden: list[int] = field(default_factory=lambda: [32, 32])
    policy_train: TrainConfig = field(default_factory=TrainConfig)
    classifier_train: TrainConfig = field(default_factory=TrainConfig)
    budget_match_run: str | None = None  # bc only: lazydagger run dir to match

    def to_json_dict(self) -> dict:
        out = asdict(self)
        return out


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid config:\n  " + "\n  ".join(errors))


def _parse_train(block: dict, path: str, errors: list[str]) -> TrainConfig:
    cfg = TrainConfig()
    known = {"learning_rate", "batch_size", "gradient_steps_per_epoch", "l2_coefficient", "optimizer"}
    for key, value in block.items():
        if key not in known:
            errors.append(f"{path}.{key}: unknown field")
            continue
        setattr(cfg, key, value)
    if not isinstance(cfg.learning_rate, (int, float)) or cfg.learning_rate < 0:
        errors.append(f"{path}.learning_rate: must be a nonnegative number")
    if not isinstance(cfg.batch_size, int) or cfg.batch_size < 1:
        errors.append(f"{path}.batch_size: must be a positive integer")
    if not isinstance(cfg.gradient_steps_per_epoch, int) or cfg.gradient_steps_per_epoch < 0:
        errors.append(f"{path}.gradient_steps_per_epoch: must be a nonnegative integer")
    if cfg.optimizer not in ("adam", "sgd"):
        errors.append(f"{path}.optimizer: must be 'adam' or 'sgd'")
    return cfg


def _parse_threshold(value, path: str, prefix: str, errors: list[str]):
    if isinstance(value, (int, float)):
        if not 0.0 <= float(value) <= 1.0:
            errors.append(f"{path}: fraction must lie in [0, 1]")
        return float(value)
    if isinstance(value, str) and value.startswith(prefix):
        try:
            arg = float(value.split(":", 1)[1])
        except (IndexError, ValueError):
            errors.append(f"{path}: malformed, expected '{prefix}<number>'")
            return value
        if not 0.0 < arg <= 1.0:
            errors.append(f"{path}: argument must lie in (0, 1]")
        return value
    errors.append(f"{path}: expected a fraction or '{prefix}<number>'")
    return value


def validate_config(source: str | dict) -> ExperimentConfig:
    """Parse and validate a config document. Raises ConfigError listing every
    violated rule with its field path; returns the config with all defaults
    applied otherwise."""
    if isinstance(source, str):
        try:
            raw = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"<document>: not valid JSON ({exc})"]) from exc
    else:
        raw = dict(source)
    if not isinstance(raw, dict):
        raise ConfigError(["<document>: top level must be an object"])

    errors: list[str] = []
    cfg = ExperimentConfig()
    known = set(cfg.__dataclass_fields__)
    for key in raw:
        if key not in known:
            errors.append(f"{key}: unknown field")

    def take(name, check, message):
        if name in raw:
            value = raw[name]
            if check(value):
                setattr(cfg, name, value)
            else:
                errors.append(f"{name}: {message}")

    take("environment", lambda v: v in ENV_IDS, f"must be one of {ENV_IDS}")
    take("env_params", lambda v: isinstance(v, dict), "must be an object")
    take("algorithm", lambda v: v in ALGORITHMS, f"must be one of {ALGORITHMS}")
    take("offline_pairs", lambda v: isinstance(v, int) and v >= 2, "must be an integer >= 2")
    take("bc_pretrain_epochs", lambda v: isinstance(v, int) and v >= 0, "must be an integer >= 0")
    take("epochs", lambda v: isinstance(v, int) and v >= 0, "must be an integer >= 0")
    take("steps_per_epoch", lambda v: isinstance(v, int) and v >= 1, "must be a positive integer")
    take("sigma2", lambda v: isinstance(v, (int, float)) and v >= 0, "must be a nonnegative number")
    take(
        "latency_grid",
        lambda v: isinstance(v, list) and v and all(isinstance(x, (int, float)) and x >= 0 for x in v),
        "must be a nonempty list of nonnegative numbers",
    )
    take(
        "seeds",
        lambda v: isinstance(v, list) and v and all(isinstance(x, int) for x in v),
        "must be a nonempty list of integers",
    )
    take(
        "burden_budget",
        lambda v: v is None or (isinstance(v, (int, float)) and v >= 0),
        "must be null or a nonnegative number",
    )
    take("out_dir", lambda v: isinstance(v, str) and v, "must be a nonempty string")
    take(
        "split_fraction",
        lambda v: isinstance(v, (int, float)) and 0.0 < v < 1.0,
        "must lie strictly between 0 and 1",
    )
    take("test_rollouts", lambda v: isinstance(v, int) and v >= 0, "must be an integer >= 0")
    for name in ("policy_hidden", "classifier_hidden"):
        take(name, lambda v: isinstance(v, list) and all(isinstance(x, int) and x > 0 for x in v),
             "must be a list of positive integers")
    take("budget_match_run", lambda v: v is None or isinstance(v, str), "must be null or a path string")

    if "tau_sup" in raw:
        cfg.tau_sup = _parse_threshold(raw["tau_sup"], "tau_sup", "calibrate:", errors)
    if "tau_auto" in raw:
        cfg.tau_auto = _parse_threshold(raw["tau_auto"], "tau_auto", "ratio:", errors)
    if isinstance(cfg.tau_sup, float) and isinstance(cfg.tau_auto, float):
        if cfg.tau_auto > cfg.tau_sup:
            errors.append("tau_auto: must not exceed tau_sup (hysteresis would invert)")
    if "policy_train" in raw:
        if isinstance(raw["policy_train"], dict):
            cfg.policy_train = _parse_train(raw["policy_train"], "policy_train", errors)
        else:
            errors.append("policy_train: must be an object")
    if "classifier_train" in raw:
        if isinstance(raw["classifier_train"], dict):
            cfg.classifier_train = _parse_train(raw["classifier_train"], "classifier_train", errors)
        else:
            errors.append("classifier_train: must be an object")

    if cfg.algorithm in EXEC_VARIANTS:
        if isinstance(cfg.sigma2, (int, float)) and cfg.sigma2 > 0:
            errors.append("sigma2: execution variants replay without noise; set sigma2 to 0")
    if cfg.budget_match_run is not None and cfg.algorithm != "bc":
        errors.append("budget_match_run: only meaningful for algorithm 'bc'")

    if errors:
        raise ConfigError(sorted(errors))
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(cfg.to_json_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


# -- episode log serialization ----------------------------------------------


def _record_to_json(r: StepRecord) -> dict:
    return {
        "t": r.t,
        "mode": r.mode.value,
        "f": r.f_prediction,
        "executed": [float(x) for x in np.asarray(r.executed_action)],
        "supervisor": None if r.supervisor_action is None else [float(x) for x in np.asarray(r.supervisor_action)],
        "d": r.discrepancy,
        "wall_time": r.wall_time,
    }


def _record_from_json(d: dict) -> StepRecord:
    return StepRecord(
        t=d["t"],
        mode=Mode(d["mode"]),
        f_prediction=d["f"],
        executed_action=np.asarray(d["executed"], dtype=float),
        supervisor_action=None if d["supervisor"] is None else np.asarray(d["supervisor"], dtype=float),
        discrepancy=d["d"],
        wall_time=d.get("wall_time", 0.0),
    )


def append_episode_logs(path: Path, logs: list[EpisodeLog]) -> None:
    with path.open("a") as fh:
        for log in logs:
            fh.write(json.dumps({
                "epoch": log.epoch,
                "episode": log.episode,
                "success": log.success,
                "truncated": log.truncated,
                "ret": log.ret,
                "records": [_record_to_json(r) for r in log.records],
            }) + "\n")


def load_episode_logs(path: str | Path) -> list[EpisodeLog]:
    logs = []
    for line in Path(path).read_text().splitlines():
        d = json.loads(line)
        logs.append(EpisodeLog(
            d["epoch"], d["episode"], [_record_from_json(r) for r in d["records"]],
            d["success"], d["truncated"], d["ret"],
        ))
    return logs


def _save_dataset(path: Path, data: Dataset) -> None:
    states, actions = data.as_arrays()
    np.savez(path, states=states, actions=actions, tags=np.array(data.tags))


def _load_dataset(path: Path) -> Dataset:
    blob = np.load(path, allow_pickle=False)
    pairs = [LabeledPair(s, a) for s, a in zip(blob["states"], blob["actions"])]
    return Dataset(pairs, [str(t) for t in blob["tags"]])


# -- per-seed pipeline --------------------------------------------------------


@dataclass
class SeedRun:
    """Everything run_experiment tracks for one seed."""

    seed: int
    directory: Path
    thresholds_frac: dict
    thresholds_abs: dict
    budgets: dict
    rows: list[dict]
    summary_path: Path


def _mean_online_pairs(run_dir: str | Path) -> float:
    summary = load_summary(Path(run_dir) / "summary.json")
    per_seed = summary.get("per_seed")
    if not per_seed:
        raise ValueError(f"{run_dir}: summary has no per-seed budgets to match against")
    return float(np.mean([s["budgets"]["online_pairs"] for s in per_seed]))


def _resolve_thresholds(cfg: ExperimentConfig, policy: RobotPolicy, offline: Dataset, env) -> tuple[ThresholdPair, dict]:
    diameter = max_action_discrepancy(env.spec)
    if isinstance(cfg.tau_sup, str):
        target = float(cfg.tau_sup.split(":", 1)[1])
        tau_sup_abs = calibrate_tau_sup(policy, offline, target)
        sup_how = {"calibrated": True, "target_fraction": target}
    else:
        tau_sup_abs = cfg.tau_sup * diameter
        sup_how = {"calibrated": False}
    if isinstance(cfg.tau_auto, str):
        ratio = float(cfg.tau_auto.split(":", 1)[1])
        tau_auto_abs = ratio * tau_sup_abs
        auto_how = {"ratio_of_tau_sup": ratio}
    else:
        tau_auto_abs = cfg.tau_auto * diameter
        auto_how = {"ratio_of_tau_sup": None}
    if tau_auto_abs > tau_sup_abs:
        raise ConfigError([
            f"tau_auto: resolves to {tau_auto_abs:.6g}, above tau_sup {tau_sup_abs:.6g}"
        ])
    pair = ThresholdPair(tau_sup_abs, tau_auto_abs)
    info = {
        "tau_sup_abs": tau_sup_abs,
        "tau_auto_abs": tau_auto_abs,
        "tau_sup_fraction_of_diameter": tau_sup_abs / diameter,
        "tau_auto_fraction_of_diameter": tau_auto_abs / diameter,
        "action_diameter": diameter,
        **sup_how,
        **auto_how,
    }
    return pair, info


def run_single_seed(
    cfg: ExperimentConfig, seed: int, seed_dir: Path, supervisor_factory=None, resume: bool = False
) -> SeedRun:
    """Run the full pipeline for one seed. With ``resume=True`` and a state
    file present, restarts after the last completed epoch."""
    seed_dir.mkdir(parents=True, exist_ok=True)
    ckpt_dir = seed_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    state_path = seed_dir / "state.json"
    episodes_path = seed_dir / "episodes.jsonl"
    test_episodes_path = seed_dir / "test_episodes.jsonl"

    env = make_env(cfg.environment, **cfg.env_params)
    supervisor = supervisor_factory(env) if supervisor_factory else AnalyticSupervisor(env)
    is_exec = cfg.algorithm in EXEC_VARIANTS
    gated = cfg.algorithm in GATED

    state = None
    if resume and state_path.exists():
        state = json.loads(state_path.read_text())

    if state is None:
        # fresh start: data, pretraining, thresholds
        extra_pairs = 0
        if cfg.algorithm == "bc" and cfg.budget_match_run:
            extra_pairs = int(round(_mean_online_pairs(cfg.budget_match_run)))
        offline = collect_offline(env, supervisor, cfg.offline_pairs, derive_seed(seed, _OFFLINE, 0))
        data, data_safe = split_dataset(offline, cfg.split_fraction, derive_seed(seed, _SPLIT, 0))
        if extra_pairs:
            topup = collect_offline(env, supervisor, extra_pairs, derive_seed(seed, _OFFLINE, 1))
            for pair in topup.pairs:
                data.append(pair, "offline-topup")

        policy = RobotPolicy(
            [env.spec.state_dim, *cfg.policy_hidden, env.spec.action_dim],
            env.spec.low, env.spec.high, seed=derive_seed(seed, _INIT, 0),
        )
        for e in range(cfg.bc_pretrain_epochs):
            train_bc(policy, data, cfg.policy_train, derive_seed(seed, _PRETRAIN + e, 1))

        thresholds, thr_info = _resolve_thresholds(cfg, policy, offline, env)
        classifier = None
        if gated:
            classifier = DiscrepancyClassifier(
                [env.spec.state_dim, *cfg.classifier_hidden, 1], seed=derive_seed(seed, _INIT, 1)
            )
            train_classifier(
                classifier, data.merged_with(data_safe), policy, thresholds,
                cfg.classifier_train, derive_seed(seed, _PRETRAIN, 2),
            )

        save_checkpoint(policy, ckpt_dir / "policy_pretrain.json")
        if classifier is not None:
            save_checkpoint(classifier, ckpt_dir / "classifier_pretrain.json")
        _save_dataset(seed_dir / "dataset.npz", data)
        _save_dataset(seed_dir / "dataset_safe.npz", data_safe)
        episodes_path.write_text("")
        test_episodes_path.write_text("")

        rate, ret, test_logs = run_test_rollouts(env, policy, cfg.test_rollouts, derive_seed(seed, _TEST, 0))
        append_episode_logs(test_episodes_path, test_logs)
        budgets = {
            "offline_pairs": cfg.offline_pairs,
            "extra_offline_pairs": extra_pairs,
            "online_pairs": 0,
        }
        rows = [{
            "epoch": 0, "test_success_rate": rate, "mean_test_return": ret,
            "C_total": 0, "D_total": 0,
        }]
        counters = {"switches": 0, "supervisor_actions": 0}
        completed = 0
        state = {
            "completed_epoch": completed,
            "rows": rows,
            "counters": counters,
            "thresholds": thr_info,
            "budgets": budgets,
        }
        state_path.write_text(json.dumps(state, indent=2))
        write_epochs_csv(seed_dir / "epochs.csv", rows, cfg.latency_grid)
    else:
        data = _load_dataset(seed_dir / "dataset.npz")
        data_safe = _load_dataset(seed_dir / "dataset_safe.npz")
        completed = state["completed_epoch"]
        rows = state["rows"]
        thr_info = state["thresholds"]
        budgets = state["budgets"]
        thresholds = ThresholdPair(thr_info["tau_sup_abs"], thr_info["tau_auto_abs"])
        tag = "pretrain" if completed == 0 else f"epoch_{completed:03d}"
        policy = load_checkpoint(ckpt_dir / f"policy_{tag}.json")
        classifier = None
        if gated:
            classifier = load_checkpoint(ckpt_dir / f"classifier_{tag}.json")

    if hasattr(supervisor, "set_thresholds"):
        supervisor.set_thresholds(thresholds)

    counters = _Counters()
    counters.switches = state["counters"]["switches"]
    counters.supervisor_actions = state["counters"]["supervisor_actions"]

    total_epochs = 0 if cfg.algorithm == "bc" else cfg.epochs
    variant = {"lazydagger": "lazy", "lazydagger-exec": "lazy",
               "safedagger": "safe", "safedagger-exec": "safe",
               "dagger": "dagger"}.get(cfg.algorithm)
    run_cfg = LazyConfig(
        epochs=cfg.epochs,
        steps_per_epoch=cfg.steps_per_epoch,
        thresholds=thresholds if gated else None,
        sigma2=0.0 if is_exec else cfg.sigma2,
        update_policy=not is_exec,
        inject_noise=(not is_exec) and cfg.algorithm == "lazydagger",
    )

    if cfg.algorithm == "bc":
        # extra offline passes so total training effort matches interactive
        # runs; each pass gets the same per-epoch evaluation row
        for epoch in range(completed + 1, cfg.epochs + 1):
            train_bc(policy, data, cfg.policy_train, derive_seed(seed, epoch, 1))
            save_checkpoint(policy, ckpt_dir / f"policy_epoch_{epoch:03d}.json")
            rate, ret, test_logs = run_test_rollouts(env, policy, cfg.test_rollouts, derive_seed(seed, _TEST, epoch))
            append_episode_logs(test_episodes_path, test_logs)
            rows.append({
                "epoch": epoch, "test_success_rate": rate, "mean_test_return": ret,
                "C_total": 0, "D_total": 0,
            })
            state.update(completed_epoch=epoch, rows=rows)
            state_path.write_text(json.dumps(state, indent=2))
            write_epochs_csv(seed_dir / "epochs.csv", rows, cfg.latency_grid)

    for epoch in range(completed + 1, total_epochs + 1):
        logs = run_online_epoch(
            env, policy, classifier, supervisor, data, run_cfg,
            epoch, derive_seed(seed, epoch, 0), variant, counters,
        )
        if run_cfg.update_policy:
            train_bc(policy, data, cfg.policy_train, derive_seed(seed, epoch, 1))
            if classifier is not None:
                train_classifier(
                    classifier, data.merged_with(data_safe), policy, thresholds,
                    cfg.classifier_train, derive_seed(seed, epoch, 2),
                )
        append_episode_logs(episodes_path, logs)
        save_checkpoint(policy, ckpt_dir / f"policy_epoch_{epoch:03d}.json")
        if classifier is not None:
            save_checkpoint(classifier, ckpt_dir / f"classifier_epoch_{epoch:03d}.json")
        _save_dataset(seed_dir / "dataset.npz", data)

        rate, ret, test_logs = run_test_rollouts(env, policy, cfg.test_rollouts, derive_seed(seed, _TEST, epoch))
        append_episode_logs(test_episodes_path, test_logs)
        rows.append({
            "epoch": epoch, "test_success_rate": rate, "mean_test_return": ret,
            "C_total": counters.switches, "D_total": counters.supervisor_actions,
        })
        state.update(
            completed_epoch=epoch,
            rows=rows,
            counters=counters.as_dict(),
            budgets={**budgets, "online_pairs": data.count_tag_prefix("online-")},
        )
        state_path.write_text(json.dumps(state, indent=2))
        write_epochs_csv(seed_dir / "epochs.csv", rows, cfg.latency_grid)

    budgets = dict(state["budgets"])
    train_logs = load_episode_logs(episodes_path) if episodes_path.exists() else []
    # a crash between the episode append and the state write can leave one
    # duplicated (identical) epoch; keep the first copy of each episode
    seen: set[tuple[int, int]] = set()
    deduped = []
    for log in train_logs:
        key = (log.epoch, log.episode)
        if key not in seen:
            seen.add(key)
            deduped.append(log)
    report = summarize(deduped)
    test_logs_all = load_episode_logs(test_episodes_path)
    test_report = summarize(test_logs_all)
    if test_report.supervisor_actions:
        raise RuntimeError(f"seed {seed}: test rollouts contain supervisor steps")
    summary_path = write_summary_json(
        seed_dir / "summary.json", report, cfg.latency_grid,
        run_info={
            "seed": seed,
            "algorithm": cfg.algorithm,
            "environment": cfg.environment,
            "thresholds": thr_info,
            "budgets": budgets,
            "final_test_success_rate": rows[-1]["test_success_rate"],
            "final_mean_test_return": rows[-1]["mean_test_return"],
        },
    )
    return SeedRun(seed, seed_dir, thr_info, thr_info, budgets, rows, summary_path)


def run_experiment(cfg: ExperimentConfig, resume: bool = False) -> Path:
    """Run every seed, aggregate, and write the run manifest. Returns the
    output directory."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    seed_runs = [
        run_single_seed(cfg, seed, out / f"seed_{seed}", resume=resume) for seed in cfg.seeds
    ]

    # aggregate per-epoch rows (mean across seeds, same epoch axis)
    epochs = sorted({row["epoch"] for run in seed_runs for row in run.rows})
    agg_rows = []
    for epoch in epochs:
        rows = [row for run in seed_runs for row in run.rows if row["epoch"] == epoch]
        agg_rows.append({
            "epoch": epoch,
            "test_success_rate": float(np.mean([r["test_success_rate"] for r in rows])),
            "mean_test_return": float(np.mean([r["mean_test_return"] for r in rows])),
            "C_total": float(np.mean([r["C_total"] for r in rows])),
            "D_total": float(np.mean([r["D_total"] for r in rows])),
        })
    write_epochs_csv(out / "aggregate.csv", agg_rows, cfg.latency_grid)

    per_seed_summaries = [load_summary(run.summary_path) for run in seed_runs]
    totals = {
        "switches": int(sum(s["totals"]["switches"] for s in per_seed_summaries)),
        "supervisor_actions": int(sum(s["totals"]["supervisor_actions"] for s in per_seed_summaries)),
        "interventions": int(sum(s["totals"]["interventions"] for s in per_seed_summaries)),
        "episodes": int(sum(s["totals"]["episodes"] for s in per_seed_summaries)),
        "successes": int(sum(s["totals"]["successes"] for s in per_seed_summaries)),
    }
    lengths = [x for s in per_seed_summaries for x in s["intervention_lengths"]]
    aggregate = {
        "schema_version": SCHEMA_VERSION,
        "totals": {**totals, "success_rate": totals["successes"] / totals["episodes"] if totals["episodes"] else 0.0},
        "per_episode_means": {
            "switches": totals["switches"] / totals["episodes"] if totals["episodes"] else 0.0,
            "supervisor_actions": totals["supervisor_actions"] / totals["episodes"] if totals["episodes"] else 0.0,
        },
        "intervention_lengths": lengths,
        "mean_intervention_length": float(np.mean(lengths)) if lengths else 0.0,
        "per_epoch": agg_rows,
        "burden": {f"{l:g}": l * totals["switches"] + totals["supervisor_actions"] for l in cfg.latency_grid},
        "run": {
            "algorithm": cfg.algorithm,
            "environment": cfg.environment,
            "seeds": list(cfg.seeds),
            "mean_final_test_success_rate": float(np.mean([r.rows[-1]["test_success_rate"] for r in seed_runs])),
        },
        "per_seed": [
            {
                "seed": run.seed,
                "thresholds": run.thresholds_abs,
                "budgets": run.budgets,
                "totals": s["totals"],
                "final_test_success_rate": run.rows[-1]["test_success_rate"],
            }
            for run, s in zip(seed_runs, per_seed_summaries)
        ],
    }
    (out / "summary.json").write_text(json.dumps(aggregate, indent=2, sort_keys=True) + "\n")

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_json_dict(),
        "config_hash": config_hash(cfg),
        "package_version": __version__,
        "seeds": list(cfg.seeds),
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(started)),
        "wall_clock_s": time.time() - started,
        "resolved": {
            "thresholds_per_seed": {str(r.seed): r.thresholds_abs for r in seed_runs},
            "budgets_per_seed": {str(r.seed): r.budgets for r in seed_runs},
        },
        "burden_budget": cfg.burden_budget,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def compare(run_dir_a: str | Path, run_dir_b: str | Path, latency_grid: list[float]) -> dict:
    """Burden comparison of two completed runs. Run A plays the
    fewer-switches role in the cutoff-latency computation: the reported
    cutoff is the latency above which A is strictly cheaper than B."""
    sum_a = load_summary(Path(run_dir_a) / "summary.json")
    sum_b = load_summary(Path(run_dir_b) / "summary.json")
    a = SimpleNamespace(switches=sum_a["totals"]["switches"], supervisor_actions=sum_a["totals"]["supervisor_actions"])
    b = SimpleNamespace(switches=sum_b["totals"]["switches"], supervisor_actions=sum_b["totals"]["supervisor_actions"])
    cutoff = cutoff_latency(a, b)
    table = [
        {
            "L": latency,
            "a": latency * a.switches + a.supervisor_actions,
            "b": latency * b.switches + b.supervisor_actions,
        }
        for latency in latency_grid
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "a": str(run_dir_a),
        "b": str(run_dir_b),
        "switches": {"a": a.switches, "b": b.switches,
                     "ratio": a.switches / b.switches if b.switches else None},
        "supervisor_actions": {"a": a.supervisor_actions, "b": b.supervisor_actions,
                               "ratio": a.supervisor_actions / b.supervisor_actions if b.supervisor_actions else None},
        "burden_table": table,
        "cutoff_latency": {"value": cutoff.value, "defined": cutoff.defined, "reason": cutoff.reason},
    }
