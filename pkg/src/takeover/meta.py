"""Control handoff loops: who acts at each step, and what gets recorded.

Four variants share one vocabulary. Behavior cloning never rolls out during
training. DAgger lets the robot act while the supervisor labels every state.
The classifier-gated variant hands control over whenever the safety net
predicts trouble and back the moment it does not. The hysteresis-gated
variant enters supervisor control on the classifier but stays there until
the measured robot/supervisor discrepancy falls below a lower exit
threshold, trading longer interventions for far fewer handoffs; executed
supervisor actions can carry injected Gaussian noise so recovery data covers
a neighborhood of the supervisor's trajectory, while clean actions enter the
dataset.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .policy import Dataset, LabeledPair, RobotPolicy, TrainConfig, train_bc
from .safety import DiscrepancyClassifier, ThresholdPair, discrepancy, train_classifier

Array = np.ndarray


class Mode(Enum):
    AUTONOMOUS = "autonomous"
    SUPERVISOR = "supervisor"


@dataclass
class StepRecord:
    """One executed step. ``mode`` is who controlled the step;
    ``supervisor_action`` and ``discrepancy`` are present exactly when the
    supervisor did. ``f_prediction`` is present when the classifier was
    consulted this step."""

    t: int
    mode: Mode
    f_prediction: float | None
    executed_action: Array
    supervisor_action: Array | None
    discrepancy: float | None
    wall_time: float = 0.0


@dataclass
class EpisodeLog:
    epoch: int
    episode: int
    records: list[StepRecord]
    success: bool
    truncated: bool = False
    ret: float = 0.0

    @property
    def modes(self) -> list[Mode]:
        return [r.mode for r in self.records]


@dataclass
class StepContext:
    """What a supervisor handle gets to see alongside the state."""

    t: int
    episode: int
    epoch: int
    robot_action: Array


class AnalyticSupervisor:
    """Synchronous supervisor backed by the environment's control law."""

    kind = "analytic"

    def __init__(self, env):
        self.env = env

    def action(self, state: Array, ctx: StepContext) -> Array:
        return self.env.supervisor_action(state)

    def notify_step(self, record: StepRecord, counters: dict) -> None:
        pass

    def notify_episode_end(self, counters: dict) -> None:
        pass


@dataclass
class LazyConfig:
    """Rollout budget and gating knobs shared by the online variants.

    ``thresholds`` are absolute action distances here (configs speak in
    fractions of the action-box diameter; the harness converts). Execution
    variants freeze learning: ``update_policy=False`` and
    ``inject_noise=False``.
    """

    epochs: int
    steps_per_epoch: int
    thresholds: ThresholdPair | None = None
    sigma2: float = 0.0
    update_policy: bool = True
    inject_noise: bool = True
    offline_pairs: int | None = None  # behavior-cloning budget top-up target

    def __post_init__(self):
        if self.epochs < 0 or self.steps_per_epoch <= 0:
            raise ValueError("epochs must be >= 0 and steps_per_epoch positive")
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be nonnegative, got {self.sigma2}")


def derive_seed(*parts: int) -> int:
    """Stable child seed from integer parts; keeps every stage independently
    reproducible without threading generator state through checkpoints."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def safedagger_select(f_prediction: float) -> Mode:
    """Autonomous only when the classifier is confidently safe; the 0.5
    boundary goes to the supervisor."""
    return Mode.AUTONOMOUS if f_prediction < 0.5 else Mode.SUPERVISOR


def inject_noise(
    action: Array,
    sigma2: float,
    rng: np.random.Generator,
    a_low: Array | None = None,
    a_high: Array | None = None,
) -> Array:
    """Add isotropic Gaussian noise with variance ``sigma2`` per coordinate,
    then clip to bounds when given. ``sigma2=0`` returns the action unchanged."""
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    a = np.asarray(action, dtype=float)
    if sigma2 == 0.0:
        return a.copy()
    noisy = a + rng.normal(0.0, np.sqrt(sigma2), size=a.shape)
    if a_low is not None:
        noisy = np.clip(noisy, a_low, a_high)
    return noisy


def lazydagger_step(
    mode: Mode,
    state: Array,
    policy: RobotPolicy,
    classifier: DiscrepancyClassifier,
    supervisor,
    config: LazyConfig,
    rng: np.random.Generator,
    *,
    t: int = 0,
    episode: int = 0,
    epoch: int = 0,
) -> tuple[Array, Mode, StepRecord, LabeledPair | None]:
    """One step of hysteresis gating.

    The robot's action is always computed. In supervisor mode, or when the
    classifier flags the state, the supervisor is queried, its clean action
    is stored for training, a possibly noise-perturbed copy is executed, and
    control returns to the robot only once the measured discrepancy drops
    below the exit threshold. Otherwise the robot acts; the classifier is
    consulted only in autonomous mode.
    """
    thresholds = config.thresholds
    if thresholds is None:
        raise ValueError("LazyConfig.thresholds is required for gated rollouts")
    robot_action = policy.forward(state)
    f_pred: float | None = None
    if mode is not Mode.SUPERVISOR:
        f_pred = classifier.predict(state)
    if mode is Mode.SUPERVISOR or f_pred >= 0.5:
        ctx = StepContext(t=t, episode=episode, epoch=epoch, robot_action=robot_action)
        sup_action = supervisor.action(state, ctx)
        pair = LabeledPair(np.array(state, dtype=float), np.array(sup_action, dtype=float))
        if config.inject_noise:
            executed = inject_noise(sup_action, config.sigma2, rng, policy.a_low, policy.a_high)
        else:
            executed = np.array(sup_action, dtype=float)
        d = discrepancy(robot_action, sup_action)
        next_mode = Mode.AUTONOMOUS if d < thresholds.tau_auto else Mode.SUPERVISOR
        record = StepRecord(t, Mode.SUPERVISOR, f_pred, executed, np.array(sup_action), d, time.time())
        return executed, next_mode, record, pair
    record = StepRecord(t, Mode.AUTONOMOUS, f_pred, robot_action, None, None, time.time())
    return robot_action, Mode.AUTONOMOUS, record, None


class SupervisorUnavailable(RuntimeError):
    """Supervisor went away mid-rollout; rerunnable from the last checkpoint."""


class _Counters:
    """Running switch/action totals, shared with supervisor handles so a
    remote console can mirror them exactly."""

    def __init__(self):
        self.switches = 0
        self.supervisor_actions = 0
        self._mode = Mode.AUTONOMOUS

    def observe(self, mode: Mode) -> None:
        if mode != self._mode:
            self.switches += 1
            self._mode = mode
        if mode is Mode.SUPERVISOR:
            self.supervisor_actions += 1

    def end_episode(self) -> None:
        if self._mode is Mode.SUPERVISOR:
            self.switches += 1
        self._mode = Mode.AUTONOMOUS

    def as_dict(self) -> dict:
        return {"switches": self.switches, "supervisor_actions": self.supervisor_actions}


def run_online_epoch(
    env,
    policy: RobotPolicy,
    classifier: DiscrepancyClassifier | None,
    supervisor,
    dataset: Dataset,
    config: LazyConfig,
    epoch: int,
    seed: int,
    variant: str,
    counters: _Counters | None = None,
) -> list[EpisodeLog]:
    """One epoch of ``steps_per_epoch`` environment steps under a gating
    variant ("lazy", "safe", or "dagger"). Episodes reset on done and the
    step budget keeps running; the epoch starts fresh in autonomous mode and
    a trailing unfinished episode is logged as truncated.
    """
    if variant not in ("lazy", "safe", "dagger"):
        raise ValueError(f"unknown variant {variant!r}")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    counters = counters if counters is not None else _Counters()

    logs: list[EpisodeLog] = []
    episode = 0
    mode = Mode.AUTONOMOUS
    state = env.reset(int(rng.integers(2**31)))
    records: list[StepRecord] = []
    ret = 0.0
    t_ep = 0

    def close_episode(success: bool, truncated: bool) -> None:
        nonlocal records, ret, t_ep, episode, mode
        counters.end_episode()
        supervisor.notify_episode_end(counters.as_dict())
        logs.append(EpisodeLog(epoch, episode, records, success, truncated, ret))
        records, ret, t_ep = [], 0.0, 0
        episode += 1
        mode = Mode.AUTONOMOUS

    for _ in range(config.steps_per_epoch):
        if variant == "lazy":
            executed, next_mode, record, pair = lazydagger_step(
                mode, state, policy, classifier, supervisor, config, rng,
                t=t_ep, episode=episode, epoch=epoch,
            )
        elif variant == "safe":
            robot_action = policy.forward(state)
            f_pred = classifier.predict(state)
            if safedagger_select(f_pred) is Mode.SUPERVISOR:
                ctx = StepContext(t=t_ep, episode=episode, epoch=epoch, robot_action=robot_action)
                sup_action = supervisor.action(state, ctx)
                pair = LabeledPair(np.array(state, dtype=float), np.array(sup_action, dtype=float))
                d = discrepancy(robot_action, sup_action)
                record = StepRecord(
                    t_ep, Mode.SUPERVISOR, f_pred, np.array(sup_action), np.array(sup_action), d, time.time()
                )
                executed, next_mode = np.array(sup_action, dtype=float), Mode.AUTONOMOUS
            else:
                record = StepRecord(t_ep, Mode.AUTONOMOUS, f_pred, robot_action, None, None, time.time())
                executed, next_mode, pair = robot_action, Mode.AUTONOMOUS, None
            # next_mode is advisory only; gating re-evaluates per step.
        else:  # dagger: robot drives, supervisor labels every state
            robot_action = policy.forward(state)
            ctx = StepContext(t=t_ep, episode=episode, epoch=epoch, robot_action=robot_action)
            sup_action = supervisor.action(state, ctx)
            pair = LabeledPair(np.array(state, dtype=float), np.array(sup_action, dtype=float))
            d = discrepancy(robot_action, sup_action)
            record = StepRecord(t_ep, Mode.SUPERVISOR, None, robot_action, np.array(sup_action), d, time.time())
            executed, next_mode = robot_action, Mode.SUPERVISOR

        if pair is not None:
            dataset.append(pair, f"online-epoch-{epoch}")
        counters.observe(record.mode)
        supervisor.notify_step(record, counters.as_dict())
        outcome = env.step(state, executed, t_ep)
        ret += outcome.info.get("reward", 0.0)
        records.append(record)
        if outcome.done:
            close_episode(bool(outcome.info.get("success", False)), truncated=False)
            state = env.reset(int(rng.integers(2**31)))
        else:
            state = outcome.next_state
            t_ep += 1
            mode = next_mode

    if records:
        close_episode(success=False, truncated=True)
    return logs


def collect_offline(env, supervisor, n_pairs: int, seed: int) -> Dataset:
    """Roll the supervisor's own controller to gather (state, action) pairs."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    data = Dataset()
    episode = 0
    while len(data) < n_pairs:
        state = env.reset(int(rng.integers(2**31)))
        t = 0
        while len(data) < n_pairs:
            ctx = StepContext(t=t, episode=episode, epoch=0, robot_action=None)
            action = supervisor.action(state, ctx)
            data.append(LabeledPair(np.array(state, dtype=float), np.array(action, dtype=float)), "offline")
            outcome = env.step(state, action, t)
            if outcome.done:
                break
            state = outcome.next_state
            t += 1
        episode += 1
    return data


def run_test_rollouts(env, policy: RobotPolicy, n_episodes: int, seed: int) -> tuple[float, float, list[EpisodeLog]]:
    """Policy-only evaluation episodes: no supervisor, no interventions."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    logs: list[EpisodeLog] = []
    successes = 0
    returns = []
    for episode in range(n_episodes):
        state = env.reset(int(rng.integers(2**31)))
        records: list[StepRecord] = []
        ret = 0.0
        success = False
        for t in range(env.spec.horizon):
            action = policy.forward(state)
            records.append(StepRecord(t, Mode.AUTONOMOUS, None, action, None, None, time.time()))
            outcome = env.step(state, action, t)
            ret += outcome.info.get("reward", 0.0)
            if outcome.done:
                success = bool(outcome.info.get("success", False))
                break
            state = outcome.next_state
        logs.append(EpisodeLog(0, episode, records, success, False, ret))
        successes += success
        returns.append(ret)
    n = max(n_episodes, 1)
    return successes / n, float(np.mean(returns)) if returns else 0.0, logs


def run_lazydagger(
    env,
    policy: RobotPolicy,
    classifier: DiscrepancyClassifier,
    supervisor,
    dataset: Dataset,
    dataset_safe: Dataset,
    config: LazyConfig,
    policy_train: TrainConfig,
    classifier_train: TrainConfig,
    seed: int,
) -> tuple[RobotPolicy, DiscrepancyClassifier, list[EpisodeLog]]:
    """Hysteresis-gated online training.

    Pretraining is the caller's job: ``policy`` and ``classifier`` arrive
    already fitted to the offline data. Online pairs land in ``dataset``;
    ``dataset_safe`` stays frozen and only joins for classifier refits.
    With ``update_policy=False`` this is the pure execution variant and
    neither model changes.
    """
    logs: list[EpisodeLog] = []
    counters = _Counters()
    for epoch in range(1, config.epochs + 1):
        logs.extend(
            run_online_epoch(
                env, policy, classifier, supervisor, dataset, config,
                epoch, derive_seed(seed, epoch, 0), "lazy", counters,
            )
        )
        if config.update_policy:
            train_bc(policy, dataset, policy_train, derive_seed(seed, epoch, 1))
            train_classifier(
                classifier, dataset.merged_with(dataset_safe), policy,
                config.thresholds, classifier_train, derive_seed(seed, epoch, 2),
            )
    return policy, classifier, logs


def run_safedagger(
    env,
    policy: RobotPolicy,
    classifier: DiscrepancyClassifier,
    supervisor,
    dataset: Dataset,
    dataset_safe: Dataset,
    config: LazyConfig,
    policy_train: TrainConfig,
    classifier_train: TrainConfig,
    seed: int,
) -> tuple[RobotPolicy, DiscrepancyClassifier, list[EpisodeLog]]:
    """Classifier-gated online training: the safety net decides control in
    both directions every step, with no hysteresis and no injected noise."""
    logs: list[EpisodeLog] = []
    counters = _Counters()
    for epoch in range(1, config.epochs + 1):
        logs.extend(
            run_online_epoch(
                env, policy, classifier, supervisor, dataset, config,
                epoch, derive_seed(seed, epoch, 0), "safe", counters,
            )
        )
        if config.update_policy:
            train_bc(policy, dataset, policy_train, derive_seed(seed, epoch, 1))
            train_classifier(
                classifier, dataset.merged_with(dataset_safe), policy,
                config.thresholds, classifier_train, derive_seed(seed, epoch, 2),
            )
    return policy, classifier, logs


def run_dagger(
    env,
    policy: RobotPolicy,
    supervisor,
    dataset: Dataset,
    config: LazyConfig,
    policy_train: TrainConfig,
    seed: int,
) -> tuple[RobotPolicy, list[EpisodeLog]]:
    """Classic relabeling: the robot always acts, the supervisor labels every
    visited state, so supervisor actions grow by the full step budget."""
    logs: list[EpisodeLog] = []
    counters = _Counters()
    for epoch in range(1, config.epochs + 1):
        logs.extend(
            run_online_epoch(
                env, policy, None, supervisor, dataset, config,
                epoch, derive_seed(seed, epoch, 0), "dagger", counters,
            )
        )
        if config.update_policy:
            train_bc(policy, dataset, policy_train, derive_seed(seed, epoch, 1))
    return policy, logs


def run_bc(
    env,
    policy: RobotPolicy,
    supervisor,
    dataset: Dataset,
    config: LazyConfig,
    policy_train: TrainConfig,
    seed: int,
) -> RobotPolicy:
    """Offline-only baseline. If ``config.offline_pairs`` exceeds the dataset
    it is topped up with fresh supervisor rollouts first (budget matching);
    then the policy trains for ``config.epochs`` passes. Zero epochs leave
    the policy untouched.
    """
    if config.offline_pairs is not None and config.offline_pairs > len(dataset):
        extra = collect_offline(env, supervisor, config.offline_pairs - len(dataset), derive_seed(seed, 0, 3))
        for pair in extra.pairs:
            dataset.append(pair, "offline-topup")
    for epoch in range(1, config.epochs + 1):
        train_bc(policy, dataset, policy_train, derive_seed(seed, epoch, 1))
    return policy
