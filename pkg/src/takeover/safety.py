"""Discrepancy classifier: predicts where the policy would diverge from the
supervisor by more than a threshold, from the state alone."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .nets import Mlp, make_optimizer
from .policy import Dataset, RobotPolicy, TrainConfig

Array = np.ndarray

# Predictions are clamped away from {0, 1} before the log loss.
EPS = 1e-7


@dataclass(frozen=True)
class ThresholdPair:
    """Switching thresholds. ``tau_sup`` gates handing control to the
    supervisor, ``tau_auto`` gates taking it back; ``tau_auto <= tau_sup``
    creates the hysteresis band. Units are whatever the caller uses
    consistently (fractions of the action-box diameter in configs, absolute
    action distance inside rollouts)."""

    tau_sup: float
    tau_auto: float

    def __post_init__(self):
        if self.tau_sup < 0 or self.tau_auto < 0:
            raise ValueError(f"thresholds must be nonnegative, got {self}")
        if self.tau_auto > self.tau_sup:
            raise ValueError(f"tau_auto must not exceed tau_sup, got {self}")

    def to_absolute(self, max_discrepancy: float) -> "ThresholdPair":
        return ThresholdPair(self.tau_sup * max_discrepancy, self.tau_auto * max_discrepancy)


def discrepancy(a: Array, b: Array) -> float:
    """Euclidean distance between two actions."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"action shapes differ: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def label(robot_action: Array, supervisor_action: Array, tau_sup: float) -> int:
    """1 marks unsafe: discrepancy at or above ``tau_sup`` (boundary included)."""
    return int(discrepancy(robot_action, supervisor_action) >= tau_sup)


def bce_loss(prediction: float, lbl: int) -> float:
    p = min(max(float(prediction), EPS), 1.0 - EPS)
    return -(lbl * np.log(p) + (1 - lbl) * np.log(1.0 - p))


class DiscrepancyClassifier:
    """Sigmoid-headed net mapping a state to P(unsafe)."""

    kind = "classifier"

    def __init__(self, layer_sizes: list[int], seed: int | None = None):
        if layer_sizes[-1] != 1:
            raise ValueError("classifier output layer must have size 1")
        self.net = Mlp(layer_sizes, seed=seed)

    def predict(self, state: Array) -> float:
        return float(1.0 / (1.0 + np.exp(-self.net.forward(state)[0])))

    def predict_batch(self, states: Array) -> Array:
        raw = self.net.forward(np.atleast_2d(states))[:, 0]
        return 1.0 / (1.0 + np.exp(-raw))


@dataclass
class ClassifierFit:
    loss_curve: list[float]
    single_class: bool
    unsafe_fraction: float


def _relabel(policy: RobotPolicy, states: Array, actions: Array, tau_sup: float) -> Array:
    pred = policy.forward_batch(states)
    dists = np.linalg.norm(pred - actions, axis=1)
    return (dists >= tau_sup).astype(float)


def bce_loss_and_grads(
    clf: DiscrepancyClassifier, states: Array, labels: Array, l2_coefficient: float = 0.0
) -> tuple[float, list[tuple[Array, Array]]]:
    states = np.atleast_2d(states)
    labels = np.asarray(labels, dtype=float)
    raw, cache = clf.net.forward_cached(states)
    p = 1.0 / (1.0 + np.exp(-raw[:, 0]))
    clamped = np.clip(p, EPS, 1.0 - EPS)
    loss = float(np.mean(-(labels * np.log(clamped) + (1.0 - labels) * np.log(1.0 - clamped))))
    # Gradient flows only where the clamp is inactive.
    live = (p > EPS) & (p < 1.0 - EPS)
    d_raw = ((p - labels) * live / states.shape[0]).reshape(-1, 1)
    grads = clf.net.backward(cache, d_raw)
    if l2_coefficient:
        loss += l2_coefficient * sum(float(np.sum(w**2)) for w in clf.net.weights)
        grads = [(dw + 2.0 * l2_coefficient * w, db) for (dw, db), w in zip(grads, clf.net.weights)]
    return loss, grads


def classifier_gradient(
    clf: DiscrepancyClassifier, states: Array, labels: Array, l2_coefficient: float = 0.0
) -> Array:
    _, grads = bce_loss_and_grads(clf, states, labels, l2_coefficient)
    return np.concatenate([np.concatenate([dw.ravel(), db.ravel()]) for dw, db in grads])


def train_classifier(
    clf: DiscrepancyClassifier,
    dataset: Dataset,
    policy: RobotPolicy,
    thresholds: ThresholdPair,
    config: TrainConfig,
    seed: int,
) -> tuple[DiscrepancyClassifier, ClassifierFit]:
    """Fit the classifier on ``dataset`` (typically the aggregated set merged
    with the held-out safe set). Labels are recomputed here from the current
    policy, so refits track the policy as it improves. Trains in place.

    A single-class label set still trains (toward the constant) but is
    flagged in the returned fit info.
    """
    states, actions = dataset.as_arrays()
    labels = _relabel(policy, states, actions, thresholds.tau_sup)
    single = bool(labels.min() == labels.max())
    if single:
        warnings.warn(
            f"classifier labels are all {int(labels[0])}; check tau_sup", stacklevel=2
        )
    rng = np.random.default_rng(seed)
    opt = make_optimizer(config.optimizer, config.learning_rate)
    curve: list[float] = []
    n = len(states)
    for _ in range(config.gradient_steps_per_epoch):
        idx = rng.integers(0, n, size=config.batch_size)
        loss, grads = bce_loss_and_grads(clf, states[idx], labels[idx], config.l2_coefficient)
        opt.step(clf.net, grads)
        curve.append(loss)
    return clf, ClassifierFit(curve, single, float(labels.mean()))


def calibrate_tau_sup(policy: RobotPolicy, dataset: Dataset, target_fraction: float) -> float:
    """Pick ``tau_sup`` so about ``target_fraction`` of the dataset labels
    unsafe: the (1 - target) empirical quantile of policy-vs-label
    discrepancies. Returns an absolute action-distance threshold.
    """
    if not 0.0 < target_fraction <= 1.0:
        raise ValueError(f"target_fraction must be in (0, 1], got {target_fraction}")
    states, actions = dataset.as_arrays()
    n = len(states)
    if n * target_fraction < 1.0:
        warnings.warn(
            f"dataset of {n} cannot resolve a {target_fraction:.3f} unsafe fraction",
            stacklevel=2,
        )
    dists = np.sort(np.linalg.norm(policy.forward_batch(states) - actions, axis=1))
    if dists[0] == dists[-1]:
        warnings.warn("all discrepancies are equal; every pair labels unsafe", stacklevel=2)
        return float(dists[0])
    k = min(max(int(round(target_fraction * n)), 1), n)
    # Smallest observed discrepancy such that >= k pairs sit at or above it.
    return float(dists[n - k])
