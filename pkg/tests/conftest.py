"""Shared helpers for building small trained worlds used across test modules."""

from takeover.envs import PointGoal2D
from takeover.meta import AnalyticSupervisor, collect_offline, derive_seed
from takeover.policy import RobotPolicy, TrainConfig, train_bc
from takeover.safety import DiscrepancyClassifier, ThresholdPair, calibrate_tau_sup, train_classifier


def trained_setup(seed=0, pairs=1200, steps=400, auto_ratio=0.5):
    """Miniature of the pretraining pipeline: clone the supervisor, calibrate
    the entry threshold at the 20% quantile, fit the classifier."""
    env = PointGoal2D()
    sup = AnalyticSupervisor(env)
    data = collect_offline(env, sup, pairs, seed=derive_seed(seed, 0, 0))
    pol = RobotPolicy([2, 32, 32, 2], env.spec.low, env.spec.high, seed=seed)
    train_bc(pol, data, TrainConfig(gradient_steps_per_epoch=steps), seed=derive_seed(seed, 0, 1))
    tau_sup = calibrate_tau_sup(pol, data, 0.2)
    tau = ThresholdPair(tau_sup, auto_ratio * tau_sup)
    clf = DiscrepancyClassifier([2, 32, 32, 1], seed=seed + 1)
    train_classifier(clf, data, pol, tau, TrainConfig(gradient_steps_per_epoch=2 * steps),
                     seed=derive_seed(seed, 0, 2))
    return env, sup, data, pol, clf, tau
