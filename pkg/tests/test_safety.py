import warnings

import numpy as np
import pytest

from takeover.policy import Dataset, LabeledPair, RobotPolicy, TrainConfig
from takeover.safety import (
    DiscrepancyClassifier,
    ThresholdPair,
    bce_loss,
    calibrate_tau_sup,
    classifier_gradient,
    bce_loss_and_grads,
    discrepancy,
    label,
    train_classifier,
)


def dataset_from(states, actions):
    return Dataset([LabeledPair(np.asarray(s, float), np.asarray(a, float)) for s, a in zip(states, actions)])


def zero_policy(in_dim, out_dim):
    pol = RobotPolicy([in_dim, 4, out_dim], -np.ones(out_dim), np.ones(out_dim), seed=0)
    pol.net.set_flat(np.zeros(pol.net.n_params))
    return pol


def test_discrepancy_is_euclidean():
    assert discrepancy(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(5.0)
    assert discrepancy(np.array([1.0]), np.array([1.0])) == 0.0
    with pytest.raises(ValueError):
        discrepancy(np.array([1.0]), np.array([1.0, 2.0]))


def test_label_boundary_is_unsafe():
    a = np.array([0.0])
    assert label(a, np.array([0.5]), tau_sup=0.5) == 1
    assert label(a, np.array([0.499]), tau_sup=0.5) == 0
    assert label(a, np.array([0.0]), tau_sup=0.0) == 1


def test_bce_oracles():
    assert bce_loss(0.5, 1) == pytest.approx(np.log(2.0), abs=1e-9)
    assert bce_loss(0.5, 0) == pytest.approx(np.log(2.0), abs=1e-9)
    assert bce_loss(0.9, 0) == pytest.approx(-np.log(0.1), abs=1e-9)
    # clamping keeps extreme predictions finite
    assert np.isfinite(bce_loss(0.0, 1))
    assert np.isfinite(bce_loss(1.0, 0))


def test_zero_parameter_classifier_predicts_half():
    clf = DiscrepancyClassifier([3, 8, 1], seed=0)
    clf.net.set_flat(np.zeros(clf.net.n_params))
    assert clf.predict(np.array([5.0, -2.0, 0.1])) == pytest.approx(0.5)


def test_classifier_output_layer_must_be_scalar():
    with pytest.raises(ValueError):
        DiscrepancyClassifier([3, 8, 2], seed=0)


def test_classifier_gradient_matches_central_differences():
    rng = np.random.default_rng(6)
    clf = DiscrepancyClassifier([2, 10, 1], seed=1)
    states = rng.normal(size=(8, 2))
    labels = rng.integers(0, 2, size=8).astype(float)
    flat0 = clf.net.get_flat()
    analytic = classifier_gradient(clf, states, labels, 1e-3)

    def loss_at(flat):
        clf.net.set_flat(flat)
        loss, _ = bce_loss_and_grads(clf, states, labels, 1e-3)
        return loss

    h = 1e-5
    numeric = np.zeros_like(flat0)
    for i in range(len(flat0)):
        up, down = flat0.copy(), flat0.copy()
        up[i] += h
        down[i] -= h
        numeric[i] = (loss_at(up) - loss_at(down)) / (2 * h)
    clf.net.set_flat(flat0)
    rel = np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)
    assert rel < 1e-4


def test_train_classifier_separable_labels():
    # Supervisor action differs from the (zero) policy only for states with
    # positive first coordinate, far beyond the threshold: cleanly separable.
    rng = np.random.default_rng(3)
    states = rng.uniform(-1, 1, size=(400, 2))
    actions = np.where(states[:, :1] > 0, 0.9, 0.0) * np.ones((1, 2))
    data = dataset_from(states, actions)
    pol = zero_policy(2, 2)
    clf = DiscrepancyClassifier([2, 32, 32, 1], seed=2)
    clf, fit = train_classifier(
        clf, data, pol, ThresholdPair(0.5, 0.25), TrainConfig(gradient_steps_per_epoch=800), seed=4
    )
    held = rng.uniform(-1, 1, size=(300, 2))
    want = (held[:, 0] > 0).astype(float)
    got = (clf.predict_batch(held) >= 0.5).astype(float)
    assert (got == want).mean() >= 0.95
    assert not fit.single_class


def test_train_classifier_all_safe_labels():
    rng = np.random.default_rng(5)
    states = rng.uniform(-1, 1, size=(200, 2))
    data = dataset_from(states, np.zeros((200, 2)))  # matches the zero policy exactly
    pol = zero_policy(2, 2)
    clf = DiscrepancyClassifier([2, 16, 1], seed=3)
    with pytest.warns(UserWarning):
        clf, fit = train_classifier(
            clf, data, pol, ThresholdPair(0.5, 0.25), TrainConfig(gradient_steps_per_epoch=600), seed=6
        )
    assert fit.single_class
    assert clf.predict_batch(states).mean() < 0.1


def test_labels_recomputed_from_current_policy():
    # The same dataset flips from all-unsafe to all-safe when the policy
    # changes, proving labels are not cached.
    states = np.array([[0.5, 0.5], [-0.5, -0.5]])
    actions = np.zeros((2, 2))
    data = dataset_from(states, actions)
    pol = zero_policy(2, 2)
    clf = DiscrepancyClassifier([2, 8, 1], seed=0)
    with pytest.warns(UserWarning):
        _, fit_safe = train_classifier(clf, data, pol, ThresholdPair(0.1, 0.05), TrainConfig(gradient_steps_per_epoch=5), seed=0)
    assert fit_safe.unsafe_fraction == 0.0
    pol.net.biases[-1][:] = 10.0  # saturate outputs away from the labels
    with pytest.warns(UserWarning):
        _, fit_unsafe = train_classifier(clf, data, pol, ThresholdPair(0.1, 0.05), TrainConfig(gradient_steps_per_epoch=5), seed=0)
    assert fit_unsafe.unsafe_fraction == 1.0


def test_threshold_pair_validation():
    with pytest.raises(ValueError):
        ThresholdPair(0.1, 0.2)
    with pytest.raises(ValueError):
        ThresholdPair(-0.1, -0.2)
    pair = ThresholdPair(0.2, 0.1).to_absolute(2.0)
    assert pair.tau_sup == pytest.approx(0.4)
    assert pair.tau_auto == pytest.approx(0.2)


def test_calibrate_small_grid_oracle():
    # Discrepancies 0.1..1.0 with a zero policy: the 20% target picks 0.9.
    states = np.zeros((10, 2))
    mags = np.arange(1, 11) / 10.0
    actions = np.stack([mags, np.zeros(10)], axis=1)
    pol = zero_policy(2, 2)
    tau = calibrate_tau_sup(pol, dataset_from(states, actions), 0.2)
    assert tau == pytest.approx(0.9)


def test_calibrate_uniform_sample():
    rng = np.random.default_rng(8)
    n = 4000
    mags = rng.uniform(0, 1, size=n)
    states = np.zeros((n, 2))
    actions = np.stack([mags, np.zeros(n)], axis=1)
    pol = zero_policy(2, 2)
    tau = calibrate_tau_sup(pol, dataset_from(states, actions), 0.2)
    assert abs(tau - 0.8) < 0.02
    frac = np.mean(mags >= tau)
    assert abs(frac - 0.2) <= 0.02


def test_calibrate_degenerate_and_tiny_inputs():
    states = np.zeros((4, 2))
    actions = np.full((4, 2), 0.3)
    pol = zero_policy(2, 2)
    with pytest.warns(UserWarning):
        tau = calibrate_tau_sup(pol, dataset_from(states, actions), 0.2)
    assert tau == pytest.approx(np.linalg.norm([0.3, 0.3]))
    # every pair sits at the threshold, so everything labels unsafe
    assert label(np.zeros(2), np.full(2, 0.3), tau) == 1

    small = dataset_from(np.zeros((3, 2)), np.stack([np.arange(3) / 3, np.zeros(3)], axis=1))
    with pytest.warns(UserWarning):
        tau_small = calibrate_tau_sup(pol, small, 0.2)
    assert np.isfinite(tau_small)
    with pytest.raises(ValueError):
        calibrate_tau_sup(pol, small, 0.0)


def test_labeling_monotone_in_threshold():
    rng = np.random.default_rng(9)
    robot = rng.normal(size=(50, 2))
    sup = rng.normal(size=(50, 2))
    taus = np.sort(rng.uniform(0, 3, size=8))
    counts = [sum(label(r, s, t) for r, s in zip(robot, sup)) for t in taus]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
