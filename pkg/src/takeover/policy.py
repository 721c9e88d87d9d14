"""Robot policy: a tanh-squashed feedforward net trained by behavior cloning."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nets import Mlp, make_optimizer

Array = np.ndarray


@dataclass
class LabeledPair:
    """One supervisor demonstration: the state seen and the action to take."""

    state: Array
    action: Array


class Dataset:
    """Append-only store of labeled pairs, each tagged with its provenance
    (``offline`` or ``online-epoch-<i>``)."""

    def __init__(self, pairs: list[LabeledPair] | None = None, tags: list[str] | None = None):
        self.pairs: list[LabeledPair] = list(pairs) if pairs else []
        self.tags: list[str] = list(tags) if tags else ["offline"] * len(self.pairs)
        if len(self.tags) != len(self.pairs):
            raise ValueError("tags and pairs must align")

    def __len__(self) -> int:
        return len(self.pairs)

    def append(self, pair: LabeledPair, tag: str) -> None:
        self.pairs.append(pair)
        self.tags.append(tag)

    def extend(self, other: "Dataset") -> None:
        self.pairs.extend(other.pairs)
        self.tags.extend(other.tags)

    def as_arrays(self) -> tuple[Array, Array]:
        if not self.pairs:
            raise ValueError("dataset is empty")
        states = np.stack([p.state for p in self.pairs])
        actions = np.stack([p.action for p in self.pairs])
        return states, actions

    def merged_with(self, other: "Dataset") -> "Dataset":
        out = Dataset(list(self.pairs), list(self.tags))
        out.extend(other)
        return out

    def count_tag_prefix(self, prefix: str) -> int:
        return sum(1 for t in self.tags if t.startswith(prefix))


def split_dataset(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random disjoint split; the first part gets round(fraction * n) pairs."""
    n = len(dataset)
    if n < 2:
        raise ValueError(f"need at least 2 pairs to split, got {n}")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    k = int(round(fraction * n))
    perm = np.random.default_rng(seed).permutation(n)
    first = Dataset([dataset.pairs[i] for i in perm[:k]], [dataset.tags[i] for i in perm[:k]])
    second = Dataset([dataset.pairs[i] for i in perm[k:]], [dataset.tags[i] for i in perm[k:]])
    return first, second


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 128
    gradient_steps_per_epoch: int = 2000
    l2_coefficient: float = 1e-5
    optimizer: str = "adam"  # "adam" | "sgd"


class RobotPolicy:
    """Deterministic policy. Hidden layers are ReLU; the head is a tanh
    rescaled onto the action box, so outputs always respect the bounds and
    an all-zero net emits the midpoint action.
    """

    kind = "policy"

    def __init__(self, layer_sizes: list[int], a_low: Array, a_high: Array, seed: int | None = None):
        self.net = Mlp(layer_sizes, seed=seed)
        self.a_low = np.asarray(a_low, dtype=float)
        self.a_high = np.asarray(a_high, dtype=float)
        if self.a_low.shape != self.a_high.shape or self.a_low.shape != (layer_sizes[-1],):
            raise ValueError("action bounds must match the output layer size")
        if np.any(self.a_high <= self.a_low):
            raise ValueError("a_high must exceed a_low elementwise")
        self._mid = 0.5 * (self.a_low + self.a_high)
        self._half = 0.5 * (self.a_high - self.a_low)

    def forward(self, state: Array) -> Array:
        return self._mid + self._half * np.tanh(self.net.forward(state))

    def forward_batch(self, states: Array) -> Array:
        return self._mid + self._half * np.tanh(self.net.forward(np.atleast_2d(states)))


def bc_loss(policy: RobotPolicy, states: Array, actions: Array, l2_coefficient: float = 0.0) -> float:
    """Mean squared Euclidean distance between predictions and labels, plus
    an l2 penalty on weight matrices (biases are left unregularized)."""
    pred = policy.forward_batch(states)
    actions = np.atleast_2d(actions)
    data = float(np.mean(np.sum((pred - actions) ** 2, axis=1)))
    reg = l2_coefficient * sum(float(np.sum(w**2)) for w in policy.net.weights)
    return data + reg


def bc_loss_and_grads(
    policy: RobotPolicy, states: Array, actions: Array, l2_coefficient: float = 0.0
) -> tuple[float, list[tuple[Array, Array]]]:
    states = np.atleast_2d(states)
    actions = np.atleast_2d(actions)
    raw, cache = policy.net.forward_cached(states)
    tanh = np.tanh(raw)
    pred = policy._mid + policy._half * tanh
    diff = pred - actions
    loss = float(np.mean(np.sum(diff**2, axis=1)))
    # d(mean batch loss)/d(raw head) through the tanh rescale
    d_raw = (2.0 / states.shape[0]) * diff * policy._half * (1.0 - tanh**2)
    grads = policy.net.backward(cache, d_raw)
    if l2_coefficient:
        loss += l2_coefficient * sum(float(np.sum(w**2)) for w in policy.net.weights)
        grads = [(dw + 2.0 * l2_coefficient * w, db) for (dw, db), w in zip(grads, policy.net.weights)]
    return loss, grads


def bc_gradient(policy: RobotPolicy, states: Array, actions: Array, l2_coefficient: float = 0.0) -> Array:
    """Flat gradient of ``bc_loss``, aligned with ``Mlp.get_flat``."""
    _, grads = bc_loss_and_grads(policy, states, actions, l2_coefficient)
    return np.concatenate([np.concatenate([dw.ravel(), db.ravel()]) for dw, db in grads])


def train_bc(
    policy: RobotPolicy, dataset: Dataset, config: TrainConfig, seed: int
) -> tuple[RobotPolicy, list[float]]:
    """Minibatch-train the policy in place; returns it with the loss curve.

    One call runs exactly ``gradient_steps_per_epoch`` updates, sampling
    batches with replacement. Deterministic per seed. The policy keeps its
    current parameters as the starting point, so repeated calls warm-start.
    """
    states, actions = dataset.as_arrays()
    rng = np.random.default_rng(seed)
    opt = make_optimizer(config.optimizer, config.learning_rate)
    curve: list[float] = []
    n = len(dataset)
    for _ in range(config.gradient_steps_per_epoch):
        idx = rng.integers(0, n, size=config.batch_size)
        loss, grads = bc_loss_and_grads(policy, states[idx], actions[idx], config.l2_coefficient)
        opt.step(policy.net, grads)
        curve.append(loss)
    return policy, curve


# -- checkpoints ------------------------------------------------------------

CHECKPOINT_FORMAT = "takeover-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(model, path: str | Path) -> Path:
    """Write a versioned JSON checkpoint. Parameters round-trip bit-exact."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "layer_sizes": model.net.layer_sizes,
        "seed": model.net.seed,
        "params": model.net.get_flat().tolist(),
    }
    if model.kind == "policy":
        payload["a_low"] = model.a_low.tolist()
        payload["a_high"] = model.a_high.tolist()
    path = Path(path)
    path.write_text(json.dumps(payload))
    return path


def load_checkpoint(path: str | Path):
    """Rebuild a policy or classifier from ``save_checkpoint`` output."""
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    kind = payload.get("kind")
    if kind == "policy":
        model = RobotPolicy(
            payload["layer_sizes"],
            np.asarray(payload["a_low"]),
            np.asarray(payload["a_high"]),
            seed=payload["seed"],
        )
    elif kind == "classifier":
        from .safety import DiscrepancyClassifier

        model = DiscrepancyClassifier(payload["layer_sizes"], seed=payload["seed"])
    else:
        raise ValueError(f"{path}: unknown checkpoint kind {kind!r}")
    model.net.set_flat(np.asarray(payload["params"], dtype=float))
    return model
