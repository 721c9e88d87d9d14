"""Two small continuous-control tasks with analytic supervisors.

Environments are immutable parameter bundles plus pure functions: ``reset``
maps a seed to a start state, ``step`` maps (state, action, t) to the next
state. All randomness comes from the seed handed to ``reset``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    horizon: int
    a_low: tuple[float, ...]
    a_high: tuple[float, ...]
    dt: float

    @property
    def low(self) -> Array:
        return np.asarray(self.a_low, dtype=float)

    @property
    def high(self) -> Array:
        return np.asarray(self.a_high, dtype=float)


@dataclass
class StepOutcome:
    next_state: Array
    done: bool
    info: dict = field(default_factory=dict)


def clip_action(action: Array, spec: EnvSpec) -> Array:
    a = np.asarray(action, dtype=float)
    if a.shape != (spec.action_dim,):
        raise ValueError(f"action shape {a.shape} does not match action_dim {spec.action_dim}")
    return np.clip(a, spec.low, spec.high)


def max_action_discrepancy(spec: EnvSpec) -> float:
    """Euclidean diameter of the action box; thresholds scale against this."""
    return float(np.linalg.norm(spec.high - spec.low))


def _check_state(state: Array, spec: EnvSpec) -> Array:
    s = np.asarray(state, dtype=float)
    if s.shape != (spec.state_dim,):
        raise ValueError(f"state shape {s.shape} does not match state_dim {spec.state_dim}")
    return s


class LineTrack1D:
    """Point on a line steered toward a reference position.

    The supervisor is a proportional controller toward ``x_ref``. Success
    means ending within ``tol`` of the reference.
    """

    def __init__(
        self,
        horizon: int = 50,
        dt: float = 0.1,
        x_ref: float = 0.0,
        k_p: float = 1.0,
        tol: float = 0.05,
        start_low: float = -1.0,
        start_high: float = 1.0,
    ):
        self.spec = EnvSpec(
            name="linetrack1d",
            state_dim=1,
            action_dim=1,
            horizon=int(horizon),
            a_low=(-1.0,),
            a_high=(1.0,),
            dt=float(dt),
        )
        self.x_ref = float(x_ref)
        self.k_p = float(k_p)
        self.tol = float(tol)
        self.start_low = float(start_low)
        self.start_high = float(start_high)

    def reset(self, seed: int) -> Array:
        rng = np.random.default_rng(seed)
        return np.array([rng.uniform(self.start_low, self.start_high)])

    def step(self, state: Array, action: Array, t: int) -> StepOutcome:
        s = _check_state(state, self.spec)
        a = clip_action(action, self.spec)
        nxt = s + a * self.spec.dt
        dist = abs(float(nxt[0]) - self.x_ref)
        success = dist <= self.tol
        done = success or (t + 1) >= self.spec.horizon
        return StepOutcome(nxt, done, {"success": success, "distance": dist, "reward": -dist * self.spec.dt})

    def supervisor_action(self, state: Array) -> Array:
        s = _check_state(state, self.spec)
        return clip_action(np.array([self.k_p * (self.x_ref - s[0])]), self.spec)

    def scene(self) -> dict:
        return {
            "kind": "linetrack1d",
            "x_ref": self.x_ref,
            "tol": self.tol,
            "view": [[-1.5, 1.5], [-0.5, 0.5]],
        }


@dataclass(frozen=True)
class PointGoalParams:
    """Geometry and supervisor gains for the planar goal-reaching task.

    The supervisor routes through a waypoint past a vertical corridor band
    where it switches to a much stiffer centering gain; the gain change
    creates a region where a smoothed clone systematically disagrees with it.
    """

    horizon: int = 100
    dt: float = 0.1
    goal: tuple[float, float] = (0.9, 0.0)
    goal_radius: float = 0.05
    start_x: tuple[float, float] = (-1.0, -0.6)
    start_y: tuple[float, float] = (-0.6, 0.6)
    corridor_x: tuple[float, float] = (-0.25, 0.25)
    waypoint: tuple[float, float] = (0.35, 0.0)
    approach_gain: float = 1.0
    corridor_gain: float = 4.0
    final_gain: float = 1.0
    # Optional separate target for the approach piece. Defaults to the
    # corridor waypoint; set it past the corridor when the corridor gain is
    # negative (a repulsive band), otherwise the approach would stall short
    # of the band instead of carrying through it.
    approach_target: tuple[float, float] | None = None


class PointGoal2D:
    """Planar point mass driven toward a goal disc through a corridor band."""

    def __init__(self, params: PointGoalParams | None = None, **overrides):
        if params is None:
            params = PointGoalParams(**overrides)
        elif overrides:
            raise ValueError("pass either params or keyword overrides, not both")
        self.params = params
        self.spec = EnvSpec(
            name="pointgoal2d",
            state_dim=2,
            action_dim=2,
            horizon=int(params.horizon),
            a_low=(-1.0, -1.0),
            a_high=(1.0, 1.0),
            dt=float(params.dt),
        )

    def reset(self, seed: int) -> Array:
        p = self.params
        rng = np.random.default_rng(seed)
        start = np.array(
            [
                rng.uniform(p.start_x[0], p.start_x[1]),
                rng.uniform(p.start_y[0], p.start_y[1]),
            ]
        )
        # The start box sits well left of the goal disc; guard anyway so the
        # "never spawn solved" contract survives parameter overrides.
        if np.linalg.norm(start - np.asarray(p.goal)) <= p.goal_radius:
            raise ValueError("start box overlaps the goal disc; fix the parameters")
        return start

    def step(self, state: Array, action: Array, t: int) -> StepOutcome:
        s = _check_state(state, self.spec)
        a = clip_action(action, self.spec)
        nxt = s + a * self.spec.dt
        dist = float(np.linalg.norm(nxt - np.asarray(self.params.goal)))
        success = dist <= self.params.goal_radius
        done = success or (t + 1) >= self.spec.horizon
        return StepOutcome(nxt, done, {"success": success, "distance": dist, "reward": -dist * self.spec.dt})

    def supervisor_action(self, state: Array) -> Array:
        s = _check_state(state, self.spec)
        p = self.params
        x = s[0]
        if x < p.corridor_x[0]:
            target = np.asarray(p.approach_target if p.approach_target is not None else p.waypoint)
            gain = p.approach_gain
        elif x <= p.corridor_x[1]:
            target, gain = np.asarray(p.waypoint), p.corridor_gain
        else:
            target, gain = np.asarray(p.goal), p.final_gain
        return clip_action(gain * (target - s), self.spec)

    def scene(self) -> dict:
        p = self.params
        return {
            "kind": "pointgoal2d",
            "goal": list(p.goal),
            "goal_radius": p.goal_radius,
            "corridor_x": list(p.corridor_x),
            "start_box": [list(p.start_x), list(p.start_y)],
            "view": [[-1.2, 1.2], [-1.2, 1.2]],
        }


ENV_IDS = ("linetrack1d", "pointgoal2d")


def make_env(env_id: str, **params):
    """Build an environment by id. Unknown ids raise ValueError."""
    if env_id == "linetrack1d":
        return LineTrack1D(**params)
    if env_id == "pointgoal2d":
        return PointGoal2D(**params)
    raise ValueError(f"unknown environment {env_id!r}, expected one of {ENV_IDS}")
