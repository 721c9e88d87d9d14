import numpy as np
import pytest

from takeover.envs import LineTrack1D, PointGoal2D, clip_action, make_env, max_action_discrepancy
from takeover.meta import AnalyticSupervisor


def rollout_supervisor(env, seed):
    """Drive the analytic supervisor; returns (success, steps)."""
    state = env.reset(seed)
    for t in range(env.spec.horizon):
        out = env.step(state, env.supervisor_action(state), t)
        if out.done:
            return bool(out.info["success"]), t + 1
        state = out.next_state
    return False, env.spec.horizon


def test_reset_deterministic_and_seed_sensitive():
    env = LineTrack1D()
    assert np.array_equal(env.reset(7), env.reset(7))
    assert not np.array_equal(env.reset(0), env.reset(1))
    env2 = PointGoal2D()
    assert np.array_equal(env2.reset(123), env2.reset(123))
    assert not np.array_equal(env2.reset(0), env2.reset(1))


def test_pointgoal_never_starts_solved():
    env = PointGoal2D()
    goal = np.asarray(env.params.goal)
    for seed in range(200):
        start = env.reset(seed)
        assert np.linalg.norm(start - goal) > env.params.goal_radius


def test_step_is_pure_kinematics():
    env = PointGoal2D()
    state = np.array([0.0, 0.0])
    out = env.step(state, np.array([0.5, -0.5]), t=0)
    assert np.allclose(out.next_state, [0.05, -0.05])
    # oversized actions clip before integrating
    out2 = env.step(state, np.array([5.0, 0.0]), t=0)
    assert np.allclose(out2.next_state, [0.1, 0.0])
    line = LineTrack1D()
    out3 = line.step(np.array([0.5]), np.array([-2.0]), t=0)
    assert np.allclose(out3.next_state, [0.4])


def test_clip_idempotent_and_shape_checked():
    env = PointGoal2D()
    a = np.array([3.0, -3.0])
    once = clip_action(a, env.spec)
    assert np.array_equal(once, clip_action(once, env.spec))
    assert np.array_equal(once, [1.0, -1.0])
    with pytest.raises(ValueError):
        clip_action(np.array([1.0]), env.spec)
    with pytest.raises(ValueError):
        env.step(np.array([0.0]), np.array([0.0, 0.0]), t=0)


def test_done_fires_on_goal_or_horizon():
    env = PointGoal2D()
    near_goal = np.asarray(env.params.goal) - np.array([0.052, 0.0])
    out = env.step(near_goal, np.array([1.0, 0.0]), t=0)
    assert out.done and out.info["success"]
    far = np.array([-0.9, 0.0])
    out = env.step(far, np.array([0.0, 0.0]), t=env.spec.horizon - 1)
    assert out.done and not out.info["success"]
    out = env.step(far, np.array([0.0, 0.0]), t=0)
    assert not out.done


def test_states_stay_finite():
    env = PointGoal2D()
    state = env.reset(5)
    for t in range(env.spec.horizon):
        out = env.step(state, np.array([1.0, 1.0]), t)
        assert np.all(np.isfinite(out.next_state))
        state = out.next_state


def test_max_action_discrepancy_values():
    assert max_action_discrepancy(PointGoal2D().spec) == pytest.approx(2 * np.sqrt(2))
    assert max_action_discrepancy(LineTrack1D().spec) == pytest.approx(2.0)


def test_supervisor_action_is_clipped_and_deterministic():
    env = PointGoal2D()
    state = np.array([-1.0, 0.9])
    a = env.supervisor_action(state)
    assert np.all(a >= env.spec.low) and np.all(a <= env.spec.high)
    assert np.array_equal(a, env.supervisor_action(state))


def test_supervisor_gain_changes_inside_corridor():
    env = PointGoal2D()
    y = 0.2
    outside = env.supervisor_action(np.array([-0.5, y]))
    inside = env.supervisor_action(np.array([0.0, y]))
    assert abs(inside[1]) > abs(outside[1])


def test_supervisor_succeeds_across_seeds():
    for env in (LineTrack1D(), PointGoal2D()):
        for seed in range(120):
            success, steps = rollout_supervisor(env, seed)
            assert success, f"{env.spec.name} failed from seed {seed}"
            assert steps <= env.spec.horizon


def test_make_env_ids():
    assert make_env("linetrack1d").spec.name == "linetrack1d"
    assert make_env("pointgoal2d", goal_radius=0.1).params.goal_radius == 0.1
    with pytest.raises(ValueError):
        make_env("cartpole")
