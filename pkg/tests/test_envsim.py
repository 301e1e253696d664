"""Simulator oracles: units, rasterization, and contact physics."""

import numpy as np
import pytest

from poslab import envsim
from poslab.envsim import (EnvConfig, EpisodeOverError, GoalSpec,
                           LabelNotVisibleError, Pose2, PositioningEnv,
                           SegMask, centroid_position, normalized_score,
                           render_goal_observation, render_scene, reward,
                           sample_goal)


def _cfg(**kw):
    return EnvConfig(**kw)


# -- scalar units --------------------------------------------------------


def test_score_at_origin_object_is_inverse_e():
    assert abs(normalized_score((0.0, 0.0), (1.0, 0.0)) - np.exp(-1)) < 1e-12


def test_reward_is_negative_three_four_five():
    assert abs(reward((0.3, 0.4), (0.0, 0.0)) - (-0.5)) < 1e-12


def test_score_is_one_on_goal():
    assert abs(normalized_score((0.2, -0.3), (0.2, -0.3)) - 1.0) < 1e-12


def test_score_rejects_origin_goal():
    with pytest.raises(ValueError):
        normalized_score((0.1, 0.1), (0.0, 0.0))


def test_reward_monotone_in_distance():
    goal = (0.2, 0.1)
    r_near = reward((0.25, 0.1), goal)
    r_far = reward((0.4, 0.1), goal)
    assert r_near > r_far
    assert reward(goal, goal) == 0.0


# -- config --------------------------------------------------------------


def test_config_round_trip():
    cfg = _cfg(task="CubeMove2D", target_px=5, max_episode_steps=30)
    again = EnvConfig.from_dict(cfg.to_dict())
    assert again == cfg


def test_config_rejects_unknown_task():
    with pytest.raises(ValueError):
        _cfg(task="Walker3D")


def test_config_rejects_bad_sizes():
    with pytest.raises(ValueError):
        _cfg(image_size=0)
    with pytest.raises(ValueError):
        _cfg(agent_px=-1)


# -- rendering -----------------------------------------------------------


def test_render_pixel_counts():
    cfg = _cfg(task="CubeMove2D")
    # entities on exact pixel centers ((2k-15)/32 grid for 16px):
    # 5px disk = 21 pixels, 3px square = 9 pixels
    on_px = 9.0 / 32.0
    _, labels = render_scene(cfg, Pose2(-on_px, -on_px), Pose2(on_px, on_px),
                             Pose2(0.0, 0.0))
    assert (labels == envsim.LABEL_AGENT).sum() == 21
    assert (labels == envsim.LABEL_OBJECT).sum() == 9


def test_render_object_paints_over_agent():
    cfg = _cfg(task="Reacher2D")
    p = Pose2(1.0 / 32.0, 1.0 / 32.0)  # a pixel center
    _, labels = render_scene(cfg, p, p, Pose2(0.3, 0.3))
    assert (labels == envsim.LABEL_OBJECT).sum() == 9
    assert (labels == envsim.LABEL_AGENT).sum() == 21 - 9


def test_image_is_palette_of_labels():
    cfg = _cfg(target_px=3)
    image, labels = render_scene(cfg, Pose2(0.1, 0.1), Pose2(0.1, 0.1),
                                 Pose2(-0.3, 0.2))
    np.testing.assert_array_equal(image, envsim.PALETTE[labels])
    assert image.dtype == np.float32


def test_zero_target_size_leaves_no_target_pixels():
    cfg = _cfg(task="Reacher2D", target_px=0)
    env = PositioningEnv(cfg)
    _, mask = env.reset(seed=0)
    assert (mask.labels == envsim.LABEL_TARGET).sum() == 0


def test_target_rendered_when_sized():
    cfg = _cfg(task="Reacher2D", target_px=3)
    env = PositioningEnv(cfg)
    _, mask = env.reset(seed=0)
    assert (mask.labels == envsim.LABEL_TARGET).sum() > 0


def test_centroid_exact_at_pixel_centers():
    cfg = _cfg(task="CubeMove2D")
    # pixel centers sit at odd multiples of h/n; 0.25 = 4 px from center
    pos = Pose2(0.25, 0.25)
    _, labels = render_scene(cfg, Pose2(-0.3, -0.3), pos, Pose2(0.0, 0.0))
    found = centroid_position(SegMask(labels), envsim.LABEL_OBJECT, cfg)
    # symmetric 3x3 square: centroid lands within half a pixel
    px = 2 * cfg.workspace_half_extent / cfg.image_size
    assert abs(found.x - pos.x) < px / 2
    assert abs(found.y - pos.y) < px / 2


def test_centroid_missing_label_raises():
    cfg = _cfg(target_px=0)
    _, labels = render_scene(cfg, Pose2(0, 0), Pose2(0, 0), Pose2(0.3, 0.3))
    with pytest.raises(LabelNotVisibleError):
        centroid_position(SegMask(labels), envsim.LABEL_TARGET, cfg)


# -- goal specs ----------------------------------------------------------


def test_goal_spec_kinds():
    pose = Pose2(0.2, -0.1)
    spec = GoalSpec.coords(pose)
    assert spec.kind == "coords"
    assert spec.goal_pose() == pose

    obs = render_goal_observation(_cfg(task="CubeMove2D"), pose)
    vspec = GoalSpec.visual(obs)
    assert vspec.kind == "visual"
    got = vspec.goal_pose()
    assert abs(got.x - pose.x) < 1e-6 and abs(got.y - pose.y) < 1e-6


def test_sample_goal_respects_exclusion():
    cfg = _cfg(goal_exclusion_radius=0.3)
    rng = np.random.default_rng(0)
    for _ in range(200):
        g = sample_goal(cfg, rng)
        assert np.hypot(g.x, g.y) >= 0.3
        assert abs(g.x) <= cfg.workspace_half_extent
        assert abs(g.y) <= cfg.workspace_half_extent


def test_goal_observation_reacher_shows_agent_on_goal():
    cfg = _cfg(task="Reacher2D", target_px=5)
    goal = Pose2(0.25, 0.25)
    obs = render_goal_observation(cfg, goal)
    np.testing.assert_allclose(obs.vector, [0.25, 0.25, 0.25, 0.25, 0.25, 0.25])
    # never a target marker in a goal image, even when configured
    labels_guess = np.zeros((cfg.image_size, cfg.image_size), dtype=np.uint8)
    target_rgb = envsim.PALETTE[envsim.LABEL_TARGET]
    assert not np.any(np.all(obs.image == target_rgb, axis=-1))
    del labels_guess


def test_goal_observation_cube_keeps_agent_at_reset():
    cfg = _cfg(task="CubeMove2D")
    obs = render_goal_observation(cfg, Pose2(0.3, 0.0))
    np.testing.assert_allclose(obs.vector[:2], [-0.2, -0.2])
    np.testing.assert_allclose(obs.vector[2:], [0.3, 0.0, 0.3, 0.0])


# -- environment dynamics -------------------------------------------------


def test_reset_layout_and_vector():
    env = PositioningEnv(_cfg(task="CubeMove2D"))
    obs, mask = env.reset(seed=1)
    np.testing.assert_allclose(obs.vector[:4], [-0.2, -0.2, 0.0, 0.0])
    assert obs.image.shape == (16, 16, 3)
    assert obs.image_flat().shape == (16 * 16 * 3,)
    assert mask.labels.shape == (16, 16)


def test_same_seed_same_reset():
    env = PositioningEnv(_cfg())
    a, _ = env.reset(seed=33)
    b, _ = env.reset(seed=33)
    np.testing.assert_array_equal(a.vector, b.vector)
    np.testing.assert_array_equal(a.image, b.image)


def test_zero_action_keeps_poses():
    env = PositioningEnv(_cfg(task="CubeMove2D"))
    env.reset(seed=2)
    res = env.step(np.zeros(2))
    np.testing.assert_allclose(res.observation.vector[:4], [-0.2, -0.2, 0, 0])


def test_action_clipping_bounds_motion():
    env = PositioningEnv(_cfg(task="Reacher2D", action_scale=0.05))
    env.reset(seed=3)
    res = env.step(np.array([100.0, 0.0]))
    assert abs(res.observation.vector[0] - 0.05) < 1e-9


def test_reacher_object_rides_agent():
    env = PositioningEnv(_cfg(task="Reacher2D"))
    env.reset(seed=4)
    for _ in range(7):
        res = env.step(np.array([1.0, -0.5]))
    v = res.observation.vector
    np.testing.assert_allclose(v[0:2], v[2:4])


def test_cube_object_static_without_contact():
    env = PositioningEnv(_cfg(task="CubeMove2D", contact_radius=0.15))
    env.reset(seed=5)
    res = env.step(np.array([-1.0, 0.0]))  # agent moves away from the cube
    np.testing.assert_allclose(res.observation.vector[2:4], [0.0, 0.0])


def test_cube_drag_is_rigid_once_in_contact():
    cfg = _cfg(task="CubeMove2D", contact_radius=0.15, action_scale=0.05)
    env = PositioningEnv(cfg)
    env.reset(seed=6)
    # walk onto the cube: start gap is 0.2*sqrt(2) ~ 0.283
    for _ in range(5):
        res = env.step(np.array([1.0, 1.0]))
    agent, obj = res.info["agent"], res.info["object"]
    gap0 = np.hypot(agent.x - obj.x, agent.y - obj.y)
    assert gap0 < cfg.contact_radius
    # drag: the offset must stay fixed while both move
    res = env.step(np.array([1.0, 0.25]))
    agent2, obj2 = res.info["agent"], res.info["object"]
    assert (obj2.x, obj2.y) != (obj.x, obj.y)  # cube moved
    gap1 = np.hypot(agent2.x - obj2.x, agent2.y - obj2.y)
    assert abs(gap1 - gap0) < 1e-12


def test_agent_clamped_at_walls():
    env = PositioningEnv(_cfg(task="Reacher2D", action_scale=0.2))
    env.reset(seed=7)
    for _ in range(10):
        res = env.step(np.array([1.0, 0.0]))
    assert res.observation.vector[0] <= 0.5 + 1e-12


def test_episode_terminates_and_refuses_more_steps():
    cfg = _cfg(max_episode_steps=3)
    env = PositioningEnv(cfg)
    env.reset(seed=8)
    for i in range(3):
        res = env.step(np.zeros(2))
    assert res.done
    with pytest.raises(EpisodeOverError):
        env.step(np.zeros(2))


def test_step_reward_and_info_consistent():
    env = PositioningEnv(_cfg(task="Reacher2D"))
    env.reset(seed=9, goal=GoalSpec.coords(Pose2(0.3, 0.0)))
    res = env.step(np.array([1.0, 0.0]))  # now at (0.05, 0)
    assert abs(res.reward - (-0.25)) < 1e-9
    assert abs(res.info["distance"] - 0.25) < 1e-9
    assert abs(res.info["score"] - np.exp(-0.25 / 0.3)) < 1e-9
    assert res.info["t"] == 1


def test_goal_override_used_by_env():
    env = PositioningEnv(_cfg())
    env.reset(seed=10, goal=GoalSpec.coords(Pose2(-0.11, 0.22)))
    assert env.goal == Pose2(-0.11, 0.22)


def test_save_observation_png(tmp_path):
    env = PositioningEnv(_cfg(target_px=3))
    obs, _ = env.reset(seed=11)
    out = tmp_path / "scene.png"
    envsim.save_observation_png(obs, out, scale=4)
    assert out.exists() and out.stat().st_size > 0
