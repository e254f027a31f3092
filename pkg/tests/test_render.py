import math

import numpy as np
import pytest

from conftest import grid_plan, open_box
from zselnav import render as rd
from zselnav import worldgen as wg


def flat_wall_plan():
    # free corridor for cols 1..23, solid wall block from col 24 on
    rows = []
    for r in range(41):
        if r in (0, 40):
            rows.append("#" * 48)
        else:
            rows.append("#" + "." * 23 + "#" * 24)
    return grid_plan(rows)


def test_wall_column_heights_match_geometry_oracle():
    plan = flat_wall_plan()
    cfg = rd.RenderConfig(width=32, height=32)
    pose = wg.Pose(4.5 * 0.125, 20.5 * 0.125, heading=0.0)
    obs = rd.render_observation(plan, pose, cfg)
    kind, dist, side, _, _ = rd.raycast(plan, pose, cfg)

    plane = 24 * 0.125 - pose.x  # perpendicular distance to the wall plane
    offsets = cfg.ray_offsets()
    assert (kind == 1).all()
    assert (side == 0).all()
    np.testing.assert_allclose(dist * np.cos(offsets), plane, atol=1e-9)

    # closed-form column extents: half-height = (H/2) * gain / perp
    half = (cfg.height / 2.0) * cfg.wall_gain / plane
    top = int(np.ceil(cfg.height / 2.0 - half))
    bot_excl = cfg.height / 2.0 + half
    ceiling = np.array(rd.CEILING_COLOR, dtype=np.float32)
    for col in range(32):
        column = obs.pixels[:, col]
        wall_rows = [r for r in range(32) if not np.allclose(column[r], ceiling)
                     and r < 16] + [r for r in range(16, 32)
                                    if not np.allclose(column[r], column[31])]
        assert min(wall_rows) == top
        assert max(wall_rows) == int(np.ceil(bot_excl)) - 1


def test_render_deterministic_and_in_range():
    plan = wg.generate_floorplan(1)
    cell = tuple(np.argwhere(plan.navigable)[17])
    pose = wg.Pose(*plan.cell_center(cell), heading=1.1)
    a = rd.render_observation(plan, pose)
    b = rd.render_observation(plan, pose)
    assert np.array_equal(a.pixels, b.pixels)
    assert a.pixels.dtype == np.float32
    assert float(a.pixels.min()) >= 0.0 and float(a.pixels.max()) <= 1.0


def test_no_hit_case_is_pure_fill():
    plan = open_box(60, 60)
    pose = wg.Pose(30 * 0.125, 30 * 0.125, heading=0.3)
    obs = rd.render_observation(plan, pose, rd.RenderConfig(max_range=0.5))
    H = obs.pixels.shape[0]
    assert np.allclose(obs.pixels[: H // 2], np.array(rd.CEILING_COLOR, np.float32))
    floor = obs.pixels[H - 1, 0]
    assert np.allclose(obs.pixels[H // 2:], floor)


def test_opposite_headings_differ_on_asymmetric_scene():
    plan = flat_wall_plan()
    pose_fwd = wg.Pose(4.5 * 0.125, 20.5 * 0.125, heading=0.0)
    pose_bwd = wg.Pose(4.5 * 0.125, 20.5 * 0.125, heading=math.pi)
    a = rd.render_observation(plan, pose_fwd)
    b = rd.render_observation(plan, pose_bwd)
    assert not np.array_equal(a.pixels, b.pixels)


def test_edgemap_constant_image_is_zero():
    obs = rd.Observation(pixels=np.full((16, 16, 3), 0.4, np.float32), fov=math.pi / 2)
    edge = rd.derive_edgemap(obs)
    assert edge.modality == "edgemap"
    assert not edge.payload.any()


def test_edgemap_two_tone_split_single_column_pair():
    img = np.full((16, 16, 3), 0.2, np.float32)
    img[:, 8:] = 0.8
    edge = rd.derive_edgemap(rd.Observation(pixels=img, fov=1.0))
    cols = np.nonzero(edge.payload[:, :, 0].any(axis=0))[0]
    assert list(cols) == [7, 8]
    assert edge.payload[:, 7].all() and edge.payload[:, 8].all()


def test_edgemap_binary_range_idempotent():
    rng = np.random.default_rng(0)
    obs = rd.Observation(pixels=rng.random((16, 16, 3)).astype(np.float32), fov=1.0)
    e1 = rd.derive_edgemap(obs)
    e2 = rd.derive_edgemap(rd.Observation(pixels=e1.payload, fov=1.0), threshold=0.5)
    assert set(np.unique(e1.payload)) <= {0.0, 1.0}
    assert set(np.unique(e2.payload)) <= {0.0, 1.0}


def object_plan():
    return open_box(60, 60, objects=[("tv", [(28, 30), (28, 31), (28, 32),
                                             (29, 30), (29, 31), (29, 32)])])


def test_visible_instances_counts_columns():
    plan = object_plan()
    pose = wg.Pose(31.5 * 0.125, 24.5 * 0.125, heading=math.pi / 2)  # looking +y
    vis = rd.visible_instances(plan, pose)
    assert vis.get(0, 0) >= 3
    away = wg.Pose(31.5 * 0.125, 24.5 * 0.125, heading=-math.pi / 2)
    assert rd.visible_instances(plan, away).get(0, 0) == 0


def test_sketch_deterministic_and_varied():
    plan = object_plan()
    obj = plan.objects[0]
    a = rd.derive_sketch(plan, obj, variant_seed=3)
    b = rd.derive_sketch(plan, obj, variant_seed=3)
    c = rd.derive_sketch(plan, obj, variant_seed=4)
    assert np.array_equal(a.payload, b.payload)
    assert not np.array_equal(a.payload, c.payload)
    assert set(np.unique(a.payload)) <= {0.0, 1.0}
    assert a.info["category"] == "tv"


def test_audio_signature_scaling_exact():
    sig = rd.audio_signatures()
    a = rd.derive_audio(2, dist=0.0, noise_seed=0, noise_scale=0.0)
    np.testing.assert_array_equal(a.payload, sig[2])
    b = rd.derive_audio(2, dist=1.0, noise_seed=0, noise_scale=0.0)
    np.testing.assert_array_equal(b.payload, sig[2] * 0.5)


def test_audio_signatures_pairwise_dissimilar():
    sig = rd.audio_signatures().astype(np.float64)
    for i in range(rd.N_CATEGORIES):
        for j in range(i + 1, rd.N_CATEGORIES):
            cos = sig[i] @ sig[j] / (np.linalg.norm(sig[i]) * np.linalg.norm(sig[j]))
            assert abs(cos) < 0.5


def test_audio_noise_reproducible():
    a = rd.derive_audio(1, 0.5, noise_seed=9)
    b = rd.derive_audio(1, 0.5, noise_seed=9)
    c = rd.derive_audio(1, 0.5, noise_seed=10)
    assert np.array_equal(a.payload, b.payload)
    assert not np.array_equal(a.payload, c.payload)


def test_goal_descriptor_validation():
    with pytest.raises(ValueError):
        rd.GoalDescriptor(modality="label", payload=7)
    with pytest.raises(ValueError):
        rd.GoalDescriptor(modality="audio", payload=np.zeros(4, np.float32))
    with pytest.raises(ValueError):
        rd.GoalDescriptor(modality="hologram", payload=None)


def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.random((8, 12, 3)).astype(np.float32)
    path = tmp_path / "frame.ppm"
    rd.write_image(path, img)
    data = path.read_bytes()
    header, rest = data.split(b"255\n", 1)
    assert header == b"P6\n12 8\n"
    u8 = np.frombuffer(rest, np.uint8).reshape(8, 12, 3)
    assert np.array_equal(u8, np.clip(np.round(img * 255), 0, 255).astype(np.uint8))


def test_png_has_valid_structure(tmp_path):
    img = np.zeros((8, 8, 3), np.float32)
    path = tmp_path / "frame.png"
    rd.write_image(path, img)
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert b"IHDR" in data and b"IDAT" in data and data.rstrip().endswith(b"IEND" + data[-4:])
