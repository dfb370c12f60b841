"""Texture motion estimation and warping."""

import numpy as np
import pytest

from texcodec.analyzer import TextureMask, all_texture_mask
from texcodec.datasets import NON_TEXTURE, TEXTURE
from texcodec.frames import BlockRect, Frame
from texcodec.motion import (AffineMotion, EstimationConfig, MotionError,
                             MotionModelKind, bilinear_sample, chroma_motion,
                             diamond_search, estimate_texture_motion,
                             fit_motion_ransac, warp_frame, warp_rect)
from texcodec.sequences import _noise_texture


def _texture_frame(w, h, seed=0, index=0):
    rng = np.random.default_rng(seed)
    return Frame(y=_noise_texture(rng, h, w, sigma=0.8),
                 u=_noise_texture(rng, h // 2, w // 2, sigma=1.0, contrast=20),
                 v=_noise_texture(rng, h // 2, w // 2, sigma=1.0, contrast=20),
                 frame_index=index)


def _interior_mask(gh, gw, margin=1):
    labels = np.zeros((gh, gw), np.uint8)
    labels[margin:gh - margin, margin:gw - margin] = TEXTURE
    return TextureMask(labels=labels, probs=labels.astype(np.float32))


# ---------------------------------------------------------------------------
# AffineMotion


def test_affine_motion_basics():
    m = AffineMotion.identity()
    assert m.as_tuple() == (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    assert m.det == 1.0
    t = AffineMotion.translation(3, -5)
    assert t.apply(10.0, 20.0) == (13.0, 15.0)
    with pytest.raises(MotionError):
        AffineMotion(a11=float("nan"))


def test_quantized_q16():
    m = AffineMotion(a11=1.0 + 1.0 / 3.0, tx=0.1)
    q = m.quantized_q16()
    assert q.a11 == round((1 + 1 / 3) * 65536) / 65536
    assert q.tx == round(0.1 * 65536) / 65536
    assert abs(q.a11 - m.a11) <= 0.5 / 65536


def test_chroma_motion_halves_translation():
    m = AffineMotion(a11=1.1, a12=0.02, a21=-0.02, a22=1.1, tx=6.0, ty=-4.0)
    c = chroma_motion(m)
    assert (c.a11, c.a12, c.a21, c.a22) == (1.1, 0.02, -0.02, 1.1)
    assert (c.tx, c.ty) == (3.0, -2.0)


# ---------------------------------------------------------------------------
# warp


def test_warp_identity_bit_exact():
    f = _texture_frame(64, 48, seed=1)
    w = warp_frame(f, AffineMotion.identity())
    assert w.same_samples(f)


def test_warp_translation_on_ramp():
    y = np.tile(np.arange(32, dtype=np.uint8), (16, 1))
    f = Frame(y=y, u=np.full((8, 16), 128, np.uint8),
              v=np.full((8, 16), 128, np.uint8))
    w = warp_frame(f, AffineMotion.translation(1, 0))
    expected = np.minimum(np.arange(32) + 1, 31).astype(np.uint8)
    assert np.array_equal(w.y, np.tile(expected, (16, 1)))


def test_warp_half_pixel_on_ramp():
    y = np.tile(np.arange(0, 64, 2, dtype=np.uint8), (16, 1))  # Y[x] = 2x
    f = Frame(y=y, u=np.full((8, 16), 128, np.uint8),
              v=np.full((8, 16), 128, np.uint8))
    w = warp_frame(f, AffineMotion.translation(0.5, 0))
    # bilinear closed form: value 2x + 1 exactly (last column clamps)
    expected = np.minimum(2 * np.arange(32) + 1, 62).astype(np.uint8)
    assert np.array_equal(w.y, np.tile(expected, (16, 1)))


def test_warp_composition_inverse_translation():
    f = _texture_frame(64, 48, seed=2)
    t = 3
    back = warp_frame(warp_frame(f, AffineMotion.translation(t, t)),
                      AffineMotion.translation(-t, -t))
    assert np.array_equal(back.y[t:-t, t:-t], f.y[t:-t, t:-t])


def test_bilinear_sample_edge_clamp():
    plane = np.array([[0, 100], [200, 255]], np.uint8)
    out = bilinear_sample(plane, np.array([-5.0, 0.5, 10.0]),
                          np.array([0.0, 0.0, 1.0]))
    assert out[0] == 0 and out[1] == 50 and out[2] == 255


def test_warp_rect_corners():
    r = BlockRect(0, 0, 16)
    assert warp_rect(AffineMotion.identity(), r) == (
        (0.0, 0.0), (15.0, 0.0), (0.0, 15.0), (15.0, 15.0))
    xs = sorted({c[0] for c in warp_rect(AffineMotion.translation(16, 0), r)})
    assert xs == [16.0, 31.0]
    scaled = warp_rect(AffineMotion(a11=2.0, a22=2.0), r)
    assert scaled[0] == (0.0, 0.0)
    assert scaled[3] == (30.0, 30.0)


# ---------------------------------------------------------------------------
# block matching and fitting


def test_diamond_search_recovers_small_shift():
    rng = np.random.default_rng(3)
    ref = _noise_texture(rng, 96, 96, sigma=0.8)
    dx, dy = 2, -1
    block = ref[32 + dy:48 + dy, 32 + dx:48 + dx]
    fx, fy, cache = diamond_search(block, ref, 32, 32, search_range=16)
    assert (fx, fy) == (dx, dy)
    assert cache[(dx, dy)] == 0


def test_diamond_search_predictor_seed_escapes_local_minimum():
    # a large shift on smooth noise needs a seed near the truth; the
    # estimator provides one from its coarse pass
    rng = np.random.default_rng(3)
    ref = _noise_texture(rng, 96, 96, sigma=0.8)
    dx, dy = 7, -5
    block = ref[32 + dy:48 + dy, 32 + dx:48 + dx]
    fx, fy, _ = diamond_search(block, ref, 32, 32, search_range=16,
                               start=(6, -4))
    assert (fx, fy) == (dx, dy)


def test_fit_exact_on_noiseless_correspondences():
    rng = np.random.default_rng(4)
    truth = AffineMotion(a11=1.03, a12=0.02, a21=-0.02, a22=1.03,
                         tx=4.2, ty=-1.7)
    src = rng.uniform(0, 100, (30, 2))
    dst = np.column_stack(truth.apply(src[:, 0], src[:, 1]))
    for kind in (MotionModelKind.ROTZOOM, MotionModelKind.AFFINE):
        m, inl = fit_motion_ransac(src, dst, kind, EstimationConfig())
        assert np.allclose(m.as_tuple(), truth.as_tuple(), atol=1e-9)
        assert inl.all()


def test_ransac_rejects_outliers():
    rng = np.random.default_rng(5)
    truth = AffineMotion.translation(5.0, -3.0)
    src = rng.uniform(0, 100, (40, 2))
    dst = np.column_stack(truth.apply(src[:, 0], src[:, 1]))
    dst[:8] += rng.uniform(10, 30, (8, 2))  # 20% gross outliers
    m, inl = fit_motion_ransac(src, dst, MotionModelKind.TRANSLATION,
                               EstimationConfig())
    assert np.allclose((m.tx, m.ty), (5.0, -3.0), atol=1e-9)
    assert inl.sum() == 32


def test_fit_needs_minimum_points():
    with pytest.raises(MotionError):
        fit_motion_ransac(np.zeros((2, 2)), np.zeros((2, 2)),
                          MotionModelKind.AFFINE, EstimationConfig())


# ---------------------------------------------------------------------------
# estimation end to end


def test_estimate_identity_on_identical_frames():
    f = _texture_frame(128, 96, seed=6)
    mask = _interior_mask(6, 8)
    m, stats = estimate_texture_motion(f, f, mask, MotionModelKind.ROTZOOM)
    assert np.allclose(m.as_tuple(), (1, 0, 0, 1, 0, 0), atol=0.01)
    assert stats.mean_residual <= 0.01
    assert stats.n_cells == int(np.sum(mask.labels == TEXTURE))


def test_estimate_integer_shift():
    rng = np.random.default_rng(7)
    canvas = _noise_texture(rng, 120, 160, sigma=0.8)
    dx, dy = 3, 5
    ref = Frame(y=canvas[:96, :128],
                u=np.full((48, 64), 128, np.uint8),
                v=np.full((48, 64), 128, np.uint8))
    # cur(x, y) = ref(x + dx, y + dy): content shifted up-left
    cur = Frame(y=canvas[dy:96 + dy, dx:128 + dx],
                u=np.full((48, 64), 128, np.uint8),
                v=np.full((48, 64), 128, np.uint8))
    mask = _interior_mask(6, 8)
    m, stats = estimate_texture_motion(cur, ref, mask, MotionModelKind.ROTZOOM)
    assert abs(m.tx - dx) <= 0.5 and abs(m.ty - dy) <= 0.5
    assert abs(m.a11 - 1) <= 0.01 and abs(m.a12) <= 0.01
    assert stats.inlier_fraction > 0.8


def test_estimate_requires_texture_region():
    f = _texture_frame(64, 48, seed=8)
    empty = all_texture_mask(3, 4, texture=False)
    with pytest.raises(MotionError, match="no texture region"):
        estimate_texture_motion(f, f, empty)


def test_estimate_few_cells_falls_back_to_translation():
    f = _texture_frame(128, 96, seed=9)
    labels = np.zeros((6, 8), np.uint8)
    labels[2, 2:5] = TEXTURE  # 3 cells < 6
    mask = TextureMask(labels=labels, probs=labels.astype(np.float32))
    m, stats = estimate_texture_motion(f, f, mask, MotionModelKind.ROTZOOM)
    assert stats.fallback_translation
    assert (m.a11, m.a12, m.a21, m.a22) == (1.0, 0.0, 0.0, 1.0)


def test_estimate_deterministic():
    ref = _texture_frame(128, 96, seed=10)
    cur = warp_frame(ref, AffineMotion(a11=1.02, a12=0.01, a21=-0.01,
                                       a22=1.02, tx=2.0, ty=-3.0))
    mask = _interior_mask(6, 8, margin=2)
    r1 = estimate_texture_motion(cur, ref, mask, MotionModelKind.ROTZOOM)
    r2 = estimate_texture_motion(cur, ref, mask, MotionModelKind.ROTZOOM)
    assert r1[0].as_tuple() == r2[0].as_tuple()
    assert r1[1].as_dict() == r2[1].as_dict()
