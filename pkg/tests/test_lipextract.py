import logging

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lipread.errors import DimensionMismatch, MissingFile, RankTooLarge
from lipread.lipextract import edges as cn
from lipread.lipextract import color, dmd, features, frames, kmeans as km

# -- colour -------------------------------------------------------------------


def _lab_reference(rgb):
    """CIELAB of one 8-bit sRGB pixel evaluated with 50-digit arithmetic."""
    mpmath.mp.dps = 50
    M = [[mpmath.mpf("0.4124564"), mpmath.mpf("0.3575761"), mpmath.mpf("0.1804375")],
         [mpmath.mpf("0.2126729"), mpmath.mpf("0.7151522"), mpmath.mpf("0.0721750")],
         [mpmath.mpf("0.0193339"), mpmath.mpf("0.1191920"), mpmath.mpf("0.9503041")]]
    white = [mpmath.mpf("0.95047"), mpmath.mpf(1), mpmath.mpf("1.08883")]
    lin = []
    for c in rgb:
        c = mpmath.mpf(c) / 255
        lin.append(c / mpmath.mpf("12.92") if c <= mpmath.mpf("0.04045") else ((c + mpmath.mpf("0.055")) / mpmath.mpf("1.055")) ** mpmath.mpf("2.4"))
    xyz = [sum(M[i][j] * lin[j] for j in range(3)) / white[i] for i in range(3)]
    eps, kappa = mpmath.mpf(216) / 24389, mpmath.mpf(24389) / 27
    f = [mpmath.cbrt(t) if t > eps else (kappa * t + 16) / 116 for t in xyz]
    return [float(116 * f[1] - 16), float(500 * (f[0] - f[1])), float(200 * (f[1] - f[2]))]


def _lab_to_rgb(lab):
    """Exact inverse of the forward conversion (test-only)."""
    L, a, b = np.moveaxis(np.asarray(lab, dtype=np.float64), -1, 0)
    fy = (L + 16) / 116
    fx = fy + a / 500
    fz = fy - b / 200
    eps, kappa = 216 / 24389, 24389 / 27

    def finv(f):
        return np.where(f ** 3 > eps, f ** 3, (116 * f - 16) / kappa)

    xyz = np.stack([finv(fx), finv(fy), finv(fz)], axis=-1) * color.D65_WHITE
    lin = xyz @ np.linalg.inv(color._RGB_TO_XYZ).T
    lin = np.clip(lin, 0, 1)
    srgb = np.where(lin <= 0.04045 / 12.92, lin * 12.92, 1.055 * lin ** (1 / 2.4) - 0.055)
    return srgb * 255


def test_lab_white_black():
    L, a, b = color.rgb_to_lab(np.array([255, 255, 255], dtype=np.uint8))
    assert L == pytest.approx(100, abs=1e-3)
    assert abs(a) <= 0.5 and abs(b) <= 0.5
    np.testing.assert_allclose(color.rgb_to_lab(np.zeros(3, dtype=np.uint8)), 0, atol=1e-12)


def test_lab_red_matches_high_precision():
    # frozen from the 50-digit evaluation: (53.2408, 80.0925, 67.2032)
    ref = _lab_reference((255, 0, 0))
    np.testing.assert_allclose(ref, [53.2408, 80.0925, 67.2032], atol=5e-4)
    np.testing.assert_allclose(color.rgb_to_lab(np.array([255, 0, 0], dtype=np.uint8)), ref, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.tuples(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255)))
def test_lab_matches_reference(rgb):
    np.testing.assert_allclose(color.rgb_to_lab(np.array(rgb, dtype=np.uint8)), _lab_reference(rgb), atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.tuples(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255)))
def test_lab_round_trip(rgb):
    back = _lab_to_rgb(color.rgb_to_lab(np.array(rgb, dtype=np.uint8)))
    assert np.max(np.abs(back - np.array(rgb))) <= 1.0


def test_lab_rejects_bad_shape():
    with pytest.raises(ValueError):
        color.rgb_to_lab(np.zeros((2, 2)))


# -- k-means ------------------------------------------------------------------


def test_two_blobs_exact():
    rng = np.random.default_rng(0)
    pts = np.concatenate([rng.normal([20, 20], 0.5, (60, 2)), rng.normal([-20, -10], 0.5, (40, 2))])
    lab = np.concatenate([np.full((100, 1), 50.0), pts], axis=1).reshape(10, 10, 3)
    c = km.kmeans_ab(lab, 2, seed=3)
    truth = np.r_[np.zeros(60, int), np.ones(40, int)].reshape(10, 10)
    same = c.assignments == c.assignments.flat[0]
    assert np.array_equal(same, truth == 0)
    assert not c.degenerate


def test_uniform_frame_degenerate(caplog):
    lab = np.tile([50.0, 10.0, -5.0], (6, 6, 1))
    with caplog.at_level(logging.WARNING):
        c = km.kmeans_ab(lab, 2)
    assert c.degenerate
    assert "degenerate" in caplog.text


def test_kmeans_deterministic():
    lab = np.random.default_rng(5).normal(0, 10, (12, 9, 3))
    a, b = km.kmeans_ab(lab, 3, seed=11), km.kmeans_ab(lab, 3, seed=11)
    assert np.array_equal(a.assignments, b.assignments)
    assert np.array_equal(a.centroids, b.centroids)


def test_k_range():
    with pytest.raises(ValueError):
        km.kmeans_ab(np.zeros((3, 3, 3)), 5)


def test_inertia_monotone_many_trials():
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        k = int(rng.integers(2, 5))
        n = int(rng.integers(k, 80))
        pts = rng.normal(0, 1, (n, 2)) * rng.uniform(0.1, 10)
        _, _, hist, _ = km.kmeans(pts, k, seed=trial)
        h = np.array(hist)
        assert np.all(np.diff(h) <= 1e-9 * (1 + h[:-1])), (trial, hist)


@pytest.mark.parametrize("cents, want", [
    ([[30, 20], [10, 15]], 0),
    ([[30, 20], [30, 15]], 1),
    ([[5, 0], [9, 3], [9, -2], [1, -9]], 2),
])
def test_lip_cluster_rule(cents, want):
    assert km.lip_cluster_index(np.array(cents, dtype=float)) == want


SKIN = (214, 160, 140)
LIP = (176, 52, 72)
MOUTH = (62, 24, 30)


def _lips_image(seed=0, noise=3.0):
    H, W = 60, 90
    yy, xx = np.mgrid[:H, :W]
    outer = ((xx - 45) / 30) ** 2 + ((yy - 30) / 14) ** 2 <= 1
    inner = ((xx - 45) / 18) ** 2 + ((yy - 30) / 5) ** 2 <= 1
    img = np.empty((H, W, 3))
    img[:] = SKIN
    img[outer] = LIP
    img[inner] = MOUTH
    img += np.random.default_rng(seed).normal(0, noise, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), outer & ~inner


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_lip_mask_overlap(seed):
    img, truth = _lips_image(seed)
    mask = features.lip_mask(img, k=3, seed=seed)
    iou = (mask & truth).sum() / (mask | truth).sum()
    assert iou >= 0.95


# -- Canny --------------------------------------------------------------------


def _rect(h=64, w=64, lo=0.0, hi=255.0):
    img = np.full((h, w), lo)
    img[16:48, 20:44] = hi
    return img


def _step_peak(height):
    # smoothed Sobel response across a unit step: column weight 4, central difference g0 + g1
    g = cn.gaussian_kernel()
    r = len(g) // 2
    return 4 * height * (g[r] + g[r + 1])


def test_step_peak_matches_measurement():
    img = np.zeros((40, 40))
    img[:, 20:] = 10.0
    gx, _ = cn.gradients(img)
    assert gx[20].max() == pytest.approx(_step_peak(10.0), rel=1e-12)


def test_rectangle_perimeter():
    img = _rect()
    res = cn.canny_adaptive(img, t0=100.0, min_pixels=20)
    assert res.found and res.lowerings == 0
    ys, xs = np.nonzero(res.mask)
    on_border = (np.abs(ys - 15.5) <= 1.5) | (np.abs(ys - 47.5) <= 1.5) | (np.abs(xs - 19.5) <= 1.5) | (np.abs(xs - 43.5) <= 1.5)
    assert on_border.all()
    # every side of the rectangle is traced
    assert res.mask[30, 18:22].any() and res.mask[30, 42:46].any()
    assert res.mask[14:18, 32].any() and res.mask[46:50, 32].any()


def test_low_contrast_needs_lowering():
    contrast = 0.02 * 255
    img = _rect(lo=100.0, hi=100.0 + contrast)
    t0 = 1.5 * _step_peak(contrast)
    assert cn.canny(img, t0).sum() == 0
    res = cn.canny_adaptive(img, t0, min_pixels=20, factor=0.5, max_lowerings=3)
    assert res.found and res.lowerings >= 1
    assert res.threshold == pytest.approx(t0 * 0.5 ** res.lowerings)


def test_constant_frame_no_edges(caplog):
    with caplog.at_level(logging.WARNING):
        res = cn.canny_adaptive(np.full((20, 20), 77.0), 10.0, min_pixels=1, max_lowerings=2)
    assert not res.found and res.lowerings == 2 and res.runs == 3
    assert res.mask.sum() == 0
    assert "no edge" in caplog.text


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 400.0), st.integers(1, 200), st.floats(0.2, 0.9), st.integers(0, 4),
       st.floats(1.0, 60.0))
def test_adaptive_minimal_lowerings(t0, min_pixels, factor, n, contrast):
    img = _rect(lo=50.0, hi=50.0 + contrast)
    res = cn.canny_adaptive(img, t0, min_pixels, factor, n)
    assert 0 <= res.lowerings <= n and res.runs <= n + 1
    for j in range(res.lowerings):
        assert cn.canny(img, t0 * factor ** j).sum() < min_pixels
    assert res.found == (res.mask.sum() >= min_pixels)


def test_canny_rejects_bad_args():
    with pytest.raises(ValueError):
        cn.canny_adaptive(np.zeros((5, 5)), 0.0, 1)
    with pytest.raises(ValueError):
        cn.canny_adaptive(np.zeros((5, 5)), 1.0, 1, factor=1.0)


# -- DMD ----------------------------------------------------------------------


def _blob_scene(T=30, H=40, W=64):
    static = np.tile(np.linspace(40, 160, W), (H, 1))
    yy, xx = np.mgrid[:H, :W]
    video = []
    for t in range(T):
        cx = 4 + 2 * t
        blob = 90.0 * (((xx - cx) ** 2 + (yy - 20) ** 2) <= 2.5 ** 2)
        video.append(static + blob)
    return static, video


@pytest.mark.parametrize("rank", [1, 5, 10, 29])
def test_dmd_background_error(rank):
    static, video = _blob_scene()
    res = dmd.dmd_separate(video, rank)
    err = np.linalg.norm(res.background - static[None]) / np.linalg.norm(np.broadcast_to(static, res.background.shape))
    assert err <= 0.05


def test_dmd_static_scene():
    frame = np.random.default_rng(1).integers(0, 256, (12, 16, 3)).astype(np.uint8)
    res = dmd.dmd_separate([frame] * 6, 3)
    gray = frames.to_gray(frame)
    assert np.max(np.abs(res.background - gray)) <= 1e-6 * 255
    assert np.max(res.foreground) <= 1e-6 * 255


def test_dmd_reconstruction_identity():
    _, video = _blob_scene(T=12)
    res = dmd.dmd_separate(video, 5)
    X = np.stack(video)
    diff = X - res.background
    pos = diff > 0
    np.testing.assert_array_equal(res.foreground[pos], diff[pos])
    assert np.all(res.foreground[~pos] == 0)
    assert np.all(res.foreground >= 0)


def test_dmd_errors():
    f = np.zeros((4, 4))
    with pytest.raises(ValueError):
        dmd.dmd_separate([f, f], 1)
    with pytest.raises(RankTooLarge):
        dmd.dmd_separate([f, f, f], 3)
    with pytest.raises(DimensionMismatch):
        dmd.dmd_separate([f, f, np.zeros((5, 4))], 1)


# -- features and frames ------------------------------------------------------


def test_full_and_empty_mask(caplog):
    assert np.array_equal(features.mask_to_feature(np.ones((7, 13), bool), 4, 3), np.ones(12))
    with caplog.at_level(logging.WARNING):
        out = features.mask_to_feature(np.zeros((7, 13), bool))
    assert out.shape == (512,) and not out.any()
    assert "empty" in caplog.text


def test_half_covered_cell():
    m = np.zeros((4, 8), bool)
    m[:, :3] = True
    m[0, 7] = True  # pin the bounding box to the full array
    f = features.mask_to_feature(m, 2, 1)
    # left cell covers 4x4 pixels of which 12 are set
    assert f[0] == pytest.approx(0.75, abs=1 / 16)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10), st.integers(0, 10), st.integers(0, 2 ** 31))
def test_mask_translation_invariance(dy, dx, seed):
    base = np.random.default_rng(seed).random((8, 9)) < 0.5
    base[0, 0] = base[-1, -1] = True
    a = np.zeros((20, 20), bool)
    b = np.zeros((20, 20), bool)
    a[:8, :9] = base
    b[dy:dy + 8, dx:dx + 9] = base
    np.testing.assert_array_equal(features.mask_to_feature(a, 5, 3), features.mask_to_feature(b, 5, 3))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 12), st.integers(1, 12), st.integers(0, 2 ** 31))
def test_area_resample_preserves_mean(h, w, gw, gh, seed):
    img = np.random.default_rng(seed).random((h, w))
    out = features.area_resample(img, gw, gh)
    assert out.shape == (gh, gw)
    assert out.mean() == pytest.approx(img.mean(), rel=1e-9, abs=1e-12)


def test_feature_modes():
    img, _ = _lips_image()
    assert features.frame_feature(img, "raw_roi").shape == (60 * 90,)
    f = features.frame_feature(img, "mask_grid", grid_w=8, grid_h=4)
    assert f.shape == (32,) and np.all((0 <= f) & (f <= 1))
    with pytest.raises(ValueError):
        features.frame_feature(img, "contour")


def test_frame_io_round_trip(tmp_path):
    rgb = np.random.default_rng(0).integers(0, 256, (5, 7, 3)).astype(np.uint8)
    frames.write_frame(tmp_path / "a.ppm", rgb)
    assert np.array_equal(frames.read_frame(tmp_path / "a.ppm"), rgb)
    assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6")
    gray = rgb[..., 0]
    frames.write_frame(tmp_path / "a.pgm", gray)
    assert np.array_equal(frames.read_frame(tmp_path / "a.pgm"), gray)
    with pytest.raises(MissingFile):
        frames.read_frame(tmp_path / "missing.ppm")


def test_crop_bounds():
    f = np.zeros((10, 20, 3), np.uint8)
    assert frames.crop(f, (2, 3, 5, 4)).shape == (4, 5, 3)
    with pytest.raises(ValueError):
        frames.crop(f, (16, 0, 5, 4))
