"""Reference renderer oracles: background, compositing, ordering, determinism."""

import numpy as np
import pytest

from splatcodec.errors import ValidationError
from splatcodec.render import ALPHA_MAX, RenderStats, RenderTarget, render
from splatcodec.scene import CameraView, GaussianCloud
from splatcodec.sh import SH_C0


def _camera(w=32, h=32):
    return CameraView(fx=float(w), fy=float(h), cx=w / 2 - 0.5, cy=h / 2 - 0.5,
                      width=w, height=h)


def _cloud(mu, colors, opacity, scale=0.1):
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    n = len(mu)
    sh = (np.asarray(colors, dtype=np.float64).reshape(n, 3) - 0.5) / SH_C0
    return GaussianCloud(
        mu=mu,
        quat=np.tile([1.0, 0, 0, 0], (n, 1)),
        scale=np.full((n, 3), scale),
        sh=sh,
        opacity=np.asarray(opacity, dtype=np.float64).reshape(n),
    )


def test_empty_cloud_renders_background():
    target = RenderTarget(16, 12, _camera(16, 12), background=(0.25, 0.5, 0.75))
    image, stats = render(_cloud(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0)),
                          target, return_stats=True)
    assert image.shape == (12, 16, 3)
    assert np.all(image == [0.25, 0.5, 0.75])
    assert stats == RenderStats()


def test_centered_gaussian_center_pixel_oracle():
    # An opacity-1 Gaussian centered on pixel (15, 15): alpha there clamps to
    # 0.99, so the pixel is 0.99 * color + 0.01 * background.
    color = np.array([0.8, 0.3, 0.6])
    cloud = _cloud([[0.0, 0.0, 2.0]], color, [1.0])
    image = render(cloud, RenderTarget(32, 32, _camera(), background=(0.0, 0.0, 1.0)))
    expected = ALPHA_MAX * color + (1 - ALPHA_MAX) * np.array([0.0, 0.0, 1.0])
    assert np.allclose(image[15, 15], expected, atol=1e-9)
    # corners are far outside 3 sigma and keep the background
    assert np.allclose(image[0, 0], [0.0, 0.0, 1.0])


def test_front_gaussian_occludes_back():
    front = np.array([0.9, 0.0, 0.1])
    back = np.array([0.1, 0.9, 0.1])
    cloud = _cloud([[0, 0, 2.0], [0, 0, 4.0]], np.stack([front, back]), [1.0, 1.0],
                   scale=0.15)
    image = render(cloud, RenderTarget(32, 32, _camera()))
    center = image[15, 15]
    assert abs(center[0] - ALPHA_MAX * front[0]) < 0.01
    assert center[1] < 0.05


def test_order_in_array_does_not_matter():
    colors = np.array([[0.9, 0.1, 0.1], [0.1, 0.9, 0.1]])
    mus = [[0, 0, 2.0], [0, 0, 4.0]]
    a = render(_cloud(mus, colors, [1.0, 0.8]), RenderTarget(32, 32, _camera()))
    b = render(_cloud(mus[::-1], colors[::-1], [0.8, 1.0]), RenderTarget(32, 32, _camera()))
    assert np.array_equal(a, b)


def test_render_is_deterministic(rng):
    n = 50
    mu = np.column_stack([rng.uniform(-1, 1, n), rng.uniform(-1, 1, n), rng.uniform(1.5, 5, n)])
    cloud = _cloud(mu, rng.uniform(0, 1, (n, 3)), rng.uniform(0.3, 1, n), scale=0.08)
    target = RenderTarget(48, 48, _camera(48, 48))
    a = render(cloud, target)
    b = render(cloud, target)
    assert a.tobytes() == b.tobytes()


def test_near_and_offscreen_culling():
    cloud = _cloud(
        [[0, 0, 2.0], [0, 0, 0.001], [50.0, 0, 2.0]],
        np.full((3, 3), 0.7),
        [1.0, 1.0, 1.0],
    )
    image, stats = render(cloud, RenderTarget(32, 32, _camera()), return_stats=True)
    assert stats.drawn == 1
    assert stats.culled_near == 1
    assert stats.culled_offscreen == 1
    assert image[15, 15, 0] > 0.5


def test_opacity_scales_coverage():
    color = np.array([[1.0, 1.0, 1.0]])
    strong = render(_cloud([[0, 0, 2.0]], color, [0.9]), RenderTarget(32, 32, _camera()))
    weak = render(_cloud([[0, 0, 2.0]], color, [0.2]), RenderTarget(32, 32, _camera()))
    assert abs(strong[15, 15, 0] - 0.9) < 1e-9
    assert abs(weak[15, 15, 0] - 0.2) < 1e-9


def test_colors_clamp_to_unit_range():
    # An SH constant far above 1 must not push the framebuffer past alpha.
    cloud = _cloud([[0, 0, 2.0]], [[5.0, 5.0, 5.0]], [1.0])
    image = render(cloud, RenderTarget(32, 32, _camera()))
    assert image.max() <= ALPHA_MAX + 1e-12


def test_bad_inputs_raise():
    cloud = _cloud([[0, 0, 2.0]], [[0.5, 0.5, 0.5]], [1.0])
    with pytest.raises(ValidationError, match="render size"):
        render(cloud, RenderTarget(0, 8, _camera()))
    bad = GaussianCloud(mu=cloud.mu, quat=cloud.quat, scale=cloud.scale,
                        sh=np.zeros((1, 6)), opacity=cloud.opacity)
    with pytest.raises(ValidationError, match="coefficient dim"):
        render(bad, RenderTarget(8, 8, _camera(8, 8)))
