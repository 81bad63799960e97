"""Synthetic scene generator: determinism and structural invariants."""

import numpy as np
import pytest

from splatcodec.errors import ValidationError
from splatcodec.synth import GEOMETRIES, SynthSpec, generate
from splatcodec.view_transform import forward


def test_generation_is_deterministic():
    a = generate(SynthSpec(seed=7, views=2, resolution=(24, 16), geometry="sphere"))
    b = generate(SynthSpec(seed=7, views=2, resolution=(24, 16), geometry="sphere"))
    for va, vb in zip(a.views, b.views):
        for name in ("mu", "quat", "scale", "sh", "opacity"):
            assert np.array_equal(getattr(va.gaussians, name), getattr(vb.gaussians, name))
        assert np.array_equal(va.camera.T, vb.camera.T)


def test_different_seeds_differ():
    a = generate(SynthSpec(seed=1, views=1, resolution=(16, 16)))
    b = generate(SynthSpec(seed=2, views=1, resolution=(16, 16)))
    assert not np.array_equal(a.views[0].gaussians.sh, b.views[0].gaussians.sh)


@pytest.mark.parametrize("geometry", GEOMETRIES)
def test_zero_jitter_offsets_are_tiny(geometry):
    scene = generate(SynthSpec(seed=11, views=3, resolution=(32, 24), geometry=geometry))
    assert len(scene.views) == 3
    for view in scene.views:
        planes = forward(view.camera, view.gaussians)
        # each Gaussian back-projects from its own pixel center; float32
        # storage leaves at most rounding-level offsets
        assert np.abs(planes.dx).max() < 1e-6
        assert np.abs(planes.dy).max() < 1e-6
        assert np.all(planes.depth > 0)


def test_plane_geometry_offsets_are_exact_zero():
    scene = generate(SynthSpec(seed=5, views=4, resolution=(48, 32), geometry="plane"))
    for view in scene.views:
        planes = forward(view.camera, view.gaussians)
        assert np.all(planes.dx == 0.0)
        assert np.all(planes.dy == 0.0)
        # wall perpendicular to view: one constant depth per view
        assert np.unique(planes.depth).size == 1


def test_room_has_two_depth_layers_in_every_view():
    scene = generate(SynthSpec(seed=3, views=3, resolution=(40, 40), geometry="room"))
    for view in scene.views:
        depth = forward(view.camera, view.gaussians).depth
        layers = np.unique(np.round(depth, 6))
        assert layers.size == 2  # floating panel plus far wall
        assert layers[0] < layers[1]


def test_opacity_and_scale_ranges():
    scene = generate(SynthSpec(seed=9, views=2, resolution=(20, 20), geometry="sphere"))
    for view in scene.views:
        op = view.gaussians.opacity
        assert op.min() >= 0.55 - 1e-6 and op.max() <= 0.95 + 1e-6
        assert np.all(view.gaussians.scale > 0)


def test_camera_rig_spacing():
    scene = generate(SynthSpec(seed=0, views=3, resolution=(16, 16), spread_deg=20.0))
    xs = [view.camera.center[0] for view in scene.views]
    assert xs[0] < xs[1] < xs[2]
    assert abs(xs[0] + xs[2]) < 1e-9  # symmetric about the origin
    assert all(np.array_equal(v.camera.R, np.eye(3)) for v in scene.views)
    # focal is a power of two
    f = scene.views[0].camera.fx
    assert f == 2 ** round(np.log2(f))


def test_jitter_produces_nonzero_offsets():
    spec = SynthSpec(seed=2, views=1, resolution=(24, 24), noise_offset=0.4)
    scene = generate(spec)
    planes = forward(scene.views[0].camera, scene.views[0].gaussians)
    assert np.abs(planes.dx).max() > 1e-4
    scene.validate()


def test_scale_jitter_changes_scales():
    base = generate(SynthSpec(seed=2, views=1, resolution=(12, 12)))
    noisy = generate(SynthSpec(seed=2, views=1, resolution=(12, 12), noise_scale=0.3))
    assert not np.array_equal(base.views[0].gaussians.scale, noisy.views[0].gaussians.scale)


def test_sh_coefficient_matrix_is_low_rank():
    scene = generate(SynthSpec(seed=4, views=2, resolution=(32, 32), sh_degree=2))
    coeffs = np.concatenate(
        [v.gaussians.sh.reshape(-1, 27) for v in scene.views], axis=0
    ).T.astype(np.float64)
    sv = np.linalg.svd(coeffs, compute_uv=False)
    assert np.sum(sv > sv[0] * 1e-5) <= 4


def test_generated_scene_passes_validation_and_sizes():
    scene = generate(SynthSpec(seed=1, views=2, resolution=(10, 6), sh_degree=0))
    scene.validate()
    assert scene.views[0].gaussians.sh.shape == (6, 10, 3)
    empty = generate(SynthSpec(seed=1, views=0))
    assert empty.views == []


def test_generate_rejects_bad_parameters():
    with pytest.raises(ValidationError, match="geometry"):
        generate(SynthSpec(geometry="torus"))
    with pytest.raises(ValidationError, match="resolution"):
        generate(SynthSpec(resolution=(0, 8)))
    with pytest.raises(ValidationError, match="radius"):
        generate(SynthSpec(radius=0.0))
    with pytest.raises(ValidationError, match="view count"):
        generate(SynthSpec(views=-1))
