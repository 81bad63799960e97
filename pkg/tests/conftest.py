"""Shared helpers: random cameras and Gaussian maps with controlled structure."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from splatcodec.scene import CameraView, GaussianMap, SceneModel, SceneView
from splatcodec.sh import coeff_dim


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return Rotation.random(random_state=np.random.RandomState(rng.integers(2**31))).as_matrix()


def random_camera(rng: np.random.Generator, width: int = 32, height: int = 24) -> CameraView:
    f = float(rng.uniform(0.8, 2.0)) * max(width, height)
    rot = random_rotation(rng)
    t = rng.uniform(-0.5, 0.5, 3)
    return CameraView(fx=f, fy=f * float(rng.uniform(0.9, 1.1)),
                      cx=width / 2 + float(rng.uniform(-1, 1)),
                      cy=height / 2 + float(rng.uniform(-1, 1)),
                      width=width, height=height, R=rot, T=t)


def random_gaussian_map(
    rng: np.random.Generator, camera: CameraView, sh_degree: int = 1
) -> GaussianMap:
    """Gaussians strictly in front of the camera, at random image positions."""
    h, w = camera.height, camera.width
    n = h * w
    z = rng.uniform(1.0, 8.0, n)
    u = rng.uniform(0, w, n)
    v = rng.uniform(0, h, n)
    cam_pts = np.stack([(u - camera.cx) / camera.fx * z,
                        (v - camera.cy) / camera.fy * z, z], axis=1)
    mu = (cam_pts - camera.T) @ camera.R  # R^T (p - T) per row
    quat = rng.normal(size=(n, 4))
    quat /= np.linalg.norm(quat, axis=1, keepdims=True)
    quat[quat[:, 0] < 0] *= -1
    d = coeff_dim(sh_degree)
    return GaussianMap(
        mu=mu.reshape(h, w, 3),
        quat=quat.reshape(h, w, 4),
        scale=rng.uniform(0.005, 0.05, (h, w, 3)),
        sh=rng.normal(scale=0.3, size=(h, w, d)),
        opacity=rng.uniform(0.2, 1.0, (h, w)),
    )


def random_scene(
    rng: np.random.Generator, views: int = 2, width: int = 16, height: int = 12,
    sh_degree: int = 1,
) -> SceneModel:
    out = []
    for _ in range(views):
        cam = random_camera(rng, width, height)
        out.append(SceneView(camera=cam, gaussians=random_gaussian_map(rng, cam, sh_degree)))
    return SceneModel(sh_degree=sh_degree, views=out)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
