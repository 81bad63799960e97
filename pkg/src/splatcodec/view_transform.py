"""Invertible per-view reparameterization of Gaussian geometry.

World-space Gaussian geometry is rewritten relative to the view that produced
it, which turns pixel-aligned maps into near-constant planes:

  * depth      camera-space z of mu (must be > 0; the encoder refuses scenes
               with Gaussians behind their own camera)
  * dx, dy     normalized image-plane offsets from the pixel center,
               x - (j + 0.5)/W and y - (i + 0.5)/H where (x, y) = (u/W, v/H)
               is the projected position; exactly zero when the Gaussian
               back-projects from its own pixel center
  * quat       quat(R) ⊗ q, the orientation rotated into camera coordinates,
               sign-canonicalized and renormalized
  * scale      f * s / depth with f = sqrt(fx * fy), the projected footprint
               in pixel units

The transform is exactly invertible given the camera; `inverse` restores
world-space mu, q, s in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCameraError, ValidationError
from .rotation import matrix_to_quat, quat_canonical, quat_conjugate, quat_multiply, quat_normalize
from .scene import CameraView, GaussianMap


@dataclass
class ViewPlanes:
    """Per-view geometry planes in transform space, all float64, (H, W, ...)."""

    depth: np.ndarray   # (H, W)
    dx: np.ndarray      # (H, W)
    dy: np.ndarray      # (H, W)
    quat: np.ndarray    # (H, W, 4)
    scale: np.ndarray   # (H, W, 3)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


def _pixel_center_grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized pixel-center coordinates ((j + 0.5)/W, (i + 0.5)/H)."""
    xs = (np.arange(width) + 0.5) / width
    ys = (np.arange(height) + 0.5) / height
    return np.meshgrid(xs, ys)


def forward(camera: CameraView, gaussians: GaussianMap, view_index: int = 0) -> ViewPlanes:
    """Transform one view's Gaussian geometry into view-relative planes.

    Raises
    ------
    BehindCameraError
        If any Gaussian has camera-space depth <= 0.
    """
    h, w = gaussians.height, gaussians.width
    if (camera.height, camera.width) != (h, w):
        raise ValidationError(
            f"view {view_index}: camera is {camera.width}x{camera.height} "
            f"but the Gaussian map is {w}x{h}"
        )
    mu = gaussians.mu.reshape(-1, 3).astype(np.float64)
    cam_pts = mu @ camera.R.T + camera.T
    z = cam_pts[:, 2]
    behind = z <= 0
    if np.any(behind):
        idx = int(np.argmax(behind))
        raise BehindCameraError(view_index, idx, float(z[idx]))

    u = camera.fx * cam_pts[:, 0] / z + camera.cx
    v = camera.fy * cam_pts[:, 1] / z + camera.cy
    cgx, cgy = _pixel_center_grid(w, h)
    dx = u.reshape(h, w) / w - cgx
    dy = v.reshape(h, w) / h - cgy

    q_cam = matrix_to_quat(camera.R)
    qhat = quat_multiply(q_cam, gaussians.quat.reshape(-1, 4).astype(np.float64))
    qhat = quat_canonical(quat_normalize(qhat))

    f = np.sqrt(camera.fx * camera.fy)
    shat = gaussians.scale.reshape(-1, 3).astype(np.float64) * (f / z)[:, None]

    return ViewPlanes(
        depth=z.reshape(h, w),
        dx=dx,
        dy=dy,
        quat=qhat.reshape(h, w, 4),
        scale=shat.reshape(h, w, 3),
    )


def inverse(camera: CameraView, planes: ViewPlanes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Restore world-space (mu, quat, scale) from view-relative planes.

    Returns float64 arrays of shapes (H, W, 3), (H, W, 4), (H, W, 3).
    """
    h, w = planes.height, planes.width
    z = np.asarray(planes.depth, dtype=np.float64)
    if np.any(z <= 0):
        ij = np.unravel_index(int(np.argmax(z <= 0)), z.shape)
        raise ValidationError(f"depth plane has non-positive value at {ij}")

    cgx, cgy = _pixel_center_grid(w, h)
    u = (planes.dx + cgx) * w
    v = (planes.dy + cgy) * h
    tx = (u - camera.cx) * z / camera.fx
    ty = (v - camera.cy) * z / camera.fy
    cam_pts = np.stack([tx, ty, z], axis=-1).reshape(-1, 3)
    mu = (cam_pts - camera.T) @ camera.R

    q_cam = matrix_to_quat(camera.R)
    q = quat_multiply(quat_conjugate(q_cam), planes.quat.reshape(-1, 4))
    q = quat_canonical(quat_normalize(q))

    f = np.sqrt(camera.fx * camera.fy)
    s = planes.scale.reshape(-1, 3) * (z.reshape(-1) / f)[:, None]

    return mu.reshape(h, w, 3), q.reshape(h, w, 4), s.reshape(h, w, 3)
