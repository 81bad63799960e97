"""CPU reference renderer for Gaussian clouds (EWA splatting).

Covariances are projected with the first-order Jacobian of the perspective
map, dilated by 0.3 pixels for antialiasing, and composited front to back
with per-pixel alpha clamped to 0.99. Gaussians are drawn in globally
depth-sorted order (stable ties) inside a 3-sigma bounding box; color comes
from the SH coefficients evaluated along the camera-to-Gaussian direction
with the usual +0.5 offset, clamped to [0, 1]. The background shows through
the residual transmittance. Deterministic: identical inputs render identical
images.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .rotation import quat_to_matrix
from .scene import CameraView, GaussianCloud
from .sh import eval_sh_bases, num_bases

NEAR_Z = 0.01          # near-plane cull distance
DILATION = 0.3         # pixel-space covariance dilation
ALPHA_MAX = 0.99       # per-pixel alpha clamp
ALPHA_MIN = 1.0 / 255  # contributions below this are skipped
RADIUS_SIGMAS = 3.0    # bounding-box radius in projected sigmas


@dataclass
class RenderTarget:
    """Where to render: output size, camera, and background color."""

    width: int
    height: int
    camera: CameraView
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass
class RenderStats:
    """Diagnostics from one render pass."""

    drawn: int = 0
    culled_near: int = 0
    culled_offscreen: int = 0
    degenerate: int = 0


def _colors_from_sh(cloud: GaussianCloud, center: np.ndarray) -> np.ndarray:
    n, d = cloud.sh.shape
    nb = d // 3
    degree = int(round(np.sqrt(nb))) - 1
    if num_bases(degree) != nb:
        raise ValidationError(f"coefficient dim {d} is not 3 * (degree + 1)^2")
    dirs = cloud.mu.astype(np.float64) - center
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs = np.divide(dirs, norms, out=np.zeros_like(dirs), where=norms > 0)
    basis = eval_sh_bases(degree, dirs)
    colors = np.einsum("nb,nbc->nc", basis, cloud.sh.astype(np.float64).reshape(n, nb, 3))
    return np.clip(colors + 0.5, 0.0, 1.0)


def render(
    cloud: GaussianCloud,
    target: RenderTarget,
    return_stats: bool = False,
) -> np.ndarray | tuple[np.ndarray, RenderStats]:
    """Render a Gaussian cloud; returns an (H, W, 3) float image in [0, 1]."""
    cam = target.camera
    h, w = target.height, target.width
    if h < 1 or w < 1:
        raise ValidationError(f"render size must be positive, got {w}x{h}")
    stats = RenderStats()
    image = np.zeros((h, w, 3))
    trans = np.ones((h, w))
    n = len(cloud)

    if n:
        mu = cloud.mu.astype(np.float64)
        cam_pts = mu @ cam.R.T + cam.T
        z = cam_pts[:, 2]
        keep = z > NEAR_Z
        stats.culled_near = int(np.count_nonzero(~keep))
    else:
        keep = np.zeros(0, dtype=bool)

    if np.any(keep):
        idx = np.nonzero(keep)[0]
        pts = cam_pts[idx]
        z = pts[:, 2]
        u = cam.fx * pts[:, 0] / z + cam.cx
        v = cam.fy * pts[:, 1] / z + cam.cy

        rot = quat_to_matrix(cloud.quat[idx].astype(np.float64))
        s2 = cloud.scale[idx].astype(np.float64) ** 2
        cov3 = np.einsum("nij,nj,nkj->nik", rot, s2, rot)
        cov_cam = np.einsum("ij,njk,lk->nil", cam.R, cov3, cam.R)

        m = len(idx)
        jac = np.zeros((m, 2, 3))
        jac[:, 0, 0] = cam.fx / z
        jac[:, 0, 2] = -cam.fx * pts[:, 0] / z**2
        jac[:, 1, 1] = cam.fy / z
        jac[:, 1, 2] = -cam.fy * pts[:, 1] / z**2
        cov2 = np.einsum("nij,njk,nlk->nil", jac, cov_cam, jac)
        a = cov2[:, 0, 0] + DILATION
        b = cov2[:, 0, 1]
        c = cov2[:, 1, 1] + DILATION

        det = a * c - b * b
        ok = (det > 1e-12) & (a > 0) & (c > 0)
        stats.degenerate = int(np.count_nonzero(~ok))

        lam_max = 0.5 * (a + c) + np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
        radius = RADIUS_SIGMAS * np.sqrt(np.maximum(lam_max, 0.0))
        colors = _colors_from_sh(
            GaussianCloud(cloud.mu[idx], cloud.quat[idx], cloud.scale[idx],
                          cloud.sh[idx], cloud.opacity[idx]),
            cam.center,
        )
        opac = cloud.opacity[idx].astype(np.float64)

        conic_a = np.where(ok, c / np.where(ok, det, 1.0), 0.0)
        conic_b = np.where(ok, -b / np.where(ok, det, 1.0), 0.0)
        conic_c = np.where(ok, a / np.where(ok, det, 1.0), 0.0)

        order = np.argsort(z, kind="stable")  # front to back; stable index ties
        for g in order.tolist():
            if not ok[g]:
                continue
            x0 = max(0, int(np.floor(u[g] - radius[g] - 0.5)))
            x1 = min(w - 1, int(np.ceil(u[g] + radius[g] - 0.5)))
            y0 = max(0, int(np.floor(v[g] - radius[g] - 0.5)))
            y1 = min(h - 1, int(np.ceil(v[g] + radius[g] - 0.5)))
            if x0 > x1 or y0 > y1:
                stats.culled_offscreen += 1
                continue
            px = np.arange(x0, x1 + 1) + 0.5 - u[g]
            py = np.arange(y0, y1 + 1) + 0.5 - v[g]
            power = (
                -0.5 * (conic_a[g] * px**2)[None, :]
                - 0.5 * (conic_c[g] * py**2)[:, None]
                - conic_b[g] * py[:, None] * px[None, :]
            )
            alpha = opac[g] * np.exp(power)
            np.minimum(alpha, ALPHA_MAX, out=alpha)
            alpha[alpha < ALPHA_MIN] = 0.0
            if not alpha.any():
                continue
            tsub = trans[y0:y1 + 1, x0:x1 + 1]
            weight = tsub * alpha
            image[y0:y1 + 1, x0:x1 + 1] += weight[:, :, None] * colors[g]
            trans[y0:y1 + 1, x0:x1 + 1] = tsub * (1.0 - alpha)
            stats.drawn += 1

    image += trans[:, :, None] * np.asarray(target.background, dtype=np.float64)
    if return_stats:
        return image, stats
    return image
