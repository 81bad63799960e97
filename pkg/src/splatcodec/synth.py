"""Synthetic pixel-aligned scenes with known structure, for tests and demos.

Cameras share one orientation and translate along a lateral baseline, and
every Gaussian is the exact back-projection of its pixel center at the depth
of an analytic surface. Focal lengths are powers of two, pixel centers are
half-integers, and camera positions and the surface distance snap to dyadic
grids, so for the plane geometry the back-projected centers are exactly
representable in float32 and the view-transform offset planes are bitwise
zero (for curved geometries they are zero to float32 rounding, ~1e-7).
Three geometries are provided:

  * plane   a wall perpendicular to the view direction
  * sphere  a sphere in front of a backdrop plane
  * room    the inside of a box with a floating panel (two depth layers)

Color coefficients and opacity come from a procedural world-lattice texture:
each lattice cell hashes (counter-style, platform-independent) to mixing
weights over a fixed mean vector plus three latent coefficient patterns,
giving piecewise-constant planes whose coefficient matrix has rank at most
four. Orientation aligns each Gaussian's smallest axis with the surface
normal, and scales grow linearly with depth so projected footprints are
constant. Everything is fully determined by the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rotation import matrix_to_quat
from .scene import CameraView, GaussianMap, SceneModel, SceneView
from .sh import SH_C0, SH_C1, coeff_dim

GEOMETRIES = ("plane", "sphere", "room")

# Projected footprint in pixel units: two tangent axes, one thin normal axis.
_BASE_FOOTPRINT = np.array([0.9, 0.9, 0.18])
_PATTERN_AMPS = (0.25, 0.10, 0.04)
_POSITION_GRID = 512  # camera coordinates snap to 1/512 world units
_DISTANCE_GRID = 64   # surface distance snaps to 1/64 world units


@dataclass
class SynthSpec:
    """Parameters of a generated scene; equal specs generate equal scenes."""

    seed: int = 0
    views: int = 2
    geometry: str = "plane"
    resolution: tuple[int, int] = (64, 64)  # (W, H)
    sh_degree: int = 1
    radius: float = 3.0       # camera distance to the surface anchor
    spread_deg: float = 24.0  # angular baseline of the camera rig
    noise_offset: float = 0.0  # image-plane jitter, pixels
    noise_scale: float = 0.0   # log-scale jitter amplitude


def _hash01(seed: int, tag: int, cells: np.ndarray) -> np.ndarray:
    """Counter-based hash of integer lattice cells to uniforms in [0, 1)."""
    with np.errstate(over="ignore"):
        h = np.full(cells.shape[:-1], np.uint64(seed * 0x9E3779B97F4A7C15 & 0xFFFFFFFFFFFFFFFF))
        h ^= np.uint64(tag * 0xD1B54A32D192ED03 & 0xFFFFFFFFFFFFFFFF)
        for axis in range(cells.shape[-1]):
            h ^= cells[..., axis].astype(np.int64).astype(np.uint64)
            h = (h + np.uint64(0x9E3779B97F4A7C15))
            h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            h ^= h >> np.uint64(31)
        return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _snap(value: float, grid: int) -> float:
    return round(value * grid) / grid


def _rig_cameras(spec: SynthSpec, distance: float) -> list[CameraView]:
    """Identity-orientation cameras on a lateral baseline at z = 0.

    The focal length is a power of two and positions land on the 1/512 grid;
    both are needed for float32-exact back-projection.
    """
    w, h = spec.resolution
    f = float(2 ** (math.ceil(math.log2(max(w, h))) + 1))
    half_arc = math.radians(spec.spread_deg) / 2.0
    half_base = distance * math.tan(half_arc)
    cams = []
    for i in range(spec.views):
        frac = i / (spec.views - 1) - 0.5 if spec.views > 1 else 0.0
        x = _snap(2.0 * half_base * frac, _POSITION_GRID)
        center = np.array([x, 0.0, 0.0])
        cams.append(CameraView(fx=f, fy=f, cx=w / 2, cy=h / 2, width=w, height=h,
                               R=np.eye(3), T=-center))
    return cams


def _surface_depth_normal(
    spec: SynthSpec, distance: float, center: np.ndarray, rays: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Depth (camera z) and world normal of the first surface along each ray.

    `rays` holds d = R^T K^-1 (u, v, 1) with unit z, so the along-ray
    parameter equals camera depth and points are center + depth * rays.
    """
    eps = 1e-12
    if spec.geometry == "plane":
        denom = np.where(np.abs(rays[..., 2]) < eps, eps, rays[..., 2])
        depth = (distance - center[2]) / denom
        normal = np.broadcast_to(np.array([0.0, 0.0, -1.0]), rays.shape).copy()
        return depth, normal

    if spec.geometry == "sphere":
        ctr = np.array([0.0, 0.0, distance])
        r_s = 0.42 * distance
        rel = center - ctr
        a = np.sum(rays * rays, axis=-1)
        b = 2.0 * (rays @ rel)
        c = rel @ rel - r_s * r_s
        disc = b * b - 4 * a * c
        hit = disc > 0
        z_sphere = np.where(hit, (-b - np.sqrt(np.maximum(disc, 0.0))) / (2 * a), 0.0)
        hit &= z_sphere > 0
        denom = np.where(np.abs(rays[..., 2]) < eps, eps, rays[..., 2])
        z_back = (1.55 * distance - center[2]) / denom
        depth = np.where(hit, z_sphere, z_back)
        pts = center + depth[..., None] * rays
        normal = np.where(hit[..., None], (pts - ctr) / r_s,
                          np.broadcast_to(np.array([0.0, 0.0, -1.0]), rays.shape))
        return depth, normal

    if spec.geometry == "room":
        ctr = np.array([0.0, 0.0, distance])
        half = 1.15 * distance
        best_z = np.full(rays.shape[:-1], np.inf)
        normal = np.zeros(rays.shape)
        for axis in range(3):
            for sign in (-1.0, 1.0):
                denom = np.where(np.abs(rays[..., axis]) < eps, eps, rays[..., axis])
                z = (ctr[axis] + sign * half - center[axis]) / denom
                pts = center + z[..., None] * rays
                others = [o for o in range(3) if o != axis]
                inside = (np.abs(pts[..., others[0]] - ctr[others[0]]) <= half + 1e-6) & (
                    np.abs(pts[..., others[1]] - ctr[others[1]]) <= half + 1e-6
                )
                valid = (z > 0) & inside & (z < best_z)
                face_normal = np.zeros(3)
                face_normal[axis] = -sign  # inward
                best_z = np.where(valid, z, best_z)
                normal = np.where(valid[..., None], face_normal, normal)
        # floating panel: a second depth layer in front of the far wall; kept
        # narrow so the rig's long focals still see past it to the far wall
        denom = np.where(np.abs(rays[..., 2]) < eps, eps, rays[..., 2])
        z = (ctr[2] + 0.5 * half - center[2]) / denom
        pts = center + z[..., None] * rays
        on_panel = (z > 0) & (np.abs(pts[..., 0]) <= 0.1 * half) & (
            np.abs(pts[..., 1]) <= 0.1 * half
        ) & (z < best_z)
        best_z = np.where(on_panel, z, best_z)
        normal = np.where(on_panel[..., None], np.array([0.0, 0.0, -1.0]), normal)
        if not np.all(np.isfinite(best_z)):
            raise ValidationError("room geometry left rays without a surface hit")
        return best_z, normal

    raise ValidationError(f"unknown geometry {spec.geometry!r}; expected one of {GEOMETRIES}")


def _frames_from_normals(normal: np.ndarray) -> np.ndarray:
    """Rotation matrices whose third column is the surface normal."""
    hint = np.broadcast_to(np.array([0.0, 1.0, 0.0]), normal.shape).copy()
    parallel = np.abs(normal[..., 1]) > 0.99
    hint[parallel] = np.array([1.0, 0.0, 0.0])
    t1 = np.cross(hint, normal)
    t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
    t2 = np.cross(normal, t1)
    return np.stack([t1, t2, normal], axis=-1)


def generate(spec: SynthSpec) -> SceneModel:
    """Generate the scene described by `spec` (deterministic in the seed)."""
    w, h = spec.resolution
    if w < 1 or h < 1:
        raise ValidationError(f"resolution must be positive, got {spec.resolution}")
    if spec.views < 0:
        raise ValidationError("view count must be >= 0")
    if spec.geometry not in GEOMETRIES:
        raise ValidationError(f"unknown geometry {spec.geometry!r}; expected one of {GEOMETRIES}")
    if not spec.radius > 0:
        raise ValidationError(f"radius must be > 0, got {spec.radius}")
    d = coeff_dim(spec.sh_degree)
    distance = _snap(spec.radius, _DISTANCE_GRID)

    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    mean_vec = np.zeros(d)
    mean_vec[:3] = (rng.uniform(0.35, 0.65, 3) - 0.5) / SH_C0
    if d > 3:
        mean_vec[3:] = rng.uniform(-1.0, 1.0, d - 3) * 0.04
    patterns = []
    for amp in _PATTERN_AMPS:
        vec = np.zeros(d)
        vec[:3] = rng.uniform(-1.0, 1.0, 3) * (amp / SH_C0)
        if d > 3:
            vec[3:] = rng.uniform(-1.0, 1.0, d - 3) * (amp * 0.3 / SH_C1)
        patterns.append(vec)

    cams = _rig_cameras(spec, distance)
    cell_size = 0.18 * distance
    views = []
    for cam in cams:
        us, vs = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
        if spec.noise_offset > 0:
            us = us + rng.uniform(-spec.noise_offset, spec.noise_offset, us.shape)
            vs = vs + rng.uniform(-spec.noise_offset, spec.noise_offset, vs.shape)
        rays_cam = np.stack(
            [(us - cam.cx) / cam.fx, (vs - cam.cy) / cam.fy, np.ones_like(us)], axis=-1
        )
        rays = rays_cam @ cam.R  # R^T per pixel (identity here, exact)
        center = cam.center
        depth, normal = _surface_depth_normal(spec, distance, center, rays)
        if np.any(depth <= 0):
            raise ValidationError("surface depth must be positive for every pixel")
        mu = center + depth[..., None] * rays

        quat = matrix_to_quat(_frames_from_normals(normal))

        f = np.sqrt(cam.fx * cam.fy)
        scale = _BASE_FOOTPRINT * (depth[..., None] / f)
        if spec.noise_scale > 0:
            scale = scale * np.exp(rng.uniform(-spec.noise_scale, spec.noise_scale,
                                               scale.shape))

        cells = np.floor(mu / cell_size).astype(np.int64)
        sh_map = np.broadcast_to(mean_vec, (h, w, d)).copy()
        for p, vec in enumerate(patterns):
            coef = 2.0 * _hash01(spec.seed, p + 1, cells) - 1.0
            sh_map += coef[..., None] * vec
        opacity = 0.55 + 0.4 * _hash01(spec.seed, 9, cells)

        views.append(SceneView(
            camera=cam,
            gaussians=GaussianMap(mu=mu, quat=quat, scale=scale, sh=sh_map,
                                  opacity=opacity),
        ))

    scene = SceneModel(sh_degree=spec.sh_degree, views=views)
    scene.validate()
    return scene
