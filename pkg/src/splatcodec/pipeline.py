"""End-to-end encode, decode, and evaluation of scenes.

Encoding runs per view: geometry is view-transformed (unless disabled) into
depth/offset/rotation/scale planes, color coefficients from all views are
jointly reduced to k components, every plane is quantized to 14-bit indices
(channel sigmas pooled over views; color components share the dominant
component's step) and entropy-coded by the selected backend at the channel's
effective QP. Decoding reverses each stage. Evaluation renders original and
decoded scenes from the original cameras and reports PSNR/SSIM and the
compression ratio against raw float32 scene bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import view_transform
from .basis_reduction import (
    DEFAULT_COMPONENTS,
    ReductionBasis,
    fit_reduction_basis,
    sample_view_directions,
    visibility_weights,
)
from .container import CompressedScene, container_size
from .errors import BackendUnavailableError, ValidationError
from .plane_codec import (
    BACKEND_HEVC,
    BACKEND_IDS,
    BACKEND_LOSSLESS,
    BACKEND_LOSSY,
    QpConfig,
    decode_plane,
    encode_plane_hevc,
    encode_plane_lossless,
    encode_plane_lossy,
)
from .quantize import default_alpha, dequantize_plane, quantize_plane
from .render import RenderTarget, render
from .rotation import quat_canonical, quat_normalize
from .scene import CameraView, GaussianMap, SceneModel, SceneView
from .metrics import psnr as psnr_metric
from .metrics import ssim as ssim_metric


@dataclass
class EncodeSettings:
    """Everything that controls an encode; defaults mirror the CLI defaults."""

    qg: int = 0
    k: int | None = None  # None -> min(6, coefficient dim)
    backend: str = BACKEND_LOSSY
    alpha_overrides: dict[str, float] = field(default_factory=dict)
    view_transform: bool = True
    basis_reduction: bool = True
    hevc_encoder: str | None = None
    hevc_decoder: str | None = None
    allow_fallback: bool = False


def _channel_plan(use_view_transform: bool, k: int) -> list[tuple[str, str]]:
    """Per-slot (channel key, channel class); sigma is pooled per key."""
    if use_view_transform:
        plan = [("depth", "depth"), ("dx", "offset_xy"), ("dy", "offset_xy")]
    else:
        plan = [(f"pos{i}", "depth") for i in range(3)]
    plan += [(f"s{i}", "scale") for i in range(3)]
    plan += [(f"q{i}", "rotation") for i in range(4)]
    plan += [(f"c{i}", "color") for i in range(k)]
    plan.append(("opacity", "opacity"))
    return plan


def raw_scene_bytes(scene: SceneModel) -> int:
    """Size of the scene as raw float32 maps: W*H*(3+4+3+D+1)*4 per view."""
    d = scene.coeff_dim
    return sum(
        v.camera.width * v.camera.height * (11 + d) * 4 for v in scene.views
    )


def _pooled_std(values: np.ndarray) -> float:
    """Population std, pinned to exactly 0 for constant data (step-1 rule)."""
    if values.min() == values.max():
        return 0.0
    return float(values.std())


def _f32_exact(basis: ReductionBasis) -> ReductionBasis:
    """Round the basis through float32 so encode matches what decoders read."""
    return ReductionBasis(
        weights=basis.weights.astype(np.float32).astype(np.float64),
        matrix=basis.matrix.astype(np.float32).astype(np.float64),
    )


def _geometry_planes(
    scene: SceneModel, use_view_transform: bool
) -> list[list[np.ndarray]]:
    """Per view: the 10 geometry planes in slot order (positions first)."""
    out = []
    for vi, view in enumerate(scene.views):
        g = view.gaussians
        if use_view_transform:
            vp = view_transform.forward(view.camera, g, view_index=vi)
            planes = [vp.depth, vp.dx, vp.dy]
            planes += [vp.scale[:, :, i] for i in range(3)]
            planes += [vp.quat[:, :, i] for i in range(4)]
        else:
            mu = g.mu.astype(np.float64)
            q = quat_canonical(g.quat.astype(np.float64))
            s = g.scale.astype(np.float64)
            planes = [mu[:, :, i] for i in range(3)]
            planes += [s[:, :, i] for i in range(3)]
            planes += [q[:, :, i] for i in range(4)]
        out.append(planes)
    return out


def encode_scene(scene: SceneModel, settings: EncodeSettings | None = None) -> CompressedScene:
    """Compress a scene; deterministic for identical scene and settings."""
    settings = settings or EncodeSettings()
    if settings.backend not in BACKEND_IDS:
        raise ValidationError(
            f"unknown backend {settings.backend!r}; expected one of {sorted(BACKEND_IDS)}"
        )
    scene.validate()
    d = scene.coeff_dim
    if settings.basis_reduction:
        k = settings.k if settings.k is not None else min(DEFAULT_COMPONENTS, d)
    else:
        k = d  # raw coefficient planes
    if not 1 <= k <= d:
        raise ValidationError(f"k must be in [1, {d}], got {k}")

    if not scene.views:
        return CompressedScene(
            width=0, height=0, sh_degree=scene.sh_degree, k=k,
            view_transform=settings.view_transform,
            basis_reduction=settings.basis_reduction,
            default_backend=settings.backend,
        )

    w = scene.views[0].camera.width
    h = scene.views[0].camera.height
    for vi, view in enumerate(scene.views):
        if (view.camera.width, view.camera.height) != (w, h):
            raise ValidationError(
                f"view {vi} is {view.camera.width}x{view.camera.height}; all views "
                f"must match view 0 ({w}x{h}) to share plane dimensions"
            )

    geo = _geometry_planes(scene, settings.view_transform)

    cams = [v.camera for v in scene.views]
    coeffs = np.concatenate(
        [v.gaussians.sh.reshape(-1, d).astype(np.float64) for v in scene.views]
    ).T  # (d, M)
    if settings.basis_reduction:
        dirs = sample_view_directions(cams)
        weights = visibility_weights(dirs, scene.sh_degree)
        basis = _f32_exact(fit_reduction_basis(coeffs, weights, k))
    else:
        basis = ReductionBasis.identity(d)
    components = basis.forward(coeffs)  # (k, M)
    view_sizes = [v.gaussians.record_count() for v in scene.views]
    splits = np.cumsum(view_sizes)[:-1]
    comp_views = np.split(components, splits, axis=1)

    plan = _channel_plan(settings.view_transform, k)
    sigma: dict[str, float] = {}
    for slot, (key, _cls) in enumerate(plan[:10]):
        sigma[key] = _pooled_std(np.concatenate([geo[vi][slot].ravel() for vi in range(len(geo))]))
    if settings.basis_reduction:
        color_sigma = _pooled_std(components[0])  # dominant component
    else:
        color_sigma = float(max(_pooled_std(components[r]) for r in range(k)))
    for i in range(k):
        sigma[f"c{i}"] = color_sigma
    sigma["opacity"] = _pooled_std(
        np.concatenate([v.gaussians.opacity.ravel() for v in scene.views]).astype(np.float64)
    )

    qp_cfg = QpConfig(qg=settings.qg)
    hevc_ok = settings.backend == BACKEND_HEVC
    quant = []
    planes = []
    for vi, view in enumerate(scene.views):
        slot_values = list(geo[vi])
        slot_values += [comp_views[vi][i].reshape(h, w) for i in range(k)]
        slot_values.append(view.gaussians.opacity.astype(np.float64))
        for slot, (key, cls) in enumerate(plan):
            alpha = settings.alpha_overrides.get(cls, default_alpha(cls))
            indices, meta = quantize_plane(slot_values[slot], alpha, shared_sigma=sigma[key])
            quant.append(meta)
            if settings.backend == BACKEND_LOSSLESS:
                planes.append(encode_plane_lossless(indices))
                continue
            qp = qp_cfg.effective(cls)
            if settings.backend == BACKEND_LOSSY or not hevc_ok:
                planes.append(encode_plane_lossy(indices, qp))
                continue
            try:
                planes.append(encode_plane_hevc(indices, qp, settings.hevc_encoder))
            except BackendUnavailableError:
                if not settings.allow_fallback:
                    raise
                hevc_ok = False  # stop retrying; fall back for the rest too
                planes.append(encode_plane_lossy(indices, qp))

    return CompressedScene(
        width=w, height=h, sh_degree=scene.sh_degree, k=k,
        cameras=cams, basis=basis, quant=quant, planes=planes,
        view_transform=settings.view_transform,
        basis_reduction=settings.basis_reduction,
        default_backend=settings.backend,
    )


def decode_scene(cs: CompressedScene, hevc_decoder: str | None = None) -> SceneModel:
    """Reconstruct a scene from a compressed one."""
    cs.validate()
    if cs.view_count == 0:
        return SceneModel(sh_degree=cs.sh_degree, views=[])
    d = 3 * (cs.sh_degree + 1) ** 2
    w, h, k = cs.width, cs.height, cs.k
    ppv = cs.planes_per_view
    views = []
    for vi, cam in enumerate(cs.cameras):
        vals = []
        for slot in range(ppv):
            pi = vi * ppv + slot
            indices = decode_plane(cs.planes[pi], hevc_decoder=hevc_decoder)
            vals.append(dequantize_plane(indices, cs.quant[pi]))

        components = np.stack([vals[10 + i].ravel() for i in range(k)])
        coeffs = cs.basis.inverse(components)
        sh_map = coeffs.T.reshape(h, w, d)

        if cs.view_transform:
            planes = view_transform.ViewPlanes(
                depth=vals[0], dx=vals[1], dy=vals[2],
                quat=np.stack(vals[6:10], axis=-1),
                scale=np.stack(vals[3:6], axis=-1),
            )
            mu, quat, scale = view_transform.inverse(cam, planes)
        else:
            mu = np.stack(vals[0:3], axis=-1)
            scale = np.stack(vals[3:6], axis=-1)
            quat = np.stack(vals[6:10], axis=-1)
            norms = np.linalg.norm(quat, axis=-1, keepdims=True)
            quat = np.where(norms > 1e-6, quat / np.where(norms > 0, norms, 1.0),
                            np.array([1.0, 0.0, 0.0, 0.0]))
            quat = quat_canonical(quat)

        opacity = np.clip(vals[10 + k], 0.0, 1.0)
        views.append(SceneView(
            camera=cam,
            gaussians=GaussianMap(mu=mu, quat=quat, scale=scale, sh=sh_map,
                                  opacity=opacity),
        ))
    scene = SceneModel(sh_degree=cs.sh_degree, views=views)
    scene.validate()
    return scene


def evaluate(
    original: SceneModel,
    decoded: SceneModel,
    container_bytes: int | None = None,
    render_size: tuple[int, int] | None = None,
    background: tuple[float, float, float] = (0.0, 0.0, 0.0),
    return_images: bool = False,
) -> dict:
    """Render both scenes from the original cameras and score the decode.

    Returns per-view and mean PSNR/SSIM, raw float32 scene bytes, and, when
    container_bytes is given, the compression ratio raw/container.
    """
    if len(original.views) != len(decoded.views):
        raise ValidationError(
            f"view counts differ: {len(original.views)} vs {len(decoded.views)}"
        )
    cloud_o = original.merged()
    cloud_d = decoded.merged()
    rows = []
    images = []
    for vi, view in enumerate(original.views):
        cam = view.camera
        if render_size is not None:
            cam = cam.scaled(*render_size)
        target = RenderTarget(width=cam.width, height=cam.height, camera=cam,
                              background=background)
        img_o = render(cloud_o, target)
        img_d = render(cloud_d, target)
        rows.append({
            "view": vi,
            "psnr": psnr_metric(img_o, img_d),
            "ssim": ssim_metric(img_o, img_d),
        })
        if return_images:
            images.append((img_o, img_d))

    raw = raw_scene_bytes(original)
    result = {
        "views": rows,
        "psnr_mean": float(np.mean([r["psnr"] for r in rows])) if rows else float("nan"),
        "ssim_mean": float(np.mean([r["ssim"] for r in rows])) if rows else float("nan"),
        "raw_bytes": raw,
        "container_bytes": container_bytes,
        "compression_ratio": (raw / container_bytes) if container_bytes else None,
    }
    if return_images:
        result["images"] = images
    return result


def sweep(
    scene: SceneModel,
    qgs: list[int],
    settings: EncodeSettings | None = None,
    render_size: tuple[int, int] | None = None,
) -> list[dict]:
    """Encode/decode/evaluate at each global QP; returns one row per QP."""
    settings = settings or EncodeSettings()
    rows = []
    for qg in qgs:
        cs = encode_scene(scene, replace(settings, qg=qg))
        decoded = decode_scene(cs, hevc_decoder=settings.hevc_decoder)
        size = container_size(cs)
        ev = evaluate(scene, decoded, container_bytes=size, render_size=render_size)
        rows.append({
            "qg": qg,
            "bytes": size,
            "psnr": ev["psnr_mean"],
            "ssim": ev["ssim_mean"],
        })
    return rows
