"""Acceptance gate: ten numbered criteria, one PASS/FAIL line each.

Each criterion is self-contained, uses frozen seeds, and enforces its own
wall-clock budget. Run with -s to see the lines as they print.
"""

import time

import numpy as np

from splatcodec.basis_reduction import (
    DEFAULT_COMPONENTS,
    RAY_GRID,
    fit_reduction_basis,
    visibility_weights,
)
from splatcodec.container import (
    bit_allocation_report,
    container_size,
    read_container,
    write_container,
)
from splatcodec.pipeline import (
    EncodeSettings,
    decode_scene,
    encode_scene,
    evaluate,
    raw_scene_bytes,
    sweep,
)
from splatcodec.plane_codec import (
    CHANNEL_QP_OFFSET,
    decode_plane_lossless,
    encode_plane_lossless,
)
from splatcodec.quantize import CHANNEL_ALPHA, MAX_INDEX, dequantize_plane, quantize_plane
from splatcodec.render import RenderTarget, render
from splatcodec.scene import GaussianCloud
from splatcodec.synth import SynthSpec, generate
from splatcodec.view_transform import forward, inverse
from conftest import random_camera, random_gaussian_map


def _report(num: int, name: str, ok: bool) -> bool:
    print(f"C{num} {name}: {'PASS' if ok else 'FAIL'}")
    return ok


def _cloud(gaussians, mu=None, quat=None, scale=None):
    n = gaussians.record_count()
    return GaussianCloud(
        mu=(gaussians.mu if mu is None else mu).reshape(n, 3),
        quat=(gaussians.quat if quat is None else quat).reshape(n, 4),
        scale=(gaussians.scale if scale is None else scale).reshape(n, 3),
        sh=gaussians.sh.reshape(n, -1),
        opacity=gaussians.opacity.ravel(),
    )


def test_c01_parameter_fidelity():
    t0 = time.perf_counter()
    ok = CHANNEL_ALPHA == {"depth": 2048.0, "offset_xy": 256.0, "scale": 256.0,
                           "rotation": 256.0, "color": 1024.0, "opacity": 256.0}
    ok &= CHANNEL_QP_OFFSET == {"depth": -4, "offset_xy": 12, "scale": 0,
                                "rotation": 9, "color": 3, "opacity": 0}
    ok &= DEFAULT_COMPONENTS == 6
    ok &= RAY_GRID == 3
    ok &= MAX_INDEX == 16383
    ok &= time.perf_counter() - t0 < 5.0
    assert _report(1, "parameter table fidelity", ok)


def test_c02_view_transform_invertibility():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202402)
    ok = True
    worst = 0.0
    views = []
    for _ in range(20):
        cam = random_camera(rng, 25, 20)  # 20 views x 500 = 10,000 Gaussians
        g = random_gaussian_map(rng, cam)
        planes = forward(cam, g)
        mu, quat, scale = inverse(cam, planes)
        ref = g.mu.astype(np.float64)
        rel = np.abs(mu - ref) / np.maximum(np.abs(ref), 1e-9)
        worst = max(worst, float(rel.max()))
        dots = np.abs(np.sum(quat * g.quat.astype(np.float64), axis=-1))
        worst = max(worst, float(np.abs(1.0 - dots).max()))
        srel = np.abs(scale - g.scale) / g.scale.astype(np.float64)
        worst = max(worst, float(srel.max()))
        views.append((cam, g, mu, quat, scale))
    ok &= worst <= 1e-5

    for cam, g, mu, quat, scale in views[:4]:
        target = RenderTarget(128, 128, cam.scaled(128, 128))
        img_a = render(_cloud(g), target)
        img_b = render(_cloud(g, mu=mu, quat=quat, scale=scale), target)
        mse = float(np.mean((img_a - img_b) ** 2))
        psnr = float("inf") if mse == 0 else 10.0 * np.log10(1.0 / mse)
        ok &= psnr >= 80.0
    ok &= time.perf_counter() - t0 < 5.0
    assert _report(2, "view transform invertibility", ok)


def test_c03_pixel_aligned_offsets():
    t0 = time.perf_counter()
    scene = generate(SynthSpec(seed=30, views=2, resolution=(64, 64), geometry="plane"))
    ok = True
    for view in scene.views:
        planes = forward(view.camera, view.gaussians)
        ok &= float(np.abs(planes.dx).max()) <= 1e-6
        ok &= float(np.abs(planes.dy).max()) <= 1e-6

    def position_bytes(cs):
        ppv = cs.planes_per_view
        return sum(len(p.payload) for i, p in enumerate(cs.planes)
                   if cs.plane_group(i % ppv) == "position")

    with_vt = encode_scene(scene, EncodeSettings(qg=0))
    without = encode_scene(scene, EncodeSettings(qg=0, view_transform=False))
    ok &= position_bytes(with_vt) < position_bytes(without)
    ok &= time.perf_counter() - t0 < 10.0
    assert _report(3, "zero-jitter offset planes", ok)


def test_c04_basis_reduction_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    ok = True

    # constant-basis visibility weight is the constant itself, any directions
    for _ in range(5):
        dirs = rng.normal(size=(int(rng.integers(1, 50)), 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        w = visibility_weights(dirs, degree=int(rng.integers(0, 4)))
        ok &= abs(w[0] - 0.2820948) <= 1e-6

    # k = d is an exact round trip
    for d in (3, 12, 27, 48):
        coeffs = rng.normal(size=(d, 120))
        weights = rng.uniform(0.05, 1.0, size=d)
        basis = fit_reduction_basis(coeffs, weights, k=d)
        recon = basis.inverse(basis.forward(coeffs))
        ok &= float(np.linalg.norm(recon - coeffs) / np.linalg.norm(coeffs)) <= 1e-9

    # weighted MSE never grows as k does, on 100 random matrices
    for _ in range(100):
        d = int(rng.integers(2, 13))
        coeffs = rng.normal(size=(d, 80))
        weights = rng.uniform(0.1, 1.0, size=d)
        prev = np.inf
        for k in range(1, d + 1):
            basis = fit_reduction_basis(coeffs, weights, k)
            recon = basis.inverse(basis.forward(coeffs))
            mse = float(np.mean((weights[:, None] * (recon - coeffs)) ** 2))
            ok &= mse <= prev + 1e-12
            prev = mse

    # optimal among orthonormal projections: beats 1000 random competitors
    d, k = 4, 2
    coeffs = rng.normal(size=(d, 150)) * np.array([2.5, 1.2, 0.6, 0.25])[:, None]
    weights = rng.uniform(0.2, 1.0, size=d)
    y = weights[:, None] * coeffs

    def weighted_err(mat):
        resid = y - mat @ (mat.T @ y)
        return float(np.sum(resid**2))

    best = weighted_err(fit_reduction_basis(coeffs, weights, k).matrix)
    for _ in range(1000):
        q, _ = np.linalg.qr(rng.normal(size=(d, k)))
        ok &= weighted_err(q) >= best - 1e-9
    ok &= time.perf_counter() - t0 < 30.0
    assert _report(4, "basis reduction properties", ok)


def test_c05_quantizer_error_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    spans = {"depth": (0.5, 9.0), "offset_xy": (-0.02, 0.02), "scale": (1e-4, 0.05),
             "rotation": (-1.0, 1.0), "color": (-2.0, 2.0), "opacity": (0.0, 1.0)}
    ok = True
    for channel, alpha in CHANNEL_ALPHA.items():
        lo, hi = spans[channel]
        values = rng.uniform(lo, hi, size=1_000_000)
        indices, meta = quantize_plane(values, alpha)
        ok &= meta.count_truncated == 0
        err = np.abs(dequantize_plane(indices, meta) - values)
        ok &= float(err.max()) <= meta.step / 2 + 1e-12

        constant = np.full(4096, float(np.float32(rng.uniform(lo, hi))))
        cidx, cmeta = quantize_plane(constant, alpha)
        ok &= cmeta.step == 1.0 and not cidx.any()
        ok &= np.array_equal(dequantize_plane(cidx, cmeta), constant)
    ok &= time.perf_counter() - t0 < 5.0
    assert _report(5, "quantizer error bound", ok)


def test_c06_lossless_plane_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    planes = [
        np.zeros((1, 1), dtype=np.uint16),
        np.zeros((1, 256), dtype=np.uint16),
        np.zeros((256, 1), dtype=np.uint16),
        np.full((256, 256), MAX_INDEX, dtype=np.uint16),
        (np.indices((256, 256)).sum(axis=0) % (MAX_INDEX + 1)).astype(np.uint16),
        np.tile(np.arange(256, dtype=np.uint16) * 64, (256, 1)),
    ]
    while len(planes) < 500:
        h = int(rng.integers(1, 65))
        w = int(rng.integers(1, 65))
        kind = len(planes) % 5
        if kind == 0:
            planes.append(np.zeros((h, w), dtype=np.uint16))
        elif kind == 1:
            planes.append(np.tile(np.arange(w, dtype=np.uint32) * (MAX_INDEX // max(w - 1, 1)),
                                  (h, 1)).astype(np.uint16))
        elif kind == 2:
            planes.append(np.full((h, w), MAX_INDEX, dtype=np.uint16))
        elif kind == 3:
            planes.append(rng.integers(0, MAX_INDEX + 1, size=(h, w), dtype=np.uint16))
        else:
            planes.append(rng.integers(0, 32, size=(h, w), dtype=np.uint16))

    ok = len(planes) == 500
    for plane in planes:
        enc = encode_plane_lossless(plane)
        out = decode_plane_lossless(enc.payload, enc.width, enc.height)
        ok &= np.array_equal(out, plane)

    zero64 = encode_plane_lossless(np.zeros((64, 64), dtype=np.uint16))
    ok &= len(zero64.payload) < 40
    ok &= time.perf_counter() - t0 < 10.0
    assert _report(6, "lossless plane round trip", ok)


def test_c07_end_to_end_rate_and_quality():
    t0 = time.perf_counter()
    scene = generate(SynthSpec(seed=70, views=2, resolution=(128, 128),
                               geometry="plane", sh_degree=1))
    cs = encode_scene(scene, EncodeSettings(qg=0))
    size = container_size(cs)
    raw = raw_scene_bytes(scene)
    decoded = decode_scene(cs)
    rep = evaluate(scene, decoded, container_bytes=size, render_size=(128, 128))
    ok = size <= 0.02 * raw
    ok &= rep["psnr_mean"] >= 35.0
    ok &= time.perf_counter() - t0 < 60.0
    assert _report(7, "end-to-end rate and quality", ok)


def test_c08_rate_distortion_sweep():
    t0 = time.perf_counter()
    scene = generate(SynthSpec(seed=70, views=2, resolution=(128, 128),
                               geometry="plane", sh_degree=1))
    rows = sweep(scene, [0, 3, 6, 12], render_size=(128, 128))
    sizes = [r["bytes"] for r in rows]
    psnrs = [r["psnr"] for r in rows]
    ok = all(a >= b for a, b in zip(sizes, sizes[1:]))
    ok &= all(a >= b - 0.1 for a, b in zip(psnrs, psnrs[1:]))
    ok &= time.perf_counter() - t0 < 120.0
    assert _report(8, "rate-distortion sweep", ok)


def test_c09_bit_allocation_report(tmp_path):
    scene = generate(SynthSpec(seed=70, views=2, resolution=(64, 64),
                               geometry="room", sh_degree=1))
    path = tmp_path / "scene.tspl"
    write_container(encode_scene(scene), path)
    report = bit_allocation_report(read_container(path))
    groups = report["groups"]
    ok = set(groups) == {"position", "scale", "rotation", "color", "opacity", "metadata"}
    ok &= report["total_bytes"] == path.stat().st_size
    ok &= sum(g["bytes"] for g in groups.values()) == path.stat().st_size
    assert _report(9, "bit allocation report", ok)


def test_c10_determinism(tmp_path):
    t0 = time.perf_counter()
    spec = SynthSpec(seed=100, views=2, resolution=(64, 64), geometry="sphere")
    a, b = tmp_path / "a.tspl", tmp_path / "b.tspl"
    write_container(encode_scene(generate(spec), EncodeSettings(qg=3)), a)
    write_container(encode_scene(generate(spec), EncodeSettings(qg=3)), b)
    ok = a.read_bytes() == b.read_bytes()

    decoded = decode_scene(read_container(a))
    cam = decoded.views[0].camera
    target = RenderTarget(cam.width, cam.height, cam)
    img_a = render(decoded.merged(), target)
    img_b = render(decode_scene(read_container(b)).merged(), target)
    ok &= img_a.tobytes() == img_b.tobytes()
    ok &= time.perf_counter() - t0 < 30.0
    assert _report(10, "determinism", ok)
