"""Scene model for pixel-aligned Gaussian maps, plus native and PLY file I/O.

A scene is a list of views. Each view pairs a pinhole camera with a dense
H x W grid of Gaussians, one per pixel, as produced by feedforward
reconstruction networks: position mu, unit quaternion (w, x, y, z), positive
scales, spherical-harmonic color coefficients, and post-sigmoid opacity in
[0, 1]. Coefficient vectors are stored basis-major with the three color
channels interleaved: index 3*b + channel.

Native format (.gsmap, little-endian):
    magic "GSMP" | version u32 | view_count u32 | sh_degree u32
    per view: width u32 | height u32 | fx fy cx cy f64 | R 9xf64 | T 3xf64
              then H*W records of (3+4+3+D+1) float32, row-major
with D = 3 * (sh_degree + 1)^2.

PLY export uses the community splat vertex layout (x y z, nx ny nz,
f_dc_*, f_rest_* channel-major, logit opacity, log scales, rot_0..3) with a
text sidecar `<name>.cams`, one line per view:
    fx fy cx cy W H  r00 r01 r02 t0 r10 r11 r12 t1 r20 r21 r22 t2
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptionError, FormatError, ValidationError
from .rotation import quat_canonical
from .sh import coeff_dim

GSMAP_MAGIC = b"GSMP"
GSMAP_VERSION = 1
GSMAP_HEADER_BYTES = 16
_CAMERA_STRUCT = struct.Struct("<II16d")  # width, height, fx fy cx cy, R, T

QUAT_NORM_TOL = 1e-5
ROTATION_TOL = 1e-6


@dataclass
class CameraView:
    """Pinhole camera with world-to-camera extrinsics (x_cam = R @ x_world + T)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    T: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        self.T = np.asarray(self.T, dtype=np.float64).reshape(3)

    @property
    def K(self) -> np.ndarray:
        """3x3 intrinsic matrix."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates, -R^T @ T."""
        return -self.R.T @ self.T

    def scaled(self, width: int, height: int) -> "CameraView":
        """Camera for the same frustum rendered at a different resolution."""
        sx, sy = width / self.width, height / self.height
        return CameraView(
            fx=self.fx * sx, fy=self.fy * sy, cx=self.cx * sx, cy=self.cy * sy,
            width=width, height=height, R=self.R.copy(), T=self.T.copy(),
        )

    def validate(self, label: str = "camera") -> None:
        vals = np.array([self.fx, self.fy, self.cx, self.cy])
        if not np.all(np.isfinite(vals)) or self.fx <= 0 or self.fy <= 0:
            raise ValidationError(f"{label}: intrinsics must be finite with fx, fy > 0")
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"{label}: resolution must be positive")
        if not (np.all(np.isfinite(self.R)) and np.all(np.isfinite(self.T))):
            raise ValidationError(f"{label}: extrinsics must be finite")
        if np.max(np.abs(self.R @ self.R.T - np.eye(3))) > ROTATION_TOL:
            raise ValidationError(f"{label}: R is not orthonormal within {ROTATION_TOL}")
        if abs(np.linalg.det(self.R) - 1.0) > ROTATION_TOL:
            raise ValidationError(f"{label}: R must be a proper rotation (det +1)")


@dataclass
class GaussianMap:
    """One Gaussian per pixel for a single view. All arrays are float32."""

    mu: np.ndarray       # (H, W, 3) world positions
    quat: np.ndarray     # (H, W, 4) unit quaternions, w >= 0
    scale: np.ndarray    # (H, W, 3) positive axis scales
    sh: np.ndarray       # (H, W, D) color coefficients, index 3*b + channel
    opacity: np.ndarray  # (H, W) in [0, 1]

    def __post_init__(self):
        self.mu = np.ascontiguousarray(self.mu, dtype=np.float32)
        self.quat = np.ascontiguousarray(self.quat, dtype=np.float32)
        self.scale = np.ascontiguousarray(self.scale, dtype=np.float32)
        self.sh = np.ascontiguousarray(self.sh, dtype=np.float32)
        self.opacity = np.ascontiguousarray(self.opacity, dtype=np.float32)

    @property
    def height(self) -> int:
        return self.mu.shape[0]

    @property
    def width(self) -> int:
        return self.mu.shape[1]

    def record_count(self) -> int:
        return self.height * self.width


@dataclass
class SceneView:
    camera: CameraView
    gaussians: GaussianMap


@dataclass
class SceneModel:
    """All views of a scene; every view shares one sh_degree."""

    sh_degree: int
    views: list[SceneView] = field(default_factory=list)

    @property
    def coeff_dim(self) -> int:
        return coeff_dim(self.sh_degree)

    def record_count(self) -> int:
        return sum(v.gaussians.record_count() for v in self.views)

    def validate(self) -> None:
        """Check every documented invariant; errors name the view and record."""
        if not 0 <= self.sh_degree <= 3:
            raise ValidationError(f"sh_degree must be in [0, 3], got {self.sh_degree}")
        d = self.coeff_dim
        for vi, view in enumerate(self.views):
            view.camera.validate(label=f"view {vi} camera")
            g = view.gaussians
            h, w = view.camera.height, view.camera.width
            shapes = {
                "mu": (h, w, 3), "quat": (h, w, 4), "scale": (h, w, 3),
                "sh": (h, w, d), "opacity": (h, w),
            }
            for name, want in shapes.items():
                arr = getattr(g, name)
                if arr.shape != want:
                    raise ValidationError(
                        f"view {vi}: {name} shape {arr.shape} != expected {want}"
                    )
            for name in shapes:
                arr = getattr(g, name)
                if not np.all(np.isfinite(arr)):
                    bad = int(np.argmax(~np.isfinite(arr.reshape(g.record_count(), -1)).all(axis=1)))
                    raise ValidationError(f"view {vi}, record {bad}: non-finite {name}")
            norms = np.linalg.norm(g.quat.astype(np.float64), axis=-1)
            off = np.abs(norms - 1.0) > QUAT_NORM_TOL
            if np.any(off):
                bad = int(np.argmax(off.ravel()))
                raise ValidationError(
                    f"view {vi}, record {bad}: quaternion norm {norms.ravel()[bad]:.6g} "
                    f"outside 1 +/- {QUAT_NORM_TOL}"
                )
            nonpos = ~(g.scale > 0)
            if np.any(nonpos):
                bad = int(np.argmax(nonpos.any(axis=-1).ravel()))
                raise ValidationError(f"view {vi}, record {bad}: scale must be > 0")
            out = (g.opacity < 0) | (g.opacity > 1)
            if np.any(out):
                bad = int(np.argmax(out.ravel()))
                raise ValidationError(f"view {vi}, record {bad}: opacity outside [0, 1]")

    def merged(self) -> "GaussianCloud":
        """Union of all views' Gaussians as flat arrays (for rendering)."""
        if not self.views:
            d = self.coeff_dim
            zeros = lambda *s: np.zeros(s, dtype=np.float32)
            return GaussianCloud(zeros(0, 3), zeros(0, 4), zeros(0, 3), zeros(0, d), zeros(0))
        cat = lambda name: np.concatenate(
            [getattr(v.gaussians, name).reshape(v.gaussians.record_count(), -1) for v in self.views]
        )
        op = np.concatenate([v.gaussians.opacity.ravel() for v in self.views])
        return GaussianCloud(cat("mu"), cat("quat"), cat("scale"), cat("sh"), op)


@dataclass
class GaussianCloud:
    """Flat arrays of Gaussians, the renderer's input."""

    mu: np.ndarray       # (N, 3)
    quat: np.ndarray     # (N, 4)
    scale: np.ndarray    # (N, 3)
    sh: np.ndarray       # (N, D)
    opacity: np.ndarray  # (N,)

    def __len__(self) -> int:
        return self.mu.shape[0]


def _read_exact(f, n: int, section: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CorruptionError(f"truncated file: {section} needs {n} bytes, got {len(data)}")
    return data


def save_scene(scene: SceneModel, path: str | Path) -> int:
    """Write the native format. Returns the number of bytes written."""
    scene.validate()
    d = scene.coeff_dim
    path = Path(path)
    with open(path, "wb") as f:
        f.write(GSMAP_MAGIC)
        f.write(struct.pack("<III", GSMAP_VERSION, len(scene.views), scene.sh_degree))
        for view in scene.views:
            cam = view.camera
            f.write(_CAMERA_STRUCT.pack(
                cam.width, cam.height, cam.fx, cam.fy, cam.cx, cam.cy,
                *cam.R.ravel().tolist(), *cam.T.tolist(),
            ))
            g = view.gaussians
            n = g.record_count()
            rec = np.concatenate(
                [
                    g.mu.reshape(n, 3), g.quat.reshape(n, 4), g.scale.reshape(n, 3),
                    g.sh.reshape(n, d), g.opacity.reshape(n, 1),
                ],
                axis=1,
            ).astype(np.float32)
            f.write(rec.tobytes())
    return path.stat().st_size


def load_scene(path: str | Path) -> SceneModel:
    """Read the native format; quaternions are sign-canonicalized on load."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != GSMAP_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {GSMAP_MAGIC!r}")
        version, view_count, sh_degree = struct.unpack("<III", _read_exact(f, 12, "header"))
        if version != GSMAP_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if not 0 <= sh_degree <= 3:
            raise FormatError(f"{path}: sh_degree {sh_degree} out of range")
        d = coeff_dim(sh_degree)
        rec_len = 3 + 4 + 3 + d + 1
        views = []
        for vi in range(view_count):
            raw = _read_exact(f, _CAMERA_STRUCT.size, f"view {vi} camera")
            vals = _CAMERA_STRUCT.unpack(raw)
            w, h = vals[0], vals[1]
            if w < 1 or h < 1 or w * h > 1 << 28:
                raise CorruptionError(f"{path}: view {vi} has implausible size {w}x{h}")
            cam = CameraView(
                fx=vals[2], fy=vals[3], cx=vals[4], cy=vals[5], width=w, height=h,
                R=np.array(vals[6:15]).reshape(3, 3), T=np.array(vals[15:18]),
            )
            n = w * h
            raw = _read_exact(f, n * rec_len * 4, f"view {vi} records")
            rec = np.frombuffer(raw, dtype="<f4").reshape(n, rec_len)
            quat = quat_canonical(rec[:, 3:7]).astype(np.float32)
            gmap = GaussianMap(
                mu=rec[:, 0:3].reshape(h, w, 3),
                quat=quat.reshape(h, w, 4),
                scale=rec[:, 7:10].reshape(h, w, 3),
                sh=rec[:, 10:10 + d].reshape(h, w, d),
                opacity=rec[:, 10 + d].reshape(h, w),
            )
            views.append(SceneView(camera=cam, gaussians=gmap))
        extra = f.read(1)
        if extra:
            raise CorruptionError(f"{path}: trailing bytes after last view")
    scene = SceneModel(sh_degree=sh_degree, views=views)
    scene.validate()
    return scene


# --- PLY interchange -------------------------------------------------------

_OPACITY_EPS = 1e-7


def _ply_property_names(sh_degree: int) -> list[str]:
    nb = (sh_degree + 1) ** 2
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(3 * (nb - 1))]
    names += ["opacity", "scale_0", "scale_1", "scale_2"]
    names += [f"rot_{i}" for i in range(4)]
    return names


def export_ply(scene: SceneModel, path: str | Path) -> Path:
    """Write the community splat PLY plus a `.cams` sidecar; returns sidecar path."""
    scene.validate()
    path = Path(path)
    nb = (scene.sh_degree + 1) ** 2
    names = _ply_property_names(scene.sh_degree)
    total = scene.record_count()

    data = np.zeros((total, len(names)), dtype=np.float32)
    row = 0
    for view in scene.views:
        g = view.gaussians
        n = g.record_count()
        sh = g.sh.reshape(n, nb, 3).astype(np.float64)  # (n, basis, channel)
        block = data[row:row + n]
        block[:, 0:3] = g.mu.reshape(n, 3)
        block[:, 6:9] = sh[:, 0, :]
        if nb > 1:
            # channel-major rest: all of R's higher coefficients, then G, then B
            block[:, 9:9 + 3 * (nb - 1)] = sh[:, 1:, :].transpose(0, 2, 1).reshape(n, -1)
        sig = np.clip(g.opacity.reshape(n).astype(np.float64), _OPACITY_EPS, 1 - _OPACITY_EPS)
        block[:, 9 + 3 * (nb - 1)] = np.log(sig / (1 - sig))
        block[:, 10 + 3 * (nb - 1):13 + 3 * (nb - 1)] = np.log(g.scale.reshape(n, 3).astype(np.float64))
        block[:, 13 + 3 * (nb - 1):] = g.quat.reshape(n, 4)
        row += n

    header = ["ply", "format binary_little_endian 1.0", f"element vertex {total}"]
    header += [f"property float {name}" for name in names]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(data.tobytes())

    cams_path = path.with_suffix(".cams")
    with open(cams_path, "w") as f:
        for view in scene.views:
            cam = view.camera
            rt = np.concatenate([cam.R, cam.T[:, None]], axis=1).ravel()
            nums = [cam.fx, cam.fy, cam.cx, cam.cy, float(cam.width), float(cam.height)]
            nums += rt.tolist()
            f.write(" ".join(f"{v:.17g}" for v in nums) + "\n")
    return cams_path


def import_ply(path: str | Path, cams_path: str | Path | None = None) -> SceneModel:
    """Read a splat PLY written by export_ply together with its `.cams` sidecar."""
    path = Path(path)
    cams_path = Path(cams_path) if cams_path is not None else path.with_suffix(".cams")
    if not cams_path.exists():
        raise FormatError(f"camera sidecar not found: {cams_path}")

    with open(path, "rb") as f:
        lines = []
        while True:
            line = f.readline()
            if not line:
                raise CorruptionError(f"{path}: end of file inside PLY header")
            lines.append(line.decode("ascii", "replace").strip())
            if lines[-1] == "end_header":
                break
            if len(lines) > 10000:
                raise FormatError(f"{path}: header too large")
        body = f.read()

    if not lines or lines[0] != "ply":
        raise FormatError(f"{path}: not a PLY file")
    if "format binary_little_endian 1.0" not in lines:
        raise FormatError(f"{path}: only binary_little_endian 1.0 is supported")
    count = None
    props = []
    for line in lines:
        if line.startswith("element vertex "):
            count = int(line.split()[-1])
        elif line.startswith("property float "):
            props.append(line.split()[-1])
        elif line.startswith("property ") and count is not None:
            raise FormatError(f"{path}: non-float property {line!r} unsupported")
    if count is None:
        raise FormatError(f"{path}: missing vertex element")

    n_rest = sum(1 for p in props if p.startswith("f_rest_"))
    if n_rest % 3 != 0:
        raise FormatError(f"{path}: f_rest count {n_rest} not divisible by 3")
    nb = n_rest // 3 + 1
    sh_degree = int(round(np.sqrt(nb))) - 1
    if (sh_degree + 1) ** 2 != nb or not 0 <= sh_degree <= 3:
        raise FormatError(f"{path}: basis count {nb} does not match a degree in [0, 3]")
    expect = _ply_property_names(sh_degree)
    if props != expect:
        raise FormatError(f"{path}: unexpected property layout")

    if len(body) != count * len(props) * 4:
        raise CorruptionError(
            f"{path}: vertex data is {len(body)} bytes, expected {count * len(props) * 4}"
        )
    data = np.frombuffer(body, dtype="<f4").reshape(count, len(props)).astype(np.float64)

    cams = []
    for li, line in enumerate(cams_path.read_text().splitlines()):
        if not line.strip():
            continue
        vals = [float(v) for v in line.split()]
        if len(vals) != 18:
            raise FormatError(f"{cams_path}: line {li + 1} has {len(vals)} fields, expected 18")
        rt = np.array(vals[6:]).reshape(3, 4)
        cams.append(CameraView(
            fx=vals[0], fy=vals[1], cx=vals[2], cy=vals[3],
            width=int(vals[4]), height=int(vals[5]), R=rt[:, :3], T=rt[:, 3],
        ))
    if sum(c.width * c.height for c in cams) != count:
        raise CorruptionError(
            f"{path}: vertex count {count} does not match camera grid sizes"
        )

    views = []
    row = 0
    rest_base = 9
    op_col = 9 + 3 * (nb - 1)
    for cam in cams:
        n = cam.width * cam.height
        block = data[row:row + n]
        row += n
        sh = np.zeros((n, nb, 3))
        sh[:, 0, :] = block[:, 6:9]
        if nb > 1:
            sh[:, 1:, :] = block[:, rest_base:rest_base + 3 * (nb - 1)].reshape(n, 3, nb - 1).transpose(0, 2, 1)
        quat = quat_canonical(block[:, op_col + 4:op_col + 8])
        gmap = GaussianMap(
            mu=block[:, 0:3].reshape(cam.height, cam.width, 3),
            quat=quat.reshape(cam.height, cam.width, 4),
            scale=np.exp(block[:, op_col + 1:op_col + 4]).reshape(cam.height, cam.width, 3),
            sh=sh.reshape(cam.height, cam.width, 3 * nb),
            opacity=(1.0 / (1.0 + np.exp(-block[:, op_col]))).reshape(cam.height, cam.width),
        )
        views.append(SceneView(camera=cam, gaussians=gmap))
    scene = SceneModel(sh_degree=sh_degree, views=views)
    scene.validate()
    return scene
