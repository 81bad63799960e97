"""Single-file container for a compressed scene (.tspl).

Little-endian layout, in order:

    header   magic "TSPL" | version u32 | view_count u32 | width u32
             height u32 | sh_degree u32 | k u32 | flags u32
    cameras  per view: width u32 | height u32 | fx fy cx cy f64
             R 9xf64 | T 3xf64
    basis    d u32 | k u32 | lambda d x f32 | W (d*k) x f32 row-major
             (d = k = 0 for an empty container)
    quant    per plane: step f32 | offset f32 | alpha f32 | truncated u32
    planes   per plane: backend u8 | qp i16 | width u32 | height u32
             payload_len u32 | payload

Planes come per view in the fixed order depth, dx, dy, s1..s3, q1..q4,
c1..ck, opacity, so every view contributes 11 + k planes. Camera floats are
stored as float64 so encode -> decode preserves cameras bit-exactly; all other
metadata floats are float32.

Flag bits: 0 = offsets use the half-pixel-center convention, 1 = basis uses
the uncentered second moment, 2 = geometry is view-transformed, 3 = colors
are basis-reduced; bits 8..15 hold the default backend id.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis_reduction import ReductionBasis
from .errors import CorruptionError, FormatError, ValidationError
from .plane_codec import BACKEND_IDS, BACKEND_NAMES, EncodedPlane
from .quantize import QuantMeta
from .scene import CameraView
from .sh import coeff_dim

CONTAINER_MAGIC = b"TSPL"
CONTAINER_VERSION = 1
PLANES_PER_VIEW_BASE = 11  # depth, dx, dy, 3 scales, 4 rotations, opacity

_HEADER = struct.Struct("<4sIIIIIII")
_CAMERA = struct.Struct("<II16d")
_BASIS_DIMS = struct.Struct("<II")
_QUANT = struct.Struct("<fffI")
_PLANE_HEAD = struct.Struct("<BhIII")

HEADER_BYTES = _HEADER.size + _BASIS_DIMS.size  # fixed overhead of any container
CAMERA_BLOCK_BYTES = _CAMERA.size

_FLAG_HALF_PIXEL = 1 << 0
_FLAG_UNCENTERED = 1 << 1
_FLAG_VIEW_TRANSFORM = 1 << 2
_FLAG_BASIS_REDUCTION = 1 << 3

# Plane slot -> report group, for the fixed per-view ordering.
REPORT_GROUPS = ("position", "scale", "rotation", "color", "opacity")


@dataclass
class CompressedScene:
    """In-memory image of a container file."""

    width: int
    height: int
    sh_degree: int
    k: int
    cameras: list[CameraView] = field(default_factory=list)
    basis: ReductionBasis | None = None
    quant: list[QuantMeta] = field(default_factory=list)
    planes: list[EncodedPlane] = field(default_factory=list)
    view_transform: bool = True
    basis_reduction: bool = True
    half_pixel_offsets: bool = True
    uncentered_basis: bool = True
    default_backend: str = "internal-lossy"

    @property
    def view_count(self) -> int:
        return len(self.cameras)

    @property
    def planes_per_view(self) -> int:
        return PLANES_PER_VIEW_BASE + self.k

    def plane_group(self, slot: int) -> str:
        """Report group of a per-view plane slot (0 .. planes_per_view - 1)."""
        if slot < 3:
            return "position"
        if slot < 6:
            return "scale"
        if slot < 10:
            return "rotation"
        if slot < 10 + self.k:
            return "color"
        if slot == 10 + self.k:
            return "opacity"
        raise ValidationError(f"plane slot {slot} out of range")

    def validate(self) -> None:
        if self.view_count == 0:
            if self.planes or self.quant:
                raise ValidationError("a container without views cannot hold planes")
            return
        d = coeff_dim(self.sh_degree)
        if not 1 <= self.k <= d:
            raise ValidationError(f"k must be in [1, {d}], got {self.k}")
        expected = self.view_count * self.planes_per_view
        if len(self.planes) != expected:
            raise ValidationError(
                f"{len(self.planes)} planes for {self.view_count} views, expected {expected}"
            )
        if len(self.quant) != len(self.planes):
            raise ValidationError("one QuantMeta is required per plane")
        for pi, plane in enumerate(self.planes):
            if (plane.width, plane.height) != (self.width, self.height):
                raise ValidationError(
                    f"plane {pi} is {plane.width}x{plane.height}, "
                    f"container is {self.width}x{self.height}"
                )
            if plane.payload is not None and len(plane.payload) == 0:
                raise ValidationError(f"plane {pi} has an empty payload")
        if self.basis is None:
            raise ValidationError("a container with views needs a basis block")
        if self.basis.dim != d or self.basis.k != self.k:
            raise ValidationError(
                f"basis is {self.basis.dim}x{self.basis.k}, expected {d}x{self.k}"
            )


def _flags_of(cs: CompressedScene) -> int:
    flags = 0
    if cs.half_pixel_offsets:
        flags |= _FLAG_HALF_PIXEL
    if cs.uncentered_basis:
        flags |= _FLAG_UNCENTERED
    if cs.view_transform:
        flags |= _FLAG_VIEW_TRANSFORM
    if cs.basis_reduction:
        flags |= _FLAG_BASIS_REDUCTION
    flags |= (BACKEND_IDS[cs.default_backend] & 0xFF) << 8
    return flags


def container_size(cs: CompressedScene) -> int:
    """Exact size in bytes that write_container will produce."""
    total = HEADER_BYTES + CAMERA_BLOCK_BYTES * cs.view_count
    if cs.basis is not None:
        total += 4 * (cs.basis.dim + cs.basis.dim * cs.basis.k)
    total += _QUANT.size * len(cs.quant)
    total += sum(_PLANE_HEAD.size + len(p.payload) for p in cs.planes)
    return total


def write_container(cs: CompressedScene, path: str | Path) -> int:
    """Serialize; returns bytes written. Identical inputs give identical bytes."""
    cs.validate()
    path = Path(path)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(
            CONTAINER_MAGIC, CONTAINER_VERSION, cs.view_count, cs.width, cs.height,
            cs.sh_degree, cs.k, _flags_of(cs),
        ))
        for cam in cs.cameras:
            f.write(_CAMERA.pack(
                cam.width, cam.height, cam.fx, cam.fy, cam.cx, cam.cy,
                *cam.R.ravel().tolist(), *cam.T.tolist(),
            ))
        if cs.basis is None:
            f.write(_BASIS_DIMS.pack(0, 0))
        else:
            f.write(_BASIS_DIMS.pack(cs.basis.dim, cs.basis.k))
            f.write(cs.basis.weights.astype("<f4").tobytes())
            f.write(cs.basis.matrix.astype("<f4").tobytes())
        for meta in cs.quant:
            f.write(_QUANT.pack(meta.step, meta.offset, meta.alpha, meta.count_truncated))
        for plane in cs.planes:
            f.write(_PLANE_HEAD.pack(
                BACKEND_IDS[plane.backend], plane.qp, plane.width, plane.height,
                len(plane.payload),
            ))
            f.write(plane.payload)
    size = path.stat().st_size
    assert size == container_size(cs)
    return size


def _read_exact(f, n: int, section: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CorruptionError(f"truncated container: {section} needs {n} bytes, got {len(data)}")
    return data


def read_container(path: str | Path) -> CompressedScene:
    """Parse and validate a container file."""
    path = Path(path)
    with open(path, "rb") as f:
        head = _read_exact(f, _HEADER.size, "header")
        magic, version, view_count, width, height, sh_degree, k, flags = _HEADER.unpack(head)
        if magic != CONTAINER_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {CONTAINER_MAGIC!r}")
        if version != CONTAINER_VERSION:
            raise FormatError(f"{path}: unsupported container version {version}")
        if sh_degree > 3:
            raise CorruptionError(f"{path}: sh_degree {sh_degree} out of range")
        backend_id = (flags >> 8) & 0xFF
        if backend_id not in BACKEND_NAMES:
            raise CorruptionError(f"{path}: unknown default backend id {backend_id}")

        cameras = []
        for vi in range(view_count):
            vals = _CAMERA.unpack(_read_exact(f, _CAMERA.size, f"camera {vi}"))
            cameras.append(CameraView(
                fx=vals[2], fy=vals[3], cx=vals[4], cy=vals[5],
                width=vals[0], height=vals[1],
                R=np.array(vals[6:15]).reshape(3, 3), T=np.array(vals[15:18]),
            ))

        d_stored, k_stored = _BASIS_DIMS.unpack(_read_exact(f, _BASIS_DIMS.size, "basis dims"))
        basis = None
        if view_count > 0:
            if d_stored != coeff_dim(sh_degree) or k_stored != k:
                raise CorruptionError(
                    f"{path}: basis dims {d_stored}x{k_stored} do not match header "
                    f"(d={coeff_dim(sh_degree)}, k={k})"
                )
            lam = np.frombuffer(
                _read_exact(f, 4 * d_stored, "basis weights"), dtype="<f4"
            ).astype(np.float64)
            mat = np.frombuffer(
                _read_exact(f, 4 * d_stored * k_stored, "basis matrix"), dtype="<f4"
            ).astype(np.float64).reshape(d_stored, k_stored)
            basis = ReductionBasis(weights=lam, matrix=mat)
        elif d_stored or k_stored:
            raise CorruptionError(f"{path}: empty container with nonempty basis dims")

        plane_count = view_count * (PLANES_PER_VIEW_BASE + k)
        quant = []
        for pi in range(plane_count):
            step, offset, alpha, truncated = _QUANT.unpack(
                _read_exact(f, _QUANT.size, f"quant meta {pi}")
            )
            quant.append(QuantMeta(step=step, offset=offset, alpha=alpha,
                                   count_truncated=truncated))

        planes = []
        for pi in range(plane_count):
            bid, qp, pw, ph, plen = _PLANE_HEAD.unpack(
                _read_exact(f, _PLANE_HEAD.size, f"plane header {pi}")
            )
            if bid not in BACKEND_NAMES:
                raise CorruptionError(f"{path}: plane {pi} has unknown backend id {bid}")
            payload = _read_exact(f, plen, f"plane payload {pi}")
            planes.append(EncodedPlane(backend=BACKEND_NAMES[bid], width=pw, height=ph,
                                       qp=qp, payload=payload))
        if f.read(1):
            raise CorruptionError(f"{path}: trailing bytes after last plane")

    cs = CompressedScene(
        width=width, height=height, sh_degree=sh_degree, k=k,
        cameras=cameras, basis=basis, quant=quant, planes=planes,
        view_transform=bool(flags & _FLAG_VIEW_TRANSFORM),
        basis_reduction=bool(flags & _FLAG_BASIS_REDUCTION),
        half_pixel_offsets=bool(flags & _FLAG_HALF_PIXEL),
        uncentered_basis=bool(flags & _FLAG_UNCENTERED),
        default_backend=BACKEND_NAMES[backend_id],
    )
    cs.validate()
    return cs


def bit_allocation_report(cs: CompressedScene) -> dict:
    """Payload bytes per component group plus metadata; sums exactly to file size.

    Returns {"total_bytes", "groups": {name: {"bytes", "percent"}}} where the
    groups are position, scale, rotation, color, opacity, metadata. Metadata
    covers everything that is not plane payload: header, cameras, basis, quant
    parameters, and per-plane framing.
    """
    total = container_size(cs)
    groups = {name: 0 for name in REPORT_GROUPS}
    ppv = cs.planes_per_view
    for pi, plane in enumerate(cs.planes):
        groups[cs.plane_group(pi % ppv)] += len(plane.payload)
    payload_total = sum(groups.values())
    groups["metadata"] = total - payload_total
    report = {"total_bytes": total, "groups": {}}
    for name in (*REPORT_GROUPS, "metadata"):
        b = groups[name]
        report["groups"][name] = {
            "bytes": b,
            "percent": (100.0 * b / total) if total else 0.0,
        }
    return report
