"""Entropy coding of 14-bit index planes.

Built-in lossless backend (always available, used by tests as the reference):

  * median-edge-detector prediction in raster order; for neighbors a (left),
    b (above), c (above-left), all 0 outside the plane:
        c >= max(a, b) -> min(a, b)
        c <= min(a, b) -> max(a, b)
        otherwise     -> a + b - c
  * residuals are zigzag-mapped to unsigned (r >= 0 -> 2r, r < 0 -> -2r - 1)
  * Golomb-Rice coding with one parameter kr per 16x16 block, chosen to
    minimize that block's length and signaled in a 4-bit header. kr spans
    [0, 14]; header value 15 is an escape meaning "all residuals zero",
    so constant planes cost 4 bits per block. Codes are emitted MSB-first:
    quotient as unary (q ones, one zero), then kr remainder bits.

Built-in lossy backend: indices are requantized by the divisor
D = round(2^(qp/6)) (rounding half away from zero), coded losslessly, and
reconstructed as index * D clamped to the 14-bit range, so the index error is
at most ceil(D / 2). qp = 0 is transparent.

External HEVC backend: planes are handed to an external intra-only encoder as
raw 16-bit little-endian monochrome frames with 14 significant bits,
LSB-aligned. A missing binary raises BackendUnavailableError so the caller
can fall back or abort; decoded samples are clamped back into 14 bits.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BackendUnavailableError,
    BitstreamError,
    ExternalCodecError,
    ValidationError,
)
from .quantize import MAX_INDEX

BLOCK = 16
KR_MAX = 14
KR_ESCAPE = 15
_MAX_UNSIGNED = 2 * MAX_INDEX  # largest zigzag value a valid stream can hold

BACKEND_LOSSLESS = "internal-lossless"
BACKEND_LOSSY = "internal-lossy"
BACKEND_HEVC = "hevc"
BACKEND_IDS = {BACKEND_LOSSLESS: 1, BACKEND_LOSSY: 2, BACKEND_HEVC: 3}
BACKEND_NAMES = {v: k for k, v in BACKEND_IDS.items()}

# Per-channel QP offsets added to the global QP.
CHANNEL_QP_OFFSET: dict[str, int] = {
    "depth": -4,
    "offset_xy": 12,
    "scale": 0,
    "rotation": 9,
    "color": 3,
    "opacity": 0,
}

ENV_HEVC_ENCODER = "SPLATCODEC_HEVC_ENC"
ENV_HEVC_DECODER = "SPLATCODEC_HEVC_DEC"
ENV_HEVC_ENCODER_ARGS = "SPLATCODEC_HEVC_ENC_ARGS"
ENV_HEVC_DECODER_ARGS = "SPLATCODEC_HEVC_DEC_ARGS"


@dataclass
class QpConfig:
    """Global QP plus per-channel offsets; effective QP is their sum, floored at 0."""

    qg: int = 0
    offsets: dict[str, int] = field(default_factory=lambda: dict(CHANNEL_QP_OFFSET))

    def effective(self, channel: str) -> int:
        if channel not in self.offsets:
            raise ValidationError(f"no QP offset for channel {channel!r}")
        return max(0, self.qg + self.offsets[channel])


@dataclass
class EncodedPlane:
    """One coded plane: backend name, dimensions, QP used (lossy only), payload."""

    backend: str
    width: int
    height: int
    qp: int
    payload: bytes


def divisor_for_qp(qp: int) -> int:
    """Requantization divisor D = round(2^(qp/6)), at least 1."""
    if qp < 0:
        raise ValidationError(f"qp must be >= 0, got {qp}")
    return max(1, int(np.floor(2.0 ** (qp / 6.0) + 0.5)))


def _check_plane(plane: np.ndarray) -> np.ndarray:
    plane = np.asarray(plane)
    if plane.ndim != 2 or plane.size == 0:
        raise ValidationError(f"plane must be nonempty 2-D, got shape {plane.shape}")
    if not np.issubdtype(plane.dtype, np.integer):
        raise ValidationError(f"plane must be integer-typed, got {plane.dtype}")
    if plane.min() < 0 or plane.max() > MAX_INDEX:
        raise ValidationError("plane values must lie in [0, 16383]")
    return plane.astype(np.int32)


def _med_predict(values: np.ndarray) -> np.ndarray:
    """Vectorized MED prediction from the true neighbor values (encoder side)."""
    a = np.zeros_like(values)
    b = np.zeros_like(values)
    c = np.zeros_like(values)
    a[:, 1:] = values[:, :-1]
    b[1:, :] = values[:-1, :]
    c[1:, 1:] = values[:-1, :-1]
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    return np.where(c >= hi, lo, np.where(c <= lo, hi, a + b - c))


def _to_unsigned(residual: np.ndarray) -> np.ndarray:
    return np.where(residual >= 0, 2 * residual, -2 * residual - 1).astype(np.uint32)


def _to_signed(unsigned: int) -> int:
    return (unsigned >> 1) if unsigned % 2 == 0 else -((unsigned + 1) >> 1)


class _BitWriter:
    def __init__(self):
        self.buf = bytearray()
        self.acc = 0
        self.nbits = 0

    def write(self, value: int, length: int) -> None:
        self.acc = (self.acc << length) | value
        self.nbits += length
        while self.nbits >= 8:
            self.nbits -= 8
            self.buf.append((self.acc >> self.nbits) & 0xFF)
        self.acc &= (1 << self.nbits) - 1

    def getvalue(self) -> bytes:
        if self.nbits:
            return bytes(self.buf) + bytes([(self.acc << (8 - self.nbits)) & 0xFF])
        return bytes(self.buf)


def _block_ranges(size: int) -> list[tuple[int, int]]:
    return [(i, min(i + BLOCK, size)) for i in range(0, size, BLOCK)]


def encode_plane_lossless(plane: np.ndarray) -> EncodedPlane:
    """Losslessly code a 14-bit plane; identical inputs give identical payloads."""
    values = _check_plane(plane)
    h, w = values.shape
    unsigned = _to_unsigned(values - _med_predict(values))

    writer = _BitWriter()
    krs = np.arange(KR_MAX + 1, dtype=np.uint32)
    for i0, i1 in _block_ranges(h):
        for j0, j1 in _block_ranges(w):
            u = unsigned[i0:i1, j0:j1].ravel()
            if not u.any():
                writer.write(KR_ESCAPE, 4)
                continue
            # total GR length per candidate kr: n*(kr + 1) + sum(u >> kr)
            totals = (u[:, None] >> krs[None, :]).sum(axis=0, dtype=np.int64)
            totals += u.shape[0] * (krs + 1)
            kr = int(np.argmin(totals))
            writer.write(kr, 4)
            rem_mask = (1 << kr) - 1
            for val in u.tolist():
                q = val >> kr
                writer.write((((1 << q) - 1) << (kr + 1)) | (val & rem_mask), q + 1 + kr)
    return EncodedPlane(backend=BACKEND_LOSSLESS, width=w, height=h, qp=0,
                        payload=writer.getvalue())


def _decode_unsigned(payload: bytes, width: int, height: int) -> list[list[int]]:
    """Read the blocked GR stream back into unsigned residual rows."""
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8)).tolist()
    total = len(bits)
    unsigned = [[0] * width for _ in range(height)]
    pos = 0
    for i0, i1 in _block_ranges(height):
        for j0, j1 in _block_ranges(width):
            if pos + 4 > total:
                raise BitstreamError("truncated block header", pos)
            kr = (bits[pos] << 3) | (bits[pos + 1] << 2) | (bits[pos + 2] << 1) | bits[pos + 3]
            pos += 4
            if kr == KR_ESCAPE:
                continue
            max_q = _MAX_UNSIGNED >> kr
            for i in range(i0, i1):
                row = unsigned[i]
                for j in range(j0, j1):
                    q = 0
                    try:
                        while bits[pos]:
                            q += 1
                            pos += 1
                            if q > max_q:
                                raise BitstreamError("unary run too long", pos)
                        pos += 1
                        rem = 0
                        for _ in range(kr):
                            rem = (rem << 1) | bits[pos]
                            pos += 1
                    except IndexError:
                        raise BitstreamError("truncated code", total) from None
                    row[j] = (q << kr) | rem
    return unsigned


def decode_plane_lossless(payload: bytes, width: int, height: int) -> np.ndarray:
    """Decode a lossless payload back to the exact uint16 plane."""
    if width < 1 or height < 1:
        raise ValidationError(f"invalid plane size {width}x{height}")
    unsigned = _decode_unsigned(payload, width, height)
    out = np.zeros((height, width), dtype=np.uint16)
    prev: list[int] = [0] * width
    end = len(payload) * 8
    for i in range(height):
        urow = unsigned[i]
        vals = [0] * width
        left = 0
        upleft = 0
        for j in range(width):
            up = prev[j]
            if upleft >= (left if left >= up else up):
                pred = left if left <= up else up
            elif upleft <= (left if left <= up else up):
                pred = left if left >= up else up
            else:
                pred = left + up - upleft
            u = urow[j]
            val = pred + ((u >> 1) if u % 2 == 0 else -((u + 1) >> 1))
            if val < 0 or val > MAX_INDEX:
                raise BitstreamError(f"sample ({i}, {j}) decodes outside [0, 16383]", end)
            vals[j] = val
            upleft = up
            left = val
        out[i] = vals
        prev = vals
    return out


def encode_plane_lossy(plane: np.ndarray, qp: int) -> EncodedPlane:
    """Requantize indices by D = round(2^(qp/6)) and code the reduced plane."""
    values = _check_plane(plane)
    d = divisor_for_qp(qp)
    reduced = (2 * values + d) // (2 * d)  # round half away from zero, values >= 0
    inner = encode_plane_lossless(reduced)
    return EncodedPlane(backend=BACKEND_LOSSY, width=inner.width, height=inner.height,
                        qp=qp, payload=inner.payload)


def decode_plane(encoded: EncodedPlane, hevc_decoder: str | None = None) -> np.ndarray:
    """Decode any EncodedPlane back to a uint16 index plane."""
    if encoded.backend == BACKEND_LOSSLESS:
        return decode_plane_lossless(encoded.payload, encoded.width, encoded.height)
    if encoded.backend == BACKEND_LOSSY:
        reduced = decode_plane_lossless(encoded.payload, encoded.width, encoded.height)
        d = divisor_for_qp(encoded.qp)
        return np.minimum(reduced.astype(np.int64) * d, MAX_INDEX).astype(np.uint16)
    if encoded.backend == BACKEND_HEVC:
        return decode_plane_hevc(encoded, hevc_decoder)
    raise ValidationError(f"unknown backend {encoded.backend!r}")


# --- external HEVC adapter --------------------------------------------------

_DEFAULT_ENC_ARGS = (
    "-i {input} -b {bitstream} -wdt {width} -hgt {height} -f 1 -fr 30 -q {qp} "
    "--InputBitDepth=14 --InternalBitDepth=14 --InputChromaFormat=400 "
    "--ConformanceWindowMode=1"
)
_DEFAULT_DEC_ARGS = "-b {bitstream} -o {output}"


def _resolve_binary(path: str | None, env_var: str, role: str) -> str:
    binary = path or os.environ.get(env_var)
    if not binary:
        raise BackendUnavailableError(
            f"no HEVC {role} configured (flag or {env_var} environment variable)"
        )
    resolved = shutil.which(binary)
    if resolved is None:
        raise BackendUnavailableError(f"HEVC {role} not found or not executable: {binary}")
    return resolved


def _run(cmd: list[str], role: str) -> None:
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=600)
    except FileNotFoundError:
        raise BackendUnavailableError(f"HEVC {role} vanished: {cmd[0]}") from None
    except subprocess.TimeoutExpired:
        raise ExternalCodecError(f"HEVC {role} timed out: {' '.join(cmd)}") from None
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout or "").strip().splitlines()[-5:]
        raise ExternalCodecError(
            f"HEVC {role} exited with {proc.returncode}: " + " | ".join(tail)
        )


def encode_plane_hevc(
    plane: np.ndarray,
    qp: int,
    encoder_path: str | None = None,
    work_dir: str | Path | None = None,
) -> EncodedPlane:
    """Code a plane with an external HEVC encoder (raw 16-bit LE mono frames).

    The argument template can be overridden with SPLATCODEC_HEVC_ENC_ARGS
    using the placeholders {input} {bitstream} {width} {height} {qp}.
    """
    values = _check_plane(plane)
    binary = _resolve_binary(encoder_path, ENV_HEVC_ENCODER, "encoder")
    h, w = values.shape
    with tempfile.TemporaryDirectory(dir=work_dir) as tmp:
        raw = Path(tmp) / "plane.yuv"
        bitstream = Path(tmp) / "plane.hevc"
        values.astype("<u2").tofile(raw)
        template = os.environ.get(ENV_HEVC_ENCODER_ARGS, _DEFAULT_ENC_ARGS)
        args = [
            part.format(input=str(raw), bitstream=str(bitstream),
                        width=w, height=h, qp=max(0, qp))
            for part in template.split()
        ]
        _run([binary] + args, "encoder")
        if not bitstream.exists() or bitstream.stat().st_size == 0:
            raise ExternalCodecError("HEVC encoder produced no bitstream")
        payload = bitstream.read_bytes()
    return EncodedPlane(backend=BACKEND_HEVC, width=w, height=h, qp=max(0, qp),
                        payload=payload)


def decode_plane_hevc(
    encoded: EncodedPlane,
    decoder_path: str | None = None,
    work_dir: str | Path | None = None,
) -> np.ndarray:
    """Decode an HEVC payload; samples are clamped back into [0, 16383]."""
    binary = _resolve_binary(decoder_path, ENV_HEVC_DECODER, "decoder")
    with tempfile.TemporaryDirectory(dir=work_dir) as tmp:
        bitstream = Path(tmp) / "plane.hevc"
        raw = Path(tmp) / "plane.yuv"
        bitstream.write_bytes(encoded.payload)
        template = os.environ.get(ENV_HEVC_DECODER_ARGS, _DEFAULT_DEC_ARGS)
        args = [
            part.format(bitstream=str(bitstream), output=str(raw),
                        width=encoded.width, height=encoded.height)
            for part in template.split()
        ]
        _run([binary] + args, "decoder")
        if not raw.exists():
            raise ExternalCodecError("HEVC decoder produced no output frame")
        samples = np.fromfile(raw, dtype="<u2")
    expected = encoded.width * encoded.height
    if samples.size < expected:
        raise ExternalCodecError(
            f"HEVC decoder returned {samples.size} samples, expected {expected}"
        )
    plane = samples[:expected].reshape(encoded.height, encoded.width)
    return np.minimum(plane, MAX_INDEX).astype(np.uint16)
