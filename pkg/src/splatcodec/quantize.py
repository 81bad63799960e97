"""Statistics-driven uniform quantization of float planes to 14-bit indices.

Each channel type carries a precision parameter alpha; the quantization step
is sigma / alpha where sigma is the channel's population standard deviation
(computed jointly over all views of an encode; all color components share the
dominant component's sigma). The per-plane offset is the plane minimum, so
index 0 always dequantizes to it exactly. Indices round half away from zero
and are clamped to [0, 16383]; clamped-at-maximum entries are counted as
truncated. A constant plane (sigma = 0) gets step 1 and quantizes to zeros.

Step and offset are rounded through float32 before use so the encoder's
arithmetic is identical to what a decoder reads back from a container.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

MAX_INDEX = 16383  # 14-bit range

# Default alpha per channel class.
CHANNEL_ALPHA: dict[str, float] = {
    "depth": 2048.0,
    "offset_xy": 256.0,
    "scale": 256.0,
    "rotation": 256.0,
    "color": 1024.0,
    "opacity": 256.0,
}


def default_alpha(channel: str) -> float:
    """Default precision parameter for a channel class."""
    try:
        return CHANNEL_ALPHA[channel]
    except KeyError:
        raise ValidationError(
            f"unknown channel {channel!r}; expected one of {sorted(CHANNEL_ALPHA)}"
        ) from None


@dataclass
class QuantMeta:
    """Dequantization parameters for one plane; step/offset are float32-exact."""

    step: float
    offset: float
    alpha: float
    count_truncated: int = 0


def _round_half_away(t: np.ndarray) -> np.ndarray:
    return np.where(t >= 0, np.floor(t + 0.5), np.ceil(t - 0.5))


def quantize_plane(
    values: np.ndarray, alpha: float, shared_sigma: float | None = None
) -> tuple[np.ndarray, QuantMeta]:
    """Quantize a float plane to uint16 indices in [0, 16383].

    Parameters
    ----------
    values : ndarray
        Finite float plane (any shape).
    alpha : float
        Precision parameter; step = sigma / alpha.
    shared_sigma : float, optional
        Use this sigma instead of the plane's own (channel statistics are
        usually pooled across views, and color components share one step).

    Returns
    -------
    (indices, meta)
        uint16 index array of the input shape, and the QuantMeta needed to
        dequantize it.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValidationError("cannot quantize an empty plane")
    if not np.all(np.isfinite(values)):
        bad = int(np.argmax(~np.isfinite(values).ravel()))
        raise ValidationError(f"non-finite value at flat index {bad}")
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValidationError(f"alpha must be positive and finite, got {alpha}")

    if shared_sigma is None:
        # np.std of a constant plane can return ~1e-16; pin it to exactly 0
        sigma = 0.0 if values.min() == values.max() else float(values.std())
    else:
        sigma = float(shared_sigma)
    if sigma < 0 or not np.isfinite(sigma):
        raise ValidationError(f"sigma must be finite and >= 0, got {sigma}")
    step = sigma / alpha if sigma > 0 else 1.0
    step = float(np.float32(step))
    if step == 0.0:  # sigma underflowed float32; treat as constant
        step = 1.0
    offset = float(np.float32(values.min()))

    raw = _round_half_away((values - offset) / step)
    raw = np.maximum(raw, 0.0)
    truncated = int(np.count_nonzero(raw > MAX_INDEX))
    indices = np.minimum(raw, MAX_INDEX).astype(np.uint16)
    meta = QuantMeta(step=step, offset=offset, alpha=float(np.float32(alpha)),
                     count_truncated=truncated)
    return indices, meta


def dequantize_plane(indices: np.ndarray, meta: QuantMeta) -> np.ndarray:
    """Map indices back to floats: offset + index * step, in float64."""
    indices = np.asarray(indices)
    if indices.size and (indices.min() < 0 or indices.max() > MAX_INDEX):
        raise ValidationError("indices outside [0, 16383]")
    return meta.offset + indices.astype(np.float64) * meta.step
