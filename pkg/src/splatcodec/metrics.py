"""Image quality metrics and image file output (PNG, PFM)."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.signal import convolve2d

from .errors import FormatError, ValidationError


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio, 10*log10(1/MSE), for images in [0, 1].

    Identical images return math.inf.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2
    xs = np.arange(size) - half
    g = np.exp(-(xs**2) / (2 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Channels are scored independently and averaged; windows are applied in
    'valid' mode. For images smaller than 11 pixels the window shrinks to the
    largest odd size that fits.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.ndim != 3:
        raise ValidationError(f"expected (H, W[, C]) images, got shape {a.shape}")
    h, w = a.shape[:2]
    size = min(11, h, w)
    if size % 2 == 0:
        size -= 1
    if size < 1:
        raise ValidationError("image too small for SSIM")
    window = _gaussian_window(size, 1.5 * size / 11.0)
    c1, c2 = 0.01**2, 0.03**2

    scores = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mx = convolve2d(x, window, mode="valid")
        my = convolve2d(y, window, mode="valid")
        mxx = convolve2d(x * x, window, mode="valid") - mx * mx
        myy = convolve2d(y * y, window, mode="valid") - my * my
        mxy = convolve2d(x * y, window, mode="valid") - mx * my
        num = (2 * mx * my + c1) * (2 * mxy + c2)
        den = (mx * mx + my * my + c1) * (mxx + myy + c2)
        scores.append(float(np.mean(num / den)))
    return float(np.mean(scores))


def save_png(image: np.ndarray, path: str | Path) -> None:
    """Write a float image in [0, 1] as 8-bit PNG."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = np.repeat(image[:, :, None], 3, axis=2)
    data = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(Path(path), format="PNG")


def save_pfm(image: np.ndarray, path: str | Path) -> None:
    """Write a float image as little-endian PFM (color 'PF', bottom row first)."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.shape[2] == 1:
        header, data = "Pf", image[:, :, 0]
    elif image.shape[2] == 3:
        header, data = "PF", image
    else:
        raise ValidationError(f"PFM supports 1 or 3 channels, got {image.shape[2]}")
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(f"{header}\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(np.flipud(data).astype("<f4").tobytes())


def load_pfm(path: str | Path) -> np.ndarray:
    """Read a PFM written by save_pfm (little-endian only)."""
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header not in (b"PF", b"Pf"):
            raise FormatError(f"{path}: not a PFM file")
        dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline())
        if scale >= 0:
            raise FormatError(f"{path}: big-endian PFM unsupported")
        channels = 3 if header == b"PF" else 1
        data = np.frombuffer(f.read(w * h * channels * 4), dtype="<f4")
        if data.size != w * h * channels:
            raise FormatError(f"{path}: truncated PFM payload")
    image = data.reshape(h, w, channels) if channels == 3 else data.reshape(h, w)
    return np.flipud(image).copy()
