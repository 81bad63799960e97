"""Quaternion and rotation-matrix utilities.

Quaternions are stored (w, x, y, z) and composed with the Hamilton product,
so rot(a ⊗ b) = rot(a) @ rot(b). Canonical form has w >= 0; for w == 0 the
first nonzero vector component is made positive so every rotation has exactly
one representative.
"""

from __future__ import annotations

import numpy as np


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Return q scaled to unit norm (broadcasts over leading axes)."""
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    return q / norm


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Flip signs so w >= 0, breaking w == 0 ties on the first nonzero component."""
    q = np.asarray(q, dtype=np.float64)
    sign = np.zeros(q.shape[:-1])
    for i in range(4):
        comp = q[..., i]
        sign = np.where((sign == 0) & (comp != 0), np.sign(comp), sign)
    sign = np.where(sign == 0, 1.0, sign)
    return q * sign[..., None]


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a ⊗ b (broadcasts over leading axes)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, ax, ay, az = (a[..., i] for i in range(4))
    bw, bx, by, bz = (b[..., i] for i in range(4))
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    """Inverse rotation for unit quaternions."""
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Convert unit quaternions (..., 4) to rotation matrices (..., 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = (q[..., i] for i in range(4))
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Convert rotation matrices (..., 3, 3) to canonical unit quaternions.

    Shepperd's method: pick the largest of the four squared components to
    avoid catastrophic cancellation, vectorized over leading axes.
    """
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m, axis1=-2, axis2=-1)
    m00, m11, m22 = m[..., 0, 0], m[..., 1, 1], m[..., 2, 2]

    # Four candidate reconstructions, one per dominant component.
    cand = np.empty(m.shape[:-2] + (4, 4))
    s = np.sqrt(np.maximum(1.0 + t, 0.0)) * 2  # s = 4w
    with np.errstate(divide="ignore", invalid="ignore"):
        cand[..., 0, 0] = 0.25 * s
        cand[..., 0, 1] = (m[..., 2, 1] - m[..., 1, 2]) / s
        cand[..., 0, 2] = (m[..., 0, 2] - m[..., 2, 0]) / s
        cand[..., 0, 3] = (m[..., 1, 0] - m[..., 0, 1]) / s
        s = np.sqrt(np.maximum(1.0 + m00 - m11 - m22, 0.0)) * 2  # s = 4x
        cand[..., 1, 0] = (m[..., 2, 1] - m[..., 1, 2]) / s
        cand[..., 1, 1] = 0.25 * s
        cand[..., 1, 2] = (m[..., 0, 1] + m[..., 1, 0]) / s
        cand[..., 1, 3] = (m[..., 0, 2] + m[..., 2, 0]) / s
        s = np.sqrt(np.maximum(1.0 - m00 + m11 - m22, 0.0)) * 2  # s = 4y
        cand[..., 2, 0] = (m[..., 0, 2] - m[..., 2, 0]) / s
        cand[..., 2, 1] = (m[..., 0, 1] + m[..., 1, 0]) / s
        cand[..., 2, 2] = 0.25 * s
        cand[..., 2, 3] = (m[..., 1, 2] + m[..., 2, 1]) / s
        s = np.sqrt(np.maximum(1.0 - m00 - m11 + m22, 0.0)) * 2  # s = 4z
        cand[..., 3, 0] = (m[..., 1, 0] - m[..., 0, 1]) / s
        cand[..., 3, 1] = (m[..., 0, 2] + m[..., 2, 0]) / s
        cand[..., 3, 2] = (m[..., 1, 2] + m[..., 2, 1]) / s
        cand[..., 3, 3] = 0.25 * s

    scores = np.stack([t, m00 - m11 - m22, m11 - m00 - m22, m22 - m00 - m11], axis=-1)
    pick = np.argmax(scores, axis=-1)
    q = np.take_along_axis(cand, pick[..., None, None].repeat(4, axis=-1), axis=-2)
    return quat_canonical(quat_normalize(q[..., 0, :]))
