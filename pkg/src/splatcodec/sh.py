"""Real spherical harmonics basis, degrees 0..3, splatting convention.

Basis functions are indexed flat as (l, m) with m = -l..l inside each degree;
the constants and per-degree sign pattern follow the layout used across
splat-renderer implementations, so coefficients exported to PLY render
identically elsewhere. The basis is orthonormal over the unit sphere
(signs do not affect orthonormality).
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)

MAX_DEGREE = 3


def num_bases(degree: int) -> int:
    """Number of basis functions for a given maximum degree: (degree + 1)^2."""
    return (degree + 1) ** 2


def coeff_dim(degree: int) -> int:
    """Length of the per-record coefficient vector: three color channels per basis."""
    return 3 * num_bases(degree)


def eval_sh_bases(degree: int, dirs: np.ndarray) -> np.ndarray:
    """Evaluate all basis functions up to `degree` at unit directions.

    Parameters
    ----------
    degree : int
        Maximum degree, 0..3.
    dirs : ndarray (..., 3)
        Unit direction vectors.

    Returns
    -------
    ndarray (..., (degree + 1)^2)
        Basis values, flat (l, m) order.
    """
    if not 0 <= degree <= MAX_DEGREE:
        raise ValidationError(f"sh degree must be in [0, {MAX_DEGREE}], got {degree}")
    dirs = np.asarray(dirs, dtype=np.float64)
    if dirs.shape[-1] != 3:
        raise ValidationError(f"directions must have a trailing axis of 3, got {dirs.shape}")

    out = np.empty(dirs.shape[:-1] + (num_bases(degree),))
    out[..., 0] = SH_C0
    if degree < 1:
        return out

    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    out[..., 1] = -SH_C1 * y
    out[..., 2] = SH_C1 * z
    out[..., 3] = -SH_C1 * x
    if degree < 2:
        return out

    xx, yy, zz = x * x, y * y, z * z
    xy, yz, xz = x * y, y * z, x * z
    out[..., 4] = SH_C2[0] * xy
    out[..., 5] = SH_C2[1] * yz
    out[..., 6] = SH_C2[2] * (2.0 * zz - xx - yy)
    out[..., 7] = SH_C2[3] * xz
    out[..., 8] = SH_C2[4] * (xx - yy)
    if degree < 3:
        return out

    out[..., 9] = SH_C3[0] * y * (3.0 * xx - yy)
    out[..., 10] = SH_C3[1] * xy * z
    out[..., 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
    out[..., 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    out[..., 13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
    out[..., 14] = SH_C3[5] * z * (xx - yy)
    out[..., 15] = SH_C3[6] * x * (xx - 3.0 * yy)
    return out
