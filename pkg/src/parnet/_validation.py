"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np

from parnet.exceptions import InvalidArgumentError


def check_points(points, min_points=2, allow_repeats=True, name="points"):
    """Return ``points`` as a float64 array of shape (m, 2).

    Raises InvalidArgumentError for the wrong shape, non-finite values, too
    few points or a polygon of zero total length.  With
    ``allow_repeats=False`` any zero-length chord is rejected as well.
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidArgumentError(
            f"{name} must have shape (m, 2), got {arr.shape}")
    if arr.shape[0] < min_points:
        raise InvalidArgumentError(
            f"{name} needs at least {min_points} points, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    chords = np.linalg.norm(np.diff(arr, axis=0), axis=1)
    if arr.shape[0] >= 2 and not np.any(chords > 0):
        raise InvalidArgumentError(f"{name} has zero total length")
    if not allow_repeats and np.any(chords == 0):
        raise InvalidArgumentError(f"{name} has coincident consecutive points")
    return arr


def check_parameters(t, n_points=None, name="t"):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 1:
        raise InvalidArgumentError(f"{name} must be one-dimensional")
    if n_points is not None and t.shape[0] != n_points:
        raise InvalidArgumentError(
            f"{name} has {t.shape[0]} values for {n_points} points")
    if not np.all(np.isfinite(t)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    if np.any(np.diff(t) < 0):
        raise InvalidArgumentError(f"{name} must be non-decreasing")
    return t


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidArgumentError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise InvalidArgumentError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def flatten_points(points):
    """(m, 2) points -> the network layout (x_0..x_{m-1}, y_0..y_{m-1})."""
    points = np.asarray(points, dtype=np.float64)
    return np.concatenate([points[..., 0], points[..., 1]], axis=-1)


def unflatten_points(flat):
    """Inverse of :func:`flatten_points`; works on a batch of rows too."""
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape[-1] % 2:
        raise InvalidArgumentError("flat point rows must have even length")
    m = flat.shape[-1] // 2
    return np.stack([flat[..., :m], flat[..., m:]], axis=-1)
