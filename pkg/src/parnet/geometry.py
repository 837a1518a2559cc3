"""Discrete curvature, arc length and Hausdorff distance for point polygons."""

import numpy as np
from scipy.spatial import cKDTree

from parnet._validation import check_points
from parnet.exceptions import InvalidArgumentError

#: Fitted curves are compared to data by sampling this many curve points per
#: data point, uniformly in parameter.
CURVE_SAMPLING_FACTOR = 10


def curvature(points):
    """Signed osculating-circle curvature at every point.

    Interior points get +-1/R of the circle through the point and its two
    neighbours (positive for a left turn).  Collinear or coincident triples
    give 0.  The two end points copy their interior neighbour.
    """
    p = check_points(points, min_points=3)
    a, b, c = p[:-2], p[1:-1], p[2:]
    ab = b - a
    bc = c - b
    ca = a - c
    cross = ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0]
    lengths = (np.linalg.norm(ab, axis=1) * np.linalg.norm(bc, axis=1)
               * np.linalg.norm(ca, axis=1))
    # kappa = 4 * area / (|ab| |bc| |ca|) with area = cross / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(lengths > 0, 2.0 * cross / lengths, 0.0)
    inner = np.where(np.isfinite(inner), inner, 0.0)
    return np.concatenate([inner[:1], inner, inner[-1:]])


def total_curvature(points, kappas=None):
    """Trapezoidal estimate of the integral of |kappa| along the polygon."""
    p = check_points(points)
    if kappas is None:
        kappas = curvature(p)
    kappas = np.abs(np.asarray(kappas, dtype=np.float64))
    if kappas.shape != (p.shape[0],):
        raise InvalidArgumentError(
            f"{kappas.size} curvature values for {p.shape[0]} points")
    chords = np.linalg.norm(np.diff(p, axis=0), axis=1)
    return float(np.sum((kappas[:-1] + kappas[1:]) * chords) / 2.0)


def arclen(points):
    """Length of the polygon through ``points``."""
    p = check_points(points)
    return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))


def cumulative_arclen(points):
    p = np.asarray(points, dtype=np.float64)
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))])


def _as_point_set(points, name):
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty (m, 2) array")
    return arr


def directed_hausdorff(a, b):
    """max over a of the distance to the nearest point of b."""
    a = _as_point_set(a, "a")
    b = _as_point_set(b, "b")
    dist, _ = cKDTree(b).query(a)
    return float(np.max(dist))


def hausdorff(a, b):
    """Symmetric discrete Hausdorff distance between two point sets."""
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def curve_hausdorff(curve, points, factor=CURVE_SAMPLING_FACTOR):
    """Hausdorff distance between data points and a densely sampled curve."""
    points = _as_point_set(points, "points")
    dense = curve.sample(max(2, factor * points.shape[0]))
    return hausdorff(points, dense)


def minmax_normalize(points):
    """Per-axis min-max scaling into [0, 1].

    Returns (normalized, mins, maxs).  An axis with zero extent maps to the
    constant 0.5; if both axes are degenerate the input is rejected.
    """
    p = np.asarray(points, dtype=np.float64)
    mins = p.min(axis=-2, keepdims=True)
    maxs = p.max(axis=-2, keepdims=True)
    extent = maxs - mins
    if np.any(np.all(extent == 0, axis=-1)):
        raise InvalidArgumentError("cannot normalize a sequence of identical points")
    safe = np.where(extent > 0, extent, 1.0)
    out = np.where(extent > 0, (p - mins) / safe, 0.5)
    return np.clip(out, 0.0, 1.0), mins[..., 0, :], maxs[..., 0, :]
