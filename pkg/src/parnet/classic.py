"""Classical parametrizations and averaging knot placement (the NKTP baseline)."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from parnet._validation import check_int, check_parameters, check_points, unflatten_points
from parnet.bspline import KnotVector
from parnet.exceptions import InvalidArgumentError


def parametrize_uniform(points):
    p = check_points(points)
    return np.linspace(0.0, 1.0, p.shape[0])


def _from_increments(increments):
    t = np.concatenate([[0.0], np.cumsum(increments)])
    t /= t[-1]
    t[-1] = 1.0
    return t


def _chords(points):
    p = check_points(points)
    chords = np.linalg.norm(np.diff(p, axis=0), axis=1)
    if np.any(chords == 0):
        raise InvalidArgumentError("coincident consecutive points have zero chord length")
    return chords


def parametrize_chordal(points):
    return _from_increments(_chords(points))


def parametrize_centripetal(points):
    return _from_increments(np.sqrt(_chords(points)))


PARAMETRIZATIONS = {
    "uniform": parametrize_uniform,
    "chordal": parametrize_chordal,
    "centripetal": parametrize_centripetal,
}


def knots_by_averaging(t, degree, num_ctrl):
    """Clamped knot vector for approximating data at parameters ``t``.

    Interior knots follow the averaging rule with stride
    d = (m + 1) / (num_ctrl - degree): knot j blends t_{i-1} and t_i with
    i = floor(j d) and weight alpha = j d - i.  Every knot span then
    contains at least one parameter.
    """
    t = check_parameters(t)
    degree = check_int(degree, "degree", minimum=1)
    num_ctrl = check_int(num_ctrl, "num_ctrl", minimum=degree + 1)
    if t.size < num_ctrl:
        raise InvalidArgumentError(
            f"{t.size} parameters cannot support {num_ctrl} control points")
    d = t.size / (num_ctrl - degree)
    interior = []
    for j in range(1, num_ctrl - degree):
        i = int(np.floor(j * d))
        alpha = j * d - i
        interior.append((1.0 - alpha) * t[i - 1] + alpha * t[i])
    return KnotVector.clamped(interior, degree, (t[0], t[-1]))


class ClassicParametrizer(TransformerMixin, BaseEstimator):
    """Stateless transformer from flat point rows to parameter vectors.

    Rows use the network layout ``(x_0..x_{l-1}, y_0..y_{l-1})``.

    Parameters
    ----------
    method : {"uniform", "chordal", "centripetal"}
    """

    def __init__(self, method="centripetal"):
        self.method = method

    def fit(self, X, y=None):
        if self.method not in PARAMETRIZATIONS:
            raise InvalidArgumentError(f"unknown parametrization {self.method!r}")
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def transform(self, X):
        func = PARAMETRIZATIONS[self.method]
        points = unflatten_points(np.atleast_2d(X))
        return np.stack([func(row) for row in points])
