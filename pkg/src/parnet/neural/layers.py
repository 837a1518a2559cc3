"""Network heads and the differentiable B-spline approximation layer.

All functions work on batches: points (B, l, 2), parameters (B, l).
"""

import numpy as np

from parnet.bspline import basis_functions, check_schoenberg_whitney, KnotVector
from parnet.exceptions import InvalidArgumentError, InvalidStateError, SingularSystemError

KNOT_EPS = 1e-5
DEGREE = 3


def ppn_head(raw):
    """Accumulate positive increments and rescale so the last value is 1."""
    raw = np.asarray(raw, dtype=np.float64)
    if np.any(~(raw > 0)):
        raise InvalidStateError("parameter increments must be strictly positive")
    cum = np.cumsum(raw, axis=-1)
    t = np.concatenate([np.zeros(raw.shape[:-1] + (1,)), cum], axis=-1)
    t = t / cum[..., -1:]
    t[..., -1] = 1.0
    return t


def ppn_head_backward(raw, grad_t):
    """Gradient with respect to the increments, given dL/dt."""
    raw = np.asarray(raw, dtype=np.float64)
    grad_t = np.asarray(grad_t, dtype=np.float64)
    cum = np.cumsum(raw, axis=-1)
    total = cum[..., -1:]
    s = np.concatenate([np.zeros(raw.shape[:-1] + (1,)), cum], axis=-1)
    # t_i = s_i / total; s_i = sum_{j<i} raw_j
    tail = np.cumsum(grad_t[..., ::-1], axis=-1)[..., ::-1]
    weighted = np.sum(grad_t * s, axis=-1, keepdims=True)
    return tail[..., 1:] / total - weighted / total**2


def ksn_head(raw, eps=KNOT_EPS):
    """Threshold layer: clamp into [eps, 1 - eps].

    Raw values in (0, eps) or (1 - eps, 1) are clamped too, so a predicted
    knot never sits closer than ``eps`` to an end knot.
    """
    raw = np.asarray(raw, dtype=np.float64)
    out = np.clip(raw, eps, 1.0 - eps)
    return float(out) if out.ndim == 0 else out


def ksn_head_backward(raw, grad_u, eps=KNOT_EPS):
    raw = np.asarray(raw, dtype=np.float64)
    return np.where((raw > eps) & (raw < 1.0 - eps), grad_u, 0.0)


def single_knot_vector(u, degree=DEGREE):
    """Knots (0,...,0, u, 1,...,1); ``u`` may be a batch of shape (B,)."""
    u = np.asarray(u, dtype=np.float64)
    zeros = np.zeros(u.shape + (degree + 1,))
    return np.concatenate([zeros, u[..., None], zeros + 1.0], axis=-1)


def bezier_knot_vector(degree=DEGREE):
    return np.concatenate([np.zeros(degree + 1), np.ones(degree + 1)])


def guard_knot(u, t):
    """Keep a data parameter strictly on each side of the single knot.

    If (0, u) or (u, 1) holds no parameter, u is moved to the midpoint of
    the two parameters next to the empty side.  Returns (u, snapped_mask);
    callers pass zero gradient through snapped entries.
    """
    u = np.array(u, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    left_empty = ~np.any((t > 0.0) & (t < u[:, None]), axis=1)
    right_empty = ~np.any((t > u[:, None]) & (t < 1.0), axis=1)
    u = np.where(left_empty, 0.5 * (t[:, 1] + t[:, 2]), u)
    u = np.where(right_empty, 0.5 * (t[:, -2] + t[:, -3]), u)
    return u, left_empty | right_empty


def _bernstein(t):
    """Cubic Bernstein basis and its derivative, (B, l, 4) each."""
    s = 1.0 - t
    N = np.stack([s**3, 3 * t * s**2, 3 * t**2 * s, t**3], axis=-1)
    dN = np.stack([-3 * s**2, 3 * s**2 - 6 * t * s, 6 * t * s - 3 * t**2, 3 * t**2],
                  axis=-1)
    return N, dN


def _basis(knots, t, knot_index=None, need_dt=True):
    """Collocation matrix plus its t-derivative and/or knot-derivative."""
    knots = np.asarray(knots, dtype=np.float64)
    if knot_index is None:
        if knots.shape == (8,) and np.array_equal(knots, bezier_knot_vector()):
            N, dN_dt = _bernstein(t)
            return N, dN_dt, None
        N, dN_dt = basis_functions(knots, DEGREE, t, x_tangent=np.ones_like(t))
        return N, dN_dt, None
    tangent = np.zeros(knots.shape[-1])
    tangent[knot_index] = 1.0
    N, dN_du = basis_functions(knots, DEGREE, t, knot_tangent=tangent)
    dN_dt = None
    if need_dt:
        _, dN_dt = basis_functions(knots, DEGREE, t, x_tangent=np.ones_like(t))
    return N, dN_dt, dN_du


def _solve(A, rhs):
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"singular normal matrix in approximation layer: {exc}")


def approximation_forward(points, t, knots, knot_index=None, need_dt=True):
    """Batched least-squares fit without end point interpolation.

    Returns (losses (B,), cache).  Each loss is the mean Euclidean distance
    between the points and the fitted curve evaluated at ``t``.
    """
    p = np.asarray(points, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if p.ndim == 2:
        p, t = p[None], t[None]
    if p.shape[:2] != t.shape:
        raise InvalidArgumentError(f"points {p.shape} and parameters {t.shape} disagree")
    N, dN_dt, dN_du = _basis(knots, t, knot_index, need_dt)
    Nt = np.swapaxes(N, -1, -2)
    A = Nt @ N
    c = _solve(A, Nt @ p)
    approx = N @ c
    r = p - approx
    dist = np.linalg.norm(r, axis=-1)
    losses = dist.mean(axis=-1)
    cache = {"p": p, "t": t, "N": N, "dN_dt": dN_dt, "dN_du": dN_du, "A": A,
             "c": c, "r": r, "dist": dist, "approx": approx}
    return losses, cache


def approximation_backward(cache, upstream):
    """Gradients of sum_b upstream_b * loss_b w.r.t. t (B, l) and the knot (B,).

    Differentiates through the normal-equation solve c = A^{-1} N^T p with
    one adjoint solve Z = A^{-1} N^T G, where G = dL/d(approx):

        dL/dN = (G - N Z) c^T + r Z^T
    """
    N, A, c, r, dist = cache["N"], cache["A"], cache["c"], cache["r"], cache["dist"]
    upstream = np.broadcast_to(np.asarray(upstream, dtype=np.float64), dist.shape[:1])
    l = dist.shape[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(dist[..., None] > 0, r / dist[..., None], 0.0)
    G = -(upstream[:, None, None] / l) * unit
    Z = _solve(A, np.swapaxes(N, -1, -2) @ G)
    M = (G - N @ Z) @ np.swapaxes(c, -1, -2) + r @ np.swapaxes(Z, -1, -2)
    grad_t = None
    if cache["dN_dt"] is not None:
        grad_t = np.sum(M * cache["dN_dt"], axis=-1)
    grad_u = None
    if cache["dN_du"] is not None:
        grad_u = np.sum(M * cache["dN_du"], axis=(-1, -2))
    return grad_t, grad_u


def approximation_layer(points, t, kv):
    """Single-instance layer: returns (approximated points, loss).

    Raises SingularSystemError if ``t`` does not cover the spans of ``kv``.
    """
    if not isinstance(kv, KnotVector):
        kv = KnotVector(kv, DEGREE)
    if kv.degree != DEGREE:
        raise InvalidArgumentError("the approximation layer is cubic")
    if not check_schoenberg_whitney(t, kv):
        raise SingularSystemError("parameters leave a knot span empty")
    losses, cache = approximation_forward(points, t, kv.knots)
    return cache["approx"][0], float(losses[0])


def approximation_layer_backward(points, t, kv, upstream=1.0):
    """Single-instance gradients (grad_t, grad_u).

    ``grad_u`` is the derivative with respect to the single interior knot;
    it is None when ``kv`` has no interior knot.
    """
    if not isinstance(kv, KnotVector):
        kv = KnotVector(kv, DEGREE)
    interior = kv.interior.size
    if interior > 1:
        raise InvalidArgumentError("at most one interior knot is supported")
    knot_index = DEGREE + 1 if interior == 1 else None
    _, cache = approximation_forward(points, t, kv.knots, knot_index)
    grad_t, grad_u = approximation_backward(cache, np.array([upstream], dtype=np.float64))
    return grad_t[0], (None if grad_u is None else float(grad_u[0]))
