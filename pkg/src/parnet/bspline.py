"""B-spline basis evaluation and least-squares curve fitting.

All basis computations go through one vectorised Cox-de Boor recursion
(:func:`basis_functions`) that also propagates a forward-mode tangent, so the
same code yields derivatives with respect to the curve parameter and with
respect to a single knot.  The recursion broadcasts over leading batch axes,
which is what the approximation layer in :mod:`parnet.neural` relies on.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from parnet._validation import check_int, check_parameters, check_points
from parnet.exceptions import DomainError, InvalidArgumentError, SingularSystemError


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Clamped, non-decreasing knot vector of a degree-``degree`` spline."""

    knots: np.ndarray
    degree: int = 3

    def __post_init__(self):
        degree = check_int(self.degree, "degree", minimum=1)
        knots = np.array(self.knots, dtype=np.float64)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "degree", degree)
        if knots.ndim != 1 or knots.size < 2 * (degree + 1):
            raise InvalidArgumentError(
                f"a degree-{degree} knot vector needs at least "
                f"{2 * (degree + 1)} knots, got {knots.size}")
        if not np.all(np.isfinite(knots)):
            raise InvalidArgumentError("knots must be finite")
        if np.any(np.diff(knots) < 0):
            raise InvalidArgumentError("knots must be non-decreasing")
        k = degree
        if np.any(knots[:k + 1] != knots[0]) or np.any(knots[-k - 1:] != knots[-1]):
            raise InvalidArgumentError("end knots must have multiplicity degree+1")
        if not (knots[k] < knots[k + 1] and knots[-k - 2] < knots[-k - 1]):
            raise InvalidArgumentError(
                "end knots must have multiplicity exactly degree+1")

    @classmethod
    def clamped(cls, interior=(), degree=3, domain=(0.0, 1.0)):
        a, b = domain
        interior = np.sort(np.asarray(interior, dtype=np.float64).ravel())
        knots = np.concatenate([np.full(degree + 1, a), interior,
                                np.full(degree + 1, b)])
        return cls(knots, degree)

    @property
    def n_basis(self):
        """Number of basis functions, i.e. of control points."""
        return self.knots.size - self.degree - 1

    @property
    def interior(self):
        return self.knots[self.degree + 1:-self.degree - 1]

    @property
    def domain(self):
        return float(self.knots[0]), float(self.knots[-1])

    def spans(self):
        """Non-degenerate knot spans as an (s, 2) array of (start, end)."""
        distinct = np.unique(self.knots)
        return np.stack([distinct[:-1], distinct[1:]], axis=1)

    def insert(self, value):
        a, b = self.domain
        if not a < value < b:
            raise InvalidArgumentError(f"knot {value} outside open domain ({a}, {b})")
        return KnotVector.clamped(np.append(self.interior, value), self.degree,
                                  self.domain)

    def __eq__(self, other):
        return (isinstance(other, KnotVector) and self.degree == other.degree
                and np.array_equal(self.knots, other.knots))

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))

    def __repr__(self):
        return f"KnotVector({self.knots.tolist()}, degree={self.degree})"


@dataclass(frozen=True, eq=False)
class BSplineCurve:
    knot_vector: KnotVector
    control_points: np.ndarray

    def __post_init__(self):
        ctrl = np.array(self.control_points, dtype=np.float64)
        if ctrl.ndim != 2 or ctrl.shape[0] != self.knot_vector.n_basis:
            raise InvalidArgumentError(
                f"expected {self.knot_vector.n_basis} control points, got "
                f"array of shape {ctrl.shape}")
        ctrl.setflags(write=False)
        object.__setattr__(self, "control_points", ctrl)

    @property
    def degree(self):
        return self.knot_vector.degree

    @property
    def knots(self):
        return self.knot_vector.knots

    def __call__(self, u):
        return evaluate(self, u)

    def sample(self, count):
        """Evaluate at ``count`` parameters uniformly spaced over the domain."""
        a, b = self.knot_vector.domain
        return evaluate(self, np.linspace(a, b, count))


def basis_functions(knots, degree, x, knot_tangent=None, x_tangent=None):
    """Evaluate every degree-``degree`` B-spline at every ``x``.

    ``knots`` has shape (..., K) and ``x`` shape (..., L); leading axes
    broadcast.  Returns an array of shape (..., L, K - degree - 1).  A value
    equal to the last knot is assigned to the last non-empty span.

    If ``knot_tangent`` (shape (..., K)) or ``x_tangent`` (shape (..., L)) is
    given, the directional derivative along that tangent is returned as a
    second array of the same shape.  Values outside the knot range give zero
    rows; callers validate the domain.
    """
    knots = np.asarray(knots, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    kk = knots[..., None, :]
    xx = x[..., :, None]
    n_knots = knots.shape[-1]

    N = ((kk[..., :-1] <= xx) & (xx < kk[..., 1:])).astype(np.float64)
    nondegenerate = knots[..., 1:] > knots[..., :-1]
    last_span = (n_knots - 2) - np.argmax(nondegenerate[..., ::-1], axis=-1)
    last_row = (np.arange(n_knots - 1) == np.asarray(last_span)[..., None])
    at_end = xx == kk[..., -1:]
    N = np.where(at_end, last_row[..., None, :], N)

    with_tangent = knot_tangent is not None or x_tangent is not None
    if with_tangent:
        dkk = (np.zeros_like(kk) if knot_tangent is None
               else np.asarray(knot_tangent, dtype=np.float64)[..., None, :])
        dxx = (np.zeros_like(xx) if x_tangent is None
               else np.asarray(x_tangent, dtype=np.float64)[..., :, None])
        dN = np.zeros(np.broadcast_shapes(N.shape, dkk.shape[:-1] + (1,),
                                          dxx.shape))
        N = np.broadcast_to(N, dN.shape)

    for d in range(1, degree + 1):
        n = n_knots - 1 - d
        k_j = kk[..., :n]
        k_jd = kk[..., d:d + n]
        k_j1 = kk[..., 1:1 + n]
        k_jd1 = kk[..., d + 1:d + 1 + n]
        den1 = k_jd - k_j
        den2 = k_jd1 - k_j1
        ok1 = den1 > 0
        ok2 = den2 > 0
        safe1 = np.where(ok1, den1, 1.0)
        safe2 = np.where(ok2, den2, 1.0)
        a = np.where(ok1, (xx - k_j) / safe1, 0.0)
        b = np.where(ok2, (k_jd1 - xx) / safe2, 0.0)
        lo = N[..., :n]
        hi = N[..., 1:n + 1]
        if with_tangent:
            dk_j = dkk[..., :n]
            dk_jd = dkk[..., d:d + n]
            dk_j1 = dkk[..., 1:1 + n]
            dk_jd1 = dkk[..., d + 1:d + 1 + n]
            da = np.where(ok1, ((dxx - dk_j) * den1
                                - (xx - k_j) * (dk_jd - dk_j)) / safe1**2, 0.0)
            db = np.where(ok2, ((dk_jd1 - dxx) * den2
                                - (k_jd1 - xx) * (dk_jd1 - dk_j1)) / safe2**2, 0.0)
            dN = da * lo + a * dN[..., :n] + db * hi + b * dN[..., 1:n + 1]
        N = a * lo + b * hi

    if with_tangent:
        return N, dN
    return N


def _check_domain(kv, u):
    u = np.asarray(u, dtype=np.float64)
    a, b = kv.domain
    if np.any(~np.isfinite(u)) or np.any(u < a) or np.any(u > b):
        raise DomainError(f"parameter outside knot domain [{a}, {b}]")
    return u


def basis_all(kv, u):
    """Row(s) of all basis values at ``u``: shape (n_basis,) or (len(u), n_basis)."""
    u = _check_domain(kv, u)
    rows = basis_functions(kv.knots, kv.degree, np.atleast_1d(u))
    return rows[0] if u.ndim == 0 else rows


def basis_value(kv, j, u):
    """Single basis function N_j(u)."""
    if not 0 <= j < kv.n_basis:
        raise InvalidArgumentError(f"basis index {j} out of range [0, {kv.n_basis})")
    return float(basis_all(kv, float(u))[j])


def basis_derivative(kv, u):
    """Derivatives of all basis functions with respect to the parameter ``u``."""
    u = _check_domain(kv, u)
    x = np.atleast_1d(u)
    _, d = basis_functions(kv.knots, kv.degree, x, x_tangent=np.ones_like(x))
    return d[0] if u.ndim == 0 else d


def _check_interior_knot(kv, knot_index):
    k = kv.degree
    if not k + 1 <= knot_index < kv.knots.size - k - 1:
        raise InvalidArgumentError(
            f"knot index {knot_index} is not an interior knot "
            f"(valid range [{k + 1}, {kv.knots.size - k - 1}))")


def basis_knot_derivatives(kv, knot_index, u, method="analytic", step=1e-6):
    """d N_j(u) / d knots[knot_index] for all j; shape like :func:`basis_all`.

    ``method="analytic"`` differentiates the Cox-de Boor recursion in forward
    mode; ``method="fd"`` uses a fourth-order central difference with the
    given step.  Both are valid away from parameters coinciding with knots.
    """
    _check_interior_knot(kv, knot_index)
    u = _check_domain(kv, u)
    x = np.atleast_1d(u)
    if method == "analytic":
        tangent = np.zeros(kv.knots.size)
        tangent[knot_index] = 1.0
        _, d = basis_functions(kv.knots, kv.degree, x, knot_tangent=tangent)
    elif method == "fd":
        def shifted(delta):
            knots = kv.knots.copy()
            knots[knot_index] += delta
            return basis_functions(knots, kv.degree, x)
        d = (-shifted(2 * step) + 8 * shifted(step) - 8 * shifted(-step)
             + shifted(-2 * step)) / (12 * step)
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    return d[0] if u.ndim == 0 else d


def basis_derivative_wrt_knot(kv, j, knot_index, u, method="fd", step=1e-6):
    """d N_j(u) / d knots[knot_index] for one basis function."""
    if not 0 <= j < kv.n_basis:
        raise InvalidArgumentError(f"basis index {j} out of range [0, {kv.n_basis})")
    return float(basis_knot_derivatives(kv, knot_index, float(u), method, step)[j])


def evaluate(curve, u):
    """Point(s) C(u) = sum_j c_j N_j(u)."""
    return basis_all(curve.knot_vector, u) @ curve.control_points


def check_schoenberg_whitney(t, kv):
    """True iff every non-empty knot span [u_j, u_{j+1}] holds some t_i."""
    t = np.sort(np.asarray(t, dtype=np.float64).ravel())
    if t.size == 0:
        return False
    spans = kv.spans()
    lo = np.searchsorted(t, spans[:, 0], side="left")
    hi = np.searchsorted(t, spans[:, 1], side="right")
    return bool(np.all(hi > lo))


def _has_full_matching(N):
    """Greedy Schoenberg-Whitney matching of columns (basis) to rows (data).

    Supports of B-splines are ordered intervals, so matching each basis
    function to the first unused row where it is nonzero finds a complete
    matching whenever one exists.  A complete matching is exactly the
    condition for N to have full column rank generically.
    """
    row = -1
    for j in range(N.shape[1]):
        candidates = np.nonzero(N[row + 1:, j] > 0)[0]
        if candidates.size == 0:
            return False
        row += 1 + candidates[0]
    return True


def _solve_normal(N, rhs):
    if not _has_full_matching(N):
        raise SingularSystemError(
            "parameters violate the Schoenberg-Whitney condition")
    A = N.T @ N
    try:
        factor = scipy.linalg.cho_factor(A)
        return scipy.linalg.cho_solve(factor, N.T @ rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularSystemError(f"normal matrix is not positive definite: {exc}")


def _check_fit_inputs(p, t, kv, min_points):
    p = check_points(p, min_points=1)
    t = check_parameters(t, n_points=p.shape[0])
    _check_domain(kv, t)
    if p.shape[0] < min_points:
        raise InvalidArgumentError(
            f"{p.shape[0]} points cannot determine {min_points} control points")
    if not check_schoenberg_whitney(t, kv):
        raise SingularSystemError(
            "a knot span contains no parameter value (Schoenberg-Whitney)")
    return p, t


def fit_unconstrained(p, t, kv):
    """Least-squares fit with all control points free: (N^T N) c = N^T p.

    N is the full (m+1) x (n+1) collocation matrix of every basis function at
    every parameter.
    """
    p, t = _check_fit_inputs(p, t, kv, kv.n_basis)
    N = basis_all(kv, t)
    return BSplineCurve(kv, _solve_normal(N, p))


def fit_constrained(p, t, kv):
    """Least-squares fit interpolating the end points, c_0 = p_0 and c_n = p_m.

    Requires t_0 and t_m to be the ends of the knot domain.  The interior
    control points solve (N^T N) c = N^T q over the interior data rows.
    """
    p, t = _check_fit_inputs(p, t, kv, kv.n_basis)
    a, b = kv.domain
    if t[0] != a or t[-1] != b:
        raise InvalidArgumentError(
            "end point interpolation needs t_0 and t_m at the domain ends")
    n = kv.n_basis
    ctrl = np.empty((n, 2))
    ctrl[0] = p[0]
    ctrl[-1] = p[-1]
    if n > 2:
        full = basis_all(kv, t[1:-1])
        q = p[1:-1] - np.outer(full[:, 0], p[0]) - np.outer(full[:, -1], p[-1])
        ctrl[1:-1] = _solve_normal(full[:, 1:-1], q)
    return BSplineCurve(kv, ctrl)


def squared_residual(curve, p, t):
    """sum_i |p_i - C(t_i)|^2."""
    diff = np.asarray(p, dtype=np.float64) - evaluate(curve, t)
    return float(np.sum(diff * diff))
