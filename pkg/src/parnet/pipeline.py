"""End-to-end approximation: segment, resample, parametrize, refine knots.

The input sequence is split by total curvature until every piece is no more
complex than the training data, each piece is resampled to the network
input size and parametrized by the PPN, and the knot vector is then refined
one knot at a time where the fit is worst, with the KSN choosing the knot.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from parnet._validation import check_int, check_points, unflatten_points
from parnet.bspline import (
    KnotVector,
    _has_full_matching,
    basis_all,
    check_schoenberg_whitney,
    evaluate,
    fit_constrained,
)
from parnet.exceptions import (
    InvalidArgumentError,
    InvalidStateError,
    SegmentationError,
    SingularSystemError,
    SpanUnrefinableError,
)
from parnet.geometry import (
    CURVE_SAMPLING_FACTOR,
    arclen,
    cumulative_arclen,
    curvature,
    curve_hausdorff,
    hausdorff,
    minmax_normalize,
    total_curvature,
)


@dataclass
class PipelineConfig:
    degree: int = 3
    l: int = 100
    kappa_threshold: float = None
    threshold: float = 1e-3
    max_knots: int = 30
    eps: float = 1e-5
    sampling_factor: int = CURVE_SAMPLING_FACTOR
    split: str = "index"

    def __post_init__(self):
        check_int(self.l, "l", minimum=2 * (self.degree + 1))
        check_int(self.max_knots, "max_knots", minimum=0)
        if self.threshold <= 0:
            raise InvalidArgumentError("threshold must be positive")
        if self.kappa_threshold is not None and self.kappa_threshold <= 0:
            raise InvalidArgumentError("kappa_threshold must be positive")
        if self.split not in ("index", "curvature"):
            raise InvalidArgumentError(f"unknown split rule {self.split!r}")


def compute_kappa_threshold(sequences, percentile=98.0):
    """Percentile (numpy's linear interpolation rule) of the total curvature."""
    sequences = list(sequences)
    if not sequences:
        raise InvalidArgumentError("need at least one training sequence")
    values = [total_curvature(p) for p in sequences]
    return float(np.percentile(values, percentile))


def _segment_kappa(points):
    return total_curvature(points) if points.shape[0] >= 3 else 0.0


def _split_index(points, a, b, rule):
    if rule == "index":
        return (a + b) // 2
    seg = points[a:b + 1]
    kappa = np.abs(curvature(seg))
    chords = np.linalg.norm(np.diff(seg, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum((kappa[:-1] + kappa[1:]) * chords / 2)])
    mid = a + int(np.searchsorted(cum, cum[-1] / 2))
    return min(max(mid, a + 1), b - 1)


def segment(points, kappa_threshold, split="index"):
    """Split at the median until every piece has total curvature below the threshold.

    Returns inclusive (start, stop) index pairs, left to right; neighbours
    share their boundary point.
    """
    p = check_points(points, min_points=4)
    ranges = []
    stack = [(0, p.shape[0] - 1)]
    while stack:
        a, b = stack.pop()
        if _segment_kappa(p[a:b + 1]) < kappa_threshold:
            ranges.append((a, b))
            continue
        if b - a + 1 < 4:
            raise SegmentationError(
                f"segment [{a}, {b}] is too short to split but still exceeds "
                f"the curvature threshold {kappa_threshold}")
        mid = _split_index(p, a, b, split)
        stack.append((mid, b))
        stack.append((a, mid))
    return ranges


@dataclass
class Segment:
    """A piece of the input resampled to exactly ``l`` points.

    Every resampled point is ``(1 - frac) * p[anchor] + frac * p[anchor + 1]``
    in local indices; ``frac > 0`` marks a temporary point inserted by
    supersampling.  ``removed`` lists local indices dropped by subsampling.
    """

    start: int
    stop: int
    points: np.ndarray
    anchor: np.ndarray
    frac: np.ndarray
    removed: np.ndarray
    normalized: np.ndarray = None
    mins: np.ndarray = None
    maxs: np.ndarray = None

    @property
    def temporary(self):
        return self.frac > 0

    @property
    def retained(self):
        """Local indices of original points kept in the resampled sequence."""
        return self.anchor[~self.temporary]

    def interpolate(self, values):
        """Per-point values (one per original local index) at the resampled points."""
        values = np.asarray(values, dtype=np.float64)
        right = np.minimum(self.anchor + 1, values.shape[0] - 1)
        return (1.0 - self.frac) * values[self.anchor] + self.frac * values[right]


def resample(seg_points, l, start=0):
    """Sub- or supersample to ``l`` points (then still unnormalized)."""
    p = check_points(seg_points, min_points=2)
    l = check_int(l, "l", minimum=2)
    m = p.shape[0]
    if m >= l:
        keep = np.floor(np.arange(l) * (m - 1) / (l - 1) + 0.5).astype(int)
        removed = np.setdiff1d(np.arange(m), keep)
        anchor = keep
        frac = np.zeros(l)
    else:
        anchor = np.arange(m)
        frac = np.zeros(m)
        removed = np.array([], dtype=int)
        while anchor.size < l:
            new_anchor, new_frac = [anchor[0]], [frac[0]]
            budget = l - anchor.size
            for i in range(1, anchor.size):
                if budget > 0:
                    a0, f0 = anchor[i - 1], frac[i - 1]
                    f1 = frac[i] if anchor[i] == a0 else 1.0
                    new_anchor.append(a0)
                    new_frac.append(0.5 * (f0 + f1))
                    budget -= 1
                new_anchor.append(anchor[i])
                new_frac.append(frac[i])
            anchor, frac = np.array(new_anchor), np.array(new_frac)
    right = np.minimum(anchor + 1, m - 1)
    points = (1.0 - frac)[:, None] * p[anchor] + frac[:, None] * p[right]
    return Segment(start, start + m - 1, points, anchor, frac, removed)


def normalize(seg):
    """Attach per-axis min-max normalized points (idempotent)."""
    seg.normalized, seg.mins, seg.maxs = minmax_normalize(seg.points)
    return seg


def prepare_segments(points, ranges, l):
    p = check_points(points)
    return [normalize(resample(p[a:b + 1], l, start=a)) for a, b in ranges]


def initial_knots(points, ranges, degree=3):
    """Clamped knot vector with one knot per segment boundary at arc-length fractions."""
    p = check_points(points)
    total = arclen(p)
    fractions = [arclen(p[a:b + 1]) / total for a, b in ranges]
    interior = np.cumsum(fractions)[:-1]
    return KnotVector.clamped(interior, degree)


def _segment_parameters(seg, seg_points, tbar, lo, hi):
    """Parameters in [lo, hi] for every original point of one segment."""
    m = seg_points.shape[0]
    t_local = np.full(m, np.nan)
    keep = ~seg.temporary
    t_local[seg.anchor[keep]] = lo + tbar[keep] * (hi - lo)
    t_local[0], t_local[-1] = lo, hi
    if seg.removed.size:
        retained = np.sort(seg.retained)
        cum = cumulative_arclen(seg_points)
        pos = np.searchsorted(retained, seg.removed)
        alpha, omega = retained[pos - 1], retained[pos]
        ratio = (cum[seg.removed] - cum[alpha]) / (cum[omega] - cum[alpha])
        t_local[seg.removed] = t_local[alpha] + (t_local[omega] - t_local[alpha]) * ratio
    return t_local


def assemble_parameters(points, ranges, segments, ppn, degree=3):
    """Global parameter vector and initial knot vector from per-segment PPN output."""
    p = check_points(points)
    kv = initial_knots(p, ranges, degree)
    bounds = np.concatenate([[0.0], kv.interior, [1.0]])
    tbars = ppn.transform(np.stack([np.concatenate([s.normalized[:, 0], s.normalized[:, 1]])
                                    for s in segments]))
    t = np.empty(p.shape[0])
    for s, ((a, b), seg) in enumerate(zip(ranges, segments)):
        t[a:b + 1] = _segment_parameters(seg, p[a:b + 1], tbars[s], bounds[s], bounds[s + 1])
    if not (t[0] == 0.0 and t[-1] == 1.0 and np.all(np.diff(t) > 0)):
        raise InvalidStateError("assembled parameters are not strictly increasing")
    return t, kv


def span_errors(points, t, curve, factor=CURVE_SAMPLING_FACTOR):
    """Hausdorff distance per knot span between the data and the curve piece."""
    p = np.asarray(points, dtype=np.float64)
    spans = curve.knot_vector.spans()
    errors = np.empty(len(spans))
    for i, (a, b) in enumerate(spans):
        mask = (t >= a) & (t <= b)
        u = np.linspace(a, b, max(2, factor * int(mask.sum())))
        errors[i] = hausdorff(p[mask], evaluate(curve, u))
    return spans, errors


def snap_knot(target, t, kv, a, b):
    """The parameter strictly inside (a, b), not already a knot, closest to target.

    Ties go to the smaller parameter.
    """
    inside = t[(t > a) & (t < b)]
    inside = inside[~np.isin(inside, kv.knots)]
    if inside.size == 0:
        raise SpanUnrefinableError(f"no parameter strictly inside span ({a}, {b})")
    order = np.lexsort((inside, np.abs(inside - target)))
    return float(inside[order[0]])


def _has_solution(points, t, kv):
    if not check_schoenberg_whitney(t, kv):
        return False
    if kv.n_basis > 2 and not _has_full_matching(basis_all(kv, t[1:-1])[:, 1:-1]):
        return False
    # structurally fine can still be numerically singular (knots a hair apart)
    try:
        fit_constrained(points, t, kv)
    except SingularSystemError:
        return False
    return True


def refine_once(points, t, kv, ksn, l=100, curve=None, factor=CURVE_SAMPLING_FACTOR):
    """Insert one knot into the worst-fitting span.

    Returns (new knot vector, info dict).  Spans are tried from worst to
    best; a span is skipped when no parameter lies strictly inside it or the
    insertion would make the fit unsolvable (structurally or numerically).
    """
    p = check_points(points)
    t = np.asarray(t, dtype=np.float64)
    if curve is None:
        curve = fit_constrained(p, t, kv)
    spans, errors = span_errors(p, t, curve, factor)
    for s in np.argsort(-errors, kind="stable"):
        a, b = spans[s]
        mask = (t >= a) & (t <= b)
        seg = normalize(resample(p[mask], l))
        t_rel = seg.interpolate((t[mask] - a) / (b - a))
        predicted = float(ksn.predict_knot(seg.normalized, t_rel))
        mapped = a + predicted * (b - a)
        try:
            knot = snap_knot(mapped, t, kv, a, b)
        except SpanUnrefinableError:
            continue
        new_kv = kv.insert(knot)
        if not _has_solution(p, t, new_kv):
            continue
        info = {"span": (float(a), float(b)), "span_error": float(errors[s]),
                "predicted": predicted, "mapped": float(mapped), "inserted": knot}
        return new_kv, info
    raise SpanUnrefinableError("no knot span can be refined")


@dataclass
class ApproximationReport:
    """Per-iteration trace of one pipeline run."""

    segments: list
    iterations: list = field(default_factory=list)
    converged: bool = False
    budget_exhausted: bool = False
    threshold: float = None
    max_knots: int = None

    @property
    def final_knot_count(self):
        return self.iterations[-1]["interior_knots"] if self.iterations else 0

    @property
    def error_trace(self):
        return [it["hausdorff"] for it in self.iterations]

    def to_text(self):
        """Key-value text, one line per iteration."""
        lines = [f"segments={len(self.segments)}",
                 f"threshold={self.threshold!r}", f"max_knots={self.max_knots}",
                 f"converged={int(self.converged)}",
                 f"budget_exhausted={int(self.budget_exhausted)}",
                 f"final_knot_count={self.final_knot_count}"]
        for it in self.iterations:
            fields = [f"iteration={it['iteration']}",
                      f"interior_knots={it['interior_knots']}",
                      f"hausdorff={it['hausdorff']!r}"]
            if "inserted" in it:
                fields += [f"inserted_knot={it['inserted']!r}",
                           f"worst_span={it['span'][0]!r}:{it['span'][1]!r}",
                           f"predicted={it['predicted']!r}"]
            lines.append(" ".join(fields))
        return "\n".join(lines) + "\n"


def refinement_path(points, t, kv, ksn, max_knots, l=100, factor=CURVE_SAMPLING_FACTOR):
    """Yield (knot vector, curve, Hausdorff, info) for the initial fit and each insertion.

    Stops when ``max_knots`` interior knots are reached or nothing can be
    refined.
    """
    p = check_points(points)
    info = {}
    while True:
        curve = fit_constrained(p, t, kv)
        yield kv, curve, curve_hausdorff(curve, p, factor), info
        if kv.interior.size >= max_knots:
            return
        try:
            kv, info = refine_once(p, t, kv, ksn, l, curve, factor)
        except SpanUnrefinableError:
            return


def initial_parametrization(points, ppn, kappa_threshold, l=100, degree=3, split="index"):
    p = check_points(points, min_points=4)
    ranges = segment(p, kappa_threshold, split)
    segments = prepare_segments(p, ranges, l)
    t, kv = assemble_parameters(p, ranges, segments, ppn, degree)
    return ranges, t, kv


def parnet_approximate(points, cfg, ppn, ksn):
    """Approximate ``points`` until the Hausdorff error meets ``cfg.threshold``.

    Returns (curve, t, report).  When the knot budget runs out first, the
    lowest-error curve seen is returned and the report is flagged.
    """
    if cfg.kappa_threshold is None:
        raise InvalidArgumentError("PipelineConfig.kappa_threshold is not set")
    p = check_points(points, min_points=4)
    ranges, t, kv = initial_parametrization(p, ppn, cfg.kappa_threshold, cfg.l,
                                            cfg.degree, cfg.split)
    report = ApproximationReport(segments=ranges, threshold=cfg.threshold,
                                 max_knots=cfg.max_knots)
    best = None
    for i, (kv, curve, error, info) in enumerate(
            refinement_path(p, t, kv, ksn, cfg.max_knots, cfg.l, cfg.sampling_factor)):
        report.iterations.append({"iteration": i, "interior_knots": int(kv.interior.size),
                                  "hausdorff": error, **info})
        if best is None or error < best[1]:
            best = (curve, error)
        if error <= cfg.threshold:
            report.converged = True
            return curve, t, report
    report.budget_exhausted = True
    return best[0], t, report


class SplineApproximator(BaseEstimator):
    """Estimator wrapper around :func:`parnet_approximate`.

    ``fit`` derives the curvature threshold from training sequences (98th
    percentile of total curvature) unless ``kappa_threshold`` is given.

    Parameters
    ----------
    ppn : fitted PointParametrizer
    ksn : fitted KnotSelector (or ConstantKnotSelector)
    """

    def __init__(self, ppn=None, ksn=None, l=100, kappa_threshold=None, threshold=1e-3,
                 max_knots=30, split="index", degree=3):
        self.ppn = ppn
        self.ksn = ksn
        self.l = l
        self.kappa_threshold = kappa_threshold
        self.threshold = threshold
        self.max_knots = max_knots
        self.split = split
        self.degree = degree

    def fit(self, X=None, y=None):
        """``X``: iterable of (m, 2) training sequences, or flat rows (n, 2l)."""
        if self.kappa_threshold is not None:
            self.kappa_threshold_ = float(self.kappa_threshold)
        else:
            if X is None:
                raise InvalidArgumentError("need training data or kappa_threshold")
            X = np.asarray(X, dtype=np.float64)
            if X.ndim == 2:
                X = unflatten_points(X)
            self.kappa_threshold_ = compute_kappa_threshold(X)
        self.config_ = PipelineConfig(self.degree, self.l, self.kappa_threshold_,
                                      self.threshold, self.max_knots, split=self.split)
        return self

    def approximate(self, points):
        check_is_fitted(self, "config_")
        return parnet_approximate(points, self.config_, self.ppn, self.ksn)

    def predict(self, sequences):
        """Fitted curves for an iterable of point sequences."""
        return [self.approximate(p)[0] for p in sequences]
