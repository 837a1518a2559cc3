"""Synthetic training and evaluation data from random cubic B-spline curves.

Every curve is generated from its own random stream derived from the master
seed and the curve index, so a dataset is a pure function of its
configuration and seed, and any subset of curves can be regenerated alone.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from parnet._validation import check_int, flatten_points, unflatten_points
from parnet.bspline import BSplineCurve, KnotVector, evaluate
from parnet.exceptions import InvalidArgumentError, ModelFormatError, SynthesisError
from parnet.geometry import cumulative_arclen

SAMPLING_MODES = ("uniform-parameter", "uniform-arclength", "random-parameter")

# Stream families keep curve draws of unrelated sets independent.
_TRAIN_FAMILY = 0
_PLAIN_EVAL_FAMILY = 1
_KNOTTED_EVAL_FAMILY = 2


@dataclass
class SynthesisConfig:
    degree: int = 3
    num_ctrl_points: int = 4
    sigma_x: float = 1.0
    sigma_y: float = 2.0
    mu_start: float = 10.0
    mu_y: float = 10.0
    delta_mu: float = 1.0
    samples_per_curve: int = 100
    seed: int = 0
    training_sampling: str = "uniform-arclength"
    intersection_density: int = 20
    max_draws: int = 1000

    def __post_init__(self):
        check_int(self.degree, "degree", minimum=1)
        check_int(self.num_ctrl_points, "num_ctrl_points", minimum=self.degree + 1)
        check_int(self.samples_per_curve, "samples_per_curve",
                  minimum=2 * (self.degree + 1))
        check_int(self.seed, "seed", minimum=0)
        if self.sigma_x < 0 or self.sigma_y < 0:
            raise InvalidArgumentError("standard deviations must be non-negative")
        if self.training_sampling not in SAMPLING_MODES:
            raise InvalidArgumentError(
                f"unknown sampling mode {self.training_sampling!r}")

    def to_dict(self):
        return dataclasses.asdict(self)


def curve_rng(seed, family, index, stream=0):
    """Independent generator for one curve (stream 0) or its sampling (1)."""
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(family, index, stream)))


def random_curve(cfg, rng, interior_knots=()):
    """Draw a clamped curve with normally distributed control points.

    The number of control points is ``cfg.num_ctrl_points`` plus one per
    interior knot.  x-means start at ``mu_start`` and grow by ``delta_mu``
    per control point.  Self-intersecting curves are redrawn.
    """
    kv = KnotVector.clamped(interior_knots, cfg.degree)
    n = cfg.num_ctrl_points + len(kv.interior)
    mean_x = cfg.mu_start + cfg.delta_mu * np.arange(n)
    for _ in range(cfg.max_draws):
        xs = rng.normal(mean_x, cfg.sigma_x)
        ys = rng.normal(cfg.mu_y, cfg.sigma_y, size=n)
        curve = BSplineCurve(kv, np.column_stack([xs, ys]))
        if not detect_self_intersection(curve, cfg.intersection_density):
            return curve
    raise SynthesisError(
        f"no curve without self-intersection in {cfg.max_draws} draws")


def _orientation(a, b, c):
    return ((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
            - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))


def _on_segment(a, b, c):
    """c lies in the bounding box of segment ab (used for collinear cases)."""
    return ((np.minimum(a[..., 0], b[..., 0]) <= c[..., 0])
            & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
            & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1])
            & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1])))


def polyline_self_intersects(points):
    """True if two non-adjacent segments of the polyline touch or cross."""
    p = np.asarray(points, dtype=np.float64)
    n_seg = p.shape[0] - 1
    if n_seg < 3:
        return False
    i, j = np.triu_indices(n_seg, k=2)
    a, b = p[i], p[i + 1]
    c, d = p[j], p[j + 1]
    o1 = _orientation(a, b, c)
    o2 = _orientation(a, b, d)
    o3 = _orientation(c, d, a)
    o4 = _orientation(c, d, b)
    crossing = (((o1 > 0) & (o2 < 0)) | ((o1 < 0) & (o2 > 0))) & \
               (((o3 > 0) & (o4 < 0)) | ((o3 < 0) & (o4 > 0)))
    touching = (((o1 == 0) & _on_segment(a, b, c)) | ((o2 == 0) & _on_segment(a, b, d))
                | ((o3 == 0) & _on_segment(c, d, a)) | ((o4 == 0) & _on_segment(c, d, b)))
    return bool(np.any(crossing | touching))


def detect_self_intersection(curve, density=20):
    """Sample ``density`` points per control point and test the polyline."""
    if density < 2:
        raise InvalidArgumentError("density must be at least 2")
    return polyline_self_intersects(curve.sample(density * curve.control_points.shape[0]))


def sample_curve(curve, l, mode="uniform-parameter", rng=None):
    """``l`` points on ``curve`` including both end points.

    ``uniform-arclength`` inverts a 50*l-sample arc-length table by linear
    interpolation; ``random-parameter`` draws l-2 sorted uniform parameters.
    """
    l = check_int(l, "l", minimum=2)
    a, b = curve.knot_vector.domain
    if mode == "uniform-parameter":
        u = np.linspace(a, b, l)
    elif mode == "uniform-arclength":
        table_u = np.linspace(a, b, 50 * l)
        table_s = cumulative_arclen(evaluate(curve, table_u))
        u = np.interp(np.linspace(0.0, table_s[-1], l), table_s, table_u)
        u[0], u[-1] = a, b
    elif mode == "random-parameter":
        if rng is None:
            raise InvalidArgumentError("random-parameter sampling needs an rng")
        u = np.concatenate([[a], np.sort(rng.uniform(a, b, l - 2)), [b]])
    else:
        raise InvalidArgumentError(f"unknown sampling mode {mode!r}")
    return evaluate(curve, u)


def flip(points):
    """Reverse the point order."""
    return np.asarray(points)[::-1].copy()


@dataclass
class Dataset:
    """Point sequences of equal length plus provenance and split.

    ``points`` has shape (n, l, 2).  ``curves`` holds the generating curves
    when the dataset was synthesised in this process (not persisted).
    """

    points: np.ndarray
    curve_ids: np.ndarray
    flipped: np.ndarray
    is_test: np.ndarray
    meta: dict = field(default_factory=dict)
    curves: list = None

    def __len__(self):
        return self.points.shape[0]

    @property
    def X(self):
        """Flat network-layout rows, shape (n, 2l)."""
        return flatten_points(self.points)

    def subset(self, mask):
        mask = np.asarray(mask)
        return Dataset(self.points[mask], self.curve_ids[mask], self.flipped[mask],
                       self.is_test[mask], dict(self.meta))

    @property
    def train(self):
        return self.subset(~self.is_test)

    @property
    def test(self):
        return self.subset(self.is_test)

    def save(self, path):
        """Write the record file and its ``.meta.json`` sidecar."""
        path = Path(path)
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for cid, flag, row in zip(self.curve_ids, self.flipped, self.X):
                fh.write(",".join([str(int(cid)), str(int(flag))]
                                  + [repr(float(v)) for v in row]))
                fh.write("\n")
        meta = dict(self.meta)
        meta["test_instances"] = np.nonzero(self.is_test)[0].tolist()
        meta["count"] = len(self)
        with open(meta_path(path), "w", encoding="ascii") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        ids, flips, rows = [], [], []
        with open(path, encoding="ascii") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                fields = line.split(",")
                try:
                    ids.append(int(fields[0]))
                    flips.append(bool(int(fields[1])))
                    rows.append([float(v) for v in fields[2:]])
                except (ValueError, IndexError) as exc:
                    raise ModelFormatError(f"malformed dataset record: {exc}",
                                           offset=f"line {lineno}")
                if len(rows[-1]) % 2 or len(rows[-1]) != len(rows[0]):
                    raise ModelFormatError("inconsistent record length",
                                           offset=f"line {lineno}")
        if not rows:
            raise ModelFormatError("empty dataset file", offset="line 1")
        meta = {}
        if meta_path(path).exists():
            meta = json.loads(meta_path(path).read_text())
        is_test = np.zeros(len(rows), dtype=bool)
        is_test[meta.get("test_instances", [])] = True
        return cls(unflatten_points(np.array(rows)), np.array(ids),
                   np.array(flips), is_test, meta)


def meta_path(path):
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def build_training_set(cfg, count):
    """``count`` accepted curves, flip-augmented and split 80/20 by curve.

    A curve and its flipped twin always land in the same split.
    """
    count = check_int(count, "count", minimum=10)
    l = cfg.samples_per_curve
    curves, points = [], []
    for index in range(count):
        curve = random_curve(cfg, curve_rng(cfg.seed, _TRAIN_FAMILY, index))
        sampled = sample_curve(curve, l, cfg.training_sampling,
                               curve_rng(cfg.seed, _TRAIN_FAMILY, index, 1))
        curves.append(curve)
        points.extend([sampled, flip(sampled)])
    ids = np.repeat(np.arange(count), 2)
    flipped = np.tile([False, True], count)
    order = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(99,)))
    test_curves = order.permutation(count)[:int(round(0.2 * count))]
    is_test = np.isin(ids, test_curves)
    meta = {"kind": "training", "config": cfg.to_dict()}
    return Dataset(np.stack(points), ids, flipped, is_test, meta, curves)


def random_interior_knots(rng, low=3, high=8):
    """Sorted, pairwise distinct uniform knots; their count is uniform in [low, high]."""
    count = int(rng.integers(low, high + 1))
    while True:
        knots = np.sort(rng.uniform(0.0, 1.0, count))
        if np.all(np.diff(knots) > 0) and knots[0] > 0 and knots[-1] < 1:
            return knots


def build_eval_set(which, count=500, points_per_curve=500, seed=0, cfg=None):
    """Evaluation set 1-4.

    Sets 1 and 2 draw Bezier curves, sets 3 and 4 add 3 to 8 random interior
    knots.  Odd sets sample uniformly in arc length, even sets at random
    parameters.  Set 2 (4) reuses the curves of set 1 (3) for the same seed.
    """
    if which not in (1, 2, 3, 4):
        raise InvalidArgumentError(f"evaluation set must be 1-4, got {which!r}")
    count = check_int(count, "count", minimum=1)
    points_per_curve = check_int(points_per_curve, "points_per_curve", minimum=2)
    if cfg is None:
        cfg = SynthesisConfig(seed=seed)
    knotted = which in (3, 4)
    family = _KNOTTED_EVAL_FAMILY if knotted else _PLAIN_EVAL_FAMILY
    mode = "uniform-arclength" if which in (1, 3) else "random-parameter"
    curves, points = [], []
    for index in range(count):
        rng = curve_rng(seed, family, index)
        interior = random_interior_knots(rng) if knotted else ()
        curve = random_curve(cfg, rng, interior)
        curves.append(curve)
        points.append(sample_curve(curve, points_per_curve, mode,
                                   curve_rng(seed, family, index, 1)))
    meta = {"kind": f"eval-{which}", "set": which, "seed": seed,
            "config": cfg.to_dict(), "sampling": mode}
    return Dataset(np.stack(points), np.arange(count), np.zeros(count, dtype=bool),
                   np.zeros(count, dtype=bool), meta, curves)
