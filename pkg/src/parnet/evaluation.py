"""Evaluation harness: parametrization comparison, knot sweeps and plot export.

Curve quality is always measured as the discrete Hausdorff distance
between the instance points and the fitted curve sampled at
``CURVE_SAMPLING_FACTOR`` times as many parameters.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from parnet.bspline import KnotVector, fit_constrained, fit_unconstrained
from parnet.classic import PARAMETRIZATIONS, knots_by_averaging, parametrize_centripetal
from parnet.exceptions import InvalidArgumentError
from parnet.geometry import CURVE_SAMPLING_FACTOR, curve_hausdorff
from parnet.neural.models import ConstantKnotSelector
from parnet.pipeline import initial_parametrization, normalize, refinement_path, resample

BASELINES = ("uniform", "chordal", "centripetal")


@dataclass
class EvalReport:
    """Per-instance Hausdorff distances by method.

    ``values[method]`` is an array with one entry per instance; the
    aggregate of a method is the arithmetic mean of its entries.
    """

    methods: list
    values: dict
    meta: dict = field(default_factory=dict)

    @property
    def means(self):
        return {m: float(np.mean(self.values[m])) for m in self.methods}

    def to_csv(self):
        out = io.StringIO()
        out.write("instance," + ",".join(self.methods) + "\n")
        n = len(self.values[self.methods[0]]) if self.methods else 0
        for i in range(n):
            out.write(str(i) + "," + ",".join(repr(float(self.values[m][i]))
                                               for m in self.methods) + "\n")
        out.write("mean," + ",".join(repr(self.means[m]) for m in self.methods) + "\n")
        return out.getvalue()


def _single_span_fit(points, t):
    kv = KnotVector.clamped((), 3)
    return fit_unconstrained(points, t, kv)


def compare_parametrizations(dataset, ppn=None, l=100, methods=None,
                             factor=CURVE_SAMPLING_FACTOR):
    """Approximate every instance without interior knots under each parametrization.

    Each instance is subsampled to ``l`` points, parametrized, fitted with a
    single cubic span, and compared against all of its original points.
    """
    if methods is None:
        methods = (["ppn"] if ppn is not None else []) + list(BASELINES)
    methods = list(methods)
    if "ppn" in methods and ppn is None:
        raise InvalidArgumentError("the ppn column needs a trained PPN")
    values = {m: np.empty(len(dataset)) for m in methods}
    for i, points in enumerate(dataset.points):
        seg = normalize(resample(points, l))
        for m in methods:
            if m == "ppn":
                t = ppn.parametrize(seg.normalized)
            else:
                t = PARAMETRIZATIONS[m](seg.points)
            values[m][i] = curve_hausdorff(_single_span_fit(seg.points, t), points, factor)
    meta = {"l": l, "sampling_factor": factor, "dataset": dict(dataset.meta),
            "note": "single comparison block (PPN vs uniform/chordal/centripetal)"}
    return EvalReport(methods, values, meta)


def nktp_error(points, n_interior, degree=3, factor=CURVE_SAMPLING_FACTOR):
    """Centripetal parameters + averaging knots with ``n_interior`` interior knots."""
    t = parametrize_centripetal(points)
    kv = knots_by_averaging(t, degree, n_interior + degree + 1)
    return curve_hausdorff(fit_constrained(points, t, kv), points, factor)


def parnet_errors(points, ppn, ksn, kappa_threshold, knot_counts, l=100,
                  factor=CURVE_SAMPLING_FACTOR):
    """PARNET Hausdorff error at each requested interior-knot count.

    One refinement run is recorded at every count it passes.  Counts below
    the number of knots produced by segmentation get the initial fit's
    error; counts the refinement cannot reach get the last error.
    """
    _, t, kv = initial_parametrization(points, ppn, kappa_threshold, l)
    by_count = {}
    for kv_i, _, error, _ in refinement_path(points, t, kv, ksn, max(knot_counts), l, factor):
        by_count[int(kv_i.interior.size)] = error
    reached = sorted(by_count)
    out = []
    for k in knot_counts:
        below = [c for c in reached if c <= k]
        out.append(by_count[below[-1]] if below else by_count[reached[0]])
    return np.array(out), reached[0]


@dataclass
class SweepReport:
    """Mean Hausdorff distance per method at each interior-knot count."""

    knot_counts: list
    values: dict
    meta: dict = field(default_factory=dict)
    methods: list = field(default_factory=lambda: ["parnet", "nktp"])

    @property
    def means(self):
        return {m: np.mean(self.values[m], axis=0) for m in self.methods}

    def table(self):
        """Rows (interior_knots, mean per method...)."""
        means = self.means
        return [(k, *[float(means[m][j]) for m in self.methods])
                for j, k in enumerate(self.knot_counts)]

    def to_csv(self):
        out = io.StringIO()
        out.write("interior_knots," + ",".join(self.methods) + ",dpkp\n")
        for row in self.table():
            out.write(str(row[0]) + "," + ",".join(repr(v) for v in row[1:]) + ",absent\n")
        return out.getvalue()


def sweep_knots(dataset, ppn, ksn, kappa_threshold, knot_counts=range(3, 24), l=100,
                factor=CURVE_SAMPLING_FACTOR):
    knot_counts = sorted(int(k) for k in knot_counts)
    n = len(dataset)
    parnet = np.empty((n, len(knot_counts)))
    nktp = np.empty((n, len(knot_counts)))
    initial = np.empty(n, dtype=int)
    for i, points in enumerate(dataset.points):
        parnet[i], initial[i] = parnet_errors(points, ppn, ksn, kappa_threshold,
                                              knot_counts, l, factor)
        nktp[i] = [nktp_error(points, k, factor=factor) for k in knot_counts]
    meta = {"axis": "interior knots (excluding the 2(k+1) clamped end knots)",
            "initial_interior_knots": initial.tolist(), "dpkp": "not implemented",
            "kappa_threshold": kappa_threshold, "l": l, "dataset": dict(dataset.meta)}
    return SweepReport(knot_counts, {"parnet": parnet, "nktp": nktp}, meta)


def compare_refinement(dataset, ppn, ksn, kappa_threshold, steps=5, l=100,
                       factor=CURVE_SAMPLING_FACTOR):
    """Error after ``steps`` KSN insertions vs ``steps`` worst-span midpoint insertions."""
    selectors = {"ksn": ksn, "midpoint": ConstantKnotSelector(0.5)}
    values = {m: np.empty(len(dataset)) for m in selectors}
    for i, points in enumerate(dataset.points):
        _, t, kv = initial_parametrization(points, ppn, kappa_threshold, l)
        target = kv.interior.size + steps
        for name, selector in selectors.items():
            for _, _, error, _ in refinement_path(points, t, kv, selector, target, l, factor):
                pass
            values[name][i] = error
    return EvalReport(list(selectors), values, {"steps": steps, "l": l})


def export_csv(rows, header, path):
    """Write comma-delimited rows with locale-independent number formatting."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating))
                              else str(v) for v in row) + "\n")


_SVG_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def render_svg(points, curves, size=600, samples=400):
    """SVG with the input points and one polyline per named curve.

    ``curves`` maps a method name to a BSplineCurve or an (n, 2) polyline.
    """
    points = np.asarray(points, dtype=np.float64)
    lines = {}
    for name, c in curves.items():
        lines[name] = np.asarray(c.sample(samples) if hasattr(c, "sample") else c)
    everything = np.vstack([points, *lines.values()])
    lo = everything.min(axis=0)
    span = max(float(np.max(everything.max(axis=0) - lo)), 1e-12)
    margin = 0.05 * size

    def xy(p):
        q = (p - lo) / span * (size - 2 * margin) + margin
        return q[:, 0], size - q[:, 1]

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">']
    for k, (name, poly) in enumerate(lines.items()):
        xs, ys = xy(poly)
        coords = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
        out.append(f'<polyline class="{name}" fill="none" stroke="{_SVG_COLORS[k % 6]}" '
                   f'stroke-width="1.5" points="{coords}"><title>{name}</title></polyline>')
    xs, ys = xy(points)
    out.append('<g class="points">')
    out += [f'<circle cx="{x:.3f}" cy="{y:.3f}" r="1.5" fill="black"/>' for x, y in zip(xs, ys)]
    out.append("</g></svg>")
    return "\n".join(out) + "\n"
