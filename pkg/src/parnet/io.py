"""Plain-text point, curve and report files.

Numbers are written with ``repr`` so every float round-trips exactly and the
output never depends on the locale.
"""

import json

import numpy as np

from parnet.bspline import BSplineCurve, KnotVector
from parnet.exceptions import InvalidArgumentError, ModelFormatError


def _numbers(fields, lineno):
    try:
        return [float(f) for f in fields]
    except ValueError as exc:
        raise ModelFormatError(f"bad number: {exc}", offset=f"line {lineno}")


def _split(line):
    return [f for f in line.replace(",", " ").split() if f]


def read_points(path):
    """One ``x,y`` (or ``x y``) pair per line; blank lines and ``#`` comments skipped."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            values = _numbers(_split(line), lineno)
            if len(values) != 2:
                raise ModelFormatError(f"expected 2 coordinates, got {len(values)}",
                                       offset=f"line {lineno}")
            rows.append(values)
    if len(rows) < 2:
        raise ModelFormatError("a point file needs at least two points",
                               offset=f"line {max(1, len(rows))}")
    return np.array(rows)


def write_points(path, points):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for x, y in np.asarray(points, dtype=np.float64).tolist():
            fh.write(f"{x!r},{y!r}\n")


def write_curve(path, curve):
    """Curve record: ``degree``, ``knots``, ``x`` and ``y`` control coordinate lines."""
    ctrl = curve.control_points
    lines = [f"degree,{curve.degree}",
             "knots," + ",".join(repr(float(k)) for k in curve.knots),
             "x," + ",".join(repr(float(v)) for v in ctrl[:, 0]),
             "y," + ",".join(repr(float(v)) for v in ctrl[:, 1])]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_curve(path):
    fields = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            key, _, rest = line.partition(",")
            if key not in ("degree", "knots", "x", "y"):
                raise ModelFormatError(f"unknown curve field {key!r}", offset=f"line {lineno}")
            fields[key] = (_numbers(rest.split(","), lineno), lineno)
    missing = {"degree", "knots", "x", "y"} - set(fields)
    if missing:
        raise ModelFormatError(f"curve file lacks {sorted(missing)}")
    try:
        kv = KnotVector(fields["knots"][0], int(fields["degree"][0][0]))
        return BSplineCurve(kv, np.column_stack([fields["x"][0], fields["y"][0]]))
    except (InvalidArgumentError, ValueError) as exc:
        raise ModelFormatError(f"invalid curve: {exc}", offset=f"line {fields['knots'][1]}")


def write_json(path, payload):
    def default(obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, (np.floating,)):
            return float(obj)
        raise TypeError(f"cannot serialize {type(obj).__name__}")

    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=default)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
