"""Binary model files.

Layout: one ASCII header line holding a JSON object (format tag and
version, layer sizes, activations, dropout, input point count, degree and
model kind), a newline, then every weight matrix and bias vector in layer
order as row-major little-endian float64 blocks.
"""

import json

import numpy as np

from parnet.exceptions import IncompatibleModelError, ModelFormatError
from parnet.neural.mlp import Mlp

FORMAT_TAG = "parnet-mlp"
FORMAT_VERSION = 1
_MAX_HEADER = 1 << 16


def _blocks(layer_sizes):
    shapes = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        shapes += [(fan_in, fan_out), (fan_out,)]
    return shapes


def save_model(path, mlp, kind="mlp", l=None, degree=3, extra=None):
    header = {"format": FORMAT_TAG, "version": FORMAT_VERSION, "kind": kind,
              "layer_sizes": mlp.layer_sizes, "activations": mlp.activations,
              "dropout": mlp.dropout, "l": l, "degree": degree}
    if extra:
        header["extra"] = extra
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        for arr in mlp.params:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path):
    """Return (Mlp, header dict)."""
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.find(b"\n", 0, _MAX_HEADER)
    if end < 0:
        raise ModelFormatError("missing header line", offset=min(len(data), _MAX_HEADER))
    try:
        header = json.loads(data[:end].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable header: {exc}", offset=0)
    if not isinstance(header, dict) or header.get("format") != FORMAT_TAG:
        raise ModelFormatError("not a model file", offset=0)
    if header.get("version") != FORMAT_VERSION:
        raise IncompatibleModelError(
            f"model format version {header.get('version')} is not supported "
            f"(expected {FORMAT_VERSION})", offset=0)
    try:
        sizes = [int(s) for s in header["layer_sizes"]]
        activations = list(header["activations"])
        dropout = float(header["dropout"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"incomplete header: {exc}", offset=0)
    offset = end + 1
    arrays = []
    for shape in _blocks(sizes):
        nbytes = 8 * int(np.prod(shape))
        if offset + nbytes > len(data):
            raise ModelFormatError(f"truncated weight block of shape {shape}", offset=offset)
        arrays.append(np.frombuffer(data, dtype="<f8", count=nbytes // 8,
                                    offset=offset).reshape(shape).astype(np.float64))
        offset += nbytes
    if offset != len(data):
        raise ModelFormatError("trailing bytes after the last weight block", offset=offset)
    mlp = Mlp(sizes, activations, dropout, weights=arrays[0::2], biases=arrays[1::2])
    return mlp, header
