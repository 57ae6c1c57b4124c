"""Plain-text file formats.

All floats are written with ``repr`` (shortest round-trip form), so files
are byte-identical across reruns and re-reading loses nothing.

Signal CSV::

    index,value
    0,0.5773502691896257
    ...

Matrix CSV (entries not listed are zero)::

    row,col,value

Sketch CSV: ``# key=value`` header lines (``gamma``, ``p``, ``sigma0``,
``n1``, ``n2`` and, when known, ``seed``/``stream``) then::

    index,ensemble,value

with ``ensemble`` one of ``cauchy``/``gaussian`` for vector sketches and
``identity-trace``/``gaussian-matrix`` for matrix sketches.

Key=value files (configs, operator descriptors): one ``key = value`` per
line, ``#`` starts a comment, list values are comma separated.
"""

from __future__ import annotations

import csv
import os
from typing import Dict, Iterable, List, Mapping

import numpy as np

from .errors import ParameterError

__all__ = [
    "fmt_float",
    "write_signal_csv",
    "read_signal_csv",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_sketch_csv",
    "read_sketch_csv",
    "read_key_values",
    "write_key_values",
    "write_rows_csv",
]


def fmt_float(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _open_w(path):
    d = os.path.dirname(os.fspath(path))
    if d:
        os.makedirs(d, exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


def _check_header(path, got, expected):
    if [h.strip() for h in got] != expected:
        raise ParameterError(f"{path}: expected header {','.join(expected)}, got {','.join(got)}")


def write_signal_csv(path, x) -> None:
    x = np.asarray(x, dtype=float).ravel()
    with _open_w(path) as fh:
        fh.write("index,value\n")
        for i, v in enumerate(x):
            fh.write(f"{i},{fmt_float(v)}\n")


def read_signal_csv(path) -> np.ndarray:
    """Read an ``index,value`` file; missing indices are zero."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(_uncommented(fh)) if r]
    if not rows:
        raise ParameterError(f"{path}: empty signal file")
    _check_header(path, rows[0], ["index", "value"])
    idx = np.array([int(r[0]) for r in rows[1:]], dtype=int)
    val = np.array([float(r[1]) for r in rows[1:]])
    if idx.size == 0 or idx.min() < 0:
        raise ParameterError(f"{path}: no entries or negative index")
    x = np.zeros(int(idx.max()) + 1)
    x[idx] = val
    return x


def write_matrix_csv(path, X) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with _open_w(path) as fh:
        fh.write(f"# shape={X.shape[0]}x{X.shape[1]}\n")
        fh.write("row,col,value\n")
        for i, j in zip(*np.nonzero(X)):
            fh.write(f"{i},{j},{fmt_float(X[i, j])}\n")


def read_matrix_csv(path) -> np.ndarray:
    """Read a ``row,col,value`` file; a ``# shape=RxC`` line fixes the size."""
    shape = None
    body = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            s = line.strip()
            if s.startswith("#"):
                kv = s[1:].strip()
                if kv.startswith("shape="):
                    r, c = kv[len("shape="):].lower().split("x")
                    shape = (int(r), int(c))
            elif s:
                body.append(s)
    rows = list(csv.reader(body))
    if not rows:
        raise ParameterError(f"{path}: empty matrix file")
    _check_header(path, rows[0], ["row", "col", "value"])
    ij = np.array([(int(r[0]), int(r[1])) for r in rows[1:]], dtype=int).reshape(-1, 2)
    val = np.array([float(r[2]) for r in rows[1:]])
    if shape is None:
        if ij.size == 0:
            raise ParameterError(f"{path}: no entries and no shape line")
        shape = (int(ij[:, 0].max()) + 1, int(ij[:, 1].max()) + 1)
    X = np.zeros(shape)
    X[ij[:, 0], ij[:, 1]] = val
    return X


def write_sketch_csv(path, sketch) -> None:
    with _open_w(path) as fh:
        fh.write(f"# gamma={fmt_float(float(sketch.gamma))}\n")
        fh.write(f"# p={int(sketch.p)}\n")
        fh.write(f"# sigma0={fmt_float(float(sketch.sigma0))}\n")
        fh.write(f"# n1={sketch.n1}\n# n2={sketch.n2}\n")
        if sketch.rng is not None:
            fh.write(f"# seed={sketch.rng.seed}\n")
            fh.write(f"# stream={'/'.join(str(s) for s in sketch.rng.stream)}\n")
        fh.write("index,ensemble,value\n")
        for name, y in _blocks(sketch):
            for i, v in enumerate(y):
                fh.write(f"{i},{name},{fmt_float(v)}\n")


def _blocks(sketch):
    if hasattr(sketch, "y_trace"):
        return [("identity-trace", sketch.y_trace), ("gaussian-matrix", sketch.y_frob)]
    return [("cauchy", sketch.y_cauchy), ("gaussian", sketch.y_gauss)]


def read_sketch_csv(path):
    """Return a ``VectorSketch`` or, for trace/matrix ensembles, a ``MatrixSketch``."""
    from .rank_sketch import MatrixSketch
    from .sketch_estimation import VectorSketch

    meta: Dict[str, str] = {}
    body = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            s = line.strip()
            if s.startswith("#"):
                k, _, v = s[1:].partition("=")
                meta[k.strip()] = v.strip()
            elif s:
                body.append(s)
    rows = list(csv.reader(body))
    _check_header(path, rows[0] if rows else [], ["index", "ensemble", "value"])
    cols: Dict[str, List] = {"cauchy": [], "gaussian": [], "identity-trace": [], "gaussian-matrix": []}
    for r in rows[1:]:
        if r[1] not in cols:
            raise ParameterError(f"{path}: unknown ensemble {r[1]!r}")
        cols[r[1]].append((int(r[0]), float(r[2])))
    y = {k: np.array([v for _, v in sorted(c)]) for k, c in cols.items()}
    try:
        p = int(meta["p"])
    except KeyError:
        raise ParameterError(f"{path}: missing '# p=' header") from None
    rng = None
    if "seed" in meta:
        from .stable_sampling import RngStream

        stream = tuple(int(v) for v in meta.get("stream", "").split("/") if v != "")
        rng = RngStream(int(meta["seed"]), stream)
    gamma, sigma0 = float(meta.get("gamma", 1.0)), float(meta.get("sigma0", 0.0))
    vector = bool(cols["cauchy"] or cols["gaussian"])
    if vector and (cols["identity-trace"] or cols["gaussian-matrix"]):
        raise ParameterError(f"{path}: mixes vector and matrix ensembles")
    if vector:
        return VectorSketch(y["cauchy"], y["gaussian"], gamma, p, sigma0, rng)
    return MatrixSketch(y["identity-trace"], y["gaussian-matrix"], gamma, p, sigma0, rng)


def _uncommented(lines: Iterable[str]):
    for line in lines:
        if line.strip() and not line.lstrip().startswith("#"):
            yield line


def read_key_values(path) -> Dict[str, str]:
    out: Dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, 1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            key, sep, val = s.partition("=")
            if not sep or not key.strip():
                raise ParameterError(f"{path}:{k}: expected 'key = value', got {line.rstrip()!r}")
            out[key.strip()] = val.strip()
    return out


def write_key_values(path, d: Mapping) -> None:
    with _open_w(path) as fh:
        for k, v in d.items():
            if isinstance(v, (list, tuple)):
                v = ",".join(fmt_float(e) for e in v)
            fh.write(f"{k} = {fmt_float(v)}\n")


def write_rows_csv(path, header: List[str], rows: Iterable[Iterable]) -> None:
    with _open_w(path) as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(fmt_float(v) for v in r) + "\n")
