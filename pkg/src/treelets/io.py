"""Matrix, model, metadata and report file formats.

Binary matrix layout (little-endian): magic ``b"TLMX"``, format version as
u16, ``n`` and ``p`` as u64, then ``n * p`` float64 values row-major.

Model text layout::

    treelet-model 1 p=<p> L=<L> similarity=<kind> centered=<0|1>
    <level> <idx_a> <idx_b> <theta> <sum_idx>
    ...

Angles are written with 17 significant digits so they read back exactly.
"""

from __future__ import annotations

import csv
import io as _io
import struct
from pathlib import Path

import numpy as np

from .exceptions import DataError, ShapeError
from .treelet import Rotation, TreeletModel

MAGIC = b"TLMX"
MATRIX_VERSION = 1
MODEL_VERSION = 1
_HEADER = struct.Struct("<4sHQQ")


def fmt(x) -> str:
    return f"{float(x):.17g}"


def write_matrix_binary(path, X):
    X = np.ascontiguousarray(X, dtype="<f8")
    if X.ndim != 2:
        raise ShapeError("matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, MATRIX_VERSION, X.shape[0], X.shape[1]))
        fh.write(X.tobytes(order="C"))


def read_matrix_binary(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, n, p = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DataError(f"{path}: not a TLMX file")
    if version != MATRIX_VERSION:
        raise DataError(f"{path}: unsupported TLMX version {version}")
    body = data[_HEADER.size:]
    if len(body) != 8 * n * p:
        raise DataError(f"{path}: expected {n * p} values, found {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").reshape(n, p).astype(np.float64)


def write_matrix_csv(path, X, names=None):
    X = np.asarray(X, dtype=np.float64)
    if names is None:
        names = [f"x{j}" for j in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in X:
            w.writerow([fmt(v) for v in row])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    names, body = rows[0], [r for r in rows[1:] if r]
    try:
        X = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if body and X.shape[1] != len(names):
        raise ShapeError(f"{path}: header has {len(names)} names, rows have {X.shape[1]} values")
    return X.reshape(len(body), len(names)), names


def is_binary_path(path) -> bool:
    path = Path(path)
    if path.suffix.lower() in (".tlmx", ".bin"):
        return True
    if path.exists():
        with open(path, "rb") as fh:
            return fh.read(4) == MAGIC
    return False


def read_matrix(path):
    if is_binary_path(path):
        return read_matrix_binary(path)
    return read_matrix_csv(path)[0]


def write_matrix(path, X, names=None):
    if is_binary_path(path):
        write_matrix_binary(path, X)
    else:
        write_matrix_csv(path, X, names)


def read_vector(path):
    X = read_matrix(path)
    if X.ndim != 2 or X.shape[1] != 1:
        raise ShapeError(f"{path}: outcome file must have exactly one column")
    return X[:, 0]


def dumps_model(model: TreeletModel) -> str:
    lines = [
        f"treelet-model {MODEL_VERSION} p={model.p} L={model.n_levels} "
        f"similarity={model.similarity} centered={int(model.centered)}"
    ]
    for r in model.rotations:
        lines.append(f"{r.level} {r.idx_a} {r.idx_b} {fmt(r.theta)} {r.sum_idx}")
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> TreeletModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError("empty model file")
    head = lines[0].split()
    if len(head) != 6 or head[0] != "treelet-model":
        raise DataError("not a treelet model file")
    if int(head[1]) != MODEL_VERSION:
        raise DataError(f"unsupported model version {head[1]}")
    fields = dict(tok.split("=", 1) for tok in head[2:])
    rotations = []
    for ln in lines[1:]:
        level, a, b, theta, s = ln.split()
        rotations.append(Rotation(int(level), int(a), int(b), float(theta), int(s)))
    if len(rotations) != int(fields["L"]):
        raise DataError(f"header says L={fields['L']} but {len(rotations)} rotations follow")
    return TreeletModel(
        p=int(fields["p"]),
        rotations=tuple(rotations),
        similarity=fields["similarity"],
        centered=fields["centered"] == "1",
    )


def save_model(path, model):
    Path(path).write_text(dumps_model(model))


def load_model(path):
    return loads_model(Path(path).read_text())


def write_keyvalue(path, items):
    """Flat ``key=value`` text, one pair per line, in the given order."""
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in items))


def read_keyvalue(path):
    out = {}
    for ln in Path(path).read_text().splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise DataError(f"{path}: expected key=value, got {ln!r}")
        k, v = ln.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    Path(path).write_text(csv_text(header, rows))
