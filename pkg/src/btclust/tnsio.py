"""Text formats: coordinate tensors, label sidecars and model files.

Coordinate ("tns") files hold one 1-based ``i j k`` or ``i j k v`` per line,
``#`` comments and an optional ``%dims n m l`` header.

Model files are line-oriented ``key value...`` text; factor columns are
written as lists of 1-based set-bit positions because the factors are sparse.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np

from .bintensor import BinaryMatrix, BinaryTensor3, from_triples
from .saboteur import ClusterModel, Model, UnrestrictedModel

MODEL_MAGIC = "btclust-model"
MODEL_VERSION = 1


class FormatError(ValueError):
    """Malformed input file; the message carries the location."""


# -- tensors ------------------------------------------------------------------


def parse_tns(path) -> BinaryTensor3:
    dims = None
    coords = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if fields[0] == "%dims":
                if len(fields) != 4:
                    raise FormatError(f"{path}:{lineno}: %dims needs three sizes")
                dims = tuple(_positive(f, path, lineno) for f in fields[1:])
                continue
            if len(fields) not in (3, 4):
                raise FormatError(f"{path}:{lineno}: expected 'i j k [v]', got {line!r}")
            if len(fields) == 4:
                value = _value(fields[3], path, lineno)
                if value == 0:
                    continue
            coords.append(tuple(_positive(f, path, lineno) for f in fields[:3]))
    if dims is None:
        if not coords:
            raise FormatError(f"{path}: no entries and no %dims header")
        dims = tuple(int(d) for d in np.max(np.array(coords), axis=0))
    try:
        return from_triples(*dims, coords)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _positive(token: str, path, lineno: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: {token!r} is not an integer index") from None
    if value < 1:
        raise FormatError(f"{path}:{lineno}: indices are 1-based, got {value}")
    return value


def _value(token: str, path, lineno: int) -> int:
    try:
        value = float(token)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: value {token!r} is not a number") from None
    if value not in (0.0, 1.0):
        raise FormatError(f"{path}:{lineno}: binary tensors need v in {{0, 1}}, got {token}")
    return int(value)


def write_tns(X: BinaryTensor3, path) -> None:
    coords = X.nonzero() + 1
    order = np.lexsort((coords[:, 0], coords[:, 1], coords[:, 2]))
    with open(path, "w") as fh:
        fh.write(f"%dims {X.n} {X.m} {X.l}\n")
        for i, j, k in coords[order]:
            fh.write(f"{i} {j} {k}\n")


def read_labels(path) -> np.ndarray:
    """One integer label per line; returned unchanged (ids as written)."""
    labels = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: label {line!r} is not an integer") from None
    return np.array(labels, dtype=np.int64)


def write_labels(labels, path) -> None:
    """Write 0-based labels as 1-based ids."""
    with open(path, "w") as fh:
        for label in np.asarray(labels):
            fh.write(f"{int(label) + 1}\n")


# -- preprocessing ------------------------------------------------------------


def preprocess(X: BinaryTensor3, min_entries=1) -> tuple[BinaryTensor3, list[np.ndarray]]:
    """Drop slices with fewer than ``min_entries`` ones, in every mode, to a fixpoint.

    ``min_entries`` is one threshold for all modes or a triple. Returns the
    pruned tensor and, per mode, an old-to-new index map (``-1`` = removed).
    """
    thresholds = np.broadcast_to(np.asarray(min_entries, dtype=np.int64), (3,))
    coords = X.nonzero()
    keep = [np.ones(d, dtype=bool) for d in X.shape]
    while True:
        changed = False
        for mode in range(3):
            counts = np.bincount(coords[:, mode], minlength=X.shape[mode])
            drop = keep[mode] & (counts < thresholds[mode])
            if drop.any():
                keep[mode] &= ~drop
                changed = True
                coords = coords[keep[mode][coords[:, mode]]]
        if not changed:
            break
    if not all(k.any() for k in keep):
        raise ValueError("preprocessing removed every slice of some mode")
    maps = []
    for k in keep:
        mapping = np.full(len(k), -1, dtype=np.int64)
        mapping[k] = np.arange(int(k.sum()))
        maps.append(mapping)
    new_coords = np.column_stack([maps[d][coords[:, d]] for d in range(3)]) if len(coords) else coords
    shape = tuple(int(k.sum()) for k in keep)
    return from_triples(*shape, [tuple(c) for c in new_coords + 1]), maps


# -- models -------------------------------------------------------------------


def _indices(column: np.ndarray) -> str:
    return " ".join(str(i + 1) for i in np.flatnonzero(column))


def write_model(model: Model, path) -> None:
    n, m, l = model.shape
    lines = [
        f"format {MODEL_MAGIC} {MODEL_VERSION}",
        f"kind {'bcpc' if isinstance(model, ClusterModel) else 'unrestricted'}",
        f"dims {n} {m} {l}",
        f"k {model.k}",
        f"weight {model.weight}",
        f"sim {model.sim}",
    ]
    if isinstance(model, ClusterModel):
        for j in range(model.k):
            lines.append(f"A {j + 1} {_indices(model.A[:, j])}".rstrip())
        for j in range(model.k):
            lines.append(f"B {j + 1} {_indices(model.B[:, j])}".rstrip())
    else:
        dense = model.centroids.to_dense()
        for j in range(model.k):
            lines.append(f"G {j + 1} {_indices(dense[j])}".rstrip())
    lines.append("assignment " + " ".join(str(c + 1) for c in model.assignment))
    Path(path).write_text("\n".join(lines) + "\n")


def read_model(path) -> Model:
    fields: dict[str, list[str]] = {}
    columns: dict[str, dict[int, list[int]]] = {"A": {}, "B": {}, "G": {}}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            key, rest = parts[0], parts[1:]
            try:
                if key in columns:
                    columns[key][int(rest[0])] = [int(v) - 1 for v in rest[1:]]
                else:
                    fields[key] = rest
            except (ValueError, IndexError):
                raise FormatError(f"{path}:{lineno}: malformed {key!r} line") from None
    try:
        if fields["format"] != [MODEL_MAGIC, str(MODEL_VERSION)]:
            raise FormatError(f"{path}: not a {MODEL_MAGIC} v{MODEL_VERSION} file")
        n, m, l = (int(v) for v in fields["dims"])
        k = int(fields["k"][0])
        weight = Fraction(fields["weight"][0])
        sim = int(fields["sim"][0])
        assignment = np.array([int(v) - 1 for v in fields["assignment"]], dtype=np.int64)
        kind = fields["kind"][0]
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc.args[0]!r}") from None
    if len(assignment) != l or (l and (assignment.min() < 0 or assignment.max() >= k)):
        raise FormatError(f"{path}: assignment must list {l} ids in 1..{k}")

    def dense(key: str, rows: int) -> np.ndarray:
        out = np.zeros((rows, k), dtype=bool)
        for j, idx in columns[key].items():
            if not 1 <= j <= k or any(not 0 <= i < rows for i in idx):
                raise FormatError(f"{path}: {key} column {j} out of range")
            out[idx, j - 1] = True
        return out

    if kind == "bcpc":
        model = ClusterModel(dense("A", n), dense("B", m), assignment, sim, weight)
    elif kind == "unrestricted":
        cents = BinaryMatrix.from_dense(dense("G", n * m).T)
        model = UnrestrictedModel(n, m, cents, assignment, sim, weight)
    else:
        raise FormatError(f"{path}: unknown model kind {kind!r}")
    return model
