"""Served models: a batch predictor plus the codecs around it.

A :class:`ServedModel` bundles three things: a batch-predict callable, an
optional input schema (protocol points decode to native feature rows before
prediction; ``None`` means the predictor consumes protocol points directly),
and a label codec mapping native predictions onto wire labels (-1/+1 for
binary, 0..K-1 for K >= 3 classes).

Model sources:

- builtin strings: ``constant:+1``, ``dictator:3``, ``parity:1,2,3``,
  ``xor:1,2``, ``maj3``, ``majority:1,3,5``, ``ltf:w1,w2,...;bias``;
- ``*.json``: a truth table ``{"n": ..., "labels": ..., "table": [...]}``
  where table index ``b`` encodes the point whose coordinate ``i`` is -1
  exactly when bit ``i - 1`` of ``b`` is set (index 0 is the all-ones
  point);
- ``*.joblib`` / ``*.pkl``: a pickled scikit-learn estimator, predicted via
  its batch ``predict`` on schema-decoded rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .schema import Schema, SchemaError, load_schema


class AdapterError(ValueError):
    """Raised for unusable model specs and malformed requests."""


@dataclass(frozen=True)
class LabelCodec:
    """Bijection from native predictor labels onto wire labels."""

    classes: tuple[Any, ...]

    def __post_init__(self):
        if len(self.classes) < 2 or len(set(self.classes)) != len(self.classes):
            raise AdapterError("label codec needs two or more distinct classes")

    @property
    def arity(self) -> int:
        return len(self.classes)

    def encode(self, values: Sequence[Any]) -> list[int]:
        if self.arity == 2:
            wire = {self.classes[0]: -1, self.classes[1]: 1}
        else:
            wire = {label: index for index, label in enumerate(self.classes)}
        try:
            return [wire[value] for value in values]
        except KeyError as exc:
            raise AdapterError(f"predictor returned unknown label {exc.args[0]!r}") from None


def _wire_codec(arity: int) -> LabelCodec:
    """Codec for predictors that already emit wire labels."""
    if arity == 2:
        return LabelCodec((-1, 1))
    return LabelCodec(tuple(range(arity)))


@dataclass(frozen=True)
class ServedModel:
    """A predictor with its input schema and label codec."""

    predictor: Callable[[np.ndarray | list], Sequence[Any]]
    codec: LabelCodec
    n: int
    schema: Schema | None = None

    def __post_init__(self):
        if self.n < 1:
            raise AdapterError(f"dimension must be positive, got {self.n}")
        if self.schema is not None and self.schema.width != self.n:
            raise AdapterError(
                f"schema codes {self.schema.width} columns, model serves {self.n}"
            )

    @property
    def labels(self) -> int:
        return self.codec.arity

    def answer(self, xs: Any) -> list[int]:
        """Predict one request batch, returning wire labels."""
        points = np.asarray(xs, dtype=np.int64)
        if points.ndim != 2 or points.shape[0] == 0 or points.shape[1] != self.n:
            raise AdapterError(f"xs must be a nonempty list of {self.n}-column points")
        if not np.all(np.abs(points) == 1):
            raise AdapterError("point coordinates must be -1 or +1")
        if self.schema is None:
            rows: Any = points
        else:
            rows = self.schema.decode_batch(points.tolist())
        return self.codec.encode(list(self.predictor(rows)))


def _require_coords(tokens: str) -> tuple[int, ...]:
    coords = tuple(int(tok) for tok in tokens.split(","))
    if not coords or min(coords) < 1 or len(set(coords)) != len(coords):
        raise AdapterError(f"coordinates must be distinct and 1-based, got {tokens!r}")
    return coords


def _builtin(spec: str, n: int | None) -> ServedModel:
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "constant":
        sign = 1 if arg.strip() in ("+1", "1", "") else -1
        dim = n or 1
        return ServedModel(lambda xs: [sign] * len(xs), _wire_codec(2), dim)
    if kind == "dictator":
        coord = int(arg)
        dim = n or coord
        return ServedModel(
            lambda xs: np.asarray(xs)[:, coord - 1].tolist(), _wire_codec(2), dim
        )
    if kind in ("parity", "xor"):
        coords = _require_coords(arg)
        dim = n or max(coords)
        sign = 1 if kind == "parity" else -1

        def parity(xs, idx=np.array(coords) - 1, s=sign):
            return (s * np.prod(np.asarray(xs)[:, idx], axis=1)).tolist()

        return ServedModel(parity, _wire_codec(2), dim)
    if kind in ("maj3", "majority"):
        coords = _require_coords(arg) if kind == "majority" else (1, 2, 3)
        if len(coords) % 2 == 0:
            raise AdapterError("majority needs an odd number of coordinates")
        dim = n or max(coords)

        def majority(xs, idx=np.array(coords) - 1):
            votes = np.sum(np.asarray(xs)[:, idx], axis=1)
            return np.where(votes > 0, 1, -1).tolist()

        return ServedModel(majority, _wire_codec(2), dim)
    if kind == "ltf":
        w_part, _, b_part = arg.partition(";")
        weights = np.array([float(tok) for tok in w_part.split(",")], dtype=np.float64)
        bias = float(b_part) if b_part else 0.0
        dim = n or weights.shape[0]
        if dim != weights.shape[0]:
            raise AdapterError(f"ltf has {weights.shape[0]} weights but n={dim}")

        def threshold(xs, w=weights, b=bias):
            score = np.asarray(xs, dtype=np.float64) @ w + b
            return np.where(score >= 0.0, 1, -1).tolist()

        return ServedModel(threshold, _wire_codec(2), dim)
    raise AdapterError(f"unknown builtin model {spec!r}")


def _truth_table(path: Path) -> ServedModel:
    doc = json.loads(path.read_text())
    try:
        dim = int(doc["n"])
        table = np.asarray(doc["table"], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise AdapterError(f"truth table {path} needs integer n and a table array") from exc
    arity = int(doc.get("labels", 2))
    if dim < 1 or table.shape != (1 << dim,):
        raise AdapterError(f"table length {table.shape} does not match n={dim}")
    if arity == 2:
        if not np.all(np.abs(table) == 1):
            raise AdapterError("binary truth table entries must be -1 or +1")
    elif np.any(table < 0) or np.any(table >= arity):
        raise AdapterError(f"multiclass entries must lie in 0..{arity - 1}")

    def lookup(xs, t=table):
        points = np.asarray(xs)
        bits = (points < 0).astype(np.int64)
        index = (bits << np.arange(points.shape[1])).sum(axis=1)
        return t[index].tolist()

    return ServedModel(lookup, _wire_codec(arity), dim)


def _sklearn_model(path: Path, schema: Schema | None) -> ServedModel:
    try:
        import joblib
    except ImportError as exc:
        raise AdapterError("serving pickled estimators needs the sklearn extra") from exc
    estimator = joblib.load(path)
    predict = getattr(estimator, "predict", None)
    if not callable(predict):
        raise AdapterError(f"{path} does not hold an object with a predict method")
    classes = getattr(estimator, "classes_", None)
    if classes is None:
        raise AdapterError(f"{path} holds an unfitted or non-classifier object")
    codec = LabelCodec(tuple(classes.tolist()))
    if schema is None:
        width = int(getattr(estimator, "n_features_in_", 0))
        if width < 1:
            raise AdapterError("estimator does not expose n_features_in_; give a schema")
        return ServedModel(lambda xs: predict(np.asarray(xs, dtype=np.float64)), codec, width)

    def on_decoded(rows):
        return predict(np.asarray(rows))

    return ServedModel(on_decoded, codec, schema.width, schema=schema)


def load_served(model: str, schema: str | Path | dict | None = None,
                n: int | None = None) -> ServedModel:
    """Build a ServedModel from a builtin spec or a model file path."""
    parsed = load_schema(schema) if schema is not None else None
    path = Path(model)
    if path.suffix == ".json":
        served = _truth_table(path)
    elif path.suffix in (".joblib", ".pkl"):
        return _sklearn_model(path, parsed)
    else:
        served = _builtin(model, n)
    if parsed is not None:
        if parsed.width != served.n:
            raise AdapterError(
                f"schema codes {parsed.width} columns, model serves {served.n}"
            )
        if any(column.kind != "identity" for column in parsed.columns):
            raise SchemaError("builtin and table models consume protocol points; "
                              "only identity columns make sense here")
    return served
