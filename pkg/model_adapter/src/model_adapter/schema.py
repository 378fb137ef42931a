"""Column schemas: decode protocol points to native feature rows and back.

The auditor only ever sees points in {-1, +1}^n. A schema maps each native
feature to one or more protocol columns so the served predictor can be fed
in its own feature space:

- ``identity``: one column, native values are already -1 or +1.
- ``binary``: one column, native 0/1 mapped to -1/+1.
- ``threshold``: one column; +1 decodes to the ``high`` representative and
  -1 to ``low`` (defaults ``cut`` plus or minus 1); values at or above
  ``cut`` encode to +1.
- ``onehot``: one column per category; the single +1 column names the
  category.

``decode(encode(row)) == row`` holds for every schema-valid row, i.e. rows
whose values are the canonical representatives (0/1 for binary, ``low`` or
``high`` for thresholds, a listed category for one-hots).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence


class SchemaError(ValueError):
    """Raised for invalid schema files and schema-violating rows."""


@dataclass(frozen=True)
class Column:
    """One native feature and its protocol coding rule."""

    name: str
    kind: str
    cut: float = 0.0
    low: float = -1.0
    high: float = 1.0
    categories: tuple[str, ...] = ()

    @property
    def width(self) -> int:
        return len(self.categories) if self.kind == "onehot" else 1

    def encode(self, value: Any) -> list[int]:
        if self.kind == "identity":
            if value not in (-1, 1):
                raise SchemaError(f"column {self.name}: identity value must be +-1, got {value!r}")
            return [int(value)]
        if self.kind == "binary":
            if value not in (0, 1):
                raise SchemaError(f"column {self.name}: binary value must be 0/1, got {value!r}")
            return [1 if value == 1 else -1]
        if self.kind == "threshold":
            return [1 if float(value) >= self.cut else -1]
        try:
            slot = self.categories.index(value)
        except ValueError:
            raise SchemaError(
                f"column {self.name}: {value!r} is not one of {self.categories}"
            ) from None
        return [1 if i == slot else -1 for i in range(len(self.categories))]

    def decode(self, bits: Sequence[int]) -> Any:
        if self.kind == "identity":
            return int(bits[0])
        if self.kind == "binary":
            return 1 if bits[0] == 1 else 0
        if self.kind == "threshold":
            return self.high if bits[0] == 1 else self.low
        ups = [i for i, b in enumerate(bits) if b == 1]
        if len(ups) != 1:
            raise SchemaError(
                f"column {self.name}: one-hot group must have exactly one +1, got {list(bits)}"
            )
        return self.categories[ups[0]]


@dataclass(frozen=True)
class Schema:
    """Ordered native columns; protocol width is the sum of column widths."""

    columns: tuple[Column, ...]

    @property
    def width(self) -> int:
        return sum(column.width for column in self.columns)

    def encode_row(self, row: Sequence[Any]) -> list[int]:
        if len(row) != len(self.columns):
            raise SchemaError(f"row has {len(row)} values for {len(self.columns)} columns")
        bits: list[int] = []
        for column, value in zip(self.columns, row):
            bits.extend(column.encode(value))
        return bits

    def decode_row(self, bits: Sequence[int]) -> tuple[Any, ...]:
        if len(bits) != self.width:
            raise SchemaError(f"point has {len(bits)} columns, schema codes {self.width}")
        row: list[Any] = []
        at = 0
        for column in self.columns:
            row.append(column.decode(bits[at : at + column.width]))
            at += column.width
        return tuple(row)

    def decode_batch(self, points: Sequence[Sequence[int]]) -> list[tuple[Any, ...]]:
        return [self.decode_row(point) for point in points]


def identity_schema(n: int) -> Schema:
    return Schema(tuple(Column(name=f"x{i}", kind="identity") for i in range(1, n + 1)))


def _parse_column(name: str, rule: dict) -> Column:
    kind = rule.get("kind")
    if kind in ("identity", "binary"):
        return Column(name=name, kind=kind)
    if kind == "threshold":
        if "cut" not in rule:
            raise SchemaError(f"column {name}: threshold rule needs a cut")
        cut = float(rule["cut"])
        low = float(rule.get("low", cut - 1.0))
        high = float(rule.get("high", cut + 1.0))
        if not low < cut <= high:
            raise SchemaError(f"column {name}: need low < cut <= high, got {low}, {cut}, {high}")
        return Column(name=name, kind=kind, cut=cut, low=low, high=high)
    if kind == "onehot":
        categories = tuple(rule.get("categories", ()))
        if len(categories) < 2 or len(set(categories)) != len(categories):
            raise SchemaError(f"column {name}: one-hot needs distinct categories, two or more")
        return Column(name=name, kind=kind, categories=categories)
    raise SchemaError(f"column {name}: unknown kind {kind!r}")


def load_schema(source: str | Path | dict) -> Schema:
    """Parse a schema from a JSON file or an already-parsed mapping.

    The JSON object maps column names to rules in serving order, e.g.
    ``{"age": {"kind": "threshold", "cut": 35}, "grp": {"kind": "binary"}}``.
    """
    if not isinstance(source, dict):
        source = json.loads(Path(source).read_text())
    if not isinstance(source, dict) or not source:
        raise SchemaError("schema must be a nonempty JSON object")
    return Schema(tuple(_parse_column(name, rule) for name, rule in source.items()))
