"""Experiment harness: sweeps over budgets and seeds, CSV dataset ingestion.

A sweep runs each configured method at each budget for each seed, compares
every estimate against a reference (exact enumeration when the dimension
allows, a large Monte Carlo run otherwise), and writes one CSV row per
(method, budget, seed) in a fixed deterministic order. Dataset ingestion
turns a raw CSV into ±1-coded features, an empirical distribution over the
observed rows, and a lookup oracle defined on that support.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    DistributionSpec,
    Empirical,
    Product,
    RandomSource,
    Uniform,
    point_index,
)
from .errors import (
    AuditError,
    DatasetError,
    EmptyFileError,
    InvalidParameterError,
    InvalidSpecError,
    NonNumericCellError,
    OracleError,
    TooLargeError,
    UnmappedCategoryError,
)
from .estimators import (
    IndividualFairness,
    Multicalibration,
    PropertySpec,
    Robustness,
    StatisticalParity,
    estimate_multiclass_sp,
    estimate_spectral_property,
    estimate_statistical_parity,
)
from .baselines import BaselineSpec, uniform_estimate
from .exact_oracle import exact_property
from .goldreich_levin import goldreich_levin
from .models import AuditBudget, ExternalModel, ModelOracle, build_model

SWEEP_HEADER = "method,budget,seed,estimate,exact,abs_error,queries,wall_ms"
MC_REFERENCE_DRAWS = 1_000_000
VALID_METHODS = ("AFA", "Uniform", "Exact")


class SupportLookup(ModelOracle):
    """Labels defined only on a dataset's support; anything else is an error."""

    def __init__(self, points: np.ndarray, labels: np.ndarray, arity: int = 2):
        points = np.asarray(points, dtype=np.int8)
        labels = np.asarray(labels)
        if points.ndim != 2 or points.shape[0] != labels.shape[0]:
            raise InvalidSpecError("one label per support row required")
        super().__init__(points.shape[1], arity=arity)
        self._table = {
            int(key): int(label)
            for key, label in zip(point_index(points), labels)
        }

    def _predict(self, xs: np.ndarray) -> np.ndarray:
        keys = point_index(xs)
        out = np.empty(xs.shape[0], dtype=np.int64)
        for i, key in enumerate(keys):
            label = self._table.get(int(key))
            if label is None:
                raise OracleError(
                    "query point lies outside the dataset support", points_labeled=i
                )
            out[i] = label
        return out


@dataclass(frozen=True)
class DatasetTable:
    """±1-coded feature rows with their labels and designated columns."""

    header: tuple[str, ...]
    rows: np.ndarray
    labels: np.ndarray
    label_column: str
    sensitive_column: str
    sensitive_index: int  # 1-based coordinate in the coded feature space

    def __post_init__(self):
        if self.rows.ndim != 2 or len(self.header) != self.rows.shape[1]:
            raise InvalidSpecError("header and row width disagree")
        if not np.all(np.abs(self.rows) == 1):
            raise InvalidSpecError("coded cells must all be -1 or +1")
        if not 1 <= self.sensitive_index <= self.rows.shape[1]:
            raise InvalidSpecError("sensitive index out of range")


def load_schema(source: str | Path | dict) -> dict:
    """Schema = column name -> coding rule. Accepts a dict or a JSON path."""
    if isinstance(source, dict):
        return source
    with open(source, "r", encoding="utf-8") as fh:
        schema = json.load(fh)
    if not isinstance(schema, dict):
        raise InvalidSpecError("schema file must hold one JSON object")
    return schema


def _code_cell(column: str, rule: dict, raw: str) -> list[int]:
    kind = rule.get("kind")
    if kind == "binary":
        try:
            value = float(raw)
        except ValueError as exc:
            raise NonNumericCellError(
                f"column {column!r}: cell {raw!r} is not numeric"
            ) from exc
        if value == 1.0:
            return [1]
        if value in (-1.0, 0.0):
            return [-1]
        raise UnmappedCategoryError(
            f"column {column!r}: binary cell must be -1, 0, or 1, got {raw!r}"
        )
    if kind == "threshold":
        try:
            value = float(raw)
        except ValueError as exc:
            raise NonNumericCellError(
                f"column {column!r}: cell {raw!r} is not numeric"
            ) from exc
        return [1 if value > float(rule["cut"]) else -1]
    if kind == "onehot":
        categories = rule["categories"]
        if raw not in categories:
            raise UnmappedCategoryError(
                f"column {column!r}: category {raw!r} not in schema list"
            )
        return [1 if raw == cat else -1 for cat in categories]
    raise InvalidSpecError(f"column {column!r}: unknown coding kind {kind!r}")


def _coded_names(column: str, rule: dict) -> list[str]:
    if rule.get("kind") == "onehot":
        return [f"{column}={cat}" for cat in rule["categories"]]
    return [column]


def ingest_csv(
    path: str | Path,
    schema: str | Path | dict,
    label_column: str,
    sensitive_column: str,
) -> tuple[DatasetTable, Empirical, SupportLookup]:
    """Read a CSV into coded features, an empirical distribution, an oracle.

    Every column must have a schema rule; continuous columns are thresholded,
    categoricals one-hot expanded, and the label column must code to a single
    ±1 column. Duplicate feature rows merge into one support atom whose label
    is the majority vote (ties resolve to +1).
    """
    schema = load_schema(schema)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        table = [row for row in reader if row]
    if len(table) < 2:
        raise EmptyFileError(f"{path}: need a header and at least one data row")
    header, data = table[0], table[1:]
    for column in header:
        if column not in schema:
            raise InvalidSpecError(f"schema misses column {column!r}")
    for needed in (label_column, sensitive_column):
        if needed not in header:
            raise InvalidSpecError(f"column {needed!r} not in the file header")
    if len(_coded_names(label_column, schema[label_column])) != 1:
        raise InvalidSpecError("label column must code to a single ±1 column")
    if len(_coded_names(sensitive_column, schema[sensitive_column])) != 1:
        raise InvalidSpecError("sensitive column must code to a single ±1 column")

    feature_columns = [c for c in header if c != label_column]
    coded_header = [
        name for column in feature_columns for name in _coded_names(column, schema[column])
    ]
    sensitive_index = coded_header.index(sensitive_column) + 1

    rows: list[list[int]] = []
    labels: list[int] = []
    for raw_row in data:
        if len(raw_row) != len(header):
            raise DatasetError(f"row width {len(raw_row)} != header width {len(header)}")
        coded: list[int] = []
        label_value: int | None = None
        for column, raw in zip(header, raw_row):
            cells = _code_cell(column, schema[column], raw.strip())
            if column == label_column:
                label_value = cells[0]
            else:
                coded.extend(cells)
        assert label_value is not None
        rows.append(coded)
        labels.append(label_value)

    features = np.asarray(rows, dtype=np.int8)
    label_arr = np.asarray(labels, dtype=np.int64)

    keys = point_index(features)
    order = np.argsort(keys, kind="stable")
    unique_points: list[np.ndarray] = []
    unique_weights: list[float] = []
    unique_labels: list[int] = []
    i = 0
    total = features.shape[0]
    while i < total:
        j = i
        while j < total and keys[order[j]] == keys[order[i]]:
            j += 1
        block = order[i:j]
        unique_points.append(features[block[0]])
        unique_weights.append(len(block) / total)
        vote = int(np.sum(label_arr[block]))
        unique_labels.append(1 if vote >= 0 else -1)
        i = j

    dataset = DatasetTable(
        header=tuple(coded_header),
        rows=features,
        labels=label_arr,
        label_column=label_column,
        sensitive_column=sensitive_column,
        sensitive_index=sensitive_index,
    )
    dist = Empirical(np.stack(unique_points), np.asarray(unique_weights))
    oracle = SupportLookup(np.stack(unique_points), np.asarray(unique_labels))
    return dataset, dist, oracle


def parse_property(
    name: str,
    rho: float | None = None,
    l: int | None = None,
    sensitive: int | None = None,
) -> PropertySpec:
    """Build a property from the short names used by configs and flags."""
    key = name.strip().lower()
    if key in ("rob", "robustness"):
        if rho is None:
            raise InvalidParameterError("robustness needs rho")
        return Robustness(rho)
    if key in ("if", "individual-fairness"):
        if rho is None or l is None:
            raise InvalidParameterError("individual fairness needs rho and l")
        return IndividualFairness(rho, l)
    if key in ("sp", "statistical-parity"):
        if sensitive is None:
            raise InvalidParameterError("statistical parity needs a sensitive coordinate")
        return StatisticalParity(sensitive)
    if key in ("mc", "multicalibration"):
        if sensitive is None:
            raise InvalidParameterError("multicalibration needs a sensitive coordinate")
        return Multicalibration(sensitive)
    raise InvalidParameterError(f"unknown property {name!r}")


@dataclass
class SweepConfig:
    """Everything one sweep needs; see parse_config for the file format."""

    dist: DistributionSpec
    property: PropertySpec
    methods: tuple[str, ...]
    budgets: tuple[int, ...]
    seeds: int
    model: str | None = None
    endpoint: str | None = None
    oracle: ModelOracle | None = None
    tau: float = 0.2
    delta: float = 0.05
    out: str | None = None

    def __post_init__(self):
        if not self.methods:
            raise InvalidSpecError("at least one method required")
        for m in self.methods:
            if m not in VALID_METHODS:
                raise InvalidSpecError(
                    f"method {m!r} not one of {', '.join(VALID_METHODS)}"
                )
        if not self.budgets:
            raise InvalidSpecError("at least one budget required")
        if any(b <= 0 for b in self.budgets):
            raise InvalidSpecError("budgets must be positive")
        if list(self.budgets) != sorted(set(self.budgets)):
            raise InvalidSpecError("budgets must be strictly increasing")
        if self.seeds < 1:
            raise InvalidSpecError("seeds must be >= 1")
        picked = [
            x for x in (self.model, self.endpoint, self.oracle) if x is not None
        ]
        if len(picked) != 1:
            raise InvalidSpecError(
                "exactly one of model, endpoint, oracle must be set"
            )


@dataclass
class SweepRow:
    method: str
    budget: int
    seed: int
    estimate: float | None
    exact: float | None
    abs_error: float | None
    queries: int
    wall_ms: float
    error: str | None = None

    def render(self) -> str:
        def cell(x: float | None) -> str:
            return "" if x is None else f"{x:.9f}"

        return (
            f"{self.method},{self.budget},{self.seed},{cell(self.estimate)},"
            f"{cell(self.exact)},{cell(self.abs_error)},{self.queries},"
            f"{self.wall_ms:.3f}"
        )


@dataclass
class SweepResult:
    rows: list[SweepRow]
    reference: float | None
    reference_kind: str  # "exact" | "mc-reference" | "none"
    comments: list[str] = field(default_factory=list)

    def render(self) -> str:
        out = io.StringIO()
        out.write(SWEEP_HEADER + "\n")
        if self.reference_kind == "mc-reference":
            out.write("# exact=mc-reference\n")
        for row in self.rows:
            if row.error is not None:
                out.write(
                    f"# error: method={row.method} budget={row.budget} "
                    f"seed={row.seed} {row.error}\n"
                )
            out.write(row.render() + "\n")
        return out.getvalue()


def mc_reference(
    model: ModelOracle,
    dist: DistributionSpec,
    prop: PropertySpec,
    draws: int = MC_REFERENCE_DRAWS,
    rng: RandomSource | int | None = 0,
) -> float:
    """Large-sample Monte Carlo stand-in for the exact value.

    Reports on the sweep's comparison surface: correlation for robustness
    and individual fairness, the rate gap for parity properties.
    """
    if isinstance(prop, (Robustness, IndividualFairness)):
        spec = BaselineSpec(property=prop, m=max(1, draws // 2))
        report = uniform_estimate(model, dist, spec, rng=rng)
        return report.companions["correlation"]
    spec = BaselineSpec(property=prop, m=max(2, draws))
    return uniform_estimate(model, dist, spec, rng=rng).estimate


def _estimate_surface(prop: PropertySpec, report) -> float:
    if isinstance(prop, (Robustness, IndividualFairness)):
        if report.method == "Uniform":
            return report.companions["correlation"]
        return report.estimate
    return report.estimate


def _run_one(
    method: str,
    budget: int,
    seed: int,
    model: ModelOracle,
    cfg: SweepConfig,
    reference: float | None,
) -> SweepRow:
    start = time.perf_counter()
    prop = cfg.property
    try:
        rng = RandomSource(seed)
        if method == "AFA":
            if isinstance(prop, (Robustness, IndividualFairness)):
                spectrum = goldreich_levin(
                    model, cfg.dist, cfg.tau, cfg.delta,
                    budget=AuditBudget(budget), rng=rng,
                )
                report = estimate_spectral_property(prop, spectrum, cfg.dist.n)
            elif isinstance(prop, StatisticalParity):
                report = estimate_statistical_parity(
                    model, cfg.dist, prop.sensitive, cfg.tau, cfg.delta,
                    budget=AuditBudget(budget), rng=rng,
                )
            else:
                report = estimate_multiclass_sp(
                    model, cfg.dist, prop.sensitive, cfg.tau, cfg.delta,
                    budget=AuditBudget(budget), rng=rng,
                )
            estimate = _estimate_surface(prop, report)
            queries = report.queries_used
        elif method == "Uniform":
            if isinstance(prop, (Robustness, IndividualFairness)):
                spec = BaselineSpec(property=prop, m=max(1, budget // 2))
            else:
                spec = BaselineSpec(property=prop, m=max(2, budget))
            report = uniform_estimate(model, cfg.dist, spec, rng=rng)
            estimate = _estimate_surface(prop, report)
            queries = report.queries_used
        else:
            result = exact_property(model, cfg.dist, prop)
            estimate = (
                result.correlation
                if isinstance(prop, (Robustness, IndividualFairness))
                else result.value
            )
            queries = result.enumeration_size
        wall = (time.perf_counter() - start) * 1000.0
        err = None if reference is None else abs(estimate - reference)
        return SweepRow(
            method=method, budget=budget, seed=seed,
            estimate=estimate, exact=reference, abs_error=err,
            queries=queries, wall_ms=wall,
        )
    except AuditError as exc:
        wall = (time.perf_counter() - start) * 1000.0
        return SweepRow(
            method=method, budget=budget, seed=seed,
            estimate=None, exact=None, abs_error=None,
            queries=0, wall_ms=wall, error=str(exc),
        )


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Run the full (method, budget, seed) grid and write the artifact.

    Rows are computed in a worker pool but buffered and emitted in the
    deterministic grid order, so reruns of the same config are byte-identical
    except for the wall-time column. Endpoint-backed models serialize their
    connection, so they run single-worker.
    """
    if cfg.oracle is not None:
        model = cfg.oracle
    elif cfg.endpoint is not None:
        model = ExternalModel(cfg.endpoint)
    else:
        model = build_model(cfg.model, n=cfg.dist.n)

    try:
        result = exact_property(model, cfg.dist, cfg.property)
        if isinstance(cfg.property, (Robustness, IndividualFairness)):
            reference = result.correlation
        else:
            reference = result.value
        reference_kind = "exact"
    except TooLargeError:
        reference = mc_reference(model, cfg.dist, cfg.property, rng=0)
        reference_kind = "mc-reference"

    grid = [
        (method, budget, seed)
        for method in cfg.methods
        for budget in cfg.budgets
        for seed in range(1, cfg.seeds + 1)
    ]
    workers = 1 if isinstance(model, ExternalModel) else min(8, len(grid))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(
            pool.map(
                lambda key: _run_one(key[0], key[1], key[2], model, cfg, reference),
                grid,
            )
        )
    sweep = SweepResult(rows=rows, reference=reference, reference_kind=reference_kind)
    if cfg.out:
        Path(cfg.out).write_text(sweep.render(), encoding="utf-8")
    return sweep


def parse_config(text: str) -> SweepConfig:
    """Flat key = value sweep description; '#' starts a comment line.

    Keys: model | endpoint, dist (uniform | product:b1,b2,... | csv),
    n (for uniform), property (rob|if|sp|mc), rho, l, sensitive, tau, delta,
    methods (comma list), budgets (comma list), seeds, out, and for csv
    distributions: csv, schema, label_col, sensitive_col.
    """
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidSpecError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        pairs[key.strip().lower()] = value.strip()

    def need(key: str) -> str:
        if key not in pairs:
            raise InvalidSpecError(f"config misses required key {key!r}")
        return pairs[key]

    oracle = None
    sensitive_default: int | None = None
    dist_kind = need("dist").lower()
    if dist_kind == "uniform":
        dist: DistributionSpec = Uniform(int(need("n")))
    elif dist_kind.startswith("product:"):
        biases = [float(tok) for tok in dist_kind.split(":", 1)[1].split(",")]
        dist = Product(tuple(biases))
    elif dist_kind == "csv":
        table, dist, oracle = ingest_csv(
            need("csv"), need("schema"), need("label_col"), need("sensitive_col")
        )
        sensitive_default = table.sensitive_index
    else:
        raise InvalidSpecError(f"unknown dist {pairs['dist']!r}")

    sensitive = int(pairs["sensitive"]) if "sensitive" in pairs else sensitive_default
    prop = parse_property(
        need("property"),
        rho=float(pairs["rho"]) if "rho" in pairs else None,
        l=int(pairs["l"]) if "l" in pairs else None,
        sensitive=sensitive,
    )
    model = pairs.get("model")
    endpoint = pairs.get("endpoint")
    if oracle is not None and model is None and endpoint is None:
        pass  # the ingested lookup oracle is the model under audit
    else:
        oracle = None
    return SweepConfig(
        dist=dist,
        property=prop,
        methods=tuple(m.strip() for m in need("methods").split(",") if m.strip()),
        budgets=tuple(int(b) for b in need("budgets").split(",") if b.strip()),
        seeds=int(need("seeds")),
        model=model,
        endpoint=endpoint,
        oracle=oracle,
        tau=float(pairs.get("tau", "0.2")),
        delta=float(pairs.get("delta", "0.05")),
        out=pairs.get("out"),
    )


def load_config(path: str | Path) -> SweepConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
