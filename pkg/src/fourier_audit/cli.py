"""Command-line front door for audits, spectrum dumps, sweeps, and checks.

Every run echoes the resolved seed so it can be replayed; timing lines are
prefixed with '#' so output comparison can strip them. Exit codes: 0 on
success, 2 on usage errors, 3 on budget or transport failures, 4 on
degenerate inputs (starved groups, empty datasets, out-of-range dimensions).
"""

from __future__ import annotations

import os
import sys
import time

import click
import numpy as np

from .core import (
    DistributionSpec,
    Product,
    RandomSource,
    Uniform,
    format_subset,
    subset_cardinality,
)
from .errors import (
    BudgetExceededError,
    DatasetError,
    DegenerateGroupError,
    InvalidDistributionError,
    InvalidParameterError,
    InvalidSpecError,
    NoValidPairError,
    OracleError,
    PartialEstimateError,
    StarvedGroupError,
    TooLargeError,
    TransportError,
)
from .estimators import (
    IndividualFairness,
    Robustness,
    StatisticalParity,
    estimate_multiclass_sp,
    estimate_spectral_property,
    estimate_statistical_parity,
    format_report,
)
from .baselines import BaselineSpec, uniform_estimate
from .exact_oracle import exact_property
from .goldreich_levin import goldreich_levin
from .harness import ingest_csv, load_config, parse_property, run_sweep
from .models import AuditBudget, ExternalModel, ModelOracle, build_model

EXIT_USAGE = 2
EXIT_BUDGET_OR_TRANSPORT = 3
EXIT_DEGENERATE = 4

_BUDGET_ERRORS = (
    BudgetExceededError,
    PartialEstimateError,
    TransportError,
    OracleError,
)
_DEGENERATE_ERRORS = (
    DegenerateGroupError,
    StarvedGroupError,
    NoValidPairError,
    DatasetError,
    TooLargeError,
    InvalidDistributionError,
)
_USAGE_ERRORS = (InvalidParameterError, InvalidSpecError)


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("AUDIT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise InvalidParameterError(
                f"AUDIT_SEED must be an integer, got {env!r}"
            ) from exc
    return 0


def _guarded(body):
    """Run a subcommand body, mapping library errors onto exit codes."""
    try:
        body()
    except _BUDGET_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_BUDGET_OR_TRANSPORT)
    except _DEGENERATE_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DEGENERATE)
    except _USAGE_ERRORS as exc:
        raise click.UsageError(str(exc)) from exc


def _parse_dist(
    dist: str,
    n: int | None,
    schema: str | None,
    label_col: str | None,
    sensitive_col: str | None,
):
    """Returns (distribution, dataset oracle or None, sensitive default)."""
    kind = dist.strip()
    low = kind.lower()
    if low == "uniform":
        if n is None:
            raise InvalidParameterError("--dist uniform needs --n")
        return Uniform(n), None, None
    if low.startswith("product:"):
        biases = [float(tok) for tok in kind.split(":", 1)[1].split(",")]
        return Product(tuple(biases)), None, None
    if low.startswith("csv:"):
        path = kind.split(":", 1)[1]
        if not (schema and label_col and sensitive_col):
            raise InvalidParameterError(
                "--dist csv:<path> needs --schema, --label-col, --sensitive-col"
            )
        table, empirical, oracle = ingest_csv(path, schema, label_col, sensitive_col)
        return empirical, oracle, table.sensitive_index
    raise InvalidParameterError(f"unknown distribution {dist!r}")


def _build_oracle(
    model: str | None,
    endpoint: str | None,
    dataset_oracle: ModelOracle | None,
    n: int,
) -> ModelOracle:
    picked = [x for x in (model, endpoint) if x is not None]
    if len(picked) > 1:
        raise InvalidParameterError("give either --model or --endpoint, not both")
    if endpoint is not None:
        oracle = ExternalModel(endpoint)
    elif model is not None:
        oracle = build_model(model, n=n)
    elif dataset_oracle is not None:
        oracle = dataset_oracle
    else:
        raise InvalidParameterError("no model: give --model, --endpoint, or a csv dist")
    if oracle.n != n:
        raise InvalidParameterError(
            f"model dimension {oracle.n} != distribution dimension {n}"
        )
    return oracle


_shared_options = [
    click.option("--model", default=None, help="builtin spec or file:<path.json>"),
    click.option("--endpoint", default=None, help="tcp:host:port or stdio:<command>"),
    click.option("--n", type=int, default=None, help="dimension for builtin models"),
    click.option(
        "--dist", default="uniform", show_default=True,
        help="uniform | product:b1,b2,... | csv:<path>",
    ),
    click.option("--schema", default=None, help="JSON coding rules for csv dists"),
    click.option("--label-col", default=None, help="label column for csv dists"),
    click.option("--sensitive-col", default=None, help="sensitive column for csv dists"),
    click.option("--seed", type=int, default=None, help="rng seed (env AUDIT_SEED, then 0)"),
]


def _with_shared(fn):
    for option in reversed(_shared_options):
        fn = option(fn)
    return fn


@click.group()
def main():
    """Black-box classifier audits via spectral sampling."""


@main.command()
@_with_shared
@click.option(
    "--property", "property_name", required=True,
    type=click.Choice(["rob", "if", "sp", "mc"]),
)
@click.option("--rho", type=float, default=None, help="noise correlation for rob/if")
@click.option("--l", "l_coords", type=int, default=None, help="perturbed coordinates for if")
@click.option("--sensitive", type=int, default=None, help="sensitive coordinate for sp/mc")
@click.option("--tau", type=float, default=0.2, show_default=True)
@click.option("--delta", type=float, default=0.05, show_default=True)
@click.option("--budget", type=int, default=None, help="max oracle queries")
@click.option(
    "--method", type=click.Choice(["afa", "uniform", "exact"]),
    default="afa", show_default=True,
)
def audit(
    model, endpoint, n, dist, schema, label_col, sensitive_col, seed,
    property_name, rho, l_coords, sensitive, tau, delta, budget, method,
):
    """Estimate one property of one model and print the report."""

    def body():
        resolved_seed = _resolve_seed(seed)
        start = time.perf_counter()
        the_dist, dataset_oracle, sensitive_default = _parse_dist(
            dist, n, schema, label_col, sensitive_col
        )
        oracle = _build_oracle(model, endpoint, dataset_oracle, the_dist.n)
        prop = parse_property(
            property_name, rho=rho, l=l_coords,
            sensitive=sensitive if sensitive is not None else sensitive_default,
        )
        click.echo(f"seed: {resolved_seed}")
        rng = RandomSource(resolved_seed)
        if method == "exact":
            result = exact_property(oracle, the_dist, prop)
            click.echo(f"property: {prop.name}")
            click.echo("method: Exact")
            click.echo(f"estimate: {result.value:.9f}")
            if result.correlation is not None:
                click.echo(f"companion.correlation: {result.correlation:.9f}")
            click.echo(f"enumeration: {result.enumeration_size}")
        elif method == "uniform":
            if budget is None:
                raise InvalidParameterError("--method uniform needs --budget")
            if isinstance(prop, (Robustness, IndividualFairness)):
                spec = BaselineSpec(property=prop, m=max(1, budget // 2))
            else:
                spec = BaselineSpec(property=prop, m=max(2, budget))
            report = uniform_estimate(oracle, the_dist, spec, rng=rng)
            click.echo(format_report(report))
        else:
            audit_budget = AuditBudget(budget) if budget is not None else None
            if isinstance(prop, (Robustness, IndividualFairness)):
                spectrum = goldreich_levin(
                    oracle, the_dist, tau, delta, budget=audit_budget, rng=rng
                )
                report = estimate_spectral_property(prop, spectrum, the_dist.n)
            elif isinstance(prop, StatisticalParity):
                report = estimate_statistical_parity(
                    oracle, the_dist, prop.sensitive, tau, delta,
                    budget=audit_budget, rng=rng,
                )
            else:
                report = estimate_multiclass_sp(
                    oracle, the_dist, prop.sensitive, tau, delta,
                    budget=audit_budget, rng=rng,
                )
            click.echo(format_report(report))
        click.echo(f"# wall_ms={1000.0 * (time.perf_counter() - start):.3f}")

    _guarded(body)


@main.command()
@_with_shared
@click.option("--tau", type=float, default=0.2, show_default=True)
@click.option("--delta", type=float, default=0.05, show_default=True)
@click.option("--budget", type=int, default=None, help="max oracle queries")
@click.option("--restrict", type=int, default=None, help="search only subsets with this coordinate")
@click.option("--early-stop", is_flag=True, default=False, help="truncate once weight 1-tau^2 is reached")
def spectrum(
    model, endpoint, n, dist, schema, label_col, sensitive_col, seed,
    tau, delta, budget, restrict, early_stop,
):
    """Recover the significant coefficients and print them."""

    def body():
        resolved_seed = _resolve_seed(seed)
        start = time.perf_counter()
        the_dist, dataset_oracle, _ = _parse_dist(
            dist, n, schema, label_col, sensitive_col
        )
        oracle = _build_oracle(model, endpoint, dataset_oracle, the_dist.n)
        click.echo(f"seed: {resolved_seed}")
        audit_budget = AuditBudget(budget) if budget is not None else None
        result = goldreich_levin(
            oracle, the_dist, tau, delta, budget=audit_budget,
            rng=RandomSource(resolved_seed), restrict_to=restrict,
            early_stop=early_stop,
        )
        click.echo(f"tau: {result.tau}")
        click.echo(f"delta: {result.delta}")
        click.echo(f"queries: {result.queries_used}")
        click.echo(f"incomplete: {str(result.incomplete).lower()}")
        click.echo(f"entries: {len(result)}")
        for entry in result:
            click.echo(
                f"subset {format_subset(entry.subset)} "
                f"card {subset_cardinality(entry.subset)} "
                f"square {entry.square:.9f} samples {entry.samples}"
            )
        click.echo(f"# wall_ms={1000.0 * (time.perf_counter() - start):.3f}")

    _guarded(body)


@main.command()
@_with_shared
@click.option(
    "--property", "property_name", required=True,
    type=click.Choice(["rob", "if", "sp", "mc"]),
)
@click.option("--rho", type=float, default=None)
@click.option("--l", "l_coords", type=int, default=None)
@click.option("--sensitive", type=int, default=None)
def exact(
    model, endpoint, n, dist, schema, label_col, sensitive_col, seed,
    property_name, rho, l_coords, sensitive,
):
    """Print the exact property value by enumeration (small n only)."""

    def body():
        resolved_seed = _resolve_seed(seed)
        start = time.perf_counter()
        the_dist, dataset_oracle, sensitive_default = _parse_dist(
            dist, n, schema, label_col, sensitive_col
        )
        oracle = _build_oracle(model, endpoint, dataset_oracle, the_dist.n)
        prop = parse_property(
            property_name, rho=rho, l=l_coords,
            sensitive=sensitive if sensitive is not None else sensitive_default,
        )
        click.echo(f"seed: {resolved_seed}")
        result = exact_property(oracle, the_dist, prop)
        click.echo(f"property: {prop.name}")
        click.echo(f"value: {result.value:.9f}")
        if result.correlation is not None:
            click.echo(f"correlation: {result.correlation:.9f}")
        click.echo(f"enumeration: {result.enumeration_size}")
        click.echo(f"# wall_ms={1000.0 * (time.perf_counter() - start):.3f}")

    _guarded(body)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", default=None, help="override the config's output path")
@click.option("--seed", type=int, default=None, help="unused; sweeps seed per row")
def sweep(config_path, out, seed):
    """Run the (method, budget, seed) grid from a config file."""

    def body():
        resolved_seed = _resolve_seed(seed)
        click.echo(f"seed: {resolved_seed}")
        cfg = load_config(config_path)
        if out is not None:
            cfg.out = out
        start = time.perf_counter()
        result = run_sweep(cfg)
        ok = sum(1 for r in result.rows if r.error is None)
        click.echo(f"reference: {result.reference_kind}")
        click.echo(f"rows: {len(result.rows)} ok: {ok}")
        if cfg.out:
            click.echo(f"wrote: {cfg.out}")
        else:
            click.echo(result.render(), nl=False)
        click.echo(f"# wall_ms={1000.0 * (time.perf_counter() - start):.3f}")

    _guarded(body)


@main.command(name="protocol-check")
@click.option("--endpoint", required=True, help="tcp:host:port or stdio:<command>")
@click.option("--seed", type=int, default=None)
def protocol_check(endpoint, seed):
    """Handshake with a served model and round-trip 16 probe points."""

    def body():
        resolved_seed = _resolve_seed(seed)
        click.echo(f"seed: {resolved_seed}")
        start = time.perf_counter()
        oracle = ExternalModel(endpoint)
        try:
            gen = RandomSource(resolved_seed).generator()
            probes = (gen.integers(0, 2, size=(16, oracle.n)) * 2 - 1).astype(np.int8)
            ys = oracle.query_batch(probes)
            click.echo(f"n: {oracle.n}")
            click.echo(f"labels: {oracle.arity}")
            click.echo(f"probes: {probes.shape[0]}")
            click.echo(f"distinct_labels_seen: {len(set(int(y) for y in ys))}")
            click.echo("protocol: ok")
        finally:
            oracle.close()
        click.echo(f"# wall_ms={1000.0 * (time.perf_counter() - start):.3f}")

    _guarded(body)


if __name__ == "__main__":
    main()
