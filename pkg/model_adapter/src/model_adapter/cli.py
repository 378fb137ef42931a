"""Command line entry point: ``model-adapter serve``."""

from __future__ import annotations

import click

from .schema import SchemaError
from .served import AdapterError, load_served
from .server import serve_stdio, serve_tcp


@click.group()
def main():
    """Serve classifiers over the audit wire protocol."""


@main.command()
@click.option("--model", required=True,
              help="builtin spec, truth-table .json, or estimator .joblib/.pkl")
@click.option("--schema", default=None, help="JSON column-coding rules")
@click.option("--n", type=int, default=None, help="dimension for builtin models")
@click.option("--transport", default="stdio", show_default=True,
              help="stdio | tcp:<port> (port 0 picks a free one)")
def serve(model: str, schema: str | None, n: int | None, transport: str):
    """Serve one model until the peer closes the connection."""
    try:
        served = load_served(model, schema=schema, n=n)
    except (AdapterError, SchemaError, OSError, ValueError) as exc:
        raise click.UsageError(str(exc)) from exc
    if transport == "stdio":
        serve_stdio(served)
        return
    if transport.startswith("tcp:"):
        try:
            port = int(transport.split(":", 1)[1])
        except ValueError as exc:
            raise click.UsageError(f"bad tcp port in {transport!r}") from exc
        serve_tcp(served, port)
        return
    raise click.UsageError(f"transport must be stdio or tcp:<port>, got {transport!r}")


if __name__ == "__main__":
    main()
