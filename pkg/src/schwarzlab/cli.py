"""Thin command line client for the solver service.

Without --server the commands run against the FastAPI app in-process; with
--server they talk to a remote `schwarzlab serve` instance. Exit codes:
0 success, 1 validation error, 2 numerical failure.
"""

import json
import sys
from pathlib import Path

import click
import httpx

from .experiments import ResultRow, emit_report, emit_spectrum

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


def _client(server):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    # in-process: drive the FastAPI app directly through its test transport
    from fastapi.testclient import TestClient
    from .service import app
    return TestClient(app, raise_server_exceptions=False)


def _load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        click.echo(f"error: cannot read config: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        click.echo(f"error: invalid JSON config: {exc}", err=True)
        sys.exit(EXIT_USAGE)


def _post(client, path, payload):
    resp = client.post(path, json=payload)
    if resp.status_code in (400, 422):
        detail = resp.json().get("detail", resp.text)
        click.echo(f"validation error: {detail}", err=True)
        sys.exit(EXIT_USAGE)
    if resp.status_code >= 500:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        click.echo(f"numerical failure: {detail}", err=True)
        sys.exit(EXIT_NUMERICAL)
    resp.raise_for_status()
    return resp.json()


def _write(text, out):
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


config_option = click.option("--config", "config_path", required=True,
                             type=click.Path(), help="JSON experiment config.")
out_option = click.option("--out", "out_path", default=None,
                          type=click.Path(), help="Output file (default stdout).")
format_option = click.option("--format", "fmt", default="csv",
                             type=click.Choice(["csv", "markdown"]))
server_option = click.option("--server", default=None,
                             help="Base URL of a running service; default in-process.")


@click.group()
def main():
    """Two-level Schwarz solver laboratory."""


@main.command()
@config_option
@out_option
@format_option
@server_option
def solve(config_path, out_path, fmt, server):
    """Run a single experiment point."""
    config = _load_config(config_path)
    with _client(server) as client:
        data = _post(client, "/solve", {"config": config})
    _write(emit_report([ResultRow.model_validate(data)], fmt), out_path)


@main.command()
@config_option
@out_option
@format_option
@server_option
@click.option("--threads", default=1, type=int, help="Parallel sweep points.")
def sweep(config_path, out_path, fmt, server, threads):
    """Run the Cartesian product of the config's sweep lists."""
    config = _load_config(config_path)
    with _client(server) as client:
        data = _post(client, "/sweep", {"config": config, "threads": threads})
    rows = [ResultRow.model_validate(r) for r in data["rows"]]
    _write(emit_report(rows, fmt), out_path)
    if any(r.error for r in rows):
        sys.exit(EXIT_NUMERICAL)


@main.command()
@config_option
@out_option
@server_option
def spectrum(config_path, out_path, server):
    """Dump interface eigenvalues as CSV."""
    config = _load_config(config_path)
    with _client(server) as client:
        data = _post(client, "/spectrum", {"config": config})
    rows = [(r["interface_id"], r["k"], r["eigenvalue"]) for r in data["rows"]]
    _write(emit_spectrum(rows), out_path)


@main.command()
@server_option
@click.option("--seed", default=0, type=int, help="Seed for randomized checks.")
def check(server, seed):
    """Run the randomized invariant suite."""
    with _client(server) as client:
        data = _post(client, "/check", {"seed": seed})
    for r in data["results"]:
        status = "PASS" if r["passed"] else "FAIL"
        detail = f"  ({r['detail']})" if r.get("detail") else ""
        click.echo(f"{status}  {r['name']}{detail}")
    if not data["passed"]:
        sys.exit(EXIT_NUMERICAL)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the solver service."""
    import uvicorn
    from .service import app
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
