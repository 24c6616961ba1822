"""Command line entry points: serve, run, trace, report."""

from __future__ import annotations

import json
import sys

import click

from .chronicle import load_pool
from .errors import PairError
from .report import render_report
from .service import ServiceConfig, run_scenario, serve


def _config_from(path: str | None) -> ServiceConfig:
    if path is None:
        return ServiceConfig()
    with open(path, "r", encoding="utf-8") as handle:
        return ServiceConfig.from_document(json.load(handle))


@click.group()
def main() -> None:
    """Perspective-aware reasoning service for simulated XR sessions."""


@main.command("serve")
@click.option("--addr", default="127.0.0.1:7464", show_default=True,
              help="host:port to listen on.")
@click.option("--pool", "pool_dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="Directory of chronicle JSON files (plus optional consent.json).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Service configuration JSON.")
def serve_cmd(addr: str, pool_dir: str, config_path: str | None) -> None:
    """Serve newline-delimited JSON envelopes over TCP."""
    try:
        pool = load_pool(pool_dir)
        click.echo(f"listening on {addr} with {len(pool.entries)} chronicle(s)", err=True)
        serve(addr, pool, _config_from(config_path))
    except PairError as exc:
        raise click.ClickException(str(exc)) from exc


@main.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--expect", "expect_path", type=click.Path(exists=True, dir_okay=False),
              help="Golden trace to compare against (overrides the scenario's).")
@click.option("--emit", "emit_path", type=click.Path(dir_okay=False),
              help="Write the actual trace to this file.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def run(scenario: str, expect_path: str | None, emit_path: str | None,
        config_path: str | None) -> None:
    """Replay a scenario; exit 0 iff its trace matches the expectation."""
    try:
        result = run_scenario(scenario, expect_path, emit_path, _config_from(config_path))
    except PairError as exc:
        raise click.ClickException(str(exc)) from exc
    if result.divergence:
        click.echo(f"trace divergence: {result.divergence}", err=True)
    else:
        counts: dict[str, int] = {}
        for envelope in result.trace:
            counts[envelope["type"]] = counts.get(envelope["type"], 0) + 1
        summary = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
        click.echo(f"ok: {len(result.trace)} envelopes ({summary})")
    sys.exit(result.exit_code)


@main.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def trace(scenario: str, config_path: str | None) -> None:
    """Replay a scenario and print its reasoning trace as JSON lines."""
    try:
        result = run_scenario(scenario, config=_config_from(config_path))
    except PairError as exc:
        raise click.ClickException(str(exc)) from exc
    for envelope in result.trace:
        if envelope["type"] != "reasoning_trace":
            continue
        for line in envelope["payload"]["lines"]:
            click.echo(json.dumps(line, sort_keys=True))
    sys.exit(result.exit_code)


@main.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory for trace.jsonl and the rendered figures.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def report(scenario: str, out_dir: str, config_path: str | None) -> None:
    """Replay a scenario and render its trace to figures plus JSONL."""
    try:
        result = run_scenario(scenario, config=_config_from(config_path))
        written = render_report(result.trace, out_dir)
    except PairError as exc:
        raise click.ClickException(str(exc)) from exc
    for path in written:
        click.echo(path)
    sys.exit(result.exit_code)


if __name__ == "__main__":
    main()
