"""Command-line interface.

Exit codes: 0 = all gates pass, 1 = a gate failed, 2 = execution error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import endpoints as ep_mod
from . import probes as probes_mod
from . import segmentation
from .config import load_run_config
from .corpus import load_corpus
from .errors import MrmError
from .report import Scorecard, benchmark_compare, render_report
from .runner import run_validation
from .types import EndpointKind, EndpointSpec


@click.group()
def main():
    """Model-risk validation harness and guardrails gateway."""


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(2)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", default=None, type=click.Path())
def validate(config_path: str, output_path: str | None):
    """Run the enabled validation suites and write the scorecard JSON."""
    try:
        cfg = load_run_config(config_path)
        card = run_validation(cfg)
        doc = render_report(card, "json")
        out = Path(output_path) if output_path else Path(cfg.output_dir) / "scorecard.json"
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(doc, encoding="utf-8")
        click.echo(f"scorecard written to {out}")
    except MrmError as exc:
        _fail(exc)
        return
    gates = card.gates or {"passed": True}
    for check in gates.get("checks", []):
        status = "PASS" if check["passed"] else "FAIL"
        click.echo(f"gate {check['indicator']}: {status} (value={check['value']})")
    for suite, err in card.suite_errors.items():
        click.echo(f"suite {suite} failed: {err}", err=True)
    if not gates["passed"]:
        sys.exit(1)


@main.command()
@click.option("--card", "card_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="markdown",
              type=click.Choice(["json", "markdown", "html"]))
@click.option("--output", "output_path", default=None, type=click.Path())
def report(card_path: str, fmt: str, output_path: str | None):
    """Render a stored scorecard."""
    try:
        card = Scorecard.from_dict(json.loads(Path(card_path).read_text(encoding="utf-8")))
        doc = render_report(card, fmt)
    except (MrmError, json.JSONDecodeError, KeyError) as exc:
        _fail(exc)
        return
    if output_path:
        Path(output_path).write_text(doc, encoding="utf-8")
        click.echo(f"report written to {output_path}")
    else:
        click.echo(doc)


@main.command()
@click.option("--a", "path_a", required=True, type=click.Path(exists=True))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True))
def benchmark(path_a: str, path_b: str):
    """Paired metric comparison of two scorecards (b minus a)."""
    try:
        card_a = Scorecard.from_dict(json.loads(Path(path_a).read_text(encoding="utf-8")))
        card_b = Scorecard.from_dict(json.loads(Path(path_b).read_text(encoding="utf-8")))
        comparison = benchmark_compare(card_a, card_b)
    except (MrmError, json.JSONDecodeError, KeyError) as exc:
        _fail(exc)
        return
    click.echo(json.dumps(comparison, sort_keys=True, indent=2))


@main.command()
@click.option("--target", required=True,
              help="Gateway base URL (http...) or an endpoint id from --config.")
@click.option("--probes", "probes_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, type=int)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              help="Run config supplying endpoint definitions for endpoint-id targets.")
@click.option("--user", "user_id", default="probe-runner")
@click.option("--usage", "usage_id", default="red-team")
def probe(target: str, probes_path: str, seed: int, config_path: str | None,
          user_id: str, usage_id: str):
    """Run the jailbreak probe suite against a gateway or raw endpoint."""
    try:
        probe_list = probes_mod.load_probes(probes_path)
        if target.startswith("http://") or target.startswith("https://"):
            target_fn = probes_mod.http_gateway_target(target, user_id, usage_id)
        else:
            if not config_path:
                raise MrmError("endpoint-id targets need --config for endpoint definitions")
            cfg = load_run_config(config_path)
            if target not in cfg.endpoints:
                raise MrmError(f"endpoint {target!r} not in config")
            target_fn = probes_mod.endpoint_target(cfg.endpoints[target])
        result = probes_mod.run_probes(target_fn, probe_list, seed)
    except MrmError as exc:
        _fail(exc)
        return
    click.echo(
        json.dumps(
            {
                "total": result.total,
                "blocked": result.blocked,
                "refused": result.refused,
                "leaked": result.leaked,
                "block_rate": result.block_rate,
                "per_probe": [[pid, outcome.value] for pid, outcome in result.per_probe],
            },
            indent=2,
        )
    )
    if result.leaked:
        sys.exit(1)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--n", "n", required=True, type=int)
@click.option("--k", "k", default="auto")
@click.option("--seed", default=0, type=int)
def sample(corpus_path: str, n: int, k: str, seed: int):
    """Embedding-stratified sample of corpus ids (deterministic mock embedder)."""
    try:
        samples = load_corpus(corpus_path)
        embedder = EndpointSpec(
            id="builtin-embedder",
            kind=EndpointKind.EMBEDDING,
            mock_script={"behavior": "hash_bow"},
        )
        vecs = ep_mod.embed(embedder, [s.query for s in samples])
        embeddings = {s.id: v for s, v in zip(samples, vecs)}
        k_val = segmentation.choose_k(embeddings, seed) if k == "auto" else int(k)
        clustering = segmentation.cluster(embeddings, k_val, seed)
        ids = segmentation.stratified_sample(clustering, n, seed)
    except MrmError as exc:
        _fail(exc)
        return
    click.echo(json.dumps({"k": k_val, "sampled_ids": ids}, indent=2))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--port", default=8080, type=int)
@click.option("--host", default="127.0.0.1")
def serve(config_path: str, port: int, host: str):
    """Start the guardrails gateway (refuses to serve on missing controls)."""
    import uvicorn

    from .gateway import Gateway, create_app, load_gateway_config

    try:
        gw_config = load_gateway_config(config_path)
        gateway = Gateway(gw_config)
    except MrmError as exc:
        _fail(exc)
        return
    uvicorn.run(create_app(gateway), host=host, port=port)


if __name__ == "__main__":
    main()
