"""Scorecards: per-sample rows plus corpus aggregates, with rendering to
canonical JSON, markdown, and HTML, and paired benchmark comparison.

The JSON rendering is the machine format: stable key order, so identical
runs produce byte-identical documents. Aggregates are always recomputable
from the per-sample rows; self_audit() checks that equality.
"""

from __future__ import annotations

import html as html_mod
import json
from dataclasses import dataclass, field

from .errors import MrmError
from .stats import wilson_interval

# Default per-metric pass bars (pass_rate = fraction of samples at or past
# the bar). semantic_entropy is lower-is-better.
DEFAULT_PASS_BARS: dict[str, tuple[float, str]] = {
    "faithfulness": (0.7, "min"),
    "answer_relevance": (0.6, "min"),
    "context_relevance": (0.5, "min"),
    "completeness": (0.7, "min"),
    "semantic_entropy": (0.5, "max"),
}

SECTION_NAMES = (
    "pii_summary",
    "sampling",
    "robustness",
    "fairness",
    "weak_regions",
    "hallucination_summary",
    "toxicity_summary",
    "consistency",
)


class CorpusMismatch(MrmError):
    pass


@dataclass
class Scorecard:
    provenance: dict
    samples: dict[str, dict]
    aggregates: dict[str, dict] = field(default_factory=dict)
    sections: dict[str, object] = field(default_factory=dict)
    suite_errors: dict[str, str] = field(default_factory=dict)
    gates: dict | None = None

    def to_dict(self) -> dict:
        d = {
            "provenance": self.provenance,
            "samples": self.samples,
            "aggregates": self.aggregates,
            "suite_errors": self.suite_errors,
        }
        for name in SECTION_NAMES:
            if name in self.sections:
                d[name] = self.sections[name]
        if self.gates is not None:
            d["gates"] = self.gates
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scorecard":
        sections = {name: d[name] for name in SECTION_NAMES if name in d}
        return cls(
            provenance=d["provenance"],
            samples=d["samples"],
            aggregates=d.get("aggregates", {}),
            sections=sections,
            suite_errors=d.get("suite_errors", {}),
            gates=d.get("gates"),
        )


def compute_aggregates(
    samples: dict[str, dict],
    pass_bars: dict[str, tuple[float, str]] | None = None,
) -> dict[str, dict]:
    """Corpus aggregates from per-sample rows: mean, pass rate at the
    metric's bar, and the Wilson 95% interval on the pass rate."""
    pass_bars = pass_bars or DEFAULT_PASS_BARS
    values: dict[str, list[float]] = {}
    for row in samples.values():
        for name, v in (row.get("metrics") or {}).items():
            if v is not None:
                values.setdefault(name, []).append(v)
        halluc = row.get("hallucination") or {}
        for method, h in halluc.items():
            if h and h.get("max") is not None:
                values.setdefault(f"hallucination_{method}_max", []).append(h["max"])
        tox = row.get("toxicity")
        if tox is not None:
            values.setdefault("toxicity", []).append(tox["score"])
    aggregates: dict[str, dict] = {}
    for name in sorted(values):
        vals = values[name]
        agg = {"n": len(vals), "mean": sum(vals) / len(vals)}
        if name in pass_bars:
            bar, direction = pass_bars[name]
            passes = sum(
                (v >= bar) if direction == "min" else (v <= bar) for v in vals
            )
            low, high = wilson_interval(passes, len(vals))
            agg.update(
                {
                    "pass_bar": bar,
                    "pass_direction": direction,
                    "pass_rate": passes / len(vals),
                    "pass_rate_wilson_low": low,
                    "pass_rate_wilson_high": high,
                }
            )
        aggregates[name] = agg
    return aggregates


def self_audit(card: Scorecard) -> list[str]:
    """Recompute every aggregate from the rows; report any mismatch."""
    bars = {
        name: (agg["pass_bar"], agg["pass_direction"])
        for name, agg in card.aggregates.items()
        if "pass_bar" in agg
    }
    recomputed = compute_aggregates(card.samples, pass_bars={**DEFAULT_PASS_BARS, **bars})
    problems = []
    if set(recomputed) != set(card.aggregates):
        problems.append(
            f"aggregate keys differ: {sorted(set(recomputed) ^ set(card.aggregates))}"
        )
        return problems
    for name, agg in card.aggregates.items():
        for key, value in agg.items():
            if key in ("pass_bar", "pass_direction"):
                continue
            got = recomputed[name].get(key)
            if got != value:
                problems.append(f"{name}.{key}: card has {value}, recomputed {got}")
    return problems


def canonical_json(card: Scorecard) -> str:
    return json.dumps(card.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def benchmark_compare(card_a: Scorecard, card_b: Scorecard) -> dict:
    """Paired per-metric deltas (b - a) with win/loss counts per sample."""
    ids_a, ids_b = set(card_a.samples), set(card_b.samples)
    if ids_a != ids_b:
        raise CorpusMismatch(f"sample id sets differ: {sorted(ids_a ^ ids_b)[:5]}")

    def metric_names(card: Scorecard) -> set[str]:
        names: set[str] = set()
        for row in card.samples.values():
            names |= {k for k, v in (row.get("metrics") or {}).items() if v is not None}
        return names

    names_a, names_b = metric_names(card_a), metric_names(card_b)
    if names_a != names_b:
        raise CorpusMismatch(f"metric sets differ: {sorted(names_a ^ names_b)}")
    comparison: dict[str, dict] = {}
    for name in sorted(names_a):
        deltas = []
        wins = losses = ties = 0
        for sid in sorted(ids_a):
            va = (card_a.samples[sid].get("metrics") or {}).get(name)
            vb = (card_b.samples[sid].get("metrics") or {}).get(name)
            if va is None or vb is None:
                continue
            delta = vb - va
            deltas.append(delta)
            if delta > 0:
                wins += 1
            elif delta < 0:
                losses += 1
            else:
                ties += 1
        if deltas:
            comparison[name] = {
                "n": len(deltas),
                "mean_delta": sum(deltas) / len(deltas),
                "b_wins": wins,
                "b_losses": losses,
                "ties": ties,
            }
    return comparison


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _md_table(headers: list[str], rows: list[list]) -> str:
    out = ["| " + " | ".join(headers) + " |", "|" + "---|" * len(headers)]
    for row in rows:
        out.append("| " + " | ".join(str(c) for c in row) + " |")
    return "\n".join(out)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def render_markdown(card: Scorecard) -> str:
    parts = ["# Validation Scorecard", ""]
    parts.append("## Provenance")
    for key in sorted(card.provenance):
        parts.append(f"- **{key}**: {card.provenance[key]}")
    parts.append("")
    if card.aggregates:
        parts.append("## Aggregates")
        rows = []
        for name, agg in card.aggregates.items():
            rows.append(
                [
                    name,
                    agg["n"],
                    _fmt(agg["mean"]),
                    _fmt(agg.get("pass_rate", "")),
                    _fmt(agg.get("pass_rate_wilson_low", "")),
                    _fmt(agg.get("pass_rate_wilson_high", "")),
                ]
            )
        parts.append(
            _md_table(["metric", "n", "mean", "pass rate", "wilson low", "wilson high"], rows)
        )
        parts.append("")
    for name in SECTION_NAMES:
        if name in card.sections:
            parts.append(f"## {name.replace('_', ' ').title()}")
            parts.append("```json")
            parts.append(json.dumps(card.sections[name], sort_keys=True, indent=2))
            parts.append("```")
            parts.append("")
    if card.gates is not None:
        parts.append("## Gates")
        parts.append("```json")
        parts.append(json.dumps(card.gates, sort_keys=True, indent=2))
        parts.append("```")
        parts.append("")
    if card.suite_errors:
        parts.append("## Suite Errors")
        for suite, err in sorted(card.suite_errors.items()):
            parts.append(f"- **{suite}**: {err}")
        parts.append("")
    parts.append(f"Samples: {len(card.samples)}")
    return "\n".join(parts) + "\n"


def render_html(card: Scorecard) -> str:
    """Self-contained HTML: rendered sections plus the canonical JSON
    embedded verbatim, so the document is lossless."""
    md = render_markdown(card)
    body = html_mod.escape(md)
    payload = canonical_json(card).replace("</", "<\\/")
    return (
        "<!DOCTYPE html>\n<html><head><meta charset='utf-8'>"
        "<title>Validation Scorecard</title></head>\n<body>\n"
        "<section id='provenance'><h2>Run Provenance</h2><ul>"
        + "".join(
            f"<li><b>{html_mod.escape(str(k))}</b>: {html_mod.escape(str(v))}</li>"
            for k, v in sorted(card.provenance.items())
        )
        + "</ul></section>\n"
        f"<pre>{body}</pre>\n"
        f"<script type='application/json' id='scorecard-json'>{payload}</script>\n"
        "</body></html>\n"
    )


def render_report(card: Scorecard, format: str = "json") -> str:
    if format == "json":
        return canonical_json(card)
    if format == "markdown":
        return render_markdown(card)
    if format == "html":
        return render_html(card)
    raise ValueError(f"unknown report format {format!r}")
