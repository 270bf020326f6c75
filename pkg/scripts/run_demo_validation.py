#!/usr/bin/env python3
"""Run the full offline validation battery on the demo corpus.

Everything is mocked and seeded, so the scorecard bytes are identical on
every run. Writes out/scorecard.json and out/scorecard.md.

Usage: python3 scripts/run_demo_validation.py
"""

from pathlib import Path

from mrm.config import load_run_config
from mrm.report import render_report
from mrm.runner import run_validation

ROOT = Path(__file__).resolve().parent.parent


def main():
    cfg = load_run_config(ROOT / "scripts/demo/run_config.yaml")
    card = run_validation(cfg)
    out = ROOT / cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "scorecard.json").write_text(render_report(card, "json"), encoding="utf-8")
    (out / "scorecard.md").write_text(render_report(card, "markdown"), encoding="utf-8")

    print(f"samples scored: {len(card.samples)}")
    for name, agg in card.aggregates.items():
        print(f"  {name}: mean={agg['mean']:.4f} over n={agg['n']}")
    gates = card.gates or {}
    for check in gates.get("checks", []):
        print(f"gate {check['indicator']}: {'PASS' if check['passed'] else 'FAIL'}")
    print(f"scorecard -> {out / 'scorecard.json'}")


if __name__ == "__main__":
    main()
