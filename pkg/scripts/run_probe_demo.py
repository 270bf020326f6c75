#!/usr/bin/env python3
"""Red-team the demo gateway with the shipped probe corpus, in process.

The demo gateway blocks prompt-injection shapes via its input blocklist
and holds everything else for review, so no probe payload is delivered.

Usage: python3 scripts/run_probe_demo.py
"""

from importlib import resources
from pathlib import Path

from mrm.gateway import Gateway, GenerateRequest, load_gateway_config
from mrm.probes import TargetResponse, load_probes, run_probes

ROOT = Path(__file__).resolve().parent.parent


def main():
    config = load_gateway_config(ROOT / "scripts/demo/gateway_config.yaml")
    gateway = Gateway(config, state_dir=str(ROOT / "out/probe_state"))

    def target(prompt: str, seed: int) -> TargetResponse:
        result = gateway.handle_generate(
            GenerateRequest(
                user_id="alice", usage_id="policy_lookup", prompt=prompt, seed=seed
            )
        )
        if result.outcome != "allowed":
            return TargetResponse(delivered=False)
        return TargetResponse(delivered=True, text=result.text)

    with resources.as_file(resources.files("mrm").joinpath("data/probes.jsonl")) as path:
        probes = load_probes(path)
    report = run_probes(target, probes, seed=42)
    print(f"probes: {report.total}")
    print(f"blocked: {report.blocked}  refused: {report.refused}  leaked: {report.leaked}")
    print(f"block rate: {report.block_rate:.2f}")
    for probe_id, outcome in report.per_probe:
        print(f"  {probe_id}: {outcome.value}")


if __name__ == "__main__":
    main()
