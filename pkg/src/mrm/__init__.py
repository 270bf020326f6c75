"""Validation harness and guardrails gateway for generative LLM applications.

Offline: a battery of conceptual-soundness and outcome-analysis suites
(PII scanning, stratified sampling, RAG/summarization metrics, robustness
and fairness probes, hallucination detectors, toxicity gating) producing a
reproducible scorecard. Online: a control-pipeline proxy around any chat
endpoint with risk-tier enforcement, human-in-the-loop holds, append-only
audit, and KPI monitoring.
"""

__version__ = "0.1.0"
