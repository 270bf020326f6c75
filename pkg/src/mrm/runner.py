"""Batch validation runs: executes the enabled test suites in a fixed
order over a corpus and assembles the scorecard.

Cheap static checks run before anything that calls a model. A suite
failure is recorded on the card and never silently dropped; the remaining
suites still run. Under mock endpoints the whole run is deterministic.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import re
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, endpoints, hallucination, metrics, robustness, segmentation
from .config import SUITE_ORDER, RunConfig
from .corpus import load_corpus
from .errors import MrmError
from .pii import scan_pii
from .report import DEFAULT_PASS_BARS, Scorecard, compute_aggregates, self_audit
from .robustness import PerturbationSpec, assemble_prompt
from .toxicity import load_lexicon, toxicity_gate
from .types import DecodingParams, ValidationSample

log = logging.getLogger(__name__)


def _sample_seed(base: int, sample_id: str) -> int:
    return (base + endpoints._stable_hash(sample_id)) % 2**63


def _key_points(sample: ValidationSample) -> list[str]:
    raw = (sample.annotations or {}).get("key_points", "")
    return [p.strip() for p in re.split(r"[|\n]", raw) if p.strip()]


def _ensure_output(sample: ValidationSample, cfg: RunConfig, params: dict, row: dict) -> str | None:
    if sample.output is not None:
        return sample.output
    if not params.get("generate_missing_outputs", True) or not cfg.has_role("chat"):
        return None
    gen = endpoints.generate(
        cfg.endpoint_for("chat"),
        assemble_prompt(sample.query, list(sample.contexts)),
        DecodingParams(),
        _sample_seed(cfg.seed, sample.id),
    )
    row["generated_output"] = gen.text
    return gen.text


class ValidationRun:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.samples = load_corpus(cfg.corpus_path)
        self.rows: dict[str, dict] = {
            s.id: {"task": s.task.value, "metrics": {}} for s in self.samples
        }
        self.sections: dict[str, object] = {}
        self.suite_errors: dict[str, str] = {}
        self._outputs: dict[str, str] = {}

    # -- suites -------------------------------------------------------------

    def suite_pii(self, params: dict) -> None:
        per_kind: dict[str, int] = {}
        affected = 0
        for s in self.samples:
            findings = []
            for field_name, text in (
                ("query", s.query),
                *((f"context_{i}", c) for i, c in enumerate(s.contexts)),
                ("output", s.output or ""),
            ):
                for f in scan_pii(text):
                    findings.append(
                        {"field": field_name, "kind": f.kind.value, "start": f.start, "end": f.end}
                    )
                    per_kind[f.kind.value] = per_kind.get(f.kind.value, 0) + 1
            self.rows[s.id]["pii"] = findings
            affected += bool(findings)
        self.sections["pii_summary"] = {
            "findings_by_kind": dict(sorted(per_kind.items())),
            "samples_with_pii": affected,
            "clean_rate": 1.0 - affected / len(self.samples) if self.samples else 1.0,
        }

    def suite_sampling(self, params: dict) -> None:
        embed_ep = self.cfg.endpoint_for("embedding")
        vecs = endpoints.embed(embed_ep, [s.query for s in self.samples])
        embeddings = {s.id: v for s, v in zip(self.samples, vecs)}
        k_param = params.get("k", "auto")
        k = (
            segmentation.choose_k(embeddings, self.cfg.seed)
            if k_param == "auto"
            else int(k_param)
        )
        clustering = segmentation.cluster(embeddings, k, self.cfg.seed)
        n = int(params.get("n", min(10, len(self.samples))))
        sampled = segmentation.stratified_sample(clustering, n, self.cfg.seed)
        self.sections["sampling"] = {
            "k": k,
            "cluster_sizes": clustering.sizes(),
            "inertia": clustering.inertia,
            "sampled_ids": sampled,
        }
        self._clustering = clustering

    def suite_metrics(self, params: dict) -> None:
        nli = self.cfg.endpoint_for("nli")
        embed_ep = self.cfg.endpoint_for("embedding")
        threshold = float(params.get("entail_threshold", metrics.DEFAULT_ENTAIL_THRESHOLD))
        entropy_k = int(params.get("semantic_entropy_k", 0))
        for s in self.samples:
            row = self.rows[s.id]
            output = _ensure_output(s, self.cfg, params, row)
            if output:
                self._outputs[s.id] = output
            m = row["metrics"]
            if output and s.contexts:
                score, supports = metrics.faithfulness(output, list(s.contexts), nli, threshold)
                m["faithfulness"] = score
                row["statement_support"] = [
                    {
                        "statement": sup.statement,
                        "supported": sup.supported,
                        "best_premise_index": sup.best_premise_index,
                    }
                    for sup in supports
                ]
            if output:
                m["answer_relevance"] = metrics.answer_relevance(output, s.query, embed_ep)
                row["fluency_proxy"] = metrics.fluency_proxy(output)
            if s.task.value == "rag":
                m["context_relevance"] = metrics.context_relevance(
                    list(s.contexts), s.query, nli, threshold
                )
            points = _key_points(s)
            if output and s.task.value == "summarization" and points:
                m["completeness"] = metrics.completeness(output, points, nli, threshold)
            if entropy_k >= 2 and self.cfg.has_role("chat"):
                prompt = assemble_prompt(s.query, list(s.contexts))
                gens = [
                    endpoints.generate(
                        self.cfg.endpoint_for("chat"),
                        prompt,
                        DecodingParams(),
                        _sample_seed(self.cfg.seed, s.id) + 1 + i,
                    ).text
                    for i in range(entropy_k)
                ]
                m["semantic_entropy"] = metrics.semantic_entropy(gens, nli, threshold)

    def suite_robustness(self, params: dict) -> None:
        specs = []
        for raw in params.get("perturbations", []):
            lexicon = raw.get("lexicon")
            if isinstance(lexicon, str):
                lexicon = json.loads(Path(lexicon).read_text(encoding="utf-8"))
            specs.append(
                PerturbationSpec(
                    kind=raw["kind"],
                    rate=float(raw.get("rate", 0.3)),
                    seed=int(raw.get("seed", self.cfg.seed)),
                    lexicon=lexicon,
                )
            )
        results = robustness.robustness_run(
            self.samples,
            self.cfg.endpoint_for("chat"),
            specs,
            self.cfg.endpoint_for("embedding"),
            seed=self.cfg.seed,
        )
        self.sections["robustness"] = [
            {
                "kind": r.kind.value,
                "rate": r.rate,
                "n": r.n,
                "mean_output_similarity": r.mean_output_similarity,
                "degradation": r.degradation,
                "worst_ids": list(r.worst_ids),
            }
            for r in results
        ]

    def suite_fairness(self, params: dict) -> None:
        embed_ep = self.cfg.endpoint_for("embedding")
        section: dict = {}
        weat = params.get("weat")
        if weat:
            try:
                section["weat_effect_size"] = robustness.weat_effect_size(
                    weat["X"], weat["Y"], weat["A"], weat["B"], embed_ep
                )
            except robustness.ZeroVariance as exc:
                section["weat_error"] = str(exc)
        cf = params.get("counterfactual")
        if cf and self.cfg.has_role("chat"):
            term_map = cf.get("term_map")
            if isinstance(term_map, str):
                term_map = json.loads(Path(term_map).read_text(encoding="utf-8"))

            def scorer(sample: ValidationSample, output: str) -> float:
                if not output:
                    return 0.0
                return metrics.answer_relevance(output, sample.query, embed_ep)

            per_group, max_gap = robustness.counterfactual_disparity(
                self.samples,
                term_map,
                self.cfg.endpoint_for("chat"),
                scorer,
                seed=self.cfg.seed,
            )
            section["counterfactual"] = {"per_group": per_group, "max_gap": max_gap}
        self.sections["fairness"] = section

    def suite_weakness(self, params: dict) -> None:
        metric = params.get("score_metric", "answer_relevance")
        scores = {
            sid: row["metrics"][metric]
            for sid, row in self.rows.items()
            if row["metrics"].get(metric) is not None
        }
        if not scores:
            raise MrmError(
                f"weakness suite needs per-sample {metric!r} scores; run the metrics suite first"
            )
        clustering = getattr(self, "_clustering", None)
        if clustering is None or set(scores) - set(clustering.assignments):
            embed_ep = self.cfg.endpoint_for("embedding")
            vecs = endpoints.embed(embed_ep, [s.query for s in self.samples])
            embeddings = {s.id: v for s, v in zip(self.samples, vecs)}
            k = int(params.get("k", 3))
            clustering = segmentation.cluster(embeddings, k, self.cfg.seed)
        report = segmentation.detect_weak_clusters(
            scores,
            clustering,
            margin=float(params.get("margin", segmentation.DEFAULT_WEAK_MARGIN)),
            min_support=int(params.get("min_support", segmentation.DEFAULT_MIN_SUPPORT)),
        )
        self.sections["weak_regions"] = {
            "score_metric": metric,
            "global_score": report.global_score,
            "margin": report.margin,
            "min_support": report.min_support,
            "per_cluster": [
                {"cluster": c, "n": n, "mean_score": m, "delta_vs_global": d}
                for c, n, m, d in report.per_cluster
            ],
            "flagged": sorted(report.flagged),
            "exemplar_ids": {str(c): list(ids) for c, ids in report.exemplar_ids.items()},
        }

    def suite_hallucination(self, params: dict) -> None:
        nli = self.cfg.endpoint_for("nli")
        methods = params.get("methods", ["nli"])
        mapping = params.get("nli_mapping", "contradiction_or_unsupported")
        for s in self.samples:
            row = self.rows[s.id]
            output = self._outputs.get(s.id, s.output)
            if not output:
                continue
            halluc = row.setdefault("hallucination", {})
            if "nli" in methods and s.contexts:
                score = hallucination.nli_score(list(s.contexts), output, nli, mapping)
                halluc["nli"] = {
                    "max": score.max_score,
                    "mean": score.mean_score,
                    "n_statements": len(score.per_statement),
                }
            if "selfcheck" in methods and self.cfg.has_role("chat"):
                score = hallucination.selfcheck_score(
                    assemble_prompt(s.query, list(s.contexts)),
                    output,
                    self.cfg.endpoint_for("chat"),
                    int(params.get("selfcheck_k", 4)),
                    nli,
                    _sample_seed(self.cfg.seed, s.id),
                )
                halluc["selfcheck"] = {
                    "max": score.max_score,
                    "mean": score.mean_score,
                    "n_statements": len(score.per_statement),
                }
            if "cove" in methods and self.cfg.has_role("chat"):
                try:
                    score = hallucination.cove_score(
                        output,
                        self.cfg.endpoint_for("chat"),
                        nli,
                        _sample_seed(self.cfg.seed, s.id),
                    )
                    halluc["cove"] = {
                        "max": score.max_score,
                        "mean": score.mean_score,
                        "n_statements": len(score.per_statement),
                    }
                except hallucination.NoFactsExtracted:
                    halluc["cove"] = {"max": None, "mean": None, "n_statements": 0}
        summary: dict = {"methods": list(methods)}
        labels_path = params.get("labels")
        if labels_path:
            scores, labels = [], []
            with open(labels_path, encoding="utf-8") as fh:
                for rec in csv.DictReader(fh):
                    scores.append(float(rec["score"]))
                    labels.append(rec["label"].strip().lower() in ("1", "true", "yes"))
            result = hallucination.calibrate(
                scores, labels, float(params.get("target_fpr", 0.05))
            )
            summary["calibration"] = {
                "threshold": result.threshold,
                "fpr": result.fpr,
                "fnr": result.fnr,
                "fpr_upper_95": result.fpr_upper_95,
                "n_labeled": result.n_labeled,
            }
        self.sections["hallucination_summary"] = summary

    def suite_toxicity(self, params: dict) -> None:
        threshold = float(params.get("threshold", 0.5))
        classifier = (
            self.cfg.endpoint_for("toxicity") if self.cfg.has_role("toxicity") else None
        )
        lexicon = load_lexicon(params.get("lexicon"))
        blocked = 0
        scored = 0
        for s in self.samples:
            output = self._outputs.get(s.id, s.output)
            if not output:
                continue
            verdict = toxicity_gate(output, threshold, classifier, lexicon)
            self.rows[s.id]["toxicity"] = {
                "score": verdict.score,
                "source": verdict.source,
                "blocked": verdict.blocked,
            }
            scored += 1
            blocked += verdict.blocked
        self.sections["toxicity_summary"] = {
            "threshold": threshold,
            "scored": scored,
            "blocked": blocked,
            "blocked_rate": blocked / scored if scored else 0.0,
        }

    def suite_consistency(self, params: dict) -> None:
        ep_a = self.cfg.endpoint_for("chat")
        ep_b = self.cfg.endpoint_for("chat_b")
        pairs = []
        for s in self.samples:
            prompt = assemble_prompt(s.query, list(s.contexts))
            seed = _sample_seed(self.cfg.seed, s.id)
            decoding = DecodingParams()
            pairs.append(
                (
                    endpoints.generate(ep_a, prompt, decoding, seed).text,
                    endpoints.generate(ep_b, prompt, decoding, seed).text,
                )
            )
        exact, mean_sim = metrics.output_consistency(pairs, self.cfg.endpoint_for("embedding"))
        self.sections["consistency"] = {
            "n": len(pairs),
            "exact_match_rate": exact,
            "mean_similarity": mean_sim,
            "endpoint_a": self.cfg.roles["chat"],
            "endpoint_b": self.cfg.roles["chat_b"],
        }

    # -- assembly ------------------------------------------------------------

    def run(self) -> Scorecard:
        suite_fns = {
            "pii": self.suite_pii,
            "sampling": self.suite_sampling,
            "metrics": self.suite_metrics,
            "robustness": self.suite_robustness,
            "fairness": self.suite_fairness,
            "weakness": self.suite_weakness,
            "hallucination": self.suite_hallucination,
            "toxicity": self.suite_toxicity,
            "consistency": self.suite_consistency,
        }
        for suite in SUITE_ORDER:
            params = self.cfg.suites.get(suite, {})
            if not params.get("enabled", False):
                continue
            try:
                suite_fns[suite](params)
            except Exception as exc:
                log.warning("suite %s failed: %s", suite, exc)
                self.suite_errors[suite] = f"{type(exc).__name__}: {exc}"
        bars = dict(DEFAULT_PASS_BARS)
        for name, raw in (self.cfg.suites.get("metrics", {}).get("pass_bars") or {}).items():
            bars[name] = (float(raw["bar"]), raw.get("direction", "min"))
        card = Scorecard(
            provenance=self._provenance(),
            samples=self.rows,
            aggregates=compute_aggregates(self.rows, bars),
            sections=self.sections,
            suite_errors=self.suite_errors,
        )
        card.gates = evaluate_gates(card, self.cfg.gates)
        problems = self_audit(card)
        if problems:  # defensive: aggregates come from the same helper
            raise MrmError(f"scorecard failed self-audit: {problems}")
        return card

    def _provenance(self) -> dict:
        corpus_bytes = Path(self.cfg.corpus_path).read_bytes()
        return {
            "harness_version": __version__,
            "config_hash": self.cfg.config_hash(),
            "corpus_hash": hashlib.sha256(corpus_bytes).hexdigest(),
            "corpus_path": str(self.cfg.corpus_path),
            "n_samples": len(self.samples),
            "seed": self.cfg.seed,
            "endpoints": {eid: ep.kind.value for eid, ep in sorted(self.cfg.endpoints.items())},
            "roles": dict(sorted(self.cfg.roles.items())),
            "suites": self.cfg.enabled_suites(),
            "run_timestamp": self.cfg.run_timestamp
            or datetime.now(timezone.utc).isoformat(),
        }


def run_validation(cfg: RunConfig) -> Scorecard:
    return ValidationRun(cfg).run()


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------

def _indicators(card: Scorecard) -> dict[str, float]:
    ind: dict[str, float] = {}
    for name, agg in card.aggregates.items():
        ind[f"{name}_mean"] = agg["mean"]
        if "pass_rate" in agg:
            ind[f"{name}_pass_rate"] = agg["pass_rate"]
    tox = card.sections.get("toxicity_summary")
    if tox:
        ind["toxicity_blocked_rate"] = tox["blocked_rate"]
    weak = card.sections.get("weak_regions")
    if weak:
        ind["weak_flagged_count"] = float(len(weak["flagged"]))
    rob = card.sections.get("robustness")
    if rob:
        ind["robustness_max_degradation"] = max((r["degradation"] for r in rob), default=0.0)
    cons = card.sections.get("consistency")
    if cons:
        ind["consistency_exact_match_rate"] = cons["exact_match_rate"]
        ind["consistency_mean_similarity"] = cons["mean_similarity"]
    fair = card.sections.get("fairness")
    if fair:
        if "weat_effect_size" in fair:
            ind["fairness_weat_abs"] = abs(fair["weat_effect_size"])
        if "counterfactual" in fair:
            ind["fairness_max_gap"] = fair["counterfactual"]["max_gap"]
    pii = card.sections.get("pii_summary")
    if pii:
        ind["pii_clean_rate"] = pii["clean_rate"]
    return ind


def evaluate_gates(card: Scorecard, gates: dict) -> dict:
    """Check configured bounds against the card's indicators. A gate whose
    indicator is absent fails: a bound that cannot be verified is not met."""
    indicators = _indicators(card)
    checks = []
    passed = True
    for name, bound in sorted(gates.items()):
        value = indicators.get(name)
        if value is None:
            ok = False
            detail = "indicator absent"
        else:
            ok = True
            detail = ""
            if "min" in bound and value < float(bound["min"]):
                ok = False
                detail = f"{value} < min {bound['min']}"
            if "max" in bound and value > float(bound["max"]):
                ok = False
                detail = f"{value} > max {bound['max']}"
        passed &= ok
        checks.append(
            {"indicator": name, "bound": bound, "value": value, "passed": ok, "detail": detail}
        )
    if card.suite_errors:
        passed = False
    return {"passed": passed, "checks": checks, "suite_errors": dict(card.suite_errors)}
