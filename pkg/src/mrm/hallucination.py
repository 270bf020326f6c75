"""Hallucination detectors and human-label calibration.

Three black-box detectors, scored per statement in [0, 1] where 1 is
most hallucinated:

  nli       - statements tested directly against the provided contexts;
  selfcheck - consistency of the original statements against repeated
              regenerations of the same prompt;
  cove      - facts re-derived through independently answered
              verification questions.

Gating downstream uses max_score (one fabricated figure is a failure
regardless of average quality); mean_score is reported alongside.
"""

from __future__ import annotations

import enum
from bisect import bisect_left
from dataclasses import dataclass
from importlib import resources

from . import endpoints
from .errors import MrmError
from .metrics import DEFAULT_ENTAIL_THRESHOLD, NoStatements, split_statements
from .stats import wilson_interval
from .types import DecodingParams, EndpointSpec, NliVerdict


class HallucinationMethod(str, enum.Enum):
    NLI = "nli"
    SELFCHECK = "selfcheck"
    COVE = "cove"


class NoFactsExtracted(MrmError):
    pass


class OneClassOnly(MrmError):
    pass


class TooFewLabels(MrmError):
    pass


@dataclass(frozen=True)
class HallucinationScore:
    method: HallucinationMethod
    per_statement: tuple[tuple[str, float], ...]
    max_score: float
    mean_score: float

    @classmethod
    def from_statements(
        cls, method: HallucinationMethod, scored: list[tuple[str, float]]
    ) -> "HallucinationScore":
        values = [v for _, v in scored]
        return cls(
            method=method,
            per_statement=tuple(scored),
            max_score=max(values),
            mean_score=sum(values) / len(values),
        )


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    fpr: float
    fnr: float
    fpr_upper_95: float
    n_labeled: int


def _map_contradiction(v: NliVerdict) -> float:
    """Default verdict-to-score mapping: the larger of the contradiction
    probability and plain unsupportedness (1 - p_entail), so both directly
    contradicted and merely unsupported statements are penalized, and a
    higher contradiction mass can never lower the score."""
    return max(v.p_contradict, 1.0 - v.p_entail)


def _map_entail_margin(v: NliVerdict) -> float:
    """Alternative smooth mapping on the entail/contradict margin."""
    return (1.0 + v.p_contradict - v.p_entail) / 2.0


NLI_MAPPINGS = {
    "contradiction_or_unsupported": _map_contradiction,
    "entail_margin": _map_entail_margin,
}


def nli_score(
    contexts: list[str],
    output: str,
    nli: EndpointSpec,
    mapping: str = "contradiction_or_unsupported",
) -> HallucinationScore:
    """Per-statement hallucination against the provided contexts.

    Each statement takes the minimum mapped score over contexts: one
    supporting source is enough to clear it.
    """
    if not contexts:
        raise ValueError("nli_score requires at least one context")
    statements = split_statements(output)
    if not statements:
        raise NoStatements("output has no statements to score")
    map_fn = NLI_MAPPINGS[mapping]
    scored = []
    for stmt in statements:
        per_ctx = [
            map_fn(endpoints.classify_nli(nli, premise=ctx, hypothesis=stmt))
            for ctx in contexts
        ]
        scored.append((stmt, min(1.0, max(0.0, min(per_ctx)))))
    return HallucinationScore.from_statements(HallucinationMethod.NLI, scored)


def selfcheck_score(
    query: str,
    output: str,
    model: EndpointSpec,
    K: int,
    nli: EndpointSpec,
    seed: int,
    decoding: DecodingParams | None = None,
    entail_threshold: float = DEFAULT_ENTAIL_THRESHOLD,
) -> HallucinationScore:
    """Inconsistency of the original output against K regenerations of the
    same prompt (seeds seed+1..seed+K, identical decoding). A statement
    entailed by every regeneration scores 0."""
    if K < 2:
        raise ValueError("selfcheck requires K >= 2 regenerations")
    statements = split_statements(output)
    if not statements:
        raise NoStatements("output has no statements to score")
    decoding = decoding or DecodingParams()
    regens = [
        endpoints.generate(model, query, decoding, seed + i + 1).text for i in range(K)
    ]
    scored = []
    for stmt in statements:
        supported = sum(
            endpoints.classify_nli(nli, premise=r, hypothesis=stmt).p_entail
            >= entail_threshold
            for r in regens
        )
        scored.append((stmt, 1.0 - supported / K))
    return HallucinationScore.from_statements(HallucinationMethod.SELFCHECK, scored)


@dataclass(frozen=True)
class CoveTemplates:
    extract: str
    question: str
    answer: str

    @classmethod
    def load_default(cls) -> "CoveTemplates":
        base = resources.files("mrm").joinpath("data/prompts")
        return cls(
            extract=base.joinpath("cove_extract_facts.txt").read_text(encoding="utf-8"),
            question=base.joinpath("cove_generate_question.txt").read_text(encoding="utf-8"),
            answer=base.joinpath("cove_answer_question.txt").read_text(encoding="utf-8"),
        )


def _parse_facts(text: str) -> list[str]:
    facts = []
    for line in text.splitlines():
        fact = line.strip().lstrip("-*").strip()
        if fact and fact[0].isdigit() and "." in fact[:4]:
            fact = fact.split(".", 1)[1].strip()
        if fact:
            facts.append(fact)
    return facts


def cove_score(
    output: str,
    model: EndpointSpec,
    nli: EndpointSpec,
    seed: int,
    decoding: DecodingParams | None = None,
    templates: CoveTemplates | None = None,
    entail_threshold: float = DEFAULT_ENTAIL_THRESHOLD,
) -> HallucinationScore:
    """Fact-check pipeline: extract key facts, generate one verification
    question per fact, answer each question in a fresh prompt that never
    sees the original output, and flag facts the answers fail to entail."""
    if not output:
        raise ValueError("cove_score requires a non-empty output")
    decoding = decoding or DecodingParams()
    templates = templates or CoveTemplates.load_default()
    extraction = endpoints.generate(
        model, templates.extract.format(output=output), decoding, seed
    )
    facts = _parse_facts(extraction.text)
    if not facts:
        raise NoFactsExtracted("fact extraction produced no facts")
    scored = []
    for i, fact in enumerate(facts):
        question = endpoints.generate(
            model, templates.question.format(fact=fact), decoding, seed + 1 + i
        ).text
        answer = endpoints.generate(
            model, templates.answer.format(question=question), decoding, seed + 1001 + i
        ).text
        entailed = (
            endpoints.classify_nli(nli, premise=answer, hypothesis=fact).p_entail
            >= entail_threshold
        )
        scored.append((fact, 0.0 if entailed else 1.0))
    return HallucinationScore.from_statements(HallucinationMethod.COVE, scored)


def calibrate(
    scores: list[float],
    human_labels: list[bool],
    target_fpr: float,
) -> CalibrationResult:
    """Pick the smallest flagging threshold whose empirical false-positive
    rate on the human-labeled set stays within target_fpr.

    Flagging rule is score >= threshold; labels are True for hallucinated.
    The returned fpr_upper_95 is the Wilson upper bound at the chosen cut.
    """
    if len(scores) != len(human_labels):
        raise ValueError("scores and labels must have equal length")
    if not 0.0 < target_fpr < 1.0:
        raise ValueError("target_fpr must be in (0, 1)")
    n = len(scores)
    if n < 20:
        raise TooFewLabels(f"need at least 20 labeled items, got {n}")
    positives = sorted(s for s, lab in zip(scores, human_labels) if lab)
    negatives = sorted(s for s, lab in zip(scores, human_labels) if not lab)
    if not positives or not negatives:
        raise OneClassOnly("both hallucinated and clean labels are required")
    candidates = sorted(set(scores) | {1.0})
    for cut in candidates:
        false_pos = len(negatives) - bisect_left(negatives, cut)
        fpr = false_pos / len(negatives)
        if fpr <= target_fpr:
            misses = bisect_left(positives, cut)
            return CalibrationResult(
                threshold=cut,
                fpr=fpr,
                fnr=misses / len(positives),
                fpr_upper_95=wilson_interval(false_pos, len(negatives))[1],
                n_labeled=n,
            )
    raise ValueError(
        f"no threshold in [0, 1] attains FPR <= {target_fpr} on this labeled set"
    )
