"""Per-sample quality scorers: the RAG triad (faithfulness, answer
relevance, context relevance), summarization completeness, semantic-entropy
uncertainty over repeated generations, and dev-vs-prod output consistency.

All ratio metrics are exact counts over totals. NLI-backed scorers treat a
premise-hypothesis pair as supporting when p_entail clears the configured
threshold (default 0.5; subject to human calibration downstream).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from . import endpoints
from .errors import MrmError
from .types import DecodingParams, EndpointSpec
from .vectors import rescaled_cosine

DEFAULT_ENTAIL_THRESHOLD = 0.5

_TERMINAL_RE = re.compile(r"[.!?]+")
_WORD_RE = re.compile(r"[\w']+")

# Trailing-period tokens that do not end a sentence. Single capitals ("A.")
# intentionally absent: initial-like splits are accepted.
_ABBREVIATIONS = {
    "dr", "mr", "mrs", "ms", "prof", "rev", "hon", "jr", "sr", "st",
    "vs", "etc", "inc", "ltd", "co", "corp", "dept", "est", "approx",
    "no", "fig", "eq", "al", "e.g", "i.e", "cf", "u.s", "u.k",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
}


class NoStatements(MrmError):
    """The output segmented to zero statements."""


@dataclass(frozen=True)
class StatementSupport:
    statement: str
    supported: bool
    best_premise_index: int | None
    p_entail: float


@dataclass(frozen=True)
class MetricVector:
    faithfulness: float | None = None
    answer_relevance: float | None = None
    context_relevance: float | None = None
    completeness: float | None = None
    semantic_entropy: float | None = None

    def __post_init__(self):
        for name in ("faithfulness", "answer_relevance", "context_relevance", "completeness"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.semantic_entropy is not None and self.semantic_entropy < 0:
            raise ValueError("semantic_entropy must be >= 0")

    def to_dict(self) -> dict:
        return {
            "faithfulness": self.faithfulness,
            "answer_relevance": self.answer_relevance,
            "context_relevance": self.context_relevance,
            "completeness": self.completeness,
            "semantic_entropy": self.semantic_entropy,
        }


def _word_before(text: str, idx: int) -> str:
    """The dotted word immediately preceding position idx, lowercased."""
    j = idx
    while j > 0 and (text[j - 1].isalnum() or text[j - 1] == "."):
        j -= 1
    return text[j:idx].lower().rstrip(".")


def split_statements(text: str) -> list[str]:
    """Sentence-level segmentation on terminal punctuation.

    A punctuation run ends a sentence only when followed by whitespace or
    end of text, and (for periods) when the preceding word is not a known
    abbreviation. Joining the pieces reconstructs the input modulo
    whitespace.
    """
    statements: list[str] = []
    start = 0
    for m in _TERMINAL_RE.finditer(text):
        end = m.end()
        if end < len(text) and not text[end].isspace():
            continue
        if m.group().startswith(".") and _word_before(text, m.start()) in _ABBREVIATIONS:
            continue
        piece = text[start:end].strip()
        if piece:
            statements.append(piece)
        start = end
    tail = text[start:].strip()
    if tail:
        statements.append(tail)
    return statements


def faithfulness(
    output: str,
    contexts: list[str],
    nli: EndpointSpec,
    entail_threshold: float = DEFAULT_ENTAIL_THRESHOLD,
) -> tuple[float, list[StatementSupport]]:
    """Fraction of output statements supported by at least one context.

    Each statement is tested against every context (premise=context,
    hypothesis=statement) and keeps the best p_entail; the per-statement
    map doubles as statement-to-source attribution.
    """
    if not contexts:
        raise ValueError("faithfulness requires at least one context")
    statements = split_statements(output)
    if not statements:
        raise NoStatements("output has no statements to score")
    supports: list[StatementSupport] = []
    supported_count = 0
    for stmt in statements:
        best_p, best_idx = -1.0, 0
        for idx, ctx in enumerate(contexts):
            verdict = endpoints.classify_nli(nli, premise=ctx, hypothesis=stmt)
            if verdict.p_entail > best_p:
                best_p, best_idx = verdict.p_entail, idx
        ok = best_p >= entail_threshold
        supported_count += ok
        supports.append(StatementSupport(stmt, ok, best_idx, best_p))
    return supported_count / len(statements), supports


def answer_relevance(
    output: str,
    query: str,
    embed_ep: EndpointSpec,
    mode: str = "embedding",
    chat_ep: EndpointSpec | None = None,
    reverse_question_template: str = "Write the question this answer responds to.\n\nAnswer: {output}\n\nQuestion:",
    n_questions: int = 3,
    seed: int = 0,
) -> float:
    """Alignment of the output with the query, rescaled to [0, 1].

    Default mode compares embeddings directly. The llm mode generates
    reverse questions from the answer and compares those to the query.
    """
    if not output or not query:
        raise ValueError("output and query must be non-empty")
    if mode == "embedding":
        vo, vq = endpoints.embed(embed_ep, [output, query])
        return _safe_rescaled_cosine(vo, vq)
    if mode != "llm":
        raise ValueError(f"unknown answer_relevance mode {mode!r}")
    if chat_ep is None:
        raise ValueError("llm mode requires a chat endpoint")
    sims = []
    prompt = reverse_question_template.format(output=output)
    for i in range(n_questions):
        gen = endpoints.generate(chat_ep, prompt, DecodingParams(), seed + i)
        sims.append(text_similarity(gen.text, query, embed_ep) if gen.text else 0.0)
    return sum(sims) / len(sims)


def context_relevance(
    contexts: list[str],
    query: str,
    nli: EndpointSpec,
    entail_threshold: float = DEFAULT_ENTAIL_THRESHOLD,
) -> float:
    """Fraction of context sentences judged relevant to the query; 1.0
    means no extraneous context was retrieved."""
    if not contexts:
        raise ValueError("context_relevance requires at least one context")
    sentences = [s for ctx in contexts for s in split_statements(ctx)]
    if not sentences:
        return 0.0
    relevant = 0
    for sent in sentences:
        verdict = endpoints.classify_nli(nli, premise=sent, hypothesis=query)
        relevant += verdict.p_entail >= entail_threshold
    return relevant / len(sentences)


def completeness(
    summary: str,
    key_points: list[str],
    nli: EndpointSpec,
    entail_threshold: float = DEFAULT_ENTAIL_THRESHOLD,
) -> float:
    """Fraction of reference key points entailed by the summary."""
    if not key_points:
        raise ValueError("completeness requires at least one key point")
    captured = 0
    for point in key_points:
        verdict = endpoints.classify_nli(nli, premise=summary, hypothesis=point)
        captured += verdict.p_entail >= entail_threshold
    return captured / len(key_points)


def semantic_entropy(
    generations: list[str],
    nli: EndpointSpec,
    entail_threshold: float = DEFAULT_ENTAIL_THRESHOLD,
) -> float:
    """Entropy over meaning-equivalence clusters of repeated generations.

    Greedy clustering: a generation joins the first cluster whose
    representative it mutually entails, else starts a new cluster.
    0 when all generations agree; at most ln(K).
    """
    k = len(generations)
    if k < 2:
        raise ValueError("semantic_entropy requires at least 2 generations")

    def mutual(a: str, b: str) -> bool:
        ab = endpoints.classify_nli(nli, premise=a, hypothesis=b).p_entail
        ba = endpoints.classify_nli(nli, premise=b, hypothesis=a).p_entail
        return ab >= entail_threshold and ba >= entail_threshold

    reps: list[str] = []
    counts: list[int] = []
    for gen in generations:
        for i, rep in enumerate(reps):
            if gen == rep or mutual(rep, gen):
                counts[i] += 1
                break
        else:
            reps.append(gen)
            counts.append(1)
    return -sum((c / k) * math.log(c / k) for c in counts)


def text_similarity(a: str, b: str, embed_ep: EndpointSpec) -> float:
    """Rescaled embedding cosine with exact short-circuits: equal texts
    score 1.0, token-free texts score 0.0 against anything different."""
    if a == b:
        return 1.0
    va, vb = endpoints.embed(embed_ep, [a, b])
    return _safe_rescaled_cosine(va, vb)


def _safe_rescaled_cosine(va, vb) -> float:
    import numpy as np

    if np.linalg.norm(va) == 0 or np.linalg.norm(vb) == 0:
        return 0.0
    return rescaled_cosine(va, vb)


def output_consistency(
    pairs: list[tuple[str, str]],
    embed_ep: EndpointSpec,
) -> tuple[float, float]:
    """Compare paired outputs from two environments.

    Returns (exact_match_rate, mean_similarity): byte-equal fraction and
    mean rescaled embedding cosine.
    """
    if not pairs:
        raise ValueError("output_consistency requires at least one pair")
    exact = sum(a == b for a, b in pairs) / len(pairs)
    sims = [text_similarity(a, b, embed_ep) for a, b in pairs]
    return exact, sum(sims) / len(sims)


def fluency_proxy(text: str) -> float:
    """Crude fluency stand-in: sentence well-formedness plus a repeated
    trigram penalty. Informational only, never used for gating."""
    sentences = split_statements(text)
    if not sentences:
        return 0.0
    well_formed = 0
    for s in sentences:
        words = _WORD_RE.findall(s)
        if len(words) >= 2 and (s[0].isupper() or s[0].isdigit()):
            well_formed += 1
    parseable = well_formed / len(sentences)
    tokens = _WORD_RE.findall(text.lower())
    trigrams = [tuple(tokens[i : i + 3]) for i in range(len(tokens) - 2)]
    repetition = 1.0 - len(set(trigrams)) / len(trigrams) if trigrams else 0.0
    return 0.5 * parseable + 0.5 * (1.0 - repetition)
