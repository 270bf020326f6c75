"""Toxicity scoring and the pass/block gate.

Primary path is a guardrail classifier endpoint; a whole-word lexicon
fallback keeps the gate operative when the classifier is down. The
shipped lexicon is a placeholder test list, not a production resource.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import endpoints
from .errors import MrmError
from .types import EndpointSpec

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5
LEXICON_SATURATION = 5  # hits at or above this score 1.0


@dataclass(frozen=True)
class ToxicityVerdict:
    score: float
    source: str  # "classifier" | "lexicon"
    matched_terms: tuple[str, ...] = ()
    blocked: bool = False


def load_lexicon(path: str | Path | None = None) -> frozenset[str]:
    if path is None:
        text = resources.files("mrm").joinpath("data/toxicity_lexicon.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    terms = {
        line.strip().lower()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    }
    return frozenset(terms)


def _lexicon_hits(text: str, lexicon: frozenset[str]) -> list[str]:
    """Case-insensitive whole-word occurrences, in document order."""
    if not lexicon:
        return []
    pattern = re.compile(
        r"\b(" + "|".join(re.escape(t) for t in sorted(lexicon, key=len, reverse=True)) + r")\b",
        re.IGNORECASE,
    )
    return [m.group().lower() for m in pattern.finditer(text)]


def toxicity_score(
    text: str,
    classifier: EndpointSpec | None,
    lexicon: frozenset[str],
) -> ToxicityVerdict:
    """Score text toxicity in [0, 1].

    Classifier failures fall back to the lexicon silently (with a logged
    warning) so the gate never dies open.
    """
    if not lexicon:
        raise ValueError("a non-empty fallback lexicon is required")
    if classifier is not None:
        try:
            score = endpoints.classify_toxicity(classifier, text)
            return ToxicityVerdict(score=score, source="classifier")
        except MrmError as exc:
            log.warning("toxicity classifier %s failed (%s); using lexicon", classifier.id, exc)
    hits = _lexicon_hits(text, lexicon)
    return ToxicityVerdict(
        score=min(1.0, len(hits) / LEXICON_SATURATION),
        source="lexicon",
        matched_terms=tuple(hits),
    )


def toxicity_gate(
    text: str,
    threshold: float = DEFAULT_THRESHOLD,
    classifier: EndpointSpec | None = None,
    lexicon: frozenset[str] | None = None,
) -> ToxicityVerdict:
    """Block iff score >= threshold (inclusive at the boundary)."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    verdict = toxicity_score(text, classifier, lexicon if lexicon is not None else load_lexicon())
    return ToxicityVerdict(
        score=verdict.score,
        source=verdict.source,
        matched_terms=verdict.matched_terms,
        blocked=verdict.score >= threshold,
    )
