"""Formatted-PII detection and redaction.

Pattern set covers the standard formatted forms: dashed and contiguous
SSNs, Luhn-confirmed card numbers (13-19 digits, optional space/dash
separators), a pragmatic RFC-lite email shape, and NANP phone formats.
Spans are character offsets into the scanned text; every matched slice is
ASCII, so mask redaction preserves byte length as well.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .errors import MrmError


class PiiKind(str, enum.Enum):
    SSN = "ssn"
    CREDIT_CARD = "credit_card"
    EMAIL = "email"
    PHONE = "phone"


class RedactionPolicy(str, enum.Enum):
    MASK = "mask"
    DROP = "drop"
    TAG = "tag"


class NotDigits(MrmError):
    """luhn_valid input must be 11-19 digits with no separators."""


class SpanMismatch(MrmError):
    """Findings passed to redact() do not match the text they claim to span."""


@dataclass(frozen=True)
class PiiFinding:
    kind: PiiKind
    start: int
    end: int  # end-exclusive
    matched: str
    validated: bool = True

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


# Dash/digit lookarounds keep matches out of longer digit chains (a 16-digit
# card must not yield an embedded 9-digit SSN, nor a 20-digit run a card).
_SSN_DASHED = re.compile(r"(?<!\d)(?<!\d-)\d{3}-\d{2}-\d{4}(?!\d)(?!-\d)")
_SSN_CONTIGUOUS = re.compile(r"(?<![-.\w])\d{9}(?![-.\w])")
_CARD = re.compile(r"(?<!\d)(?<!\d[ -])(?:\d[ -]?){12,18}\d(?!\d)(?![ -]\d)")
_EMAIL = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}")
_PHONE = re.compile(
    r"(?<!\d)(?:\+?1[-. ])?(?:\(\d{3}\)[-. ]?|\d{3}[-. ])\d{3}[-. ]\d{4}(?![\d-])"
)

# Overlap resolution: longest match, then leftmost, then this kind order.
_KIND_PRIORITY = {
    PiiKind.CREDIT_CARD: 0,
    PiiKind.SSN: 1,
    PiiKind.EMAIL: 2,
    PiiKind.PHONE: 3,
}

_LUHN_DOUBLE = (0, 2, 4, 6, 8, 1, 3, 5, 7, 9)


def luhn_valid(digits: str) -> bool:
    """Whether the checksum of an 11-19 digit string is 0 mod 10.

    The floor admits the classic 11-digit checksum test vector; card
    detection itself only consults lengths 13-19.
    """
    if not digits.isascii() or not digits.isdigit() or not 11 <= len(digits) <= 19:
        raise NotDigits(f"expected 11-19 digits, got {digits!r}")
    total = 0
    for i, ch in enumerate(reversed(digits)):
        d = int(ch)
        total += _LUHN_DOUBLE[d] if i % 2 == 1 else d
    return total % 10 == 0


def _candidates(text: str):
    for m in _SSN_DASHED.finditer(text):
        yield PiiFinding(PiiKind.SSN, m.start(), m.end(), m.group())
    for m in _SSN_CONTIGUOUS.finditer(text):
        yield PiiFinding(PiiKind.SSN, m.start(), m.end(), m.group())
    for m in _CARD.finditer(text):
        digits = re.sub(r"[ -]", "", m.group())
        if 13 <= len(digits) <= 19 and luhn_valid(digits):
            yield PiiFinding(PiiKind.CREDIT_CARD, m.start(), m.end(), m.group(), True)
    for m in _EMAIL.finditer(text):
        yield PiiFinding(PiiKind.EMAIL, m.start(), m.end(), m.group())
    for m in _PHONE.finditer(text):
        yield PiiFinding(PiiKind.PHONE, m.start(), m.end(), m.group())


def scan_pii(text: str) -> list[PiiFinding]:
    """All formatted-PII findings, sorted by span start, non-overlapping.

    Card candidates that fail the Luhn checksum are not reported.
    """
    ranked = sorted(
        _candidates(text),
        key=lambda f: (-(f.end - f.start), f.start, _KIND_PRIORITY[f.kind]),
    )
    accepted: list[PiiFinding] = []
    for cand in ranked:
        if all(cand.end <= f.start or cand.start >= f.end for f in accepted):
            accepted.append(cand)
    return sorted(accepted, key=lambda f: f.start)


def redact(
    text: str,
    findings: list[PiiFinding],
    policy: RedactionPolicy | str = RedactionPolicy.MASK,
) -> str:
    """Rewrite each finding's span per the policy.

    mask keeps length ('*' per character), tag substitutes '[KIND]', drop
    removes the span. Findings must have been produced from this text.
    """
    policy = RedactionPolicy(policy)
    for f in findings:
        if text[f.start : f.end] != f.matched:
            raise SpanMismatch(
                f"finding at {f.span} reads {text[f.start:f.end]!r}, expected {f.matched!r}"
            )
    out = text
    for f in sorted(findings, key=lambda f: f.start, reverse=True):
        if policy is RedactionPolicy.MASK:
            repl = "*" * (f.end - f.start)
        elif policy is RedactionPolicy.TAG:
            repl = f"[{f.kind.value.upper()}]"
        else:
            repl = ""
        out = out[: f.start] + repl + out[f.end :]
    return out
