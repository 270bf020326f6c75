import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrm.pii import (
    NotDigits,
    PiiFinding,
    PiiKind,
    RedactionPolicy,
    SpanMismatch,
    luhn_valid,
    redact,
    scan_pii,
)


def luhn_oracle(digits: str) -> bool:
    """Independent brute-force checksum: double every second digit from the
    right and sum the decimal digits of each product."""
    total = 0
    for i, ch in enumerate(reversed(digits)):
        d = int(ch)
        if i % 2 == 1:
            d = sum(int(c) for c in str(2 * d))
        total += d
    return total % 10 == 0


def make_luhn_valid(prefix15: str) -> str:
    """Append the check digit that makes a 16-digit number pass."""
    for check in "0123456789":
        if luhn_oracle(prefix15 + check):
            return prefix15 + check
    raise AssertionError("no check digit found")


# --- luhn ---------------------------------------------------------------------

def test_luhn_known_valid():
    # verified against the digit-doubling oracle
    assert luhn_oracle("79927398713")
    assert luhn_valid("79927398713")
    assert luhn_valid("799273987138")  # 12-digit value derived with the oracle
    assert luhn_valid("4111111111111111")


def test_luhn_known_invalid():
    assert not luhn_oracle("79927398714")
    assert not luhn_valid("79927398714")
    assert not luhn_valid("4111111111111112")


def test_luhn_rejects_non_digits():
    with pytest.raises(NotDigits):
        luhn_valid("12ab")
    with pytest.raises(NotDigits):
        luhn_valid("1234-5678-9012")
    with pytest.raises(NotDigits):
        luhn_valid("123")  # too short


def test_luhn_matches_oracle_on_random_16_digit_strings():
    rng = random.Random(20260811)
    for _ in range(2000):
        digits = "".join(rng.choice("0123456789") for _ in range(16))
        assert luhn_valid(digits) == luhn_oracle(digits)


# --- scan ----------------------------------------------------------------------

def test_scan_email():
    text = "reach me at jane.doe@example.com"
    findings = scan_pii(text)
    assert len(findings) == 1
    f = findings[0]
    assert f.kind is PiiKind.EMAIL
    assert text[f.start : f.end] == "jane.doe@example.com"


def test_scan_dashed_ssn():
    findings = scan_pii("SSN 123-45-6789 on file")
    assert [f.kind for f in findings] == [PiiKind.SSN]
    assert findings[0].matched == "123-45-6789"


def test_scan_contiguous_ssn_needs_word_boundaries():
    assert [f.kind for f in scan_pii("id 123456789 ok")] == [PiiKind.SSN]
    assert scan_pii("ref v123456789x") == []


def test_scan_clean_text():
    assert scan_pii("no identifiers present") == []


def test_scan_luhn_valid_card_formats():
    card = make_luhn_valid("454860294886361")
    spaced = " ".join(card[i : i + 4] for i in range(0, 16, 4))
    dashed = "-".join(card[i : i + 4] for i in range(0, 16, 4))
    for form in (card, spaced, dashed):
        findings = scan_pii(f"card {form} on record")
        assert [f.kind for f in findings] == [PiiKind.CREDIT_CARD], form
        assert findings[0].matched == form
        assert findings[0].validated


def test_scan_drops_luhn_invalid_card_candidates():
    card = make_luhn_valid("454860294886361")
    bad = card[:-1] + ("0" if card[-1] != "0" else "1")
    assert scan_pii(f"number {bad} here") == []


def test_scan_phone_formats():
    for form in ("(415) 555-0100", "415-555-0100", "415.555.0100", "+1 415-555-0100"):
        findings = scan_pii(f"call {form} today")
        assert [f.kind for f in findings] == [PiiKind.PHONE], form


def test_card_wins_overlap_against_embedded_matches():
    # the 16-digit card must not also surface an embedded 9-digit SSN
    card = make_luhn_valid("454860294886361")
    findings = scan_pii(f"pay {card} now")
    assert [f.kind for f in findings] == [PiiKind.CREDIT_CARD]


def test_findings_sorted_and_non_overlapping():
    card = make_luhn_valid("454860294886361")
    text = f"ssn 123-45-6789, card {card}, mail a@b.io, tel 415-555-0100"
    findings = scan_pii(text)
    assert [f.kind for f in findings] == [
        PiiKind.SSN,
        PiiKind.CREDIT_CARD,
        PiiKind.EMAIL,
        PiiKind.PHONE,
    ]
    for a, b in zip(findings, findings[1:]):
        assert a.end <= b.start


def test_twenty_digit_run_is_not_a_card():
    assert scan_pii("serial 45486029488636100027 x") == []


# --- redact ---------------------------------------------------------------------

def test_redact_no_findings_is_identity():
    assert redact("plain text", [], RedactionPolicy.MASK) == "plain text"


def test_redact_mask_preserves_length():
    text = "SSN 123-45-6789 on file"
    out = redact(text, scan_pii(text), RedactionPolicy.MASK)
    assert out == "SSN *********** on file"
    assert len(out.encode()) == len(text.encode())


def test_redact_tag_email():
    text = "mail jane.doe@example.com now"
    out = redact(text, scan_pii(text), RedactionPolicy.TAG)
    assert "[EMAIL]" in out
    assert "@" not in out


def test_redact_drop_removes_span():
    text = "ssn 123-45-6789 end"
    out = redact(text, scan_pii(text), RedactionPolicy.DROP)
    assert out == "ssn  end"


def test_redact_span_mismatch():
    finding = PiiFinding(PiiKind.SSN, 0, 11, "123-45-6789")
    with pytest.raises(SpanMismatch):
        redact("999-99-9999", [finding], RedactionPolicy.MASK)


def test_rescan_after_redaction_finds_nothing():
    card = make_luhn_valid("454860294886361")
    text = f"ssn 123-45-6789 card {card} mail a@b.io tel (415) 555-0100"
    for policy in RedactionPolicy:
        out = redact(text, scan_pii(text), policy)
        assert scan_pii(out) == [], policy


def test_scan_idempotent_on_redacted_text():
    text = "ssn 123-45-6789 mail a@b.io"
    once = redact(text, scan_pii(text), RedactionPolicy.MASK)
    assert redact(once, scan_pii(once), RedactionPolicy.MASK) == once


_filler = st.lists(
    st.sampled_from("ledger report quarter branch account review trend".split()),
    min_size=1,
    max_size=6,
)


@given(_filler, st.integers(0, 2))
def test_mask_redaction_properties(words, plant_kind):
    plants = ["123-45-6789", "jane.doe@example.com", "(415) 555-0100"]
    text = " ".join(words) + " " + plants[plant_kind] + " " + " ".join(words)
    findings = scan_pii(text)
    assert findings
    masked = redact(text, findings, RedactionPolicy.MASK)
    assert len(masked) == len(text)
    assert scan_pii(masked) == []
