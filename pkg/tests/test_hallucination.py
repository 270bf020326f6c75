import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrm.hallucination import (
    CoveTemplates,
    NoFactsExtracted,
    OneClassOnly,
    TooFewLabels,
    calibrate,
    cove_score,
    nli_score,
    selfcheck_score,
    NLI_MAPPINGS,
)
from mrm.metrics import NoStatements
from mrm.types import NliVerdict

from conftest import canned_chat, scripted_nli


# --- calibration oracle (independent brute-force sweep) -------------------------

def sweep_oracle(scores, labels, target):
    """Try every candidate cut ascending, recounting rates from scratch."""
    negatives = [s for s, lab in zip(scores, labels) if not lab]
    for cut in sorted(set(scores) | {1.0}):
        fp = sum(1 for s in negatives if s >= cut)
        if fp / len(negatives) <= target:
            return cut
    return None


def wilson_upper_direct(successes, n):
    """Direct formula evaluation with its own constant."""
    z = 1.959963984540054
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return min(1.0, center + half)


# --- nli detector -----------------------------------------------------------------

def test_faithful_outputs_score_zero():
    nli = scripted_nli(rules=[], default={"entail": 1.0})
    score = nli_score(["the full context"], "Statement one. Statement two.", nli)
    assert score.max_score == 0.0
    assert score.mean_score == 0.0


def test_contradiction_mock_passthrough():
    nli = scripted_nli(rules=[], default={"entail": 0.1, "contradict": 0.9})
    score = nli_score(["ctx"], "One contradicted statement.", nli)
    assert score.max_score == pytest.approx(0.9, abs=1e-12)


def test_unsupported_statement_scores_one_minus_entail():
    nli = scripted_nli(rules=[], default={"entail": 0.2, "neutral": 0.8})
    score = nli_score(["ctx"], "Unsupported claim.", nli)
    assert score.max_score == pytest.approx(0.8, abs=1e-12)


def test_min_over_contexts_one_source_suffices():
    nli = scripted_nli(
        rules=[{"premise": "good ctx", "entail": 1.0}],
        default={"entail": 0.0, "contradict": 1.0},
    )
    score = nli_score(["bad ctx", "good ctx"], "A claim.", nli)
    assert score.max_score == 0.0


def test_nli_requires_contexts():
    nli = scripted_nli(rules=[], default={"entail": 1.0})
    with pytest.raises(ValueError):
        nli_score([], "output", nli)
    with pytest.raises(NoStatements):
        nli_score(["ctx"], "   ", nli)


def test_aggregates_mean_and_max():
    nli = scripted_nli(
        rules=[{"hypothesis_contains": "bad", "entail": 0.0, "contradict": 1.0}],
        default={"entail": 1.0},
    )
    score = nli_score(["ctx"], "Good fact. Another good fact. One bad fact.", nli)
    assert score.max_score == 1.0
    assert score.mean_score == pytest.approx(1 / 3, abs=1e-12)
    assert 0.0 <= score.mean_score <= score.max_score <= 1.0


def test_fully_neutral_verdict_is_penalized():
    f = NLI_MAPPINGS["contradiction_or_unsupported"]
    assert f(NliVerdict(p_entail=0.0, p_neutral=1.0, p_contradict=0.0)) == 1.0


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_mapping_monotone_in_contradiction(e_raw, c1, c2):
    # raising p_contradict (neutral mass absorbing the change, entailment
    # fixed) must never lower a statement's score
    f = NLI_MAPPINGS["contradiction_or_unsupported"]
    e = round(e_raw, 6)
    lo, hi = sorted((round(c1 * (1 - e), 6), round(c2 * (1 - e), 6)))
    v_lo = NliVerdict(p_entail=e, p_neutral=round(1 - e - lo, 6), p_contradict=lo)
    v_hi = NliVerdict(p_entail=e, p_neutral=round(1 - e - hi, 6), p_contradict=hi)
    assert f(v_hi) >= f(v_lo)


# --- selfcheck ----------------------------------------------------------------------

def test_selfcheck_deterministic_model_scores_zero(lexical_nli):
    model = canned_chat(default="The rate is fixed. The fee is waived.")
    score = selfcheck_score(
        "what are the terms",
        "The rate is fixed. The fee is waived.",
        model,
        K=4,
        nli=lexical_nli,
        seed=10,
    )
    assert score.max_score == 0.0
    assert score.mean_score == 0.0


def test_selfcheck_fraction_arithmetic(lexical_nli):
    # regeneration with seed 11 (= seed+1) repeats the statement; the other
    # three diverge, so support is 1 of 4 -> score 0.75
    from mrm.types import EndpointKind, EndpointSpec

    model = EndpointSpec(
        id="vary",
        kind=EndpointKind.CHAT,
        mock_script={
            "behavior": "choices",
            "choices": ["the claim holds", "different words", "other text", "nothing alike"],
        },
    )
    import mrm.endpoints as ep

    regen_texts = [
        ep.generate(model, "q", __import__("mrm.types", fromlist=["DecodingParams"]).DecodingParams(), 10 + i + 1).text
        for i in range(4)
    ]
    supported = sum(1 for t in regen_texts if t == "the claim holds")
    score = selfcheck_score("q", "the claim holds", model, K=4, nli=lexical_nli, seed=10)
    assert score.max_score == pytest.approx(1.0 - supported / 4, abs=1e-12)


def test_selfcheck_k_must_be_at_least_two(echo_chat, lexical_nli):
    with pytest.raises(ValueError):
        selfcheck_score("q", "output.", echo_chat, K=1, nli=lexical_nli, seed=0)


# --- cove -------------------------------------------------------------------------

def _cove_model(fee_answer="The fee is 25 dollars."):
    return canned_chat(
        rules=[
            {"contains": "factual claims", "text": "The rate is 5%.\nThe fee is 10 dollars."},
            {"contains": "Fact: The rate is 5%.", "text": "What is the rate?"},
            {"contains": "Fact: The fee is 10 dollars.", "text": "What is the fee?"},
            {"contains": "Question: What is the rate?", "text": "The rate is 5%."},
            {"contains": "Question: What is the fee?", "text": fee_answer},
        ]
    )


def test_cove_all_facts_verified(lexical_nli):
    model = _cove_model(fee_answer="The fee is 10 dollars.")
    score = cove_score("ignored by mock", model, lexical_nli, seed=0)
    assert score.mean_score == 0.0
    assert len(score.per_statement) == 2


def test_cove_one_of_two_contradicted(lexical_nli):
    model = _cove_model()  # fee answer disagrees with the extracted fact
    score = cove_score("ignored by mock", model, lexical_nli, seed=0)
    assert score.mean_score == pytest.approx(0.5, abs=1e-9)
    assert score.max_score == 1.0


def test_cove_empty_output_rejected(echo_chat, lexical_nli):
    with pytest.raises(ValueError):
        cove_score("", echo_chat, lexical_nli, seed=0)


def test_cove_no_facts(lexical_nli):
    model = canned_chat(default="")
    with pytest.raises(NoFactsExtracted):
        cove_score("something", model, lexical_nli, seed=0)


def test_cove_verification_prompt_never_contains_original_output(lexical_nli):
    seen = []
    import mrm.endpoints as ep

    @ep.register_chat_behavior("recording")
    def _factory(script):
        inner = ep._CHAT_BEHAVIORS["canned"](_cove_model().mock_script)

        def fn(prompt, decoding, seed):
            seen.append(prompt)
            return inner(prompt, decoding, seed)

        return fn

    from mrm.types import EndpointKind, EndpointSpec

    model = EndpointSpec(id="rec", kind=EndpointKind.CHAT, mock_script={"behavior": "recording"})
    original = "UNIQUE-ORIGINAL-TEXT sentinel"
    cove_score(original, model, lexical_nli, seed=0)
    answer_prompts = [p for p in seen if "Question:" in p and "Fact:" not in p]
    assert answer_prompts
    assert all(original not in p for p in answer_prompts)


# --- calibrate ----------------------------------------------------------------------

def test_perfectly_separable_scores():
    scores = [0.1, 0.2, 0.3, 0.4] * 5 + [0.5, 0.6, 0.7, 0.8] * 5
    labels = [False] * 20 + [True] * 20
    result = calibrate(scores, labels, target_fpr=0.05)
    assert result.threshold == 0.5
    assert result.fpr == 0.0
    assert result.fnr == 0.0
    assert result.threshold == sweep_oracle(scores, labels, 0.05)


def test_random_labels_wide_wilson_bound():
    rng = random.Random(5)
    scores = [rng.random() for _ in range(30)]
    labels = [rng.random() < 0.5 for _ in range(30)]
    if all(labels) or not any(labels):
        labels[0] = not labels[0]
    result = calibrate(scores, labels, target_fpr=0.2)
    assert result.fpr_upper_95 > result.fpr
    assert result.fpr_upper_95 - result.fpr > 0.05  # small n keeps the bound wide


def test_one_class_only():
    with pytest.raises(OneClassOnly):
        calibrate([0.1] * 25, [True] * 25, target_fpr=0.1)


def test_too_few_labels():
    with pytest.raises(TooFewLabels):
        calibrate([0.1, 0.9] * 5, [False, True] * 5, target_fpr=0.1)


def test_calibrate_matches_sweep_oracle_on_random_instances():
    rng = random.Random(20260811)
    for trial in range(60):
        n = 50
        scores = [round(rng.random(), 6) for _ in range(n)]
        labels = [rng.random() < 0.5 for _ in range(n)]
        if all(labels) or not any(labels):
            labels[0] = not labels[0]
        target = rng.choice([0.05, 0.1, 0.25])
        result = calibrate(scores, labels, target)
        assert result.threshold == sweep_oracle(scores, labels, target), trial
        assert result.fpr <= target
        negatives = [s for s, lab in zip(scores, labels) if not lab]
        fp = sum(1 for s in negatives if s >= result.threshold)
        assert result.fpr_upper_95 == pytest.approx(
            wilson_upper_direct(fp, len(negatives)), abs=1e-9
        )
