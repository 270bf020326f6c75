"""Input perturbations, robustness runs, and fairness measurements
(embedding association effect size, counterfactual group swaps).

Perturbations are meaning-preserving by construction: numbers and detected
PII spans are never touched (altering figures changes ground truth), and
misspellings are single edits that keep tokens recognizable.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from string import ascii_lowercase

import numpy as np

from . import endpoints, metrics
from .errors import MrmError
from .pii import scan_pii
from .types import DecodingParams, EndpointSpec, ValidationSample
from .vectors import cosine_similarity

_WORD = re.compile(r"[\w']+")


class PerturbationKind(str, enum.Enum):
    SYNONYM = "synonym"
    MISSPELL = "misspell"
    CASE_NOISE = "case_noise"
    RETRIEVAL_SHUFFLE = "retrieval_shuffle"


class MissingLexicon(MrmError):
    pass


class WrongShape(MrmError):
    pass


class ZeroVariance(MrmError):
    pass


@dataclass(frozen=True)
class PerturbationSpec:
    kind: PerturbationKind
    rate: float
    seed: int
    lexicon: dict[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PerturbationKind(self.kind))
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must be in [0, 1]")
        if self.kind is PerturbationKind.SYNONYM and not self.lexicon:
            raise MissingLexicon("synonym perturbation requires a lexicon")


@dataclass(frozen=True)
class RobustnessResult:
    kind: PerturbationKind
    rate: float
    n: int
    mean_output_similarity: float
    worst_ids: tuple[str, ...]  # ascending by similarity

    @property
    def degradation(self) -> float:
        return 1.0 - self.mean_output_similarity


def _match_case(original: str, replacement: str) -> str:
    if original.isupper() and len(original) > 1:
        return replacement.upper()
    if original[:1].isupper():
        return replacement.capitalize()
    return replacement


def _one_edit(token: str, rng: np.random.Generator) -> str:
    """One random edit at position >= 1, guaranteed to change the token."""
    ops = ["substitute", "insert", "delete"]
    if len(token) >= 3:
        ops.append("transpose")
    op = ops[int(rng.integers(len(ops)))]
    if op == "transpose":
        i = int(rng.integers(1, len(token) - 1))
        if token[i] != token[i + 1]:
            return token[:i] + token[i + 1] + token[i] + token[i + 2 :]
        op = "substitute"
    if op == "substitute":
        i = int(rng.integers(1, len(token)))
        pool = [c for c in ascii_lowercase if c != token[i].lower()]
        return token[:i] + pool[int(rng.integers(len(pool)))] + token[i + 1 :]
    if op == "insert":
        i = int(rng.integers(1, len(token) + 1))
        return token[:i] + ascii_lowercase[int(rng.integers(26))] + token[i:]
    i = int(rng.integers(1, len(token)))  # delete
    return token[:i] + token[i + 1 :]


def _flip_case(token: str, rng: np.random.Generator) -> str:
    i = int(rng.integers(len(token)))
    return token[:i] + token[i].swapcase() + token[i + 1 :]


def _perturb_text(text: str, spec: PerturbationSpec, rng: np.random.Generator) -> str:
    pii_spans = [(f.start, f.end) for f in scan_pii(text)]

    def in_pii(start: int, end: int) -> bool:
        return any(start < pe and end > ps for ps, pe in pii_spans)

    tokens = [(m.start(), m.end(), m.group()) for m in _WORD.finditer(text)]
    eligible: list[int] = []
    for idx, (s, e, tok) in enumerate(tokens):
        if not tok.isalpha() or in_pii(s, e):
            continue
        if spec.kind is PerturbationKind.SYNONYM and tok.lower() not in spec.lexicon:
            continue
        if spec.kind is PerturbationKind.MISSPELL and len(tok) < 2:
            continue
        eligible.append(idx)
    n_touch = math.ceil(spec.rate * len(eligible))
    if n_touch == 0:
        return text
    picks = rng.choice(len(eligible), size=n_touch, replace=False)
    chosen = sorted(eligible[int(p)] for p in picks)
    out = text
    for idx in reversed(chosen):
        s, e, tok = tokens[idx]
        if spec.kind is PerturbationKind.SYNONYM:
            repl = _match_case(tok, spec.lexicon[tok.lower()])
        elif spec.kind is PerturbationKind.MISSPELL:
            repl = _one_edit(tok, rng)
        else:
            repl = _flip_case(tok, rng)
        out = out[:s] + repl + out[e:]
    return out


def perturb(text_or_contexts, spec: PerturbationSpec):
    """Apply one perturbation; output has the same shape as the input.

    rate=0 is the identity. retrieval_shuffle needs a list and returns a
    seeded permutation of it. Deterministic under (input, spec).
    """
    is_list = isinstance(text_or_contexts, (list, tuple))
    if spec.kind is PerturbationKind.RETRIEVAL_SHUFFLE:
        if not is_list:
            raise WrongShape("retrieval_shuffle requires a list of contexts")
        if spec.rate == 0.0:
            return list(text_or_contexts)
        rng = np.random.default_rng(spec.seed)
        order = rng.permutation(len(text_or_contexts))
        return [text_or_contexts[int(i)] for i in order]
    if spec.rate == 0.0:
        return list(text_or_contexts) if is_list else text_or_contexts
    rng = np.random.default_rng(spec.seed)
    if is_list:
        return [_perturb_text(t, spec, rng) for t in text_or_contexts]
    return _perturb_text(text_or_contexts, spec, rng)


def assemble_prompt(query: str, contexts) -> str:
    if contexts:
        return query + "\n\n" + "\n\n".join(contexts)
    return query


def _sample_seed(base: int, sample_id: str) -> int:
    return (base + endpoints._stable_hash(sample_id)) % 2**63


def robustness_run(
    samples: list[ValidationSample],
    model: EndpointSpec,
    specs: list[PerturbationSpec],
    embed_ep: EndpointSpec,
    decoding: DecodingParams | None = None,
    seed: int = 0,
    worst_k: int = 5,
) -> list[RobustnessResult]:
    """Generate on original and perturbed inputs with identical decoding
    and seed, then aggregate output similarity per perturbation."""
    if not samples:
        raise ValueError("robustness_run requires at least one sample")
    decoding = decoding or DecodingParams()
    results = []
    for spec in specs:
        sims: list[tuple[str, float]] = []
        for sample in samples:
            contexts = list(sample.contexts)
            if spec.kind is PerturbationKind.RETRIEVAL_SHUFFLE:
                p_query, p_contexts = sample.query, perturb(contexts, spec)
            else:
                p_query = perturb(sample.query, spec)
                p_contexts = perturb(contexts, spec) if contexts else []
            gen_seed = _sample_seed(seed, sample.id)
            original = endpoints.generate(
                model, assemble_prompt(sample.query, contexts), decoding, gen_seed
            )
            perturbed = endpoints.generate(
                model, assemble_prompt(p_query, p_contexts), decoding, gen_seed
            )
            sims.append((sample.id, metrics.text_similarity(original.text, perturbed.text, embed_ep)))
        mean_sim = sum(s for _, s in sims) / len(sims)
        worst = sorted(sims, key=lambda t: (t[1], t[0]))[:worst_k]
        results.append(
            RobustnessResult(
                kind=spec.kind,
                rate=spec.rate,
                n=len(sims),
                mean_output_similarity=mean_sim,
                worst_ids=tuple(sid for sid, _ in worst),
            )
        )
    return results


def weat_effect_size(
    X: list[str],
    Y: list[str],
    A: list[str],
    B: list[str],
    embed_ep: EndpointSpec,
) -> float:
    """Standardized association gap between target sets X, Y and attribute
    sets A, B: d = (mean_X s - mean_Y s) / popstd_{X u Y} s where
    s(w) = mean_a cos(w, a) - mean_b cos(w, b)."""
    if not (X and Y and A and B):
        raise ValueError("all four term sets must be non-empty")
    terms = list(dict.fromkeys([*X, *Y, *A, *B]))
    vecs = dict(zip(terms, endpoints.embed(embed_ep, terms)))

    def s(w: str) -> float:
        sim_a = [cosine_similarity(vecs[w], vecs[a]) for a in A]
        sim_b = [cosine_similarity(vecs[w], vecs[b]) for b in B]
        return sum(sim_a) / len(sim_a) - sum(sim_b) / len(sim_b)

    s_x = [s(w) for w in X]
    s_y = [s(w) for w in Y]
    std = float(np.std(s_x + s_y))
    if std == 0.0:
        raise ZeroVariance("association scores have zero variance")
    return (sum(s_x) / len(s_x) - sum(s_y) / len(s_y)) / std


def swap_terms(text: str, term_map: dict[str, str]) -> str:
    """Whole-word, case-preserving, bidirectional swap in a single pass."""
    two_way = {**{k.lower(): v for k, v in term_map.items()},
               **{v.lower(): k for k, v in term_map.items()}}
    if not two_way:
        return text
    pattern = re.compile(
        r"\b(" + "|".join(re.escape(t) for t in sorted(two_way, key=len, reverse=True)) + r")\b",
        re.IGNORECASE,
    )
    return pattern.sub(lambda m: _match_case(m.group(), two_way[m.group().lower()]), text)


def counterfactual_disparity(
    samples: list[ValidationSample],
    term_map: dict[str, str],
    model: EndpointSpec,
    scorer,
    decoding: DecodingParams | None = None,
    seed: int = 0,
) -> tuple[dict[str, dict], float]:
    """Score each affected sample on its original and group-swapped input
    (identical decoding and seed) and report the worst per-pair mean gap.

    scorer(sample, output_text) must return a float in [0, 1].
    """
    if not term_map:
        raise ValueError("term_map must be non-empty")
    decoding = decoding or DecodingParams()
    per_group: dict[str, dict] = {}
    max_gap = 0.0
    for a, b in term_map.items():
        pair = {a: b}
        originals, swapped_scores = [], []
        for sample in samples:
            text = assemble_prompt(sample.query, list(sample.contexts))
            swapped = swap_terms(text, pair)
            if swapped == text:
                continue
            gen_seed = _sample_seed(seed, sample.id)
            out_orig = endpoints.generate(model, text, decoding, gen_seed)
            out_swap = endpoints.generate(model, swapped, decoding, gen_seed)
            originals.append(scorer(sample, out_orig.text))
            swapped_scores.append(scorer(sample, out_swap.text))
        key = f"{a}<->{b}"
        if originals:
            mean_o = sum(originals) / len(originals)
            mean_s = sum(swapped_scores) / len(swapped_scores)
            gap = abs(mean_o - mean_s)
            per_group[key] = {
                "n": len(originals),
                "original_mean": mean_o,
                "swapped_mean": mean_s,
                "gap": gap,
            }
            max_gap = max(max_gap, gap)
        else:
            per_group[key] = {"n": 0, "original_mean": None, "swapped_mean": None, "gap": 0.0}
    return per_group, max_gap
