"""Endpoint clients: chat generation, embeddings, NLI and toxicity classifiers.

Two transports. `mock` resolves a named behavior from the endpoint's
mock_script and is a pure function of (input, seed), so runs are
bit-reproducible across processes. `http` POSTs JSON to the configured
uri with bounded retries.

Mock behaviors are looked up in per-kind registries; tests may register
additional behaviors (e.g. counting wrappers) via the register_* helpers.
"""

from __future__ import annotations

import hashlib
import re
import threading
import time
from datetime import datetime, timezone
from typing import Callable

import httpx
import numpy as np

from .errors import DimensionMismatch, EmptyInput, EndpointRefused, EndpointUnreachable
from .types import (
    MOCK_EPOCH,
    DecodingParams,
    EndpointKind,
    EndpointSpec,
    Generation,
    NliVerdict,
    Transport,
)

DEFAULT_EMBED_DIM = 64
RETRY_ATTEMPTS = 2           # retries after the first try
RETRY_BACKOFF_S = 0.1        # doubled per retry
TRANSIENT_STATUSES = {502, 503, 504}

_TOKEN_RE = re.compile(r"[a-z0-9']+")


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _stable_hash(s: str) -> int:
    return int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "big")


# ---------------------------------------------------------------------------
# Mock behaviors
# ---------------------------------------------------------------------------

ChatFn = Callable[[str, DecodingParams, int], tuple[str, bool]]
EmbedFn = Callable[[list[str]], list[np.ndarray]]
NliFn = Callable[[str, str], NliVerdict]
ToxicityFn = Callable[[str], float]

_CHAT_BEHAVIORS: dict[str, Callable[[dict], ChatFn]] = {}
_EMBED_BEHAVIORS: dict[str, Callable[[dict], EmbedFn]] = {}
_NLI_BEHAVIORS: dict[str, Callable[[dict], NliFn]] = {}
_TOXICITY_BEHAVIORS: dict[str, Callable[[dict], ToxicityFn]] = {}


def register_chat_behavior(name: str):
    def deco(factory):
        _CHAT_BEHAVIORS[name] = factory
        return factory
    return deco


def register_embed_behavior(name: str):
    def deco(factory):
        _EMBED_BEHAVIORS[name] = factory
        return factory
    return deco


def register_nli_behavior(name: str):
    def deco(factory):
        _NLI_BEHAVIORS[name] = factory
        return factory
    return deco


def register_toxicity_behavior(name: str):
    def deco(factory):
        _TOXICITY_BEHAVIORS[name] = factory
        return factory
    return deco


@register_chat_behavior("echo")
def _echo_factory(script: dict) -> ChatFn:
    return lambda prompt, decoding, seed: (prompt, False)


@register_chat_behavior("canonical_echo")
def _canonical_echo_factory(script: dict) -> ChatFn:
    """Echo that canonicalizes case and token order; invariant under
    case noise and context reordering, used to pin degradation-zero tests."""

    def fn(prompt: str, decoding: DecodingParams, seed: int) -> tuple[str, bool]:
        return " ".join(sorted(set(_tokens(prompt)))), False

    return fn


@register_chat_behavior("canned")
def _canned_factory(script: dict) -> ChatFn:
    """Scripted responses: exact-prompt keys, sha256-of-prompt keys,
    substring rules, then a default. An empty response is a refusal."""
    responses: dict[str, str] = script.get("responses", {})
    rules: list[dict] = script.get("rules", [])
    default = script.get("default", "")

    def fn(prompt: str, decoding: DecodingParams, seed: int) -> tuple[str, bool]:
        if prompt in responses:
            text = responses[prompt]
        else:
            digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
            if digest in responses:
                text = responses[digest]
            else:
                for rule in rules:
                    if rule.get("contains", "") in prompt:
                        text = rule["text"]
                        break
                else:
                    text = default
        return text, text == ""

    return fn


@register_chat_behavior("choices")
def _choices_factory(script: dict) -> ChatFn:
    """Pick one of `choices` by a stable hash of (prompt, seed): same call
    twice is identical, different seeds vary."""
    choices: list[str] = script["choices"]

    def fn(prompt: str, decoding: DecodingParams, seed: int) -> tuple[str, bool]:
        idx = _stable_hash(f"{prompt}\x00{seed}") % len(choices)
        return choices[idx], False

    return fn


@register_chat_behavior("refuse")
def _refuse_factory(script: dict) -> ChatFn:
    return lambda prompt, decoding, seed: ("", True)


def hashed_bow_vector(text: str, dim: int = DEFAULT_EMBED_DIM) -> np.ndarray:
    """Signed-hash bag-of-tokens embedding, L2-normalized.

    Deterministic across processes (keyed on blake2b, not PYTHONHASHSEED)
    and cheap; preserves lexical-overlap ordering well enough for tests.
    Token-free text maps to the zero vector.
    """
    vec = np.zeros(dim, dtype=np.float64)
    for tok in _tokens(text):
        h = _stable_hash(tok)
        sign = 1.0 if (h >> 32) & 1 else -1.0
        vec[h % dim] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


@register_embed_behavior("hash_bow")
def _hash_bow_factory(script: dict) -> EmbedFn:
    dim = int(script.get("dim", DEFAULT_EMBED_DIM))
    return lambda texts: [hashed_bow_vector(t, dim) for t in texts]


@register_nli_behavior("lexical")
def _lexical_nli_factory(script: dict) -> NliFn:
    """Token-containment entailment: hypothesis tokens all present in the
    premise => entail, else neutral. Exact 0/1 masses keep score tests crisp."""

    def fn(premise: str, hypothesis: str) -> NliVerdict:
        hyp = set(_tokens(hypothesis))
        if hyp and hyp <= set(_tokens(premise)):
            return NliVerdict(1.0, 0.0, 0.0)
        return NliVerdict(0.0, 1.0, 0.0)

    return fn


@register_nli_behavior("scripted")
def _scripted_nli_factory(script: dict) -> NliFn:
    """Ordered rules matched on premise/hypothesis substrings; first hit wins.

    Rule keys: premise / hypothesis (exact), premise_contains /
    hypothesis_contains, and entail / neutral / contradict masses.
    """
    rules: list[dict] = script.get("rules", [])
    default = script.get("default", {"entail": 0.0, "neutral": 1.0, "contradict": 0.0})

    def verdict_of(d: dict) -> NliVerdict:
        return NliVerdict(d.get("entail", 0.0), d.get("neutral", 0.0), d.get("contradict", 0.0))

    def fn(premise: str, hypothesis: str) -> NliVerdict:
        for rule in rules:
            if "premise" in rule and rule["premise"] != premise:
                continue
            if "hypothesis" in rule and rule["hypothesis"] != hypothesis:
                continue
            if rule.get("premise_contains", "") not in premise:
                continue
            if rule.get("hypothesis_contains", "") not in hypothesis:
                continue
            return verdict_of(rule)
        return verdict_of(default)

    return fn


@register_toxicity_behavior("constant")
def _constant_tox_factory(script: dict) -> ToxicityFn:
    score = float(script.get("score", 0.0))
    return lambda text: score


@register_toxicity_behavior("scripted")
def _scripted_tox_factory(script: dict) -> ToxicityFn:
    rules: list[dict] = script.get("rules", [])
    default = float(script.get("default", 0.0))

    def fn(text: str) -> float:
        for rule in rules:
            if rule.get("contains", "") in text:
                return float(rule["score"])
        return default

    return fn


def _resolve(registry: dict, endpoint: EndpointSpec):
    script = endpoint.mock_script or {}
    name = script.get("behavior")
    if name not in registry:
        raise ValueError(f"endpoint {endpoint.id}: unknown mock behavior {name!r}")
    return registry[name](script)


# ---------------------------------------------------------------------------
# HTTP transport
# ---------------------------------------------------------------------------

_semaphores: dict[str, threading.BoundedSemaphore] = {}
_semaphores_lock = threading.Lock()


def _endpoint_semaphore(endpoint: EndpointSpec) -> threading.BoundedSemaphore:
    with _semaphores_lock:
        sem = _semaphores.get(endpoint.id)
        if sem is None:
            sem = threading.BoundedSemaphore(endpoint.max_parallel)
            _semaphores[endpoint.id] = sem
        return sem


def _post_json(endpoint: EndpointSpec, payload: dict, client: httpx.Client | None) -> dict:
    """POST with RETRY_ATTEMPTS retries and exponential backoff on transient
    failures, then EndpointUnreachable. Other non-2xx raise EndpointRefused."""
    own_client = client is None
    cli = client or httpx.Client(timeout=30.0)
    try:
        with _endpoint_semaphore(endpoint):
            delay = RETRY_BACKOFF_S
            last_exc: Exception | None = None
            for attempt in range(RETRY_ATTEMPTS + 1):
                try:
                    resp = cli.post(endpoint.uri, json=payload)
                except httpx.TransportError as exc:
                    last_exc = exc
                else:
                    if resp.status_code in TRANSIENT_STATUSES:
                        last_exc = EndpointRefused(
                            f"transient status {resp.status_code}", resp.status_code
                        )
                    elif resp.is_success:
                        return resp.json()
                    else:
                        raise EndpointRefused(
                            f"endpoint {endpoint.id} returned {resp.status_code}",
                            resp.status_code,
                        )
                if attempt < RETRY_ATTEMPTS:
                    time.sleep(delay)
                    delay *= 2
            raise EndpointUnreachable(
                f"endpoint {endpoint.id} unreachable after {RETRY_ATTEMPTS + 1} attempts: {last_exc}"
            )
    finally:
        if own_client:
            cli.close()


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def generate(
    endpoint: EndpointSpec,
    prompt: str,
    decoding: DecodingParams,
    seed: int,
    client: httpx.Client | None = None,
) -> Generation:
    """Run one generation; the returned Generation carries exactly the
    decoding and seed that were used."""
    if endpoint.kind is not EndpointKind.CHAT:
        raise ValueError(f"endpoint {endpoint.id} is {endpoint.kind.value}, need chat")
    if endpoint.transport is Transport.MOCK:
        text, refusal = _resolve(_CHAT_BEHAVIORS, endpoint)(prompt, decoding, seed)
        return Generation(
            text=text,
            decoding=decoding,
            seed=seed,
            endpoint_id=endpoint.id,
            created_at=MOCK_EPOCH,
            latency_ms=0,
            refusal=refusal,
        )
    started = time.monotonic()
    payload = {"prompt": prompt, "seed": seed, **decoding.to_dict()}
    body = _post_json(endpoint, payload, client)
    return Generation(
        text=body.get("text", ""),
        decoding=decoding,
        seed=seed,
        endpoint_id=endpoint.id,
        created_at=datetime.now(timezone.utc),
        latency_ms=int((time.monotonic() - started) * 1000),
        refusal=bool(body.get("refusal", False)),
    )


def embed(
    endpoint: EndpointSpec,
    texts: list[str],
    client: httpx.Client | None = None,
) -> list[np.ndarray]:
    """Embed a batch of texts; one vector per input, uniform dimension."""
    if endpoint.kind is not EndpointKind.EMBEDDING:
        raise ValueError(f"endpoint {endpoint.id} is {endpoint.kind.value}, need embedding")
    if not texts:
        raise EmptyInput("embed requires at least one text")
    if endpoint.transport is Transport.MOCK:
        vectors = _resolve(_EMBED_BEHAVIORS, endpoint)(texts)
    else:
        body = _post_json(endpoint, {"texts": texts}, client)
        vectors = [np.asarray(v, dtype=np.float64) for v in body["embeddings"]]
    if len(vectors) != len(texts):
        raise DimensionMismatch(
            f"endpoint {endpoint.id} returned {len(vectors)} vectors for {len(texts)} texts"
        )
    dims = {v.shape for v in vectors}
    if len(dims) > 1:
        raise DimensionMismatch(f"endpoint {endpoint.id} returned ragged vectors: {dims}")
    return vectors


def classify_nli(
    endpoint: EndpointSpec,
    premise: str,
    hypothesis: str,
    client: httpx.Client | None = None,
) -> NliVerdict:
    if endpoint.kind is not EndpointKind.NLI_CLASSIFIER:
        raise ValueError(f"endpoint {endpoint.id} is {endpoint.kind.value}, need nli_classifier")
    if endpoint.transport is Transport.MOCK:
        return _resolve(_NLI_BEHAVIORS, endpoint)(premise, hypothesis)
    body = _post_json(endpoint, {"premise": premise, "hypothesis": hypothesis}, client)
    return NliVerdict(body["entail"], body["neutral"], body["contradict"])


def classify_toxicity(
    endpoint: EndpointSpec,
    text: str,
    client: httpx.Client | None = None,
) -> float:
    if endpoint.kind is not EndpointKind.TOXICITY_CLASSIFIER:
        raise ValueError(
            f"endpoint {endpoint.id} is {endpoint.kind.value}, need toxicity_classifier"
        )
    if endpoint.transport is Transport.MOCK:
        score = _resolve(_TOXICITY_BEHAVIORS, endpoint)(text)
    else:
        score = float(_post_json(endpoint, {"text": text}, client)["score"])
    return float(min(1.0, max(0.0, score)))
