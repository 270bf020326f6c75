import pytest

from mrm.types import DecodingParams, EndpointKind, EndpointSpec


@pytest.fixture
def decoding():
    return DecodingParams(temperature=0.0, top_p=1.0, max_tokens=128)


@pytest.fixture
def echo_chat():
    return EndpointSpec(id="echo", kind=EndpointKind.CHAT, mock_script={"behavior": "echo"})


@pytest.fixture
def canonical_chat():
    return EndpointSpec(
        id="canonical", kind=EndpointKind.CHAT, mock_script={"behavior": "canonical_echo"}
    )


@pytest.fixture
def hash_embedder():
    return EndpointSpec(
        id="embedder", kind=EndpointKind.EMBEDDING, mock_script={"behavior": "hash_bow"}
    )


@pytest.fixture
def lexical_nli():
    return EndpointSpec(
        id="nli", kind=EndpointKind.NLI_CLASSIFIER, mock_script={"behavior": "lexical"}
    )


def scripted_nli(rules, default=None):
    script = {"behavior": "scripted", "rules": rules}
    if default is not None:
        script["default"] = default
    return EndpointSpec(id="nli-scripted", kind=EndpointKind.NLI_CLASSIFIER, mock_script=script)


def canned_chat(responses=None, rules=None, default=""):
    return EndpointSpec(
        id="canned",
        kind=EndpointKind.CHAT,
        mock_script={
            "behavior": "canned",
            "responses": responses or {},
            "rules": rules or [],
            "default": default,
        },
    )


def constant_toxicity(score):
    return EndpointSpec(
        id="tox",
        kind=EndpointKind.TOXICITY_CLASSIFIER,
        mock_script={"behavior": "constant", "score": score},
    )
