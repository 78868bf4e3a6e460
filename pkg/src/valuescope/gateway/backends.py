"""Backend contracts and their chat/HTTP implementations.

Every model the pipeline talks to sits behind one of six small protocols.
Remote implementations are non-deterministic (``deterministic = False``);
the offline stubs in :mod:`valuescope.gateway.stubs` are deterministic.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Mapping, Sequence
from typing import Protocol, runtime_checkable

from ..dimensions import get_dimension
from ..exceptions import ConfigError
from .client import ChatClient, HttpScoringTransport
from .prompts import (
    Choice,
    FewShotExample,
    parse_likert,
    parse_pairwise,
    render_likert_prompt,
    render_pairwise_prompt,
    render_rewrite_prompt,
)

Context = tuple[str, str]  # (post title, post description)


@runtime_checkable
class LikertRater(Protocol):
    def rate(self, comment: str, dimension: str, context: Context = ("", "")) -> int: ...


@runtime_checkable
class PairwiseJudge(Protocol):
    def judge(self, first: str, second: str, dimension: str, contexts: Sequence[Context] = (("", ""), ("", ""))) -> Choice: ...


@runtime_checkable
class RewriteGenerator(Protocol):
    def rewrite(self, comment: str, title: str, dimension: str, level: int) -> str: ...


@runtime_checkable
class PerplexityScorer(Protocol):
    def perplexity(self, text: str) -> float: ...


@runtime_checkable
class SimilarityScorer(Protocol):
    def similarity(self, a: str, b: str) -> float: ...


@runtime_checkable
class PreferenceBackend(Protocol):
    def score(self, text: str) -> float: ...


class ChatLikertRater:
    deterministic = False

    def __init__(self, client: ChatClient, temperature: float = 0.2):
        self.client = client
        self.temperature = temperature

    def rate(self, comment, dimension, context=("", "")):
        prompt = render_likert_prompt(dimension, comment, *context)
        return parse_likert(self.client.complete_text(prompt, self.temperature))


class ChatPairwiseJudge:
    """Few-shot pairwise judge; ``samples > 1`` turns on self-consistency voting."""

    deterministic = False

    def __init__(
        self,
        client: ChatClient,
        temperature: float = 0.2,
        examples: Mapping[str, Sequence[FewShotExample]] | None = None,
        samples: int = 1,
    ):
        if samples < 1 or samples % 2 == 0:
            raise ConfigError("self-consistency sample count must be a positive odd number")
        self.client = client
        self.temperature = temperature
        self.examples = dict(examples or {})
        self.samples = samples

    def judge(self, first, second, dimension, contexts=(("", ""), ("", ""))):
        name = get_dimension(dimension).name
        prompt = render_pairwise_prompt(name, first, second, contexts, self.examples.get(name, ()))
        votes = Counter(parse_pairwise(self.client.complete_text(prompt, self.temperature)) for _ in range(self.samples))
        return votes.most_common(1)[0][0]


class ChatRewriter:
    deterministic = False

    def __init__(self, client: ChatClient, temperature: float = 0.7):
        self.client = client
        self.temperature = temperature

    def rewrite(self, comment, title, dimension, level):
        dim = get_dimension(dimension)
        if not dim.rewritable:
            raise ConfigError(f"dimension {dim.name!r} is measured, not rewritten")
        return self.client.complete_text(render_rewrite_prompt(dim, level, title, comment), self.temperature).strip()


class RemotePerplexity:
    deterministic = False

    def __init__(self, transport: HttpScoringTransport):
        self.transport = transport

    def perplexity(self, text):
        return self.transport.score([text])[0]


class RemoteSimilarity:
    deterministic = False

    def __init__(self, transport: HttpScoringTransport):
        self.transport = transport

    def similarity(self, a, b):
        return self.transport.score([[a, b]])[0]


class RemotePreference:
    deterministic = False

    def __init__(self, transport: HttpScoringTransport):
        self.transport = transport

    def score(self, text):
        return self.transport.score([text])[0]
