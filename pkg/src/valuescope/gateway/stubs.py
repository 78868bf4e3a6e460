"""Deterministic offline backends.

These are crude on purpose. They let every stage run without network access
and give bit-reproducible output, which is what the tests and the desk
fixture need; they say nothing about real comment style.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections.abc import Mapping
from functools import lru_cache

from ..dimensions import get_dimension
from ..exceptions import ConfigError, ParseError

LEXICON: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    # dimension: (low-pole markers, high-pole markers)
    "formality": (
        ("lol", "lmao", "tbh", "gonna", "wanna", "ya", "u", "ur", "omg", "idk", "dude", "yeah", "nah", "kinda"),
        ("therefore", "however", "furthermore", "appreciate", "regards", "indeed", "consequently", "sincerely", "thank you", "kindly"),
    ),
    "supportiveness": (
        ("idiot", "stupid", "dumb", "trash", "shut up", "pathetic", "garbage", "loser", "moron", "clueless"),
        ("great", "love", "awesome", "thanks", "helpful", "good luck", "proud", "you got this", "wonderful", "glad"),
    ),
    "sarcasm": (
        ("honestly", "sincerely", "truly", "genuinely", "in my experience", "i believe"),
        ("oh sure", "yeah right", "totally", "obviously", "what a surprise", "genius", "/s", "shocking"),
    ),
    "politeness": (
        ("shut up", "get out", "whatever", "nobody asked", "wrong", "ridiculous"),
        ("please", "thank you", "sorry", "would you", "perhaps", "kindly", "if you don't mind", "i appreciate"),
    ),
    "humor": (
        ("seriously", "important", "concern", "unfortunately", "carefully", "risk"),
        ("lol", "haha", "lmao", "joke", "funny", "hilarious", "banana", "lmfao"),
    ),
}

_PATTERNS = {
    dim: tuple(
        tuple(re.compile(r"(?<![\w/])" + re.escape(w) + r"(?![\w])") for w in words) for words in poles
    )
    for dim, poles in LEXICON.items()
}


def _unit(*parts: object) -> float:
    """Uniform [0, 1) number derived from a hash of ``parts``."""
    h = hashlib.sha256("\x1f".join(map(str, parts)).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big") / 2**64


def tokens(text: str) -> list[str]:
    return re.findall(r"[\w']+", text.lower())


def lexicon_score(text: str, dimension: str) -> float:
    """(high markers - low markers) / sqrt(1 + token count)."""
    return _lexicon_score(text, get_dimension(dimension).name)


@lru_cache(maxsize=1 << 16)
def _lexicon_score(text: str, name: str) -> float:
    if name == "verbosity":
        return float(len(text))
    low, high = _PATTERNS[name]
    lowered = text.lower()
    n_low = sum(len(p.findall(lowered)) for p in low)
    n_high = sum(len(p.findall(lowered)) for p in high)
    return (n_high - n_low) / math.sqrt(1 + len(tokens(text)))


class LexiconJudge:
    """Picks the comment with the higher lexicon score; ties broken by text hash."""

    deterministic = True

    def judge(self, first, second, dimension, contexts=(("", ""), ("", ""))):
        a, b = lexicon_score(first, dimension), lexicon_score(second, dimension)
        if a == b:
            a, b = _unit("tie", first), _unit("tie", second)
        return "second" if b > a else "first"


class CharCountRater:
    """Likert rating from comment length: one point per 40 characters."""

    deterministic = True

    def __init__(self, chars_per_point: int = 40):
        self.chars_per_point = chars_per_point

    def rate(self, comment, dimension="verbosity", context=("", "")):
        return max(1, min(5, 1 + len(comment) // self.chars_per_point))


class LexiconRater:
    """Likert rating from the lexicon score; length-based for verbosity."""

    deterministic = True

    def __init__(self, points_per_unit: float = 3.0):
        self.points_per_unit = points_per_unit
        self._length = CharCountRater()

    def rate(self, comment, dimension, context=("", "")):
        if get_dimension(dimension).name == "verbosity":
            return self._length.rate(comment)
        return max(1, min(5, 3 + round(self.points_per_unit * lexicon_score(comment, dimension))))


class EchoRewriter:
    deterministic = True

    def rewrite(self, comment, title, dimension, level):
        if not get_dimension(dimension).rewritable:
            raise ConfigError(f"dimension {dimension!r} is measured, not rewritten")
        return f"[L{level}] {comment}"


class LexiconRewriter:
    """Adds low- or high-pole markers so the lexicon judge can see the shift."""

    deterministic = True

    def rewrite(self, comment, title, dimension, level):
        dim = get_dimension(dimension)
        if not dim.rewritable:
            raise ConfigError(f"dimension {dim.name!r} is measured, not rewritten")
        low, high = LEXICON[dim.name]
        words = low if level < 3 else high
        k = abs(level - 3)
        picks = [words[int(_unit(comment, dim.name, level, i) * len(words))] for i in range(k)]
        if level == 3:
            return f"Well, {comment}"
        if level < 3:
            return " ".join(picks) + " " + comment
        return comment + " " + " ".join(picks)


class HashPerplexity:
    """Positive pseudo-perplexity in [20, 400) from a text hash."""

    deterministic = True

    def perplexity(self, text):
        return math.exp(math.log(20) + _unit("ppl", text) * math.log(20))


class ConstantPerplexity:
    deterministic = True

    def __init__(self, value: float = 50.0):
        self.value = value

    def perplexity(self, text):
        return self.value


class TokenOverlapSimilarity:
    """Jaccard overlap of lower-cased word sets; 1.0 for identical texts."""

    deterministic = True

    def similarity(self, a, b):
        ta, tb = set(tokens(a)), set(tokens(b))
        if not ta and not tb:
            return 1.0
        return len(ta & tb) / len(ta | tb)


class LexiconPreference:
    """Preference = length term + weighted lexicon scores of the comment part.

    Reads only the comment segment of a built model input, so the context
    fields do not move the score.
    """

    deterministic = True

    def __init__(self, weights: Mapping[str, float] | None = None, length_weight: float = 0.5, noise: float = 0.0):
        self.weights = dict(weights or {})
        self.length_weight = length_weight
        self.noise = noise

    def score(self, text):
        from ..preference import comment_part

        comment = comment_part(text)
        value = self.length_weight * math.log1p(len(comment))
        for dim, w in sorted(self.weights.items()):
            value += w * lexicon_score(comment, dim)
        if self.noise:
            value += self.noise * (2 * _unit("pref", comment) - 1)
        return value


class LengthPreference:
    deterministic = True

    def score(self, text):
        from ..preference import comment_part

        return math.log1p(len(comment_part(text)))


class ScriptedChat:
    """Transport that replays canned responses; raises when a response is an exception."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = 0

    def __call__(self, request):
        item = self.responses[min(self.calls, len(self.responses) - 1)]
        self.calls += 1
        if isinstance(item, BaseException):
            raise item
        if isinstance(item, dict):
            return item
        return {"text": item, "input_tokens": None, "output_tokens": None}


class FlakyJudge:
    """Wraps a judge and fails with a parse error for the first ``failures`` calls per pair."""

    deterministic = True

    def __init__(self, inner, failures: int):
        self.inner = inner
        self.failures = failures
        self.seen: dict[tuple[str, str], int] = {}

    def judge(self, first, second, dimension, contexts=(("", ""), ("", ""))):
        key = tuple(sorted((first, second)))
        self.seen[key] = self.seen.get(key, 0) + 1
        if self.seen[key] <= self.failures:
            raise ParseError("unparsable judge output")
        return self.inner.judge(first, second, dimension, contexts)
