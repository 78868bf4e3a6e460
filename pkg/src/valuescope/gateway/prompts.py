"""Prompt templates and response parsers.

Templates are text assets with ``{{NAME}}`` slot markers. Literal single
braces (the pairwise answer tokens ``{1}``/``{2}``) are left untouched.
"""

from __future__ import annotations

import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Literal

from ..dimensions import NormDimension, get_dimension
from ..exceptions import BindingError, ParseError

SLOT = re.compile(r"\{\{([A-Za-z0-9_\- ]+)\}\}")

Choice = Literal["first", "second"]


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    slots: tuple[str, ...] = field(default=())
    dimension: str | None = None

    def __post_init__(self):
        found = tuple(dict.fromkeys(SLOT.findall(self.body)))
        if not self.slots:
            object.__setattr__(self, "slots", found)
        else:
            undeclared = [s for s in found if s not in self.slots]
            if undeclared:
                raise BindingError(f"template {self.name!r} references undeclared slot(s): {', '.join(undeclared)}")


def render_prompt(template: PromptTemplate, slots: Mapping[str, str]) -> str:
    """Substitute every declared slot in a single pass.

    Values are inserted verbatim, so slot-like text inside a value is not
    expanded a second time.
    """
    for name in template.slots:
        if name not in slots:
            raise BindingError(f"missing slot {name}")
    return SLOT.sub(lambda m: str(slots[m.group(1)]), template.body)


@lru_cache(maxsize=None)
def load_template(name: str) -> PromptTemplate:
    body = resources.files("valuescope.assets").joinpath("prompts", f"{name}.txt").read_text("utf-8")
    return PromptTemplate(name=name, body=body.rstrip("\n"))


def render_rewrite_prompt(dimension: str | NormDimension, level: int, title: str, comment: str) -> str:
    dim = get_dimension(dimension)
    return render_prompt(
        load_template("rewrite"),
        {
            "RATING DEFINITION": dim.rating_definition(),
            "LIKERT SCALE NORMNESS": dim.level_phrase(level),
            "NORM DIMENSION": dim.name,
            "POST TITLE": title,
            "COMMENT BODY": comment,
        },
    )


def render_likert_prompt(dimension: str | NormDimension, comment: str, title: str = "", description: str = "") -> str:
    dim = get_dimension(dimension)
    return render_prompt(
        load_template("likert_rating"),
        {
            "DIMENSION": dim.name.upper(),
            "DIMENSION-5POINT-LIKERT-SCALE": dim.rating_definition(),
            "TITLE": title,
            "DESCRIPTION": description,
            "COMMENT": comment,
        },
    )


@dataclass(frozen=True)
class FewShotExample:
    title1: str
    description1: str
    comment1: str
    title2: str
    description2: str
    comment2: str
    answer: str


def render_pairwise_prompt(
    dimension: str | NormDimension,
    first: str,
    second: str,
    contexts: Sequence[tuple[str, str]] = (("", ""), ("", "")),
    examples: Sequence[FewShotExample] = (),
) -> str:
    dim = get_dimension(dimension)
    example_tpl = load_template("pairwise_example")
    blocks = [
        render_prompt(
            example_tpl,
            {
                "N": str(i),
                "TITLE1": ex.title1,
                "DESCRIPTION1": ex.description1,
                "COMMENT1": ex.comment1,
                "TITLE2": ex.title2,
                "DESCRIPTION2": ex.description2,
                "COMMENT2": ex.comment2,
                "ANSWER": ex.answer,
            },
        )
        for i, ex in enumerate(examples, 1)
    ]
    (t1, d1), (t2, d2) = contexts
    return render_prompt(
        load_template("pairwise_judge"),
        {
            "DIMENSION": dim.name.upper(),
            "DIMENSION_PAIRWISE": dim.pairwise_phrase,
            "DIMENSION_DEFINITION": dim.rating_definition(),
            "EXAMPLES": "\n\n".join(blocks),
            "TITLE1": t1,
            "DESCRIPTION1": d1,
            "COMMENT1": first,
            "TITLE2": t2,
            "DESCRIPTION2": d2,
            "COMMENT2": second,
        },
    )


_BRACKETED_INT = re.compile(r"\[\s*(-?\d+)\s*\]")
_PAIRWISE = re.compile(r'^\s*["\']?\{\s*([12])\s*\}')


def parse_likert(response: str) -> int:
    """Return the first bracketed integer, which must lie in 1..5."""
    m = _BRACKETED_INT.search(response)
    if m is None:
        raise ParseError("no bracketed rating in response")
    rating = int(m.group(1))
    if not 1 <= rating <= 5:
        raise ParseError(f"rating {rating} outside 1..5")
    return rating


def parse_pairwise(response: str) -> Choice:
    m = _PAIRWISE.match(response)
    if m is None:
        raise ParseError("response does not start with {1} or {2}")
    return "first" if m.group(1) == "1" else "second"
