"""Norm dimensions: bidirectional behavioural axes with five named levels."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .exceptions import ConfigError

LEVELS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class NormDimension:
    name: str
    pole_low: str
    pole_high: str
    levels: tuple[str, ...]
    definitions: tuple[str, ...] = ()
    pairwise_phrase: str = ""

    @property
    def rewritable(self) -> bool:
        # verbosity is measured from character counts, never rewritten
        return bool(self.definitions)

    def level_phrase(self, level: int) -> str:
        if level not in LEVELS:
            raise ConfigError(f"level must be in 1..5, got {level}")
        return self.levels[level - 1]

    def rating_definition(self) -> str:
        lines = [f'{i}. "{lvl}": {d}' for i, (lvl, d) in enumerate(zip(self.levels, self.definitions), 1)]
        return f'"{self.name}": """' + "\n".join(lines) + '"""'


@lru_cache(maxsize=None)
def _load() -> dict[str, NormDimension]:
    raw = json.loads(resources.files("valuescope.assets").joinpath("dimensions.json").read_text("utf-8"))
    return {
        name: NormDimension(
            name=name,
            pole_low=d["pole_low"],
            pole_high=d["pole_high"],
            levels=tuple(d["levels"]),
            definitions=tuple(d["definitions"]),
            pairwise_phrase=d["pairwise"],
        )
        for name, d in raw.items()
    }


def get_dimension(dimension: str | NormDimension) -> NormDimension:
    if isinstance(dimension, NormDimension):
        return dimension
    try:
        return _load()[dimension]
    except KeyError:
        raise ConfigError(f"unknown norm dimension {dimension!r}; known: {sorted(_load())}") from None


def dimension_names() -> list[str]:
    return list(_load())
