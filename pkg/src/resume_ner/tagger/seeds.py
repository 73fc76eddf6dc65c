"""Rule-based seed annotation: gazetteer lookup plus date patterns.

Gazetteer matching is case-insensitive and runs on token boundaries, so
"New York" beats "York" and punctuation never splits a hit.  Date spans come
from built-in patterns: a month name followed by a year, or a bare year;
ranges like "2018 - 2020" therefore yield two separate DATE spans.  Overlaps
between candidates are resolved longest-match-first, then leftmost.
"""

from __future__ import annotations

import re
from functools import lru_cache
from typing import Mapping, Sequence

from ..corpus import EntitySpan, EntityType, Provenance, Section
from ..data import load_terms
from ..textproc import tokenize

GAZETTEER_FILES = {
    EntityType.CITY: "cities.txt",
    EntityType.COUNTRY: "countries.txt",
    EntityType.LANGUAGE: "languages.txt",
    EntityType.DEGREE: "degrees.txt",
    EntityType.SKILL: "skills.txt",
}

_MONTH = (
    "January|February|March|April|May|June|July|August|September|October|"
    "November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec"
)
_YEAR = r"(?:19|20)\d{2}"

DEFAULT_DATE_PATTERNS: tuple[re.Pattern, ...] = (
    re.compile(rf"\b(?:{_MONTH})\.?\s+{_YEAR}\b", re.IGNORECASE),
    re.compile(rf"\b{_YEAR}\b"),
)


@lru_cache(maxsize=1)
def default_gazetteers() -> dict[EntityType, tuple[str, ...]]:
    return {etype: load_terms(name) for etype, name in GAZETTEER_FILES.items()}


def _term_index(
    gazetteers: Mapping[EntityType, Sequence[str]],
) -> dict[str, list[tuple[tuple[str, ...], EntityType]]]:
    """Lowercased token tuples per first token, longest terms first."""
    index: dict[str, list[tuple[tuple[str, ...], EntityType]]] = {}
    for etype in EntityType:  # fixed order keeps ambiguous terms deterministic
        for term in gazetteers.get(etype, ()):
            parts = tuple(tok.text.lower() for tok in tokenize(term))
            if parts:
                index.setdefault(parts[0], []).append((parts, etype))
    for candidates in index.values():
        candidates.sort(key=lambda c: -len(c[0]))
    return index


def seed_preannotate(
    section: Section,
    gazetteers: Mapping[EntityType, Sequence[str]] | None = None,
    date_patterns: Sequence[re.Pattern] | None = None,
) -> list[EntitySpan]:
    """Propose SEED-provenance spans for one section."""
    if gazetteers is None:
        gazetteers = default_gazetteers()
    if date_patterns is None:
        date_patterns = DEFAULT_DATE_PATTERNS

    tokens = tokenize(section.text)
    lower = [tok.text.lower() for tok in tokens]
    index = _term_index(gazetteers)

    # (start, end, type) candidates, possibly overlapping
    candidates: list[tuple[int, int, EntityType]] = []
    for i, first in enumerate(lower):
        for parts, etype in index.get(first, ()):
            k = len(parts)
            if i + k <= len(tokens) and tuple(lower[i : i + k]) == parts:
                candidates.append((tokens[i].start, tokens[i + k - 1].end, etype))
    for pattern in date_patterns:
        for match in pattern.finditer(section.text):
            candidates.append((match.start(), match.end(), EntityType.DATE))

    order = sorted(
        candidates,
        key=lambda c: (-(c[1] - c[0]), c[0], list(EntityType).index(c[2])),
    )
    chosen: list[tuple[int, int, EntityType]] = []
    for start, end, etype in order:
        if all(end <= s or start >= e for s, e, _ in chosen):
            chosen.append((start, end, etype))
    chosen.sort()
    return [EntitySpan(s, e, t, Provenance.SEED) for s, e, t in chosen]
