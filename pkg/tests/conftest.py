"""Shared builders for small in-memory corpora."""

from __future__ import annotations

import random

import pytest

from resume_ner.corpus import (
    Dataset,
    Document,
    EntitySpan,
    EntityType,
    Provenance,
    Section,
    SectionKind,
)
from resume_ner.tagger import make_example


def section(text: str, spans=(), kind=SectionKind.SKILL, section_id="s1") -> Section:
    return Section(section_id=section_id, kind=kind, text=text, spans=tuple(spans))


def span(start: int, end: int, etype=EntityType.SKILL, provenance=Provenance.HUMAN) -> EntitySpan:
    return EntitySpan(start, end, etype, provenance)


def single_section_dataset(text: str, spans=(), kind=SectionKind.SKILL) -> Dataset:
    doc = Document("d1", "Ai Engineer", (section(text, spans, kind, "d1/s"),))
    return Dataset(documents=(doc,))


def toy_sections(n: int, seed: int = 0, prefix: str = "doc") -> list[Section]:
    """Separable corpus: every skillN token is a SKILL span, everything else O."""
    rng = random.Random(seed)
    fillers = ["uses", "ships", "enjoys", "maintains", "daily", "weekly"]
    sections = []
    for i in range(n):
        words, spans, cursor = [], [], 0
        for j in range(rng.randint(3, 7)):
            if rng.random() < 0.5:
                word = f"skill{rng.randint(0, 9)}"
                spans.append(EntitySpan(cursor, cursor + len(word), EntityType.SKILL))
            else:
                word = rng.choice(fillers)
            words.append(word)
            cursor += len(word) + 1
        sections.append(
            Section(f"{prefix}-{i}/skill", SectionKind.SKILL, " ".join(words), tuple(spans))
        )
    return sections


@pytest.fixture
def toy_examples():
    train = [make_example(s) for s in toy_sections(24, seed=1, prefix="train")]
    dev = [make_example(s) for s in toy_sections(8, seed=2, prefix="dev")]
    return train, dev
