"""Offset-preserving tokenization and span <-> BIO tag conversion.

Tokenizer rule: split on whitespace, then peel single punctuation characters
from the set ``, . ; : ( ) [ ] "`` off chunk edges.  A leading dot stays
attached when a letter or digit follows it, and trailing ``+``/``#`` are never
peeled, so skill mentions like ``C++``, ``C#`` and ``.NET`` survive as single
tokens.  Interior punctuation is always kept (``Node.js``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import EntitySpan, EntityType, Provenance

_CHUNK = re.compile(r"\S+")
_DETACH = set(',.;:()[]"')

BOS = "<BOS>"
EOS = "<EOS>"


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid token offsets: ({self.start}, {self.end})")


def tokenize(text: str) -> list[Token]:
    """Split text into offset-carrying tokens; lossless for non-whitespace."""
    tokens: list[Token] = []
    for match in _CHUNK.finditer(text):
        lo, hi = match.start(), match.end()
        # peel leading punctuation (a dot glued to a word stays: ".NET")
        while hi - lo > 1:
            c = text[lo]
            if c not in _DETACH or (c == "." and text[lo + 1].isalnum()):
                break
            tokens.append(Token(c, lo, lo + 1))
            lo += 1
        # peel trailing punctuation
        tail: list[Token] = []
        while hi - lo > 1 and text[hi - 1] in _DETACH:
            tail.append(Token(text[hi - 1], hi - 1, hi))
            hi -= 1
        tokens.append(Token(text[lo:hi], lo, hi))
        tokens.extend(reversed(tail))
    return tokens


# ---------------------------------------------------------------------------
# BIO tags

OUTSIDE = "O"


def bio_tagset() -> tuple[str, ...]:
    """All 17 tags (O plus B/I per entity type), lexicographically sorted.

    The sorted order doubles as the decoder's index order, which makes
    "first argmax wins" equal to "lexicographically smallest tag wins".
    """
    tags = [OUTSIDE]
    for t in EntityType:
        tags.append(f"B-{t.value}")
        tags.append(f"I-{t.value}")
    return tuple(sorted(tags))


def split_tag(tag: str) -> tuple[str, EntityType | None]:
    """Return (prefix, entity type); ("O", None) for the outside tag."""
    if tag == OUTSIDE:
        return OUTSIDE, None
    if len(tag) > 2 and tag[1] == "-" and tag[0] in ("B", "I"):
        return tag[0], EntityType.parse(tag[2:])
    raise ValueError(f"unknown BIO tag: {tag!r}")


@dataclass(frozen=True)
class AlignmentWarning:
    """A span whose boundaries had to be adjusted (or dropped) to fit tokens."""

    span: EntitySpan
    snapped: tuple[int, int] | None
    message: str


def spans_to_tags(
    tokens: list[Token], spans: list[EntitySpan] | tuple[EntitySpan, ...]
) -> tuple[list[str], list[AlignmentWarning]]:
    """Encode spans as one BIO tag per token.

    Span boundaries that fall inside a token are snapped outward to the
    enclosing token boundaries and reported as warnings.  Spans covering no
    token at all, or colliding with an earlier span after snapping, are
    dropped with a warning.  Overlapping input spans are rejected.
    """
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise ValueError(
                f"overlapping spans: ({prev.start}, {prev.end}) and ({cur.start}, {cur.end})"
            )

    tags = [OUTSIDE] * len(tokens)
    warnings: list[AlignmentWarning] = []
    for span in ordered:
        covered = [
            i for i, tok in enumerate(tokens) if tok.start < span.end and tok.end > span.start
        ]
        if not covered:
            warnings.append(
                AlignmentWarning(span, None, "span covers no token; dropped")
            )
            continue
        first, last = covered[0], covered[-1]
        snapped = (tokens[first].start, tokens[last].end)
        if snapped != (span.start, span.end):
            warnings.append(
                AlignmentWarning(
                    span,
                    snapped,
                    f"span ({span.start}, {span.end}) snapped outward to {snapped}",
                )
            )
        if any(tags[i] != OUTSIDE for i in range(first, last + 1)):
            warnings.append(
                AlignmentWarning(span, snapped, "span collides with an earlier span after snapping; dropped")
            )
            continue
        tags[first] = f"B-{span.entity_type.value}"
        for i in range(first + 1, last + 1):
            tags[i] = f"I-{span.entity_type.value}"
    return tags, warnings


def tags_to_spans(
    tokens: list[Token],
    tags: list[str],
    provenance: Provenance = Provenance.MODEL,
) -> list[EntitySpan]:
    """Decode a BIO tag sequence into character-offset spans.

    Follows the usual lenient convention: an I-X with no live X run behind it
    opens a new span, and a type change inside an I run starts a new span.
    """
    if len(tokens) != len(tags):
        raise ValueError(f"length mismatch: {len(tokens)} tokens vs {len(tags)} tags")
    spans: list[EntitySpan] = []
    run_type: EntityType | None = None
    run_start = 0
    run_end = 0

    def close() -> None:
        nonlocal run_type
        if run_type is not None:
            spans.append(EntitySpan(run_start, run_end, run_type, provenance))
            run_type = None

    for tok, tag in zip(tokens, tags):
        prefix, entity_type = split_tag(tag)
        if prefix == OUTSIDE:
            close()
        elif prefix == "B" or entity_type is not run_type:
            close()
            run_type = entity_type
            run_start = tok.start
            run_end = tok.end
        else:
            run_end = tok.end
    close()
    return spans
