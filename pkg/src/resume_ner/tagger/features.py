"""Sparse per-token feature extraction for the perceptron tagger."""

from __future__ import annotations

from ..corpus import SectionKind
from ..textproc import BOS, EOS, Token


def word_shape(word: str) -> str:
    """Compressed shape: uppercase->X, lowercase->x, digit->d, runs collapsed.

    "Istanbul" -> "Xx", "2019" -> "d", "C++" -> "X++".
    """
    shape = []
    for ch in word:
        if ch.isupper():
            cls = "X"
        elif ch.islower():
            cls = "x"
        elif ch.isdigit():
            cls = "d"
        else:
            cls = ch
        if not shape or shape[-1] != cls:
            shape.append(cls)
    return "".join(shape)


def extract_features(tokens: list[Token], i: int, kind: SectionKind) -> tuple[str, ...]:
    """Deterministic feature strings for position i (implicit weight 1 each)."""
    if not (0 <= i < len(tokens)):
        raise IndexError(f"position {i} out of range for {len(tokens)} tokens")
    word = tokens[i].text
    lower = word.lower()
    prev_word = tokens[i - 1].text.lower() if i > 0 else BOS
    next_word = tokens[i + 1].text.lower() if i + 1 < len(tokens) else EOS

    features = [
        "bias",
        f"w={lower}",
        f"shape={word_shape(word)}",
        f"prev={prev_word}",
        f"next={next_word}",
        f"kind={kind.value}",
    ]
    for k in (1, 2, 3):
        if len(lower) >= k:
            features.append(f"pre{k}={lower[:k]}")
            features.append(f"suf{k}={lower[-k:]}")
    if word.isdigit():
        features.append("isdigit=true")
    return tuple(features)
