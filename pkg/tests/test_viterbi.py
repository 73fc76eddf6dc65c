"""Decoder correctness against exhaustive enumeration, on both backends."""

import itertools

import numpy as np
import pytest

from resume_ner.tagger.viterbi import (
    HAS_NUMBA,
    TransitionMask,
    decode_indices,
    viterbi_decode,
)
from resume_ner.textproc import bio_tagset

BACKENDS = ["numpy"] + (["numba"] if HAS_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    monkeypatch.setenv("RESUME_NER_BACKEND", request.param)
    return request.param


def brute_force(emissions, transitions, mask):
    """Enumerate every legal sequence; first maximum wins (lexicographic)."""
    n, t = emissions.shape
    best_score, best_path = -np.inf, None
    for path in itertools.product(range(t), repeat=n):
        if not mask.start_allowed[path[0]]:
            continue
        if any(not mask.allowed[a, b] for a, b in zip(path, path[1:])):
            continue
        score = emissions[range(n), path].sum()
        score += sum(transitions[a, b] for a, b in zip(path, path[1:]))
        if score > best_score:
            best_score, best_path = score, path
    return np.array(best_path), best_score


def small_mask(n_tags: int) -> TransitionMask:
    tags = tuple(bio_tagset()[:n_tags])
    return TransitionMask.for_tags(tags)


class TestAgainstEnumeration:
    def test_random_instances_match_brute_force(self, backend):
        rng = np.random.default_rng(123)
        mask = small_mask(5)
        transitions = rng.normal(size=(5, 5))
        for _ in range(250):
            n = rng.integers(1, 7)
            emissions = rng.normal(size=(n, 5))
            path, score = decode_indices(emissions, transitions, mask)
            ref_path, ref_score = brute_force(emissions, transitions, mask)
            assert score == pytest.approx(ref_score)
            assert (path == ref_path).all()
            assert mask.violations(path) == 0

    def test_integer_scores_tie_break_lexicographic(self, backend):
        # all-zero scores: every legal sequence ties; smallest tag string wins
        mask = small_mask(5)
        path, _ = decode_indices(np.zeros((3, 5)), np.zeros((5, 5)), mask)
        ref_path, _ = brute_force(np.zeros((3, 5)), np.zeros((5, 5)), mask)
        assert (path == ref_path).all()


class TestMaskRules:
    def test_all_o_when_o_dominates(self, backend):
        tags = bio_tagset()
        mask = TransitionMask.for_tags(tags)
        emissions = np.zeros((4, len(tags)))
        emissions[:, tags.index("O")] = 5.0
        decoded, _ = viterbi_decode(emissions, np.zeros((len(tags), len(tags))), mask)
        assert decoded == ["O", "O", "O", "O"]

    def test_sequence_never_starts_inside_a_span(self, backend):
        tags = bio_tagset()
        mask = TransitionMask.for_tags(tags)
        emissions = np.zeros((2, len(tags)))
        emissions[0, tags.index("I-SKILL")] = 100.0
        decoded, _ = viterbi_decode(emissions, np.zeros((len(tags), len(tags))), mask)
        assert decoded[0] != "I-SKILL"

    def test_inside_tag_only_follows_its_own_type(self):
        tags = bio_tagset()
        mask = TransitionMask.for_tags(tags)
        b_city = tags.index("B-CITY")
        assert not mask.allowed[tags.index("O"), tags.index("I-CITY")]
        assert not mask.allowed[b_city, tags.index("I-SKILL")]
        assert mask.allowed[b_city, tags.index("I-CITY")]
        assert mask.allowed[tags.index("I-CITY"), tags.index("I-CITY")]

    def test_decoded_paths_respect_mask_on_random_scores(self, backend):
        rng = np.random.default_rng(5)
        tags = bio_tagset()
        mask = TransitionMask.for_tags(tags)
        transitions = rng.normal(size=(len(tags), len(tags)))
        for _ in range(50):
            emissions = rng.normal(size=(rng.integers(1, 30), len(tags))) * 10
            path, _ = decode_indices(emissions, transitions, mask)
            assert mask.violations(path) == 0


class TestErrors:
    def test_empty_matrix_rejected(self):
        mask = small_mask(3)
        with pytest.raises(ValueError, match="non-empty"):
            decode_indices(np.zeros((0, 3)), np.zeros((3, 3)), mask)

    def test_dimension_mismatch(self):
        mask = small_mask(3)
        with pytest.raises(ValueError, match="mismatch"):
            decode_indices(np.zeros((2, 4)), np.zeros((3, 3)), mask)
        with pytest.raises(ValueError, match="mismatch"):
            decode_indices(np.zeros((2, 3)), np.zeros((4, 4)), mask)

    def test_invalid_backend_env(self, monkeypatch):
        monkeypatch.setenv("RESUME_NER_BACKEND", "cuda")
        mask = small_mask(3)
        with pytest.raises(ValueError, match="RESUME_NER_BACKEND"):
            decode_indices(np.zeros((1, 3)), np.zeros((3, 3)), mask)


def test_backends_agree_bitwise():
    if not HAS_NUMBA:
        pytest.skip("numba unavailable")
    rng = np.random.default_rng(9)
    tags = bio_tagset()
    mask = TransitionMask.for_tags(tags)
    transitions = rng.normal(size=(len(tags), len(tags)))
    import os

    for _ in range(25):
        emissions = rng.normal(size=(rng.integers(1, 20), len(tags)))
        os.environ["RESUME_NER_BACKEND"] = "numba"
        try:
            p1, s1 = decode_indices(emissions, transitions, mask)
            os.environ["RESUME_NER_BACKEND"] = "numpy"
            p2, s2 = decode_indices(emissions, transitions, mask)
        finally:
            del os.environ["RESUME_NER_BACKEND"]
        assert (p1 == p2).all()
        assert s1 == s2
