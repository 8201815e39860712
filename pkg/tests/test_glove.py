import numpy as np
import pytest

from seqtag.errors import DataError
from seqtag.glove import (
    GloveParams,
    build_cooccurrence,
    count_vocabulary,
    fit_glove,
    train_glove,
)


def twin_corpus(seed=0, n_sentences=300, n_contexts=30):
    """Sentences where 'twina' and 'twinb' occur in identical contexts.

    Every sentence containing twina is duplicated with twinb substituted,
    so the two words have bitwise-identical co-occurrence rows.  Context
    words also appear in twin-free sentences so their own contexts vary.
    """
    rng = np.random.default_rng(seed)
    contexts = [f"ctx{i}" for i in range(n_contexts)]
    sentences = []
    for _ in range(n_sentences):
        picked = [contexts[i] for i in rng.integers(0, n_contexts, 4)]
        sentences.append([picked[0], picked[1], "twina", picked[2], picked[3]])
        sentences.append([picked[0], picked[1], "twinb", picked[2], picked[3]])
        filler = [contexts[i] for i in rng.integers(0, n_contexts, 5)]
        sentences.append(filler)
    return sentences, contexts


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


class TestCooccurrence:
    def test_adjacent_pair_counts(self):
        index = {"a": 0, "b": 1}
        cooc = build_cooccurrence([["a", "b"]], index, window=1)
        assert cooc[(0, 1)] == 1.0 and cooc[(1, 0)] == 1.0

    def test_inverse_distance_weighting(self):
        index = {"a": 0, "b": 1, "c": 2}
        cooc = build_cooccurrence([["a", "b", "c"]], index, window=5)
        assert cooc[(0, 2)] == pytest.approx(0.5)
        assert cooc[(0, 1)] == pytest.approx(1.0)

    def test_window_does_not_cross_sentences(self):
        index = {"a": 0, "b": 1}
        cooc = build_cooccurrence([["a"], ["b"]], index, window=5)
        assert cooc == {}

    def test_symmetry(self):
        sentences, _ = twin_corpus(seed=1, n_sentences=20)
        vocab = count_vocabulary(sentences, 1)
        index = {w: i for i, w in enumerate(vocab)}
        cooc = build_cooccurrence(sentences, index, window=4)
        for (i, j), x in cooc.items():
            assert cooc[(j, i)] == pytest.approx(x)

    def test_twins_have_identical_rows(self):
        sentences, _ = twin_corpus(seed=2, n_sentences=50)
        vocab = count_vocabulary(sentences, 1)
        index = {w: i for i, w in enumerate(vocab)}
        cooc = build_cooccurrence(sentences, index, window=10)
        a, b = index["twina"], index["twinb"]
        row_a = {j: x for (i, j), x in cooc.items() if i == a and j not in (a, b)}
        row_b = {j: x for (i, j), x in cooc.items() if i == b and j not in (a, b)}
        assert row_a == row_b


class TestTraining:
    def test_minimal_two_word_corpus(self):
        params = GloveParams(dim=4, window=1, iterations=5, seed=0)
        table = train_glove([["a", "b"]] * 3, params)
        assert set(table.entries) == {"a", "b"}
        assert table.dim == 4

    def test_output_dimensionality(self):
        params = GloveParams(dim=50, window=2, iterations=2, seed=0)
        table = train_glove([["a", "b", "c", "a"]] * 2, params)
        for vec in table.entries.values():
            assert vec.shape == (50,)

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError):
            train_glove([], GloveParams())
        with pytest.raises(DataError):
            train_glove([["rare"]], GloveParams(min_count=2))

    def test_deterministic_for_fixed_seed(self):
        sentences, _ = twin_corpus(seed=4, n_sentences=30)
        params = GloveParams(dim=8, window=4, iterations=3, seed=11)
        t1, h1 = fit_glove(sentences, params)
        t2, h2 = fit_glove(sentences, params)
        assert h1 == h2
        for w in t1.entries:
            assert t1.entries[w].tobytes() == t2.entries[w].tobytes()

    def test_min_count_filters_vocabulary(self):
        sentences = [["a", "b"], ["a", "c"], ["a", "b"]]
        assert count_vocabulary(sentences, 2) == ["a", "b"]

    def test_objective_non_increasing_on_twin_corpus(self):
        sentences, _ = twin_corpus(seed=5)
        params = GloveParams(dim=16, window=5, iterations=25, seed=1)
        _, history = fit_glove(sentences, params)
        assert len(history) == 25
        for prev, cur in zip(history, history[1:]):
            assert cur <= prev + 1e-12

    def test_twins_end_up_similar(self):
        sentences, contexts = twin_corpus(seed=6)
        params = GloveParams(dim=16, window=5, iterations=40, seed=2)
        table = train_glove(sentences, params)
        a, b = table.entries["twina"], table.entries["twinb"]
        twin_sim = cosine(a, b)
        others = [cosine(a, table.entries[c]) for c in contexts]
        beaten = sum(1 for s in others if twin_sim > s)
        assert beaten / len(others) >= 0.95
