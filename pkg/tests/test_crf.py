import itertools
import math

import numpy as np
import pytest

from seqtag import autograd as ag
from seqtag.crf import (
    CrfParameters,
    crf_nll_op,
    emissions_from_inputs,
    input_nll_and_gradient,
    log_partition,
    nll_and_gradient,
    sequence_score,
    viterbi,
)

# ---------------------------------------------------------------------------
# brute-force oracles: direct summation over explicit sequences, written
# independently of the lattice code
# ---------------------------------------------------------------------------


def brute_score(trans, emissions, y):
    T, K = emissions.shape
    total = trans[K, y[0]]
    for t in range(T):
        total += emissions[t, y[t]]
        if t > 0:
            total += trans[y[t - 1], y[t]]
    total += trans[y[-1], K]
    return total


def all_sequences(T, K):
    return itertools.product(range(K), repeat=T)


def brute_log_partition(trans, emissions):
    T, K = emissions.shape
    scores = [brute_score(trans, emissions, y) for y in all_sequences(T, K)]
    m = max(scores)
    return m + math.log(sum(math.exp(s - m) for s in scores))


def brute_best(trans, emissions):
    """(max score, lexicographically smallest argmax sequence)."""
    T, K = emissions.shape
    best_score, best_seq = -math.inf, None
    for y in all_sequences(T, K):  # lexicographic iteration order
        s = brute_score(trans, emissions, y)
        if s > best_score + 1e-12:
            best_score, best_seq = s, y
    return best_score, list(best_seq)


def random_instance(rng, T, K):
    trans = rng.normal(scale=1.5, size=(K + 1, K + 1))
    emissions = rng.normal(scale=1.5, size=(T, K))
    return CrfParameters(trans), emissions


class TestSequenceScore:
    def test_zero_params_score_zero(self):
        params = CrfParameters(np.zeros((4, 4)))
        emissions = np.zeros((5, 3))
        for y in ([0, 1, 2, 0, 1], [2, 2, 2, 2, 2]):
            assert sequence_score(params, emissions, y) == 0.0

    def test_single_token_zero_transitions(self):
        params = CrfParameters(np.zeros((4, 4)))
        emissions = np.array([[1.5, -2.0, 0.25]])
        for k in range(3):
            assert sequence_score(params, emissions, [k]) == emissions[0, k]

    def test_matches_hand_summed_factors(self):
        rng = np.random.default_rng(0)
        params, emissions = random_instance(rng, T=3, K=3)
        for y in all_sequences(3, 3):
            assert sequence_score(params, emissions, list(y)) == pytest.approx(
                brute_score(params.transitions, emissions, y), abs=1e-12
            )

    def test_length_mismatch(self):
        params = CrfParameters(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            sequence_score(params, np.zeros((2, 2)), [0])


class TestLogPartition:
    def test_uniform_model_counts_sequences(self):
        params = CrfParameters(np.zeros((4, 4)))
        assert log_partition(params, np.zeros((2, 3))) == pytest.approx(math.log(9))

    def test_single_position_reduces_to_logsumexp(self):
        rng = np.random.default_rng(1)
        params, emissions = random_instance(rng, T=1, K=4)
        trans = params.transitions
        expected = math.log(
            sum(math.exp(trans[4, k] + emissions[0, k] + trans[k, 4]) for k in range(4))
        )
        assert log_partition(params, emissions) == pytest.approx(expected, abs=1e-10)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            T, K = int(rng.integers(1, 6)), int(rng.integers(2, 5))
            params, emissions = random_instance(rng, T, K)
            assert log_partition(params, emissions) == pytest.approx(
                brute_log_partition(params.transitions, emissions), abs=1e-8
            )

    def test_column_shift_property(self):
        rng = np.random.default_rng(3)
        params, emissions = random_instance(rng, T=4, K=3)
        z0 = log_partition(params, emissions)
        y = [2, 0, 1, 1]
        s0 = sequence_score(params, emissions, y)
        v0 = viterbi(params, emissions)
        shifted = emissions.copy()
        shifted[2] += 0.75
        assert log_partition(params, shifted) == pytest.approx(z0 + 0.75, abs=1e-10)
        assert sequence_score(params, shifted, y) == pytest.approx(s0 + 0.75, abs=1e-10)
        assert viterbi(params, shifted) == v0


class TestNllAndGradient:
    def test_uniform_model_nll(self):
        params = CrfParameters(np.zeros((4, 4)))
        nll, _ = nll_and_gradient(params, np.zeros((2, 3)), [0, 1])
        assert nll == pytest.approx(2 * math.log(3))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(4)
        params, emissions = random_instance(rng, T=4, K=3)
        y = [0, 2, 1, 2]
        _, grads = nll_and_gradient(params, emissions, y)

        h = 1e-5

        def nll_at():
            return nll_and_gradient(params, emissions, y)[0]

        for arr, g in ((params.transitions, grads.transitions), (emissions, grads.emissions)):
            flat, gflat = arr.ravel(), g.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                hi = nll_at()
                flat[i] = orig - h
                lo = nll_at()
                flat[i] = orig
                numeric = (hi - lo) / (2 * h)
                denom = max(abs(numeric), abs(gflat[i]), 1e-8)
                assert abs(numeric - gflat[i]) / denom < 1e-4

    def test_transition_gradient_equals_enumerated_expectation(self):
        rng = np.random.default_rng(5)
        params, emissions = random_instance(rng, T=3, K=3)
        y = [1, 0, 2]
        _, grads = nll_and_gradient(params, emissions, y)

        # oracle: expected pair counts under the enumerated distribution
        trans = params.transitions
        log_z = brute_log_partition(trans, emissions)
        expected = np.zeros_like(trans)
        for seq in all_sequences(3, 3):
            p = math.exp(brute_score(trans, emissions, seq) - log_z)
            expected[3, seq[0]] += p
            for t in range(1, 3):
                expected[seq[t - 1], seq[t]] += p
            expected[seq[-1], 3] += p
        observed = np.zeros_like(trans)
        observed[3, y[0]] += 1
        observed[y[0], y[1]] += 1
        observed[y[1], y[2]] += 1
        observed[y[-1], 3] += 1
        np.testing.assert_allclose(grads.transitions, expected - observed, atol=1e-8)

    def test_probabilities_normalize(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            T, K = int(rng.integers(1, 5)), int(rng.integers(2, 4))
            params, emissions = random_instance(rng, T, K)
            log_z = log_partition(params, emissions)
            total = sum(
                math.exp(sequence_score(params, emissions, list(y)) - log_z)
                for y in all_sequences(T, K)
            )
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_score_bounded_by_partition(self):
        rng = np.random.default_rng(7)
        params, emissions = random_instance(rng, T=4, K=3)
        log_z = log_partition(params, emissions)
        for y in all_sequences(4, 3):
            assert sequence_score(params, emissions, list(y)) < log_z
        # K = 1: the only sequence carries all the mass
        params1 = CrfParameters(np.array([[0.3, -1.0], [2.0, 0.1]]))
        emissions1 = np.array([[0.5], [1.5], [-0.25]])
        assert sequence_score(params1, emissions1, [0, 0, 0]) == pytest.approx(
            log_partition(params1, emissions1), abs=1e-12
        )


class TestViterbi:
    def test_zero_params_tie_break_to_lowest_index(self):
        params = CrfParameters(np.zeros((5, 5)))
        assert viterbi(params, np.zeros((4, 4))) == [0, 0, 0, 0]

    def test_zero_transitions_factorizes(self):
        params = CrfParameters(np.zeros((4, 4)))
        emissions = np.array([[0.0, 2.0, 1.0], [3.0, 0.0, -1.0], [0.0, 0.5, 4.0]])
        assert viterbi(params, emissions) == [1, 0, 2]

    def test_matches_enumeration_on_random_instances(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            T, K = int(rng.integers(1, 7)), int(rng.integers(2, 5))
            params, emissions = random_instance(rng, T, K)
            best_score, best_seq = brute_best(params.transitions, emissions)
            got = viterbi(params, emissions)
            assert sequence_score(params, emissions, got) == pytest.approx(
                best_score, abs=1e-9
            )
            assert got == best_seq

    def test_ties_prefer_lexicographically_smallest(self):
        # two tags made fully symmetric: every maximizer has a mirror
        params = CrfParameters(np.zeros((3, 3)))
        emissions = np.tile(np.array([[1.0, 1.0]]), (3, 1))
        assert viterbi(params, emissions) == [0, 0, 0]

    def test_beats_random_sequences(self):
        rng = np.random.default_rng(9)
        params, emissions = random_instance(rng, T=8, K=4)
        best = sequence_score(params, emissions, viterbi(params, emissions))
        for _ in range(1000):
            y = rng.integers(0, 4, size=8)
            assert sequence_score(params, emissions, y) <= best + 1e-12


class TestInputPath:
    def test_emission_weight_gradient_by_finite_differences(self):
        rng = np.random.default_rng(10)
        K, D, T = 3, 5, 4
        params = CrfParameters(
            rng.normal(size=(K + 1, K + 1)), rng.normal(size=(K, D))
        )
        inputs = rng.normal(size=(T, D))
        y = [0, 2, 1, 1]
        _, grads = input_nll_and_gradient(params, inputs, y)

        h = 1e-5
        flat = params.emission_weights.ravel()
        gflat = grads.emission_weights.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = input_nll_and_gradient(params, inputs, y)[0]
            flat[i] = orig - h
            lo = input_nll_and_gradient(params, inputs, y)[0]
            flat[i] = orig
            numeric = (hi - lo) / (2 * h)
            denom = max(abs(numeric), abs(gflat[i]), 1e-8)
            assert abs(numeric - gflat[i]) / denom < 1e-4

    def test_lattice_shape(self):
        params = CrfParameters(np.zeros((3, 3)), np.ones((2, 4)))
        lattice = emissions_from_inputs(params, np.ones((5, 4)))
        assert lattice.shape == (5, 2)

    def test_missing_weights_rejected(self):
        params = CrfParameters(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            emissions_from_inputs(params, np.ones((2, 4)))


class TestGraphOp:
    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        K, T = 3, 4
        trans = rng.normal(size=(K + 1, K + 1))
        emissions = rng.normal(size=(T, K))
        y = [2, 0, 1, 0]

        e_leaf, t_leaf = ag.leaf(emissions.copy()), ag.leaf(trans.copy())
        ag.backward(crf_nll_op(e_leaf, t_leaf, y))

        h = 1e-5
        for arr, leaf_grad in ((emissions, e_leaf.grad), (trans, t_leaf.grad)):
            flat = arr.ravel()
            gflat = leaf_grad.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                hi = nll_and_gradient(CrfParameters(trans), emissions, y)[0]
                flat[i] = orig - h
                lo = nll_and_gradient(CrfParameters(trans), emissions, y)[0]
                flat[i] = orig
                numeric = (hi - lo) / (2 * h)
                assert abs(numeric - gflat[i]) / max(abs(numeric), abs(gflat[i]), 1e-8) < 1e-4

    def test_no_grad_mode(self):
        with ag.no_grad():
            out = crf_nll_op(ag.leaf(np.zeros((2, 2))), ag.leaf(np.zeros((3, 3))), [0, 1])
        assert not out.tracked
