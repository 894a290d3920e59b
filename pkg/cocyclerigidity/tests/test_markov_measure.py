import numpy as np
import pytest

from cocyclerigidity.cocycles.builtin import full_shift, golden_mean_shift, two_cycle_shift
from cocyclerigidity.symbolic.markov_measure import (
    MarkovMeasure,
    cylinder_measure,
    entropy_rate,
    jacobian_s,
    jacobian_u,
    parry_measure,
    reversed_chain,
    sample_orbit,
    sample_orbits,
)
from cocyclerigidity.symbolic.sft_core import Word, iter_valid_words
from cocyclerigidity.utilities.exceptions import InvalidMeasureError, NotMixingError

GOLDEN_RATIO = (1 + np.sqrt(5)) / 2


def _measures():
    rng = np.random.default_rng(np.random.SeedSequence(11))
    for sft in (full_shift(), golden_mean_shift()):
        yield parry_measure(sft)
        for _ in range(3):
            yield MarkovMeasure.from_stochastic(sft, (rng.random((2, 2)) + 0.1) * sft.matrix)


def test_parry_measure_on_golden_mean():
    mu = parry_measure(golden_mean_shift())
    assert mu.stochastic[0, 0] == pytest.approx(1 / GOLDEN_RATIO, abs=1e-14)
    assert mu.stochastic[1, 0] == pytest.approx(1.0, abs=1e-14)
    assert entropy_rate(mu) == pytest.approx(np.log(GOLDEN_RATIO), abs=1e-12)


def test_parry_measure_on_full_shift_is_uniform():
    mu = parry_measure(full_shift(3))
    assert np.allclose(mu.stochastic, 1 / 3, atol=1e-14)
    assert np.allclose(mu.stationary, 1 / 3, atol=1e-14)
    assert entropy_rate(mu) == pytest.approx(np.log(3), abs=1e-12)


def test_parry_measure_needs_mixing_shift():
    with pytest.raises(NotMixingError):
        parry_measure(two_cycle_shift())


def test_measure_validation():
    sft = golden_mean_shift()
    with pytest.raises(InvalidMeasureError):
        MarkovMeasure(sft, np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.5, 0.5]))
    with pytest.raises(InvalidMeasureError):
        MarkovMeasure(sft, np.array([[0.5, 0.5], [1.0, 0.0]]), np.array([0.5, 0.5]))


@pytest.mark.parametrize("length", [1, 2, 3, 4])
def test_cylinder_measures_add_up(length):
    for mu in _measures():
        total = sum(cylinder_measure(mu, w) for w in iter_valid_words(mu.sft, [length]))
        assert total == pytest.approx(1.0, abs=1e-12)


def test_unstable_jacobian_identity_on_cylinders():
    # μ(K) equals J_u times the mass of the preimage cylinder through [j, K]
    for mu in _measures():
        sft = mu.sft
        for word in iter_valid_words(sft, range(1, 7)):
            for j in sft.predecessors(word[0]):
                y = sft.extend_word(Word((j,) + word, 0))
                lhs = cylinder_measure(mu, word)
                rhs = jacobian_u(mu, y) * cylinder_measure(mu, (j,) + word)
                assert abs(lhs - rhs) <= 1e-12 * max(1.0, lhs)


def test_stable_jacobian_identity_on_cylinders():
    for mu in _measures():
        sft = mu.sft
        for word in iter_valid_words(sft, range(1, 7)):
            for j in sft.successors(word[-1]):
                y = sft.extend_word(Word(word + (j,), -len(word) - 1))
                lhs = cylinder_measure(mu, word)
                rhs = jacobian_s(mu, y) * cylinder_measure(mu, word + (j,))
                assert abs(lhs - rhs) <= 1e-12 * max(1.0, lhs)


def test_reversed_chain_keeps_cylinder_masses():
    for mu in _measures():
        reverse = reversed_chain(mu)
        for word in iter_valid_words(mu.sft, range(1, 5)):
            assert cylinder_measure(reverse, word[::-1]) == pytest.approx(cylinder_measure(mu, word), abs=1e-14)


def test_sampling_is_deterministic_and_valid():
    mu = parry_measure(golden_mean_shift())
    first = sample_orbits(mu, 200, 5, seed=3, start_index=-1)
    second = sample_orbits(mu, 200, 5, seed=3, start_index=-1)
    assert first == second
    assert len({w.symbols for w in first}) > 1
    for word in first:
        assert word.start_index == -1
        assert len(word) == 200
        assert mu.sft.is_valid_word(word.symbols)
    assert sample_orbit(mu, 50, 9) == sample_orbit(mu, 50, 9)
    with pytest.raises(ValueError):
        sample_orbit(mu, 0, 1)


def test_sampled_frequencies_follow_stationary_vector():
    mu = parry_measure(golden_mean_shift())
    symbols = np.array(sample_orbit(mu, 20000, 5).symbols)
    assert np.mean(symbols == 1) == pytest.approx(mu.stationary[0], abs=0.02)
