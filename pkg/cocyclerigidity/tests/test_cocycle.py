import numpy as np
import pytest

from cocyclerigidity.cocycles.builtin import (
    conjugated_rotation_generator,
    diagonal_generator,
    full_shift,
    golden_mean_shift,
    mixed_generator,
    orthogonal_generator,
    past_dependent_generator,
    random_bunched_generator,
    rotation,
)
from cocyclerigidity.cocycles.cocycle import (
    LocallyConstantGenerator,
    block_log_distortion,
    distortion,
    distortion_birkhoff_sums,
    evaluate,
    iterate_generator,
    lipschitz_constant,
    log_condition,
    log_distortion_lipschitz,
    log_norm,
    log_norm_series,
    lyapunov_birkhoff,
    lyapunov_periodic,
    normalize_sl,
    normalize_unimodular,
    sup_log_distortion,
    sup_norm_bound,
)
from cocyclerigidity.symbolic.markov_measure import parry_measure
from cocyclerigidity.symbolic.sft_core import SymbolicPoint, Word, shift
from cocyclerigidity.utilities.exceptions import (
    BlockTooLargeError,
    InvalidGeneratorError,
    NegativeDeterminantError,
    NotPeriodicError,
)

POINT = SymbolicPoint.build((1, 2, 2), (2, 1, 1, 2), (1, 2), -3)


@pytest.mark.parametrize("m, n", [(3, 4), (0, 5), (-3, 7), (4, -6), (-2, -5)])
def test_cocycle_identity(m, n):
    gen = past_dependent_generator(full_shift())
    lhs = evaluate(gen, POINT, m + n)
    rhs = evaluate(gen, shift(POINT, n), m) @ evaluate(gen, POINT, n)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_negative_iterates_invert_forward_ones():
    gen = random_bunched_generator(full_shift(), seed=4, window=(-1, 1))
    for n in (1, 2, 9):
        back = evaluate(gen, POINT, -n)
        assert np.allclose(back @ evaluate(gen, shift(POINT, -n), n), np.eye(2), atol=1e-12)
    assert np.array_equal(evaluate(gen, POINT, 0), np.eye(2))


def test_log_norm_survives_long_products():
    gen = diagonal_generator(full_shift())
    assert log_norm(gen, POINT, 5000) == pytest.approx(5000 * np.log(2), rel=1e-12)
    forward, backward = log_norm_series(gen, POINT, 100)
    assert np.allclose(forward, np.arange(1, 101) * np.log(2), rtol=1e-12)
    assert np.allclose(backward, forward, rtol=1e-12)


def test_log_norm_matches_direct_product():
    gen = mixed_generator(golden_mean_shift())
    x = golden_mean_shift().extend_word(Word((1, 2, 1, 1, 2, 1, 1, 1, 2), 0))
    for n in (1, 7, 40, 70):
        direct = np.log(np.linalg.norm(evaluate(gen, x, n), 2))
        assert log_norm(gen, x, n) == pytest.approx(direct, rel=1e-10, abs=1e-10)


def test_lyapunov_periodic():
    pair = lyapunov_periodic(diagonal_generator(full_shift()), SymbolicPoint.constant(1), 1)
    assert pair.lambda_plus == pytest.approx(np.log(2), abs=1e-12)
    assert pair.lambda_minus == pytest.approx(-np.log(2), abs=1e-12)
    assert pair.gap == pytest.approx(2 * np.log(2), abs=1e-12)

    rotations = conjugated_rotation_generator(full_shift())
    for k, p in ((1, SymbolicPoint.constant(2)), (3, SymbolicPoint.periodic((1, 1, 2)))):
        assert abs(lyapunov_periodic(rotations, p, k).lambda_plus) <= 1e-8
    with pytest.raises(NotPeriodicError):
        lyapunov_periodic(rotations, SymbolicPoint.periodic((1, 2)), 1)


def test_lyapunov_birkhoff():
    sft = full_shift()
    mu = parry_measure(sft)
    isometric = lyapunov_birkhoff(orthogonal_generator(sft), mu, 200, 10, seed=1)
    assert abs(isometric.mean) <= 1e-12
    expanding = lyapunov_birkhoff(diagonal_generator(sft), mu, 200, 10, seed=1)
    assert expanding.mean == pytest.approx(np.log(2), abs=1e-12)
    assert expanding.samples == 10 and expanding.n == 200


def test_normalizations():
    sft = full_shift()
    gen = LocallyConstantGenerator.from_symbol_map(sft, {1: 3 * rotation(0.4), 2: np.diag([2.0, 4.0])})
    for M in normalize_sl(gen).table.values():
        assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-12)
    flipped = LocallyConstantGenerator.from_symbol_map(sft, {1: np.diag([-1.0, 2.0]), 2: np.eye(2)})
    with pytest.raises(NegativeDeterminantError):
        normalize_sl(flipped)
    for M in normalize_unimodular(flipped).table.values():
        assert abs(np.linalg.det(M)) == pytest.approx(1.0, abs=1e-12)


def test_iterate_generator_tables_products():
    sft = full_shift()
    gen = past_dependent_generator(sft)
    cube = iterate_generator(gen, 3)
    assert cube.window == (-1, 2)
    for word in sft.window_words(-1, 2):
        x = sft.extend_word(Word(word, -1))
        assert np.allclose(cube.at(x), evaluate(gen, x, 3), atol=1e-13)
    with pytest.raises(BlockTooLargeError):
        iterate_generator(gen, 13)


def test_distortion_blocks():
    gen = diagonal_generator(full_shift())
    assert block_log_distortion(gen, POINT, 5, 3) == pytest.approx(6 * np.log(2), abs=1e-12)
    assert distortion(gen, POINT, 4) == pytest.approx(2 * np.log(2), abs=1e-12)
    sums = distortion_birkhoff_sums(gen, POINT, 2, 5)
    assert np.allclose(sums, 4 * np.log(2) * np.arange(1, 6), atol=1e-12)
    assert block_log_distortion(orthogonal_generator(full_shift()), POINT, 0, 7) == pytest.approx(0.0, abs=1e-12)


def test_table_bounds():
    gen = diagonal_generator(full_shift())
    assert sup_norm_bound(gen) == pytest.approx(2.0)
    assert sup_log_distortion(gen) == pytest.approx(np.log(4))
    assert log_condition(np.diag([3.0, 0.5])) == pytest.approx(np.log(6))


def test_lipschitz_constants():
    sft = full_shift(tau=0.7)
    assert lipschitz_constant(diagonal_generator(sft)) == 0.0
    gen = orthogonal_generator(sft)
    # symbol-map generators differ at depth 0
    assert lipschitz_constant(gen) == pytest.approx(np.linalg.norm(gen.table[(1,)] - gen.table[(2,)], 2))
    future = LocallyConstantGenerator.from_function(sft, (0, 1), lambda w: np.diag([1.0 + w[1], 1.0]))
    assert lipschitz_constant(future) == pytest.approx(np.exp(0.7))
    assert log_distortion_lipschitz(future) == pytest.approx(np.log(3 / 2) * np.exp(0.7))


def test_generator_validation():
    sft = golden_mean_shift()
    with pytest.raises(InvalidGeneratorError):
        LocallyConstantGenerator(sft, (0, 1), {(1, 1): np.eye(2), (1, 2): np.eye(2)})
    with pytest.raises(InvalidGeneratorError):
        LocallyConstantGenerator(sft, (1, 2), {})
    with pytest.raises(InvalidGeneratorError):
        LocallyConstantGenerator.from_symbol_map(sft, {1: np.eye(2), 2: np.zeros((2, 2))})
    with pytest.raises(InvalidGeneratorError):
        LocallyConstantGenerator.from_symbol_map(sft, {1: np.eye(2), 2: np.eye(3)})
    with pytest.raises(InvalidGeneratorError):
        LocallyConstantGenerator(sft, (0, 1), {w: np.eye(2) for w in [(1, 1), (1, 2), (2, 1), (2, 2)]})
