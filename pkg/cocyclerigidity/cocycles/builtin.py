"""Built-in shifts and generators used by the shipped configs and the tests."""
from typing import Mapping, Sequence

import numpy as np

from cocyclerigidity.cocycles.cocycle import LocallyConstantGenerator, WindowWord
from cocyclerigidity.symbolic.sft_core import Sft

ROTATION_ANGLES = (1.0, np.sqrt(2.0))
DEFAULT_CONJUGATOR = ((1.0, 0.3), (0.0, 1.0))


def full_shift(alphabet_size: int = 2, tau: float = 1.0) -> Sft:
    return Sft.from_matrix(np.ones((alphabet_size, alphabet_size), dtype=int), tau)


def golden_mean_shift(tau: float = 1.0) -> Sft:
    """Two symbols, the word 22 forbidden"""
    return Sft.from_matrix([[1, 1], [1, 0]], tau)


def two_cycle_shift(tau: float = 1.0) -> Sft:
    """Irreducible but not mixing: 1 and 2 alternate"""
    return Sft.from_matrix([[0, 1], [1, 0]], tau)


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _angles(sft: Sft, angles: Sequence[float]) -> dict[int, float]:
    return {a: angles[(a - 1) % len(angles)] for a in sft.symbols}


def orthogonal_generator(sft: Sft, angles: Sequence[float] = ROTATION_ANGLES) -> LocallyConstantGenerator:
    """A(x) = R(angle of x_0)"""
    by_symbol = _angles(sft, angles)
    return LocallyConstantGenerator.from_symbol_map(sft, {a: rotation(t) for a, t in by_symbol.items()})


def diagonal_generator(sft: Sft, entries: Sequence[float] = (2.0, 0.5)) -> LocallyConstantGenerator:
    return LocallyConstantGenerator.constant(sft, np.diag(entries))


def conjugated_rotation_generator(sft: Sft, S=DEFAULT_CONJUGATOR,
                                  angles: Sequence[float] = ROTATION_ANGLES) -> LocallyConstantGenerator:
    """A(x) = S R(x_0) S^{-1}, which preserves the constant field S^{-T} S^{-1}"""
    S = np.asarray(S, dtype=float)
    S_inv = np.linalg.inv(S)
    by_symbol = _angles(sft, angles)
    return LocallyConstantGenerator.from_symbol_map(sft, {a: S @ rotation(t) @ S_inv for a, t in by_symbol.items()})


def conformal_conjugate_generator(sft: Sft, Q: Mapping[int, np.ndarray],
                                  angles: Sequence[float] = ROTATION_ANGLES) -> LocallyConstantGenerator:
    """A(x) = Q(x_1) R(x_0) Q(x_0)^{-1}; the field Q(x_0)^{-T} Q(x_0)^{-1} is invariant"""
    by_symbol = _angles(sft, angles)

    def entry(word: WindowWord) -> np.ndarray:
        a, b = word
        return np.asarray(Q[b], dtype=float) @ rotation(by_symbol[a]) @ np.linalg.inv(np.asarray(Q[a], dtype=float))

    return LocallyConstantGenerator.from_function(sft, (0, 1), entry)


def default_conjugators(sft: Sft) -> dict[int, np.ndarray]:
    return {a: np.array([[1.0, 0.2 * a], [0.0, 1.0]]) @ np.diag([1.0 + 0.1 * a, 1.0 / (1.0 + 0.1 * a)])
            for a in sft.symbols}


def mixed_generator(sft: Sft) -> LocallyConstantGenerator:
    """Hyperbolic-ish shear on symbol 1, rotation elsewhere"""
    table = {a: rotation(ROTATION_ANGLES[1]) for a in sft.symbols}
    table[1] = np.array([[1.2, 0.3], [0.0, 1.0 / 1.2]])
    return LocallyConstantGenerator.from_symbol_map(sft, table)


def random_bunched_generator(sft: Sft, seed: int, dimension: int = 2, scale: float = 0.05,
                             window: tuple[int, int] = (0, 0)) -> LocallyConstantGenerator:
    """SL-valued near-identity entries I + scale·G, G standard normal"""
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def entry(word: WindowWord) -> np.ndarray:
        M = np.eye(dimension) + scale * rng.standard_normal((dimension, dimension))
        return M / abs(np.linalg.det(M)) ** (1.0 / dimension)

    return LocallyConstantGenerator.from_function(sft, window, entry)


def past_dependent_generator(sft: Sft) -> LocallyConstantGenerator:
    """Window (-1, 0) generator: shear direction set by x_{-1}"""
    def entry(word: WindowWord) -> np.ndarray:
        previous, current = word
        return np.array([[1.0, 0.1 * previous], [0.0, 1.0]]) @ rotation(ROTATION_ANGLES[current % 2])

    return LocallyConstantGenerator.from_function(sft, (-1, 0), entry)


def future_dependent_generator(sft: Sft) -> LocallyConstantGenerator:
    """Window (0, 1) generator: shear direction set by x_1"""
    def entry(word: WindowWord) -> np.ndarray:
        current, following = word
        return rotation(ROTATION_ANGLES[current % 2]) @ np.array([[1.0, 0.0], [0.1 * following, 1.0]])

    return LocallyConstantGenerator.from_function(sft, (0, 1), entry)
