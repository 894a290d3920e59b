"""Markov measures compatible with a shift, their cylinder weights and Jacobians.

Sampling uses numpy's PCG64 ``Generator``. A seed is turned into a
``SeedSequence``; batch samplers spawn one child sequence per orbit so that
orbit ``i`` depends only on (seed, i).
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.stats as stats
from loguru import logger

from cocyclerigidity.configuration.constants import STOCHASTIC_TOLERANCE
from cocyclerigidity.symbolic.sft_core import Sft, SymbolicPoint, Word, mixing_index
from cocyclerigidity.utilities.exceptions import InvalidMeasureError, NotMixingError

SeedLike = int | np.random.SeedSequence


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    sft: Sft
    stochastic: np.ndarray
    stationary: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.stochastic, dtype=float)
        pi = np.asarray(self.stationary, dtype=float)
        object.__setattr__(self, 'stochastic', P)
        object.__setattr__(self, 'stationary', pi)
        ell = self.sft.alphabet_size
        if P.shape != (ell, ell) or pi.shape != (ell,):
            raise InvalidMeasureError(f"Expected a {ell}x{ell} stochastic matrix and length-{ell} vector")
        if ((P > 0) != (self.sft.matrix > 0)).any() or (P < 0).any():
            raise InvalidMeasureError("Stochastic matrix support must equal the transition matrix support")
        if np.abs(P.sum(axis=1) - 1).max() > STOCHASTIC_TOLERANCE:
            raise InvalidMeasureError("Rows of the stochastic matrix must sum to 1")
        if (pi <= 0).any() or abs(pi.sum() - 1) > STOCHASTIC_TOLERANCE:
            raise InvalidMeasureError("Stationary vector must be a positive probability vector")
        if np.abs(pi @ P - pi).max() > STOCHASTIC_TOLERANCE:
            raise InvalidMeasureError("Stationary vector is not invariant under the stochastic matrix")

    @classmethod
    def from_stochastic(cls, sft: Sft, stochastic) -> 'MarkovMeasure':
        """Measure with the given transition probabilities; π is computed"""
        P = np.asarray(stochastic, dtype=float)
        P = P / P.sum(axis=1, keepdims=True)
        return cls(sft, P, stationary_distribution(P))


def stationary_distribution(stochastic: np.ndarray) -> np.ndarray:
    """Left Perron vector of a row-stochastic matrix, normalized to sum 1"""
    eig_vals, eig_vectors = sla.eig(stochastic.T)
    ind = np.argmin(np.abs(eig_vals - 1.0))
    pi = np.abs(np.real(eig_vectors[:, ind]))
    return pi / pi.sum()


def parry_measure(sft: Sft) -> MarkovMeasure:
    """Maximal-entropy Markov measure P_ij = q_ij v_j / (λ v_i)"""
    if mixing_index(sft) is None:
        raise NotMixingError("The Parry measure is only built for mixing shifts")
    Q = sft.matrix.astype(float)
    eig_vals, left, right = sla.eig(Q, left=True, right=True)
    ind = np.argmax(np.real(eig_vals))
    lam = float(np.real(eig_vals[ind]))
    v = np.abs(np.real(right[:, ind]))
    u = np.abs(np.real(left[:, ind]))
    P = Q * v[np.newaxis, :] / (lam * v[:, np.newaxis])
    P = P / P.sum(axis=1, keepdims=True)
    pi = u * v / np.dot(u, v)
    logger.debug(f"Parry measure: Perron eigenvalue {lam:.15g}")
    return MarkovMeasure(sft, P, pi)


def reversed_chain(mu: MarkovMeasure) -> MarkovMeasure:
    """Time reversal P*_ij = π_j P_ji / π_i over the transposed shift"""
    pi, P = mu.stationary, mu.stochastic
    reverse = (P.T * pi[np.newaxis, :]) / pi[:, np.newaxis]
    sft_reversed = Sft.from_matrix(mu.sft.matrix.T, mu.sft.tau)
    return MarkovMeasure(sft_reversed, reverse / reverse.sum(axis=1, keepdims=True), pi.copy())


def cylinder_measure(mu: MarkovMeasure, c: Word | tuple[int, ...]) -> float:
    """π_{a_0} ∏ P_{a_i a_{i+1}}; zero for forbidden words"""
    symbols = c.symbols if isinstance(c, Word) else tuple(c)
    if not symbols:
        return 1.0
    idx = [s - 1 for s in symbols]
    value = mu.stationary[idx[0]]
    for a, b in zip(idx, idx[1:]):
        value *= mu.stochastic[a, b]
    return float(value)


def jacobian_u(mu: MarkovMeasure, y: SymbolicPoint) -> float:
    """Unstable Jacobian π_{y1} / (π_{y0} P_{y0 y1})"""
    a, b = y[0] - 1, y[1] - 1
    return float(mu.stationary[b] / (mu.stationary[a] * mu.stochastic[a, b]))


def jacobian_s(mu: MarkovMeasure, y: SymbolicPoint) -> float:
    """Stable Jacobian on the past coordinates, mirrored through the reversed chain:
    π_{y-2} / (π_{y-1} P*_{y-1 y-2})"""
    reverse = reversed_chain(mu)
    a, b = y[-1] - 1, y[-2] - 1
    return float(reverse.stationary[b] / (reverse.stationary[a] * reverse.stochastic[a, b]))


def entropy_rate(mu: MarkovMeasure) -> float:
    """-Σ π_i P_ij log P_ij in nats per step"""
    return float(sum(
        mu.stationary[i] * stats.entropy(mu.stochastic[i, :])
        for i in range(mu.sft.alphabet_size)
    ))


def _generator(seed: SeedLike) -> np.random.Generator:
    sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(sequence))


def sample_orbit(mu: MarkovMeasure, length: int, seed: SeedLike, start_index: int = 0) -> Word:
    """Stationary Markov word of ``length`` symbols, deterministic in ``seed``"""
    if length < 1:
        raise ValueError(f"Orbit length must be positive, got {length}")
    rng = _generator(seed)
    ell = mu.sft.alphabet_size
    symbols = [int(rng.choice(ell, p=mu.stationary))]
    cumulative = np.cumsum(mu.stochastic, axis=1)
    draws = rng.random(length - 1)
    for u in draws:
        row = cumulative[symbols[-1]]
        symbols.append(int(min(np.searchsorted(row, u * row[-1], side='right'), ell - 1)))
    return Word(tuple(s + 1 for s in symbols), start_index)


def sample_orbits(mu: MarkovMeasure, length: int, samples: int, seed: int, start_index: int = 0) -> list[Word]:
    """One independent stream per orbit, spawned from the seed"""
    children = np.random.SeedSequence(seed).spawn(samples)
    return [sample_orbit(mu, length, child, start_index) for child in children]
