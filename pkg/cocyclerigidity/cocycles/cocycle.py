"""Locally constant matrix cocycles over a shift.

A generator reads the coordinates [w_minus, w_plus] of a point and returns an
invertible d x d matrix. Products follow the three-case definition

    A^n(x) = A(f^{n-1}x) ... A(x)                  n > 0
    A^0(x) = I
    A^n(x) = A(f^n x)^{-1} ... A(f^{-1}x)^{-1}     n < 0
"""
from dataclasses import dataclass
from math import exp, log
from typing import Callable, Iterable, Iterator, Mapping, Optional

import numpy as np
from loguru import logger

from cocyclerigidity.configuration.constants import (
    MAX_WINDOW_WORDS,
    MIN_ABS_DETERMINANT,
    RENORMALIZE_EVERY,
)
from cocyclerigidity.symbolic.markov_measure import MarkovMeasure, sample_orbits
from cocyclerigidity.symbolic.sft_core import Sft, SymbolicPoint, shift
from cocyclerigidity.utilities.exceptions import (
    BlockTooLargeError,
    InvalidGeneratorError,
    NegativeDeterminantError,
    NotPeriodicError,
)

Window = tuple[int, int]
WindowWord = tuple[int, ...]


def spectral_norm(M: np.ndarray) -> float:
    return float(np.linalg.svd(M, compute_uv=False)[0])


def log_condition(M: np.ndarray) -> float:
    """log(‖M‖ ‖M^{-1}‖) from the extreme singular values"""
    singular = np.linalg.svd(M, compute_uv=False)
    return float(log(singular[0]) - log(singular[-1]))


class LocallyConstantGenerator:
    """Table of invertible matrices indexed by the valid words of a window"""

    def __init__(self, sft: Sft, window: Window, table: Mapping[WindowWord, np.ndarray]):
        w_minus, w_plus = window
        if w_minus > 0 or w_plus < 0:
            raise InvalidGeneratorError(f"Window must satisfy w_minus <= 0 <= w_plus, got {window}")
        self.sft = sft
        self.window = (int(w_minus), int(w_plus))
        words = sft.window_words(w_minus, w_plus)
        missing = [w for w in words if w not in table]
        if missing:
            raise InvalidGeneratorError(f"Generator table misses valid window-words {missing[:8]}")
        extra = set(table) - set(words)
        if extra:
            raise InvalidGeneratorError(f"Generator table holds invalid window-words {sorted(extra)[:8]}")

        self.table: dict[WindowWord, np.ndarray] = {}
        self.inverse: dict[WindowWord, np.ndarray] = {}
        dimension = None
        for word in words:
            M = np.array(table[word], dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise InvalidGeneratorError(f"Entry for {word} is not a square matrix")
            if dimension is None:
                dimension = M.shape[0]
            elif M.shape[0] != dimension:
                raise InvalidGeneratorError(f"Entry for {word} has dimension {M.shape[0]}, expected {dimension}")
            if abs(np.linalg.det(M)) <= MIN_ABS_DETERMINANT or not np.isfinite(np.linalg.cond(M)):
                raise InvalidGeneratorError(f"Entry for {word} is not invertible")
            M.setflags(write=False)
            inv = np.linalg.inv(M)
            inv.setflags(write=False)
            self.table[word] = M
            self.inverse[word] = inv
        self.dimension: int = dimension

    @classmethod
    def constant(cls, sft: Sft, M) -> 'LocallyConstantGenerator':
        return cls(sft, (0, 0), {(a,): M for a in sft.symbols})

    @classmethod
    def from_symbol_map(cls, sft: Sft, mapping: Mapping[int, np.ndarray]) -> 'LocallyConstantGenerator':
        """Window-(0,0) generator A(x) = mapping[x_0]"""
        return cls(sft, (0, 0), {(a,): mapping[a] for a in sft.symbols})

    @classmethod
    def from_function(cls, sft: Sft, window: Window,
                      fn: Callable[[WindowWord], np.ndarray]) -> 'LocallyConstantGenerator':
        return cls(sft, window, {w: fn(w) for w in sft.window_words(*window)})

    @property
    def width(self) -> int:
        return self.window[1] - self.window[0] + 1

    def matrix(self, word: WindowWord) -> np.ndarray:
        return self.table[word]

    def at(self, x: SymbolicPoint) -> np.ndarray:
        """A(x)"""
        return self.table[x.window(*self.window)]

    def inverse_at(self, x: SymbolicPoint) -> np.ndarray:
        return self.inverse[x.window(*self.window)]

    def orbit_words(self, x: SymbolicPoint, start: int, count: int) -> Iterator[WindowWord]:
        """Window-words of f^j(x) for j = start .. start + count - 1"""
        lo, hi = self.window
        coords = x.window(start + lo, start + count - 1 + hi)
        width = self.width
        for j in range(count):
            yield coords[j:j + width]

    def __repr__(self) -> str:
        return f"LocallyConstantGenerator(d={self.dimension}, window={self.window}, entries={len(self.table)})"


def evaluate(gen: LocallyConstantGenerator, x: SymbolicPoint, n: int) -> np.ndarray:
    """A^n(x)"""
    M = np.eye(gen.dimension)
    if n > 0:
        for word in gen.orbit_words(x, 0, n):
            M = gen.table[word] @ M
    elif n < 0:
        words = list(gen.orbit_words(x, n, -n))
        for word in reversed(words):
            M = gen.inverse[word] @ M
    return M


def renormalized_product(matrices: Iterable[np.ndarray], dimension: int) -> tuple[float, np.ndarray]:
    """Left-accumulated product M_k ... M_1 returned as (log_scale, B) with
    product = exp(log_scale) * B; rescaled every RENORMALIZE_EVERY factors."""
    B = np.eye(dimension)
    log_scale = 0.0
    for count, M in enumerate(matrices, start=1):
        B = M @ B
        if count % RENORMALIZE_EVERY == 0:
            norm = spectral_norm(B)
            B = B / norm
            log_scale += log(norm)
    return log_scale, B


def log_norm(gen: LocallyConstantGenerator, x: SymbolicPoint, n: int) -> float:
    """log ‖A^n(x)‖ for n >= 0 without overflow"""
    log_scale, B = renormalized_product((gen.table[w] for w in gen.orbit_words(x, 0, n)), gen.dimension)
    return log_scale + log(spectral_norm(B))


def log_norm_series(gen: LocallyConstantGenerator, x: SymbolicPoint, n: int) -> tuple[np.ndarray, np.ndarray]:
    """log ‖A^j(x)‖ and log ‖A^j(x)^{-1}‖ for j = 1 .. n"""
    forward, backward = np.empty(n), np.empty(n)
    P = np.eye(gen.dimension)
    Q = np.eye(gen.dimension)
    scale_p = scale_q = 0.0
    for j, word in enumerate(gen.orbit_words(x, 0, n)):
        P = gen.table[word] @ P
        Q = Q @ gen.inverse[word]
        norm_p, norm_q = spectral_norm(P), spectral_norm(Q)
        forward[j] = scale_p + log(norm_p)
        backward[j] = scale_q + log(norm_q)
        if (j + 1) % RENORMALIZE_EVERY == 0:
            P, Q = P / norm_p, Q / norm_q
            scale_p += log(norm_p)
            scale_q += log(norm_q)
    return forward, backward


def normalize_sl(gen: LocallyConstantGenerator) -> LocallyConstantGenerator:
    """det(A)^{-1/d} A, using the real root of a negative determinant in odd dimension"""
    d = gen.dimension
    table = {}
    for word, M in gen.table.items():
        det = np.linalg.det(M)
        if det < 0 and d % 2 == 0:
            raise NegativeDeterminantError(f"Entry for {word} has det {det:.6g} < 0 in even dimension {d}")
        table[word] = M / (np.sign(det) * abs(det) ** (1.0 / d))
    return LocallyConstantGenerator(gen.sft, gen.window, table)


def normalize_unimodular(gen: LocallyConstantGenerator) -> LocallyConstantGenerator:
    """|det(A)|^{-1/d} A; defined for every generator, determinants become ±1"""
    d = gen.dimension
    return LocallyConstantGenerator(
        gen.sft, gen.window,
        {word: M / abs(np.linalg.det(M)) ** (1.0 / d) for word, M in gen.table.items()},
    )


def iterate_generator(gen: LocallyConstantGenerator, r: int) -> LocallyConstantGenerator:
    """Generator of A^r, with window (w_minus, w_plus + r - 1)"""
    lo, hi = gen.window
    window = (lo, hi + r - 1)
    words = gen.sft.window_words(*window)
    if len(words) > MAX_WINDOW_WORDS:
        raise BlockTooLargeError(f"A^{r} needs {len(words)} window-words, above the cap {MAX_WINDOW_WORDS}")
    width = gen.width

    def product(word: WindowWord) -> np.ndarray:
        M = np.eye(gen.dimension)
        for j in range(r):
            M = gen.table[word[j:j + width]] @ M
        return M

    return LocallyConstantGenerator(gen.sft, window, {w: product(w) for w in words})


def block_log_distortion(gen: LocallyConstantGenerator, x: SymbolicPoint, offset: int, N: int) -> float:
    """log(‖A^N(f^offset x)‖ ‖A^N(f^offset x)^{-1}‖) with renormalized products"""
    words = list(gen.orbit_words(x, offset, N))
    scale_f, F = renormalized_product((gen.table[w] for w in words), gen.dimension)
    scale_b, B = renormalized_product((gen.inverse[w] for w in reversed(words)), gen.dimension)
    value = scale_f + log(spectral_norm(F)) + scale_b + log(spectral_norm(B))
    return max(value, 0.0)


def distortion(gen: LocallyConstantGenerator, x: SymbolicPoint, N: int) -> float:
    """ψ_N(x) = (1/N) log(‖A^N(x)‖ ‖A^N(x)^{-1}‖)"""
    return block_log_distortion(gen, x, 0, N) / N


def distortion_birkhoff_sums(gen: LocallyConstantGenerator, x: SymbolicPoint, N: int, s: int) -> np.ndarray:
    """Partial sums Σ_{j<i} log(‖A^N(f^{jN}x)‖ ‖A^N(f^{jN}x)^{-1}‖) for i = 1 .. s"""
    return np.cumsum([block_log_distortion(gen, x, j * N, N) for j in range(s)])


def sup_norm_bound(gen: LocallyConstantGenerator) -> float:
    """R = max over the table of max(‖A‖, ‖A^{-1}‖)"""
    return max(
        max(spectral_norm(gen.table[w]), spectral_norm(gen.inverse[w])) for w in gen.table
    )


def sup_log_distortion(gen: LocallyConstantGenerator) -> float:
    """ζ = max over the table of log(‖A‖ ‖A^{-1}‖)"""
    return max(log_condition(M) for M in gen.table.values())


@dataclass(frozen=True)
class LyapunovPair:
    lambda_plus: float
    lambda_minus: float

    @property
    def gap(self) -> float:
        return self.lambda_plus - self.lambda_minus


def lyapunov_periodic(gen: LocallyConstantGenerator, p: SymbolicPoint, k: int) -> LyapunovPair:
    """Extremal exponents of the periodic measure on the orbit of p"""
    if shift(p, k) != p:
        raise NotPeriodicError(f"f^{k}(p) != p for {p}")
    M = evaluate(gen, p, k)
    moduli = np.abs(np.linalg.eigvals(M))
    return LyapunovPair(float(log(moduli.max()) / k), float(log(moduli.min()) / k))


@dataclass(frozen=True)
class BirkhoffEstimate:
    mean: float
    stderr: float
    n: int
    samples: int


def lyapunov_birkhoff(gen: LocallyConstantGenerator, mu: MarkovMeasure, n: int, samples: int,
                      seed: int) -> BirkhoffEstimate:
    """Mean and standard error of (1/n) log ‖A^n(x)‖ over sampled orbits"""
    lo, hi = gen.window
    words = sample_orbits(mu, n + hi - lo, samples, seed, start_index=lo)
    values = np.array([log_norm(gen, gen.sft.extend_word(word), n) / n for word in words])
    stderr = float(values.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    logger.debug(f"Birkhoff estimate over {samples} orbits of length {n}: {values.mean():.12g} ± {stderr:.3g}")
    return BirkhoffEstimate(float(values.mean()), stderr, n, samples)


def _word_depth(u: WindowWord, v: WindowWord, lo: int) -> Optional[int]:
    """Smallest |n| where the window-words differ; positions start at ``lo``"""
    depths = [abs(lo + i) for i, (a, b) in enumerate(zip(u, v)) if a != b]
    return min(depths) if depths else None


def window_lipschitz(sft: Sft, window: Window, values: Mapping[WindowWord, object],
                     difference: Callable[[object, object], float]) -> float:
    """Exact sup of difference(F(x), F(y)) / ρ(x, y) for a function F that
    depends on the coordinates in ``window`` only.

    Pairs of points realize every window-word pair at its first-disagreement
    depth because stray coordinates can always be extended in common."""
    words = sft.window_words(*window)
    if len(words) > MAX_WINDOW_WORDS:
        raise BlockTooLargeError(f"{len(words)} window-words exceed the cap {MAX_WINDOW_WORDS}")
    best = 0.0
    for i, u in enumerate(words):
        for v in words[i + 1:]:
            diff = difference(values[u], values[v])
            if diff == 0.0:
                continue
            depth = _word_depth(u, v, window[0])
            best = max(best, diff * exp(sft.tau * depth))
    return best


def lipschitz_constant(gen: LocallyConstantGenerator, sft: Optional[Sft] = None) -> float:
    """Exact Lipschitz constant of x -> A(x) with respect to ρ_τ"""
    sft = sft or gen.sft
    return window_lipschitz(sft, gen.window, gen.table, lambda a, b: spectral_norm(a - b))


def log_distortion_lipschitz(gen: LocallyConstantGenerator) -> float:
    """Lipschitz constant of x -> log(‖A(x)‖ ‖A(x)^{-1}‖)"""
    values = {w: log_condition(M) for w, M in gen.table.items()}
    return window_lipschitz(gen.sft, gen.window, values, lambda a, b: abs(a - b))
