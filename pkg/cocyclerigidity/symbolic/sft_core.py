"""Subshifts of finite type and their eventually periodic points.

Symbols are the integers ``1..alphabet_size``. A point is stored as
``left_cycle^inf . core . right_cycle^inf`` where the core starts at
coordinate ``start``. Points are kept in canonical form so that ``==``
decides equality of the underlying bi-infinite sequences.
"""
from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import gcd, exp
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from loguru import logger

from cocyclerigidity.utilities.exceptions import (
    InvalidSftError,
    InvalidPointError,
    MismatchedCylinderError,
    NoPathError,
)


def _lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)


def primitive_root(cycle: tuple[int, ...]) -> tuple[int, ...]:
    """Shortest word whose repetition gives ``cycle``"""
    n = len(cycle)
    for d in range(1, n + 1):
        if n % d == 0 and cycle[:d] * (n // d) == cycle:
            return cycle[:d]
    return cycle


def least_rotation(cycle: tuple[int, ...]) -> tuple[tuple[int, ...], int]:
    """Lexicographically least rotation of ``cycle`` and the offset producing it"""
    rotations = [(cycle[o:] + cycle[:o], o) for o in range(len(cycle))]
    return min(rotations)


@dataclass(frozen=True)
class Word:
    symbols: tuple[int, ...]
    start_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'symbols', tuple(int(s) for s in self.symbols))

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def end_index(self) -> int:
        """Coordinate just past the last symbol"""
        return self.start_index + len(self.symbols)


@dataclass(frozen=True)
class SymbolicPoint:
    left_cycle: tuple[int, ...]
    core: tuple[int, ...]
    right_cycle: tuple[int, ...]
    start: int = 0

    def __post_init__(self):
        if not self.left_cycle or not self.right_cycle:
            raise InvalidPointError("Cycles of an eventually periodic point must be nonempty")

    @classmethod
    def build(
            cls,
            left_cycle: Sequence[int],
            core: Sequence[int],
            right_cycle: Sequence[int],
            start: int = 0,
    ) -> 'SymbolicPoint':
        """Canonical point with x_n = left_cycle[(n - start) % L] for n < start,
        the core on [start, start + len(core)) and the right cycle afterwards."""
        left = tuple(int(s) for s in left_cycle)
        right = tuple(int(s) for s in right_cycle)
        core = tuple(int(s) for s in core)
        if not left or not right:
            raise InvalidPointError("Cycles of an eventually periodic point must be nonempty")
        left, right = primitive_root(left), primitive_root(right)
        raw = cls(left, core, right, start)
        return raw._canonical()

    @classmethod
    def periodic(cls, word: Sequence[int], start: int = 0) -> 'SymbolicPoint':
        """Periodic point with x_{start + i} = word[i] for 0 <= i < len(word)"""
        word = tuple(word)
        return cls.build(word, (), word, start)

    @classmethod
    def constant(cls, symbol: int) -> 'SymbolicPoint':
        return cls.periodic((symbol,))

    @classmethod
    def from_coordinates(
            cls,
            coord: Callable[[int], int],
            start: int,
            end: int,
            left_period: int,
            right_period: int,
    ) -> 'SymbolicPoint':
        """Point read off a coordinate function that repeats with ``left_period``
        below ``start`` and with ``right_period`` from ``end`` on."""
        left = tuple(coord(n) for n in range(start - left_period, start))
        core = tuple(coord(n) for n in range(start, end))
        right = tuple(coord(n) for n in range(end, end + right_period))
        return cls.build(left, core, right, start)

    @property
    def end(self) -> int:
        return self.start + len(self.core)

    @property
    def is_periodic(self) -> bool:
        return not self.core and self.left_cycle == self.right_cycle

    @property
    def period(self) -> Optional[int]:
        """Minimal period, or None for a point that is not periodic"""
        return len(self.left_cycle) if self.is_periodic else None

    @property
    def core_word(self) -> Word:
        return Word(self.core, self.start)

    def __getitem__(self, n: int) -> int:
        if n < self.start:
            return self.left_cycle[(n - self.start) % len(self.left_cycle)]
        if n < self.end:
            return self.core[n - self.start]
        return self.right_cycle[(n - self.end) % len(self.right_cycle)]

    def window(self, lo: int, hi: int) -> tuple[int, ...]:
        """Coordinates x_lo .. x_hi inclusive"""
        return tuple(self[n] for n in range(lo, hi + 1))

    def _canonical(self) -> 'SymbolicPoint':
        """Canonical description of the same sequence.

        The core is as short as possible: it starts at the first coordinate
        where the left periodic pattern breaks and ends where the right
        periodic pattern takes over for good. A non-periodic point keeps the
        cycle rotations fixed by those positions, so ``left_cycle`` reads
        x_{start-L} .. x_{start-1} and ``right_cycle`` reads x_end .. x_{end+R-1}.
        A periodic point uses the least rotation of its cycle and a start in
        ``[0, period)``.
        """
        left, right, start, end = self.left_cycle, self.right_cycle, self.start, self.end
        n_left, n_right = len(left), len(right)
        coord = self.__getitem__

        # push the left periodic pattern as far right as it goes
        limit = end + _lcm(n_left, n_right)
        s = start
        while s < limit and coord(s) == left[(s - start) % n_left]:
            s += 1
        if s >= limit:
            cycle, offset = least_rotation(left)
            return SymbolicPoint(cycle, (), cycle, (start + offset) % n_left)

        # then pull the right periodic pattern back as far as it goes,
        # never before s since the left pattern may run past the old core
        e = max(end, s)
        while e > s and coord(e - 1) == right[(e - 1 - end) % n_right]:
            e -= 1

        new_left = tuple(coord(n) for n in range(s - n_left, s))
        new_core = tuple(coord(n) for n in range(s, e))
        new_right = tuple(right[(n - end) % n_right] for n in range(e, e + n_right))
        return SymbolicPoint(new_left, new_core, new_right, s)

    def __repr__(self) -> str:
        left = ''.join(map(str, self.left_cycle)) if max(self.left_cycle) < 10 else str(self.left_cycle)
        right = ''.join(map(str, self.right_cycle)) if max(self.right_cycle) < 10 else str(self.right_cycle)
        core = ' '.join(map(str, self.core))
        return f"SymbolicPoint(({left})^-inf [{core}]@{self.start} ({right})^inf)"


@dataclass(frozen=True)
class Sft:
    alphabet_size: int
    transitions: tuple[tuple[int, ...], ...]
    tau: float = 1.0

    def __post_init__(self):
        rows = tuple(tuple(int(q) for q in row) for row in self.transitions)
        object.__setattr__(self, 'transitions', rows)
        object.__setattr__(self, 'tau', float(self.tau))
        ell = self.alphabet_size
        if ell < 1:
            raise InvalidSftError(f"Alphabet size must be positive, got {ell}")
        if len(rows) != ell or any(len(row) != ell for row in rows):
            raise InvalidSftError(f"Transition matrix must be {ell}x{ell}")
        if any(q not in (0, 1) for row in rows for q in row):
            raise InvalidSftError("Transition entries must be 0 or 1")
        matrix = np.array(rows)
        if (matrix.sum(axis=1) == 0).any() or (matrix.sum(axis=0) == 0).any():
            raise InvalidSftError("Every row and every column of the transition matrix needs a 1")
        if not self.tau > 0:
            raise InvalidSftError(f"tau must be positive, got {self.tau}")

    @classmethod
    def from_matrix(cls, matrix, tau: float = 1.0) -> 'Sft':
        matrix = np.asarray(matrix, dtype=int)
        return cls(matrix.shape[0], tuple(map(tuple, matrix.tolist())), tau)

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.array(self.transitions, dtype=np.int64)

    @property
    def symbols(self) -> range:
        return range(1, self.alphabet_size + 1)

    def allowed(self, a: int, b: int) -> bool:
        return self.transitions[a - 1][b - 1] == 1

    def successors(self, a: int) -> list[int]:
        return [b for b in self.symbols if self.allowed(a, b)]

    def predecessors(self, b: int) -> list[int]:
        return [a for a in self.symbols if self.allowed(a, b)]

    def is_valid_word(self, symbols: Sequence[int]) -> bool:
        if any(s not in self.symbols for s in symbols):
            return False
        return all(self.allowed(a, b) for a, b in zip(symbols, symbols[1:]))

    def contains(self, x: SymbolicPoint) -> bool:
        """Validity of the whole sequence, seams and cycle wrap-arounds included"""
        lo = x.start - len(x.left_cycle) - 1
        hi = x.end + len(x.right_cycle)
        return self.is_valid_word(x.window(lo, hi))

    def require(self, *points: SymbolicPoint) -> None:
        for x in points:
            if not self.contains(x):
                raise InvalidPointError(f"{x} is not a valid point of the shift")

    def window_words(self, lo: int, hi: int) -> list[tuple[int, ...]]:
        """All valid words over coordinates [lo, hi], in lexicographic order"""
        return _valid_words(self, hi - lo + 1)

    def extend_word(self, word: Word) -> SymbolicPoint:
        """Eventually periodic point containing ``word`` at its coordinates.
        Tails follow the least predecessor / successor until a symbol repeats."""
        if not word.symbols or not self.is_valid_word(word.symbols):
            raise InvalidPointError(f"Cannot extend invalid word {word.symbols}")
        left_transient, left_cycle = _tail(word.symbols[0], lambda s: min(self.predecessors(s)))
        right_transient, right_cycle = _tail(word.symbols[-1], lambda s: min(self.successors(s)))
        core = tuple(reversed(left_transient)) + word.symbols + right_transient
        return SymbolicPoint.build(
            tuple(reversed(left_cycle)), core, right_cycle, word.start_index - len(left_transient)
        )


def _tail(symbol: int, step: Callable[[int], int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Walk ``step`` from ``symbol`` until a repeat; returns (transient, cycle)
    where the cycle begins right after the transient."""
    seq = [symbol]
    seen = {symbol: 0}
    while True:
        nxt = step(seq[-1])
        if nxt in seen:
            return tuple(seq[1:]), tuple(seq[seen[nxt]:])
        seen[nxt] = len(seq)
        seq.append(nxt)


@lru_cache(maxsize=256)
def _valid_words(sft: Sft, length: int) -> list[tuple[int, ...]]:
    words = [(a,) for a in sft.symbols]
    for _ in range(length - 1):
        words = [w + (b,) for w in words for b in sft.successors(w[-1])]
    return words


def shift(x: SymbolicPoint, n: int) -> SymbolicPoint:
    """f^n(x), so that shift(x, n)[j] == x[j + n]"""
    return SymbolicPoint.build(x.left_cycle, x.core, x.right_cycle, x.start - n)


def _first_disagreement(x: SymbolicPoint, y: SymbolicPoint, forward: bool) -> Optional[int]:
    """Smallest n >= 0 (forward) or largest n < 0 (backward) with x_n != y_n"""
    if forward:
        bound = max(x.end, y.end, 0) + _lcm(len(x.right_cycle), len(y.right_cycle))
        candidates = range(0, bound + 1)
    else:
        bound = min(x.start, y.start, 0) - _lcm(len(x.left_cycle), len(y.left_cycle))
        candidates = range(-1, bound - 2, -1)
    for n in candidates:
        if x[n] != y[n]:
            return n
    return None


def agreement_depth(x: SymbolicPoint, y: SymbolicPoint) -> Optional[int]:
    """N(x, y) = max{N : x_n = y_n for |n| < N}; None when x == y"""
    forward = _first_disagreement(x, y, forward=True)
    backward = _first_disagreement(x, y, forward=False)
    depths = [d for d in (forward, None if backward is None else -backward) if d is not None]
    return min(depths) if depths else None


def rho_distance(sft: Sft, x: SymbolicPoint, y: SymbolicPoint) -> float:
    depth = agreement_depth(x, y)
    if depth is None:
        return 0.0
    return exp(-sft.tau * depth)


def on_local_stable_set(x: SymbolicPoint, y: SymbolicPoint) -> bool:
    """y in W^s_loc(x): agreement on all coordinates n >= 0"""
    return _first_disagreement(x, y, forward=True) is None


def on_local_unstable_set(x: SymbolicPoint, y: SymbolicPoint) -> bool:
    """y in W^u_loc(x): agreement on all coordinates n <= 0"""
    return x[0] == y[0] and _first_disagreement(x, y, forward=False) is None


def bracket(x: SymbolicPoint, y: SymbolicPoint) -> SymbolicPoint:
    """[x, y]: follows x on n <= 0 and y on n >= 0"""
    if x[0] != y[0]:
        raise MismatchedCylinderError(f"bracket needs x_0 == y_0, got {x[0]} and {y[0]}")
    start = min(x.start, 0)
    end = max(y.end, 1)
    return SymbolicPoint.from_coordinates(
        lambda n: x[n] if n <= 0 else y[n],
        start, end, len(x.left_cycle), len(y.right_cycle),
    )


def enumerate_periodic(sft: Sft, k: int) -> list[SymbolicPoint]:
    """All points with f^k(x) = x, one per valid cyclic word of length k,
    ordered lexicographically by x_0 .. x_{k-1}."""
    if k < 1:
        raise ValueError(f"Period must be positive, got {k}")
    points = []
    for word in _valid_words(sft, k):
        if sft.allowed(word[-1], word[0]):
            points.append(SymbolicPoint.periodic(word, 0))
    logger.trace(f"enumerate_periodic: {len(points)} points of period dividing {k}")
    return points


def _reachability(sft: Sft, steps: int) -> list[np.ndarray]:
    """reach[i][a-1, b-1] is True when a word of i transitions joins a to b"""
    q = sft.matrix > 0
    reach = [np.eye(sft.alphabet_size, dtype=bool)]
    for _ in range(steps):
        reach.append((reach[-1].astype(np.int64) @ q.astype(np.int64)) > 0)
    return reach


def connecting_word(sft: Sft, a: int, b: int, n: int) -> Word:
    """Lexicographically least valid word w_0 .. w_n with w_0 = a and w_n = b"""
    if n < 1:
        raise ValueError(f"Connecting length must be positive, got {n}")
    reach = _reachability(sft, n)
    if not reach[n][a - 1, b - 1]:
        raise NoPathError(f"No valid word of length {n} from {a} to {b}")
    word = [a]
    for i in range(1, n + 1):
        remaining = n - i
        word.append(next(
            c for c in sft.successors(word[-1]) if reach[remaining][c - 1, b - 1]
        ))
    return Word(tuple(word), 0)


def mixing_index(sft: Sft) -> Optional[int]:
    """Smallest M with Q^M entrywise positive, or None (not mixing) when no
    M up to the Wielandt bound alphabet_size**2 works."""
    q = sft.matrix
    power = np.eye(sft.alphabet_size, dtype=np.int64)
    for m in range(1, sft.alphabet_size ** 2 + 1):
        power = ((power @ q) > 0).astype(np.int64)
        if power.all():
            return m
    return None


def periodic_points_up_to(sft: Sft, period_max: int) -> list[tuple[SymbolicPoint, int]]:
    """Distinct periodic points of minimal period <= period_max as (point, period),
    ordered by period then by the word x_0 .. x_{k-1}."""
    found = []
    for k in range(1, period_max + 1):
        for p in enumerate_periodic(sft, k):
            if p.period == k:
                found.append((p, k))
    return found


def periodic_word(p: SymbolicPoint, k: int) -> tuple[int, ...]:
    return p.window(0, k - 1)


def iter_valid_words(sft: Sft, lengths: Iterable[int]):
    for length in lengths:
        yield from _valid_words(sft, length)
