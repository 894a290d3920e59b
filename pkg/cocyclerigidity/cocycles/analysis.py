"""Invariance and coboundary verification, quasiconformality reports,
irreducibility tests and the construction of invariant conformal fields.

Fields and transfer maps are locally constant: they read a fixed window of
coordinates, so every check below is a finite enumeration of window-words.
"""
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import orth
from loguru import logger

from cocyclerigidity.cocycles.cocycle import (
    LocallyConstantGenerator,
    Window,
    WindowWord,
    log_norm_series,
    lyapunov_periodic,
    normalize_unimodular,
    spectral_norm,
)
from cocyclerigidity.cocycles.conformal_geom import ConformalStructure, distance, pull
from cocyclerigidity.cocycles.holonomy import (
    BunchingCertificate,
    anchor_loop_matrices,
    anchor_structure,
    certify_over_grid,
    extend_structure,
    select_anchors,
)
from cocyclerigidity.configuration.constants import (
    DEFAULT_BUNCHING_GRID,
    DEFAULT_LOOP_PERIOD,
    DEFAULT_PERIODIC_SEARCH,
    EXTENSION_RESIDUAL_TOLERANCE,
    MAX_SUBSPACE_DIMENSION,
    MAX_WINDOW_WORDS,
    MIN_ABS_DETERMINANT,
    QUASICONFORMAL_SLOPE_TOLERANCE,
    ZERO_EXPONENT_TOLERANCE,
    ObstructionKind,
)
from cocyclerigidity.symbolic.markov_measure import MarkovMeasure, parry_measure, sample_orbits
from cocyclerigidity.symbolic.sft_core import Sft, SymbolicPoint, Word, mixing_index, periodic_points_up_to
from cocyclerigidity.utilities.exceptions import (
    BlockTooLargeError,
    DimensionTooLargeError,
    InvalidGeneratorError,
    InvalidStructureError,
    MissingAnchorError,
    NoConvergenceError,
    NotEllipticError,
)

RANK_TOLERANCE = 1e-9


def _sub_word(word: WindowWord, lo: int, a: int, b: int) -> WindowWord:
    """Coordinates a..b of a word that starts at coordinate lo"""
    return word[a - lo:b - lo + 1]


def _enumerate(sft: Sft, lo: int, hi: int) -> list[WindowWord]:
    words = sft.window_words(lo, hi)
    if len(words) > MAX_WINDOW_WORDS:
        raise BlockTooLargeError(f"{len(words)} window-words over [{lo}, {hi}] exceed the cap {MAX_WINDOW_WORDS}")
    return words


class ConformalField:
    """Locally constant field x -> η_x"""

    def __init__(self, sft: Sft, window: Window, table: Mapping[WindowWord, ConformalStructure]):
        self.sft = sft
        self.window = (int(window[0]), int(window[1]))
        words = sft.window_words(*self.window)
        missing = [w for w in words if w not in table]
        if missing:
            raise InvalidStructureError(f"Field table misses window-words {missing[:8]}")
        if any(not isinstance(table[w], ConformalStructure) for w in words):
            raise InvalidStructureError("Field entries must be conformal structures")
        self.table: dict[WindowWord, ConformalStructure] = {w: table[w] for w in words}

    @classmethod
    def constant(cls, sft: Sft, eta: ConformalStructure) -> 'ConformalField':
        return cls(sft, (0, 0), {(a,): eta for a in sft.symbols})

    @classmethod
    def from_function(cls, sft: Sft, window: Window,
                      fn: Callable[[WindowWord], ConformalStructure]) -> 'ConformalField':
        return cls(sft, window, {w: fn(w) for w in _enumerate(sft, *window)})

    @property
    def dimension(self) -> int:
        return next(iter(self.table.values())).dimension

    def at(self, x: SymbolicPoint) -> ConformalStructure:
        return self.table[x.window(*self.window)]

    def __repr__(self) -> str:
        return f"ConformalField(window={self.window}, entries={len(self.table)})"


class TransferField:
    """Locally constant x -> P(x) in GL(d, R)"""

    def __init__(self, sft: Sft, window: Window, table: Mapping[WindowWord, np.ndarray]):
        self.sft = sft
        self.window = (int(window[0]), int(window[1]))
        words = sft.window_words(*self.window)
        missing = [w for w in words if w not in table]
        if missing:
            raise InvalidGeneratorError(f"Transfer table misses window-words {missing[:8]}")
        self.table: dict[WindowWord, np.ndarray] = {}
        for w in words:
            M = np.array(table[w], dtype=float)
            if abs(np.linalg.det(M)) <= MIN_ABS_DETERMINANT:
                raise InvalidGeneratorError(f"Transfer entry for {w} is not invertible")
            M.setflags(write=False)
            self.table[w] = M

    @classmethod
    def constant(cls, sft: Sft, M) -> 'TransferField':
        return cls(sft, (0, 0), {(a,): M for a in sft.symbols})

    @classmethod
    def from_function(cls, sft: Sft, window: Window, fn: Callable[[WindowWord], np.ndarray]) -> 'TransferField':
        return cls(sft, window, {w: fn(w) for w in _enumerate(sft, *window)})

    @property
    def dimension(self) -> int:
        return next(iter(self.table.values())).shape[0]

    def at(self, x: SymbolicPoint) -> np.ndarray:
        return self.table[x.window(*self.window)]


# -- verification -----------------------------------------------------------

def verify_invariant_field(gen: LocallyConstantGenerator, field: ConformalField,
                           sft: Optional[Sft] = None) -> float:
    """max over cylinders of distance(pull(A(x), η_x), η_{f(x)})"""
    sft = sft or gen.sft
    (a_lo, a_hi), (e_lo, e_hi) = gen.window, field.window
    lo, hi = min(a_lo, e_lo), max(a_hi, e_hi + 1)
    residual = 0.0
    for word in _enumerate(sft, lo, hi):
        A = gen.table[_sub_word(word, lo, a_lo, a_hi)]
        here = field.table[_sub_word(word, lo, e_lo, e_hi)]
        there = field.table[_sub_word(word, lo, e_lo + 1, e_hi + 1)]
        residual = max(residual, distance(pull(A, here), there))
    return residual


def verify_coboundary(gen_a: LocallyConstantGenerator, gen_b: Optional[LocallyConstantGenerator],
                      P: TransferField, sft: Optional[Sft] = None) -> float:
    """max over cylinders of ‖A(x) - P(f(x)) B(x) P(x)^{-1}‖; B ≡ I when gen_b is None"""
    sft = sft or gen_a.sft
    d = gen_a.dimension
    if P.dimension != d or (gen_b is not None and gen_b.dimension != d):
        raise InvalidGeneratorError("Cocycles and transfer map must share the dimension")
    windows = [gen_a.window, P.window, (P.window[0] + 1, P.window[1] + 1)]
    if gen_b is not None:
        windows.append(gen_b.window)
    lo, hi = min(w[0] for w in windows), max(w[1] for w in windows)
    residual = 0.0
    for word in _enumerate(sft, lo, hi):
        A = gen_a.table[_sub_word(word, lo, *gen_a.window)]
        B = np.eye(d) if gen_b is None else gen_b.table[_sub_word(word, lo, *gen_b.window)]
        P_here = P.table[_sub_word(word, lo, *P.window)]
        P_next = P.table[_sub_word(word, lo, P.window[0] + 1, P.window[1] + 1)]
        residual = max(residual, spectral_norm(A - P_next @ B @ np.linalg.inv(P_here)))
    return residual


def transport_field(P: TransferField, field: ConformalField) -> ConformalField:
    """x -> P(x)[η_x]; invariant under A = P∘f · B · P^{-1} whenever η is B-invariant"""
    lo = min(P.window[0], field.window[0])
    hi = max(P.window[1], field.window[1])
    return ConformalField.from_function(
        field.sft, (lo, hi),
        lambda w: pull(P.table[_sub_word(w, lo, *P.window)], field.table[_sub_word(w, lo, *field.window)]),
    )


# -- quasiconformality ------------------------------------------------------

@dataclass(frozen=True)
class QuasiconformalityReport:
    """K(n) = max ‖A^n(x)‖ ‖A^n(x)^{-1}‖ and the fit log K(n) <= log C + εn"""
    log_K: np.ndarray
    C: float
    eps: float
    tau: float
    points: int

    @property
    def uniformly_quasiconformal(self) -> bool:
        return self.eps <= QUASICONFORMAL_SLOPE_TOLERANCE

    @property
    def certified(self) -> bool:
        return self.eps < self.tau

    @property
    def K(self) -> np.ndarray:
        return np.exp(self.log_K)


def quasiconformality_report(gen: LocallyConstantGenerator, sft: Optional[Sft] = None, n_max: int = 256,
                             period_max: int = DEFAULT_PERIODIC_SEARCH, samples: int = 0, seed: int = 0,
                             mu: Optional[MarkovMeasure] = None) -> QuasiconformalityReport:
    """Periodic points are enumerated with their whole orbits, so K(n) also
    covers the negative iterates A^{-n} at those points."""
    sft = sft or gen.sft
    points = [p for p, _ in periodic_points_up_to(sft, period_max)]
    if samples > 0 and (mu is not None or mixing_index(sft) is not None):
        mu = mu or parry_measure(sft)
        lo, hi = gen.window
        words = sample_orbits(mu, n_max + hi - lo, samples, seed, start_index=lo)
        points.extend(sft.extend_word(word) for word in words)

    log_K = np.zeros(n_max)
    for x in points:
        forward, backward = log_norm_series(gen, x, n_max)
        np.maximum(log_K, forward + backward, out=log_K)

    running = np.maximum.accumulate(log_K)
    half = n_max // 2
    eps = 0.0
    if n_max - half > 0 and half > 0:
        eps = max(0.0, float((running[-1] - running[half - 1]) / (n_max - half)))
    n = np.arange(1, n_max + 1)
    log_C = max(0.0, float((log_K - eps * n).max()))
    logger.debug(f"Quasiconformality over {len(points)} points: ε = {eps:.12g}, C = {np.exp(log_C):.12g}")
    return QuasiconformalityReport(log_K, float(np.exp(log_C)), eps, sft.tau, len(points))


# -- invariant subspaces ----------------------------------------------------

@dataclass(frozen=True)
class InvariantSubspace:
    """Rows of ``basis`` are the reduced row echelon basis of the subspace"""
    basis: np.ndarray
    pivots: tuple[int, ...]
    residual: float

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]


def algebra_basis(matrices: Sequence[np.ndarray], d: int) -> list[np.ndarray]:
    """Basis of the unital algebra generated by the matrices"""
    basis: list[np.ndarray] = [np.eye(d)]
    stacked = np.eye(d).reshape(1, -1)
    frontier = [np.eye(d)]
    while frontier:
        new = []
        for B in frontier:
            for M in matrices:
                candidate = M @ B
                trial = np.vstack([stacked, candidate.reshape(1, -1)])
                if np.linalg.matrix_rank(trial, tol=RANK_TOLERANCE * max(1.0, np.abs(trial).max())) > len(basis):
                    basis.append(candidate)
                    stacked = trial
                    new.append(candidate)
                    if len(basis) == d * d:
                        return basis
        frontier = new
    return basis


def _rref(rows: np.ndarray, tol: float = RANK_TOLERANCE) -> tuple[np.ndarray, tuple[int, ...]]:
    R = np.array(rows, dtype=float)
    pivots = []
    r = 0
    for col in range(R.shape[1]):
        if r == R.shape[0]:
            break
        best = r + int(np.argmax(np.abs(R[r:, col])))
        if abs(R[best, col]) <= tol:
            continue
        R[[r, best]] = R[[best, r]]
        R[r] /= R[r, col]
        for i in range(R.shape[0]):
            if i != r:
                R[i] -= R[i, col] * R[r]
        pivots.append(col)
        r += 1
    return R[:r], tuple(pivots)


def common_invariant_subspace(matrices: Sequence[np.ndarray], d: Optional[int] = None) -> Optional[InvariantSubspace]:
    """A proper nonzero subspace invariant under every matrix, or None when
    none is found. Smallest dimension wins, then the lexicographically least
    pivot columns."""
    matrices = [np.asarray(M, dtype=float) for M in matrices]
    d = d or matrices[0].shape[0]
    if d > MAX_SUBSPACE_DIMENSION:
        raise DimensionTooLargeError(f"Subspace search supports d <= {MAX_SUBSPACE_DIMENSION}, got {d}")
    if d == 1:
        return None
    algebra = algebra_basis(matrices, d)
    logger.debug(f"Algebra generated by {len(matrices)} matrices has dimension {len(algebra)} of {d * d}")
    if len(algebra) == d * d:
        return None

    rng = np.random.default_rng(np.random.SeedSequence(0))
    generic = sum(rng.standard_normal() * B for B in algebra)
    _, vectors = np.linalg.eig(generic)
    candidates = [np.eye(d)[i] for i in range(d)]
    for v in vectors.T:
        candidates.extend(part for part in (v.real, v.imag) if np.linalg.norm(part) > RANK_TOLERANCE)

    best = None
    for v in candidates:
        span = orth(np.column_stack([B @ v for B in algebra]), rcond=RANK_TOLERANCE)
        k = span.shape[1]
        if k == 0 or k == d:
            continue
        basis, pivots = _rref(span.T)
        key = (k, pivots)
        if best is None or key < best[0]:
            best = (key, basis, span)
    if best is None:
        return None
    (_, pivots), basis, Q = best
    projector = np.eye(d) - Q @ Q.T
    residual = max(spectral_norm(projector @ M @ Q) for M in matrices)
    return InvariantSubspace(basis, pivots, residual)


@dataclass(frozen=True)
class IrreducibilityReport:
    base: SymbolicPoint
    period_max: int
    loops: int
    subspace: Optional[InvariantSubspace]

    @property
    def irreducible(self) -> bool:
        return self.subspace is None


def irreducibility_test(gen: LocallyConstantGenerator, period_max: int = DEFAULT_PERIODIC_SEARCH,
                        symbol: int = 1) -> IrreducibilityReport:
    """Common invariant subspace of the return maps over periodic points of
    the cylinder [0; symbol], transported to the fiber of its least periodic point"""
    base = next(
        ((p, k) for p, k in periodic_points_up_to(gen.sft, period_max) if p[0] == symbol), None
    )
    if base is None:
        raise MissingAnchorError(f"No periodic point of period <= {period_max} in cylinder [0; {symbol}]")
    p, k = base
    loops = anchor_loop_matrices(gen, p, k, period_max)
    return IrreducibilityReport(p, period_max, len(loops), common_invariant_subspace(loops, gen.dimension))


# -- construction -----------------------------------------------------------

@dataclass(frozen=True)
class Obstruction:
    kind: ObstructionKind
    point: Optional[SymbolicPoint] = None
    value: Optional[float] = None
    detail: str = ""


@dataclass(frozen=True)
class ConstructedField:
    field: ConformalField
    certificate: BunchingCertificate
    anchors: dict[int, tuple[SymbolicPoint, ConformalStructure]]
    residual: float


def field_window(gen: LocallyConstantGenerator) -> Window:
    """Coordinates read by the extension formula: the holonomies touch
    x_{w_minus} .. x_{max(w_plus - w_minus - 1, 0)}"""
    w_minus, w_plus = gen.window
    return w_minus, max(w_plus - w_minus - 1, 0)


def construct_invariant_structure(
        gen: LocallyConstantGenerator,
        sft: Optional[Sft] = None,
        tau: Optional[float] = None,
        search_period_max: int = DEFAULT_PERIODIC_SEARCH,
        grid: Sequence[int] = DEFAULT_BUNCHING_GRID,
        loop_period_max: int = DEFAULT_LOOP_PERIOD,
) -> ConstructedField | Obstruction:
    sft = sft or gen.sft
    if tau is not None and tau != sft.tau:
        sft = Sft(sft.alphabet_size, sft.transitions, tau)
        gen = LocallyConstantGenerator(sft, gen.window, gen.table)
    unimodular = normalize_unimodular(gen)

    for p, k in periodic_points_up_to(sft, search_period_max):
        lam = lyapunov_periodic(unimodular, p, k).lambda_plus
        if lam > ZERO_EXPONENT_TOLERANCE:
            logger.info(f"Positive exponent {lam:.12g} at {p}: no invariant conformal structure")
            return Obstruction(ObstructionKind.POSITIVE_EXPONENT, p, lam, f"period {k}")

    cert = certify_over_grid(unimodular, grid)
    if cert is None:
        return Obstruction(ObstructionKind.NO_BUNCHING_CERTIFICATE, detail=f"N grid {list(grid)}")

    anchors = {}
    try:
        for symbol, (omega, k) in select_anchors(unimodular, sft, search_period_max).items():
            anchors[symbol] = (omega, anchor_structure(unimodular, omega, k, loop_period_max))
    except (NotEllipticError, NoConvergenceError) as e:
        logger.info(f"Anchor structure failed: {e}")
        return Obstruction(ObstructionKind.INCONSISTENT_EXTENSION, detail=str(e))

    lo, hi = field_window(gen)
    field = ConformalField.from_function(
        sft, (lo, hi),
        lambda word: extend_structure(unimodular, sft, anchors, sft.extend_word(Word(word, lo)), cert),
    )
    residual = verify_invariant_field(gen, field, sft)
    if residual > EXTENSION_RESIDUAL_TOLERANCE:
        logger.info(f"Extended field has invariance residual {residual:.6g}")
        return Obstruction(ObstructionKind.INCONSISTENT_EXTENSION, value=residual,
                           detail="extended field is not invariant")
    logger.info(f"Invariant conformal field on window {field.window}, residual {residual:.3g}")
    return ConstructedField(field, cert, anchors, residual)
