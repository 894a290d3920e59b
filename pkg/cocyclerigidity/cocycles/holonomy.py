"""Fiber-bunching sets D(N, θ), holonomies and the extension of invariant
conformal structures along local stable and unstable sets.

A point x lies in D(N, θ) when, for every s >= 1,

    Σ_{j<s} log(‖A^N(f^{jN}x)‖ ‖A^N(f^{jN}x)^{-1}‖) <= sNθ

and the same holds for the backward blocks A^{-N}(f^{-jN}x).
"""
from dataclasses import dataclass
from math import ceil, gcd, log
from typing import Mapping, Optional, Sequence

import networkx as nx
import numpy as np
from loguru import logger

from cocyclerigidity.cocycles.cocycle import (
    LocallyConstantGenerator,
    block_log_distortion,
    evaluate,
    log_condition,
    lyapunov_periodic,
    renormalized_product,
    spectral_norm,
    sup_norm_bound,
)
from cocyclerigidity.cocycles.conformal_geom import (
    ConformalStructure,
    common_invariant_structure,
    pull,
)
from cocyclerigidity.configuration.constants import (
    BUNCHING_TOLERANCE,
    DEFAULT_PERIODIC_SEARCH,
    MAX_WINDOW_WORDS,
    ZERO_EXPONENT_TOLERANCE,
    BunchingScope,
    HolonomyKind,
)
from cocyclerigidity.symbolic.sft_core import (
    Sft,
    SymbolicPoint,
    Word,
    bracket,
    enumerate_periodic,
    on_local_stable_set,
    on_local_unstable_set,
    periodic_points_up_to,
    rho_distance,
    shift,
)
from cocyclerigidity.utilities.exceptions import (
    BlockTooLargeError,
    MissingAnchorError,
    NoCertificateError,
    NotOnStableSetError,
    NotOnUnstableSetError,
    NotPeriodicError,
)
from cocyclerigidity.utilities.mean_cycle import maximum_mean_cycle


@dataclass(frozen=True)
class BunchingCertificate:
    """Evidence that points lie in D(N, θ).

    ``witness`` is measured per step, like ``theta``: the largest prefix
    average over N for point scope, the maximum cycle mean over N for
    uniform scope.
    """
    N: int
    theta: float
    scope: BunchingScope
    witness: float
    tau: float
    point: Optional[SymbolicPoint] = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"Block length must be positive, got {self.N}")
        if self.witness > self.theta + BUNCHING_TOLERANCE:
            raise ValueError(f"Witness {self.witness:.15g} exceeds theta {self.theta:.15g}")

    @property
    def valid_for_holonomy(self) -> bool:
        return self.theta < self.tau


# -- membership at eventually periodic points -------------------------------

@dataclass(frozen=True)
class _BlockSequence:
    """Block values a_0 .. a_{j0+P-1}; from j0 on they repeat with period P"""
    values: np.ndarray
    transient: int
    period: int


def _forward_blocks(gen: LocallyConstantGenerator, x: SymbolicPoint, N: int) -> _BlockSequence:
    w_minus = gen.window[0]
    transient = max(0, ceil((x.end - w_minus) / N))
    R = len(x.right_cycle)
    period = R // gcd(R, N)
    values = [block_log_distortion(gen, x, j * N, N) for j in range(transient + period)]
    return _BlockSequence(np.array(values), transient, period)


def _backward_blocks(gen: LocallyConstantGenerator, x: SymbolicPoint, N: int) -> _BlockSequence:
    # A^{-N}(f^{-jN}x) = A^N(f^{-(j+1)N}x)^{-1}, which has the same distortion
    w_plus = gen.window[1]
    transient = max(0, (w_plus - 1 - x.start) // N + 1)
    L = len(x.left_cycle)
    period = L // gcd(L, N)
    values = [block_log_distortion(gen, x, -(j + 1) * N, N) for j in range(transient + period)]
    return _BlockSequence(np.array(values), transient, period)


def _sup_average(blocks: _BlockSequence) -> float:
    """sup over s >= 1 of (1/s) Σ_{j<s} a_j.

    Every prefix longer than transient + period is a mediant of a shorter
    prefix and the cycle average, so the finite maximum below is exact."""
    sums = np.cumsum(blocks.values)
    prefix = float((sums / np.arange(1, len(sums) + 1)).max())
    cycle = float(blocks.values[blocks.transient:].sum() / blocks.period)
    return max(prefix, cycle)


def bunching_witness(gen: LocallyConstantGenerator, x: SymbolicPoint, N: int) -> float:
    """Smallest θ with x in D(N, θ), forward and backward conditions combined"""
    if N < 1:
        raise ValueError(f"Block length must be positive, got {N}")
    forward = _sup_average(_forward_blocks(gen, x, N))
    backward = _sup_average(_backward_blocks(gen, x, N))
    return max(forward, backward) / N


def bunching_membership(gen: LocallyConstantGenerator, x: SymbolicPoint, N: int,
                        theta: float) -> tuple[bool, float]:
    """Exact decision of x in D(N, θ) for an eventually periodic x"""
    gen.sft.require(x)
    witness = bunching_witness(gen, x, N)
    return witness <= theta + BUNCHING_TOLERANCE, witness


def bunching_membership_periodic(gen: LocallyConstantGenerator, p: SymbolicPoint, k: int, N: int,
                                 theta: float) -> tuple[bool, float]:
    if k < 1 or shift(p, k) != p:
        raise NotPeriodicError(f"f^{k}(p) != p for {p}")
    return bunching_membership(gen, p, N, theta)


def point_certificate(gen: LocallyConstantGenerator, x: SymbolicPoint, N: int, theta: float,
                      tau: Optional[float] = None) -> Optional[BunchingCertificate]:
    tau = gen.sft.tau if tau is None else tau
    member, witness = bunching_membership(gen, x, N, theta)
    if not member:
        logger.debug(f"{x} not in D({N}, {theta:g}): witness {witness:.12g}")
        return None
    return BunchingCertificate(N, theta, BunchingScope.POINT, min(witness, theta), tau, x)


# -- uniform certificate ----------------------------------------------------

def block_graph(gen: LocallyConstantGenerator, N: int) -> nx.DiGraph:
    """Vertices are the valid words read by one N-block, weighted by the
    block log-distortion; edges join consecutive blocks."""
    w_minus, w_plus = gen.window
    length = N + gen.width - 1
    words = gen.sft.window_words(w_minus, N - 1 + w_plus)
    if len(words) > MAX_WINDOW_WORDS:
        raise BlockTooLargeError(f"Block graph for N={N} needs {len(words)} words, above {MAX_WINDOW_WORDS}")

    graph = nx.DiGraph()
    width = gen.width
    for word in words:
        _, B = renormalized_product((gen.table[word[j:j + width]] for j in range(N)), gen.dimension)
        graph.add_node(word, weight=log_condition(B))

    overlap = length - N
    if overlap == 0:
        for u in words:
            for v in words:
                if gen.sft.allowed(u[-1], v[0]):
                    graph.add_edge(u, v)
    else:
        by_prefix: dict[tuple[int, ...], list] = {}
        for v in words:
            by_prefix.setdefault(v[:overlap], []).append(v)
        for u in words:
            for v in by_prefix.get(u[N:], []):
                graph.add_edge(u, v)
    logger.debug(f"Block graph N={N}: {graph.number_of_nodes()} words, {graph.number_of_edges()} edges")
    return graph


def uniform_bunching_value(gen: LocallyConstantGenerator, N: int) -> float:
    """θ* = (max cycle mean of block distortion) / N"""
    return maximum_mean_cycle(block_graph(gen, N)) / N


def certify_uniform_bunching(gen: LocallyConstantGenerator, sft: Optional[Sft] = None, N: int = 1,
                             theta: Optional[float] = None) -> Optional[BunchingCertificate]:
    """Uniform certificate with θ = θ* (or the requested θ >= θ*), None when θ* >= τ"""
    sft = sft or gen.sft
    theta_star = max(uniform_bunching_value(gen, N), 0.0)
    if theta_star >= sft.tau:
        logger.debug(f"No uniform certificate at N={N}: θ* = {theta_star:.12g} >= τ = {sft.tau:g}")
        return None
    if theta is not None and theta_star > theta + BUNCHING_TOLERANCE:
        return None
    theta = theta_star if theta is None else theta
    return BunchingCertificate(N, theta, BunchingScope.UNIFORM, theta_star, sft.tau)


def certify_over_grid(gen: LocallyConstantGenerator, grid: Sequence[int]) -> Optional[BunchingCertificate]:
    """First uniform certificate along the N grid"""
    for N in grid:
        try:
            cert = certify_uniform_bunching(gen, gen.sft, N)
        except BlockTooLargeError as e:
            logger.warning(f"Stopping the bunching grid at N={N}: {e}")
            return None
        if cert is not None:
            logger.info(f"Uniform bunching certificate at N={N}, θ* = {cert.witness:.12g}")
            return cert
    return None


# -- holonomies -------------------------------------------------------------

def _require_certificate(gen: LocallyConstantGenerator, cert: Optional[BunchingCertificate],
                         *points: SymbolicPoint) -> None:
    if cert is None or not cert.valid_for_holonomy:
        raise NoCertificateError("Holonomies need a bunching certificate with theta < tau")
    if cert.scope is BunchingScope.POINT:
        for x in points:
            member, witness = bunching_membership(gen, x, cert.N, cert.theta)
            if not member:
                raise NoCertificateError(
                    f"{x} is outside D({cert.N}, {cert.theta:g}) (witness {witness:.12g})"
                )


def truncated_stable_holonomy(gen: LocallyConstantGenerator, y: SymbolicPoint, z: SymbolicPoint,
                              n: int) -> np.ndarray:
    """A^n(z)^{-1} A^n(y)"""
    return np.linalg.solve(evaluate(gen, z, n), evaluate(gen, y, n))


def truncated_unstable_holonomy(gen: LocallyConstantGenerator, y: SymbolicPoint, z: SymbolicPoint,
                                n: int) -> np.ndarray:
    """A^n(f^{-n}z) A^{-n}(y), the backward-iterate form"""
    return evaluate(gen, shift(z, -n), n) @ evaluate(gen, y, -n)


def _stable(gen: LocallyConstantGenerator, y: SymbolicPoint, z: SymbolicPoint) -> np.ndarray:
    # f^n(y) and f^n(z) read the same window once n >= |w_minus|
    return truncated_stable_holonomy(gen, y, z, -gen.window[0])


def _unstable(gen: LocallyConstantGenerator, y: SymbolicPoint, z: SymbolicPoint) -> np.ndarray:
    return truncated_unstable_holonomy(gen, y, z, gen.window[1])


def stable_holonomy(gen: LocallyConstantGenerator, y: SymbolicPoint, z: SymbolicPoint,
                    cert: BunchingCertificate) -> np.ndarray:
    if not on_local_stable_set(y, z):
        raise NotOnStableSetError(f"{z} is not on the local stable set of {y}")
    _require_certificate(gen, cert, y, z)
    return _stable(gen, y, z)


def unstable_holonomy(gen: LocallyConstantGenerator, y: SymbolicPoint, z: SymbolicPoint,
                      cert: BunchingCertificate) -> np.ndarray:
    if not on_local_unstable_set(y, z):
        raise NotOnUnstableSetError(f"{z} is not on the local unstable set of {y}")
    _require_certificate(gen, cert, y, z)
    return _unstable(gen, y, z)


def holonomy(gen: LocallyConstantGenerator, kind: HolonomyKind, y: SymbolicPoint, z: SymbolicPoint,
             cert: BunchingCertificate) -> np.ndarray:
    if kind is HolonomyKind.STABLE:
        return stable_holonomy(gen, y, z, cert)
    return unstable_holonomy(gen, y, z, cert)


def transport_matrix(gen: LocallyConstantGenerator, omega: SymbolicPoint, x: SymbolicPoint) -> np.ndarray:
    """H^s_{[ω,x],x} H^u_{ω,[ω,x]} for ω and x in the same cylinder [0; i]"""
    w = bracket(omega, x)
    return _stable(gen, w, x) @ _unstable(gen, omega, w)


# -- extension of invariant structures --------------------------------------

Anchors = Mapping[int, tuple[SymbolicPoint, ConformalStructure]]


def anchors_by_symbol(anchors: Sequence[tuple[SymbolicPoint, ConformalStructure]] | Anchors) -> dict:
    if isinstance(anchors, Mapping):
        return dict(anchors)
    return {omega[0]: (omega, eta) for omega, eta in anchors}


def extend_structure(gen: LocallyConstantGenerator, sft: Optional[Sft],
                     anchors: Sequence[tuple[SymbolicPoint, ConformalStructure]] | Anchors,
                     x: SymbolicPoint, cert: BunchingCertificate) -> ConformalStructure:
    """η̂_x = H^s_{[ω,x],x} H^u_{ω,[ω,x]}[η_ω] with ω the anchor of x's cylinder"""
    (sft or gen.sft).require(x)
    table = anchors_by_symbol(anchors)
    if x[0] not in table:
        raise MissingAnchorError(f"No anchor for the cylinder [0; {x[0]}]")
    omega, eta = table[x[0]]
    _require_certificate(gen, cert, omega, x)
    return pull(transport_matrix(gen, omega, x), eta)


def select_anchors(gen: LocallyConstantGenerator, sft: Optional[Sft] = None,
                   search_period_max: int = DEFAULT_PERIODIC_SEARCH) -> dict[int, tuple[SymbolicPoint, int]]:
    """Least periodic point (by period, then word) with λ₊ <= tolerance in each cylinder"""
    sft = sft or gen.sft
    chosen: dict[int, tuple[SymbolicPoint, int]] = {}
    for p, k in periodic_points_up_to(sft, search_period_max):
        if p[0] in chosen:
            continue
        if lyapunov_periodic(gen, p, k).lambda_plus <= ZERO_EXPONENT_TOLERANCE:
            chosen[p[0]] = (p, k)
            logger.debug(f"Anchor for cylinder {p[0]}: {p} (period {k})")
    missing = [a for a in sft.symbols if a not in chosen]
    if missing:
        raise MissingAnchorError(
            f"No periodic point of period <= {search_period_max} with zero exponent in cylinders {missing}"
        )
    return dict(sorted(chosen.items()))


def anchor_loop_matrices(gen: LocallyConstantGenerator, anchor: SymbolicPoint, period: int,
                         loop_period_max: int) -> list[np.ndarray]:
    """Return maps T^{-1} A^k(q) T for the periodic points q of the anchor's
    cylinder, T transporting the anchor to q. An invariant field restricted
    to the anchor is a common fixed point of their pullbacks."""
    loops = [evaluate(gen, anchor, period)]
    for q, k in periodic_points_up_to(gen.sft, loop_period_max):
        if q[0] != anchor[0] or q == anchor:
            continue
        T = transport_matrix(gen, anchor, q)
        loops.append(np.linalg.solve(T, evaluate(gen, q, k) @ T))
    return loops


def anchor_structure(gen: LocallyConstantGenerator, anchor: SymbolicPoint, period: int,
                     loop_period_max: int) -> ConformalStructure:
    return common_invariant_structure(anchor_loop_matrices(gen, anchor, period, loop_period_max))


# -- gap proposition --------------------------------------------------------

@dataclass(frozen=True)
class GapReport:
    R: float
    condition_holds: bool
    trials: int
    checked: int
    counterexample: Optional[SymbolicPoint] = None

    @property
    def passed(self) -> bool:
        return self.counterexample is None


def gap_check(gen: LocallyConstantGenerator, N: int, theta: float, eps: float, trials: int,
              seed: int, period_max: int = DEFAULT_PERIODIC_SEARCH) -> GapReport:
    """R^4 <= e^{Nε} and f^{-1}(p) in D(N, θ+ε) for random periodic p in D(N, θ)"""
    R = sup_norm_bound(gen)
    condition = 4 * log(R) <= N * eps
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    by_period = {k: enumerate_periodic(gen.sft, k) for k in range(1, period_max + 1)}
    periods = [k for k, points in by_period.items() if points]
    checked = 0
    for _ in range(trials):
        k = int(rng.choice(periods))
        p = by_period[k][int(rng.integers(len(by_period[k])))]
        member, _ = bunching_membership(gen, p, N, theta)
        if not member:
            continue
        checked += 1
        member_before, witness = bunching_membership(gen, shift(p, -1), N, theta + eps)
        if condition and not member_before:
            logger.warning(f"Gap check counterexample {p}: witness {witness:.12g} > {theta + eps:g}")
            return GapReport(R, condition, trials, checked, p)
    logger.debug(f"Gap check: R = {R:.12g}, condition {condition}, {checked}/{trials} points in D({N}, {theta:g})")
    return GapReport(R, condition, trials, checked)


# -- Lipschitz constants of holonomies --------------------------------------

def random_point_through(sft: Sft, symbol: int, radius: int, rng: np.random.Generator) -> SymbolicPoint:
    """Random eventually periodic point with x_0 = symbol and a random
    valid word on [-radius, radius]"""
    past = [symbol]
    for _ in range(radius):
        past.append(int(rng.choice(sft.predecessors(past[-1]))))
    future = [symbol]
    for _ in range(radius):
        future.append(int(rng.choice(sft.successors(future[-1]))))
    symbols = tuple(reversed(past)) + tuple(future[1:])
    return sft.extend_word(Word(symbols, -radius))


def random_local_pairs(sft: Sft, kind: HolonomyKind, count: int, seed: int,
                       radius: int = 8) -> list[tuple[SymbolicPoint, SymbolicPoint]]:
    """Pairs (y, z) on a common local stable (or unstable) set"""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    pairs = []
    for _ in range(count):
        a = int(rng.integers(1, sft.alphabet_size + 1))
        y = random_point_through(sft, a, radius, rng)
        w = random_point_through(sft, a, radius, rng)
        z = bracket(w, y) if kind is HolonomyKind.STABLE else bracket(y, w)
        pairs.append((y, z))
    return pairs


def fit_holonomy_constant(gen: LocallyConstantGenerator,
                          pairs: Sequence[tuple[SymbolicPoint, SymbolicPoint]],
                          kind: HolonomyKind, cert: BunchingCertificate) -> float:
    """L = max ‖H_{yz} - I‖ / ρ(y, z) over pairs with y != z"""
    L = 0.0
    for y, z in pairs:
        rho = rho_distance(gen.sft, y, z)
        if rho == 0.0:
            continue
        H = holonomy(gen, kind, y, z, cert)
        L = max(L, spectral_norm(H - np.eye(gen.dimension)) / rho)
    return L
