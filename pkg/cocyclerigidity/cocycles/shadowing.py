"""Periodic points mixing the orbits of two periodic points x and y.

One period of p^m reads, from coordinate -bm on: the y-segment on
[-bm, bm], a connector of m transitions from y_0 to x_0, the x-segment on
[(b+1)m, (b+c+1)m], and a connector of m transitions from x_0 back to y_0.
The period is u_m = (2b + c + 2)m.
"""
from dataclasses import dataclass, field
from math import ceil, exp, floor, lcm, log
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from cocyclerigidity.basic_utilities.parallel import parallel_map
from cocyclerigidity.cocycles.cocycle import (
    LocallyConstantGenerator,
    iterate_generator,
    log_distortion_lipschitz,
    log_norm,
    log_norm_series,
    lyapunov_periodic,
    sup_log_distortion,
)
from cocyclerigidity.cocycles.holonomy import bunching_membership_periodic
from cocyclerigidity.configuration.constants import (
    ITERATE_THRESHOLD_SCAN,
    MAX_SHADOW_CONSTANT,
    MAX_TUNING_B,
    ZERO_EXPONENT_TOLERANCE,
)
from cocyclerigidity.symbolic.sft_core import (
    Sft,
    SymbolicPoint,
    Word,
    connecting_word,
    mixing_index,
    periodic_points_up_to,
    rho_distance,
    shift,
)
from cocyclerigidity.utilities.exceptions import (
    InvalidConnectorError,
    PeriodMismatchError,
    ShadowingHypothesisFailsError,
)

# slack on the distance comparisons, which are exact up to exp rounding
DISTANCE_SLACK = 1e-12


@dataclass(frozen=True)
class ShadowingSpec:
    sft: Sft
    x: SymbolicPoint
    y: SymbolicPoint
    k: int
    m: int
    b: int
    c: int
    connectors: tuple[Word, Word]

    def __post_init__(self):
        if self.k < 1 or self.m < 1 or self.b < 1 or self.c < 1:
            raise PeriodMismatchError("k, m, b and c must be positive integers")
        if self.m % self.k:
            raise PeriodMismatchError(f"m = {self.m} is not a multiple of k = {self.k}")
        for name, point in (('x', self.x), ('y', self.y)):
            if shift(point, self.k) != point:
                raise PeriodMismatchError(f"f^{self.k}({name}) != {name}")
        self.sft.require(self.x, self.y)
        index = mixing_index(self.sft)
        if index is None or self.m < index:
            raise InvalidConnectorError(f"m = {self.m} is below the mixing index {index}")

        to_x, to_y = self.connectors
        ends = ((to_x, self.y[0], self.x[0]), (to_y, self.x[0], self.y[0]))
        for word, first, last in ends:
            if len(word) != self.m + 1:
                raise InvalidConnectorError(f"Connector {word.symbols} must make exactly {self.m} transitions")
            if word.symbols[0] != first or word.symbols[-1] != last:
                raise InvalidConnectorError(f"Connector {word.symbols} must join {first} to {last}")
            if not self.sft.is_valid_word(word.symbols):
                raise InvalidConnectorError(f"Connector {word.symbols} is not a valid word")

    @classmethod
    def with_least_connectors(cls, sft: Sft, x: SymbolicPoint, y: SymbolicPoint, k: int, m: int,
                              b: int, c: int) -> 'ShadowingSpec':
        """Connectors are the lexicographically least valid words"""
        connectors = (connecting_word(sft, y[0], x[0], m), connecting_word(sft, x[0], y[0], m))
        return cls(sft, x, y, k, m, b, c, connectors)

    @property
    def period(self) -> int:
        return (2 * self.b + self.c + 2) * self.m


def build_shadowing_point(spec: ShadowingSpec) -> tuple[SymbolicPoint, int]:
    b, c, m = spec.b, spec.c, spec.m
    to_x, to_y = spec.connectors
    word = (
        spec.y.window(-b * m, b * m)
        + to_x.symbols[1:-1]
        + spec.x.window(0, c * m)
        + to_y.symbols[1:-1]
    )
    u = spec.period
    if len(word) != u:
        raise PeriodMismatchError(f"Assembled period has {len(word)} symbols, expected {u}")
    p = SymbolicPoint.periodic(word, -b * m)
    spec.sft.require(p)
    return p, u


def shadowing_segments(spec: ShadowingSpec) -> list[tuple[str, SymbolicPoint, int, int]]:
    """(name, reference point, first iterate, segment length) of the three shadowing stretches"""
    b, c, m = spec.b, spec.c, spec.m
    return [
        ('y', spec.y, 0, b * m),
        ('x', spec.x, (b + 1) * m, c * m),
        ('y', spec.y, (b + c + 2) * m, b * m),
    ]


def shadowing_distance_violations(spec: ShadowingSpec,
                                  p: Optional[SymbolicPoint] = None) -> list[tuple[str, int, float, float]]:
    """Iterates n = offset + j where ρ(f^n(ref), f^n(p)) > max{e^{-jτ}, e^{-(len-j)τ}}"""
    p = p or build_shadowing_point(spec)[0]
    tau = spec.sft.tau
    violations = []
    for name, ref, offset, length in shadowing_segments(spec):
        for j in range(length + 1):
            n = offset + j
            rho = rho_distance(spec.sft, shift(ref, n), shift(p, n))
            bound = max(exp(-j * tau), exp(-(length - j) * tau))
            if rho > bound + DISTANCE_SLACK:
                violations.append((name, n, rho, bound))
    return violations


# -- parameter tuning -------------------------------------------------------

@dataclass(frozen=True)
class ShadowingParameters:
    b: int
    c: int
    eps: float
    chi: float


@dataclass(frozen=True)
class Infeasible:
    reason: str


def parameter_inequalities(b: int, c: int, xi: float, zeta: float, theta: float) -> tuple[bool, bool, bool]:
    """The three requirements on b once c is fixed"""
    budget = 0.9 * theta
    tenth = theta / 10
    first = zeta * (1 - b / (b + 1)) + tenth < budget
    second = (b / (b + 1)) * tenth + zeta / (b + 1) + (1 - (b + 1) / (b + c + 1)) * (xi + tenth) < budget
    total = b + c + 1
    third = (b / total) * tenth + zeta / total + (c / total) * (xi + tenth) + zeta * (1 - total / (total + 1)) < budget
    return first, second, third


def chi_rate(params: ShadowingParameters | tuple, lam: float, zeta: float) -> float:
    b, c, eps = (params.b, params.c, params.eps) if isinstance(params, ShadowingParameters) else params
    return c * (lam - eps) - 2 * b * eps - 2 * zeta


def tune_parameters(lam: float, xi: float, zeta: float, tau: float,
                    theta: float) -> ShadowingParameters | Infeasible:
    """Smallest c with cλ > 2ζ, then the smallest b meeting the three
    inequalities, then ε = min(θ/10, (cλ - 2ζ) / (2(c + 2b)))"""
    if not 0 < theta < tau:
        return Infeasible(f"theta = {theta:g} must lie in (0, tau = {tau:g})")
    if not lam > 0:
        return Infeasible(f"lambda = {lam:g} must be positive")
    if zeta < 0 or xi < 0:
        return Infeasible("zeta and xi must be nonnegative")

    # cλ - 2ζ must clear rounding, e.g. λ = log 2 and ζ = log 4 force c = 5
    margin = 1e-12 * max(1.0, zeta)
    c = max(1, floor(2 * zeta / lam))
    while c * lam - 2 * zeta <= margin:
        c += 1

    b_values = np.arange(1, MAX_TUNING_B + 1, dtype=float)
    tenth, budget = theta / 10, 0.9 * theta
    total = b_values + c + 1
    ok = (
        (zeta / (b_values + 1) + tenth < budget)
        & ((b_values / (b_values + 1)) * tenth + zeta / (b_values + 1)
           + (1 - (b_values + 1) / total) * (xi + tenth) < budget)
        & ((b_values / total) * tenth + zeta / total + (c / total) * (xi + tenth)
           + zeta * (1 - total / (total + 1)) < budget)
    )
    hits = np.flatnonzero(ok)
    # the vectorized scan and the scalar recheck can disagree in the last ulp
    for index in hits[:8]:
        b = int(b_values[index])
        if all(parameter_inequalities(b, c, xi, zeta, theta)):
            break
    else:
        return Infeasible(f"No b <= {MAX_TUNING_B} satisfies the three inequalities with c = {c}")

    eps = min(theta / 10, (c * lam - 2 * zeta) / (2 * (c + 2 * b)))
    chi = chi_rate((b, c, eps), lam, zeta)
    logger.debug(f"Shadowing parameters: b = {b}, c = {c}, ε = {eps:.12g}, χ = {chi:.12g}")
    return ShadowingParameters(b, c, eps, chi)


# -- norm growth along shadowing segments -----------------------------------

@dataclass(frozen=True)
class NormEstimate:
    """log-scale band n(λ ± ε) around log ‖A^n(q)‖ and the constant C closing it"""
    log_lower: float
    log_upper: float
    log_observed: float
    C: float


def shadow_norm_estimate(gen: LocallyConstantGenerator, p: SymbolicPoint, q: SymbolicPoint, n: int,
                         eps: float) -> NormEstimate:
    period = p.period
    if period is None:
        raise ShadowingHypothesisFailsError(f"{p} is not periodic")
    tau = gen.sft.tau
    for j in range(n + 1):
        rho = rho_distance(gen.sft, shift(p, j), shift(q, j))
        if rho > max(exp(-j * tau), exp(-(n - j) * tau)) + DISTANCE_SLACK:
            raise ShadowingHypothesisFailsError(f"ρ(f^{j}(p), f^{j}(q)) = {rho:.6g} exceeds the shadowing bound")
    lam = lyapunov_periodic(gen, p, period).lambda_plus
    observed = log_norm(gen, q, n)
    lower, upper = n * (lam - eps), n * (lam + eps)
    log_c = max(lower - observed, observed - upper, 0.0)
    if log_c > log(MAX_SHADOW_CONSTANT):
        raise ShadowingHypothesisFailsError(
            f"‖A^{n}(q)‖ leaves the band n(λ ± ε) by a factor e^{log_c:.6g}"
        )
    return NormEstimate(lower, upper, observed, exp(log_c))


def segment_constant(gen: LocallyConstantGenerator, spec: ShadowingSpec, p: SymbolicPoint, eps: float) -> float:
    """Largest constant of the norm band over the three shadowing segments"""
    return max(
        shadow_norm_estimate(gen, ref, shift(p, offset), length, eps).C
        for _, ref, offset, length in shadowing_segments(spec)
        if length > 0
    )


# -- block length N = r t ---------------------------------------------------

@dataclass(frozen=True)
class BlockLength:
    J: int
    r: int
    L: float
    C: float
    t: int

    @property
    def N(self) -> int:
        return self.r * self.t


def iterate_threshold(gen: LocallyConstantGenerator, x: SymbolicPoint, rate: float,
                      scan: int = ITERATE_THRESHOLD_SCAN) -> int:
    """Least J with log(‖A^j(x)‖ ‖A^j(x)^{-1}‖) <= j·rate for J <= j <= scan"""
    forward, backward = log_norm_series(gen, x, scan)
    j = np.arange(1, scan + 1)
    bad = np.flatnonzero(forward + backward > j * rate)
    return int(j[bad[-1]]) + 1 if bad.size else 1


def select_block_length(gen: LocallyConstantGenerator, x: SymbolicPoint, y: SymbolicPoint, k: int,
                        eps: float, tau: Optional[float] = None) -> BlockLength:
    tau = gen.sft.tau if tau is None else tau
    xi = lyapunov_periodic(gen, x, k).gap
    J = max(iterate_threshold(gen, y, eps), iterate_threshold(gen, x, xi + eps))
    r = k * ceil(J / k)
    L = log_distortion_lipschitz(iterate_generator(gen, r))
    C = 2 / (1 - exp(-tau))
    t = floor(3 * L * C / (r * eps)) + 1
    logger.debug(f"Block length: J = {J}, r = {r}, L = {L:.6g}, t = {t}, N = {r * t}")
    return BlockLength(J, r, L, C, t)


def contradiction_constant(field) -> float:
    """γ = max over the field's entries of max(λ_max(η), 1/λ_min(η))"""
    return max(eta.euclidean_bound for eta in field.table.values())


# -- experiment -------------------------------------------------------------

@dataclass(frozen=True)
class ShadowingPlan:
    x: Optional[SymbolicPoint]
    y: Optional[SymbolicPoint]
    k: int
    lambda_x: float
    xi: float
    zeta: float
    y_exponent: float
    params: ShadowingParameters | Infeasible | None
    specs: list[ShadowingSpec] = field(default_factory=list)

    @property
    def vacuous(self) -> bool:
        return self.x is None

    @property
    def precondition_met(self) -> bool:
        return not self.vacuous and abs(self.y_exponent) <= ZERO_EXPONENT_TOLERANCE


def plan_shadowing_experiment(gen: LocallyConstantGenerator, theta: float, m_list: Sequence[int],
                              period_max: int, tau: Optional[float] = None) -> ShadowingPlan:
    sft = gen.sft
    tau = sft.tau if tau is None else tau
    exponents = [(p, k, lyapunov_periodic(gen, p, k)) for p, k in periodic_points_up_to(sft, period_max)]
    positive = [(p, k, pair) for p, k, pair in exponents if pair.lambda_plus > ZERO_EXPONENT_TOLERANCE]
    zeta = sup_log_distortion(gen)
    if not positive:
        logger.warning(f"No periodic point of period <= {period_max} has a positive exponent; shadowing is vacuous")
        return ShadowingPlan(None, None, 0, 0.0, 0.0, zeta, 0.0, None)

    x, kx, pair_x = positive[0]
    y, ky, pair_y = min(exponents, key=lambda item: item[2].lambda_plus)
    k = lcm(kx, ky)
    params = tune_parameters(pair_x.lambda_plus, pair_x.gap, zeta, tau, theta)
    plan = ShadowingPlan(x, y, k, pair_x.lambda_plus, pair_x.gap, zeta, pair_y.lambda_plus, params)
    if isinstance(params, Infeasible):
        logger.warning(f"Shadowing parameters infeasible: {params.reason}")
        return plan

    index = mixing_index(sft) or 1
    ms = []
    for m in m_list:
        m_eff = k * ceil(max(m, index) / k)
        if m_eff != m:
            logger.info(f"m = {m} raised to {m_eff} (multiple of k = {k}, at least the mixing index {index})")
        if m_eff not in ms:
            ms.append(m_eff)
    plan.specs.extend(
        ShadowingSpec.with_least_connectors(sft, x, y, k, m, params.b, params.c) for m in ms
    )
    return plan


@dataclass(frozen=True)
class ShadowingRow:
    m: int
    u_m: int
    log_norm: float
    chi_reference: float
    in_D: bool
    N: int
    theta: float


def growth_and_membership_experiment(gen: LocallyConstantGenerator, specs: Sequence[ShadowingSpec], N: int,
                                     theta: float, params: ShadowingParameters,
                                     threads: int = 1) -> list[ShadowingRow]:
    """Per m: log ‖A^{u_m}(p^m)‖, the line χm - 3 log C and membership of p^m in D(N, θ)"""
    def row(spec: ShadowingSpec) -> ShadowingRow:
        p, u = build_shadowing_point(spec)
        C = segment_constant(gen, spec, p, params.eps)
        in_d, _ = bunching_membership_periodic(gen, p, u, N, theta)
        return ShadowingRow(spec.m, u, log_norm(gen, p, u), params.chi * spec.m - 3 * log(C), in_d, N, theta)

    rows = parallel_map(row, specs, threads)
    logger.info(f"Shadowing experiment: {len(rows)} rows, {sum(r.in_D for r in rows)} in D({N}, {theta:g})")
    return rows
