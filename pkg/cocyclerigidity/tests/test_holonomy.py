from math import ceil, log

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
)
from cocyclerigidity.cocycles.cocycle import block_log_distortion, sup_norm_bound
from cocyclerigidity.cocycles.conformal_geom import ConformalStructure, distance, pull
from cocyclerigidity.cocycles.holonomy import (
    BunchingCertificate,
    anchor_structure,
    block_graph,
    bunching_membership,
    bunching_membership_periodic,
    bunching_witness,
    certify_over_grid,
    certify_uniform_bunching,
    extend_structure,
    fit_holonomy_constant,
    gap_check,
    holonomy,
    point_certificate,
    random_local_pairs,
    select_anchors,
    stable_holonomy,
    transport_matrix,
    truncated_stable_holonomy,
    truncated_unstable_holonomy,
    unstable_holonomy,
)
from cocyclerigidity.configuration.constants import BunchingScope, HolonomyKind
from cocyclerigidity.symbolic.sft_core import SymbolicPoint, bracket, periodic_points_up_to, rho_distance, shift
from cocyclerigidity.utilities.exceptions import (
    BlockTooLargeError,
    MissingAnchorError,
    NoCertificateError,
    NotOnStableSetError,
    NotOnUnstableSetError,
    NotPeriodicError,
)


def bunched():
    return random_bunched_generator(full_shift(), seed=7, window=(-1, 1))


def brute_force_witness(gen, x, N, blocks, tail=60):
    """Prefix averages over ``blocks`` blocks, plus the long-run block mean
    read off ``tail`` blocks far out on either side"""
    def values(sign, start, count):
        if sign > 0:
            return np.array([block_log_distortion(gen, x, j * N, N) for j in range(start, start + count)])
        return np.array([block_log_distortion(gen, x, -(j + 1) * N, N) for j in range(start, start + count)])

    s = np.arange(1, blocks + 1)
    best = max((np.cumsum(values(sign, 0, blocks)) / s).max() for sign in (1, -1))
    tails = max(values(sign, 5 * blocks, tail).mean() for sign in (1, -1))
    return max(best, tails) / N


# -- D(N, θ) ----------------------------------------------------------------

@pytest.mark.parametrize("gen", [
    mixed_generator(golden_mean_shift()),
    past_dependent_generator(full_shift()),
    random_bunched_generator(full_shift(), seed=2, window=(-1, 1), scale=0.4),
])
def test_membership_agrees_with_brute_force_on_periodic_points(gen):
    rng = np.random.default_rng(np.random.SeedSequence(31))
    periodic = periodic_points_up_to(gen.sft, 6)
    for _ in range(100):
        p, k = periodic[int(rng.integers(len(periodic)))]
        N = int(rng.integers(1, 4))
        theta = float(rng.uniform(0.0, 1.0))
        expected = brute_force_witness(gen, p, N, 10 * k + 10)
        member, witness = bunching_membership_periodic(gen, p, k, N, theta)
        assert witness == pytest.approx(expected, abs=1e-12)
        assert member == (expected <= theta + 1e-12)


def test_membership_at_eventually_periodic_points():
    gen = past_dependent_generator(full_shift())
    x = SymbolicPoint.build((1, 2), (2, 2, 1, 1, 1, 2), (2, 1, 1), -4)
    for N in (1, 2, 5):
        assert bunching_witness(gen, x, N) == pytest.approx(brute_force_witness(gen, x, N, 60), abs=1e-12)


def test_membership_needs_period():
    gen = orthogonal_generator(full_shift())
    with pytest.raises(NotPeriodicError):
        bunching_membership_periodic(gen, SymbolicPoint.periodic((1, 2)), 3, 1, 0.5)


def test_isometric_points_are_in_every_set():
    gen = orthogonal_generator(full_shift())
    member, witness = bunching_membership(gen, SymbolicPoint.periodic((1, 2, 2)), 3, 0.0)
    assert member and abs(witness) <= 1e-12
    cert = point_certificate(gen, SymbolicPoint.constant(1), 1, 0.1)
    assert cert.scope is BunchingScope.POINT and cert.valid_for_holonomy


def test_certificate_validation():
    with pytest.raises(ValueError):
        BunchingCertificate(0, 0.5, BunchingScope.UNIFORM, 0.1, 1.0)
    with pytest.raises(ValueError):
        BunchingCertificate(1, 0.5, BunchingScope.UNIFORM, 0.6, 1.0)
    assert not BunchingCertificate(1, 1.5, BunchingScope.UNIFORM, 0.6, 1.0).valid_for_holonomy


# -- uniform certificates ---------------------------------------------------

def test_uniform_certificates():
    iso = certify_uniform_bunching(orthogonal_generator(full_shift()))
    assert iso.scope is BunchingScope.UNIFORM and iso.witness == pytest.approx(0.0, abs=1e-12)

    # log(‖A‖‖A⁻¹‖) = log 4 on every block of diag(2, 1/2)
    assert certify_uniform_bunching(diagonal_generator(full_shift()), N=3) is None
    relaxed = certify_uniform_bunching(diagonal_generator(full_shift(tau=2.0)), N=2)
    assert relaxed.witness == pytest.approx(log(4), abs=1e-12)
    assert certify_uniform_bunching(diagonal_generator(full_shift(tau=2.0)), N=2, theta=1.0) is None


def test_certify_over_grid_stops_at_large_blocks():
    gen = random_bunched_generator(full_shift(4), seed=5, scale=3.0)
    with pytest.raises(BlockTooLargeError):
        block_graph(gen, 7)
    assert certify_over_grid(diagonal_generator(full_shift(4)), [1, 2, 7, 8]) is None
    assert certify_over_grid(bunched(), [1, 2]).N == 1


# -- holonomies -------------------------------------------------------------

def test_truncated_holonomies_stabilize_past_the_window():
    gen = bunched()
    cert = certify_over_grid(gen, [1, 2, 3])
    for kind in HolonomyKind:
        for y, z in random_local_pairs(gen.sft, kind, 50, seed=4):
            truncated = truncated_stable_holonomy if kind is HolonomyKind.STABLE else truncated_unstable_holonomy
            H = holonomy(gen, kind, y, z, cert)
            for n in (2, 5):
                assert np.allclose(truncated(gen, y, z, n), truncated(gen, y, z, n + 16), atol=1e-12)
                assert np.allclose(truncated(gen, y, z, n), H, atol=1e-12)


def test_fitted_lipschitz_constant_bounds_every_pair():
    gen = bunched()
    cert = certify_over_grid(gen, [1, 2, 3])
    pairs = random_local_pairs(gen.sft, HolonomyKind.STABLE, 1000, seed=12)
    L = fit_holonomy_constant(gen, pairs, HolonomyKind.STABLE, cert)
    assert L > 0
    for y, z in pairs:
        deviation = np.linalg.norm(stable_holonomy(gen, y, z, cert) - np.eye(2), 2)
        assert deviation <= L * rho_distance(gen.sft, y, z) + 1e-12


def test_holonomies_compose_and_are_invariant():
    gen = random_bunched_generator(full_shift(), seed=7, window=(-1, 1))
    cert = certify_over_grid(gen, [1, 2, 3])
    for (y, z), (_, w) in zip(random_local_pairs(gen.sft, HolonomyKind.STABLE, 30, seed=1),
                              random_local_pairs(gen.sft, HolonomyKind.STABLE, 30, seed=2)):
        if w[0] != y[0]:
            continue
        w = bracket(w, y)
        H_yz = stable_holonomy(gen, y, z, cert)
        H_zw = stable_holonomy(gen, z, w, cert)
        assert np.linalg.norm(H_zw @ H_yz - stable_holonomy(gen, y, w, cert)) <= 1e-10
        # H_{f(y) f(z)} A(y) = A(z) H_{yz}
        H_next = stable_holonomy(gen, shift(y, 1), shift(z, 1), cert)
        assert np.linalg.norm(H_next @ gen.at(y) - gen.at(z) @ H_yz) <= 1e-10
    for y, z in random_local_pairs(gen.sft, HolonomyKind.UNSTABLE, 30, seed=3):
        H_yz = unstable_holonomy(gen, y, z, cert)
        H_back = unstable_holonomy(gen, shift(y, -1), shift(z, -1), cert)
        assert np.linalg.norm(H_yz @ gen.at(shift(y, -1)) - gen.at(shift(z, -1)) @ H_back) <= 1e-10


def test_holonomy_preconditions():
    gen = bunched()
    cert = certify_over_grid(gen, [1, 2])
    y = SymbolicPoint.constant(1)
    z = SymbolicPoint.build((1,), (2,), (1,), 2)
    with pytest.raises(NotOnStableSetError):
        stable_holonomy(gen, y, z, cert)
    with pytest.raises(NotOnUnstableSetError):
        unstable_holonomy(gen, y, shift(z, 4), cert)
    with pytest.raises(NoCertificateError):
        stable_holonomy(gen, y, shift(z, 4), None)
    weak = BunchingCertificate(1, 2.0, BunchingScope.UNIFORM, 0.1, 1.0)
    with pytest.raises(NoCertificateError):
        stable_holonomy(gen, y, shift(z, 4), weak)


def test_point_certificates_are_checked_at_both_ends():
    gen = mixed_generator(golden_mean_shift())
    y = SymbolicPoint.constant(1)
    cert = point_certificate(gen, y, 1, 0.5)
    member, _ = bunching_membership(gen, y, 1, 0.5)
    assert (cert is not None) == member
    if cert is not None:
        far = SymbolicPoint.build((2, 1), (1,), (1,), 0)
        if not bunching_membership(gen, far, 1, 0.5)[0]:
            with pytest.raises(NoCertificateError):
                stable_holonomy(gen, y, far, cert)


# -- extension --------------------------------------------------------------

def test_extension_reproduces_constant_invariant_structure():
    S = np.array([[1.0, 0.3], [0.0, 1.0]])
    Sinv = np.linalg.inv(S)
    expected = ConformalStructure.normalize(Sinv.T @ Sinv)
    gen = conjugated_rotation_generator(full_shift())
    cert = certify_over_grid(gen, [1, 2, 3, 4])
    anchors = {
        symbol: (omega, anchor_structure(gen, omega, k, 3))
        for symbol, (omega, k) in select_anchors(gen, search_period_max=4).items()
    }
    for omega, eta in anchors.values():
        assert distance(eta, expected) <= 1e-8
    for p, k in periodic_points_up_to(gen.sft, 5):
        eta = extend_structure(gen, None, anchors, p, cert)
        assert distance(eta, expected) <= 1e-8
        assert distance(pull(gen.at(p), eta), extend_structure(gen, None, anchors, shift(p, 1), cert)) <= 1e-8


def test_transport_matrix_between_anchor_and_point():
    gen = random_bunched_generator(full_shift(), seed=9, window=(-1, 1))
    omega = SymbolicPoint.constant(1)
    x = SymbolicPoint.build((1, 2), (2, 1, 2), (1,), -1)
    w = bracket(omega, x)
    expected = truncated_stable_holonomy(gen, w, x, 1) @ truncated_unstable_holonomy(gen, omega, w, 1)
    assert np.allclose(transport_matrix(gen, omega, x), expected, atol=1e-14)
    assert np.allclose(transport_matrix(gen, omega, omega), np.eye(2), atol=1e-14)


def test_anchor_selection():
    anchors = select_anchors(orthogonal_generator(full_shift()))
    assert anchors == {1: (SymbolicPoint.constant(1), 1), 2: (SymbolicPoint.constant(2), 1)}
    with pytest.raises(MissingAnchorError):
        select_anchors(diagonal_generator(full_shift()), search_period_max=3)
    gen = orthogonal_generator(full_shift())
    with pytest.raises(MissingAnchorError):
        extend_structure(gen, None, {1: (SymbolicPoint.constant(1), ConformalStructure.identity(2))},
                         SymbolicPoint.constant(2), certify_over_grid(gen, [1]))


# -- gap proposition --------------------------------------------------------

@pytest.mark.parametrize("gen", [
    bunched(),
    mixed_generator(golden_mean_shift()),
    past_dependent_generator(full_shift()),
])
def test_gap_proposition_has_no_counterexamples(gen):
    eps = 0.2
    N = max(1, ceil(4 * log(sup_norm_bound(gen)) / eps))
    report = gap_check(gen, N, theta=0.5, eps=eps, trials=1000, seed=21)
    assert report.condition_holds
    assert report.passed
    assert report.checked > 0
    assert report.trials == 1000
    assert report.R == pytest.approx(sup_norm_bound(gen))


def test_gap_condition_reported_when_blocks_are_short():
    report = gap_check(diagonal_generator(full_shift()), 1, theta=2.0, eps=0.1, trials=10, seed=0)
    assert not report.condition_holds
    assert report.checked == 10
