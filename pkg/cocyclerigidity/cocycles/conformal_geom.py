"""Conformal structures as unit-determinant SPD matrices.

The group acts by ``push(B, η) = det(BᵀηB)^{-1/d} BᵀηB`` and
``pull(B, η) = push(B⁻¹, η)``. Invariance of a field under a cocycle reads
``pull(A(x), η_x) = η_{f(x)}``. Distances are affine-invariant, so both
actions are isometries of a space of nonpositive curvature.
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh, eigvalsh
from loguru import logger

from cocyclerigidity.configuration.constants import (
    DETERMINANT_TOLERANCE,
    ELLIPTIC_DISTORTION_BOUND,
    ELLIPTIC_MAX_ITER,
    ELLIPTIC_POWER_CHECK,
    ELLIPTIC_TOLERANCE,
    KARCHER_MAX_ITER,
    KARCHER_TOLERANCE,
    SYMMETRY_TOLERANCE,
)
from cocyclerigidity.utilities.exceptions import (
    InvalidStructureError,
    NoConvergenceError,
    NotEllipticError,
)


def symmetrize(A: np.ndarray) -> np.ndarray:
    return (A + A.T) / 2


def _spectral_function(S: np.ndarray, fn) -> np.ndarray:
    """V fn(w) Vᵀ for the eigendecomposition S = V diag(w) Vᵀ"""
    w, V = eigh(symmetrize(S))
    return (V * fn(w)) @ V.T


def sqrtm(S: np.ndarray) -> np.ndarray:
    return _spectral_function(S, np.sqrt)


def invsqrtm(S: np.ndarray) -> np.ndarray:
    return _spectral_function(S, lambda w: 1.0 / np.sqrt(w))


def logm(S: np.ndarray) -> np.ndarray:
    return _spectral_function(S, np.log)


def expm(S: np.ndarray) -> np.ndarray:
    return _spectral_function(S, np.exp)


def powm(S: np.ndarray, t: float) -> np.ndarray:
    return _spectral_function(S, lambda w: w ** t)


def _unit_determinant(S: np.ndarray) -> np.ndarray:
    S = symmetrize(S)
    w = eigvalsh(S)
    if w[0] <= 0:
        raise InvalidStructureError(f"Form is not positive definite (smallest eigenvalue {w[0]:.3g})")
    return S / np.exp(np.mean(np.log(w)))


@dataclass(frozen=True, eq=False)
class ConformalStructure:
    form: np.ndarray

    def __post_init__(self):
        form = np.array(self.form, dtype=float)
        if form.ndim != 2 or form.shape[0] != form.shape[1]:
            raise InvalidStructureError("A conformal structure is a square matrix")
        if np.abs(form - form.T).max() > SYMMETRY_TOLERANCE * max(1.0, np.abs(form).max()):
            raise InvalidStructureError("Form is not symmetric")
        w = eigvalsh(form)
        if w[0] <= 0:
            raise InvalidStructureError("Form is not positive definite")
        if abs(np.prod(w) - 1.0) > DETERMINANT_TOLERANCE:
            raise InvalidStructureError(f"Form has determinant {np.prod(w):.15g}, expected 1")
        form.setflags(write=False)
        object.__setattr__(self, 'form', form)

    @classmethod
    def normalize(cls, S) -> 'ConformalStructure':
        """Class of the inner product S: symmetrized and scaled to det 1"""
        return cls(_unit_determinant(np.asarray(S, dtype=float)))

    @classmethod
    def identity(cls, d: int) -> 'ConformalStructure':
        return cls(np.eye(d))

    @property
    def dimension(self) -> int:
        return self.form.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return eigvalsh(self.form)

    @property
    def eccentricity(self) -> float:
        """sqrt(λ_max / λ_min)"""
        w = self.eigenvalues
        return float(np.sqrt(w[-1] / w[0]))

    @property
    def euclidean_bound(self) -> float:
        """γ with γ⁻¹‖v‖² <= η(v, v) <= γ‖v‖²"""
        w = self.eigenvalues
        return float(max(w[-1], 1.0 / w[0]))

    def __repr__(self) -> str:
        return f"ConformalStructure({np.array2string(self.form, precision=6)})"


def push(B: np.ndarray, eta: ConformalStructure) -> ConformalStructure:
    B = np.asarray(B, dtype=float)
    return ConformalStructure.normalize(B.T @ eta.form @ B)


def pull(B: np.ndarray, eta: ConformalStructure) -> ConformalStructure:
    return push(np.linalg.inv(np.asarray(B, dtype=float)), eta)


def distance(eta1: ConformalStructure, eta2: ConformalStructure) -> float:
    """Affine-invariant distance: sqrt(Σ log² of the eigenvalues of η₁⁻¹η₂)"""
    w = eigvalsh(eta2.form, eta1.form)
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def geodesic(eta1: ConformalStructure, eta2: ConformalStructure, t: float = 0.5) -> ConformalStructure:
    """Point at parameter t on the geodesic from eta1 (t=0) to eta2 (t=1)"""
    half = sqrtm(eta1.form)
    inv_half = invsqrtm(eta1.form)
    return ConformalStructure.normalize(half @ powm(inv_half @ eta2.form @ inv_half, t) @ half)


def midpoint(eta1: ConformalStructure, eta2: ConformalStructure) -> ConformalStructure:
    return geodesic(eta1, eta2, 0.5)


def karcher_mean(
        structures: Sequence[ConformalStructure],
        weights: Optional[Sequence[float]] = None,
        tol: float = KARCHER_TOLERANCE,
        max_iter: int = KARCHER_MAX_ITER,
) -> ConformalStructure:
    """Weighted Fréchet mean by the fixed-point gradient iteration with unit step

    Parameters
    ----------
    structures : sequence of ConformalStructure
        Nonempty list of points.
    weights : sequence of float, optional
        Positive weights, normalized internally. Uniform by default.

    Returns
    -------
    ConformalStructure
        The minimizer of Σ w_i distance(M, η_i)².
    """
    if not structures:
        raise ValueError("karcher_mean needs at least one structure")
    w = np.ones(len(structures)) if weights is None else np.asarray(weights, dtype=float)
    if (w <= 0).any():
        raise ValueError("Weights must be positive")
    w = w / w.sum()
    if len(structures) == 1:
        return structures[0]

    # log-Euclidean mean as the starting point
    M = _unit_determinant(expm(sum(wi * logm(s.form) for wi, s in zip(w, structures))))
    for iteration in range(max_iter):
        half = sqrtm(M)
        inv_half = invsqrtm(M)
        T = sum(wi * logm(inv_half @ s.form @ inv_half) for wi, s in zip(w, structures))
        if np.linalg.norm(T) < tol:
            logger.trace(f"karcher_mean converged after {iteration} iterations")
            return ConformalStructure.normalize(M)
        M = _unit_determinant(half @ expm(T) @ half)
    raise NoConvergenceError(f"karcher_mean did not converge in {max_iter} iterations")


def power_distortion(M: np.ndarray, n_max: int = ELLIPTIC_POWER_CHECK) -> float:
    """max over 1 <= n <= n_max of ‖M^n‖ ‖M^{-n}‖, powers renormalized"""
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    M = M / abs(np.linalg.det(M)) ** (1.0 / d)
    P = np.eye(d)
    worst = 1.0
    for _ in range(n_max):
        P = M @ P
        singular = np.linalg.svd(P, compute_uv=False)
        worst = max(worst, float(singular[0] / singular[-1]))
        if worst >= ELLIPTIC_DISTORTION_BOUND:
            break
        P = P / singular[0]
    return worst


def common_invariant_structure(
        matrices: Sequence[np.ndarray],
        tol: float = ELLIPTIC_TOLERANCE,
        max_iter: int = ELLIPTIC_MAX_ITER,
        start: Optional[ConformalStructure] = None,
) -> ConformalStructure:
    """Common fixed point of pull(M_i, ·) by averaged iteration
    η ← mean{η, pull(M_1, η), ..., pull(M_r, η)}; a single matrix gives the
    geodesic midpoint step."""
    matrices = [np.asarray(M, dtype=float) for M in matrices]
    d = matrices[0].shape[0]
    for M in matrices:
        if power_distortion(M) >= ELLIPTIC_DISTORTION_BOUND:
            raise _not_elliptic(M)
    eta = start or ConformalStructure.identity(d)
    for iteration in range(max_iter):
        images = [pull(M, eta) for M in matrices]
        residual = max(distance(image, eta) for image in images)
        if residual <= tol:
            logger.trace(f"invariant structure found after {iteration} averaging steps")
            return eta
        if len(images) == 1:
            eta = midpoint(eta, images[0])
        else:
            eta = karcher_mean([eta] + images)
    raise NoConvergenceError(f"No invariant structure within {max_iter} averaging steps")


def _not_elliptic(M: np.ndarray) -> NotEllipticError:
    return NotEllipticError(
        f"Powers of {np.array2string(M, precision=4)} are unbounded "
        f"(‖M^n‖‖M^-n‖ reaches {ELLIPTIC_DISTORTION_BOUND:g} within {ELLIPTIC_POWER_CHECK} steps)"
    )


def invariant_structure_elliptic(
        M: np.ndarray,
        tol: float = ELLIPTIC_TOLERANCE,
        max_iter: int = ELLIPTIC_MAX_ITER,
) -> ConformalStructure:
    """η with pull(M, η) = η, by Krasnoselskii–Mann midpoint averaging"""
    return common_invariant_structure([M], tol, max_iter)


