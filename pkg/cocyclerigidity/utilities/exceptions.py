"""Errors raised across the package.

Every error carries a module-qualified ``code`` (for example ``sft_core.NoPath``)
which the command line maps onto exit code 2.
"""


class CocycleRigidityError(Exception):
    """Base class for all errors raised by cocyclerigidity"""
    module = "cocyclerigidity"
    name = "Error"

    @property
    def code(self) -> str:
        return f"{self.module}.{self.name}"


# sft_core

class InvalidSftError(CocycleRigidityError):
    """Transition matrix or metric parameter violates the shift invariants"""
    module, name = "sft_core", "InvalidSft"


class InvalidPointError(CocycleRigidityError):
    """A point or word is not transition-valid for the shift"""
    module, name = "sft_core", "InvalidPoint"


class MismatchedCylinderError(CocycleRigidityError):
    """Bracket requested for points in different cylinders [0;i]"""
    module, name = "sft_core", "MismatchedCylinder"


class NoPathError(CocycleRigidityError):
    """No valid word of the requested length joins the two symbols"""
    module, name = "sft_core", "NoPath"


# markov_measure

class NotMixingError(CocycleRigidityError):
    """The shift is not topologically mixing"""
    module, name = "markov_measure", "NotMixing"


class InvalidMeasureError(CocycleRigidityError):
    """Stochastic matrix incompatible with the shift or not stochastic"""
    module, name = "markov_measure", "InvalidMeasure"


# cocycle

class InvalidGeneratorError(CocycleRigidityError):
    """Generator table is incomplete, mis-shaped or holds a singular matrix"""
    module, name = "cocycle", "InvalidGenerator"


class NegativeDeterminantError(CocycleRigidityError):
    """SL-normalization impossible: negative determinant in even dimension"""
    module, name = "cocycle", "NegativeDeterminant"


class NotPeriodicError(CocycleRigidityError):
    """The point is not fixed by the requested power of the shift"""
    module, name = "cocycle", "NotPeriodic"


# conformal_geom

class InvalidStructureError(CocycleRigidityError):
    """Matrix is not a unit-determinant symmetric positive-definite form"""
    module, name = "conformal_geom", "InvalidStructure"


class NoConvergenceError(CocycleRigidityError):
    """An iterative solver ran out of iterations"""
    module, name = "conformal_geom", "NoConvergence"


class NotEllipticError(CocycleRigidityError):
    """Matrix powers are not bounded in both directions"""
    module, name = "conformal_geom", "NotElliptic"


# holonomy

class NotOnStableSetError(CocycleRigidityError):
    module, name = "holonomy", "NotOnStableSet"


class NotOnUnstableSetError(CocycleRigidityError):
    module, name = "holonomy", "NotOnUnstableSet"


class NoCertificateError(CocycleRigidityError):
    """Holonomies requested without a bunching certificate with theta < tau"""
    module, name = "holonomy", "NoCertificate"


class MissingAnchorError(CocycleRigidityError):
    module, name = "holonomy", "MissingAnchor"


# shadowing

class InvalidConnectorError(CocycleRigidityError):
    module, name = "shadowing", "InvalidConnector"


class PeriodMismatchError(CocycleRigidityError):
    module, name = "shadowing", "PeriodMismatch"


class ShadowingHypothesisFailsError(CocycleRigidityError):
    module, name = "shadowing", "ShadowingHypothesisFails"


class BlockTooLargeError(CocycleRigidityError):
    """Exact enumeration over block windows exceeds the configured word cap"""
    module, name = "shadowing", "BlockTooLarge"


# analysis

class DimensionTooLargeError(CocycleRigidityError):
    module, name = "analysis", "DimensionTooLarge"


# cli

class ParseError(CocycleRigidityError):
    """Configuration diagnostic naming the offending key and line"""
    module, name = "cli", "ParseError"

    def __init__(self, line: int | None, key: str, reason: str):
        self.line = line
        self.key = key
        self.reason = reason
        where = f"line {line}" if line is not None else "unknown line"
        super().__init__(f"{where}, key '{key}': {reason}")
