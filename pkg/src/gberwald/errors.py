"""Exception types shared across the package."""

from __future__ import annotations


class GBerwaldError(Exception):
    """Base class for all package errors."""


class ZeroVector(GBerwaldError):
    """A tangent vector with zero components where a direction is required."""


class NonConvex(GBerwaldError):
    """The fundamental tensor is not positive definite (or the metric data
    would make it so) at the evaluated vector."""


class WrongFamily(GBerwaldError):
    """Coefficient data does not match the family (shapes, kinds)."""


class NotSPD(GBerwaldError):
    """A matrix expected to be symmetric positive definite is not."""


class StencilOutOfDomain(GBerwaldError):
    """A finite-difference stencil left the family's chart domain."""


class VerticalContact(GBerwaldError):
    """The coefficient matrix of the torsion constraints vanishes at v."""


class Inconsistent(GBerwaldError):
    """A single-vector constraint system admits no solution numerically."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class InfeasibleStep(GBerwaldError):
    """An augmented chain system is inconsistent beyond tolerance: evidence
    that no common compatible torsion exists at the point."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class NotASymmetry(GBerwaldError):
    """A linear map fails to be a gamma-orthogonal symmetry of the norm."""


class CurveLeavesChart(GBerwaldError):
    """A transport curve leaves the declared chart domain."""


class UnknownFamily(GBerwaldError):
    """Metric file names a family this package does not provide."""


class DimensionMismatch(GBerwaldError):
    """Declared dimension disagrees with coefficient shapes or input sizes."""
