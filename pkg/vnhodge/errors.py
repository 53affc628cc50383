"""
Exceptions and warnings raised by vnhodge.

Every exception carries a machine-readable ``code`` (used in CLI error objects), an
``exit_code`` for the command line front door and a dictionary of structured
``details``. Validation-type failures exit with 2, numerical precondition failures
with 3.
"""

from typing import Any


class VnHodgeError(Exception):
    code: str = "Error"
    exit_code: int = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self), "details": self.details}


class ValidationFailure(VnHodgeError):
    code = "ValidationFailure"
    exit_code = 2


class PreconditionFailure(VnHodgeError):
    code = "PreconditionFailure"
    exit_code = 3


class EmptyAlgebraError(ValidationFailure):
    code = "EmptyAlgebra"


class NotNormalizedError(ValidationFailure):
    code = "NotNormalized"

    def __init__(self, total: float):
        super().__init__(
            f"Block weights sum to {total!r}, expected 1. Use normalize=True to rescale.",
            sum=total,
        )


class ShapeMismatchError(ValidationFailure):
    code = "ShapeMismatch"


class NotEndomorphismError(ValidationFailure):
    code = "NotEndomorphism"


class NotAComplexError(ValidationFailure):
    code = "NotAComplex"

    def __init__(self, degree: int, residual: float, tolerance: float | None = None):
        super().__init__(
            f"d∘d does not vanish at degree {degree}: residual {residual:.3e}",
            degree=degree,
            residual=residual,
            tolerance=tolerance,
        )


class RelationViolatedError(ValidationFailure):
    code = "RelationViolated"

    def __init__(self, relation: str, residual: float):
        super().__init__(
            f"Relation {relation} violated by monodromy: residual {residual:.3e}",
            relation=relation,
            residual=residual,
        )


class NotInvertibleError(ValidationFailure):
    code = "NotInvertible"

    def __init__(self, generator: str, condition: float):
        super().__init__(
            f"Image of {generator!r} is not invertible (condition number {condition:.3e})",
            generator=generator,
            condition=condition,
        )


class CocycleViolatedError(ValidationFailure):
    code = "CocycleViolated"

    def __init__(self, where: str, residual: float):
        super().__init__(
            f"Cocycle condition fails on {where}: residual {residual:.3e}",
            where=where,
            residual=residual,
        )


class UnknownGroupElementError(ValidationFailure):
    code = "UnknownGroupElement"


class UnsupportedDimensionError(ValidationFailure):
    code = "UnsupportedDimension"


class MissingCellValueError(ValidationFailure):
    code = "MissingCellValue"


class NonpositiveTError(ValidationFailure):
    code = "NonpositiveT"


class EmptyWindowError(ValidationFailure):
    code = "EmptyWindow"


class NonpositiveDensityError(ValidationFailure):
    code = "NonpositiveDensity"


class ParseError(ValidationFailure):
    code = "ParseError"

    def __init__(self, path: str, location: str, reason: str):
        super().__init__(
            f"Cannot parse {path} at {location}: {reason}",
            path=str(path),
            location=location,
        )


class GapTooSmallError(PreconditionFailure):
    code = "GapTooSmall"

    def __init__(self, gap: float, tolerance: float):
        super().__init__(
            f"Spectral gap above the cut-off is {gap:.3e} < {tolerance:.3e}",
            gap=gap,
            tolerance=tolerance,
        )


class BoundaryTieError(PreconditionFailure):
    code = "BoundaryTie"

    def __init__(self, eigenvalue: float, cutoff: float, degree: int | None = None):
        super().__init__(
            f"Eigenvalue {eigenvalue!r} lies within the tie band of cut-off {cutoff!r}",
            eigenvalue=eigenvalue,
            cutoff=cutoff,
            degree=degree,
        )


class EigensolveFailureError(PreconditionFailure):
    code = "EigensolveFailure"


class CertificateFailedError(PreconditionFailure):
    code = "CertificateFailed"

    def __init__(self, degree: int, residual: float, tolerance: float):
        super().__init__(
            f"Homotopy identity fails at degree {degree}: residual {residual:.3e} "
            f"exceeds {tolerance:.3e}",
            degree=degree,
            residual=residual,
            tolerance=tolerance,
        )


class ToleranceAmbiguousWarning(UserWarning):
    code = "ToleranceAmbiguous"


class BoundaryTieWarning(UserWarning):
    code = "BoundaryTie"
