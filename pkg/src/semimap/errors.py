"""Exception types shared across the toolkit."""


class ParseError(ValueError):
    """Malformed map source; carries 1-based line/column of the offending token."""

    def __init__(self, message, line, col):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


class ArityError(ValueError):
    """A component references a variable outside the declared argument list."""


class DomainError(ArithmeticError):
    """Evaluation left the map's domain (sqrt of a negative, division by zero)."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class DimensionMismatch(ValueError):
    pass


class AllSamplesOnGuard(RuntimeError):
    """Rejection sampling kept landing on the non-smooth locus."""


class SignDisagreement(RuntimeError):
    """Jacobian determinant signs disagree among probes near a supposedly regular point."""


class SegmentOnGuard(RuntimeError):
    """Every sampled point of the segment lies on the non-smooth locus."""


class NotRegular(RuntimeError):
    """A local-inverse certificate was requested at a non-regular point."""


class ConditionFails(RuntimeError):
    """Implicit-solve surjectivity condition estimate fell below threshold."""


class NewtonDiverged(RuntimeError):
    pass


class PossiblyInfinitePreimage(RuntimeError):
    """Merged root count kept growing under grid refinement."""

    def __init__(self, coarse_count, fine_count):
        super().__init__(
            f"preimage count grew from {coarse_count} to {fine_count} under refinement"
        )
        self.coarse_count = coarse_count
        self.fine_count = fine_count


class CriticalValueError(RuntimeError):
    """The degree formula needs every preimage to be a regular point."""


class BoundaryValueError(RuntimeError):
    """Target value too close to the image of the region boundary."""


class BoundaryTooClose(BoundaryValueError):
    pass


class RefinementExhausted(RuntimeError):
    """Winding accumulation did not settle within the refinement budget."""


class PreconditionViolated(RuntimeError):
    """A degree-axiom non-degeneracy condition failed at a sampled point."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class UnsupportedDimension(ValueError):
    pass
