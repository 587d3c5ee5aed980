class SRCartanError(Exception):
    """Base class for errors raised by this package."""


class ContactDegeneracy(SRCartanError):
    """The contact condition fails (degenerate skew form on the distribution)."""


class EvaluationError(SRCartanError):
    def __init__(self, message: str, point=None):
        self.point = tuple(point) if point is not None else None
        if point is not None:
            message = f"{message} at point {self.point}"
        super().__init__(message)


class ParseError(SRCartanError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (offset {offset})")


class SpecError(SRCartanError):
    """Input file does not conform to the schema."""


class StencilError(SRCartanError):
    """A finite-difference stencil left the domain where the data evaluates."""


class ConsistencyError(SRCartanError):
    """Internal invariant violated; signals a bug upstream."""


class DegenerateMap(SRCartanError):
    """A candidate point correspondence is not a local diffeomorphism."""
