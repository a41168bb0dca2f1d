"""Exception types shared across the package."""


class ContrastLabError(Exception):
    """Base class for all errors raised by contrastlab."""


class ShapeMismatch(ContrastLabError):
    """Operands have incompatible shapes."""


class ZeroNormRow(ContrastLabError):
    """A row has (near-)zero Euclidean norm and cannot be normalized."""

    def __init__(self, row: int, norm: float = 0.0):
        self.row = row
        self.norm = norm
        super().__init__(f"row {row} has norm {norm:.3e}, below the 1e-30 floor")


class EmptyInput(ContrastLabError):
    """An operation received an empty vector."""


class OutOfDomain(ContrastLabError):
    """A cosine similarity lies outside [-1, 1] beyond tolerance."""


class NonSquare(ContrastLabError):
    """A similarity matrix is not square."""


class NonPositiveTemperature(ContrastLabError):
    """Temperature must be strictly positive."""


class TOverflow(ContrastLabError):
    """exp(t) would overflow for the given scale parameter t."""


class InvalidScenario(ContrastLabError):
    """A closed-form scenario point violates its domain constraints."""


class InvalidGrid(ContrastLabError):
    """A sweep grid is empty, unordered, or outside its domain."""


class NonFiniteProbe(ContrastLabError):
    """A finite-difference probe produced a non-finite value."""


class InvalidParams(ContrastLabError):
    """Configuration or argument values violate their constraints."""


class ParseError(ContrastLabError):
    """A feature file could not be parsed."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class InconsistentWidth(ParseError):
    """A feature-file row has a different number of columns than the first row."""


class ClassTooSmall(ContrastLabError):
    """A class has too few samples to split."""


class EmptySplit(ContrastLabError):
    """A train or test split is empty."""


class DivergedLoss(ContrastLabError):
    """The training loss became non-finite."""


class StaleCache(ContrastLabError):
    """A backward pass received a cache from a different forward pass."""
