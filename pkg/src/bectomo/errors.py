"""Exception hierarchy shared by the library and the CLI."""


class TomographyError(Exception):
    """Base class for all library errors."""


class IndexOutOfRange(TomographyError, IndexError):
    pass


class OrderOutOfRange(TomographyError, IndexError):
    pass


class ScaleExceeded(TomographyError, ValueError):
    pass


class WeightError(TomographyError, ValueError):
    pass


class GeometryMismatch(TomographyError, ValueError):
    pass


class NonHermitianInput(TomographyError, ValueError):
    pass


class AlreadyNoisy(TomographyError, ValueError):
    pass


class NegativeProbability(TomographyError, ValueError):
    pass


class SingularModel(TomographyError, ArithmeticError):
    """The forward operator is rank deficient and no regularization was requested."""


class BalancedBeamsplitter(TomographyError, ValueError):
    """Reconstruction refused: theta too close to pi/4 (50/50 splitter)."""


class ThetaMismatch(TomographyError, ValueError):
    pass


class FormatError(TomographyError, ValueError):
    """A data file is malformed or carries an unknown format tag."""
