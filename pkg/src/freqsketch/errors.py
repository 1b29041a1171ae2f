"""Exception types shared across the sketch library."""


class SketchError(Exception):
    """Base class for all library errors."""


class InvalidParameter(SketchError, ValueError):
    """A construction or call parameter violates its precondition."""


class InvalidElement(SketchError, ValueError):
    """A data element is malformed (e.g. non-positive value)."""


class IncompatibleSketch(SketchError, ValueError):
    """Two sketches cannot be merged (mismatched size, seed, or function)."""


class NumericFailure(SketchError, ArithmeticError):
    """Numeric integration or evaluation failed to converge."""


class EmptySketch(SketchError, ValueError):
    """A sample was requested from a sketch that saw no elements."""


class IncompleteSecondPass(SketchError, KeyError):
    """A sampled key has no frequency from the second pass."""


class LineError(SketchError, ValueError):
    """An input line could not be parsed into a data element."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
