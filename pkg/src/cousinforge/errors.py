"""Exception types shared across the package."""


class CousinForgeError(Exception):
    """Base class for all package errors."""


class ParseError(CousinForgeError):
    pass


class WindowTooSmall(CousinForgeError):
    """A truncation window or enumeration bound cannot certify the answer."""

    def __init__(self, message, exponent=None):
        super().__init__(message)
        self.exponent = exponent


class NotSystemOfParameters(CousinForgeError):
    pass


class HypothesisFailure(CousinForgeError):
    """Raised by the iteration formula; ``which`` is one of 'a', 'b', 'c'."""

    def __init__(self, which, message):
        super().__init__(f"hypothesis ({which}) failed: {message}")
        self.which = which


class UnsupportedRing(CousinForgeError):
    pass


class UnsupportedComposite(CousinForgeError):
    pass


class ModelMismatch(CousinForgeError):
    pass


class NonEffective(CousinForgeError):
    """Input cannot be handled by the effective algorithms (factorization etc.)."""
