"""Exception hierarchy shared by every layer of the package."""


class ImgAttestError(Exception):
    """Base class for all package errors."""


# field arithmetic
class ZeroInverse(ImgAttestError, ZeroDivisionError):
    pass


class NonCanonicalEncoding(ImgAttestError, ValueError):
    pass


# circuit construction / checking
class DegreeTooSmall(ImgAttestError, ValueError):
    pass


class DegreeExceeded(ImgAttestError, ValueError):
    pass


class OutOfGrid(ImgAttestError, IndexError):
    pass


class InvalidLookup(ImgAttestError, ValueError):
    pass


class NotFixedColumn(ImgAttestError, TypeError):
    pass


class DimensionMismatch(ImgAttestError, ValueError):
    pass


class LayoutFormatError(ImgAttestError, ValueError):
    pass


# gadgets
class UnsupportedWidth(ImgAttestError, ValueError):
    pass


class LengthMismatch(ImgAttestError, ValueError):
    pass


class BoundTooWide(ImgAttestError, ValueError):
    pass


class TooManyBytes(ImgAttestError, ValueError):
    pass


class EmptyInput(ImgAttestError, ValueError):
    pass


# transforms / pipelines
class InvalidParams(ImgAttestError, ValueError):
    pass


class ParseError(ImgAttestError, ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        loc = f"line {line}, column {column}: " if line else ""
        super().__init__(f"{loc}{message}")


class EmptyPipeline(ParseError):
    pass


class InfeasibleLimit(ImgAttestError, ValueError):
    pass


class ConstraintFailure(ImgAttestError, RuntimeError):
    """An honest witness failed its own circuit; always a synthesis bug."""


class BundleFormatError(ImgAttestError, ValueError):
    pass


# image io
class PpmError(ImgAttestError, ValueError):
    pass


class MalformedHeader(PpmError):
    pass


class UnsupportedMaxval(PpmError):
    pass


class TruncatedPayload(PpmError):
    pass


class TrailingData(PpmError):
    pass
