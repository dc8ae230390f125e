"""Exception types raised by mixctl."""


class MixctlError(Exception):
    """Base class for all library errors."""


class ValidationError(MixctlError, ValueError):
    """Input data violates a type invariant."""


class DimensionMismatch(MixctlError, ValueError):
    pass


class InvalidTime(MixctlError, ValueError):
    pass


class NonpositiveRate(MixctlError, ValueError):
    pass


class MajorizationViolated(MixctlError):
    """The source distribution does not majorize the target."""


class ZeroLindbladian(MixctlError):
    pass


class NotOptimal(MixctlError):
    pass


class NotDephasing(MixctlError):
    pass


class NoMixingPair(MixctlError):
    """No level pair gives a positive mixing rate."""


class SOutOfRange(MixctlError, ValueError):
    pass


class NoSynthesisRoute(MixctlError):
    """No supported construction applies to this Lindbladian and target."""
