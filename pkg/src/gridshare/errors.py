"""Exception hierarchy for gridshare."""


class GridShareError(Exception):
    """Base class for all gridshare errors."""


class InvalidModulusError(GridShareError):
    """Modular operation requested with a modulus < 2."""


class GenerationFailureError(GridShareError):
    """Prime-pair search exceeded its attempt budget."""


class InvalidParametersError(GridShareError):
    """Group parameters failed a structural check (order, cofactor, size)."""


class InvalidKeyError(GridShareError):
    """Commitment key failed its order checks."""


class EncodingRangeError(GridShareError):
    """Fixed-point encoding would exceed the centered field range."""


class InvalidPartyCountError(GridShareError):
    """Secret sharing requested for fewer than two parties."""


class IncompleteSharesError(GridShareError):
    """Reconstruction or aggregation called with a wrong number of shares."""


class DegeneratePreferenceError(GridShareError):
    """Energy update with a zero quadratic preference coefficient."""


class InvalidConfigError(GridShareError):
    """Scenario or market configuration violates a precondition."""


class LifecycleError(GridShareError):
    """A protocol phase ran before its prerequisites completed."""


class ProtocolAbortError(GridShareError):
    """The slot was aborted (rejected commitments or injected transport failure)."""
