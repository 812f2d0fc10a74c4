"""Exception types shared across the package."""


class DetourLabError(Exception):
    """Base class for all package-specific errors."""


class DomainMismatch(DetourLabError, ValueError):
    """Two distributions were compared over different outcome lists."""


class IndexOutOfRange(DetourLabError, IndexError):
    """An outcome index does not exist in the distribution."""


class NegativeInput(DetourLabError, ValueError):
    """A nonnegative argument was given a negative value."""


class DegenerateReference(DetourLabError, ValueError):
    """The reference distribution has zero information dispersion."""


class MissingCPT(DetourLabError, KeyError):
    """A chance node has no conditional table attached."""


class ArityMismatch(DetourLabError, ValueError):
    """A table's parent configuration does not match the declared parents."""


class DomainViolation(DetourLabError, ValueError):
    """A continuous action value lies outside its decision domain."""


class DuplicateHidden(DetourLabError, ValueError):
    """The network already contains a hidden variable."""


class UnknownVariable(DetourLabError, KeyError):
    """A referenced variable name is not part of the network."""


class NoHiddenVariable(DetourLabError, ValueError):
    """EM was requested on a network without a hidden variable."""


class EmptyData(DetourLabError, ValueError):
    """An estimation routine received no records."""


class InsufficientData(DetourLabError, ValueError):
    """Too few samples to estimate the requested quantity."""


class ZeroBaseEntropy(DetourLabError, ValueError):
    """Normalization entropy is zero: the target is already deterministic."""


class CardinalityOne(DetourLabError, ValueError):
    """A causal coefficient needs variables with at least two outcomes."""


class ConfigInvalid(DetourLabError, ValueError):
    """Experiment configuration failed validation."""


class BundleMismatch(DetourLabError, ValueError):
    """Two trace bundles are not comparable (different seeds or configs)."""


class ReplayDivergence(DetourLabError, RuntimeError):
    """Re-execution of a bundle did not reproduce its bytes."""
