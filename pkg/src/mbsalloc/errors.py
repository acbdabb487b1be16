"""Exception types raised by the library."""


class MbsAllocError(Exception):
    """Base class for all library errors."""


class ConfigError(MbsAllocError, ValueError):
    """Invalid configuration or run parameters."""


class LayerRangeError(MbsAllocError, ValueError):
    """A layer count outside ``[min_layers, max_layers]`` was requested."""


class InfeasibleMbsFloor(MbsAllocError):
    """The MBS budget is below the sum of the sessions' minimum bandwidths."""


class NotFoundError(MbsAllocError, KeyError):
    """Unknown call id."""


class NotIrreducible(MbsAllocError):
    """The Markov chain has more than one closed communicating class."""


class CapacityError(MbsAllocError):
    """A state space is too large to enumerate."""
