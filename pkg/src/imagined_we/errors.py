"""Exception types raised across the package."""


class SimulationError(Exception):
    """Base class for every error this package raises on purpose."""


class InvalidGrid(SimulationError, ValueError):
    pass


class InvalidTrial(SimulationError, ValueError):
    pass


class InsufficientSpace(SimulationError, ValueError):
    pass


class BadArity(SimulationError, ValueError):
    pass


class BadOrigin(SimulationError, ValueError):
    pass


class Unreachable(SimulationError):
    pass


class EmptyChoiceSet(SimulationError, ValueError):
    pass


class NoConsistentReferent(SimulationError):
    """A signal was observed that no item in the trial can be described by."""


class EmptyGroup(SimulationError, ValueError):
    pass


class InsufficientData(SimulationError, ValueError):
    pass


class ConfigError(SimulationError, ValueError):
    """Invalid run configuration; ``key`` names the offending setting."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
