"""Exception types shared across the simulator."""


class EdgefedError(Exception):
    """Base class for all simulator errors."""


class ValidationError(EdgefedError):
    """A value violates a documented invariant; the message names it."""


class ParseError(EdgefedError):
    """Malformed input file."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class UnknownKey(EdgefedError):
    """Unrecognized key in a strict-schema config document."""

    def __init__(self, key_path):
        self.key_path = key_path
        super().__init__(f"unknown config key: {key_path}")


class SchedulingInPast(EdgefedError):
    """Attempt to schedule an event before the current kernel time."""


class ComponentFault(EdgefedError):
    """A component transition failed; carries the component id and time."""

    def __init__(self, component_id, time_s, cause):
        self.component_id = component_id
        self.time_s = time_s
        super().__init__(f"component {component_id!r} faulted at t={time_s}: {cause}")


class InvalidProfile(ValidationError):
    """Demand profile whose rate would be negative somewhere."""


class InvalidConfig(ValidationError):
    """Scenario generator configuration outside its valid domain."""


class DomainError(EdgefedError):
    """Operation argument outside its mathematical domain."""


class CapacityExceeded(EdgefedError):
    """IT load beyond the heat the immersion cooling system can extract."""


class UndefinedPue(EdgefedError):
    """PUE requested with zero IT power."""


class SingularSystem(EdgefedError):
    """Unregularized least-squares system is not invertible."""


class MismatchedScenarios(EdgefedError):
    """Comparison between runs whose configs differ beyond the policy."""
