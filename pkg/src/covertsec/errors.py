"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit-code contract without inspecting messages.
"""


class CovertSecError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(CovertSecError, ValueError):
    """Malformed input: bad dimensions, indices, or config fields."""

    exit_code = 2


class DimensionError(ValidationError):
    """Matrix or signal shapes are inconsistent."""


class WindowTooSmallError(ValidationError):
    """Stacked I/O window shorter than the state dimension."""


class NoActuatorChannelError(ValidationError):
    """A covert-attack query was made with no compromised actuator."""


class AssumptionViolation(ValidationError):
    """Defense specification breaks the secure-channel assumption."""


class NumericalError(CovertSecError, ArithmeticError):
    """A numerical operation could not be completed reliably."""

    exit_code = 3


class SingularityError(NumericalError):
    """A matrix that must be invertible is singular or badly conditioned."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class FeasibilityError(NumericalError):
    """Covert synthesis requested for a scenario that does not admit it."""

    def __init__(self, message, witness_output=None):
        super().__init__(message)
        self.witness_output = witness_output


class PreconditionError(NumericalError):
    """Operation called outside the regime it is defined for."""


class NoDesignedAttackError(NumericalError):
    """Output-zeroing input space is trivial over the searched horizon.

    This is inconclusive: a longer horizon may still admit an attack.
    """


class DegenerateThreatError(NumericalError):
    """Threat inputs never reach any output; coding is unnecessary."""


class DesignFailure(CovertSecError):
    """Decoder search exhausted its budget without a certified candidate."""

    exit_code = 4

    def __init__(self, message, blocking_condition=None):
        super().__init__(message)
        self.blocking_condition = blocking_condition
