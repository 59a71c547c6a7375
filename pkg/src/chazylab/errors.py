"""Exception hierarchy shared by every module."""


class ChazyError(Exception):
    """Base class for all library errors."""


class PoleAtSix(ChazyError, ValueError):
    """k = 6 makes the quadratic coefficient k^2/(36-k^2) singular."""


class InvalidParameter(ChazyError, ValueError):
    pass


class PoleHit(ChazyError, ValueError):
    """Evaluation point too close to the pole of a rational solution."""


class InadmissibleResidue(ChazyError, ValueError):
    pass


class BranchCollision(ChazyError):
    """Two roots meet, or the tracked root jumps, so continuation is ill-defined."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class DegenerateInput(ChazyError, ValueError):
    """A denominator required by a transform vanishes."""

    def __init__(self, quantity, value=None, x=None):
        msg = f"denominator {quantity} vanishes"
        if value is not None:
            msg += f" (|{quantity}| = {abs(value):.3g})"
        super().__init__(msg)
        self.quantity = quantity
        self.x = x


class InconsistentRoot(ChazyError, ValueError):
    pass


class MultipleRoot(ChazyError, ValueError):
    """dF/droot vanishes, so implicit differentiation is undefined."""


class ParameterMismatch(ChazyError, ValueError):
    pass


class OutOfRange(ChazyError, ValueError):
    pass


class IntegrationError(ChazyError):
    """Raised by helpers that require a completed trajectory."""
