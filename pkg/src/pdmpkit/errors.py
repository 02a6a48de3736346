"""Exception types shared across the toolkit."""


class PdmpError(Exception):
    """Base class for every toolkit-specific error."""


class HorizonExceeded(PdmpError):
    """A time argument ran past the flow horizon of the starting state."""


class CemeteryInput(PdmpError):
    """An operation received the absorbing cemetery state."""


class QuadratureFailure(PdmpError):
    """Adaptive quadrature did not reach the requested tolerance."""


class InversionFailure(PdmpError):
    """Jump-time inversion stalled before reaching the time tolerance."""


class UnsupportedState(PdmpError):
    """A jump kernel was asked to act outside its domain."""


class MissingOracle(PdmpError):
    """A kernel cannot integrate the requested function in closed form."""


class MissingEnvelope(PdmpError):
    """Tilting a density kernel needs a rejection envelope, none declared."""


class EnvelopeViolation(PdmpError):
    """A rejection envelope was observed to under-bound its target."""


class ZeroQh(PdmpError):
    """The kernel average of the tilt function vanished where division needs it."""


class DomainViolation(PdmpError):
    """A positivity or jump-factor condition failed along a path."""


class DegenerateJump(PdmpError):
    """A multiplicative jump factor of zero or below cannot be inverted."""


class BadStochasticMatrix(PdmpError):
    """Kernel masses do not form a stochastic matrix with an empty diagonal."""


class BadParameters(PdmpError):
    """Model parameters outside the documented range."""


class StiffnessFailure(PdmpError):
    """The fixed-step ODE oracle failed to converge under step doubling."""


class AllExploded(PdmpError):
    """Every replication hit the jump-count guard, nothing left to average."""
