"""Exception hierarchy shared by all modules.

Everything derived from :class:`DomainError` is a problem with the
mathematical input or the numerics (CLI exit code 1); plain ``ValueError``
raised from argument checks is a usage problem.
"""


class DomainError(Exception):
    """A computation left its admissible region or failed to converge."""


class PreconditionError(DomainError, ValueError):
    """Arguments violate an operation's precondition."""


class IntegrationEvent(DomainError):
    """Profile integration halted early.

    Attributes
    ----------
    kind : str
        One of ``guard_floor``, ``blow_up``, ``step_underflow``, ``max_steps``.
    profile : Profile or None
        The partial profile up to the halting node.
    """

    def __init__(self, kind, message, profile=None):
        super().__init__(message)
        self.kind = kind
        self.profile = profile


class TailNotSettled(DomainError):
    """The asymptotic slope cannot be read off yet; increase r_max."""


class EscalationCapReached(DomainError):
    """Automatic r_max escalation hit its ceiling."""


class NoBracketFound(DomainError):
    """No sign change of m(a) - M on the scanned window."""


class ConvergenceError(DomainError):
    """An iterative solver (quadrature, eigen, optimizer) did not converge."""


class FoldOverError(DomainError):
    """A normal perturbation is too large to stay a radial graph."""


class IntegrityError(DomainError):
    """A stored artifact is missing or its checksum does not match."""
