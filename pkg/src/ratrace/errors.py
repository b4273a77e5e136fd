"""Exception hierarchy shared by all ratrace modules.

Each class maps onto one CLI exit code (see cli.EXIT_CODES); keeping them in
one place lets library users catch the whole family via RatraceError.
"""


class RatraceError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(RatraceError):
    """Malformed input: program text, trace JSON, or final condition."""


class TraceLookupError(RatraceError):
    """An event id, thread, or variable is not part of the trace."""


class DomainError(RatraceError):
    """Operation applied to events of the wrong kind or variable."""


class ContractViolationError(RatraceError):
    """A caller broke an operation precondition (exploration-level bug)."""


class NotReadableError(ContractViolationError):
    """A read extension named a source outside the readable set."""


class DivergenceError(RatraceError):
    """A thread exceeded the silent-step budget between global statements."""


class CapacityError(RatraceError):
    """Input exceeds a configured enumeration bound (oracle guards)."""


class InternalInvariantError(RatraceError):
    """The checker itself is wrong: optimality, deadlock-freedom, or replay
    enabledness failed.  Never a user error."""
