"""Exception hierarchy shared by all modules."""


class PrivsenseError(Exception):
    """Base class for every error raised by this package."""


class InvariantError(PrivsenseError, ValueError):
    """A value violates a structural invariant (Hermiticity, trace, PSD, shapes...)."""


class DimensionError(InvariantError):
    pass


class RankChangeError(PrivsenseError, ArithmeticError):
    """The SLD equation has no solution because the derivative leaves the support."""


class NoInformationError(PrivsenseError, ArithmeticError):
    """The QFIm has zero trace, so ratio-based privacy measures are undefined."""


class SingularPointError(PrivsenseError, ArithmeticError):
    """An outcome probability vanishes at the evaluation point."""


class BranchOverflowError(PrivsenseError, RuntimeError):
    pass


class WiringError(PrivsenseError, ValueError):
    """A composed system cannot be built from the requested behaviours."""


class ProtocolAbort(PrivsenseError):
    """Raised inside a run when a party emits an out-of-domain payload."""


class ConfigError(PrivsenseError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
