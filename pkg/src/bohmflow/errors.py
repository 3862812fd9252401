"""Exception types raised across the package."""


class BohmflowError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BohmflowError, ValueError):
    pass


class DomainError(BohmflowError, ValueError):
    pass


class NodeProximity(BohmflowError):
    """Raised when |psi|^2 drops below the node threshold.

    ``particle`` is the index of the particle whose velocity could not be
    defined (``None`` when the whole configuration is at a node).
    """

    def __init__(self, message, particle=None, rho=None):
        super().__init__(message)
        self.particle = particle
        self.rho = rho


class IntegrationError(BohmflowError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ReductionNotJustified(BohmflowError):
    def __init__(self, lam, eps):
        super().__init__(
            f"single-time reduction needs clock precision eps > Lambda, "
            f"got Lambda={lam!r}, eps={eps!r}"
        )
        self.lam = lam
        self.eps = eps


class EnvelopeTooLoose(BohmflowError):
    pass


class InconclusiveDomain(BohmflowError):
    pass


class ScenarioError(ConfigurationError):
    """Malformed scenario file; ``field`` is the dotted path at fault."""

    def __init__(self, message, field=None, line=None):
        loc = ""
        if field:
            loc += f" [field: {field}]"
        if line:
            loc += f" [line {line}]"
        super().__init__(message + loc)
        self.field = field
        self.line = line
