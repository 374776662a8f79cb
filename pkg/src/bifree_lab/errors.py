class ConfigurationError(ValueError):
    """Inputs are inconsistent or incomplete (missing target word, bad file, bad schema)."""


class PreconditionError(RuntimeError):
    """A numerical precondition failed, e.g. a marginal tuple is not a microstate."""
