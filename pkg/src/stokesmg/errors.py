class ConfigurationError(ValueError):
    """Invalid level range, parameters or solver configuration."""


class ContractViolation(ValueError):
    """An operator was called with inputs of the wrong shape or space."""


class SolverBreakdown(RuntimeError):
    """Non-finite values or loss of positive definiteness inside a solve."""
