"""Exception types shared across the package."""


class HjcooptError(Exception):
    """Base class for all package errors."""


class GridQueryError(HjcooptError):
    """Raised for invalid field queries (non-finite point, time out of range)."""


class ConfigError(HjcooptError):
    """Raised for inconsistent or infeasible configuration."""


class ContractViolation(HjcooptError):
    """Raised when a caller breaks a documented precondition (e.g. control outside the admissible set)."""


class InfeasibleConstraint(HjcooptError):
    """Raised when a requested hyperplane slice does not intersect the control set."""


class SolverFailure(HjcooptError):
    """Raised when a PDE sweep produces non-finite values or an invalid time step.

    Carries diagnostics: the internal step index and the flat index of the
    first offending node, when known.
    """

    def __init__(self, message, step_index=None, node_index=None):
        super().__init__(message)
        self.step_index = step_index
        self.node_index = node_index
