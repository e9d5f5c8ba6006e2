"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code scheme: schema/input problems exit
with 2, numeric or convergence failures with 3.
"""


class CudriskError(Exception):
    """Base class for all package errors."""


class SchemaError(CudriskError):
    """Malformed input: bad file row, missing covariate, invalid value."""


class DomainError(CudriskError):
    """Evaluation requested outside the valid age/knot domain."""


class ConvergenceError(CudriskError):
    """An iterative numeric procedure failed to converge."""


class InitializationError(ConvergenceError):
    """Sampler could not find a finite starting point."""


class SimulationError(CudriskError):
    """Cohort generation cannot terminate (e.g. no hazard and no censoring)."""
