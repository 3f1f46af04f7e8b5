"""Exception types shared across the package.

Two broad families matter to callers: configuration problems (bad parameters,
bad plans, malformed ensemble files) and numerical failures detected at run
time.  The CLI maps them to distinct exit codes.
"""


class ConfigError(ValueError):
    """Invalid parameters, plans, distributions, or input documents."""


class DegenerateProblemError(ConfigError):
    """Amplitude amplification with no target amplitude (p0 = 0)."""


class PlanError(ConfigError):
    """Experiment plan violates its constraints (ordering, divisibility)."""


class InvalidDistributionError(ConfigError):
    """Probability table with negative entries or wrong normalization."""


class IncompleteStatsError(ConfigError):
    """Readout statistics missing a pair table required by the inequality."""


class IncompleteKernelError(ConfigError):
    """Transition kernel has no entry for a reachable history."""


class TractabilityError(ConfigError):
    """Exact enumeration would exceed the configured trajectory cap."""


class SpecFormatError(ConfigError):
    """Ensemble description file does not match the documented schema."""


class NumericalInstabilityError(ArithmeticError):
    """A numerical invariant (norm conservation, identity check) broke down."""
