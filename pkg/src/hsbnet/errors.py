"""Exception types raised across the package."""


class HSBNetError(Exception):
    """Base class for all package errors."""


class ConfigError(HSBNetError):
    """Raised when a scenario config fails validation.

    ``problems`` holds one ``(path, message)`` pair per offending field.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("invalid config:\n  " + "\n  ".join(lines))


class StabilityViolation(HSBNetError):
    """Sampled MU parameters break the M/G/1 stability condition."""


class InstabilityError(HSBNetError):
    """Semantic-coding queue load is >= 1."""


class DegenerateLink(HSBNetError):
    """Effective PTQ arrival rate is zero, so Little's law is undefined."""


class SingularChain(HSBNetError):
    """Queue-length chain has no unique stationary distribution from the empty state."""


class NoFeasibleLink(HSBNetError):
    def __init__(self, mus):
        self.mus = list(mus)
        super().__init__(f"no feasible (BS, mode) option for MU(s) {self.mus}")


class MUDropError(HSBNetError):
    def __init__(self, mus):
        self.mus = list(mus)
        super().__init__(f"MU(s) {self.mus} cannot be placed within any BS budget")


class InfeasibleBudget(HSBNetError):
    """Sum of lower-bound bandwidths exceeds the BS budget."""
