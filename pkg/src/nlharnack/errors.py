"""Exception hierarchy shared by every module."""


class NLHarnackError(Exception):
    pass


class ConfigError(NLHarnackError):
    """Malformed or inconsistent scenario configuration."""


class PreconditionError(NLHarnackError, ValueError):
    """An operation was called outside the hypotheses it relies on."""


class ResolutionError(PreconditionError):
    """A length parameter is too small to be resolved on the lattice."""


class NoChainError(NLHarnackError):
    """Two nodes cannot be joined by a chain of overlapping balls."""

    def __init__(self, msg, components=None):
        super().__init__(msg)
        self.components = components


class NotSupermedianError(NLHarnackError):
    def __init__(self, msg, witness=None, violation=None):
        super().__init__(msg)
        self.witness = witness
        self.violation = violation


class ConvergenceError(NLHarnackError):
    def __init__(self, msg, residual=None, iterations=None):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations
