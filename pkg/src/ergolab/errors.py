"""Exception types shared across ergolab."""


class ErgolabError(Exception):
    """Base class for all library errors."""


class DimensionError(ErgolabError, ValueError):
    """Array or vector dimensions do not agree."""


class UnsupportedError(ErgolabError, NotImplementedError):
    """A variant/parameter combination has no implementation."""


class ResolutionError(ErgolabError, ValueError):
    """A discretization is too coarse for the requested construction."""


class UnresolvedDecayError(ErgolabError, ValueError):
    """Decay too fast to resolve: every modulus sits below the numerical floor."""


class ErgodicityError(ErgolabError):
    """An observable has a mode that the action leaves invariant."""

    def __init__(self, message, stuck_modes=()):
        super().__init__(message)
        self.stuck_modes = list(stuck_modes)


class ConfigError(ErgolabError):
    """Experiment configuration is invalid; carries every violation found."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class StageError(ErgolabError):
    """A module error raised while running one stage of an experiment."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
