"""Exception hierarchy shared by all nvltm modules."""


class NVLTMError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(NVLTMError, ValueError):
    pass


class DegenerateModelError(NVLTMError):
    """Rate matrix kernel is not one-dimensional."""


class DivergentFinesseError(NVLTMError, ValueError):
    pass


class UndefinedContrastError(NVLTMError):
    """Neither P-I branch is lasing, so C = (P_off - P_on)/P_off has no meaning."""


class DegenerateFitError(NVLTMError):
    pass


class NoThresholdError(NVLTMError):
    pass


class InsufficientDataError(NVLTMError):
    pass


class InvalidBandError(NVLTMError, ValueError):
    pass


class AliasingConfigError(NVLTMError, ValueError):
    pass


class NoCrossingError(NVLTMError):
    pass


class ConfigError(NVLTMError):
    """Raised by the config parser; ``errors`` holds ``(line, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"line {ln}: {msg}" if ln else msg for ln, msg in self.errors]
        super().__init__("; ".join(lines))


class ScenarioError(NVLTMError):
    pass
