"""Exception types raised across pcsim.

ConfigError and its subclasses mean the inputs were wrong (CLI exit 2);
SimulationError and its subclasses mean a valid run could not produce the
requested quantity (CLI exit 3).
"""


class PcsError(Exception):
    """Base class for every pcsim error."""


class ConfigError(PcsError, ValueError):
    """Invalid configuration or parameter."""


class InvalidParameterError(ConfigError):
    """A numeric parameter is outside its domain."""


class InvalidBiasError(InvalidParameterError):
    """Unipolar bias below M - 1."""


class UnsupportedFamilyError(ConfigError):
    """Distribution family not defined on the given alphabet."""


class InconsistentSpecError(ConfigError):
    """Channel constraint and quality metric do not belong together."""


class TooFewSymbolsError(InvalidParameterError):
    """Symbol block shorter than the pulse shaper needs."""


class SimulationError(PcsError, RuntimeError):
    """A run could not produce the requested quantity."""


class UnreachableEntropyError(SimulationError):
    def __init__(self, target: float, low: float, high: float, family: str = ""):
        self.target = target
        self.low = low
        self.high = high
        self.family = family
        super().__init__(
            f"entropy {target:g} bit/symbol is unreachable for {family or 'this family'}; "
            f"achievable interval is ({low:g}, {high:g}]"
        )


class InsufficientSamplesError(SimulationError):
    def __init__(self, have: int, need: int, clip_ratio: float):
        self.have = have
        self.need = need
        self.clip_ratio = clip_ratio
        super().__init__(
            f"{have} samples cannot resolve clip ratio {clip_ratio:g}; need at least {need}"
        )


class NoCrossingError(SimulationError):
    def __init__(self, threshold: float, grid_low: float, ngmi_low: float, grid_high: float, ngmi_high: float):
        self.threshold = threshold
        self.grid_low = grid_low
        self.ngmi_low = ngmi_low
        self.grid_high = grid_high
        self.ngmi_high = ngmi_high
        super().__init__(
            f"NGMI never crosses {threshold:g} on the grid: "
            f"NGMI={ngmi_low:.4f} at {grid_low:g} dB, NGMI={ngmi_high:.4f} at {grid_high:g} dB"
        )


class DegenerateFitError(SimulationError):
    """Fewer than two distinct abscissae for a straight-line fit."""


class NonFiniteError(SimulationError):
    """An intermediate value became NaN or infinite."""
