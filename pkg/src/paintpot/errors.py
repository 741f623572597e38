"""Exception hierarchy shared across the package."""


class PaintPotError(Exception):
    """Base class for every error raised by this package."""


class SpecError(PaintPotError, ValueError):
    """Invalid sensor/filter/experiment configuration or file schema."""


class DomainError(PaintPotError, ValueError):
    """An angle or voltage lies outside its documented domain."""


class FitError(PaintPotError, RuntimeError):
    """Characterization failed: coverage, rank, or monotonicity."""


class InversionError(PaintPotError, RuntimeError):
    """A target angle is unreachable by a monotone model on its window."""


class InitializationError(PaintPotError, RuntimeError):
    """No valid feature was available to seed a filter."""
