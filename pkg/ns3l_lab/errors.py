"""
Exception hierarchy for the negative-sampling SSL laboratory.

Every error raised on purpose by the package derives from ``Ns3lError`` so the
command line can map it to a clean exit code. Each subclass also inherits the
builtin exception a caller would naturally expect (``ValueError``,
``RuntimeError``...).
"""


class Ns3lError(Exception):
    """Base class for all package errors."""


class ShapeError(Ns3lError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(Ns3lError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonFiniteError(Ns3lError, FloatingPointError):
    """A computation produced NaN or infinite values."""


class NegativeSetError(Ns3lError, ValueError):
    """A negative-label set selects every class of a row."""


class ConfigError(Ns3lError, ValueError):
    """The experiment configuration is invalid."""


class DatasetError(Ns3lError, ValueError):
    """A dataset could not be loaded, generated or split."""


class CheckpointError(Ns3lError, ValueError):
    """A checkpoint file is malformed."""


class TrainingDivergedError(Ns3lError, RuntimeError):
    """The training loss became non-finite."""

    def __init__(self, step: int, message: str):
        super().__init__(f'Training diverged at step {step}: {message}')
        self.step = step
