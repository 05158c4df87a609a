"""Exception hierarchy shared by the simulator, the CLI and the run browser."""


class DragFLError(Exception):
    """Root of every error raised on purpose by this package."""


class DimensionError(DragFLError, ValueError):
    """Two vectors (or a vector and a model) disagree on dimension."""


class DegenerateVectorError(DragFLError, ValueError):
    """A direction was requested from a vector whose norm is below the guard."""


class NonFiniteError(DragFLError, ArithmeticError):
    """An operation produced NaN or Inf."""


class EmptyInputError(DragFLError, ValueError):
    """An empty batch, shard, dataset or update list where one is required."""


class ConfigError(DragFLError, ValueError):
    """An experiment setting is missing, malformed or out of range."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ReferenceStateError(DragFLError, RuntimeError):
    """Reference direction used before initialization or failed verification."""


class ManifestMismatchError(DragFLError, ValueError):
    """Manifests passed to compare do not describe the same experiment."""
