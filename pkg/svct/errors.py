"""Exception hierarchy for the sparse-view CT toolkit.

Every error raised on purpose by the package derives from SVCTError so
the command-line front end can turn it into a one-line diagnostic and a
nonzero exit code.
"""

from typing import Optional


class SVCTError(Exception):
    """Base class for all toolkit errors."""


class GeometryMismatchError(SVCTError, ValueError):
    """Array dimensions disagree with the acquisition geometry."""


class AngleGridError(SVCTError, ValueError):
    """An angle list violates the grid an operation requires."""


class LayerShapeError(SVCTError, ValueError):
    """A layer received an input it cannot process."""

    def __init__(self, layer_name: str, message: str) -> None:
        super().__init__(f"layer '{layer_name}': {message}")
        self.layer_name = layer_name


class BackwardBeforeForwardError(SVCTError, RuntimeError):
    """backward() was called on a layer or network with no recorded forward."""


class LossInputError(SVCTError, ValueError):
    """Loss inputs have mismatched shapes or leave the admissible range."""


class TrainingDivergedError(SVCTError, RuntimeError):
    """A training loss became non-finite; the trace up to that point is kept."""

    def __init__(self, message: str, trace: Optional[list] = None) -> None:
        super().__init__(message)
        self.trace = trace or []


class LipschitzEstimateError(SVCTError, RuntimeError):
    """Power iteration produced an unusable Lipschitz estimate."""

    def __init__(self, estimate: float) -> None:
        super().__init__(f"power iteration returned an unusable estimate L={estimate!r}")
        self.estimate = estimate


class TensorFileError(SVCTError, ValueError):
    """A tensor or checkpoint file is malformed."""

    def __init__(self, path: str, offset: int, message: str) -> None:
        super().__init__(f"{path} (offset {offset}): {message}")
        self.path = path
        self.offset = offset


class ImageFileError(SVCTError, ValueError):
    """A PGM/PNG image file is malformed or unsupported."""

    def __init__(self, path: str, offset: int, message: str) -> None:
        super().__init__(f"{path} (offset {offset}): {message}")
        self.path = path
        self.offset = offset


class ConfigError(SVCTError, ValueError):
    """A configuration file or override is invalid."""


class CheckpointMismatchError(SVCTError, ValueError):
    """Checkpoint contents do not fit the network or geometry they are loaded into."""


class EmptyDatasetError(SVCTError, ValueError):
    """A training run was given no samples."""
