"""
Exception hierarchy for the transfer-learning workbench
Every failure the workbench raises on purpose derives from WorkbenchError
"""
from typing import List, Optional


class WorkbenchError(Exception):
    """Base class for all workbench errors"""


# Data ingestion and preparation

class DataError(WorkbenchError):
    """Problems with input series or windowed datasets"""


class MalformedRow(DataError):
    """A CSV cell could not be parsed"""

    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"Unparseable value {value!r} in column '{column}' at row {row}")
        self.row = row
        self.column = column
        self.value = value


class IrregularSpacing(DataError):
    """Timestamps cannot be repaired onto a constant grid"""


class EmptySeries(DataError):
    """No rows survived ingestion"""


class NonIntegerRatio(DataError):
    """Output spacing is not an integer multiple of the input spacing"""


class SeriesTooShort(DataError):
    """Series has fewer than m + h samples"""


class EmptySplit(DataError):
    """A chronological split left one side without windows"""


class IncompatibleShape(DataError):
    """Two datasets disagree on m, h or F"""


class PctTooLarge(DataError):
    """Requested source windows exceed the available source windows"""


# Automatic differentiation

class GradError(WorkbenchError):
    """Errors raised by the differentiation engine"""


class ShapeMismatch(GradError, ValueError):
    """Operand shapes are incompatible"""


class NonFiniteInput(GradError):
    """NaN or Inf reached a tape operation"""


class NonScalarLoss(GradError):
    """backward was called on a non-scalar node"""


# Model and checkpoints

class ModelError(WorkbenchError):
    """Errors raised by the Transformer or its checkpoints"""


class OddDimension(ModelError):
    """Positional encoding needs an even model width"""


class VersionMismatch(ModelError):
    """Checkpoint was written by an incompatible format version"""


class CorruptFile(ModelError):
    """Checkpoint failed its structural or checksum validation"""


class CheckpointIOError(ModelError, OSError):
    """Checkpoint file could not be read or written"""


# Training

class TrainingError(WorkbenchError):
    """Errors raised while training or fine-tuning"""


class NonFiniteLoss(TrainingError):
    """Training diverged"""


class EmptyDataset(TrainingError):
    """Training or Fisher estimation received no windows"""


class TooFewEpochs(TrainingError):
    """Gradual unfreezing needs at least three epochs"""


class MissingSource(TrainingError):
    """One-step fine-tuning was requested without source windows"""


class MissingFisher(TrainingError):
    """EWC fine-tuning was requested without a Fisher estimate"""


class UnknownStrategy(TrainingError):
    """Strategy name is not one of the supported fine-tuning strategies"""


# Domain distance

class DistanceError(WorkbenchError):
    """Errors raised by MMD estimation"""


class BandwidthNonPositive(DistanceError):
    """RBF bandwidth must be strictly positive"""


class LengthMismatch(DistanceError):
    """Vectors or samples disagree in length"""


class TooFewSamples(DistanceError):
    """At least two vectors are needed"""


# Evaluation

class EvaluationError(WorkbenchError):
    """Errors raised while scoring models"""


class EmptyInput(EvaluationError):
    """Nothing to score"""


class ConfigMismatch(EvaluationError):
    """Checkpoint and dataset (or two checkpoints) disagree on m, h or F"""


# Configuration

class ConfigInvalid(WorkbenchError):
    """Experiment configuration failed validation"""

    def __init__(self, problems: List[str], path: Optional[str] = None):
        self.problems = list(problems)
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(f"Invalid configuration{where}: " + "; ".join(self.problems))
