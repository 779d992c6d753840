"""
Domain records for the transfer-learning workbench
Series, windowed datasets, model parameters, checkpoints, schedules and reports
"""
import math
from dataclasses import dataclass, field, fields, asdict
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from errors import (
    ConfigInvalid,
    IrregularSpacing,
    LengthMismatch,
    ShapeMismatch,
    TooFewSamples,
)

NORMALIZER_STD_FLOOR = 1e-8

PROVENANCE_TARGET = "target-native"
PROVENANCE_SOURCE = "source-mixed"

EMBEDDING_GROUP = "embedding"
DECODER_GROUP = "decoder"


def _frozen(array: Any, dtype: Any = np.float64) -> np.ndarray:
    """Copy into a read-only array of the given dtype"""
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled multivariate series"""
    name: str
    timestamps: np.ndarray
    values: np.ndarray
    feature_names: Tuple[str, ...]
    target_index: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        stamps = np.asarray(self.timestamps, dtype="datetime64[ns]")
        if values.ndim != 2 or values.shape[0] != stamps.shape[0]:
            raise ShapeMismatch(
                f"Series '{self.name}' has {stamps.shape[0]} timestamps but values of shape {values.shape}"
            )
        if len(self.feature_names) != values.shape[1]:
            raise ShapeMismatch(
                f"Series '{self.name}' names {len(self.feature_names)} features but has {values.shape[1]}"
            )
        if not 0 <= self.target_index < values.shape[1]:
            raise ValueError(f"target_index {self.target_index} out of range for {values.shape[1]} features")
        if np.isnan(values).any():
            raise ValueError(f"Series '{self.name}' still contains missing values")
        if stamps.shape[0] > 1:
            steps = np.diff(stamps.astype(np.int64))
            if (steps <= 0).any() or (steps != steps[0]).any():
                raise IrregularSpacing(f"Series '{self.name}' is not on a constant, increasing grid")

        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "timestamps", _frozen(stamps, "datetime64[ns]"))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def spacing(self) -> Optional[np.timedelta64]:
        if self.n < 2:
            return None
        return self.timestamps[1] - self.timestamps[0]

    @property
    def target(self) -> np.ndarray:
        return self.values[:, self.target_index]


@dataclass(frozen=True, eq=False)
class WindowedDataset:
    """Supervised (lookback, horizon) pairs from one domain"""
    domain: str
    inputs: np.ndarray
    targets: np.ndarray
    m: int
    h: int
    target_index: int = 0
    provenance: Tuple[str, ...] = ()
    anchors: Optional[np.ndarray] = None

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if inputs.ndim != 3 or inputs.shape[1] != self.m:
            raise ShapeMismatch(f"Inputs must be (N, {self.m}, F), got {inputs.shape}")
        if targets.ndim != 2 or targets.shape != (inputs.shape[0], self.h):
            raise ShapeMismatch(f"Targets must be ({inputs.shape[0]}, {self.h}), got {targets.shape}")
        if not 0 <= self.target_index < inputs.shape[2]:
            raise ValueError(f"target_index {self.target_index} out of range")
        provenance = tuple(self.provenance) or (PROVENANCE_TARGET,) * inputs.shape[0]
        if len(provenance) != inputs.shape[0]:
            raise ShapeMismatch("provenance must tag every window")

        object.__setattr__(self, "inputs", _frozen(inputs))
        object.__setattr__(self, "targets", _frozen(targets))
        object.__setattr__(self, "provenance", provenance)
        if self.anchors is not None:
            anchors = np.asarray(self.anchors, dtype="datetime64[ns]")
            if anchors.shape != (inputs.shape[0],):
                raise ShapeMismatch("anchors must hold one timestamp per window")
            object.__setattr__(self, "anchors", _frozen(anchors, "datetime64[ns]"))

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[2]

    def subset(self, indices: Sequence[int], domain: Optional[str] = None) -> "WindowedDataset":
        """Select windows by position, keeping tags and anchors aligned"""
        idx = np.asarray(indices, dtype=np.int64)
        return WindowedDataset(
            domain=domain or self.domain,
            inputs=self.inputs[idx],
            targets=self.targets[idx],
            m=self.m,
            h=self.h,
            target_index=self.target_index,
            provenance=tuple(self.provenance[i] for i in idx),
            anchors=None if self.anchors is None else self.anchors[idx],
        )


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-feature z-score statistics"""
    mean: np.ndarray
    std: np.ndarray
    target_index: int = 0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        std = np.maximum(np.asarray(self.std, dtype=np.float64).reshape(-1), NORMALIZER_STD_FLOOR)
        if mean.shape != std.shape:
            raise ShapeMismatch("mean and std must have one entry per feature")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "std", _frozen(std))

    @classmethod
    def identity(cls, n_features: int, target_index: int = 0) -> "Normalizer":
        return cls(np.zeros(n_features), np.ones(n_features), target_index)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "target_index": self.target_index,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Normalizer":
        return cls(np.array(data["mean"]), np.array(data["std"]), int(data["target_index"]))


@dataclass(frozen=True)
class SyntheticDomainSpec:
    """AR(1) + seasonal + offset generator settings"""
    n: int
    phi: float = 0.5
    period: int = 96
    amplitude: float = 1.0
    mean: float = 0.0
    noise_std: float = 0.1
    seed: int = 0
    name: str = "synthetic"
    spacing_minutes: int = 15
    start: str = "2020-01-01T00:00:00"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not -1.0 < self.phi < 1.0:
            raise ValueError(f"|phi| must be < 1, got {self.phi}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if self.period < 2:
            raise ValueError("period must be at least 2")


@dataclass(frozen=True)
class ModelConfig:
    """Shape of the time-series Transformer"""
    n_features: int
    m: int
    h: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    eps: float = 1e-5

    def __post_init__(self):
        if self.m < 1 or self.h < 1 or self.n_features < 1:
            raise ValueError("m, h and n_features must be at least 1")
        if self.n_layers < 1:
            raise ValueError("n_layers must be at least 1")
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        return cls(**_known_fields(cls, data, "model"))


def group_of(name: str) -> str:
    """Parameter group of a dotted parameter name"""
    parts = name.split(".")
    if parts[0] == "encoder":
        return ".".join(parts[:2])
    return parts[0]


class ModelParameters:
    """Ordered, named parameter arrays grouped embedding, encoder.1..n, decoder"""

    def __init__(self, values: Dict[str, np.ndarray]):
        self._values: Dict[str, np.ndarray] = {}
        for name, value in values.items():
            self._values[name] = value if _is_frozen(value) else _frozen(value)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._values[name]

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __iter__(self):
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def items(self):
        return self._values.items()

    @property
    def names(self) -> List[str]:
        return list(self._values)

    def groups(self) -> List[str]:
        """Group names in storage (input-to-output) order"""
        seen: List[str] = []
        for name in self._values:
            group = group_of(name)
            if group not in seen:
                seen.append(group)
        return seen

    def members(self, group: str) -> List[str]:
        return [name for name in self._values if group_of(name) == group]

    def replace(self, updates: Dict[str, np.ndarray]) -> "ModelParameters":
        """New parameter set with some arrays swapped; untouched arrays are shared"""
        merged = dict(self._values)
        for name, value in updates.items():
            if name not in merged:
                raise KeyError(name)
            if np.shape(value) != merged[name].shape:
                raise ShapeMismatch(f"{name}: expected {merged[name].shape}, got {np.shape(value)}")
            merged[name] = value
        return ModelParameters(merged)

    def max_abs_diff(self, other: "ModelParameters") -> float:
        return max(float(np.max(np.abs(self[n] - other[n]))) for n in self._values)


def _is_frozen(value: Any) -> bool:
    return isinstance(value, np.ndarray) and value.dtype == np.float64 and not value.flags.writeable


@dataclass(frozen=True, eq=False)
class Checkpoint:
    """A trained model: config, parameters, normalizer and training metadata"""
    config: ModelConfig
    params: ModelParameters
    normalizer: Normalizer
    metadata: Dict[str, Any] = field(default_factory=dict)
    version: int = 1

    @property
    def model_id(self) -> str:
        return str(self.metadata.get("model_id", "model"))


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings for pre-training and fine-tuning"""
    batch_size: int = 8
    epochs: int = 35
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 5
    min_delta: float = 1e-4
    early_stopping: bool = True
    seed: int = 0
    schedule: str = "gu"
    mix_pct: float = 0.05
    mix_base: Optional[int] = None
    ewc_lambda: float = 100.0
    fisher_samples: int = 1000
    advance_on_plateau: bool = False

    def __post_init__(self):
        problems = []
        if self.batch_size < 1:
            problems.append("batch_size: must be >= 1")
        if not self.lr > 0:
            problems.append("lr: must be > 0")
        if self.patience < 1:
            problems.append("patience: must be >= 1")
        if self.epochs < 1:
            problems.append("epochs: must be >= 1")
        if not 0.0 <= self.mix_pct <= 1.0:
            problems.append("mix_pct: must lie in [0, 1]")
        if self.schedule not in ("gu", "all", "top"):
            problems.append("schedule: must be one of gu, all, top")
        if problems:
            raise ConfigInvalid(problems)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        return cls(**_known_fields(cls, data, "train"))


@dataclass(frozen=True)
class FreezeSchedule:
    """Epoch-indexed trainable parameter groups"""
    total_epochs: int
    phases: Tuple[Tuple[int, FrozenSet[str]], ...]

    def __post_init__(self):
        phases = tuple((int(start), frozenset(groups)) for start, groups in self.phases)
        if not phases or phases[0][0] != 0:
            raise ValueError("first phase must start at epoch 0")
        for (start, groups), (next_start, next_groups) in zip(phases, phases[1:]):
            if next_start <= start:
                raise ValueError("phase starts must be strictly increasing")
            if not groups <= next_groups:
                raise ValueError("unfreezing never re-freezes a group")
        if phases[-1][0] >= self.total_epochs:
            raise ValueError("last phase starts after the final epoch")
        object.__setattr__(self, "phases", phases)

    def phase_at(self, epoch: int) -> int:
        index = 0
        for i, (start, _) in enumerate(self.phases):
            if epoch >= start:
                index = i
        return index

    def trainable_at(self, epoch: int) -> FrozenSet[str]:
        return self.phases[self.phase_at(epoch)][1]

    def boundaries(self) -> List[int]:
        return [start for start, _ in self.phases]


@dataclass(frozen=True, eq=False)
class FisherDiag:
    """Diagonal Fisher weights anchored at the pre-trained parameters"""
    weights: Dict[str, np.ndarray]
    anchor: Dict[str, np.ndarray]

    def __post_init__(self):
        if set(self.weights) != set(self.anchor):
            raise ShapeMismatch("Fisher weights and anchor must name the same parameters")
        for name, weight in self.weights.items():
            if np.shape(weight) != np.shape(self.anchor[name]):
                raise ShapeMismatch(f"Fisher weight for {name} does not mirror its parameter")
            if (np.asarray(weight) < 0).any():
                raise ValueError(f"Fisher weight for {name} has negative entries")


@dataclass(frozen=True)
class MmdConfig:
    """Kernel, bandwidth and subsampling settings for domain distances"""
    kernel: str = "rbf"
    subsample_n: int = 2000
    max_pairs: int = 1000
    seed: int = 0
    sigma: Optional[float] = None
    threshold: Optional[float] = None

    def __post_init__(self):
        problems = []
        if self.kernel not in ("rbf", "linear"):
            problems.append("kernel: must be rbf or linear")
        if self.subsample_n < 2:
            problems.append("subsample_n: must be >= 2")
        if self.max_pairs < 1:
            problems.append("max_pairs: must be >= 1")
        if self.sigma is not None and not self.sigma > 0:
            problems.append("sigma: must be > 0")
        if self.threshold is not None and not self.threshold > 0:
            problems.append("threshold: must be > 0")
        if problems:
            raise ConfigInvalid(problems)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MmdConfig":
        return cls(**_known_fields(cls, data, "mmd"))


@dataclass(frozen=True, eq=False)
class DomainSample:
    """Flattened window inputs of one domain, possibly subsampled"""
    domain: str
    vectors: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        if vectors.ndim != 2:
            raise LengthMismatch("vectors must form an (N, D) matrix")
        if vectors.shape[0] < 2:
            raise TooFewSamples(f"Domain '{self.domain}' needs at least 2 vectors, got {vectors.shape[0]}")
        object.__setattr__(self, "vectors", _frozen(vectors))

    @property
    def count(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class MmdRow:
    target: str
    mmd2: float
    recommended_pct: float

    @property
    def sqrt_mmd2(self) -> float:
        return math.sqrt(max(self.mmd2, 0.0))


@dataclass(frozen=True)
class MmdReport:
    """MMD between a source domain and candidate targets, sorted ascending"""
    source: str
    rows: Tuple[MmdRow, ...]
    kernel: str
    sigma: float
    subsample_n: int
    seed: int
    threshold: float

    def row_for(self, target: str) -> MmdRow:
        for row in self.rows:
            if row.target == target:
                return row
        raise KeyError(target)


@dataclass(frozen=True, eq=False)
class MetricsReport:
    """RMSE and MAE of one model on one domain"""
    domain: str
    model_id: str
    rmse: float
    mae: float
    rmse_norm: float
    mae_norm: float
    n_windows: int
    actual: Optional[np.ndarray] = field(default=None, repr=False)
    predicted: Optional[np.ndarray] = field(default=None, repr=False)

    def as_row(self) -> Dict[str, Any]:
        return {
            "domain": self.domain,
            "model": self.model_id,
            "rmse": self.rmse,
            "mae": self.mae,
            "rmse_norm": self.rmse_norm,
            "mae_norm": self.mae_norm,
            "n_windows": self.n_windows,
        }


@dataclass(frozen=True)
class ForgettingRow:
    model_id: str
    rmse: float
    delta: float


@dataclass(frozen=True)
class ForgettingReport:
    """Source-test RMSE of fine-tuned models against the source model"""
    source_domain: str
    source_rmse: float
    rows: Tuple[ForgettingRow, ...]


def _known_fields(cls: Any, data: Dict[str, Any], section: str) -> Dict[str, Any]:
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigInvalid([f"{section}.{key}: unknown field" for key in unknown])
    return dict(data)
