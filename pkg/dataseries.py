"""
Time-series ingestion and preparation
Loads CSV series, resamples, windows, splits, normalizes, mixes source windows
into target training sets and synthesizes controllable domains
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from errors import (
    EmptySeries,
    EmptySplit,
    IncompatibleShape,
    IrregularSpacing,
    MalformedRow,
    NonIntegerRatio,
    PctTooLarge,
    SeriesTooShort,
)
from models import (
    PROVENANCE_SOURCE,
    Normalizer,
    SyntheticDomainSpec,
    TimeSeries,
    WindowedDataset,
)

logger = logging.getLogger(__name__)

MAX_FORWARD_FILL = 4
MISSING_TOKENS = ("", "NA", "NaN", "nan", "null", "NULL")
RESAMPLE_POLICIES = ("mean", "last")
# Guards ratio arithmetic such as 0.7 * 10 = 7.000000000000001
_RATIO_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for a CSV series"""
    timestamp: str
    features: Tuple[str, ...]
    target: Optional[str] = None
    delimiter: str = ","
    name: Optional[str] = None

    @property
    def target_index(self) -> int:
        return self.features.index(self.target) if self.target else 0

    @classmethod
    def from_dict(cls, data: Dict) -> "CsvSchema":
        return cls(
            timestamp=data["timestamp"],
            features=tuple(data["features"]),
            target=data.get("target"),
            delimiter=data.get("delimiter", ","),
            name=data.get("name"),
        )


def to_frame(series: TimeSeries) -> pd.DataFrame:
    return pd.DataFrame(
        np.array(series.values),
        index=pd.DatetimeIndex(series.timestamps),
        columns=list(series.feature_names),
    )


def load_csv(path: str, schema: CsvSchema, max_fill: int = MAX_FORWARD_FILL) -> TimeSeries:
    """
    Read a CSV file into a regular TimeSeries
    Args:
        path: CSV file (UTF-8, header row)
        schema: timestamp column, feature columns and optional target column
        max_fill: longest run of missing samples that is forward-filled
    Returns:
        TimeSeries on a constant grid without missing values
    """
    frame = pd.read_csv(
        path,
        sep=schema.delimiter,
        dtype=str,
        keep_default_na=False,
        encoding="utf-8",
        skipinitialspace=True,
    )
    for column in (schema.timestamp,) + tuple(schema.features):
        if column not in frame.columns:
            raise MalformedRow(0, column, "<missing column>")
    if frame.empty:
        raise EmptySeries(f"{path} has no data rows")

    stamps = pd.to_datetime(frame[schema.timestamp].str.strip(), format="ISO8601", errors="coerce")
    bad = stamps.isna().to_numpy()
    if bad.any():
        row = int(np.argmax(bad))
        raise MalformedRow(row + 1, schema.timestamp, frame[schema.timestamp].iloc[row])
    index = pd.DatetimeIndex(stamps)
    if index.tz is not None:
        index = index.tz_convert("UTC").tz_localize(None)

    columns = {}
    for column in schema.features:
        text = frame[column].str.strip()
        missing = text.isin(MISSING_TOKENS)
        parsed = pd.to_numeric(text.mask(missing), errors="coerce")
        bad = (parsed.isna() & ~missing).to_numpy()
        if bad.any():
            row = int(np.argmax(bad))
            raise MalformedRow(row + 1, column, text.iloc[row])
        columns[column] = parsed.to_numpy(dtype=np.float64)
    data = pd.DataFrame(columns, index=index)

    if not index.is_monotonic_increasing or index.has_duplicates:
        raise IrregularSpacing(f"{path}: timestamps are not strictly increasing")

    if len(data) > 1:
        steps = np.diff(index.asi8)
        spacing = int(steps.min())
        if (steps % spacing).any():
            raise IrregularSpacing(f"{path}: timestamps do not lie on a common grid")
        grid = pd.date_range(index[0], index[-1], freq=pd.Timedelta(spacing, unit="ns"))
        data = data.reindex(grid)

    gaps = int(data.isna().any(axis=1).sum())
    filled = data.ffill(limit=max_fill)
    complete = filled.notna().all(axis=1).to_numpy()
    if not complete.any():
        raise EmptySeries(f"{path}: no complete rows")
    kept = np.flatnonzero(complete)
    if kept[-1] - kept[0] + 1 != kept.size:
        raise IrregularSpacing(
            f"{path}: a run of more than {max_fill} missing samples cannot be repaired"
        )
    filled = filled.iloc[kept[0]:kept[-1] + 1]
    dropped = len(data) - len(filled)
    if gaps:
        logger.info(f"{path}: forward-filled {gaps - dropped} samples, dropped {dropped} edge rows")

    return TimeSeries(
        name=schema.name or str(path),
        timestamps=filled.index.to_numpy(dtype="datetime64[ns]"),
        values=filled.to_numpy(dtype=np.float64),
        feature_names=tuple(schema.features),
        target_index=schema.target_index,
    )


def resample(
    series: TimeSeries,
    out_spacing: Union[str, pd.Timedelta],
    policy: Union[str, Dict[str, str]] = "mean",
) -> TimeSeries:
    """
    Aggregate k consecutive samples into one
    Args:
        series: regular input series
        out_spacing: new sample spacing, an integer multiple of the current one
        policy: 'mean' or 'last', globally or per feature name
    Returns:
        series with floor(n / k) samples
    """
    out = pd.Timedelta(out_spacing)
    if series.spacing is None:
        raise NonIntegerRatio(
            f"Series '{series.name}' has {series.n} sample(s) and no spacing to divide {out} by")
    current = pd.Timedelta(series.spacing)
    k, remainder = divmod(out.value, current.value)
    if remainder or k < 1:
        raise NonIntegerRatio(f"{out} is not an integer multiple of {current}")
    if k == 1:
        return series

    how = {name: policy if isinstance(policy, str) else policy.get(name, "mean")
           for name in series.feature_names}
    for name, rule in how.items():
        if rule not in RESAMPLE_POLICIES:
            raise ValueError(f"Unknown resampling policy '{rule}' for {name}")

    n_out = series.n // k
    if n_out == 0:
        raise EmptySeries(f"Series '{series.name}' is shorter than one {out} bin")
    grouped = to_frame(series).resample(out, origin="start", label="left", closed="left")
    frame = grouped.agg(how).iloc[:n_out]
    return TimeSeries(
        name=series.name,
        timestamps=frame.index.to_numpy(dtype="datetime64[ns]"),
        values=frame[list(series.feature_names)].to_numpy(dtype=np.float64),
        feature_names=series.feature_names,
        target_index=series.target_index,
    )


def make_windows(series: TimeSeries, m: int, h: int, stride: int = 1) -> WindowedDataset:
    """
    Slide a lookback/horizon window over the series
    Args:
        series: source series
        m: lookback length
        h: horizon length
        stride: step between window starts
    Returns:
        WindowedDataset with floor((n - m - h) / stride) + 1 windows
    """
    if m < 1 or h < 1 or stride < 1:
        raise ValueError("m, h and stride must be positive")
    if series.n < m + h:
        raise SeriesTooShort(f"Series '{series.name}' has {series.n} samples, needs {m + h}")

    count = (series.n - m - h) // stride + 1
    starts = np.arange(count) * stride
    inputs = series.values[starts[:, None] + np.arange(m)]
    targets = series.target[starts[:, None] + m + np.arange(h)]
    return WindowedDataset(
        domain=series.name,
        inputs=inputs,
        targets=targets,
        m=m,
        h=h,
        target_index=series.target_index,
        anchors=series.timestamps[starts + m],
    )


def split_chronological(ds: WindowedDataset, train_ratio: float) -> Tuple[WindowedDataset, WindowedDataset]:
    """First ceil(ratio * N) windows train, the rest test"""
    if not 0.0 < train_ratio < 1.0:
        raise ValueError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    total = len(ds)
    n_train = math.ceil(train_ratio * total - _RATIO_TOLERANCE)
    if n_train <= 0 or n_train >= total:
        raise EmptySplit(f"{total} windows of '{ds.domain}' cannot be split {train_ratio:.2f}")
    return ds.subset(range(n_train)), ds.subset(range(n_train, total))


def fit_normalizer(train: WindowedDataset) -> Normalizer:
    """Population mean/std per feature over every input row of the training split"""
    rows = train.inputs.reshape(-1, train.n_features)
    return Normalizer(rows.mean(axis=0), rows.std(axis=0), train.target_index)


def apply(norm: Normalizer, ds: WindowedDataset) -> WindowedDataset:
    if norm.mean.shape[0] != ds.n_features:
        raise IncompatibleShape(
            f"Normalizer covers {norm.mean.shape[0]} features, dataset has {ds.n_features}"
        )
    t = norm.target_index
    return WindowedDataset(
        domain=ds.domain,
        inputs=(ds.inputs - norm.mean) / norm.std,
        targets=(ds.targets - norm.mean[t]) / norm.std[t],
        m=ds.m,
        h=ds.h,
        target_index=ds.target_index,
        provenance=ds.provenance,
        anchors=ds.anchors,
    )


def invert_target(norm: Normalizer, values: np.ndarray) -> np.ndarray:
    t = norm.target_index
    return np.asarray(values, dtype=np.float64) * norm.std[t] + norm.mean[t]


def mix_count(pct: float, base: int) -> int:
    """Number of source windows a mixing percentage asks for"""
    return int(math.floor(pct * base + _RATIO_TOLERANCE))


def mix_source(
    target_train: WindowedDataset,
    source_train: WindowedDataset,
    pct: float,
    seed: int,
    base: Optional[int] = None,
) -> WindowedDataset:
    """
    Add a percentage of randomly sampled source windows to a target training set
    Args:
        target_train: target-domain training windows
        source_train: source-domain training windows
        pct: fraction of the base count to add
        seed: sampling and shuffling seed
        base: count the percentage applies to (defaults to len(source_train))
    Returns:
        shuffled union with the sampled windows tagged source-mixed
    """
    if not 0.0 <= pct <= 1.0:
        raise ValueError(f"pct must lie in [0, 1], got {pct}")
    if (target_train.m, target_train.h, target_train.n_features, target_train.target_index) != (
        source_train.m, source_train.h, source_train.n_features, source_train.target_index
    ):
        raise IncompatibleShape(
            f"'{target_train.domain}' and '{source_train.domain}' disagree on window shape"
        )

    count = mix_count(pct, len(source_train) if base is None else base)
    if count > len(source_train):
        raise PctTooLarge(f"{count} source windows requested, {len(source_train)} available")
    if count == 0:
        return target_train

    rng = np.random.default_rng(seed)
    picked = source_train.subset(rng.choice(len(source_train), size=count, replace=False))
    anchors = None
    if target_train.anchors is not None and picked.anchors is not None:
        anchors = np.concatenate([target_train.anchors, picked.anchors])
    merged = WindowedDataset(
        domain=target_train.domain,
        inputs=np.concatenate([target_train.inputs, picked.inputs]),
        targets=np.concatenate([target_train.targets, picked.targets]),
        m=target_train.m,
        h=target_train.h,
        target_index=target_train.target_index,
        provenance=target_train.provenance + (PROVENANCE_SOURCE,) * count,
        anchors=anchors,
    )
    logger.info(f"Mixed {count} '{source_train.domain}' windows into '{target_train.domain}'")
    return merged.subset(rng.permutation(len(merged)))


def synth_generate(spec: SyntheticDomainSpec) -> TimeSeries:
    """x_t = mu + phi (x_{t-1} - mu) + A sin(2 pi t / P) + eps_t, starting from x_{-1} = mu"""
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.n)
    seasonal = spec.amplitude * np.sin(2.0 * np.pi * t / spec.period)
    noise = rng.normal(0.0, spec.noise_std, spec.n) if spec.noise_std > 0 else np.zeros(spec.n)
    deviation = lfilter([1.0], [1.0, -spec.phi], seasonal + noise)
    start = np.datetime64(spec.start, "ns")
    return TimeSeries(
        name=spec.name,
        timestamps=start + t * np.timedelta64(spec.spacing_minutes, "m"),
        values=(spec.mean + deviation)[:, None],
        feature_names=("value",),
    )
