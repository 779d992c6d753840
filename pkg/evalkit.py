"""
Forecast metrics, forgetting and data-shift checks, and report emission
"""
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

import tsformer
from dataseries import apply, invert_target
from errors import ConfigMismatch, EmptyInput, ShapeMismatch
from models import (
    Checkpoint,
    ForgettingReport,
    ForgettingRow,
    MetricsReport,
    Normalizer,
    WindowedDataset,
)

logger = logging.getLogger(__name__)

PERSISTENCE_ID = "persistence"
METRIC_COLUMNS = ["domain", "model", "rmse", "mae", "rmse_norm", "mae_norm", "n_windows"]
DUMP_COLUMNS = ["window_index", "step", "actual", "predicted"]


def _errors(actual: np.ndarray, pred: np.ndarray) -> np.ndarray:
    actual = np.asarray(actual, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if actual.shape != pred.shape:
        raise ShapeMismatch(f"actual {actual.shape} vs predicted {pred.shape}")
    if actual.size == 0:
        raise EmptyInput("No values to score")
    return pred - actual


def rmse(actual: np.ndarray, pred: np.ndarray) -> float:
    """Root of the mean squared error over every element"""
    err = _errors(actual, pred)
    return float(np.sqrt(np.mean(err * err)))


def mae(actual: np.ndarray, pred: np.ndarray) -> float:
    """Mean absolute error over every element"""
    return float(np.mean(np.abs(_errors(actual, pred))))


def _check_fits(ckpt: Checkpoint, test: WindowedDataset) -> None:
    cfg = ckpt.config
    if (test.m, test.h, test.n_features) != (cfg.m, cfg.h, cfg.n_features):
        raise ConfigMismatch(
            f"Model '{ckpt.model_id}' expects (m={cfg.m}, h={cfg.h}, F={cfg.n_features}); "
            f"'{test.domain}' has (m={test.m}, h={test.h}, F={test.n_features})"
        )


def evaluate(ckpt: Checkpoint, test: WindowedDataset) -> MetricsReport:
    """
    Score a checkpoint on raw (unnormalized) test windows
    Args:
        ckpt: model with its stored normalizer
        test: test windows in original units
    Returns:
        MetricsReport in original and normalized units, with the prediction dump attached
    """
    _check_fits(ckpt, test)
    if len(test) == 0:
        raise EmptyInput(f"No test windows in '{test.domain}'")
    normalized = apply(ckpt.normalizer, test)
    pred_norm = tsformer.predict(ckpt.params, ckpt.config, normalized.inputs)
    pred = invert_target(ckpt.normalizer, pred_norm)
    report = MetricsReport(
        domain=test.domain,
        model_id=ckpt.model_id,
        rmse=rmse(test.targets, pred),
        mae=mae(test.targets, pred),
        rmse_norm=rmse(normalized.targets, pred_norm),
        mae_norm=mae(normalized.targets, pred_norm),
        n_windows=len(test),
        actual=np.array(test.targets),
        predicted=pred,
    )
    logger.info(f"{report.model_id} on {report.domain}: rmse={report.rmse:.6f} mae={report.mae:.6f}")
    return report


def persistence_baseline(test: WindowedDataset, normalizer: Optional[Normalizer] = None) -> MetricsReport:
    """Repeat each window's last observed target value across the horizon"""
    if len(test) == 0:
        raise EmptyInput(f"No test windows in '{test.domain}'")
    last = test.inputs[:, -1, test.target_index]
    pred = np.repeat(last[:, None], test.h, axis=1)
    if normalizer is None:
        rmse_norm, mae_norm = rmse(test.targets, pred), mae(test.targets, pred)
    else:
        t = normalizer.target_index
        scale, shift = normalizer.std[t], normalizer.mean[t]
        rmse_norm = rmse((test.targets - shift) / scale, (pred - shift) / scale)
        mae_norm = mae((test.targets - shift) / scale, (pred - shift) / scale)
    return MetricsReport(
        domain=test.domain,
        model_id=PERSISTENCE_ID,
        rmse=rmse(test.targets, pred),
        mae=mae(test.targets, pred),
        rmse_norm=rmse_norm,
        mae_norm=mae_norm,
        n_windows=len(test),
        actual=np.array(test.targets),
        predicted=pred,
    )


def _check_shared_config(ckpts: Sequence[Checkpoint]) -> None:
    configs = {tuple(sorted(c.config.to_dict().items())) for c in ckpts}
    if len(configs) > 1:
        raise ConfigMismatch("Checkpoints do not share one model configuration")


def forgetting_check(source_ckpt: Checkpoint, finetuned: Sequence[Checkpoint],
                     source_test: WindowedDataset) -> ForgettingReport:
    """
    Evaluate fine-tuned models on the source test set
    Args:
        source_ckpt: pre-trained model, the reference
        finetuned: adapted models
        source_test: source-domain test windows in original units
    Returns:
        ForgettingReport with one row per fine-tuned model; delta = rmse - source rmse
    """
    _check_shared_config([source_ckpt, *finetuned])
    reference = evaluate(source_ckpt, source_test).rmse
    rows = []
    for ckpt in finetuned:
        value = evaluate(ckpt, source_test).rmse
        rows.append(ForgettingRow(model_id=ckpt.model_id, rmse=value, delta=value - reference))
    return ForgettingReport(source_domain=source_test.domain, source_rmse=reference, rows=tuple(rows))


def shift_check(ckpts: Sequence[Checkpoint], unseen: Sequence[WindowedDataset]) -> List[List[MetricsReport]]:
    """Cross-evaluate every checkpoint on every unseen domain, one row per checkpoint"""
    _check_shared_config(ckpts)
    return [[evaluate(ckpt, ds) for ds in unseen] for ckpt in ckpts]


def improvement_pct(baseline: float, method: float) -> float:
    """Relative error reduction of method over baseline, in percent"""
    if baseline == 0:
        raise ValueError("Baseline error is zero")
    return 100.0 * (baseline - method) / baseline


def metrics_frame(reports: Sequence[MetricsReport]) -> pd.DataFrame:
    return pd.DataFrame([r.as_row() for r in reports], columns=METRIC_COLUMNS)


def forgetting_frame(report: ForgettingReport) -> pd.DataFrame:
    rows = [[report.source_domain, "source", report.source_rmse, 0.0]]
    rows += [[report.source_domain, row.model_id, row.rmse, row.delta] for row in report.rows]
    return pd.DataFrame(rows, columns=["source_domain", "model", "rmse", "delta"])


def dump_frame(report: MetricsReport) -> pd.DataFrame:
    """Long-format (window_index, step, actual, predicted) rows in original units"""
    if report.actual is None or report.predicted is None:
        raise EmptyInput(f"Report for {report.model_id} on {report.domain} carries no predictions")
    n, h = report.actual.shape
    return pd.DataFrame({
        "window_index": np.repeat(np.arange(n), h),
        "step": np.tile(np.arange(1, h + 1), n),
        "actual": report.actual.reshape(-1),
        "predicted": report.predicted.reshape(-1),
    }, columns=DUMP_COLUMNS)


def summary_lines(reports: Sequence[MetricsReport]) -> List[str]:
    """One key=value line per report"""
    return [
        " ".join(f"{key}={value:.6f}" if isinstance(value, float) else f"{key}={value}"
                 for key, value in r.as_row().items())
        for r in reports
    ]


def write_metrics(reports: Sequence[MetricsReport], csv_path: str,
                  summary_path: Optional[str] = None) -> None:
    metrics_frame(reports).to_csv(csv_path, index=False)
    if summary_path:
        with open(summary_path, "w") as f:
            f.write("\n".join(summary_lines(reports)) + "\n")
    logger.info(f"Wrote {len(reports)} metrics rows to {csv_path}")


def improvement_frame(by_target: Dict[str, List[MetricsReport]], method: str) -> pd.DataFrame:
    """Improvement of `method` over the best other model, per target domain"""
    rows = []
    for target, reports in by_target.items():
        mine = [r for r in reports if r.model_id.startswith(f"{method}@")]
        others = [r for r in reports if not r.model_id.startswith(f"{method}@")]
        if not mine or not others:
            continue
        best = min(others, key=lambda r: r.rmse)
        rows.append([target, best.model_id, best.rmse, mine[0].rmse,
                     improvement_pct(best.rmse, mine[0].rmse)])
    return pd.DataFrame(rows, columns=["target", "best_baseline", "baseline_rmse",
                                       "method_rmse", "improvement_pct"])
