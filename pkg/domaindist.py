"""
Maximum mean discrepancy between domains
Ranks candidate target domains by their distance to the source and recommends
how much source data to mix into each target's fine-tuning set.
"""
import logging
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist, pdist

from errors import BandwidthNonPositive, LengthMismatch, TooFewSamples
from models import DomainSample, MmdConfig, MmdReport, MmdRow, WindowedDataset

logger = logging.getLogger(__name__)

HIGH_MMD_PCT = 0.05
LOW_MMD_PCT = 0.20
THRESHOLD_FLOOR = 1e-12

REPORT_COLUMNS = [
    "source", "target", "mmd2", "sqrt_mmd2", "recommended_pct", "sigma", "subsample_n", "seed",
]

Samples = Union[DomainSample, np.ndarray]


def rbf_kernel(x: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """exp(-||x - y||^2 / (2 sigma^2)); the feature map stays implicit"""
    if not sigma > 0:
        raise BandwidthNonPositive(f"sigma must be > 0, got {sigma}")
    x, y = np.ravel(x).astype(np.float64), np.ravel(y).astype(np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"Vectors of length {x.size} and {y.size}")
    diff = x - y
    return float(np.exp(-np.dot(diff, diff) / (2.0 * sigma * sigma)))


class RbfKernel:
    """Gaussian kernel with a fixed bandwidth"""

    def __init__(self, sigma: float):
        if not sigma > 0:
            raise BandwidthNonPositive(f"sigma must be > 0, got {sigma}")
        self.sigma = float(sigma)

    def __call__(self, x: np.ndarray, y: np.ndarray) -> float:
        return rbf_kernel(x, y, self.sigma)

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * self.sigma * self.sigma))

    def describe(self) -> str:
        return f"rbf(sigma={self.sigma:.6g})"


class LinearKernel:
    """k(x, y) = x . y"""

    sigma = float("nan")

    def __call__(self, x: np.ndarray, y: np.ndarray) -> float:
        x, y = np.ravel(x).astype(np.float64), np.ravel(y).astype(np.float64)
        if x.shape != y.shape:
            raise LengthMismatch(f"Vectors of length {x.size} and {y.size}")
        return float(np.dot(x, y))

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a @ b.T

    def describe(self) -> str:
        return "linear"


Kernel = Union[RbfKernel, LinearKernel]


def _as_matrix(samples: Samples) -> np.ndarray:
    if isinstance(samples, DomainSample):
        return np.asarray(samples.vectors)
    matrix = np.asarray(samples, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    if matrix.ndim != 2:
        raise LengthMismatch(f"Expected an (N, D) matrix, got shape {matrix.shape}")
    return matrix


def median_heuristic(samples: Samples, seed: int = 0, max_pairs: int = 1000) -> float:
    """
    Bandwidth from the median pairwise Euclidean distance
    Args:
        samples: pooled vectors, at least two
        seed: pair sampling seed when the set has more than max_pairs pairs
        max_pairs: cap on the number of distances computed
    Returns:
        median distance, else mean distance, else 1.0
    """
    vectors = _as_matrix(samples)
    n = vectors.shape[0]
    if n < 2:
        raise TooFewSamples(f"Median heuristic needs at least 2 vectors, got {n}")

    if n * (n - 1) // 2 <= max_pairs:
        distances = pdist(vectors, "euclidean")
    else:
        rng = np.random.default_rng(seed)
        first = rng.integers(0, n, size=max_pairs)
        offset = rng.integers(1, n, size=max_pairs)
        second = (first + offset) % n
        distances = np.linalg.norm(vectors[first] - vectors[second], axis=1)

    sigma = float(np.median(distances))
    if sigma <= 0:
        sigma = float(np.mean(distances))
    if sigma <= 0:
        sigma = 1.0
    return sigma


def domain_sample(ds: WindowedDataset, max_n: int = 2000, seed: int = 0) -> DomainSample:
    """Flatten window inputs to m*F vectors, keeping a seeded subset of at most max_n"""
    vectors = np.asarray(ds.inputs).reshape(len(ds), -1)
    if len(vectors) > max_n:
        rng = np.random.default_rng(seed)
        vectors = vectors[np.sort(rng.choice(len(vectors), size=max_n, replace=False))]
    return DomainSample(domain=ds.domain, vectors=vectors, seed=seed)


def _canonical(a: np.ndarray, b: np.ndarray):
    if (b.shape, b.tobytes()) < (a.shape, a.tobytes()):
        return b, a
    return a, b


def mmd2(a: Samples, b: Samples, kernel: Kernel, clamp: bool = True) -> float:
    """
    Biased (V-statistic) squared MMD
    Args:
        a: first sample set
        b: second sample set
        kernel: RbfKernel or LinearKernel
        clamp: clip round-off negatives to 0
    Returns:
        mean k(A, A) + mean k(B, B) - 2 mean k(A, B), diagonals included
    """
    x, y = _as_matrix(a), _as_matrix(b)
    if x.shape[1] != y.shape[1]:
        raise LengthMismatch(f"Vector length {x.shape[1]} vs {y.shape[1]}")
    x, y = _canonical(x, y)
    value = float(kernel.matrix(x, x).mean() + kernel.matrix(y, y).mean()
                  - 2.0 * kernel.matrix(x, y).mean())
    if clamp and value < 0:
        return 0.0
    return value


def mix_pct_rule(mmd_value: float, threshold: float) -> float:
    """Far targets get 5% source data, close targets 20%"""
    if not threshold > 0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    return HIGH_MMD_PCT if mmd_value >= threshold else LOW_MMD_PCT


def make_kernel(cfg: MmdConfig, pooled: Optional[Samples] = None) -> Kernel:
    if cfg.kernel == "linear":
        return LinearKernel()
    if cfg.sigma is not None:
        return RbfKernel(cfg.sigma)
    if pooled is None:
        raise TooFewSamples("Bandwidth selection needs samples")
    return RbfKernel(median_heuristic(pooled, cfg.seed, cfg.max_pairs))


def _pool(samples: Sequence[DomainSample]) -> np.ndarray:
    widths = {s.vectors.shape[1] for s in samples}
    if len(widths) > 1:
        raise LengthMismatch(f"Domains have different vector lengths: {sorted(widths)}")
    return np.concatenate([s.vectors for s in samples])


def rank_targets(source: DomainSample, targets: Sequence[DomainSample],
                 cfg: Optional[MmdConfig] = None) -> MmdReport:
    """
    Distance from the source to each candidate target
    Args:
        source: source domain sample
        targets: candidate target samples, at least one
        cfg: kernel settings; the bandwidth is shared across all targets
    Returns:
        MmdReport sorted by ascending mmd2 with a mixing percentage per target
    """
    cfg = cfg or MmdConfig()
    if not targets:
        raise TooFewSamples("rank_targets needs at least one target domain")
    kernel = make_kernel(cfg, _pool([source, *targets]))
    logger.info(f"MMD kernel {kernel.describe()} over {len(targets)} target(s)")

    scored = [(mmd2(source, t, kernel), t.domain) for t in targets]
    scored.sort(key=lambda item: (item[0], item[1]))
    if cfg.threshold is not None:
        threshold = cfg.threshold
    else:
        threshold = max(float(np.median([value for value, _ in scored])), THRESHOLD_FLOOR)

    rows = []
    for value, target in scored:
        rows.append(MmdRow(target=target, mmd2=value, recommended_pct=mix_pct_rule(value, threshold)))
        logger.info(f"MMD^2({source.domain}, {target}) = {value:.6g}")
    return MmdReport(
        source=source.domain,
        rows=tuple(rows),
        kernel=kernel.describe(),
        sigma=kernel.sigma,
        subsample_n=cfg.subsample_n,
        seed=cfg.seed,
        threshold=threshold,
    )


def pairwise_table(samples: Sequence[DomainSample], cfg: Optional[MmdConfig] = None) -> pd.DataFrame:
    """Symmetric MMD^2 matrix over every pair of domains with one shared bandwidth"""
    cfg = cfg or MmdConfig()
    if len(samples) < 2:
        raise TooFewSamples("pairwise_table needs at least two domains")
    kernel = make_kernel(cfg, _pool(samples))
    names = [s.domain for s in samples]
    table = np.zeros((len(samples), len(samples)))
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            table[i, j] = table[j, i] = mmd2(samples[i], samples[j], kernel)
    return pd.DataFrame(table, index=pd.Index(names, name="domain"), columns=names)


def report_frame(report: MmdReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            [report.source, row.target, row.mmd2, row.sqrt_mmd2, row.recommended_pct,
             report.sigma, report.subsample_n, report.seed]
            for row in report.rows
        ],
        columns=REPORT_COLUMNS,
    )


def write_report(report: MmdReport, path: str) -> None:
    report_frame(report).to_csv(path, index=False)
    logger.info(f"Wrote MMD report for '{report.source}' to {path}")
