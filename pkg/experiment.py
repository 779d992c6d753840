"""
Experiment engine
Loads experiment files, prepares domains and runs the pre-train, distance,
fine-tune and evaluation protocol into a reproducible artifact directory
"""
import dataclasses
import hashlib
import json
import logging
import os
import shutil
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import scipy

import dataseries
import domaindist
import evalkit
import trainloop
import tsformer
from config import config
from errors import ConfigInvalid, UnknownStrategy, WorkbenchError
from models import (
    Checkpoint,
    FisherDiag,
    MetricsReport,
    MmdConfig,
    MmdReport,
    ModelConfig,
    Normalizer,
    SyntheticDomainSpec,
    TimeSeries,
    TrainConfig,
    WindowedDataset,
)

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = {
    "format_version", "seed", "output_dir", "source", "targets", "unseen", "domains",
    "windows", "model", "pretrain", "finetune", "strategies", "mmd", "auto_pct", "pct_sweep",
}
DEFAULT_SWEEP = (0.05, 0.10, 0.20)
FAILURE_MARKER = "FAILED"
SUBDIRS = ("checkpoints", "logs", "reports", "dumps")


@dataclass(frozen=True)
class DomainEntry:
    """Where a domain's series comes from"""
    name: str
    csv: Optional[str] = None
    schema: Optional[dataseries.CsvSchema] = None
    synthetic: Optional[SyntheticDomainSpec] = None
    resample: Optional[Dict[str, Any]] = None


@dataclass
class ExperimentConfig:
    """Validated experiment file"""
    path: str
    sha256: str
    format_version: int
    seed: int
    source: str
    targets: List[str]
    unseen: List[str]
    domains: Dict[str, DomainEntry]
    train_ratio: float
    stride: int
    model: Dict[str, Any]
    pretrain: TrainConfig
    finetune: TrainConfig
    strategies: List[str]
    mmd: MmdConfig
    auto_pct: bool = False
    pct_sweep: List[float] = field(default_factory=list)
    output_dir: Optional[str] = None
    # Every setting with defaults filled in and paths resolved; embedded in manifests
    settings: Dict[str, Any] = field(default_factory=dict)


def _resolve(base_dir: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


def _check_resample(where: str, resample: Any, problems: List[str]) -> Optional[Dict[str, Any]]:
    if resample is None:
        return None
    if not isinstance(resample, dict) or "spacing" not in resample:
        problems.append(f"{where}.resample: needs a 'spacing' such as \"1h\"")
        return None
    ok = True
    try:
        if pd.Timedelta(resample["spacing"]) <= pd.Timedelta(0):
            raise ValueError("must be positive")
    except (TypeError, ValueError) as e:
        problems.append(f"{where}.resample.spacing: invalid spacing {resample['spacing']!r} ({e})")
        ok = False
    policy = resample.get("policy", "mean")
    rules = list(policy.values()) if isinstance(policy, dict) else [policy]
    for rule in rules:
        if rule not in dataseries.RESAMPLE_POLICIES:
            problems.append(f"{where}.resample.policy: unknown policy {rule!r}, "
                            f"expected one of {', '.join(dataseries.RESAMPLE_POLICIES)}")
            ok = False
    return resample if ok else None


def _check_model(model: Dict[str, Any], problems: List[str]) -> None:
    """Build the model shape once so every constraint is reported at load time"""
    for key in ("m", "h", "d_model", "n_heads", "n_layers", "d_ff"):
        if key in ("m", "h") or key in model:
            value = model.get(key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                problems.append(f"model.{key}: must be a positive integer")
                return
    if "eps" in model and (not isinstance(model["eps"], (int, float)) or model["eps"] <= 0):
        problems.append("model.eps: must be a positive number")
        return
    if model.get("d_model", 64) % 2:
        problems.append("model.d_model: must be even")
    try:
        ModelConfig.from_dict({"n_features": 1, **model})
    except ConfigInvalid as e:
        problems.extend(e.problems)
    except (TypeError, ValueError) as e:
        problems.append(f"model: {e}")


def _parse_domain(name: str, raw: Any, base_dir: str, problems: List[str]) -> Optional[DomainEntry]:
    where = f"domains.{name}"
    if not isinstance(raw, dict):
        problems.append(f"{where}: must be an object")
        return None
    if ("csv" in raw) == ("synthetic" in raw):
        problems.append(f"{where}: give exactly one of 'csv' or 'synthetic'")
        return None
    resample = _check_resample(where, raw.get("resample"), problems)

    if "synthetic" in raw:
        try:
            spec = SyntheticDomainSpec(**{**raw["synthetic"], "name": name})
        except (TypeError, ValueError) as e:
            problems.append(f"{where}.synthetic: {e}")
            return None
        return DomainEntry(name=name, synthetic=spec, resample=resample)

    path = _resolve(base_dir, str(raw["csv"]))
    if not os.path.isfile(path):
        problems.append(f"{where}.csv: file not found: {path}")
    try:
        schema = dataseries.CsvSchema.from_dict({**raw.get("schema", {}), "name": name})
    except (KeyError, TypeError) as e:
        problems.append(f"{where}.schema: missing {e}")
        return None
    if schema.target and schema.target not in schema.features:
        problems.append(f"{where}.schema.target: '{schema.target}' is not among the features")
    return DomainEntry(name=name, csv=path, schema=schema, resample=resample)


def _domain_settings(raw: Dict[str, Any], entry: DomainEntry) -> Dict[str, Any]:
    settings = dict(raw)
    if entry.csv is not None:
        settings["csv"] = entry.csv
    return settings


def _train_config(raw: Any, seed: int, section: str, problems: List[str]) -> TrainConfig:
    try:
        return TrainConfig.from_dict({"seed": seed, **(raw or {})})
    except ConfigInvalid as e:
        for problem in e.problems:
            if problem.startswith("train."):
                problem = problem[len("train."):]
            problems.append(f"{section}.{problem}")
    except TypeError as e:
        problems.append(f"{section}: {e}")
    return TrainConfig(seed=seed)


def load_experiment(path: str) -> ExperimentConfig:
    """
    Read and validate an experiment file, or the settings embedded in a run manifest
    Args:
        path: JSON experiment file or manifest; relative paths inside resolve against its directory
    Returns:
        ExperimentConfig
    Raises:
        ConfigInvalid listing every problem found
    """
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise ConfigInvalid([f"{path}: cannot read experiment file ({e.strerror})"], path) from e
    try:
        raw = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ConfigInvalid([f"{path}: not valid JSON ({e})"], path) from e
    if not isinstance(raw, dict):
        raise ConfigInvalid([f"{path}: top level must be an object"], path)

    digest = hashlib.sha256(blob).hexdigest()
    if "config_sha256" in raw and "command" in raw:
        if not isinstance(raw.get("config"), dict):
            raise ConfigInvalid([f"{path}: manifest carries no embedded experiment settings"], path)
        logger.info(f"Re-running the experiment recorded in {path}")
        digest, raw = raw["config_sha256"], raw["config"]

    problems: List[str] = []
    base_dir = os.path.dirname(os.path.abspath(path))
    for key in sorted(set(raw) - TOP_LEVEL_KEYS):
        problems.append(f"{key}: unknown field")

    version = raw.get("format_version", config.EXPERIMENT_FORMAT_VERSION)
    if version != config.EXPERIMENT_FORMAT_VERSION:
        problems.append(f"format_version: expected {config.EXPERIMENT_FORMAT_VERSION}, got {version}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        problems.append("seed: must be an integer")
        seed = 0

    domains = {}
    raw_domains = raw.get("domains") or {}
    if not isinstance(raw_domains, dict) or not raw_domains:
        problems.append("domains: at least one domain is required")
        raw_domains = {}
    for name, entry in raw_domains.items():
        parsed = _parse_domain(name, entry, base_dir, problems)
        if parsed is not None:
            domains[name] = parsed

    source = raw.get("source")
    targets = list(raw.get("targets") or [])
    unseen = list(raw.get("unseen") or [])
    if not source:
        problems.append("source: required")
    elif source not in raw_domains:
        problems.append(f"source: unknown domain '{source}'")
    if source in targets:
        problems.append(f"targets: source domain '{source}' cannot also be a target")
    for key, names in (("targets", targets), ("unseen", unseen)):
        for name in names:
            if name not in raw_domains:
                problems.append(f"{key}: unknown domain '{name}'")

    windows = raw.get("windows") or {}
    if not isinstance(windows, dict):
        problems.append("windows: must be an object")
        windows = {}
    train_ratio = windows.get("train_ratio", 0.8)
    stride = windows.get("stride", 1)
    if not isinstance(train_ratio, (int, float)) or not 0.0 < train_ratio < 1.0:
        problems.append("windows.train_ratio: must lie in (0, 1)")
        train_ratio = 0.8
    if not isinstance(stride, int) or stride < 1:
        problems.append("windows.stride: must be a positive integer")
        stride = 1

    model = raw.get("model") or {}
    if isinstance(model, dict):
        model = dict(model)
        _check_model(model, problems)
    else:
        problems.append("model: must be an object")
        model = {}

    pretrain = _train_config(raw.get("pretrain"), seed, "pretrain", problems)
    finetune = _train_config(raw.get("finetune"), seed, "finetune", problems)

    strategies = list(raw.get("strategies") or ["one_step"])
    for strategy in strategies:
        if strategy not in trainloop.STRATEGIES:
            problems.append(f"strategies: unknown strategy '{strategy}'")
    if "gu_only" in strategies or ("one_step" in strategies and finetune.schedule == "gu"):
        if finetune.epochs < 3:
            problems.append("finetune.epochs: gradual unfreezing needs at least 3 epochs")

    try:
        mmd = MmdConfig.from_dict({
            "subsample_n": config.MMD_SUBSAMPLE,
            "max_pairs": config.MMD_MAX_PAIRS,
            "seed": seed,
            **(raw.get("mmd") or {}),
        })
    except ConfigInvalid as e:
        problems.extend(p if p.startswith("mmd") else f"mmd.{p}" for p in e.problems)
        mmd = MmdConfig(seed=seed)

    pct_sweep = list(raw.get("pct_sweep") or [])
    for pct in pct_sweep:
        if not isinstance(pct, (int, float)) or not 0.0 <= pct <= 1.0:
            problems.append(f"pct_sweep: {pct} must lie in [0, 1]")

    output_dir = raw.get("output_dir")
    if problems:
        raise ConfigInvalid(problems, path)
    output_dir = _resolve(base_dir, output_dir) if output_dir else None

    settings = {
        "format_version": version,
        "seed": seed,
        "source": source,
        "targets": targets,
        "unseen": unseen,
        "domains": {name: _domain_settings(raw_domains[name], entry) for name, entry in domains.items()},
        "windows": {"train_ratio": float(train_ratio), "stride": stride},
        "model": model,
        "pretrain": pretrain.to_dict(),
        "finetune": finetune.to_dict(),
        "strategies": strategies,
        "mmd": mmd.to_dict(),
        "auto_pct": bool(raw.get("auto_pct", False)),
        "pct_sweep": [float(p) for p in pct_sweep],
    }
    if output_dir:
        settings["output_dir"] = output_dir

    return ExperimentConfig(
        path=os.path.abspath(path),
        sha256=digest,
        format_version=version,
        seed=seed,
        source=source,
        targets=targets,
        unseen=unseen,
        domains=domains,
        train_ratio=float(train_ratio),
        stride=stride,
        model=model,
        pretrain=pretrain,
        finetune=finetune,
        strategies=strategies,
        mmd=mmd,
        auto_pct=settings["auto_pct"],
        pct_sweep=settings["pct_sweep"],
        output_dir=output_dir,
        settings=settings,
    )


def default_output_dir(cfg: ExperimentConfig) -> str:
    if cfg.output_dir:
        return cfg.output_dir
    stem = os.path.splitext(os.path.basename(cfg.path))[0]
    return os.path.join(_resolve(os.path.dirname(cfg.path), config.OUTPUT_ROOT), stem)


def file_id(model_id: str) -> str:
    return model_id.replace("@", "__")


@dataclass
class DomainData:
    """Raw (unnormalized) windows of one domain"""
    series: TimeSeries
    windows: WindowedDataset
    train: WindowedDataset
    test: WindowedDataset


class ExperimentRunner:
    """Runs the protocol for one experiment file into one output directory"""

    def __init__(self, cfg: ExperimentConfig, output_dir: Optional[str] = None):
        self.cfg = cfg
        self.output_dir = output_dir or default_output_dir(cfg)
        self._data: Dict[str, DomainData] = {}
        self._fisher: Optional[FisherDiag] = None
        self._mmd: Optional[MmdReport] = None
        self.runs: List[Dict[str, Any]] = []

    # Output directory

    def path(self, *parts: str) -> str:
        return os.path.join(self.output_dir, *parts)

    def prepare_output(self, fresh: bool = False, force: bool = False) -> None:
        """
        Create the output tree
        Args:
            fresh: the run needs an empty directory
            force: wipe a non-empty directory instead of refusing
        """
        if fresh and os.path.isdir(self.output_dir) and os.listdir(self.output_dir):
            if not force:
                raise ConfigInvalid(
                    [f"output_dir: {self.output_dir} is not empty; pass --force to overwrite"])
            logger.info(f"Removing previous run in {self.output_dir}")
            shutil.rmtree(self.output_dir)
        try:
            for sub in SUBDIRS:
                os.makedirs(self.path(sub), exist_ok=True)
        except OSError as e:
            raise ConfigInvalid([f"output_dir: cannot create {self.output_dir} ({e.strerror})"]) from e
        marker = self.path(FAILURE_MARKER)
        if os.path.exists(marker):
            os.remove(marker)

    def mark_failed(self, phase: str, error: Exception) -> None:
        os.makedirs(self.output_dir, exist_ok=True)
        with open(self.path(FAILURE_MARKER), "w") as f:
            f.write(f"phase={phase}\nerror={type(error).__name__}\nmessage={error}\n")
        logger.error(f"Phase '{phase}' failed: {error}")

    def write_manifest(self, name: str, command: str, extra: Optional[Dict[str, Any]] = None) -> str:
        manifest = {
            "command": command,
            "config_file": os.path.basename(self.cfg.path),
            "config_sha256": self.cfg.sha256,
            "format_version": self.cfg.format_version,
            "checkpoint_format": tsformer.FORMAT_VERSION,
            "seed": self.cfg.seed,
            "versions": {
                "workbench": config.VERSION,
                "numpy": np.__version__,
                "pandas": pd.__version__,
                "scipy": scipy.__version__,
            },
            "runs": self.runs,
            "config": self.cfg.settings,
        }
        manifest.update(extra or {})
        path = self.path(name)
        with open(path, "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        return path

    # Data

    def _load_series(self, entry: DomainEntry) -> TimeSeries:
        if entry.synthetic is not None:
            series = dataseries.synth_generate(entry.synthetic)
        else:
            series = dataseries.load_csv(entry.csv, entry.schema)
        if entry.resample:
            series = dataseries.resample(series, entry.resample["spacing"],
                                         entry.resample.get("policy", "mean"))
        return series

    def domain(self, name: str) -> DomainData:
        if name not in self._data:
            series = self._load_series(self.cfg.domains[name])
            windows = dataseries.make_windows(series, self.cfg.model["m"], self.cfg.model["h"],
                                              self.cfg.stride)
            train, test = dataseries.split_chronological(windows, self.cfg.train_ratio)
            self._data[name] = DomainData(series, windows, train, test)
            logger.info(f"Domain '{name}': {series.n} samples, {len(train)} train / {len(test)} test windows")
        return self._data[name]

    def model_config(self) -> ModelConfig:
        n_features = self.domain(self.cfg.source).series.n_features
        return ModelConfig.from_dict({"n_features": n_features, **self.cfg.model})

    def source_normalizer(self) -> Normalizer:
        return dataseries.fit_normalizer(self.domain(self.cfg.source).train)

    # Phases

    def _save(self, ckpt: Checkpoint) -> str:
        name = file_id(ckpt.model_id)
        path = self.path("checkpoints", f"{name}.tsft")
        tsformer.save_checkpoint(ckpt, path)
        trainloop.training_log_frame(ckpt).to_csv(self.path("logs", f"{name}.csv"), index=False)
        return path

    def pretrain(self) -> Checkpoint:
        norm = self.source_normalizer()
        train = dataseries.apply(norm, self.domain(self.cfg.source).train)
        ckpt = trainloop.pretrain(self.cfg.pretrain, self.model_config(), train, norm)
        self._save(ckpt)
        self.runs.append({"model_id": ckpt.model_id, "strategy": "pretrain",
                          "epochs_run": ckpt.metadata["epochs_run"]})
        return ckpt

    def domain_samples(self, names: List[str], norm: Normalizer) -> List:
        return [
            domaindist.domain_sample(dataseries.apply(norm, self.domain(name).train),
                                     self.cfg.mmd.subsample_n, self.cfg.mmd.seed)
            for name in names
        ]

    def mmd(self, norm: Optional[Normalizer] = None, write: bool = True) -> MmdReport:
        """Rank targets by distance to the source on source-normalized training windows"""
        if self._mmd is not None:
            return self._mmd
        if not self.cfg.targets:
            raise ConfigInvalid(["targets: at least one target domain is required"])
        norm = norm or self.source_normalizer()
        source, *targets = self.domain_samples([self.cfg.source, *self.cfg.targets], norm)
        report = domaindist.rank_targets(source, targets, self.cfg.mmd)
        if write:
            domaindist.write_report(report, self.path("reports", "mmd.csv"))
            everything = list(dict.fromkeys([self.cfg.source, *self.cfg.targets, *self.cfg.unseen]))
            table = domaindist.pairwise_table(self.domain_samples(everything, norm), self.cfg.mmd)
            table.to_csv(self.path("reports", "mmd_pairwise.csv"))
        self._mmd = report
        return report

    def resolve_pct(self, target: str, pct: Optional[float] = None, auto: bool = False) -> float:
        if pct is not None:
            return pct
        if auto or self.cfg.auto_pct:
            return self.mmd().row_for(target).recommended_pct
        return self.cfg.finetune.mix_pct

    def fisher(self, base: Checkpoint) -> FisherDiag:
        if self._fisher is None:
            train = dataseries.apply(base.normalizer, self.domain(self.cfg.source).train)
            self._fisher = trainloop.fisher_estimate(base, train, self.cfg.finetune.fisher_samples,
                                                     self.cfg.finetune.seed)
        return self._fisher

    def finetune(self, strategy: str, base: Optional[Checkpoint], target: str,
                 pct: Optional[float] = None, auto_pct: bool = False, save: bool = True) -> Checkpoint:
        """
        Fine-tune one strategy on one target
        Args:
            strategy: strategy name
            base: pre-trained checkpoint (unused by exclusive)
            target: target domain id
            pct: mixing percentage for one_step (overrides the file)
            auto_pct: take the percentage from the MMD recommendation
            save: write checkpoint and log
        Returns:
            fine-tuned checkpoint
        """
        if strategy not in trainloop.STRATEGIES:
            raise UnknownStrategy(
                f"Unknown strategy '{strategy}', expected one of {', '.join(trainloop.STRATEGIES)}")
        if base is None and strategy != "exclusive":
            raise ConfigInvalid([f"--checkpoint: required for strategy '{strategy}'"])
        cfg = self.cfg.finetune
        run: Dict[str, Any] = {"strategy": strategy, "target": target}
        raw_train = self.domain(target).train

        if strategy == "exclusive":
            norm = dataseries.fit_normalizer(raw_train)
            ckpt = trainloop.finetune(strategy, base, dataseries.apply(norm, raw_train), cfg,
                                      model_cfg=self.model_config(), normalizer=norm)
        else:
            train = dataseries.apply(base.normalizer, raw_train)
            source_train = fisher = None
            if strategy == "one_step":
                resolved = self.resolve_pct(target, pct, auto_pct)
                cfg = dataclasses.replace(cfg, mix_pct=resolved)
                source_train = dataseries.apply(base.normalizer, self.domain(self.cfg.source).train)
                run.update(pct=resolved, schedule=cfg.schedule)
            elif strategy == "ewc":
                fisher = self.fisher(base)
            ckpt = trainloop.finetune(strategy, base, train, cfg, source_train=source_train,
                                      fisher=fisher)
        run.update(model_id=ckpt.model_id, epochs_run=ckpt.metadata["epochs_run"],
                   phases=ckpt.metadata.get("schedule"))
        self.runs.append(run)
        if save:
            self._save(ckpt)
        return ckpt

    def _dump(self, report: MetricsReport) -> None:
        name = f"{file_id(report.model_id)}__on__{report.domain}.csv"
        evalkit.dump_frame(report).to_csv(self.path("dumps", name), index=False)

    def evaluate_all(self, source_ckpt: Checkpoint, finetuned: Dict[str, List[Checkpoint]]) -> List[MetricsReport]:
        """Metrics, forgetting, data-shift and improvement reports"""
        src = self.domain(self.cfg.source)
        reports = [evalkit.evaluate(source_ckpt, src.test),
                   evalkit.persistence_baseline(src.test, source_ckpt.normalizer)]
        self._dump(reports[0])
        by_target: Dict[str, List[MetricsReport]] = {}
        for target in self.cfg.targets:
            test = self.domain(target).test
            before = evalkit.evaluate(source_ckpt, test)
            scored = [before] + [evalkit.evaluate(ckpt, test) for ckpt in finetuned.get(target, [])]
            for report in scored:
                self._dump(report)
            by_target[target] = scored
            reports += scored + [evalkit.persistence_baseline(test, source_ckpt.normalizer)]
        evalkit.write_metrics(reports, self.path("reports", "metrics.csv"),
                              self.path("reports", "metrics.txt"))

        everything = [ckpt for ckpts in finetuned.values() for ckpt in ckpts]
        forgetting = evalkit.forgetting_check(source_ckpt, everything, src.test)
        evalkit.forgetting_frame(forgetting).to_csv(self.path("reports", "forgetting.csv"), index=False)

        if self.cfg.unseen:
            grid = evalkit.shift_check([source_ckpt, *everything],
                                       [self.domain(name).windows for name in self.cfg.unseen])
            shift = [report for row in grid for report in row]
            evalkit.metrics_frame(shift).to_csv(self.path("reports", "shift.csv"), index=False)
            reports += shift

        if "one_step" in self.cfg.strategies:
            evalkit.improvement_frame(by_target, "one_step").to_csv(
                self.path("reports", "improvement.csv"), index=False)
        return reports

    def sweep(self, base: Checkpoint) -> pd.DataFrame:
        """one_step over every mixing percentage on every target"""
        pcts = self.cfg.pct_sweep or list(DEFAULT_SWEEP)
        recommended = self.mmd()
        rows = []
        for target in self.cfg.targets:
            test = self.domain(target).test
            for pct in pcts:
                ckpt = self.finetune("one_step", base, target, pct=pct, save=False)
                report = evalkit.evaluate(ckpt, test)
                rows.append([target, pct, report.rmse, report.mae,
                             recommended.row_for(target).recommended_pct])
        frame = pd.DataFrame(rows, columns=["target", "pct", "rmse", "mae", "recommended_pct"])
        frame.to_csv(self.path("reports", "pct_sweep.csv"), index=False)
        return frame

    def run_experiment(self) -> Dict[str, Any]:
        """
        Full protocol: pretrain, mmd, fine-tune every strategy on every target, evaluate
        Returns:
            summary counts
        """
        phase = "pretrain"
        try:
            source_ckpt = self.pretrain()
            phase = "mmd"
            self.mmd(source_ckpt.normalizer)
            phase = "finetune"
            finetuned: Dict[str, List[Checkpoint]] = {}
            for target in self.cfg.targets:
                for strategy in self.cfg.strategies:
                    finetuned.setdefault(target, []).append(self.finetune(strategy, source_ckpt, target))
            phase = "evaluate"
            reports = self.evaluate_all(source_ckpt, finetuned)
            if self.cfg.pct_sweep:
                phase = "sweep"
                self.sweep(source_ckpt)
        except WorkbenchError as e:
            self.mark_failed(phase, e)
            raise
        self.write_manifest("manifest.json", "experiment")
        checkpoints = 1 + sum(len(c) for c in finetuned.values())
        logger.info(f"Experiment finished: {checkpoints} checkpoints, {len(reports)} metrics reports")
        return {"checkpoints": checkpoints, "metrics_reports": len(reports)}


def load_base(path: Optional[str]) -> Optional[Checkpoint]:
    return tsformer.load_checkpoint(path) if path else None


def check_pct(pct: Optional[float]) -> Optional[float]:
    if pct is not None and not 0.0 <= pct <= 1.0:
        raise ConfigInvalid([f"--pct: {pct} must lie in [0, 1]"])
    return pct
