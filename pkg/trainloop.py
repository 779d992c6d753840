"""
Losses, Adam, freeze schedules, pre-training and fine-tuning strategies
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd

import gradflow as gf
import tsformer
from dataseries import mix_source
from errors import (
    EmptyDataset,
    MissingFisher,
    MissingSource,
    NonFiniteInput,
    NonFiniteLoss,
    ShapeMismatch,
    TooFewEpochs,
    TrainingError,
    UnknownStrategy,
)
from models import (
    Checkpoint,
    FisherDiag,
    FreezeSchedule,
    ModelConfig,
    ModelParameters,
    Normalizer,
    TrainConfig,
    WindowedDataset,
    group_of,
)

logger = logging.getLogger(__name__)

STRATEGIES = ("one_step", "gu_only", "ewc", "top_layer_only", "no_gu", "exclusive")

# Energy schedule: decoder only for epochs 0-9, encoder unfreezing 10-19, everything 20-34
GU_FIRST_FRACTION = 10 / 35
GU_SECOND_FRACTION = 20 / 35

StepHook = Callable[[int, Set[str], ModelParameters, ModelParameters], None]


def mae_loss(pred: gf.Node, actual: gf.Node) -> gf.Node:
    """Mean absolute error over every element"""
    if pred.shape != actual.shape:
        raise ShapeMismatch(f"mae_loss: prediction {pred.shape} vs actual {actual.shape}")
    return gf.mean(gf.abs_(gf.sub(pred, actual)))


@dataclass(frozen=True)
class AdamState:
    """First/second moments and per-parameter step counts"""
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    steps: Dict[str, int] = field(default_factory=dict)

    @classmethod
    def fresh(cls, params: ModelParameters, cfg: Optional[TrainConfig] = None) -> "AdamState":
        cfg = cfg or TrainConfig()
        return cls(
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            eps=cfg.adam_eps,
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
            steps={name: 0 for name in params},
        )


def adam_step(
    state: AdamState,
    params: ModelParameters,
    grads: Dict[str, np.ndarray],
    lr: float,
    trainable: Optional[Set[str]] = None,
) -> Tuple[ModelParameters, AdamState]:
    """
    One bias-corrected Adam update
    Args:
        state: moments from the previous step
        params: current parameters
        grads: gradient per parameter name
        lr: learning rate
        trainable: names allowed to move; others keep their values and moments
    Returns:
        updated parameters and state
    """
    m, v, steps = dict(state.m), dict(state.v), dict(state.steps)
    updates = {}
    for name, g in grads.items():
        if trainable is not None and name not in trainable:
            continue
        if g.shape != params[name].shape or m[name].shape != g.shape:
            raise ShapeMismatch(f"adam_step: gradient for {name} has shape {g.shape}")
        t = steps[name] + 1
        m[name] = state.beta1 * m[name] + (1.0 - state.beta1) * g
        v[name] = state.beta2 * v[name] + (1.0 - state.beta2) * g * g
        m_hat = m[name] / (1.0 - state.beta1 ** t)
        v_hat = v[name] / (1.0 - state.beta2 ** t)
        updates[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        steps[name] = t
    new_state = AdamState(state.beta1, state.beta2, state.eps, m, v, steps)
    return params.replace(updates), new_state


def gu_schedule(total_epochs: int, groups: Sequence[str]) -> FreezeSchedule:
    """
    Gradual unfreezing scaled from the 35-epoch Energy schedule
    Args:
        total_epochs: fine-tuning budget (>= 3)
        groups: parameter groups ordered output-to-input
    Returns:
        decoder-only phase, one sub-phase per encoder group (top-down), then everything
    """
    if total_epochs < 3:
        raise TooFewEpochs(f"Gradual unfreezing needs at least 3 epochs, got {total_epochs}")
    first = max(1, round(total_epochs * GU_FIRST_FRACTION))
    second = min(total_epochs - 1, max(first + 1, round(total_epochs * GU_SECOND_FRACTION)))

    decoder = groups[0]
    encoders = [g for g in groups if g.startswith("encoder")]
    phases: List[Tuple[int, FrozenSet[str]]] = [(0, frozenset([decoder]))]
    trainable = {decoder}
    for i, encoder in enumerate(encoders):
        start = first + (i * (second - first)) // len(encoders)
        trainable = trainable | {encoder}
        if phases[-1][0] == start:
            phases[-1] = (start, frozenset(trainable))
        else:
            phases.append((start, frozenset(trainable)))
    phases.append((second, frozenset(groups)))
    return FreezeSchedule(total_epochs, tuple(phases))


def top_layer_schedule(total_epochs: int, groups: Sequence[str]) -> FreezeSchedule:
    return FreezeSchedule(total_epochs, ((0, frozenset([groups[0]])),))


def all_groups_schedule(total_epochs: int, groups: Sequence[str]) -> FreezeSchedule:
    return FreezeSchedule(total_epochs, ((0, frozenset(groups)),))


SCHEDULES = {
    "gu": gu_schedule,
    "top": top_layer_schedule,
    "all": all_groups_schedule,
}


def describe_schedule(schedule: FreezeSchedule) -> List[list]:
    return [[start, sorted(groups)] for start, groups in schedule.phases]


@dataclass
class TrainResult:
    params: ModelParameters
    loss_trace: List[float]
    log: List[list]
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.loss_trace)


def ewc_penalty(tape: gf.Tape, nodes: Dict[str, gf.Node], fisher: FisherDiag, lam: float) -> gf.Node:
    """(lam / 2) * sum_i F_i (theta_i - theta*_i)^2 over the trainable nodes"""
    terms = []
    for name, node in nodes.items():
        if not node.is_param or name not in fisher.weights:
            continue
        diff = gf.sub(node, tape.const(fisher.anchor[name]))
        terms.append(gf.sum_(gf.mul(tape.const(fisher.weights[name]), gf.mul(diff, diff))))
    if not terms:
        return tape.const(np.array(0.0))
    total = terms[0]
    for term in terms[1:]:
        total = gf.add(total, term)
    return gf.scale(total, lam / 2.0)


def run_epochs(
    params: ModelParameters,
    model_cfg: ModelConfig,
    data: WindowedDataset,
    cfg: TrainConfig,
    schedule: FreezeSchedule,
    fisher: Optional[FisherDiag] = None,
    on_step: Optional[StepHook] = None,
) -> TrainResult:
    """
    Seeded epoch loop shared by every strategy
    Args:
        params: starting parameters (never mutated)
        model_cfg: model shape
        data: normalized training windows
        cfg: optimisation settings
        schedule: trainable groups per epoch
        fisher: EWC anchor and weights; penalty applied when cfg.ewc_lambda != 0
        on_step: called after each optimizer step with (epoch, trainable names, before, after)
    Returns:
        TrainResult with final parameters, loss trace and per-epoch log rows
    """
    if len(data) == 0:
        raise EmptyDataset(f"No training windows in '{data.domain}'")
    if (data.m, data.h, data.n_features) != (model_cfg.m, model_cfg.h, model_cfg.n_features):
        raise ShapeMismatch(
            f"Dataset windows ({data.m}, {data.h}, {data.n_features}) do not fit the model "
            f"({model_cfg.m}, {model_cfg.h}, {model_cfg.n_features})"
        )

    rng = np.random.default_rng(cfg.seed)
    state = AdamState.fresh(params, cfg)
    use_penalty = fisher is not None and cfg.ewc_lambda != 0
    trace: List[float] = []
    log: List[list] = []
    best, wait, forced_phase = math.inf, 0, 0
    stopped = False
    group_order = tsformer.parameter_groups(params)

    for epoch in range(cfg.epochs):
        phase = max(schedule.phase_at(epoch), forced_phase)
        groups = schedule.phases[phase][1]
        trainable = {name for name in params.names if group_of(name) in groups}
        order = rng.permutation(len(data))
        total = 0.0

        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            try:
                tape = gf.Tape()
                nodes = tsformer.bind(tape, params, trainable)
                pred = tsformer.forward_nodes(tape, nodes, model_cfg, data.inputs[idx])
                loss = mae_loss(pred, tape.const(data.targets[idx]))
                if use_penalty:
                    loss = gf.add(loss, ewc_penalty(tape, nodes, fisher, cfg.ewc_lambda))
            except NonFiniteInput as e:
                raise NonFiniteLoss(f"Training diverged in epoch {epoch}: {e}") from e
            value = float(loss.value)
            if not math.isfinite(value):
                raise NonFiniteLoss(f"Loss became {value} in epoch {epoch}")

            grads = {node.name: g for node, g in gf.backward(tape, loss).items()}
            before = params
            params, state = adam_step(state, params, grads, cfg.lr, trainable)
            if on_step is not None:
                on_step(epoch, trainable, before, params)
            total += value * len(idx)

        epoch_loss = total / len(data)
        trace.append(epoch_loss)
        group_label = ";".join(g for g in group_order if g in groups)
        log.append([epoch, phase + 1, group_label, epoch_loss])
        logger.info(f"epoch {epoch} phase {phase + 1} [{group_label}] train_loss={epoch_loss:.6f}")

        if not cfg.early_stopping:
            continue
        if epoch_loss < best - cfg.min_delta:
            best, wait = epoch_loss, 0
        else:
            wait += 1
        if wait >= cfg.patience:
            if cfg.advance_on_plateau and phase < len(schedule.phases) - 1:
                forced_phase, wait = phase + 1, 0
                logger.info(f"Loss plateaued at epoch {epoch}; unfreezing phase {forced_phase + 1}")
                continue
            logger.info(f"Early stopping after epoch {epoch} (best loss {best:.6f})")
            stopped = True
            break

    return TrainResult(params=params, loss_trace=trace, log=log, stopped_early=stopped)


def _metadata(result: TrainResult, cfg: TrainConfig, strategy: str, model_id: str,
              **extra) -> Dict:
    metadata = {
        "model_id": model_id,
        "strategy": strategy,
        "seed": cfg.seed,
        "epochs_run": result.epochs_run,
        "stopped_early": result.stopped_early,
        "loss_trace": result.loss_trace,
        "train_log": result.log,
        "train_config": cfg.to_dict(),
    }
    metadata.update(extra)
    return metadata


def pretrain(
    cfg: TrainConfig,
    model_cfg: ModelConfig,
    source_train: WindowedDataset,
    normalizer: Optional[Normalizer] = None,
    on_step: Optional[StepHook] = None,
) -> Checkpoint:
    """
    Train a freshly initialised model with every group trainable
    Args:
        cfg: optimisation settings (seed drives both init and shuffling)
        model_cfg: model shape
        source_train: normalized training windows
        normalizer: statistics used to normalize source_train, stored in the checkpoint
    Returns:
        source checkpoint
    """
    if len(source_train) == 0:
        raise EmptyDataset(f"No training windows in '{source_train.domain}'")
    params = tsformer.init_params(model_cfg, cfg.seed)
    schedule = all_groups_schedule(cfg.epochs, tsformer.parameter_groups(params))
    logger.info(f"Pre-training on '{source_train.domain}' ({len(source_train)} windows)")
    result = run_epochs(params, model_cfg, source_train, cfg, schedule, on_step=on_step)
    return Checkpoint(
        config=model_cfg,
        params=result.params,
        normalizer=normalizer or Normalizer.identity(model_cfg.n_features, source_train.target_index),
        metadata=_metadata(result, cfg, "pretrain", f"source@{source_train.domain}",
                           source_domain=source_train.domain,
                           schedule=describe_schedule(schedule)),
    )


def finetune(
    strategy: str,
    base: Optional[Checkpoint],
    target_train: WindowedDataset,
    cfg: TrainConfig,
    source_train: Optional[WindowedDataset] = None,
    fisher: Optional[FisherDiag] = None,
    model_cfg: Optional[ModelConfig] = None,
    normalizer: Optional[Normalizer] = None,
    on_step: Optional[StepHook] = None,
) -> Checkpoint:
    """
    Adapt a model to a target domain
    Args:
        strategy: one_step, gu_only, ewc, top_layer_only, no_gu or exclusive
        base: pre-trained checkpoint (ignored by exclusive)
        target_train: target training windows, normalized like the base model's inputs
        cfg: optimisation settings; one_step reads mix_pct, mix_base and schedule
        source_train: source training windows (one_step), same normalization
        fisher: diagonal Fisher estimate (ewc)
        model_cfg: model shape for exclusive training without a base
        normalizer: statistics stored in the result (defaults to the base's)
    Returns:
        fine-tuned checkpoint; the base checkpoint is left untouched
    """
    if strategy not in STRATEGIES:
        raise UnknownStrategy(f"Unknown strategy '{strategy}', expected one of {', '.join(STRATEGIES)}")
    model_id = f"{strategy}@{target_train.domain}"

    if strategy == "exclusive":
        shape = model_cfg or (base.config if base is not None else None)
        if shape is None:
            raise TrainingError("Exclusive training needs a model configuration")
        ckpt = pretrain(cfg, shape, target_train, normalizer, on_step=on_step)
        ckpt.metadata.update(model_id=model_id, strategy=strategy, target_domain=target_train.domain)
        return ckpt

    if base is None:
        raise TrainingError(f"Strategy '{strategy}' needs a pre-trained checkpoint")
    groups = tsformer.parameter_groups(base.params)
    data = target_train
    extra = {"target_domain": target_train.domain,
             "source_domain": base.metadata.get("source_domain")}

    if strategy == "one_step":
        if source_train is None:
            raise MissingSource("one_step fine-tuning needs source training windows")
        data = mix_source(target_train, source_train, cfg.mix_pct, cfg.seed, cfg.mix_base)
        schedule = SCHEDULES[cfg.schedule](cfg.epochs, groups)
        extra.update(mix_pct=cfg.mix_pct, mixed_windows=len(data) - len(target_train))
    elif strategy == "gu_only":
        schedule = gu_schedule(cfg.epochs, groups)
    elif strategy == "top_layer_only":
        schedule = top_layer_schedule(cfg.epochs, groups)
    else:
        if strategy == "ewc" and fisher is None:
            raise MissingFisher("ewc fine-tuning needs a Fisher estimate")
        schedule = all_groups_schedule(cfg.epochs, groups)
    if strategy == "ewc":
        extra["ewc_lambda"] = cfg.ewc_lambda

    logger.info(f"Fine-tuning '{strategy}' on '{target_train.domain}' ({len(data)} windows)")
    result = run_epochs(base.params, base.config, data, cfg, schedule,
                        fisher=fisher if strategy == "ewc" else None, on_step=on_step)
    return Checkpoint(
        config=base.config,
        params=result.params,
        normalizer=normalizer or base.normalizer,
        metadata=_metadata(result, cfg, strategy, model_id,
                           schedule=describe_schedule(schedule), **extra),
    )


def fisher_estimate(base: Checkpoint, source_sample: WindowedDataset, n_samples: int,
                    seed: int = 0) -> FisherDiag:
    """
    Diagonal empirical Fisher: mean over sampled windows of squared MAE gradients
    Args:
        base: anchor checkpoint
        source_sample: normalized source windows
        n_samples: windows to use (clamped to the sample size)
        seed: window sampling seed
    Returns:
        FisherDiag anchored at the base parameters
    """
    if len(source_sample) == 0 or n_samples < 1:
        raise EmptyDataset("Fisher estimation needs at least one window")
    count = min(n_samples, len(source_sample))
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(source_sample), size=count, replace=False))

    totals = {name: np.zeros_like(value) for name, value in base.params.items()}
    for i in picked:
        tape = gf.Tape()
        nodes = tsformer.bind(tape, base.params)
        pred = tsformer.forward_nodes(tape, nodes, base.config, source_sample.inputs[i:i + 1])
        loss = mae_loss(pred, tape.const(source_sample.targets[i:i + 1]))
        for node, g in gf.backward(tape, loss).items():
            totals[node.name] += g * g
    weights = {name: total / count for name, total in totals.items()}
    anchor = {name: np.array(value) for name, value in base.params.items()}
    logger.info(f"Estimated Fisher diagonal from {count} windows of '{source_sample.domain}'")
    return FisherDiag(weights=weights, anchor=anchor)


def training_log_frame(ckpt: Checkpoint) -> pd.DataFrame:
    """Per-epoch training log: epoch, phase, trainable_groups, train_loss"""
    return pd.DataFrame(
        ckpt.metadata.get("train_log", []),
        columns=["epoch", "phase", "trainable_groups", "train_loss"],
    )
