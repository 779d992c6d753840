"""
Directional checks on synthetic domains; run with `pytest -m slow`
"""
import numpy as np
import pytest

import dataseries
import domaindist
import evalkit
import trainloop
from models import ModelConfig, MmdConfig, SyntheticDomainSpec, TrainConfig

pytestmark = pytest.mark.slow

SEEDS = range(5)
M, H = 12, 4


def domain(name, mean, amplitude, seed, n):
    spec = SyntheticDomainSpec(n=n, phi=0.6, period=24, amplitude=amplitude, mean=mean,
                               noise_std=0.1, seed=seed, name=name)
    windows = dataseries.make_windows(dataseries.synth_generate(spec), M, H)
    return dataseries.split_chronological(windows, 0.8)


@pytest.fixture(scope="module")
def model_cfg():
    return ModelConfig(n_features=1, m=M, h=H, d_model=8, n_heads=2, n_layers=1, d_ff=16)


@pytest.fixture(scope="module")
def transfer_runs(model_cfg):
    """Per seed: a long source, a short target with shifted level and amplitude, three strategies"""
    runs = []
    for seed in SEEDS:
        src_train, src_test = domain("source", 0.0, 1.0, seed, n=20_000)
        tgt_train, tgt_test = domain("target", 1.5, 1.6, 100 + seed, n=1_200)

        norm = dataseries.fit_normalizer(src_train)
        source_ckpt = trainloop.pretrain(
            TrainConfig(epochs=4, batch_size=64, lr=3e-3, patience=4, seed=seed),
            model_cfg, dataseries.apply(norm, src_train), norm)

        tune = TrainConfig(epochs=10, batch_size=32, lr=1e-3, early_stopping=False,
                           mix_pct=0.05, seed=seed)
        target = dataseries.apply(norm, tgt_train)
        one_step = trainloop.finetune("one_step", source_ckpt, target, tune,
                                      source_train=dataseries.apply(norm, src_train))
        no_gu = trainloop.finetune("no_gu", source_ckpt, target, tune)
        own = dataseries.fit_normalizer(tgt_train)
        exclusive = trainloop.finetune("exclusive", None, dataseries.apply(own, tgt_train), tune,
                                       model_cfg=model_cfg, normalizer=own)

        runs.append({
            "before": evalkit.evaluate(source_ckpt, tgt_test).rmse,
            "one_step": evalkit.evaluate(one_step, tgt_test).rmse,
            "exclusive": evalkit.evaluate(exclusive, tgt_test).rmse,
            "one_step_source": evalkit.evaluate(one_step, src_test).rmse,
            "no_gu_source": evalkit.evaluate(no_gu, src_test).rmse,
            "source_model": source_ckpt,
            "source_test": src_test,
        })
    return runs


def median(runs, key):
    return float(np.median([run[key] for run in runs]))


class TestDirectional:
    """Behaviour expected of a working pipeline"""

    @pytest.mark.parametrize("seed", SEEDS)
    def test_mmd_orders_domains_by_offset(self, seed):
        src_train, _ = domain("source", 0.0, 1.0, seed, n=20_000)
        norm = dataseries.fit_normalizer(src_train)
        offsets = {"plus_0.5": 0.5, "plus_1.0": 1.0, "plus_2.0": 2.0}
        targets = [
            domaindist.domain_sample(
                dataseries.apply(norm, domain(name, offset, 1.0, 10 * seed + i, n=1_200)[0]), 2000, seed)
            for i, (name, offset) in enumerate(offsets.items())
        ]
        source = domaindist.domain_sample(dataseries.apply(norm, src_train), 2000, seed)
        report = domaindist.rank_targets(source, targets, MmdConfig(seed=seed))

        assert [row.target for row in report.rows] == list(offsets)
        distances = [report.row_for(name).mmd2 for name in offsets]
        assert distances[0] < distances[1] < distances[2]

    def test_one_step_beats_the_unadapted_model(self, transfer_runs):
        assert median(transfer_runs, "one_step") <= median(transfer_runs, "before")

    def test_one_step_beats_target_only_training(self, transfer_runs):
        assert median(transfer_runs, "one_step") <= median(transfer_runs, "exclusive")

    def test_mixing_limits_forgetting(self, transfer_runs):
        assert median(transfer_runs, "one_step_source") <= median(transfer_runs, "no_gu_source")

    def test_pretrained_model_beats_persistence(self, transfer_runs):
        run = transfer_runs[0]
        assert (evalkit.evaluate(run["source_model"], run["source_test"]).rmse
                < evalkit.persistence_baseline(run["source_test"]).rmse)
