"""
Test cases for the time-series Transformer and its checkpoint format
"""
import json
import math
import struct

import pytest
import numpy as np

import gradflow as gf
import tsformer
from errors import CheckpointIOError, CorruptFile, OddDimension, ShapeMismatch, VersionMismatch
from models import Checkpoint, ModelConfig, ModelParameters, Normalizer
from trainloop import mae_loss


@pytest.fixture
def tiny_cfg():
    return ModelConfig(n_features=2, m=4, h=2, d_model=8, n_heads=2, n_layers=1, d_ff=16)


@pytest.fixture
def tiny_params(tiny_cfg):
    return tsformer.init_params(tiny_cfg, seed=3)


def layer_norm(x, gamma, beta, eps):
    centered = x - x.mean(axis=-1, keepdims=True)
    return centered / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps) * gamma + beta


def softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class TestPositionalEncoding:
    """Test cases for positional_encoding"""

    def test_first_row_alternates(self):
        np.testing.assert_array_equal(tsformer.positional_encoding(1, 4)[0], [0.0, 1.0, 0.0, 1.0])

    def test_known_entries(self):
        pe = tsformer.positional_encoding(2, 4)
        assert pe[1, 0] == pytest.approx(math.sin(1.0), abs=1e-12)
        assert pe[1, 2] == pytest.approx(math.sin(0.01), abs=1e-12)

    def test_closed_form_grid(self):
        pe = tsformer.positional_encoding(96, 64)
        pos = np.arange(96)[:, None]
        i = np.arange(32)[None, :]
        angle = pos / np.power(10000.0, 2 * i / 64)
        np.testing.assert_allclose(pe[:, 0::2], np.sin(angle), atol=1e-12)
        np.testing.assert_allclose(pe[:, 1::2], np.cos(angle), atol=1e-12)
        np.testing.assert_array_equal(pe[0], np.tile([0.0, 1.0], 32))
        assert np.abs(pe).max() <= 1.0

    def test_odd_dimension(self):
        with pytest.raises(OddDimension):
            tsformer.positional_encoding(4, 5)


class TestParameters:
    """Test cases for parameter layout and grouping"""

    def test_groups_two_layers(self):
        cfg = ModelConfig(n_features=1, m=4, h=1, d_model=8, n_heads=2, n_layers=2, d_ff=8)
        params = tsformer.init_params(cfg, 0)
        assert tsformer.parameter_groups(params) == ["decoder", "encoder.2", "encoder.1", "embedding"]
        assert params.groups() == list(reversed(tsformer.parameter_groups(params)))

    def test_groups_one_layer(self, tiny_params):
        assert tsformer.parameter_groups(tiny_params) == ["decoder", "encoder.1", "embedding"]

    def test_every_parameter_in_one_group(self, tiny_params):
        members = [name for g in tiny_params.groups() for name in tiny_params.members(g)]
        assert sorted(members) == sorted(tiny_params.names)

    def test_init_is_seeded_and_bounded(self, tiny_cfg):
        a = tsformer.init_params(tiny_cfg, 5)
        b = tsformer.init_params(tiny_cfg, 5)
        assert a.max_abs_diff(b) == 0.0
        assert np.abs(a["embedding.W"]).max() <= 1.0 / math.sqrt(2)
        np.testing.assert_array_equal(a["encoder.1.ln1.gamma"], 1.0)
        np.testing.assert_array_equal(a["encoder.1.ln1.beta"], 0.0)
        assert tsformer.init_params(tiny_cfg, 6).max_abs_diff(a) > 0


class TestForward:
    """Test cases for forward and predict"""

    def test_energy_shape(self):
        cfg = ModelConfig(n_features=1, m=96, h=4)
        params = tsformer.init_params(cfg, 0)
        out = tsformer.forward(params, cfg, np.random.default_rng(0).normal(size=(96, 1)))
        assert out.shape == (4,)

    def test_zero_network_outputs_decoder_bias(self, tiny_cfg, tiny_params):
        zeros = ModelParameters({name: np.zeros(v.shape) for name, v in tiny_params.items()})
        params = zeros.replace({"decoder.b": np.array([1.5, -2.0])})
        for seed in range(3):
            window = np.random.default_rng(seed).normal(size=(4, 2))
            np.testing.assert_array_equal(tsformer.forward(params, tiny_cfg, window), [1.5, -2.0])

    def test_matches_hand_computation(self):
        cfg = ModelConfig(n_features=1, m=3, h=1, d_model=2, n_heads=1, n_layers=1, d_ff=2)
        p = {
            "embedding.W": np.array([[0.5, -1.0]]),
            "embedding.b": np.array([0.1, 0.2]),
            "encoder.1.attn.Wq": np.array([[1.0, 0.0], [0.5, 1.0]]),
            "encoder.1.attn.Wk": np.array([[0.2, -0.3], [0.4, 0.1]]),
            "encoder.1.attn.Wv": np.array([[1.0, 2.0], [0.0, -1.0]]),
            "encoder.1.attn.Wo": np.array([[0.3, 0.0], [0.1, 0.7]]),
            "encoder.1.attn.bo": np.array([0.05, -0.05]),
            "encoder.1.ln1.gamma": np.array([1.0, 2.0]),
            "encoder.1.ln1.beta": np.array([0.0, 0.5]),
            "encoder.1.ffn.W1": np.array([[1.0, -1.0], [0.5, 0.5]]),
            "encoder.1.ffn.b1": np.array([0.0, 0.1]),
            "encoder.1.ffn.W2": np.array([[0.2, 0.3], [-0.4, 0.6]]),
            "encoder.1.ffn.b2": np.array([0.01, 0.02]),
            "encoder.1.ln2.gamma": np.array([0.9, 1.1]),
            "encoder.1.ln2.beta": np.array([-0.1, 0.1]),
            "decoder.W": np.array([[2.0], [-1.0]]),
            "decoder.b": np.array([0.3]),
        }
        window = np.array([[1.0], [-2.0], [0.5]])

        h = window @ p["embedding.W"] + p["embedding.b"] + tsformer.positional_encoding(3, 2)
        q, k, v = h @ p["encoder.1.attn.Wq"], h @ p["encoder.1.attn.Wk"], h @ p["encoder.1.attn.Wv"]
        att = softmax(q @ k.T / math.sqrt(2)) @ v @ p["encoder.1.attn.Wo"] + p["encoder.1.attn.bo"]
        h1 = layer_norm(h + att, p["encoder.1.ln1.gamma"], p["encoder.1.ln1.beta"], cfg.eps)
        ff = np.maximum(h1 @ p["encoder.1.ffn.W1"] + p["encoder.1.ffn.b1"], 0.0)
        ff = ff @ p["encoder.1.ffn.W2"] + p["encoder.1.ffn.b2"]
        h2 = layer_norm(h1 + ff, p["encoder.1.ln2.gamma"], p["encoder.1.ln2.beta"], cfg.eps)
        expected = h2[-1] @ p["decoder.W"] + p["decoder.b"]

        out = tsformer.forward(ModelParameters(p), cfg, window)
        np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-12)

    def test_positional_encoding_makes_order_matter(self, tiny_cfg, tiny_params):
        window = np.random.default_rng(4).normal(size=(4, 2))
        permuted = window[[1, 0, 3, 2]]
        a = tsformer.forward(tiny_params, tiny_cfg, window)
        b = tsformer.forward(tiny_params, tiny_cfg, permuted)
        assert not np.allclose(a, b)

    def test_deterministic(self, tiny_cfg, tiny_params):
        window = np.random.default_rng(8).normal(size=(4, 2))
        a = tsformer.forward(tiny_params, tiny_cfg, window)
        b = tsformer.forward(tiny_params, tiny_cfg, window)
        assert a.tobytes() == b.tobytes()

    def test_predict_matches_forward(self, tiny_cfg, tiny_params):
        windows = np.random.default_rng(9).normal(size=(5, 4, 2))
        batch = tsformer.predict(tiny_params, tiny_cfg, windows)
        for i in range(5):
            np.testing.assert_allclose(batch[i], tsformer.forward(tiny_params, tiny_cfg, windows[i]),
                                       rtol=1e-12, atol=1e-14)

    def test_wrong_window_shape(self, tiny_cfg, tiny_params):
        with pytest.raises(ShapeMismatch):
            tsformer.forward(tiny_params, tiny_cfg, np.zeros((5, 2)))

    def test_bind_freezes_names_outside_trainable(self, tiny_params):
        tape = gf.Tape()
        nodes = tsformer.bind(tape, tiny_params, trainable={"decoder.W", "decoder.b"})
        assert {name for name, node in nodes.items() if node.is_param} == {"decoder.W", "decoder.b"}


class TestModelGradients:
    """Forward + MAE gradients against finite differences"""

    def test_full_model_grad_check(self, tiny_cfg, tiny_params):
        rng = np.random.default_rng(11)
        windows = rng.normal(size=(2, 4, 2))
        targets = rng.normal(size=(2, 2))

        def f(tape, nodes):
            pred = tsformer.forward_nodes(tape, nodes, tiny_cfg, windows)
            return mae_loss(pred, tape.const(targets))

        point = {name: np.array(value) for name, value in tiny_params.items()}
        assert gf.grad_check(f, point) < 1e-4


class TestCheckpoint:
    """Test cases for save_checkpoint and load_checkpoint"""

    @pytest.fixture
    def ckpt(self, tiny_cfg, tiny_params):
        return Checkpoint(
            config=tiny_cfg,
            params=tiny_params,
            normalizer=Normalizer(np.array([1.0, 2.0]), np.array([0.5, 3.0])),
            metadata={"model_id": "source@s", "seed": 3, "epochs_run": 4, "source_domain": "s"},
        )

    def test_round_trip_is_bit_exact(self, tmp_path, ckpt):
        path = str(tmp_path / "model.tsft")
        tsformer.save_checkpoint(ckpt, path)
        loaded = tsformer.load_checkpoint(path)

        assert loaded.config == ckpt.config
        assert loaded.metadata == ckpt.metadata
        assert loaded.params.names == ckpt.params.names
        for name, value in ckpt.params.items():
            assert loaded.params[name].tobytes() == value.tobytes()
        np.testing.assert_array_equal(loaded.normalizer.std, ckpt.normalizer.std)

    def test_save_load_save_byte_identical(self, tmp_path, ckpt):
        first, second = str(tmp_path / "a.tsft"), str(tmp_path / "b.tsft")
        tsformer.save_checkpoint(ckpt, first)
        tsformer.save_checkpoint(tsformer.load_checkpoint(first), second)
        with open(first, "rb") as a, open(second, "rb") as b:
            assert a.read() == b.read()

    def test_field_fidelity(self, tmp_path):
        cfg = ModelConfig(n_features=1, m=8, h=4, d_model=64)
        ckpt = Checkpoint(cfg, tsformer.init_params(cfg, 0), Normalizer.identity(1))
        path = str(tmp_path / "wide.tsft")
        tsformer.save_checkpoint(ckpt, path)
        assert tsformer.load_checkpoint(path).config.d_model == 64

    def test_flipped_checksum_byte(self, ckpt):
        blob = bytearray(tsformer.checkpoint_bytes(ckpt))
        blob[-1] ^= 0xFF
        with pytest.raises(CorruptFile):
            tsformer.parse_checkpoint(bytes(blob))

    def test_corrupted_payload(self, ckpt):
        blob = bytearray(tsformer.checkpoint_bytes(ckpt))
        blob[-12] ^= 0x01
        with pytest.raises(CorruptFile):
            tsformer.parse_checkpoint(bytes(blob))

    def test_truncated_file(self, ckpt):
        with pytest.raises(CorruptFile):
            tsformer.parse_checkpoint(tsformer.checkpoint_bytes(ckpt)[:-40])

    def test_bad_magic(self, ckpt):
        with pytest.raises(CorruptFile):
            tsformer.parse_checkpoint(b"NOPE" + tsformer.checkpoint_bytes(ckpt)[4:])

    def test_version_mismatch(self, ckpt):
        blob = tsformer.checkpoint_bytes(ckpt)
        patched = blob[:4] + struct.pack("<I", tsformer.FORMAT_VERSION + 1) + blob[8:]
        with pytest.raises(VersionMismatch):
            tsformer.parse_checkpoint(patched)

    def test_unknown_config_field(self, ckpt):
        blob = tsformer.checkpoint_bytes(ckpt)
        head = len(tsformer.MAGIC) + 4 + 8
        (manifest_len,) = struct.unpack_from("<Q", blob, len(tsformer.MAGIC) + 4)
        body = json.loads(blob[head:head + manifest_len].decode("utf-8"))
        body["config"]["width"] = 3
        manifest = json.dumps(body).encode("utf-8")
        patched = (blob[:len(tsformer.MAGIC) + 4] + struct.pack("<Q", len(manifest))
                   + manifest + blob[head + manifest_len:])
        with pytest.raises(CorruptFile):
            tsformer.parse_checkpoint(patched)

    def test_unwritable_path(self, tmp_path, ckpt):
        with pytest.raises(CheckpointIOError):
            tsformer.save_checkpoint(ckpt, str(tmp_path / "missing" / "model.tsft"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointIOError):
            tsformer.load_checkpoint(str(tmp_path / "absent.tsft"))
