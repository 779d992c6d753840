"""
Time-series Transformer
Linear input embedding plus sinusoidal positional encoding, a stack of encoder
blocks (multi-head self-attention and feed-forward, each followed by a residual
add and layer norm), and a linear decoder reading the final position.
Also owns parameter grouping and the checkpoint file format.
"""
import json
import logging
import math
import struct
import zlib
from typing import Any, Dict, List, Optional

import numpy as np

import gradflow as gf
from errors import (
    CheckpointIOError,
    ConfigInvalid,
    CorruptFile,
    OddDimension,
    ShapeMismatch,
    VersionMismatch,
)
from models import (
    Checkpoint,
    ModelConfig,
    ModelParameters,
    Normalizer,
    group_of,
)

logger = logging.getLogger(__name__)

MAGIC = b"TSFT"
FORMAT_VERSION = 1
PREDICT_CHUNK = 256


def positional_encoding(m: int, d_model: int) -> np.ndarray:
    """PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(pos / 10000^(2i/d))"""
    if d_model % 2:
        raise OddDimension(f"d_model must be even, got {d_model}")
    pos = np.arange(m, dtype=np.float64)[:, None]
    even = np.arange(0, d_model, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, even / d_model)
    pe = np.empty((m, d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe


def encoder_prefix(layer: int) -> str:
    return f"encoder.{layer}"


def parameter_shapes(cfg: ModelConfig) -> Dict[str, tuple]:
    """Parameter names and shapes in input-to-output storage order"""
    d, f = cfg.d_model, cfg.d_ff
    shapes = {
        "embedding.W": (cfg.n_features, d),
        "embedding.b": (d,),
    }
    for layer in range(1, cfg.n_layers + 1):
        p = encoder_prefix(layer)
        shapes.update({
            f"{p}.attn.Wq": (d, d),
            f"{p}.attn.Wk": (d, d),
            f"{p}.attn.Wv": (d, d),
            f"{p}.attn.Wo": (d, d),
            f"{p}.attn.bo": (d,),
            f"{p}.ln1.gamma": (d,),
            f"{p}.ln1.beta": (d,),
            f"{p}.ffn.W1": (d, f),
            f"{p}.ffn.b1": (f,),
            f"{p}.ffn.W2": (f, d),
            f"{p}.ffn.b2": (d,),
            f"{p}.ln2.gamma": (d,),
            f"{p}.ln2.beta": (d,),
        })
    shapes["decoder.W"] = (d, cfg.h)
    shapes["decoder.b"] = (cfg.h,)
    return shapes


def _fan_in(name: str, shapes: Dict[str, tuple]) -> int:
    shape = shapes[name]
    if len(shape) == 2:
        return shape[0]
    weight = {"b": "W", "bo": "Wo", "b1": "W1", "b2": "W2"}[name.rsplit(".", 1)[1]]
    return shapes[name.rsplit(".", 1)[0] + "." + weight][0]


def init_params(cfg: ModelConfig, seed: int) -> ModelParameters:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; layer norms start at gamma=1, beta=0"""
    rng = np.random.default_rng(seed)
    shapes = parameter_shapes(cfg)
    values = {}
    for name, shape in shapes.items():
        if name.endswith(".gamma"):
            values[name] = np.ones(shape)
        elif name.endswith(".beta"):
            values[name] = np.zeros(shape)
        else:
            bound = 1.0 / math.sqrt(_fan_in(name, shapes))
            values[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParameters(values)


def parameter_groups(params: ModelParameters) -> List[str]:
    """Group names output-to-input: decoder, encoder.n ... encoder.1, embedding"""
    return list(reversed(params.groups()))


def _attention(h: gf.Node, nodes: Dict[str, gf.Node], prefix: str, cfg: ModelConfig) -> gf.Node:
    q = gf.matmul(h, nodes[f"{prefix}.attn.Wq"])
    k = gf.matmul(h, nodes[f"{prefix}.attn.Wk"])
    v = gf.matmul(h, nodes[f"{prefix}.attn.Wv"])
    dh = cfg.d_head
    heads = []
    for head in range(cfg.n_heads):
        lo, hi = head * dh, (head + 1) * dh
        qh, kh, vh = (gf.slice_axis(x, -1, lo, hi) for x in (q, k, v))
        scores = gf.scale(gf.matmul(qh, gf.transpose_last(kh)), 1.0 / math.sqrt(dh))
        heads.append(gf.matmul(gf.softmax_lastdim(scores), vh))
    merged = gf.concat(heads, axis=-1) if len(heads) > 1 else heads[0]
    return gf.add(gf.matmul(merged, nodes[f"{prefix}.attn.Wo"]), nodes[f"{prefix}.attn.bo"])


def forward_nodes(tape: gf.Tape, nodes: Dict[str, gf.Node], cfg: ModelConfig,
                  windows: np.ndarray, use_pe: bool = True) -> gf.Node:
    """
    Record the forward pass on a tape
    Args:
        tape: tape to record on
        nodes: parameter nodes by name (params or consts)
        cfg: model shape
        windows: (B, m, F) batch of normalized lookback windows
        use_pe: add the positional encoding
    Returns:
        (B, h) prediction node
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3 or windows.shape[1:] != (cfg.m, cfg.n_features):
        raise ShapeMismatch(f"Expected windows (B, {cfg.m}, {cfg.n_features}), got {windows.shape}")
    batch = windows.shape[0]

    h = gf.add(gf.matmul(tape.const(windows), nodes["embedding.W"]), nodes["embedding.b"])
    if use_pe:
        h = gf.add(h, tape.const(positional_encoding(cfg.m, cfg.d_model), name="pe"))

    for layer in range(1, cfg.n_layers + 1):
        p = encoder_prefix(layer)
        h = gf.layer_norm(gf.add(h, _attention(h, nodes, p, cfg)),
                          nodes[f"{p}.ln1.gamma"], nodes[f"{p}.ln1.beta"], cfg.eps)
        hidden = gf.relu(gf.add(gf.matmul(h, nodes[f"{p}.ffn.W1"]), nodes[f"{p}.ffn.b1"]))
        ff = gf.add(gf.matmul(hidden, nodes[f"{p}.ffn.W2"]), nodes[f"{p}.ffn.b2"])
        h = gf.layer_norm(gf.add(h, ff), nodes[f"{p}.ln2.gamma"], nodes[f"{p}.ln2.beta"], cfg.eps)

    last = gf.slice_axis(h, -2, cfg.m - 1, cfg.m)
    out = gf.add(gf.matmul(last, nodes["decoder.W"]), nodes["decoder.b"])
    return gf.reshape(out, (batch, cfg.h))


def bind(tape: gf.Tape, params: ModelParameters, trainable: Optional[set] = None) -> Dict[str, gf.Node]:
    """Put parameters on a tape; names outside `trainable` become constants"""
    nodes = {}
    for name, value in params.items():
        if trainable is None or name in trainable:
            nodes[name] = tape.param(name, value)
        else:
            nodes[name] = tape.const(value, name=name)
    return nodes


def forward(params: ModelParameters, cfg: ModelConfig, window: np.ndarray) -> np.ndarray:
    """Predict the h-step horizon for one (m, F) window"""
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (cfg.m, cfg.n_features):
        raise ShapeMismatch(f"Expected window ({cfg.m}, {cfg.n_features}), got {window.shape}")
    return predict(params, cfg, window[None])[0]


def predict(params: ModelParameters, cfg: ModelConfig, windows: np.ndarray) -> np.ndarray:
    """Batched inference over (N, m, F) windows"""
    outputs = []
    for start in range(0, len(windows), PREDICT_CHUNK):
        tape = gf.Tape()
        nodes = bind(tape, params, trainable=set())
        outputs.append(forward_nodes(tape, nodes, cfg, windows[start:start + PREDICT_CHUNK]).value)
    if not outputs:
        return np.zeros((0, cfg.h))
    return np.concatenate(outputs)


# Checkpoint file: MAGIC | u32 version | u64 manifest length | manifest JSON |
# little-endian float64 payload in manifest order | u32 CRC-32 of payload

def _manifest(ckpt: Checkpoint) -> bytes:
    body = {
        "config": ckpt.config.to_dict(),
        "parameters": [
            {"name": name, "shape": list(value.shape), "group": group_of(name)}
            for name, value in ckpt.params.items()
        ],
        "normalizer": ckpt.normalizer.to_dict(),
        "metadata": ckpt.metadata,
    }
    return json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    manifest = _manifest(ckpt)
    payload = b"".join(
        np.ascontiguousarray(value, dtype="<f8").tobytes() for _, value in ckpt.params.items()
    )
    return b"".join([
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<Q", len(manifest)),
        manifest,
        payload,
        struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF),
    ])


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    try:
        with open(path, "wb") as f:
            f.write(checkpoint_bytes(ckpt))
    except OSError as e:
        raise CheckpointIOError(f"Cannot write checkpoint {path}: {e}") from e
    logger.info(f"Saved checkpoint {path}")


def parse_checkpoint(blob: bytes) -> Checkpoint:
    head = len(MAGIC) + 4 + 8
    if len(blob) < head + 4 or blob[:len(MAGIC)] != MAGIC:
        raise CorruptFile("Not a TSFT checkpoint")
    (version,) = struct.unpack_from("<I", blob, len(MAGIC))
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"Checkpoint format {version}, expected {FORMAT_VERSION}")
    (manifest_len,) = struct.unpack_from("<Q", blob, len(MAGIC) + 4)
    if head + manifest_len + 4 > len(blob):
        raise CorruptFile("Manifest runs past the end of the file")
    try:
        body: Dict[str, Any] = json.loads(blob[head:head + manifest_len].decode("utf-8"))
        config = ModelConfig.from_dict(body["config"])
        normalizer = Normalizer.from_dict(body["normalizer"])
        entries = body["parameters"]
    except (ConfigInvalid, ValueError, KeyError, TypeError) as e:
        raise CorruptFile(f"Unreadable manifest: {e}") from e

    payload = blob[head + manifest_len:-4]
    expected = sum(int(np.prod(entry["shape"], dtype=np.int64)) for entry in entries) * 8
    if len(payload) != expected:
        raise CorruptFile(f"Payload holds {len(payload)} bytes, manifest needs {expected}")
    (crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise CorruptFile("Payload checksum mismatch")

    values, offset = {}, 0
    for entry in entries:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        values[entry["name"]] = np.frombuffer(payload, dtype="<f8", count=count,
                                              offset=offset).astype(np.float64).reshape(shape)
        offset += count * 8
    return Checkpoint(
        config=config,
        params=ModelParameters(values),
        normalizer=normalizer,
        metadata=body.get("metadata", {}),
        version=version,
    )


def load_checkpoint(path: str) -> Checkpoint:
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise CheckpointIOError(f"Cannot read checkpoint {path}: {e}") from e
    return parse_checkpoint(blob)
