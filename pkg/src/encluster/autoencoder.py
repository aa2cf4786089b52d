"""Symmetric fully-connected autoencoder trained by per-sample SGD.

The default topology is 200-100-50-25-50-100-200: a four-layer encoder
(input, two hidden, code) mirrored by the decoder.  Every transition is an
affine map followed by the configured elementwise activation (identity for
"affine"), output layer included.

Parameters are initialized i.i.d. uniform from a seeded generator, either
on [-1, 1] (``init_scale="full"``, the default) or on the fan-in-scaled
interval [-1/sqrt(n_in), 1/sqrt(n_in)] (``init_scale="fan_in"``).  The full
interval saturates tanh layers badly enough at these widths that SGD at
lr 0.01 either stalls or diverges, so the training pipeline uses the
fan-in scale; both variants keep every entry inside [-1, 1].

The training loop is single-threaded and deterministic: the same seed and
config reproduce the trained network bit for bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DivergedError, ShapeError, ValidationError

DEFAULT_LAYER_DIMS = (200, 100, 50, 25, 50, 100, 200)

_ACTIVATIONS = {
    "affine": (lambda z: z, lambda z: np.ones_like(z)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0.0).astype(np.float64)),
}


def validate_layer_dims(layer_dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 3 or len(dims) % 2 == 0:
        raise ValidationError(f"layer_dims: need an odd number (>= 3) of layer "
                              f"widths, got {dims}")
    if any(d < 1 for d in dims):
        raise ValidationError(f"layer_dims: widths must be positive, got {dims}")
    if dims != dims[::-1]:
        raise ValidationError(f"layer_dims: must be symmetric about the code "
                              f"layer, got {dims}")
    return dims


@dataclass
class NetworkParams:
    """Weights and biases for every transition, plus the activation name."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "affine"

    @property
    def n_transitions(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def n_encoder(self) -> int:
        return (len(self.layer_dims) - 1) // 2

    @property
    def code_width(self) -> int:
        return self.layer_dims[self.n_encoder]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.layer_dims, [w.copy() for w in self.weights],
                             [b.copy() for b in self.biases], self.activation)


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 500
    seed: int = 0
    shuffle: bool = True
    stop_tolerance: float = 1e-5

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.stop_tolerance < 0:
            raise ValidationError("stop_tolerance must be >= 0")


def init_params(layer_dims: Sequence[int] = DEFAULT_LAYER_DIMS, seed: int = 0,
                activation: str = "affine", init_scale: str = "full"
                ) -> NetworkParams:
    """Fresh parameters, every weight and bias uniform from the seed.

    ``init_scale="full"`` draws on [-1, 1]; ``"fan_in"`` shrinks each
    transition's interval by 1/sqrt(n_in), which keeps deep tanh stacks out
    of saturation and SGD stable.
    """
    dims = validate_layer_dims(layer_dims)
    if activation not in _ACTIVATIONS:
        raise ValidationError(f"activation: unknown activation {activation!r}")
    if init_scale not in ("full", "fan_in"):
        raise ValidationError(f"init_scale: must be 'full' or 'fan_in', "
                              f"got {init_scale!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 if init_scale == "full" else 1.0 / np.sqrt(d_in)
        weights.append(rng.uniform(-bound, bound, size=(d_out, d_in)))
        biases.append(rng.uniform(-bound, bound, size=d_out))
    return NetworkParams(dims, weights, biases, activation)


def _as_vector(x, width: int, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (width,):
        raise ShapeError(f"{what}: expected shape ({width},), got {arr.shape}")
    return arr


def _forward(params: NetworkParams, x: np.ndarray):
    """All layer representations and pre-activations for backprop."""
    act, _ = _ACTIVATIONS[params.activation]
    h = [x]
    zs = []
    for w, b in zip(params.weights, params.biases):
        z = w @ h[-1] + b
        zs.append(z)
        h.append(act(z))
    return h, zs


def encode(params: NetworkParams, x) -> np.ndarray:
    """Run the encoder half; returns the code-layer representation."""
    act, _ = _ACTIVATIONS[params.activation]
    h = _as_vector(x, params.layer_dims[0], "encode input")
    for i in range(params.n_encoder):
        h = act(params.weights[i] @ h + params.biases[i])
    return h


def decode(params: NetworkParams, code) -> np.ndarray:
    """Run the decoder half; returns the reconstruction."""
    act, _ = _ACTIVATIONS[params.activation]
    h = _as_vector(code, params.code_width, "decode input")
    for i in range(params.n_encoder, params.n_transitions):
        h = act(params.weights[i] @ h + params.biases[i])
    return h


def encode_batch(params: NetworkParams, X) -> np.ndarray:
    """Encode a whole (n, input_dim) matrix; rows are independent samples."""
    act, _ = _ACTIVATIONS[params.activation]
    H = np.asarray(X, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != params.layer_dims[0]:
        raise ShapeError(f"encode input: expected (n, {params.layer_dims[0]}), "
                         f"got {H.shape}")
    for i in range(params.n_encoder):
        H = act(H @ params.weights[i].T + params.biases[i])
    return H


def reconstruct(params: NetworkParams, x) -> np.ndarray:
    return decode(params, encode(params, x))


def reconstruction_error(x, x_hat) -> float:
    """Sum of squared residuals between an input and its reconstruction."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeError(f"reconstruction_error: shapes differ {x.shape} vs {x_hat.shape}")
    d = x - x_hat
    return float(d @ d)


def gradient(params: NetworkParams, x) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact gradient of the reconstruction error w.r.t. every weight and bias."""
    x = _as_vector(x, params.layer_dims[0], "gradient input")
    _, dact = _ACTIVATIONS[params.activation]
    h, zs = _forward(params, x)
    n = params.n_transitions
    grad_w: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    delta = 2.0 * (h[-1] - x) * dact(zs[-1])
    for i in range(n - 1, -1, -1):
        grad_w[i] = np.outer(delta, h[i])
        grad_b[i] = delta
        if i > 0:
            delta = (params.weights[i].T @ delta) * dact(zs[i - 1])
    return grad_w, grad_b


def train_sgd(params: NetworkParams, dataset, cfg: TrainConfig | None = None
              ) -> tuple[NetworkParams, list[float]]:
    """Plain per-sample SGD on the summed-squares reconstruction cost.

    Visits the dataset in a seeded shuffled order each epoch (batch size 1),
    records the epoch mean of the per-sample cost (measured before each
    update), and stops early once consecutive epoch means differ by less
    than ``stop_tolerance``.  Raises :class:`DivergedError` if the loss goes
    non-finite.  Returns the trained copy and the loss curve.
    """
    cfg = cfg or TrainConfig()
    cfg.validate()
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValidationError("dataset must be a non-empty (n, input_dim) matrix")
    if data.shape[1] != params.layer_dims[0]:
        raise ShapeError(f"dataset width {data.shape[1]} does not match input "
                         f"layer {params.layer_dims[0]}")

    p = params.copy()
    _, dact = _ACTIVATIONS[p.activation]
    last = p.n_transitions - 1
    rng = np.random.default_rng(cfg.seed)
    lr = cfg.learning_rate
    curve: list[float] = []
    n = data.shape[0]

    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for j in order:
                x = data[j]
                h, zs = _forward(p, x)
                resid = h[-1] - x
                sample_loss = float(resid @ resid)
                if not np.isfinite(sample_loss):
                    raise DivergedError(f"training diverged at epoch {epoch + 1}: "
                                        f"non-finite sample loss", epoch=epoch + 1)
                total += sample_loss
                delta = 2.0 * resid * dact(zs[-1])
                for i in range(last, -1, -1):
                    if i > 0:
                        back = (p.weights[i].T @ delta) * dact(zs[i - 1])
                    else:
                        back = None
                    p.weights[i] -= lr * np.outer(delta, h[i])
                    p.biases[i] -= lr * delta
                    delta = back
        mean = total / n
        if not np.isfinite(mean):
            raise DivergedError(f"training diverged at epoch {epoch + 1}: "
                                f"mean loss {mean}", epoch=epoch + 1)
        curve.append(mean)
        if epoch > 0 and abs(curve[-2] - mean) < cfg.stop_tolerance:
            break
    return p, curve


# ---------------------------------------------------------------------------
# checkpoint format

_MAGIC = b"ENCAE1\x00\x00"


def save_checkpoint(params: NetworkParams, path) -> None:
    """Binary checkpoint: header (magic+version, activation, layer dims)
    followed by all weight matrices (row-major) then all bias vectors, as
    little-endian float64."""
    act = params.activation.encode("ascii")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HB", 1, len(act)))
        fh.write(act)
        fh.write(struct.pack("<I", len(params.layer_dims)))
        fh.write(struct.pack(f"<{len(params.layer_dims)}I", *params.layer_dims))
        for w in params.weights:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        for b in params.biases:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path) -> NetworkParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _MAGIC:
        raise ShapeError("not an autoencoder checkpoint (bad magic)")
    off = 8
    version, act_len = struct.unpack_from("<HB", blob, off)
    off += 3
    if version != 1:
        raise ShapeError(f"unsupported checkpoint version {version}")
    activation = blob[off:off + act_len].decode("ascii")
    off += act_len
    (n_dims,) = struct.unpack_from("<I", blob, off)
    off += 4
    dims = struct.unpack_from(f"<{n_dims}I", blob, off)
    off += 4 * n_dims
    dims = validate_layer_dims(dims)
    if activation not in _ACTIVATIONS:
        raise ShapeError(f"checkpoint has unknown activation {activation!r}")

    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        count = d_in * d_out
        w = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
        off += 8 * count
        weights.append(w.reshape(d_out, d_in).astype(np.float64))
    for d_out in dims[1:]:
        b = np.frombuffer(blob, dtype="<f8", count=d_out, offset=off)
        off += 8 * d_out
        biases.append(b.astype(np.float64))
    if off != len(blob):
        raise ShapeError("checkpoint has trailing bytes")
    return NetworkParams(dims, weights, biases, activation)


def export_params_text(params: NetworkParams, path) -> None:
    """Text dump (one value per line with section markers) for diffing."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# activation {params.activation}\n")
        fh.write(f"# layer_dims {' '.join(str(d) for d in params.layer_dims)}\n")
        for i, w in enumerate(params.weights):
            fh.write(f"# W {i + 1}->{i + 2} shape {w.shape[0]}x{w.shape[1]}\n")
            for v in w.ravel().tolist():
                fh.write(f"{v!r}\n")
        for i, b in enumerate(params.biases):
            fh.write(f"# b {i + 1}->{i + 2} length {b.shape[0]}\n")
            for v in b.tolist():
                fh.write(f"{v!r}\n")
