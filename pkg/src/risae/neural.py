"""Minimal differentiable 1-D CNN engine.

Forward and exact reverse-mode gradients (with respect to parameters and
inputs) for the handful of layer kinds the autoencoder needs: Conv1D with
same padding, batch normalization, ReLU, channel-axis softmax, and the
non-trainable power normalization. All arrays are float64 with shape
(batch, channels, length); complex signals travel as stacked real/imaginary
channel halves.

Forward/backward on distinct activation records are independent; parameter
updates assume a single writer.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateInput, MissingRecord, ShapeMismatch

PROB_CLAMP = 1e-12


def _check_input(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected (batch, channels, length) input, got shape {x.shape}")
    return x


class Conv1D:
    """Cross-correlation along the length axis with zero same-padding.

    Weight shape (out_channels, in_channels, kernel_size); kernel_size must
    be odd so the output length equals the input length.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator | None = None):
        if kernel_size % 2 != 1:
            raise ValueError("kernel_size must be odd for same padding")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        limit = np.sqrt(6.0 / (in_channels * kernel_size + out_channels * kernel_size))
        if rng is None:
            self.weight = np.zeros((out_channels, in_channels, kernel_size))
        else:
            self.weight = rng.uniform(-limit, limit, size=(out_channels, in_channels, kernel_size))
        self.bias = np.zeros(out_channels)

    def spec(self) -> dict:
        return {"kind": "conv", "in_channels": self.in_channels,
                "out_channels": self.out_channels, "kernel_size": self.kernel_size}

    def params(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x: np.ndarray, train: bool):
        x = _check_input(x)
        if x.shape[1] != self.in_channels:
            raise ShapeMismatch(f"conv expects {self.in_channels} channels, got {x.shape[1]}")
        pad = self.kernel_size // 2
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
        cols = sliding_window_view(xp, self.kernel_size, axis=2)  # (B, C, L, K)
        y = np.einsum("bclk,ock->bol", cols, self.weight, optimize=True) + self.bias[None, :, None]
        return y, {"cols": cols, "length": x.shape[2]}

    def backward(self, cache: dict, gy: np.ndarray):
        cols = cache["cols"]
        length = cache["length"]
        pad = self.kernel_size // 2
        g_w = np.einsum("bol,bclk->ock", gy, cols, optimize=True)
        g_b = gy.sum(axis=(0, 2))
        gyp = np.pad(gy, ((0, 0), (0, 0), (self.kernel_size - 1, self.kernel_size - 1)))
        gcols = sliding_window_view(gyp, self.kernel_size, axis=2)  # (B, O, L + K - 1, K)
        gxp = np.einsum("botk,ock->bct", gcols, self.weight[:, :, ::-1], optimize=True)
        gx = gxp[:, :, pad:pad + length]
        return gx, {"weight": g_w, "bias": g_b}


class BatchNorm:
    """Per-channel normalization over the batch and length axes.

    Training mode normalizes with batch statistics and updates the running
    estimates as running = momentum * running + (1 - momentum) * batch;
    inference mode applies the frozen affine map.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.9):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def spec(self) -> dict:
        return {"kind": "batchnorm", "channels": self.channels,
                "eps": self.eps, "momentum": self.momentum}

    def params(self) -> dict[str, np.ndarray]:
        return {"gamma": self.gamma, "beta": self.beta,
                "running_mean": self.running_mean, "running_var": self.running_var}

    def trainable(self) -> tuple[str, ...]:
        return ("gamma", "beta")

    def forward(self, x: np.ndarray, train: bool):
        x = _check_input(x)
        if x.shape[1] != self.channels:
            raise ShapeMismatch(f"batchnorm expects {self.channels} channels, got {x.shape[1]}")
        if train:
            mean = x.mean(axis=(0, 2))
            var = x.var(axis=(0, 2))
            self.running_mean = self.momentum * self.running_mean + (1.0 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1.0 - self.momentum) * var
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None]) * inv_std[None, :, None]
        y = self.gamma[None, :, None] * xhat + self.beta[None, :, None]
        return y, {"xhat": xhat, "inv_std": inv_std, "train": train}

    def backward(self, cache: dict, gy: np.ndarray):
        xhat = cache["xhat"]
        inv_std = cache["inv_std"]
        g_gamma = np.einsum("bcl,bcl->c", gy, xhat)
        g_beta = gy.sum(axis=(0, 2))
        g_xhat = gy * self.gamma[None, :, None]
        if cache["train"]:
            n = xhat.shape[0] * xhat.shape[2]
            gx = (inv_std[None, :, None] / n) * (
                n * g_xhat
                - g_xhat.sum(axis=(0, 2), keepdims=True)
                - xhat * np.einsum("bcl,bcl->c", g_xhat, xhat)[None, :, None]
            )
        else:
            gx = g_xhat * inv_std[None, :, None]
        return gx, {"gamma": g_gamma, "beta": g_beta}


class ReLU:
    def spec(self) -> dict:
        return {"kind": "relu"}

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def forward(self, x: np.ndarray, train: bool):
        x = _check_input(x)
        return np.maximum(x, 0.0), {"mask": x > 0.0}

    def backward(self, cache: dict, gy: np.ndarray):
        return gy * cache["mask"], {}


class Softmax:
    """Softmax over the channel axis; every output column sums to one."""

    def spec(self) -> dict:
        return {"kind": "softmax"}

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def forward(self, x: np.ndarray, train: bool):
        x = _check_input(x)
        z = x - x.max(axis=1, keepdims=True)
        ez = np.exp(z)
        y = ez / ez.sum(axis=1, keepdims=True)
        return y, {"y": y}

    def backward(self, cache: dict, gy: np.ndarray):
        y = cache["y"]
        inner = (gy * y).sum(axis=1, keepdims=True)
        return y * (gy - inner), {}


class PowerNorm:
    """Non-trainable rescaling so each block's mean complex-entry squared
    magnitude equals target_power**2.

    The first half of the channels holds real parts, the second half the
    matching imaginary parts; the mean runs over all complex entries of one
    batch element.
    """

    def __init__(self, target_power: float):
        if target_power <= 0.0:
            raise ValueError("target_power must be > 0")
        self.target_power = target_power

    def spec(self) -> dict:
        return {"kind": "powernorm", "target_power": self.target_power}

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def forward(self, x: np.ndarray, train: bool):
        x = _check_input(x)
        if x.shape[1] % 2 != 0:
            raise ShapeMismatch("powernorm input needs an even channel count (re/im stacking)")
        n_complex = (x.shape[1] // 2) * x.shape[2]
        mean_power = np.einsum("bcl,bcl->b", x, x) / n_complex
        if np.any(mean_power < 1e-30):
            raise DegenerateInput("block power below 1e-30; cannot normalize")
        scale = self.target_power / np.sqrt(mean_power)
        y = x * scale[:, None, None]
        return y, {"x": x, "scale": scale, "mean_power": mean_power, "n_complex": n_complex}

    def backward(self, cache: dict, gy: np.ndarray):
        x = cache["x"]
        scale = cache["scale"]
        n_complex = cache["n_complex"]
        dot = np.einsum("bcl,bcl->b", gy, x)
        gx = gy * scale[:, None, None] - x * (
            scale / (cache["mean_power"] * n_complex) * dot)[:, None, None]
        return gx, {}


_LAYER_KINDS = {"conv": Conv1D, "batchnorm": BatchNorm, "relu": ReLU,
                "softmax": Softmax, "powernorm": PowerNorm}


def layer_from_spec(spec: dict):
    kind = spec["kind"]
    if kind == "conv":
        return Conv1D(spec["in_channels"], spec["out_channels"], spec["kernel_size"])
    if kind == "batchnorm":
        return BatchNorm(spec["channels"], spec["eps"], spec["momentum"])
    if kind == "relu":
        return ReLU()
    if kind == "softmax":
        return Softmax()
    if kind == "powernorm":
        return PowerNorm(spec["target_power"])
    raise ValueError(f"unknown layer kind {kind!r}")


class Network:
    """Ordered layer stack with a recorded forward pass and exact backward."""

    def __init__(self, layers: list):
        self.layers = layers

    def spec(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, value in layer.params().items():
                out[f"layer{i}.{name}"] = value
        return out

    def trainable_params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            names = layer.trainable() if hasattr(layer, "trainable") else tuple(layer.params())
            for name in names:
                out[f"layer{i}.{name}"] = layer.params()[name]
        return out

    def set_param(self, key: str, value: np.ndarray) -> None:
        layer_tag, name = key.split(".", 1)
        layer = self.layers[int(layer_tag.removeprefix("layer"))]
        current = layer.params()[name]
        if current.shape != value.shape:
            raise ShapeMismatch(f"{key}: expected shape {current.shape}, got {value.shape}")
        setattr(layer, name, np.asarray(value, dtype=np.float64).copy())

    def forward(self, x: np.ndarray, train: bool = False):
        record = []
        y = x
        for layer in self.layers:
            y, cache = layer.forward(y, train)
            record.append(cache)
        return y, record

    def backward(self, record, gy: np.ndarray):
        """Gradients of the recorded forward pass.

        Returns (param gradients keyed like params(), input gradient).
        """
        if record is None:
            raise MissingRecord("forward() was not run with recording")
        if len(record) != len(self.layers):
            raise MissingRecord("activation record does not match the layer stack")
        grads: dict[str, np.ndarray] = {}
        g = gy
        for i in reversed(range(len(self.layers))):
            g, layer_grads = self.layers[i].backward(record[i], g)
            for name, value in layer_grads.items():
                grads[f"layer{i}.{name}"] = value
        return grads, g


def conv_stack(channel_sizes: list[int], kernel_size: int, rng: np.random.Generator,
               bn_eps: float = 1e-5, bn_momentum: float = 0.9,
               final: str | None = None, target_power: float = 1.0) -> Network:
    """Conv1D stack with BatchNorm + ReLU after every hidden convolution.

    channel_sizes runs [in, hidden..., out]; the last convolution is left
    linear unless final='softmax' or final='powernorm'.
    """
    layers: list = []
    n = len(channel_sizes) - 1
    for i in range(n):
        layers.append(Conv1D(channel_sizes[i], channel_sizes[i + 1], kernel_size, rng))
        if i < n - 1:
            layers.append(BatchNorm(channel_sizes[i + 1], bn_eps, bn_momentum))
            layers.append(ReLU())
    if final == "softmax":
        layers.append(Softmax())
    elif final == "powernorm":
        layers.append(PowerNorm(target_power))
    elif final is not None:
        raise ValueError(f"unknown final layer {final!r}")
    return Network(layers)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def bce_loss(probs: np.ndarray, target: np.ndarray):
    """Element-wise binary cross entropy against a one-hot target.

    Returns the mean over all entries and its exact gradient with respect to
    probs; probabilities are clamped to [1e-12, 1 - 1e-12] before the logs.
    """
    probs = np.asarray(probs, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if probs.shape != target.shape:
        raise ShapeMismatch(f"probs shape {probs.shape} != target shape {target.shape}")
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    count = p.size
    value = float(-(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)).sum() / count)
    grad = -(target / p - (1.0 - target) / (1.0 - p)) / count
    return value, grad


def bce_loss_per_sample(probs: np.ndarray, target: np.ndarray):
    """Per-sample BCE over a batch: loss vector plus per-sample-mean gradients."""
    probs = np.asarray(probs, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if probs.shape != target.shape:
        raise ShapeMismatch(f"probs shape {probs.shape} != target shape {target.shape}")
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    count = p.shape[1] * p.shape[2]
    values = -(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)).sum(axis=(1, 2)) / count
    grad = -(target / p - (1.0 - target) / (1.0 - p)) / count
    return values, grad


def cross_entropy_loss(probs: np.ndarray, target: np.ndarray):
    """Categorical cross entropy per column, available for comparison runs."""
    probs = np.asarray(probs, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if probs.shape != target.shape:
        raise ShapeMismatch(f"probs shape {probs.shape} != target shape {target.shape}")
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    columns = probs.shape[0] * probs.shape[2]
    value = float(-(target * np.log(p)).sum() / columns)
    grad = -(target / p) / columns
    return value, grad


LOSSES = {"bce": bce_loss, "ce": cross_entropy_loss}


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """First/second moment estimates and step counter for one parameter set."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """Standard Adam update with bias correction; updates params in place."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for key, g in grads.items():
        p = params[key]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{key}: grad shape {g.shape} != param shape {p.shape}")
        m = state.m.setdefault(key, np.zeros_like(p))
        v = state.v.setdefault(key, np.zeros_like(p))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"RISAECK1"
_CKPT_VERSION = 1


def save_checkpoint(path, networks: dict[str, Network], meta: dict | None = None) -> None:
    """Versioned binary checkpoint: JSON header then flat little-endian doubles.

    Arrays appear in network order, layer order, then sorted parameter name.
    """
    manifest = []
    blobs = []
    specs = {}
    for net_name in sorted(networks):
        net = networks[net_name]
        specs[net_name] = net.spec()
        for key in sorted(net.params()):
            arr = np.ascontiguousarray(net.params()[key], dtype="<f8")
            manifest.append({"net": net_name, "param": key, "shape": list(arr.shape)})
            blobs.append(arr.tobytes())
    header = json.dumps({"version": _CKPT_VERSION, "specs": specs,
                         "arrays": manifest, "meta": meta or {}},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<II", _CKPT_VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> tuple[dict[str, Network], dict]:
    """Rebuild networks (architecture and parameters) from a checkpoint."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _CKPT_MAGIC:
            raise ValueError("not a checkpoint file")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != _CKPT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        networks = {name: Network([layer_from_spec(s) for s in spec])
                    for name, spec in header["specs"].items()}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            n_items = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(fh.read(n_items * 8), dtype="<f8").reshape(shape)
            networks[entry["net"]].set_param(entry["param"], arr)
    return networks, header["meta"]
