"""Fully-connected autoencoder trained with plain minibatch gradient descent.

Rows are samples, so a layer computes ``act(X @ W + b)`` with ``W`` of shape
``(fan_in, fan_out)``. Everything runs in float64; parameters are written to
disk as float32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .artifacts import dump_json, load_json, read_f32, write_f32
from .errors import TrainingDiverged

PAPER_RATIOS = (Fraction(1, 2), Fraction(1, 3), Fraction(1, 4))

ACTIVATIONS = {
    "relu": (lambda a: np.maximum(a, 0.0), lambda a, h: (a > 0).astype(a.dtype)),
    "sigmoid": (lambda a: 1.0 / (1.0 + np.exp(-a)), lambda a, h: h * (1.0 - h)),
    "identity": (lambda a: a, lambda a, h: np.ones_like(a)),
}


def as_ratio(value) -> Fraction:
    r = Fraction(value).limit_denominator(1000) if isinstance(value, float) else Fraction(value)
    if not 0 < r < 1:
        raise ValueError(f"compression ratio must lie in (0, 1), got {value}")
    return r


def latent_size(d: int, ratio) -> int:
    return math.floor(d * as_ratio(ratio))


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    @property
    def shape(self) -> tuple[int, int]:
        return self.weight.shape

    def copy(self) -> "Layer":
        return Layer(self.weight.copy(), self.bias.copy(), self.activation)


@dataclass
class AutoencoderParams:
    input_dim: int
    latent_dim: int
    encoder_layers: list[Layer]
    decoder_layers: list[Layer]
    seed: int = 0
    ratio: Optional[Fraction] = None
    input_mean: Optional[np.ndarray] = None
    input_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        self.validate()

    @property
    def layers(self) -> list[Layer]:
        return self.encoder_layers + self.decoder_layers

    def validate(self) -> None:
        if not self.encoder_layers or not self.decoder_layers:
            raise ValueError("encoder and decoder need at least one layer each")
        dims = [self.input_dim]
        for layer in self.encoder_layers:
            if layer.weight.shape[0] != dims[-1] or layer.bias.shape != (layer.weight.shape[1],):
                raise ValueError("encoder layer shapes do not chain")
            dims.append(layer.weight.shape[1])
        if dims[-1] != self.latent_dim:
            raise ValueError("encoder does not end at latent_dim")
        for layer in self.decoder_layers:
            if layer.weight.shape[0] != dims[-1] or layer.bias.shape != (layer.weight.shape[1],):
                raise ValueError("decoder layer shapes do not chain")
            dims.append(layer.weight.shape[1])
        if dims[-1] != self.input_dim:
            raise ValueError("decoder does not end at input_dim")
        for layer in self.layers:
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {layer.activation!r}")
            if not (np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))):
                raise ValueError("non-finite autoencoder parameter")

    def copy(self) -> "AutoencoderParams":
        return AutoencoderParams(
            self.input_dim, self.latent_dim,
            [l.copy() for l in self.encoder_layers], [l.copy() for l in self.decoder_layers],
            self.seed, self.ratio,
            None if self.input_mean is None else self.input_mean.copy(),
            None if self.input_scale is None else self.input_scale.copy(),
        )

    def save(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        meta = {
            "input_dim": self.input_dim,
            "latent_dim": self.latent_dim,
            "ratio": str(self.ratio) if self.ratio is not None else None,
            "seed": self.seed,
            "dtype": "f32",
            "endianness": "little",
            "layers": [],
        }
        for role, layers in (("encoder", self.encoder_layers), ("decoder", self.decoder_layers)):
            for i, layer in enumerate(layers):
                stem = f"{role}_{i}"
                write_f32(layer.weight, directory / f"{stem}.weight.bin")
                write_f32(layer.bias, directory / f"{stem}.bias.bin")
                meta["layers"].append({
                    "role": role, "index": i, "shape": list(layer.shape),
                    "activation": layer.activation,
                    "weight": f"{stem}.weight.bin", "bias": f"{stem}.bias.bin",
                })
        if self.input_mean is not None:
            write_f32(self.input_mean, directory / "input_mean.bin")
            write_f32(self.input_scale, directory / "input_scale.bin")
            meta["standardization"] = {"mean": "input_mean.bin", "scale": "input_scale.bin"}
        dump_json(meta, directory / "params.json")
        return directory / "params.json"

    @classmethod
    def load(cls, directory) -> "AutoencoderParams":
        directory = Path(directory)
        meta = load_json(directory / "params.json")
        enc, dec = [], []
        for spec in meta["layers"]:
            fan_in, fan_out = spec["shape"]
            layer = Layer(
                read_f32(directory / spec["weight"], (fan_in, fan_out)).astype(np.float64),
                read_f32(directory / spec["bias"], (fan_out,)).astype(np.float64),
                spec["activation"],
            )
            (enc if spec["role"] == "encoder" else dec).append(layer)
        mean = scale = None
        if "standardization" in meta:
            d = meta["input_dim"]
            mean = read_f32(directory / meta["standardization"]["mean"], (d,)).astype(np.float64)
            scale = read_f32(directory / meta["standardization"]["scale"], (d,)).astype(np.float64)
        ratio = Fraction(meta["ratio"]) if meta.get("ratio") else None
        return cls(meta["input_dim"], meta["latent_dim"], enc, dec, meta["seed"], ratio, mean, scale)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_autoencoder(d: int, ratio, seed: int = 0) -> AutoencoderParams:
    """Two layers each side: d -> mid -> k and k -> mid -> d, mid = ceil((d+k)/2)."""
    ratio = as_ratio(ratio)
    k = latent_size(d, ratio)
    if k < 1:
        raise ValueError(f"ratio {ratio} leaves no latent units for d={d}")
    mid = math.ceil((d + k) / 2)
    rng = np.random.default_rng(seed)
    shapes = [(d, mid), (mid, k), (k, mid), (mid, d)]
    acts = ["relu", "identity", "relu", "identity"]
    layers = [Layer(_glorot(rng, a, b), np.zeros(b), act) for (a, b), act in zip(shapes, acts)]
    return AutoencoderParams(d, k, layers[:2], layers[2:], seed, ratio)


def _check_input(X: np.ndarray, width: int, what: str) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != width:
        raise ValueError(f"{what}: expected n x {width} matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{what}: input contains non-finite values")
    return X


def _forward(layers: Sequence[Layer], X: np.ndarray):
    """Run ``layers``; return output plus the (input, preact, output) cache per layer."""
    cache = []
    H = X
    for layer in layers:
        A = H @ layer.weight + layer.bias
        out = ACTIVATIONS[layer.activation][0](A)
        cache.append((H, A, out))
        H = out
    return H, cache


def _standardize(m: AutoencoderParams, E: np.ndarray) -> np.ndarray:
    if m.input_mean is None:
        return E
    return (E - m.input_mean) / m.input_scale


def encode(m: AutoencoderParams, E) -> np.ndarray:
    E = _check_input(E, m.input_dim, "encode")
    Z, _ = _forward(m.encoder_layers, _standardize(m, E))
    return Z


def decode(m: AutoencoderParams, Z) -> np.ndarray:
    """Reconstruct in the space the autoencoder was trained on (standardized if enabled)."""
    Z = _check_input(Z, m.latent_dim, "decode")
    out, _ = _forward(m.decoder_layers, Z)
    return out


def mse_loss(E, E_hat) -> float:
    E = np.asarray(E, dtype=np.float64)
    E_hat = np.asarray(E_hat, dtype=np.float64)
    if E.shape != E_hat.shape:
        raise ValueError(f"shape mismatch: {E.shape} vs {E_hat.shape}")
    if E.size == 0:
        raise ValueError("empty input")
    diff = E - E_hat
    return float(np.mean(diff * diff))


def loss_and_gradients(m: AutoencoderParams, E: np.ndarray):
    """MSE reconstruction loss and its gradient for every layer of ``m``.

    Gradients are returned as ``[(dW, db), ...]`` in ``m.layers`` order.
    ``E`` is taken as already standardized.
    """
    out, cache = _forward(m.layers, E)
    diff = out - E
    loss = float(np.mean(diff * diff))
    grad_out = 2.0 * diff / diff.size
    grads = []
    for layer, (H_in, A, H_out) in zip(reversed(m.layers), reversed(cache)):
        dA = grad_out * ACTIVATIONS[layer.activation][1](A, H_out)
        grads.append((H_in.T @ dA, dA.sum(axis=0)))
        grad_out = dA @ layer.weight.T
    grads.reverse()
    return loss, grads


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 0.05
    val_fraction: float = 0.2
    seed: int = 0
    ratios: tuple = PAPER_RATIOS
    standardize: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("batch_size and learning_rate must be positive")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        ratios = tuple(as_ratio(r) for r in self.ratios)
        if not ratios or any(r not in PAPER_RATIOS for r in ratios):
            raise ValueError("ratios must be a non-empty subset of {1/2, 1/3, 1/4}")
        object.__setattr__(self, "ratios", ratios)


@dataclass
class TrainingReport:
    curves: dict = field(default_factory=dict)  # "1/2" -> {"train": [...], "val": [...]}
    final_val_loss: dict = field(default_factory=dict)  # "1/2" -> float
    latent_dims: dict = field(default_factory=dict)  # "1/2" -> int
    selected_ratio: Optional[Fraction] = None
    best_val_loss: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "curves": self.curves,
            "final_val_loss": self.final_val_loss,
            "latent_dims": self.latent_dims,
            "selected_ratio": str(self.selected_ratio) if self.selected_ratio is not None else None,
            "best_val_loss": self.best_val_loss,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingReport":
        sel = d.get("selected_ratio")
        return cls(d["curves"], d["final_val_loss"], d.get("latent_dims", {}),
                   Fraction(sel) if sel else None, d.get("best_val_loss"))


def split_indices(n: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    n_val = math.ceil(n * val_fraction)
    if n_val < 1 or n - n_val < 1:
        raise ValueError(f"val_fraction {val_fraction} leaves an empty split for n={n}")
    order = np.random.default_rng(seed).permutation(n)
    return order[: n - n_val], order[n - n_val:]


def _train_one(E_train, E_val, ratio, cfg: TrainingConfig, mean, scale):
    d = E_train.shape[1]
    params = init_autoencoder(d, ratio, cfg.seed)
    params.input_mean, params.input_scale = mean, scale
    rng = np.random.default_rng([cfg.seed, 1])
    train_curve, val_curve = [], []
    n = E_train.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = E_train[order[start:start + cfg.batch_size]]
            loss, grads = loss_and_gradients(params, batch)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, ratio, loss)
            for layer, (dW, db) in zip(params.layers, grads):
                layer.weight -= cfg.learning_rate * dW
                layer.bias -= cfg.learning_rate * db
        train_loss = loss_and_gradients(params, E_train)[0]
        val_loss = mse_loss(E_val, _forward(params.layers, E_val)[0])
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingDiverged(epoch, ratio, train_loss if not math.isfinite(train_loss) else val_loss)
        train_curve.append(train_loss)
        val_curve.append(val_loss)
    final_val = val_curve[-1] if val_curve else mse_loss(E_val, _forward(params.layers, E_val)[0])
    return params, train_curve, val_curve, final_val


def train(E, cfg: TrainingConfig) -> tuple[TrainingReport, dict]:
    """Train one autoencoder per ratio in ``cfg.ratios``.

    Returns the report and a ``{Fraction: AutoencoderParams}`` map. The split
    and every epoch's shuffle are seeded from ``cfg.seed``, and all ratios see
    the same batch order.
    """
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] < 4 or E.shape[1] < 4:
        raise ValueError("training needs at least a 4 x 4 matrix")
    if not np.all(np.isfinite(E)):
        raise ValueError("training data contains non-finite values")
    train_idx, val_idx = split_indices(E.shape[0], cfg.val_fraction, cfg.seed)
    mean = scale = None
    if cfg.standardize:
        mean = E[train_idx].mean(axis=0)
        scale = E[train_idx].std(axis=0)
        scale[scale == 0] = 1.0
        E = (E - mean) / scale
    E_train, E_val = E[train_idx], E[val_idx]

    report = TrainingReport()
    models = {}
    for ratio in cfg.ratios:
        # overflow surfaces as a non-finite loss and is reported as TrainingDiverged
        with np.errstate(over="ignore", invalid="ignore"):
            params, tr, va, final = _train_one(E_train, E_val, ratio, cfg, mean, scale)
        key = str(ratio)
        report.curves[key] = {"train": tr, "val": va}
        report.final_val_loss[key] = final
        report.latent_dims[key] = params.latent_dim
        models[ratio] = params
    report.selected_ratio = select_best_ratio(report)
    report.best_val_loss = report.final_val_loss[str(report.selected_ratio)]
    return report, models


def select_best_ratio(report: TrainingReport) -> Fraction:
    """Ratio with the lowest final validation loss; ties go to the smaller ratio."""
    if not report.final_val_loss:
        raise ValueError("no trained ratios in report")
    return min((Fraction(k) for k in report.final_val_loss),
               key=lambda r: (report.final_val_loss[str(r)], r))
