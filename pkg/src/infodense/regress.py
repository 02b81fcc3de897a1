"""Feed-forward regressor for virtual sensing, built on plain numpy.

Two fixed architectures are provided: the intra-modality net
(k x 32 x 64 x 128 x 256 x 512 x 256 x 64 x v) estimating all removed
sensors of one modality at once, and the cross-modality net
(p x 20 x 50 x 100 x 300 x 300 x 100 x 50 x 20 x 1) estimating one target
modality from a block of input sensors. Hidden layers are ReLU, the output
is linear, and optimization is Adam with the loss summed over the batch.

The Adam update applies the first-moment bias correction inside the
denominator product: theta -= lr * m / ((1 - b1^k) * (sqrt(v / (1 - b2^k)) + eps)).
This equals the textbook update with eps added to the bias-corrected root;
the step-by-step oracle test pins the exact form.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError, NumericError

IMVS_HIDDEN = (32, 64, 128, 256, 512, 256, 64)
CMI_HIDDEN = (20, 50, 100, 300, 300, 100, 50, 20)


@dataclass(frozen=True)
class TrainConfig:
    """Training protocol knobs; defaults follow the baseline recipe."""

    learning_rate: float = 0.001
    batch_size: int = 64
    train_fraction: float = 0.8
    patience: int = 500
    max_epochs: int = 10_000
    seed: int = 0
    loss_reduction: str = "sum"  # "mean" trades the exact summed loss for scale stability

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ContractError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.patience < 1:
            raise ContractError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1 or self.max_epochs < 0 or self.learning_rate <= 0:
            raise ContractError("batch_size >= 1, max_epochs >= 0, learning_rate > 0 required")
        if self.loss_reduction not in ("sum", "mean"):
            raise ContractError(f"unknown loss reduction {self.loss_reduction!r}")

    def to_json_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "train_fraction": self.train_fraction,
            "patience": self.patience,
            "max_epochs": self.max_epochs,
            "seed": self.seed,
            "loss_reduction": self.loss_reduction,
        }


@dataclass
class Normalization:
    """Train-split feature/target statistics applied at prediction time."""

    input_mean: np.ndarray
    input_std: np.ndarray
    target_mean: np.ndarray
    target_std: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "input_mean": self.input_mean.tolist(),
            "input_std": self.input_std.tolist(),
            "target_mean": self.target_mean.tolist(),
            "target_std": self.target_std.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Normalization":
        return cls(
            np.asarray(d["input_mean"], dtype=np.float64),
            np.asarray(d["input_std"], dtype=np.float64),
            np.asarray(d["target_mean"], dtype=np.float64),
            np.asarray(d["target_std"], dtype=np.float64),
        )


@dataclass
class MlpModel:
    """Layer weights/biases plus optional train-time normalization stats.

    Treated as immutable: training copies parameters instead of updating
    in place and returns a fresh model.
    """

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    normalization: Normalization | None = None

    def __post_init__(self) -> None:
        if len(self.layer_sizes) < 2:
            raise ContractError("need at least input and output layers")
        if any(s < 1 for s in self.layer_sizes):
            raise ContractError(f"layer sizes must be positive: {self.layer_sizes}")
        expected = list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))
        if len(self.weights) != len(expected) or len(self.biases) != len(expected):
            raise ContractError("one weight and bias per layer required")
        for (n_in, n_out), w, b in zip(expected, self.weights, self.biases):
            if w.shape != (n_in, n_out) or b.shape != (n_out,):
                raise ContractError(f"layer shapes inconsistent with sizes {self.layer_sizes}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NumericError("non-finite parameters")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list: W0, b0, W1, b1, ... (views, do not mutate)."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def with_parameters(self, params: Sequence[np.ndarray]) -> "MlpModel":
        weights = [np.array(params[2 * i]) for i in range(len(self.weights))]
        biases = [np.array(params[2 * i + 1]) for i in range(len(self.biases))]
        return MlpModel(self.layer_sizes, weights, biases, self.normalization)

    def to_json_dict(self) -> dict:
        return {
            "format_version": 1,
            "layer_sizes": list(self.layer_sizes),
            "weights": [w.ravel().tolist() for w in self.weights],  # row-major
            "biases": [b.tolist() for b in self.biases],
            "normalization": None
            if self.normalization is None
            else self.normalization.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MlpModel":
        sizes = tuple(int(s) for s in d["layer_sizes"])
        weights = [
            np.asarray(flat, dtype=np.float64).reshape(n_in, n_out)
            for flat, (n_in, n_out) in zip(d["weights"], zip(sizes[:-1], sizes[1:]))
        ]
        biases = [np.asarray(b, dtype=np.float64) for b in d["biases"]]
        norm = d.get("normalization")
        return cls(sizes, weights, biases, None if norm is None else Normalization.from_json_dict(norm))


@dataclass
class AdamState:
    """First/second moment estimates and the step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def initial(cls, params: Sequence[np.ndarray], learning_rate: float = 0.001) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            step=0,
            learning_rate=learning_rate,
        )


@dataclass
class TrainReport:
    """Per-epoch losses and the early-stopping outcome.

    Train MSE is accumulated from the batch passes of the epoch (parameters
    move between batches); validation MSE is a clean full pass at epoch end.
    Both are in normalized target units, as mean over samples and outputs.
    """

    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    stopping_epoch: int = 0
    best_epoch: int = -1
    best_val_mse: float | None = None
    wall_time_s: float = 0.0

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("epoch,train_mse,val_mse\n")
            for i, (tr, va) in enumerate(zip(self.train_mse, self.val_mse), start=1):
                fh.write(f"{i},{tr:.12g},{va:.12g}\n")


def init_model(layer_sizes: Sequence[int], seed: int = 0) -> MlpModel:
    """He-uniform fan-in initialization (keeps deep ReLU stacks in range)."""
    sizes = tuple(int(s) for s in layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / n_in)
        weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return MlpModel(sizes, weights, biases)


def build_imvs_model(n_physical: int, n_virtual: int, seed: int = 0) -> MlpModel:
    """Intra-modality net: physical readings in, all virtual estimates out."""
    if n_physical < 1 or n_virtual < 1:
        raise ContractError(f"need positive widths, got ({n_physical}, {n_virtual})")
    return init_model((n_physical, *IMVS_HIDDEN, n_virtual), seed)


def build_cmi_model(n_inputs: int, seed: int = 0) -> MlpModel:
    """Cross-modality net: one input block in, a single modality estimate out."""
    if n_inputs < 1:
        raise ContractError(f"need positive input width, got {n_inputs}")
    return init_model((n_inputs, *CMI_HIDDEN, 1), seed)


def _check_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.n_inputs:
        raise ContractError(f"input shape {x.shape} incompatible with {model.n_inputs} inputs")
    return x


def _forward_cached(model: MlpModel, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Output plus per-layer inputs (post-activation), for backprop."""
    layer_inputs = [x]
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        a = z if i == last else np.maximum(z, 0.0)
        if i != last:
            layer_inputs.append(a)
    return a, layer_inputs


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Batch forward pass: affine + ReLU hidden layers, linear output."""
    out, _ = _forward_cached(model, _check_batch(model, x))
    return out


def mse_loss(
    pred: np.ndarray, target: np.ndarray, reduction: str = "sum"
) -> tuple[float, np.ndarray]:
    """Squared-error loss and its gradient with respect to the predictions.

    ``sum`` is the summed squared error over the whole batch with gradient
    2 * (pred - target); ``mean`` divides both by the number of rows.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ContractError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    if reduction == "sum":
        return float(np.sum(diff * diff)), 2.0 * diff
    if reduction == "mean":
        n = pred.shape[0] if pred.ndim > 1 else pred.size
        return float(np.sum(diff * diff) / n), 2.0 * diff / n
    raise ContractError(f"unknown reduction {reduction!r}")


def _backward_from_cache(
    model: MlpModel, layer_inputs: list[np.ndarray], upstream: np.ndarray
) -> list[np.ndarray]:
    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(model.weights))
    delta = upstream
    for i in range(len(model.weights) - 1, -1, -1):
        a_in = layer_inputs[i]
        grads[2 * i] = a_in.T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            # Post-activation positivity doubles as the ReLU mask.
            delta = (delta @ model.weights[i].T) * (layer_inputs[i] > 0.0)
    return grads


def backward(model: MlpModel, x: np.ndarray, upstream: np.ndarray) -> list[np.ndarray]:
    """Reverse-mode gradients of the forward pass for every parameter.

    ``upstream`` is the loss gradient with respect to the network output.
    Returns the flat list [dW0, db0, dW1, db1, ...] matching
    :meth:`MlpModel.parameters`.
    """
    x = _check_batch(model, x)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.ndim == 1:
        upstream = upstream[None, :]
    if upstream.shape != (x.shape[0], model.n_outputs):
        raise ContractError(f"upstream shape {upstream.shape} does not match output")
    _, layer_inputs = _forward_cached(model, x)
    return _backward_from_cache(model, layer_inputs, upstream)


def adam_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """One adaptive-moment update; pure, returns fresh params and state.

    m_k = b1 m_{k-1} + (1 - b1) g_k
    v_k = b2 v_{k-1} + (1 - b2) g_k^2
    theta_k = theta_{k-1} - lr * m_k / ((1 - b1^k) * (sqrt(v_k / (1 - b2^k)) + eps))
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ContractError("params, grads and state must have matching layouts")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient; aborting update")
    k = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m_k = b1 * m + (1.0 - b1) * g
        v_k = b2 * v + (1.0 - b2) * (g * g)
        denom = (1.0 - b1**k) * (np.sqrt(v_k / (1.0 - b2**k)) + state.eps)
        new_params.append(p - state.learning_rate * m_k / denom)
        new_m.append(m_k)
        new_v.append(v_k)
    return new_params, AdamState(
        m=new_m,
        v=new_v,
        step=k,
        learning_rate=state.learning_rate,
        beta1=b1,
        beta2=b2,
        eps=state.eps,
    )


def _stats(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)  # constant columns pass through unscaled
    return mean, std


def train(
    model: MlpModel,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig,
) -> tuple[MlpModel, TrainReport]:
    """Fit the model with a chronological 80:20 split and patience stopping.

    The first train_fraction of the rows trains, the remainder validates
    (time series: no shuffled split). Mini-batches are consecutive chunks of
    the training rows; their visit order is reshuffled every epoch from the
    run seed. Inputs and targets are z-scored with train-split statistics
    stored on the returned model. Training stops when validation MSE has not
    improved for ``patience`` consecutive epochs and the parameters from the
    best-validation epoch are returned. Deterministic for a fixed config.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] != y.shape[0]:
        raise ContractError(f"row mismatch: {x.shape[0]} inputs vs {y.shape[0]} targets")
    if x.shape[0] < 2:
        raise ContractError("need >= 2 samples")
    if x.shape[1] != model.n_inputs or y.shape[1] != model.n_outputs:
        raise ContractError(
            f"data ({x.shape[1]} -> {y.shape[1]}) does not fit model "
            f"({model.n_inputs} -> {model.n_outputs})"
        )

    n_train = int(x.shape[0] * config.train_fraction)
    if n_train < 1 or n_train >= x.shape[0]:
        raise ContractError(f"split leaves an empty side: {n_train} train rows of {x.shape[0]}")

    norm = Normalization(*_stats(x[:n_train]), *_stats(y[:n_train]))
    xn = (x - norm.input_mean) / norm.input_std
    yn = (y - norm.target_mean) / norm.target_std
    train_x, val_x = xn[:n_train], xn[n_train:]
    train_y, val_y = yn[:n_train], yn[n_train:]

    started = time.perf_counter()
    report = TrainReport()
    params = [p.copy() for p in model.parameters()]
    if config.max_epochs == 0:
        return MlpModel(model.layer_sizes, params[0::2], params[1::2], norm), report

    state = AdamState.initial(params, config.learning_rate)
    rng = np.random.default_rng(config.seed)
    n_batches = (n_train + config.batch_size - 1) // config.batch_size
    current = MlpModel(model.layer_sizes, params[0::2], params[1::2], norm)

    best_params = [p.copy() for p in params]
    best_val = np.inf
    since_best = 0

    for epoch in range(1, config.max_epochs + 1):
        sse = 0.0
        for b in rng.permutation(n_batches):
            lo = int(b) * config.batch_size
            hi = min(lo + config.batch_size, n_train)
            bx, by = train_x[lo:hi], train_y[lo:hi]
            pred, cache = _forward_cached(current, bx)
            _, grad = mse_loss(pred, by, config.loss_reduction)
            sse += float(np.sum((pred - by) ** 2))
            grads = _backward_from_cache(current, cache, grad)
            new_params, state = adam_step(current.parameters(), grads, state)
            current = MlpModel(model.layer_sizes, new_params[0::2], new_params[1::2], norm)

        report.train_mse.append(sse / train_y.size)
        val_pred = forward(current, val_x)
        val = float(np.mean((val_pred - val_y) ** 2))
        report.val_mse.append(val)
        report.stopping_epoch = epoch

        if val < best_val:
            best_val = val
            best_params = [p.copy() for p in current.parameters()]
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    report.best_val_mse = best_val
    report.wall_time_s = time.perf_counter() - started
    fitted = MlpModel(model.layer_sizes, best_params[0::2], best_params[1::2], norm)
    return fitted, report


def _backward_from_cache(
    model: MlpModel, layer_inputs: list[np.ndarray], upstream: np.ndarray
) -> list[np.ndarray]:
    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(model.weights))
    delta = upstream
    for i in range(len(model.weights) - 1, -1, -1):
        a_in = layer_inputs[i]
        grads[2 * i] = a_in.T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (layer_inputs[i] > 0.0)
    return grads


def predict_virtual(model: MlpModel, physical: np.ndarray) -> np.ndarray:
    """Estimate virtual readings from physical ones, in original units.

    Applies the stored train-time input normalization and inverts the target
    normalization on the way out.
    """
    if model.normalization is None:
        raise ContractError("model has no normalization stats; train it first")
    x = _check_batch(model, physical)
    norm = model.normalization
    out = forward(model, (x - norm.input_mean) / norm.input_std)
    return out * norm.target_std + norm.target_mean
