"""Feed-forward regressor in plain numpy: ReLU MLP, inverted dropout, L1 loss,
backpropagation and Adam."""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    CorruptPayload,
    EmptyDataset,
    EmptyGrid,
    InvalidConfig,
    NonFiniteGradient,
    ShapeMismatch,
    UnsupportedVersion,
)

logger = logging.getLogger(__name__)

MAGIC = "OHLCNET-MLP"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class MlpConfig:
    input_size: int = 5
    hidden_sizes: tuple[int, ...] = (150, 150)
    output_size: int = 1
    dropout_rate: float = 0.2
    activation: str = "relu"
    loss: str = "mae"
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch_size: int = 5
    max_epochs: int = 500
    patience: int = 50
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))

    def validate(self) -> None:
        if self.input_size < 1:
            raise InvalidConfig("input_size must be >= 1")
        if self.output_size != 1:
            raise InvalidConfig("output_size must be 1")
        if any(h < 1 for h in self.hidden_sizes):
            raise InvalidConfig("hidden layer sizes must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidConfig("dropout_rate must be in [0, 1)")
        if self.activation != "relu" or self.loss != "mae":
            raise InvalidConfig("only relu activation and mae loss are supported")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1 or self.patience < 0:
            raise InvalidConfig("learning_rate, batch_size, max_epochs and patience out of range")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_size, *self.hidden_sizes, self.output_size]


def _views(buf: np.ndarray, sizes: Sequence[int]) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-layer weight and bias views into one flat parameter-sized buffer."""
    ws, bs, pos = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        ws.append(buf[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out))
        pos += fan_in * fan_out
    for fan_out in sizes[1:]:
        bs.append(buf[pos:pos + fan_out])
        pos += fan_out
    return ws, bs


def _n_params(sizes: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(sizes[:-1], sizes[1:])) + sum(sizes[1:])


class AdamState:
    """First/second moment accumulators laid out like the parameters."""

    def __init__(self, sizes: Sequence[int], step: int = 0):
        n = _n_params(sizes)
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.step = step
        self.m_w, self.m_b = _views(self.m, sizes)
        self.v_w, self.v_b = _views(self.v, sizes)


class MlpModel:
    """Weights and biases are views into a single flat parameter vector."""

    def __init__(self, config: MlpConfig, weights=None, biases=None, adam_state: AdamState | None = None,
                 input_scaler: tuple[float, float] = (0.0, 1.0), rng: np.random.Generator | None = None):
        self.config = config
        sizes = config.layer_sizes
        self.flat = np.zeros(_n_params(sizes))
        self.weights, self.biases = _views(self.flat, sizes)
        if weights is not None:
            for dst, src in zip(self.weights, weights):
                dst[...] = src
        if biases is not None:
            for dst, src in zip(self.biases, biases):
                dst[...] = src
        self.adam_state = adam_state or AdamState(sizes)
        self.input_scaler = (float(input_scaler[0]), float(input_scaler[1]))
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self._grad = np.zeros_like(self.flat)
        self._grad_w, self._grad_b = _views(self._grad, sizes)
        self._tmp = np.empty_like(self.flat)

    def scale(self, values):
        lo, hi = self.input_scaler
        return (np.asarray(values, dtype=float) - lo) / (hi - lo)

    def unscale(self, values):
        lo, hi = self.input_scaler
        return np.asarray(values, dtype=float) * (hi - lo) + lo

    def predict_next(self, window: Sequence[float]) -> float:
        """Next value in price units from a raw (unscaled) lag window."""
        out, _ = forward(self, self.scale(window), train_mode=False)
        return float(self.unscale(out))

    def get_flat(self) -> np.ndarray:
        return self.flat.copy()

    def set_flat(self, values: np.ndarray) -> None:
        self.flat[...] = values


@dataclass
class TrainHistory:
    epoch_losses: list[tuple[float, float]] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0

    @property
    def best_validation_loss(self) -> float:
        return min(v for _, v in self.epoch_losses)


def init_mlp(config: MlpConfig, input_scaler: tuple[float, float] = (0.0, 1.0)) -> MlpModel:
    """He-initialized weights, zero biases, zero Adam moments."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    sizes = config.layer_sizes
    weights = [
        rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:])
    ]
    return MlpModel(config, weights, None, None, input_scaler, rng)


def forward(model: MlpModel, x, train_mode: bool = False, rng: np.random.Generator | None = None):
    """Forward pass for one sample (1-d) or a batch (2-d, rows are samples).

    Returns ``(output, cache)``; ``output`` is a float for a single sample and
    a 1-d array for a batch.
    """
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != model.config.input_size:
        raise ShapeMismatch(f"expected input width {model.config.input_size}, got shape {np.shape(x)}")

    rate = model.config.dropout_rate if train_mode else 0.0
    rng = rng or model.rng
    cache = {"inputs": [a], "pre": [], "masks": []}
    n_layers = len(model.weights)
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        if i == n_layers - 1:
            a = z
            break
        cache["pre"].append(z)
        a = np.maximum(z, 0.0)
        if rate > 0.0:
            mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
            a = a * mask
        else:
            mask = None
        cache["masks"].append(mask)
        cache["inputs"].append(a)
    out = a[:, 0]
    return (float(out[0]) if single else out), cache


def loss_mae(predicted, actual) -> float:
    """Absolute error, averaged when given arrays."""
    return float(np.mean(np.abs(np.asarray(actual, dtype=float) - np.asarray(predicted, dtype=float))))


def backward(model: MlpModel, cache: dict, d_out: np.ndarray):
    """Gradients of a loss with respect to every weight and bias, given the
    gradient ``d_out`` with respect to the (batch of) outputs.

    The returned arrays are views into the model's gradient buffer and are
    overwritten by the next call.
    """
    grad_w, grad_b = model._grad_w, model._grad_b
    delta = np.asarray(d_out, dtype=float).reshape(-1, 1)
    for i in range(len(model.weights) - 1, -1, -1):
        a_in = cache["inputs"][i]
        np.matmul(a_in.T, delta, out=grad_w[i])
        delta.sum(axis=0, out=grad_b[i])
        if i == 0:
            break
        delta = delta @ model.weights[i].T
        mask = cache["masks"][i - 1]
        if mask is not None:
            delta = delta * mask
        delta = delta * (cache["pre"][i - 1] > 0)
    return grad_w, grad_b


def mae_gradients(model: MlpModel, x: np.ndarray, y: np.ndarray, train_mode: bool = True):
    """Mean L1 loss of a batch and its gradients (subgradient 0 at zero error)."""
    out, cache = forward(model, np.atleast_2d(x), train_mode=train_mode)
    err = out - np.asarray(y, dtype=float)
    loss = float(np.mean(np.abs(err)))
    grad_w, grad_b = backward(model, cache, np.sign(err) / len(err))
    return loss, grad_w, grad_b


def adam_update(model: MlpModel, grad: np.ndarray | None = None) -> None:
    """Bias-corrected Adam step on every parameter; ``grad`` defaults to the
    gradient buffer filled by the last :func:`backward`."""
    cfg, st = model.config, model.adam_state
    g = model._grad if grad is None else grad
    tmp = model._tmp
    st.step += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1**st.step
    c2 = 1.0 - b2**st.step
    st.m *= b1
    np.multiply(g, 1.0 - b1, out=tmp)
    st.m += tmp
    st.v *= b2
    np.multiply(g, g, out=tmp)
    tmp *= 1.0 - b2
    st.v += tmp
    np.divide(st.v, c2, out=tmp)
    np.sqrt(tmp, out=tmp)
    tmp += cfg.adam_epsilon
    np.divide(st.m, tmp, out=tmp)
    tmp *= cfg.learning_rate / c1
    model.flat -= tmp


def train_step(model: MlpModel, batch_x, batch_y) -> float:
    """One Adam step on a mini-batch; the model is updated in place and the
    pre-update batch loss returned."""
    x = np.atleast_2d(np.asarray(batch_x, dtype=float))
    y = np.atleast_1d(np.asarray(batch_y, dtype=float))
    if len(x) == 0:
        raise EmptyDataset("empty batch")
    if len(x) != len(y):
        raise ShapeMismatch("batch inputs and targets differ in length")
    loss, _, _ = mae_gradients(model, x, y, train_mode=True)
    if not np.all(np.isfinite(model._grad)):
        raise NonFiniteGradient("non-finite gradient; step aborted")
    adam_update(model)
    return loss


def evaluate(model: MlpModel, x, y) -> float:
    out, _ = forward(model, np.atleast_2d(x), train_mode=False)
    return loss_mae(out, y)


def train(model: MlpModel, train_set, validation_set) -> tuple[MlpModel, TrainHistory]:
    """Shuffled mini-batch training with early stopping on validation L1.

    ``train_set`` and ``validation_set`` are ``(X, y)`` pairs in scaled space.
    Training stops once validation loss has failed to improve for more than
    ``patience`` consecutive epochs; the best epoch's parameters are restored.
    """
    x_tr, y_tr = (np.asarray(a, dtype=float) for a in train_set)
    x_va, y_va = (np.asarray(a, dtype=float) for a in validation_set)
    if len(x_tr) == 0 or len(x_va) == 0:
        raise EmptyDataset("training and validation sets must be non-empty")
    cfg = model.config
    history = TrainHistory()
    best = (np.inf, model.get_flat())
    stale = 0
    bs = cfg.batch_size
    for epoch in range(1, cfg.max_epochs + 1):
        order = model.rng.permutation(len(x_tr))
        losses = []
        for start in range(0, len(order), bs):
            idx = order[start:start + bs]
            losses.append(train_step(model, x_tr[idx], y_tr[idx]) * len(idx))
        train_loss = float(np.sum(losses) / len(order))
        val_loss = evaluate(model, x_va, y_va)
        history.epoch_losses.append((train_loss, val_loss))
        history.stopped_epoch = epoch
        if val_loss < best[0]:
            best = (val_loss, model.get_flat())
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale > cfg.patience:
                break
    model.set_flat(best[1])
    logger.debug("stopped at epoch %d, best %d (val %.6g)", history.stopped_epoch, history.best_epoch, best[0])
    return model, history


@dataclass
class GridScore:
    hidden_sizes: tuple[int, ...]
    channel_scores: dict[str, float]

    @property
    def total(self) -> float:
        return float(sum(self.channel_scores.values()))


def grid_search(geometries: Sequence[Sequence[int]], datasets: dict, base_config: MlpConfig | None = None):
    """Train every candidate geometry on every channel with the same seed and
    protocol; the winner has the lowest validation MAE summed over channels.

    ``datasets`` maps a channel name to ``(train_set, validation_set)`` where
    each set is an ``(X, y)`` pair. Returns ``(best_config, scores)``.
    """
    if not geometries:
        raise EmptyGrid("no candidate geometries")
    base = base_config or MlpConfig()
    scores = []
    for hidden in geometries:
        cfg = dataclasses.replace(base, hidden_sizes=tuple(hidden))
        per_channel = {}
        for channel, (tr, va) in datasets.items():
            _, hist = train(init_mlp(cfg), tr, va)
            per_channel[channel] = hist.best_validation_loss
        scores.append(GridScore(cfg.hidden_sizes, per_channel))
    winner = min(scores, key=lambda s: s.total)
    return dataclasses.replace(base, hidden_sizes=winner.hidden_sizes), scores


def _fmt(a: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(a))


def save_model(model: MlpModel) -> bytes:
    """Versioned text format: header, config, scaler, layer dims, then every
    array row-major in round-trip decimal, closed by an END marker."""
    cfg = dataclasses.asdict(model.config)
    cfg["hidden_sizes"] = list(cfg["hidden_sizes"])
    lines = [
        MAGIC,
        f"version {FORMAT_VERSION}",
        "config " + json.dumps(cfg, sort_keys=True),
        f"scaler {model.input_scaler[0]!r} {model.input_scaler[1]!r}",
        "dims " + " ".join(str(n) for n in model.config.layer_sizes),
        f"adam_step {model.adam_state.step}",
    ]
    st = model.adam_state
    for i in range(len(model.weights)):
        for tag, arr in (("W", model.weights[i]), ("b", model.biases[i]),
                         ("mW", st.m_w[i]), ("vW", st.v_w[i]), ("mb", st.m_b[i]), ("vb", st.v_b[i])):
            lines.append(f"{tag} {i} {_fmt(arr)}")
    lines.append(f"END {len(lines)}")
    return ("\n".join(lines) + "\n").encode("ascii")


def load_model(payload: bytes) -> MlpModel:
    try:
        text = payload.decode("ascii")
    except (UnicodeDecodeError, AttributeError):
        raise CorruptPayload("payload is not ASCII text") from None
    lines = text.split("\n")
    if not lines or lines[0] != MAGIC:
        raise CorruptPayload("missing magic header")
    try:
        version = int(lines[1].split()[1])
    except (IndexError, ValueError):
        raise CorruptPayload("missing version line") from None
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"model format version {version} (supported: {FORMAT_VERSION})")
    if len(lines) < 2 or lines[-1] != "" or not lines[-2].startswith("END "):
        raise CorruptPayload("payload truncated")
    body = lines[:-2]
    try:
        if int(lines[-2].split()[1]) != len(body):
            raise CorruptPayload("line count mismatch")
        cfg_dict = json.loads(body[2].removeprefix("config "))
        config = MlpConfig(**cfg_dict)
        lo, hi = (float(v) for v in body[3].split()[1:3])
        dims = [int(v) for v in body[4].split()[1:]]
        step = int(body[5].split()[1])
        arrays: dict[tuple[str, int], np.ndarray] = {}
        for line in body[6:]:
            tag, idx, *vals = line.split(" ")
            arrays[(tag, int(idx))] = np.array([float(v) for v in vals])
        if dims != config.layer_sizes:
            raise CorruptPayload("layer dims disagree with config")
        n = len(dims) - 1
        shapes = [(dims[i], dims[i + 1]) for i in range(n)]
        get = lambda tag, i, shape: arrays[(tag, i)].reshape(shape)  # noqa: E731
        weights = [get("W", i, shapes[i]) for i in range(n)]
        biases = [get("b", i, (dims[i + 1],)) for i in range(n)]
        adam = AdamState(dims, step)
        for i in range(n):
            adam.m_w[i][...] = get("mW", i, shapes[i])
            adam.v_w[i][...] = get("vW", i, shapes[i])
            adam.m_b[i][...] = get("mb", i, (dims[i + 1],))
            adam.v_b[i][...] = get("vb", i, (dims[i + 1],))
    except CorruptPayload:
        raise
    except (KeyError, ValueError, IndexError, TypeError) as exc:
        raise CorruptPayload(f"cannot decode model: {exc}") from None
    return MlpModel(config, weights, biases, adam, (lo, hi))
