"""Position-embedded multilayer-perceptron gate-error estimator.

One network predicts the error of any gate: the normalized full-chip
frequency vector is summed with a trainable embedding column selected by the
gate's one-hot index, then passed through two tanh hidden layers and a
logistic output head.  Training minimizes the mean squared error between
``log(prediction)`` and ``log(label)`` over every (configuration, gate)
pair, with per-parameter adaptive moments and a step-halving schedule that
rejects epochs whose full-training loss increases.

Checkpoint format: magic ``QFSM1``; little-endian u32 fields D, layer count,
per-layer output widths, activation-name length; the activation name; then
float64 arrays (embedding row-major, then each layer's weight row-major and
bias).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .chip import ChipTopology, build_grid
from .dataset import Dataset, FrequencyConfig, FrequencyGrid, normalize

CHECKPOINT_MAGIC = b"QFSM1"
_PRED_FLOOR = 1e-300
_PRED_CEILING = float(np.nextafter(1.0, 0.0))


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass
class SurrogateModel:
    """Embedding matrix plus MLP weights; ``weights[k]`` maps layer k-1 to k."""

    w_p: np.ndarray            # (D, D); column i embeds gate i
    weights: list[np.ndarray]  # W1 (H1, D), W2 (H2, H1), W3 (1, H2)
    biases: list[np.ndarray]
    grid: FrequencyGrid
    activation: str = "tanh"
    training_meta: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.w_p.shape[0]

    @property
    def layer_widths(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights)

    def parameters(self) -> list[np.ndarray]:
        out = [self.w_p]
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass
class EvalMetrics:
    median_relative_error: float
    median_absolute_error: float
    scatter: np.ndarray       # (n, 2) columns: predicted, measured
    cdf_relative: np.ndarray  # sorted ascending
    cdf_absolute: np.ndarray


@dataclass
class TrainConfig:
    widths: tuple[int, ...] | None = None  # default (4D, 4D)
    epochs: int = 40
    batch: int = 256
    step: float = 1e-3

    @classmethod
    def from_mapping(cls, hyper) -> "TrainConfig":
        if isinstance(hyper, TrainConfig):
            return hyper
        hyper = dict(hyper or {})
        cfg = cls()
        for key in ("widths", "epochs", "batch", "step"):
            if key in hyper:
                setattr(cfg, key, hyper[key])
        if cfg.widths is not None:
            cfg.widths = tuple(int(w) for w in cfg.widths)
        return cfg


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_sigmoid(z: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -z)


def init_model(
    topology: ChipTopology,
    grid: FrequencyGrid,
    widths: tuple[int, ...] | None = None,
    seed: int = 0,
) -> SurrogateModel:
    """Seeded symmetric-uniform initialization.

    Hidden weights use fan-in scaling; the embedding starts at scale 1e-2 so
    early training is dominated by the frequency inputs; biases start at zero.
    """
    d = topology.gate_count
    if widths is None:
        widths = (4 * d, 4 * d)
    rng = np.random.default_rng(seed)
    w_p = rng.uniform(-1e-2, 1e-2, size=(d, d))
    weights = []
    biases = []
    fan_in = d
    for h in (*widths, 1):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(h, fan_in)))
        biases.append(np.zeros(h))
        fan_in = h
    return SurrogateModel(w_p=w_p, weights=weights, biases=biases, grid=grid)


# ---------------------------------------------------------------------------
# Forward / backward.
# ---------------------------------------------------------------------------

def _forward(model: SurrogateModel, x: np.ndarray):
    """Batched forward pass; returns head pre-activation and layer caches."""
    acts = [x]
    h = x
    n = len(model.weights)
    for k in range(n - 1):
        h = np.tanh(h @ model.weights[k].T + model.biases[k])
        acts.append(h)
    z = h @ model.weights[-1].T + model.biases[-1]
    return z[:, 0], acts


def _backward(model: SurrogateModel, dz: np.ndarray, acts: list[np.ndarray]):
    """Gradients for every weight/bias plus the gradient w.r.t. the input."""
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    delta = dz[:, None]  # (B, 1)
    for k in range(len(model.weights) - 1, -1, -1):
        grads_w[k] = delta.T @ acts[k]
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ model.weights[k]) * (1.0 - acts[k] * acts[k])
    dx = delta @ model.weights[0]
    return grads_w, grads_b, dx


def loss_and_grads(
    model: SurrogateModel,
    x_norm: np.ndarray,
    gate_idx: np.ndarray,
    targets_log: np.ndarray,
):
    """Mean squared log-error over a batch of (config, gate) samples.

    ``x_norm`` holds the normalized configuration rows; the embedding column
    of each sample's gate is added inside.  Returns the loss, the parameter
    gradients in ``model.parameters()`` order, and nothing else.
    """
    x = x_norm + model.w_p[:, gate_idx].T
    z, acts = _forward(model, x)
    log_pred = _log_sigmoid(z)
    resid = log_pred - targets_log
    loss = float(np.mean(resid * resid))
    b = len(z)
    dz = (2.0 / b) * resid * _sigmoid(-z)
    grads_w, grads_b, dx = _backward(model, dz, acts)
    g_wp_t = np.zeros_like(model.w_p)
    np.add.at(g_wp_t, gate_idx, dx)
    grads = [g_wp_t.T]
    for gw, gb in zip(grads_w, grads_b):
        grads.extend((gw, gb))
    return loss, grads


# ---------------------------------------------------------------------------
# Prediction.
# ---------------------------------------------------------------------------

def predict_all(model: SurrogateModel, config: FrequencyConfig) -> np.ndarray:
    """Predicted error of every gate under one configuration (single
    normalization pass, one batched forward over all gate indices)."""
    omega = normalize(config, model.grid)
    x = omega[None, :] + model.w_p.T
    z, _ = _forward(model, x)
    p = _sigmoid(z)
    return np.clip(p, _PRED_FLOOR, _PRED_CEILING)


def predict(model: SurrogateModel, config: FrequencyConfig, gate_index: int) -> float:
    """Predicted error of one gate; equals ``predict_all(...)[gate_index]``."""
    d = model.input_dim
    if not 0 <= gate_index < d:
        raise ValueError(f"gate index {gate_index} outside [0, {d})")
    return float(predict_all(model, config)[gate_index])


def _normalized_inputs(model_grid: FrequencyGrid, dataset: Dataset) -> np.ndarray:
    return np.stack([normalize(cfg, model_grid) for cfg in dataset.configs])


def _predict_dataset(model: SurrogateModel, dataset: Dataset) -> np.ndarray:
    """Predictions for every (config, gate) pair, per-config batched."""
    return np.stack([predict_all(model, cfg) for cfg in dataset.configs])


# ---------------------------------------------------------------------------
# Training.
# ---------------------------------------------------------------------------

class _Adam:
    def __init__(self, params: list[np.ndarray], step: float,
                 b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.step = step
        self.b1, self.b2, self.eps = b1, b2, eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def update(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            p -= self.step * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self):
        return (self.t, [m.copy() for m in self.m], [v.copy() for v in self.v])

    def restore(self, state) -> None:
        self.t, m, v = state
        self.m = [a.copy() for a in m]
        self.v = [a.copy() for a in v]


def _full_loss(model: SurrogateModel, x_cfg: np.ndarray, targets_log: np.ndarray,
               chunk: int = 8192) -> float:
    n_cfg, d = targets_log.shape
    total = 0.0
    n = n_cfg * d
    cfg_idx = np.arange(n) // d
    gate_idx = np.arange(n) % d
    flat_t = targets_log.ravel()
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        x = x_cfg[cfg_idx[lo:hi]] + model.w_p[:, gate_idx[lo:hi]].T
        z, _ = _forward(model, x)
        resid = _log_sigmoid(z) - flat_t[lo:hi]
        total += float(resid @ resid)
    return total / n


def train(
    train_set: Dataset,
    hyper=None,
    seed: int = 0,
) -> tuple[SurrogateModel, EvalMetrics]:
    """Fit the estimator on an oracle-labelled dataset.

    Deterministic for a given seed: initialization and epoch shuffles draw
    from fixed spawned streams, batches reduce in index order.  An epoch whose
    full-training loss increases is rolled back and the step size halved, so
    the recorded loss trace is non-increasing.  Non-finite losses abort with
    the offending epoch and step size in the message.
    """
    if len(train_set) == 0:
        raise ValueError("empty training set")
    cfg = TrainConfig.from_mapping(hyper)
    n_cfg = len(train_set)
    d = train_set.labels.shape[1]

    grid = FrequencyGrid(*train_set.provenance["grid"])
    ss_init, ss_shuffle = np.random.SeedSequence(seed).spawn(2)
    rows = int(train_set.provenance["rows"])
    cols = int(train_set.provenance["cols"])
    model = init_model(build_grid(rows, cols), grid, cfg.widths,
                       seed=np.random.default_rng(ss_init))
    x_cfg = _normalized_inputs(grid, train_set)
    targets_log = np.log(train_set.labels)

    params = model.parameters()
    adam = _Adam(params, cfg.step)
    rng = np.random.default_rng(ss_shuffle)
    n = n_cfg * d

    best_loss = _full_loss(model, x_cfg, targets_log)
    snapshot = ([p.copy() for p in params], adam.state())
    loss_trace = [best_loss]
    step = cfg.step
    # Mini-batch moment estimates jitter epoch to epoch; only increases beyond
    # this band indicate a genuinely too-large step.
    increase_band = 1.05

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        adam.step = step
        for lo in range(0, n, cfg.batch):
            sel = perm[lo:lo + cfg.batch]
            cfg_idx = sel // d
            gate_idx = sel % d
            loss, grads = loss_and_grads(
                model, x_cfg[cfg_idx], gate_idx, targets_log.ravel()[sel])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch + 1} with step {step:g}")
            adam.update(params, grads)
        if not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingDiverged(
                f"non-finite parameters at epoch {epoch + 1} with step {step:g}")
        epoch_loss = _full_loss(model, x_cfg, targets_log)
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(
                f"non-finite loss at epoch {epoch + 1} with step {step:g}")
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            snapshot = ([p.copy() for p in params], adam.state())
        elif epoch_loss > best_loss * increase_band:
            saved_params, saved_adam = snapshot
            for p, s in zip(params, saved_params):
                p[...] = s
            adam.restore(saved_adam)
            step /= 2.0
            if step < 1e-12:
                loss_trace.append(best_loss)
                break
        loss_trace.append(best_loss)

    # The accepted (best) parameters are the trained model.
    saved_params, _ = snapshot
    for p, s in zip(params, saved_params):
        p[...] = s

    model.training_meta = {
        "seed": seed,
        "epochs": cfg.epochs,
        "batch": cfg.batch,
        "initial_step": cfg.step,
        "final_step": step,
        "loss": "mse-log",
        "loss_trace": loss_trace,
    }
    return model, evaluate(model, train_set)


def evaluate(model: SurrogateModel, test_set: Dataset) -> EvalMetrics:
    """Relative/absolute error medians and CDF arrays on a labelled split."""
    if len(test_set) == 0:
        raise ValueError("empty evaluation set")
    preds = _predict_dataset(model, test_set)
    measured = test_set.labels
    rel = np.abs(preds - measured) / measured
    abs_err = np.abs(preds - measured)
    scatter = np.column_stack([preds.ravel(), measured.ravel()])
    return EvalMetrics(
        median_relative_error=float(np.median(rel)),
        median_absolute_error=float(np.median(abs_err)),
        scatter=scatter,
        cdf_relative=np.sort(rel.ravel()),
        cdf_absolute=np.sort(abs_err.ravel()),
    )


# ---------------------------------------------------------------------------
# Checkpoints.
# ---------------------------------------------------------------------------

def save_model(model: SurrogateModel, path) -> None:
    act = model.activation.encode()
    widths = model.layer_widths
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", model.input_dim, len(widths)))
        fh.write(struct.pack(f"<{len(widths)}I", *widths))
        fh.write(struct.pack("<I", len(act)))
        fh.write(act)
        fh.write(np.ascontiguousarray(model.w_p, dtype="<f8").tobytes())
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path, topology: ChipTopology, grid: FrequencyGrid) -> SurrogateModel:
    """Read a checkpoint; rejects a dimension mismatch with the topology."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: bad checkpoint magic {magic!r}")
        d, n_layers = struct.unpack("<II", fh.read(8))
        if d != topology.gate_count:
            raise ValueError(
                f"{path}: checkpoint D={d} does not match topology gate count "
                f"{topology.gate_count}")
        widths = struct.unpack(f"<{n_layers}I", fh.read(4 * n_layers))
        (act_len,) = struct.unpack("<I", fh.read(4))
        activation = fh.read(act_len).decode()

        def arr(shape):
            count = int(np.prod(shape))
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise ValueError(f"{path}: truncated checkpoint")
            return np.frombuffer(buf, dtype="<f8").reshape(shape).copy()

        w_p = arr((d, d))
        weights = []
        biases = []
        fan_in = d
        for h in widths:
            weights.append(arr((h, fan_in)))
            biases.append(arr((h,)))
            fan_in = h
    return SurrogateModel(w_p=w_p, weights=weights, biases=biases,
                          grid=grid, activation=activation)
