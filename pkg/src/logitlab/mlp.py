"""Small ReLU MLP with explicit forward, manual backprop, and SGD-momentum.

Everything is float64 numpy and fully deterministic given (config, seed,
data): initialization uses a seeded generator, batch order is reshuffled
each epoch from a stream keyed by (run seed, epoch), and reductions keep
a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import mixup_pairs
from .losses import RegularizerSpec, batch_loss_grad, batch_ls_split


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden_dims: tuple[int, ...]
    num_classes: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("all layer dims must be >= 1")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")


@dataclass
class Params:
    """Per-layer weight matrices (fan_in, fan_out) and bias vectors."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "Params":
        return Params([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class Grads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class ForwardTrace:
    """Intermediates retained for backprop; ``features`` is the penultimate
    activation (the raw input when there are no hidden layers)."""

    x: np.ndarray
    pre: list[np.ndarray]
    act: list[np.ndarray]
    features: np.ndarray
    logits: np.ndarray


@dataclass
class OptimState:
    momentum: float
    weight_decay: float
    buf_w: list[np.ndarray] = field(default_factory=list)
    buf_b: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0.0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass
class EpochStats:
    mean_loss: float
    accuracy: float
    mean_reg_term: float
    mean_err_term: float


def init_params(cfg: MlpConfig) -> Params:
    """He-style normal init (std = sqrt(2 / fan_in)), zero biases, seeded."""
    rng = np.random.default_rng(cfg.seed)
    dims = [cfg.input_dim, *cfg.hidden_dims, cfg.num_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return Params(weights, biases)


def init_optim(params: Params, momentum: float, weight_decay: float) -> OptimState:
    opt = OptimState(momentum=momentum, weight_decay=weight_decay)
    opt.buf_w = [np.zeros_like(w) for w in params.weights]
    opt.buf_b = [np.zeros_like(b) for b in params.biases]
    return opt


def forward(params: Params, x: np.ndarray) -> ForwardTrace:
    """Run a batch (N, input_dim) through ReLU hidden layers to logits."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[0]:
        raise ValueError(
            f"input must be (N, {params.weights[0].shape[0]}), got shape {x.shape}"
        )
    pre, act = [], []
    a = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = a @ w + b
        pre.append(h)
        a = np.maximum(h, 0.0)
        act.append(a)
    logits = a @ params.weights[-1] + params.biases[-1]
    features = act[-1] if act else x
    return ForwardTrace(x=x, pre=pre, act=act, features=features, logits=logits)


def backward(params: Params, trace: ForwardTrace, dlogits: np.ndarray) -> Grads:
    """Exact parameter gradients given dL/dlogits (ReLU subgradient 0 at 0)."""
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.shape != trace.logits.shape:
        raise ValueError(
            f"dlogits shape {dlogits.shape} does not match logits shape {trace.logits.shape}"
        )
    n_layers = len(params.weights)
    if len(trace.pre) != n_layers - 1:
        raise ValueError("trace does not match the parameter stack")
    gw: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    a_prev = trace.act[-1] if trace.act else trace.x
    gw[-1] = a_prev.T @ dlogits
    gb[-1] = dlogits.sum(axis=0)
    da = dlogits @ params.weights[-1].T
    for i in range(n_layers - 2, -1, -1):
        dh = da * (trace.pre[i] > 0.0)
        a_in = trace.act[i - 1] if i > 0 else trace.x
        gw[i] = a_in.T @ dh
        gb[i] = dh.sum(axis=0)
        if i > 0:
            da = dh @ params.weights[i].T
    return Grads(gw, gb)


def sgd_step(params: Params, grads: Grads, opt: OptimState, lr: float) -> None:
    """In-place SGD with momentum; weight decay applies to weights only."""
    for w, g, buf in zip(params.weights, grads.weights, opt.buf_w):
        buf *= opt.momentum
        buf += g + opt.weight_decay * w
        w -= lr * buf
    for b, g, buf in zip(params.biases, grads.biases, opt.buf_b):
        buf *= opt.momentum
        buf += g
        b -= lr * buf


def shuffled_batches(
    inputs: np.ndarray, labels: np.ndarray, batch_size: int, seed: int, epoch: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split the data into batches after a shuffle keyed by (seed, epoch)."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.random.default_rng([seed, epoch]).permutation(labels.size)
    return [
        (inputs[order[i : i + batch_size]], labels[order[i : i + batch_size]])
        for i in range(0, labels.size, batch_size)
    ]


def train_epoch(
    params: Params,
    opt: OptimState,
    batches: list[tuple[np.ndarray, np.ndarray]],
    spec: RegularizerSpec,
    alpha_now: float,
    lr_now: float,
    mixup_beta: float = 1.0,
    mixup_seed=None,
) -> EpochStats:
    """One pass over the given batches, updating params/opt in place.

    The per-sample loss gradient is averaged over the batch. Stats come
    from the training batches themselves (logits before each update); the
    reg/err columns track the label-smoothing split at alpha_now on those
    logits regardless of the training kind, so the two components stay
    observable across regimes.
    """
    if not batches:
        raise ValueError("train_epoch needs at least one batch")
    if spec.kind == "ls_mixup" and mixup_seed is None:
        raise ValueError("ls_mixup training requires a mixup_seed")
    spec_now = RegularizerSpec(kind=spec.kind, alpha=alpha_now, beta=spec.beta)

    loss_sum = 0.0
    acc_sum = 0.0
    reg_sum = 0.0
    err_sum = 0.0
    n_total = 0
    for batch_idx, (xb, yb) in enumerate(batches):
        if yb.size == 0:
            raise ValueError("empty batch")
        if spec.kind == "ls_mixup":
            pairs = mixup_pairs(np.arange(yb.size), mixup_beta, seed=[*mixup_seed, batch_idx])
            partner = np.array([j for _, j, _ in pairs], dtype=np.int64)
            lam = np.array([l for _, _, l in pairs])
            xb = lam[:, None] * xb + (1.0 - lam)[:, None] * xb[partner]
            y2 = yb[partner]
            trace = forward(params, xb)
            losses, dz = batch_loss_grad(trace.logits, yb, spec_now, mix_partner=y2, mix_lam=lam)
            preds = np.argmax(trace.logits, axis=1)
            acc_sum += float((lam * (preds == yb) + (1.0 - lam) * (preds == y2)).sum())
            reg_b, err_b = batch_ls_split(trace.logits, np.where(lam >= 0.5, yb, y2), alpha_now)
        else:
            trace = forward(params, xb)
            losses, dz = batch_loss_grad(trace.logits, yb, spec_now)
            preds = np.argmax(trace.logits, axis=1)
            acc_sum += float((preds == yb).sum())
            reg_b, err_b = batch_ls_split(trace.logits, yb, alpha_now)
        grads = backward(params, trace, dz / yb.size)
        sgd_step(params, grads, opt, lr_now)
        loss_sum += float(losses.sum())
        reg_sum += float(reg_b.sum())
        err_sum += float(err_b.sum())
        n_total += yb.size
    return EpochStats(
        mean_loss=loss_sum / n_total,
        accuracy=acc_sum / n_total,
        mean_reg_term=reg_sum / n_total,
        mean_err_term=err_sum / n_total,
    )
