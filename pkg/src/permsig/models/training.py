"""Loss, optimizer, and the full training loop for both architectures."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import (
    InvalidConfig,
    NonFiniteLoss,
    ShapeMismatch,
    SingleClassTrainingSet,
)
from ..rngstream import TAG_DROPOUT, TAG_INIT, TAG_SHUFFLE, check_seed, stream
from .common import sigmoid
from .gru import GruPredictor
from .mlp import MlpPredictor

DEFAULT_MLP_HIDDEN = (64, 32)
DEFAULT_GRU_HIDDEN = (32, 16)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float
    l1_lambda: float = 1e-4
    class_weight_R: float | None = None  # None: N_negative / N_positive on the training rows
    dropout_rate: float = 0.0
    batch_size: int | None = None        # None: full batch
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be > 0")
        if self.l1_lambda < 0:
            raise InvalidConfig("l1_lambda must be >= 0")
        if self.class_weight_R is not None and self.class_weight_R <= 0:
            raise InvalidConfig("class_weight_R must be > 0")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise InvalidConfig("dropout_rate must lie in [0, 1)")
        if self.batch_size is not None and self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        check_seed(self.seed)

    @classmethod
    def mlp_defaults(cls, seed: int = 0, **overrides) -> "TrainConfig":
        cfg = cls(epochs=55, learning_rate=1e-3, dropout_rate=0.2,
                  batch_size=32, seed=seed)
        return replace(cfg, **overrides) if overrides else cfg

    @classmethod
    def gru_defaults(cls, seed: int = 0, **overrides) -> "TrainConfig":
        cfg = cls(epochs=30, learning_rate=1e-4, dropout_rate=0.0,
                  batch_size=32, seed=seed)
        return replace(cfg, **overrides) if overrides else cfg


def weighted_bce(logit: float, y: int, R: float) -> float:
    """-[R y log(sigmoid(z)) + (1-y) log(1-sigmoid(z))], evaluated stably.

    Uses softplus(x) = max(x, 0) + log1p(exp(-|x|)), which is exact for any
    finite logit (well past |z| = 500).
    """
    z = float(logit)
    sp_neg = max(-z, 0.0) + math.log1p(math.exp(-abs(z)))  # softplus(-z)
    sp_pos = max(z, 0.0) + math.log1p(math.exp(-abs(z)))   # softplus(z)
    return R * y * sp_neg + (1 - y) * sp_pos


def weighted_bce_batch(logits: np.ndarray, y: np.ndarray, R: float) -> np.ndarray:
    """Per-sample weighted BCE for a batch of logits."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    tail = np.log1p(np.exp(-np.abs(z)))
    sp_neg = np.maximum(-z, 0.0) + tail  # softplus(-z)
    sp_pos = np.maximum(z, 0.0) + tail   # softplus(z)
    return R * y * sp_neg + (1.0 - y) * sp_pos


def bce_grad(logits: np.ndarray, y: np.ndarray, R: float) -> np.ndarray:
    """d(weighted BCE)/d(logit) per sample."""
    s = sigmoid(logits)
    y = np.asarray(y, dtype=np.float64)
    return R * y * (s - 1.0) + (1.0 - y) * s


def l1_penalty(model, lam: float) -> float:
    """lam * sum of |w| over weight matrices; biases excluded."""
    if lam == 0.0:
        return 0.0
    return lam * float(sum(np.abs(model.params[k]).sum() for k in model.weight_names))


class Adam:
    """Standard Adam with bias correction; state keyed like the params."""

    def __init__(self, params: dict[str, np.ndarray], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for k, p in params.items():
            g = grads[k]
            if g.shape != p.shape:
                raise ShapeMismatch(f"gradient for {k!r} has shape {g.shape}, parameter {p.shape}")
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _class_weight(y: np.ndarray, config: TrainConfig) -> float:
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClassTrainingSet("training rows must contain both classes")
    if config.class_weight_R is not None:
        return float(config.class_weight_R)
    return n_neg / n_pos


def _batches(n: int, config: TrainConfig, epoch: int):
    if config.batch_size is None or config.batch_size >= n:
        yield np.arange(n)
        return
    order = stream(config.seed, TAG_SHUFFLE, epoch).permutation(n)
    for start in range(0, n, config.batch_size):
        yield order[start : start + config.batch_size]


def train(architecture: str, X, y, config: TrainConfig, hidden=None):
    """Run the full loop (mini-batches, dropout, Adam, L1); deterministic.

    ``X`` is an (n, m) matrix for "mlp" or a list of (T_i, m) visit
    sequences for "gru". Returns a frozen predictor.
    """
    y = np.asarray(y, dtype=np.int64)
    R = _class_weight(y, config)
    init_rng = stream(config.seed, TAG_INIT)

    if architecture == "mlp":
        X = np.asarray(X, dtype=np.float64)
        model = MlpPredictor.init(X.shape[1], hidden or DEFAULT_MLP_HIDDEN,
                                  config.dropout_rate, init_rng)
        n = X.shape[0]
    elif architecture == "gru":
        X = [np.asarray(s, dtype=np.float64) for s in X]
        model = GruPredictor.init(X[0].shape[1], hidden or DEFAULT_GRU_HIDDEN,
                                  config.dropout_rate, init_rng)
        n = len(X)
    else:
        raise InvalidConfig(f"unknown architecture {architecture!r}")
    if n != len(y):
        raise InvalidConfig(f"{n} training inputs but {len(y)} labels")

    opt = Adam(model.params, config.learning_rate, config.beta1, config.beta2, config.eps)
    lam = config.l1_lambda

    for epoch in range(config.epochs):
        for bi, idx in enumerate(_batches(n, config, epoch)):
            yb = y[idx]
            nb = len(idx)
            if architecture == "mlp":
                mask_rng = stream(config.seed, TAG_DROPOUT, epoch, bi)
                logits, cache = model.forward_train(X[idx], mask_rng)
                loss = float(np.mean(weighted_bce_batch(logits, yb, R))) + l1_penalty(model, lam)
                if not math.isfinite(loss):
                    raise NonFiniteLoss(f"loss diverged at epoch {epoch}")
                dlogits = bce_grad(logits, yb, R) / nb
                grads = model.backward(cache, dlogits)
            else:
                logits = np.empty(nb)
                grads = {k: np.zeros_like(v) for k, v in model.params.items()}
                for j, i in enumerate(idx):
                    logit, cache = model.forward_train(X[i])
                    logits[j] = logit
                    dlogit = float(bce_grad(np.array([logit]), yb[j : j + 1], R)[0]) / nb
                    g = model.backward(cache, dlogit)
                    for k in grads:
                        grads[k] += g[k]
                loss = float(np.mean(weighted_bce_batch(logits, yb, R))) + l1_penalty(model, lam)
                if not math.isfinite(loss):
                    raise NonFiniteLoss(f"loss diverged at epoch {epoch}")

            if lam > 0.0:
                for k in model.weight_names:
                    grads[k] = grads[k] + lam * np.sign(model.params[k])
            opt.step(model.params, grads)

    model.freeze()
    return model


def predict_proba(model, X) -> np.ndarray:
    """sigmoid(logit) per subject; pure, safe to call concurrently."""
    return sigmoid(model.logits(X))


def predict(model, X, threshold: float = 0.5) -> np.ndarray:
    """Binary labels; probability exactly at the threshold counts positive."""
    return (predict_proba(model, X) >= threshold).astype(np.int64)
