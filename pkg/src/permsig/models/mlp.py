"""Three-layer fully connected classifier with manual gradients.

Layout: input -> FC(h1) -> ReLU -> dropout -> FC(h2) -> ReLU -> dropout
-> FC(1) -> logit. Dropout is the inverted kind (activations scaled by
1/(1-p) at train time), so inference needs no rescaling.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, StaleCache
from .common import freeze_params, glorot_uniform, relu


class MlpPredictor:
    kind = "mlp"
    weight_names = ("w1", "w2", "w3")

    def __init__(self, params: dict[str, np.ndarray], dropout_rate: float):
        self.params = params
        self.dropout_rate = float(dropout_rate)

    @classmethod
    def init(cls, input_dim: int, hidden=(64, 32), dropout_rate: float = 0.2,
             rng: np.random.Generator | None = None) -> "MlpPredictor":
        rng = rng if rng is not None else np.random.default_rng(0)
        h1, h2 = hidden
        params = {
            "w1": glorot_uniform(rng, input_dim, h1, (input_dim, h1)),
            "b1": np.zeros(h1),
            "w2": glorot_uniform(rng, h1, h2, (h1, h2)),
            "b2": np.zeros(h2),
            "w3": glorot_uniform(rng, h2, 1, (h2, 1)),
            "b3": np.zeros(1),
        }
        return cls(params, dropout_rate)

    @property
    def input_dim(self) -> int:
        return self.params["w1"].shape[0]

    @property
    def hidden(self) -> tuple[int, int]:
        return (self.params["w1"].shape[1], self.params["w2"].shape[1])

    def _check_input(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise DimensionMismatch(
                f"expected (n, {self.input_dim}) input, got {X.shape}"
            )
        return X

    def logits(self, X: np.ndarray) -> np.ndarray:
        """Inference-mode forward pass (dropout disabled); pure function."""
        X = self._check_input(X)
        p = self.params
        a1 = relu(X @ p["w1"] + p["b1"])
        a2 = relu(a1 @ p["w2"] + p["b2"])
        return (a2 @ p["w3"])[:, 0] + p["b3"][0]

    def forward_train(self, X: np.ndarray, mask_rng: np.random.Generator):
        """Forward pass with dropout; returns (logits, cache) for backward."""
        X = self._check_input(X)
        p = self.params
        rate = self.dropout_rate
        keep = 1.0 - rate

        z1 = X @ p["w1"] + p["b1"]
        a1 = relu(z1)
        if rate > 0.0:
            mask1 = mask_rng.random(a1.shape) >= rate
            d1 = a1 * mask1 / keep
        else:
            mask1 = None
            d1 = a1

        z2 = d1 @ p["w2"] + p["b2"]
        a2 = relu(z2)
        if rate > 0.0:
            mask2 = mask_rng.random(a2.shape) >= rate
            d2 = a2 * mask2 / keep
        else:
            mask2 = None
            d2 = a2

        logits = (d2 @ p["w3"])[:, 0] + p["b3"][0]
        cache = {"kind": "mlp", "X": X, "z1": z1, "mask1": mask1, "d1": d1,
                 "z2": z2, "mask2": mask2, "d2": d2}
        return logits, cache

    def backward(self, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of the scalar loss wrt all parameters.

        ``dlogits`` is dLoss/dlogit per row (any batch reduction already
        applied by the caller).
        """
        if not isinstance(cache, dict) or cache.get("kind") != "mlp":
            raise StaleCache("backward() needs the cache from a train-mode forward()")
        p = self.params
        keep = 1.0 - self.dropout_rate
        X, z1, mask1, d1 = cache["X"], cache["z1"], cache["mask1"], cache["d1"]
        z2, mask2, d2 = cache["z2"], cache["mask2"], cache["d2"]
        dlogits = np.asarray(dlogits, dtype=np.float64)

        dw3 = d2.T @ dlogits[:, None]
        db3 = np.array([dlogits.sum()])
        dd2 = dlogits[:, None] * p["w3"][:, 0]
        da2 = dd2 * mask2 / keep if mask2 is not None else dd2
        dz2 = da2 * (z2 > 0)

        dw2 = d1.T @ dz2
        db2 = dz2.sum(axis=0)
        dd1 = dz2 @ p["w2"].T
        da1 = dd1 * mask1 / keep if mask1 is not None else dd1
        dz1 = da1 * (z1 > 0)

        dw1 = X.T @ dz1
        db1 = dz1.sum(axis=0)
        return {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2, "w3": dw3, "b3": db3}

    def freeze(self) -> None:
        freeze_params(self.params)
