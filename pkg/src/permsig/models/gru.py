"""Gated-recurrent sequence-to-one classifier with manual backprop in time.

Cell (per visit x_t, previous hidden h):
    r = sigmoid(wr x + ur h + br)          reset gate
    z = sigmoid(wz x + uz h + bz)          update gate
    hbar = tanh(wh x + r * (uh h) + bh)    candidate
    h' = z * h + (1 - z) * hbar
The final hidden state feeds two FC layers (ReLU between) to one logit.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, EmptySequence, StaleCache
from .common import freeze_params, glorot_uniform, relu, sigmoid


class GruPredictor:
    kind = "gru"
    weight_names = ("wr", "ur", "wz", "uz", "wh", "uh", "a1", "a2")

    def __init__(self, params: dict[str, np.ndarray], dropout_rate: float = 0.0):
        self.params = params
        self.dropout_rate = float(dropout_rate)  # kept for interface parity; unused

    @classmethod
    def init(cls, input_dim: int, hidden=(32, 16), dropout_rate: float = 0.0,
             rng: np.random.Generator | None = None) -> "GruPredictor":
        rng = rng if rng is not None else np.random.default_rng(0)
        H, F = hidden
        m = input_dim
        params = {
            "wr": glorot_uniform(rng, m, H, (H, m)),
            "ur": glorot_uniform(rng, H, H, (H, H)),
            "br": np.zeros(H),
            "wz": glorot_uniform(rng, m, H, (H, m)),
            "uz": glorot_uniform(rng, H, H, (H, H)),
            "bz": np.zeros(H),
            "wh": glorot_uniform(rng, m, H, (H, m)),
            "uh": glorot_uniform(rng, H, H, (H, H)),
            "bh": np.zeros(H),
            "a1": glorot_uniform(rng, H, F, (F, H)),
            "c1": np.zeros(F),
            "a2": glorot_uniform(rng, F, 1, (F,)),
            "c2": np.zeros(1),
        }
        return cls(params, dropout_rate)

    @property
    def input_dim(self) -> int:
        return self.params["wr"].shape[1]

    @property
    def hidden(self) -> tuple[int, int]:
        return (self.params["wr"].shape[0], self.params["a1"].shape[0])

    def _check_seq(self, seq: np.ndarray) -> np.ndarray:
        seq = np.asarray(seq, dtype=np.float64)
        if seq.ndim != 2 or seq.shape[1] != self.input_dim:
            raise DimensionMismatch(f"expected (T, {self.input_dim}) sequence, got {seq.shape}")
        if seq.shape[0] == 0:
            raise EmptySequence("sequence has no visits")
        return seq

    def logits(self, sequences) -> np.ndarray:
        """Inference over a collection of variable-length visit sequences.

        Batched over subjects with a per-row active mask: the hidden state
        stops updating once a subject's sequence ends, so each row's output
        equals running its own sequence alone.
        """
        seqs = [self._check_seq(s) for s in sequences]
        p = self.params
        H = p["ur"].shape[0]
        B = len(seqs)
        lengths = np.array([s.shape[0] for s in seqs])
        tmax = int(lengths.max()) if B else 0
        padded = np.zeros((B, tmax, self.input_dim))
        for i, s in enumerate(seqs):
            padded[i, : s.shape[0]] = s

        h = np.zeros((B, H))
        for t in range(tmax):
            xt = padded[:, t, :]
            r = sigmoid(xt @ p["wr"].T + h @ p["ur"].T + p["br"])
            z = sigmoid(xt @ p["wz"].T + h @ p["uz"].T + p["bz"])
            hbar = np.tanh(xt @ p["wh"].T + r * (h @ p["uh"].T) + p["bh"])
            h_new = z * h + (1.0 - z) * hbar
            active = (t < lengths)[:, None]
            h = np.where(active, h_new, h)

        q1 = relu(h @ p["a1"].T + p["c1"])
        return q1 @ p["a2"] + p["c2"][0]

    def forward_train(self, seq: np.ndarray, mask_rng=None):
        """Single-sequence forward with cached intermediates for backward."""
        seq = self._check_seq(seq)
        p = self.params
        H = p["ur"].shape[0]
        h = np.zeros(H)
        steps = []
        for t in range(seq.shape[0]):
            x = seq[t]
            h_prev = h
            r = sigmoid(p["wr"] @ x + p["ur"] @ h_prev + p["br"])
            z = sigmoid(p["wz"] @ x + p["uz"] @ h_prev + p["bz"])
            uh_h = p["uh"] @ h_prev
            hbar = np.tanh(p["wh"] @ x + r * uh_h + p["bh"])
            h = z * h_prev + (1.0 - z) * hbar
            steps.append({"x": x, "h_prev": h_prev, "r": r, "z": z,
                          "uh_h": uh_h, "hbar": hbar})
        v1 = p["a1"] @ h + p["c1"]
        q1 = relu(v1)
        logit = float(p["a2"] @ q1 + p["c2"][0])
        cache = {"kind": "gru", "steps": steps, "h_final": h, "v1": v1, "q1": q1}
        return logit, cache

    def backward(self, cache, dlogit: float) -> dict[str, np.ndarray]:
        """Exact gradients through the head and the full recurrence."""
        if not isinstance(cache, dict) or cache.get("kind") != "gru":
            raise StaleCache("backward() needs the cache from a train-mode forward()")
        p = self.params
        grads = {k: np.zeros_like(v) for k, v in p.items()}

        q1, v1, h_final = cache["q1"], cache["v1"], cache["h_final"]
        grads["a2"] += dlogit * q1
        grads["c2"] += dlogit
        dq1 = dlogit * p["a2"]
        dv1 = dq1 * (v1 > 0)
        grads["a1"] += np.outer(dv1, h_final)
        grads["c1"] += dv1
        dh = p["a1"].T @ dv1

        for step in reversed(cache["steps"]):
            x, h_prev = step["x"], step["h_prev"]
            r, z, uh_h, hbar = step["r"], step["z"], step["uh_h"], step["hbar"]

            dz = dh * (h_prev - hbar)
            dhbar = dh * (1.0 - z)
            dah = dhbar * (1.0 - hbar * hbar)
            dr = dah * uh_h
            dar = dr * r * (1.0 - r)
            daz = dz * z * (1.0 - z)

            grads["wh"] += np.outer(dah, x)
            grads["bh"] += dah
            grads["uh"] += np.outer(dah * r, h_prev)
            grads["wr"] += np.outer(dar, x)
            grads["br"] += dar
            grads["ur"] += np.outer(dar, h_prev)
            grads["wz"] += np.outer(daz, x)
            grads["bz"] += daz
            grads["uz"] += np.outer(daz, h_prev)

            dh = dh * z + p["uh"].T @ (dah * r) + p["ur"].T @ dar + p["uz"].T @ daz
        return grads

    def freeze(self) -> None:
        freeze_params(self.params)
