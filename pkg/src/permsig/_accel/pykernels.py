"""Pure-numpy trial-scoring kernels (the always-available fallback).

Each trial copies the scored rows, overwrites the permuted column block
with the donors' values, and runs the model's own inference code. Inputs
that coincide with the unpermuted data therefore produce bit-identical
logits to the plain prediction path.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def mlp_block_trials(model, Xs: np.ndarray, rows: np.ndarray,
                     block_cols: np.ndarray, perms: np.ndarray) -> np.ndarray:
    """Logits for every trial of one chunk.

    Xs: (N, m) standardized matrix covering all subjects.
    rows: (nt,) global indices of the subjects being scored.
    block_cols: column indices whose values are taken from donor rows.
    perms: (T, nt) global donor row index per scored subject, per trial.
    Returns (T, nt) logits.
    """
    base = Xs[rows]
    block = Xs[:, block_cols]
    out = np.empty((perms.shape[0], len(rows)))
    for ti in range(perms.shape[0]):
        Xt = base.copy()
        Xt[:, block_cols] = block[perms[ti]]
        out[ti] = model.logits(Xt)
    return out


def gru_block_trials(model, padded: np.ndarray, lengths: np.ndarray, rows: np.ndarray,
                     block_cols: np.ndarray, perms: np.ndarray) -> np.ndarray:
    """Same contract for visit sequences; donors share the receiver's length.

    padded: (N, Tmax, m) standardized visit tensor, zero past each length.
    Returns (T, nt) logits.
    """
    out = np.empty((perms.shape[0], len(rows)))
    for ti in range(perms.shape[0]):
        trial_seqs = []
        for i, r in enumerate(rows):
            donor = perms[ti][i]
            if donor == r:
                trial_seqs.append(padded[r, : lengths[r]])
                continue
            s = padded[r, : lengths[r]].copy()
            s[:, block_cols] = padded[donor, : lengths[r]][:, block_cols]
            trial_seqs.append(s)
        out[ti] = model.logits(trial_seqs)
    return out
