"""Versioned JSON model format; round-trips weights bit-faithfully.

json encodes doubles via repr (shortest string that parses back to the same
double), so save -> load reproduces every parameter exactly.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import DataFormatError
from .gru import GruPredictor
from .mlp import MlpPredictor

FORMAT_VERSION = 1

_KINDS = {"mlp": MlpPredictor, "gru": GruPredictor}


def model_to_dict(model) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "input_dim": model.input_dim,
        "hidden": list(model.hidden),
        "dropout_rate": model.dropout_rate,
        "params": {k: v.tolist() for k, v in model.params.items()},
    }


def model_from_dict(obj: dict):
    if obj.get("format_version") != FORMAT_VERSION:
        raise DataFormatError(f"unsupported model format version {obj.get('format_version')!r}")
    kind = obj.get("kind")
    if kind not in _KINDS:
        raise DataFormatError(f"unknown model kind {kind!r}")
    params = {k: np.array(v, dtype=np.float64) for k, v in obj["params"].items()}
    model = _KINDS[kind](params, obj["dropout_rate"])
    model.freeze()
    return model


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
