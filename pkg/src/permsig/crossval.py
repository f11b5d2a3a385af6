"""Stratified subject-level k-fold cross-validation.

Produces per-fold trained models, per-fold standardizers (fit on training
rows only), pooled out-of-fold predictions, and the true accuracy values the
permutation test is anchored to.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict

import numpy as np

from .dataset import (
    CrossSectionalDataset,
    Labels,
    LongitudinalDataset,
    Standardizer,
    apply_standardizer,
    derive_labels,
    fit_sequence_standardizer,
    fit_standardizer,
)
from .errors import DataFormatError, InvalidConfig, TooFewSubjects
from .metrics import MetricKind, evaluate
from .models import TrainConfig, predict_proba, train
from .models.serialize import load_model, save_model
from .rngstream import TAG_FOLD, check_seed, derive_seed, stream


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: np.ndarray  # (n,), fold index per subject

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


def stratified_kfold(y: Labels | np.ndarray, k: int, seed: int) -> FoldAssignment:
    """Shuffle each class, deal round-robin: per-class fold counts differ <= 1."""
    y = y.y if isinstance(y, Labels) else np.asarray(y)
    if k < 2:
        raise InvalidConfig(f"k must be >= 2, got {k}")
    check_seed(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if len(members) < k:
            raise TooFewSubjects(f"class {cls} has {len(members)} subjects, fewer than k={k}")
        order = stream(seed, TAG_FOLD, cls).permutation(len(members))
        for pos, idx in enumerate(members[order]):
            fold_of[idx] = pos % k
    fold_of.flags.writeable = False
    return FoldAssignment(k, fold_of)


@dataclass
class CvRun:
    architecture: str
    train_config: TrainConfig
    hidden: tuple
    folds: FoldAssignment
    models: list
    standardizers: list[Standardizer]
    oof_probs: np.ndarray
    labels: Labels
    subject_ids: tuple[str, ...]
    metric_kinds: tuple[MetricKind, ...]
    psi: dict[str, float]                 # pooled out-of-fold accuracy per metric
    psi_per_fold: dict[str, list[float]]  # fold-level accuracy per metric
    seed: int
    dataset_digest: str | None = None

    @property
    def k(self) -> int:
        return self.folds.k


def _features_for(ds, architecture: str):
    if architecture == "mlp":
        if not isinstance(ds, CrossSectionalDataset):
            raise InvalidConfig("mlp architecture needs a cross-sectional dataset")
        return ds.X
    if architecture == "gru":
        if not isinstance(ds, LongitudinalDataset):
            raise InvalidConfig("gru architecture needs a longitudinal dataset")
        return ds.sequences()
    raise InvalidConfig(f"unknown architecture {architecture!r}")


def dataset_labels(ds) -> Labels:
    return ds.labels if isinstance(ds, CrossSectionalDataset) else derive_labels(ds)


def run_cv(ds, architecture: str, train_config: TrainConfig, k: int,
           metric_kinds=(MetricKind.BACC, MetricKind.F1), seed: int = 0,
           hidden=None, dataset_digest: str | None = None) -> CvRun:
    """Train one model per fold and pool out-of-fold predictions.

    For each fold: standardizer and class weight come from the training
    split only; the held-out subjects are scored by the one model that
    never saw them. Deterministic given ``seed`` (per-fold training seeds
    are derived from it).
    """
    labels = dataset_labels(ds)
    feats = _features_for(ds, architecture)
    folds = stratified_kfold(labels, k, seed)
    n = len(labels)

    models, standardizers = [], []
    oof = np.full(n, np.nan)
    for t in range(k):
        train_rows = folds.train_rows(t)
        test_rows = folds.test_rows(t)
        fold_config = _with_seed(train_config, derive_seed(seed, TAG_FOLD, t))
        if architecture == "mlp":
            st = fit_standardizer(feats, train_rows)
            Xtr = apply_standardizer(st, feats[train_rows])
            model = train("mlp", Xtr, labels.y[train_rows], fold_config, hidden=hidden)
            probs = predict_proba(model, apply_standardizer(st, feats[test_rows]))
        else:
            st = fit_sequence_standardizer(feats, train_rows)
            seq_tr = [apply_standardizer(st, feats[i]) for i in train_rows]
            model = train("gru", seq_tr, labels.y[train_rows], fold_config, hidden=hidden)
            seq_te = [apply_standardizer(st, feats[i]) for i in test_rows]
            probs = predict_proba(model, seq_te)
        models.append(model)
        standardizers.append(st)
        oof[test_rows] = probs

    oof.flags.writeable = False
    preds = (oof >= 0.5).astype(np.int64)
    kinds = tuple(MetricKind(mk) for mk in metric_kinds)
    psi = {mk.value: evaluate(mk, labels.y, preds) for mk in kinds}
    psi_per_fold = {
        mk.value: [
            evaluate(mk, labels.y[folds.test_rows(t)], preds[folds.test_rows(t)])
            for t in range(k)
        ]
        for mk in kinds
    }
    return CvRun(
        architecture=architecture,
        train_config=train_config,
        hidden=tuple(hidden) if hidden else None,
        folds=folds,
        models=models,
        standardizers=standardizers,
        oof_probs=oof,
        labels=labels,
        subject_ids=tuple(_subject_ids(ds)),
        metric_kinds=kinds,
        psi=psi,
        psi_per_fold=psi_per_fold,
        seed=seed,
        dataset_digest=dataset_digest,
    )


def _subject_ids(ds):
    return ds.subject_ids


def _with_seed(config: TrainConfig, seed: int) -> TrainConfig:
    from dataclasses import replace

    return replace(config, seed=seed)


# -- persistence -------------------------------------------------------------

def save_cvrun(run: CvRun, directory) -> None:
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "architecture": run.architecture,
        "train_config": asdict(run.train_config),
        "hidden": list(run.hidden) if run.hidden else None,
        "k": run.k,
        "fold_of": run.folds.fold_of.tolist(),
        "standardizers": [
            {"mean": st.mean.tolist(), "std": st.std.tolist()} for st in run.standardizers
        ],
        "metric_kinds": [mk.value for mk in run.metric_kinds],
        "psi": run.psi,
        "psi_per_fold": run.psi_per_fold,
        "seed": run.seed,
        "dataset_digest": run.dataset_digest,
        "labels": run.labels.y.tolist(),
        "subject_ids": list(run.subject_ids),
    }
    with open(directory / "cvrun.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    with open(directory / "folds.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subject_id", "fold"])
        for i, sid in enumerate(run.subject_ids):
            writer.writerow([sid, int(run.folds.fold_of[i])])
    for t, model in enumerate(run.models):
        save_model(model, directory / f"model_fold{t}.json")
    with open(directory / "oof.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subject_id", "fold", "probability", "label"])
        for i, sid in enumerate(run.subject_ids):
            writer.writerow([sid, int(run.folds.fold_of[i]), repr(float(run.oof_probs[i])),
                             int(run.labels.y[i])])


def load_cvrun(directory) -> CvRun:
    from pathlib import Path

    directory = Path(directory)
    meta_path = directory / "cvrun.json"
    if not meta_path.exists():
        raise DataFormatError(f"{directory} does not contain cvrun.json")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    fold_of = np.array(meta["fold_of"], dtype=np.int64)
    fold_of.flags.writeable = False
    folds = FoldAssignment(meta["k"], fold_of)
    standardizers = [
        Standardizer(np.array(st["mean"]), np.array(st["std"]))
        for st in meta["standardizers"]
    ]
    models = [load_model(directory / f"model_fold{t}.json") for t in range(meta["k"])]
    oof = np.full(len(fold_of), np.nan)
    with open(directory / "oof.csv", "r", encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            oof[i] = float(row["probability"])
    oof.flags.writeable = False
    y = np.array(meta["labels"], dtype=np.int64)
    y.flags.writeable = False
    return CvRun(
        architecture=meta["architecture"],
        train_config=TrainConfig(**meta["train_config"]),
        hidden=tuple(meta["hidden"]) if meta["hidden"] else None,
        folds=folds,
        models=models,
        standardizers=standardizers,
        oof_probs=oof,
        labels=Labels(y),
        subject_ids=tuple(meta["subject_ids"]),
        metric_kinds=tuple(MetricKind(v) for v in meta["metric_kinds"]),
        psi=meta["psi"],
        psi_per_fold=meta["psi_per_fold"],
        seed=meta["seed"],
        dataset_digest=meta["dataset_digest"],
    )
