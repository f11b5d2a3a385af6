from __future__ import annotations

import json

import numpy as np
import pytest

from permsig import (
    CategorySchema,
    MetricKind,
    SynthConfig,
    TrainConfig,
    collapse_cross_sectional,
    generate,
    run_cv,
    uniform_block_schema,
)
from permsig.crossval import CvRun, FoldAssignment
from permsig.dataset import fit_standardizer
from permsig.metrics import evaluate
from permsig.models import predict_proba, train


def small_schema() -> CategorySchema:
    return uniform_block_schema(3, 4)


@pytest.fixture(scope="session")
def planted_cs():
    """Cross-sectional dataset with a strong planted category, plus its CvRun."""
    cfg = SynthConfig(n_subjects=120, visits_per_subject=(1, 2), schema=small_schema(),
                      informative_categories=("cat1",), signal_strength=1.5,
                      positive_rate=0.3, seed=7)
    cs = collapse_cross_sectional(generate(cfg))
    cv = run_cv(cs, "mlp", TrainConfig.mlp_defaults(seed=3, epochs=25), 4,
                (MetricKind.BACC, MetricKind.F1), seed=11)
    return cs, cv


@pytest.fixture(scope="session")
def planted_long():
    """Longitudinal dataset (equal visit counts) with planted signal + GRU run."""
    cfg = SynthConfig(n_subjects=60, visits_per_subject=(3, 3), schema=small_schema(),
                      informative_categories=("cat0",), signal_strength=1.5,
                      positive_rate=0.3, seed=9)
    ds = generate(cfg)
    cv = run_cv(ds, "gru", TrainConfig.gru_defaults(seed=3, epochs=8, learning_rate=3e-3),
                3, (MetricKind.BACC, MetricKind.F1), seed=13)
    return ds, cv


def single_fold_cvrun(cs, train_cs, seed=5, epochs=20):
    """Hand-built k=1 run: model trained on a separate dataset, scored on cs.

    stratified_kfold requires k >= 2, but the permutation oracle tests need
    a single scoring unit; the engine only reads folds/models/standardizers.
    """
    st = fit_standardizer(train_cs.X, np.arange(train_cs.n_subjects))
    from permsig.dataset import apply_standardizer

    model = train("mlp", apply_standardizer(st, train_cs.X), train_cs.labels.y,
                  TrainConfig.mlp_defaults(seed=seed, epochs=epochs), hidden=(8, 4))
    fold_of = np.zeros(cs.n_subjects, dtype=np.int64)
    fold_of.flags.writeable = False
    probs = predict_proba(model, apply_standardizer(st, cs.X))
    preds = (probs >= 0.5).astype(np.int64)
    kinds = (MetricKind.BACC, MetricKind.F1)
    psi = {mk.value: evaluate(mk, cs.labels.y, preds) for mk in kinds}
    return CvRun(
        architecture="mlp",
        train_config=TrainConfig.mlp_defaults(seed=seed, epochs=epochs),
        hidden=(8, 4),
        folds=FoldAssignment(1, fold_of),
        models=[model],
        standardizers=[st],
        oof_probs=probs,
        labels=cs.labels,
        subject_ids=cs.subject_ids,
        metric_kinds=kinds,
        psi=psi,
        psi_per_fold={mk.value: [psi[mk.value]] for mk in kinds},
        seed=seed,
    )


def write_schema(path, schema: CategorySchema) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh)
