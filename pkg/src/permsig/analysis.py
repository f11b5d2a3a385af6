"""Workflows on top of the core test: specificity retraining, hierarchical
sub-category testing, and per-feature permutation importance."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .crossval import CvRun, run_cv
from .dataset import CrossSectionalDataset, LongitudinalDataset, SubjectRecord
from .errors import DegenerateSubset, InvalidSubSchema
from .metrics import MetricKind
from .permeng import PermutationPlan, null_distribution, p_value
from .rngstream import TAG_FEATURE, derive_seed
from .schema import CategorySchema


@dataclass(frozen=True)
class SubSchema:
    """Partition of one parent category's columns into named sub-blocks."""

    parent: str
    subcategories: tuple[tuple[str, tuple[str, ...]], ...]

    def validate(self, schema: CategorySchema) -> None:
        parent_cols = schema.columns_of(self.parent)
        if not self.subcategories:
            raise InvalidSubSchema("sub-schema has no subcategories")
        names = [n for n, _ in self.subcategories]
        if len(set(names)) != len(names):
            raise InvalidSubSchema("duplicate sub-category name")
        claimed: list[str] = []
        for name, cols in self.subcategories:
            if not cols:
                raise InvalidSubSchema(f"sub-category {name!r} has no columns")
            claimed.extend(cols)
        if sorted(claimed) != sorted(parent_cols):
            raise InvalidSubSchema(
                f"sub-categories must exactly partition the {len(parent_cols)} columns "
                f"of {self.parent!r}"
            )


@dataclass(frozen=True)
class SpecificityReport:
    """run_cv accuracy for all / only-significant / only-nonsignificant inputs."""

    significant: tuple[str, ...]
    rows: dict[str, dict[str, float]]  # row -> metric value

    ROW_ORDER = ("all", "only_significant", "only_nonsignificant")


@dataclass(frozen=True)
class FeatureImportance:
    """Mean accuracy drop under single-column permutation, ranked descending."""

    entries: tuple[tuple[str, float], ...]  # (feature name, importance)
    metric: MetricKind
    n_trials: int


def subset_by_categories(ds, names):
    """Dataset restricted to the columns of the given categories."""
    sub_schema = ds.schema.subset(names)
    idx = ds.schema.column_indices(sub_schema.feature_names)
    if isinstance(ds, CrossSectionalDataset):
        X = ds.X[:, idx].copy()
        X.flags.writeable = False
        return CrossSectionalDataset(X, ds.labels, sub_schema, ds.subject_ids)
    subjects = []
    for s in ds.subjects:
        visits = s.visits[:, idx].copy()
        visits.flags.writeable = False
        subjects.append(SubjectRecord(s.subject_id, visits, s.visit_labels))
    return LongitudinalDataset(tuple(subjects), sub_schema.feature_names, sub_schema)


def specificity_study(ds, significant, architecture: str, train_config, k: int,
                      seed: int, metric_kinds=(MetricKind.BACC, MetricKind.F1),
                      hidden=None) -> SpecificityReport:
    """Three independent cross-validation runs: all columns, only the
    significant categories' columns, and only the complement."""
    all_names = ds.schema.names
    significant = tuple(n for n in all_names if n in set(significant))
    rest = tuple(n for n in all_names if n not in set(significant))
    if not significant or not rest:
        raise DegenerateSubset(
            "significant categories must be a non-empty proper subset "
            f"(got {len(significant)} of {len(all_names)})"
        )
    rows = {}
    for row, subset in (("all", all_names), ("only_significant", significant),
                        ("only_nonsignificant", rest)):
        run = run_cv(subset_by_categories(ds, subset) if subset != all_names else ds,
                     architecture, train_config, k, metric_kinds, seed, hidden=hidden)
        rows[row] = dict(run.psi)
    return SpecificityReport(significant=significant, rows=rows)


def hierarchical_test(cv: CvRun, ds, sub: SubSchema, plan: PermutationPlan,
                      threads: int = 1, keep_nulls: bool = False):
    """Permutation test per sub-block, reusing the parent's frozen models.

    Every sub-category uses ``plan.seed`` directly, so the identity
    partition (one sub-category equal to the parent) reproduces the parent
    category's test exactly. Results come back in sub-schema order.
    """
    sub.validate(ds.schema)
    psi_true = cv.psi[MetricKind(plan.metric).value]
    results = []
    for name, cols in sub.subcategories:
        idx = ds.schema.column_indices(cols)
        sub_plan = replace(plan, category=name)
        null = null_distribution(cv, ds, sub_plan, columns=idx, threads=threads)
        res = p_value(null, psi_true, plan.tie_rule, plan.smoothing)
        results.append((res, null) if keep_nulls else res)
    return results


def feature_importance(cv: CvRun, ds, n_trials: int = 30, seed: int = 0,
                       metric: MetricKind = MetricKind.BACC,
                       threads: int = 1) -> FeatureImportance:
    """Single-column permutation importance against the frozen run.

    importance(f) = mean over trials of (psi_true - psi_hat) in pooled
    mode, so a column the model never uses (e.g. a constant one) scores
    exactly zero. Ranked descending; ties keep schema column order.
    """
    metric = MetricKind(metric)
    psi_true = cv.psi[metric.value]
    names = ds.schema.feature_names
    scores = np.empty(len(names))
    for fi in range(len(names)):
        plan = PermutationPlan(category=f"feature:{names[fi]}", n_trials=n_trials,
                               mode="pooled", metric=metric,
                               seed=derive_seed(seed, TAG_FEATURE, fi))
        null = null_distribution(cv, ds, plan, columns=[fi], threads=threads)
        scores[fi] = float(np.mean(psi_true - null.samples))
    order = sorted(range(len(names)), key=lambda i: (-scores[i], i))
    entries = tuple((names[i], float(scores[i])) for i in order)
    return FeatureImportance(entries=entries, metric=metric, n_trials=n_trials)
