"""Synthetic longitudinal datasets with planted ground truth.

Labels are Bernoulli draws; features in informative categories are Gaussian
with a mean shifted by ``signal_strength`` for positive subjects; noise
categories are independent of the label. Visits are i.i.d. replicates
around a subject-level latent vector, so the cross-sectional collapse
preserves the planted signal.

Generation is a pure function of the config: every draw comes from a stream
keyed by (seed, tag, subject[, visit]), with features drawn in schema order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Labels, LongitudinalDataset, SubjectRecord
from .errors import InvalidConfig
from .rngstream import TAG_LABEL, TAG_LATENT, TAG_NOISE, TAG_VISITS, check_seed, stream
from .schema import CategorySchema


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int
    visits_per_subject: tuple[int, int]
    schema: CategorySchema
    informative_categories: tuple[str, ...]
    signal_strength: float
    positive_rate: float
    noise_std: float = 1.0
    seed: int = 0
    # When set, informative features additionally drift linearly with the
    # visit index for positive subjects, so sequence models see structure
    # the cross-sectional collapse flattens out.
    temporal_signal: bool = False

    def validate(self) -> None:
        if self.n_subjects < 1:
            raise InvalidConfig("n_subjects must be >= 1")
        lo, hi = self.visits_per_subject
        if lo < 1 or hi < lo:
            raise InvalidConfig(f"visits_per_subject must satisfy 1 <= min <= max, got {self.visits_per_subject}")
        unknown = set(self.informative_categories) - set(self.schema.names)
        if unknown:
            raise InvalidConfig(f"informative categories not in schema: {sorted(unknown)}")
        if not (0.0 < self.positive_rate < 1.0):
            raise InvalidConfig("positive_rate must lie strictly between 0 and 1")
        if self.signal_strength < 0:
            raise InvalidConfig("signal_strength must be >= 0")
        if self.noise_std <= 0:
            raise InvalidConfig("noise_std must be > 0")
        check_seed(self.seed)


def ground_truth(cfg: SynthConfig) -> set[str]:
    """The categories planted as informative (for test harness use)."""
    return set(cfg.informative_categories)


def generate(cfg: SynthConfig) -> LongitudinalDataset:
    """Deterministically generate a dataset with the planted signal."""
    cfg.validate()
    names = cfg.schema.feature_names
    m = len(names)

    shift = np.zeros(m)
    informative = set(cfg.informative_categories)
    for cat in cfg.schema.names:
        if cat in informative:
            shift[cfg.schema.block_slice(cat)] = cfg.signal_strength

    lo, hi = cfg.visits_per_subject
    subjects = []
    for i in range(cfg.n_subjects):
        y_i = int(stream(cfg.seed, TAG_LABEL, i).random() < cfg.positive_rate)
        n_visits = int(stream(cfg.seed, TAG_VISITS, i).integers(lo, hi + 1))
        latent = stream(cfg.seed, TAG_LATENT, i).normal(size=m) + shift * y_i

        visits = np.empty((n_visits, m))
        for t in range(n_visits):
            noise = stream(cfg.seed, TAG_NOISE, i, t).normal(size=m)
            visits[t] = latent + cfg.noise_std * noise
            if cfg.temporal_signal and y_i:
                visits[t] += shift * 0.5 * t

        # positive subjects flag their final visit; derive_labels recovers y
        flags = np.zeros(n_visits, dtype=np.int64)
        if y_i:
            flags[-1] = 1
        visits.flags.writeable = False
        flags.flags.writeable = False
        subjects.append(SubjectRecord(f"S{i:05d}", visits, flags))

    return LongitudinalDataset(tuple(subjects), names, cfg.schema)


def planted_labels(cfg: SynthConfig) -> Labels:
    """The label vector generate(cfg) encodes, without building features."""
    cfg.validate()
    y = np.array(
        [int(stream(cfg.seed, TAG_LABEL, i).random() < cfg.positive_rate) for i in range(cfg.n_subjects)],
        dtype=np.int64,
    )
    return Labels(y)


def uniform_block_schema(n_categories: int, cols_per_category: int, prefix: str = "cat") -> CategorySchema:
    """Convenience schema: C categories of equal width with generated names."""
    cats = []
    for c in range(n_categories):
        name = f"{prefix}{c}"
        cols = tuple(f"{name}_f{j}" for j in range(cols_per_category))
        cats.append((name, cols))
    return CategorySchema(tuple(cats))
