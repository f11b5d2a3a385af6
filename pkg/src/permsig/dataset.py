"""Tabular longitudinal data: loading, validation, labels, collapse, scaling.

File format (CSV, UTF-8, header row): ``subject_id`` (text),
``visit_index`` (non-negative integer), ``symptom`` (0/1), then one column
per feature. Rows sharing a subject_id form one subject, ordered by
visit_index. Feature columns are rearranged at load to match the schema, so
each category occupies a contiguous column block.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataFormatError,
    DimensionMismatch,
    DuplicateVisit,
    EmptyRowSet,
    MissingColumn,
    NonFiniteValue,
    SchemaIncomplete,
)
from .schema import CategorySchema

RESERVED_COLUMNS = ("subject_id", "visit_index", "symptom")


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: str
    visits: np.ndarray        # (n_visits, m), time order
    visit_labels: np.ndarray  # (n_visits,), 0/1 per visit

    @property
    def n_visits(self) -> int:
        return self.visits.shape[0]


@dataclass(frozen=True)
class Labels:
    y: np.ndarray  # (n,), values in {0, 1}

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_positive(self) -> int:
        return int(self.y.sum())

    @property
    def n_negative(self) -> int:
        return int(len(self.y) - self.y.sum())


@dataclass(frozen=True)
class LongitudinalDataset:
    subjects: tuple[SubjectRecord, ...]
    feature_names: tuple[str, ...]
    schema: CategorySchema

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def subject_ids(self) -> tuple[str, ...]:
        return tuple(s.subject_id for s in self.subjects)

    def sequences(self) -> list[np.ndarray]:
        return [s.visits for s in self.subjects]

    def visit_counts(self) -> np.ndarray:
        return np.array([s.n_visits for s in self.subjects], dtype=np.int64)


@dataclass(frozen=True)
class CrossSectionalDataset:
    X: np.ndarray  # (n, m); row i = mean of subject i's visit vectors
    labels: Labels
    schema: CategorySchema
    subject_ids: tuple[str, ...]

    @property
    def n_subjects(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.schema.feature_names


def load_dataset(data_path, schema_path) -> LongitudinalDataset:
    """Load and validate a CSV + schema pair.

    Raises MissingColumn, NonFiniteValue (naming the offending data row),
    DuplicateVisit, SchemaOverlap, SchemaIncomplete, DataFormatError.
    """
    schema = CategorySchema.from_json(schema_path)
    with open(data_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{data_path}: empty file") from None
        rows = list(reader)
    return _assemble(header, rows, schema, str(data_path))


def _assemble(header, rows, schema: CategorySchema, origin: str) -> LongitudinalDataset:
    for required in RESERVED_COLUMNS:
        if required not in header:
            raise MissingColumn(f"{origin}: required column {required!r} missing")
    col_pos = {name: i for i, name in enumerate(header)}
    if len(col_pos) != len(header):
        raise DataFormatError(f"{origin}: duplicate column name in header")

    data_features = [c for c in header if c not in RESERVED_COLUMNS]
    schema_features = schema.feature_names
    missing = [c for c in schema_features if c not in col_pos]
    if missing:
        raise MissingColumn(f"{origin}: schema column {missing[0]!r} not in data")
    extra = [c for c in data_features if c not in set(schema_features)]
    if extra:
        raise SchemaIncomplete(f"{origin}: data column {extra[0]!r} belongs to no category")

    feat_idx = [col_pos[c] for c in schema_features]
    sid_i, vis_i, sym_i = (col_pos[c] for c in RESERVED_COLUMNS)

    # subjects kept in first-appearance order; visits sorted by visit_index
    per_subject: dict[str, list[tuple[int, np.ndarray, int]]] = {}
    order: list[str] = []
    seen_visits: set[tuple[str, int]] = set()
    m = len(schema_features)

    for lineno, row in enumerate(rows, start=2):  # header is line 1
        if len(row) != len(header):
            raise DataFormatError(f"{origin}: line {lineno} has {len(row)} fields, expected {len(header)}")
        sid = row[sid_i]
        if not sid:
            raise DataFormatError(f"{origin}: line {lineno} has empty subject_id")
        try:
            visit_index = int(row[vis_i])
        except ValueError:
            raise DataFormatError(f"{origin}: line {lineno} has non-integer visit_index {row[vis_i]!r}") from None
        if visit_index < 0:
            raise DataFormatError(f"{origin}: line {lineno} has negative visit_index")
        if row[sym_i] not in ("0", "1"):
            raise DataFormatError(f"{origin}: line {lineno} has symptom {row[sym_i]!r}, expected 0 or 1")
        symptom = int(row[sym_i])

        key = (sid, visit_index)
        if key in seen_visits:
            raise DuplicateVisit(f"{origin}: subject {sid!r} visit {visit_index} appears twice (line {lineno})")
        seen_visits.add(key)

        values = np.empty(m, dtype=np.float64)
        for j, src in enumerate(feat_idx):
            try:
                v = float(row[src])
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise NonFiniteValue(
                    f"{origin}: line {lineno}, column {schema_features[j]!r}: "
                    f"value {row[src]!r} is not a finite number"
                )
            values[j] = v

        if sid not in per_subject:
            per_subject[sid] = []
            order.append(sid)
        per_subject[sid].append((visit_index, values, symptom))

    if not order:
        raise DataFormatError(f"{origin}: no data rows")

    subjects = []
    for sid in order:
        entries = sorted(per_subject[sid], key=lambda e: e[0])
        visits = np.vstack([e[1] for e in entries])
        flags = np.array([e[2] for e in entries], dtype=np.int64)
        visits.flags.writeable = False
        flags.flags.writeable = False
        subjects.append(SubjectRecord(sid, visits, flags))

    return LongitudinalDataset(tuple(subjects), schema_features, schema)


def derive_labels(ds: LongitudinalDataset) -> Labels:
    """Subject label is 1 iff any visit carries the symptom flag."""
    y = np.array([1 if s.visit_labels.any() else 0 for s in ds.subjects], dtype=np.int64)
    y.flags.writeable = False
    return Labels(y)


def collapse_cross_sectional(ds: LongitudinalDataset) -> CrossSectionalDataset:
    """One row per subject: the element-wise mean of its visit vectors."""
    X = np.vstack([s.visits.mean(axis=0) for s in ds.subjects])
    X.flags.writeable = False
    return CrossSectionalDataset(X, derive_labels(ds), ds.schema, ds.subject_ids)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # constant columns recorded as 1


def fit_standardizer(X: np.ndarray, rows) -> Standardizer:
    """Per-column mean/std (population, divide by n) over the given rows."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise EmptyRowSet("cannot fit standardizer on zero rows")
    sub = X[rows]
    mean = sub.mean(axis=0)
    std = sub.std(axis=0)  # ddof=0
    std = np.where(std == 0.0, 1.0, std)
    mean.flags.writeable = False
    std.flags.writeable = False
    return Standardizer(mean, std)


def apply_standardizer(st: Standardizer, X: np.ndarray) -> np.ndarray:
    """(x - mean) / std per column; input left unmodified."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != st.mean.shape[0]:
        raise DimensionMismatch(
            f"input has {X.shape[-1]} columns, standardizer was fit on {st.mean.shape[0]}"
        )
    return (X - st.mean) / st.std


def fit_sequence_standardizer(sequences, subject_rows) -> Standardizer:
    """Standardizer over all visit rows of the given subjects."""
    subject_rows = np.asarray(subject_rows, dtype=np.int64)
    if subject_rows.size == 0:
        raise EmptyRowSet("cannot fit standardizer on zero subjects")
    stacked = np.vstack([sequences[i] for i in subject_rows])
    return fit_standardizer(stacked, np.arange(stacked.shape[0]))


def format_value(v: float) -> str:
    """Shortest decimal string that round-trips the double exactly."""
    return repr(float(v))


def write_dataset_csv(ds: LongitudinalDataset, path) -> None:
    """Emit the canonical CSV form (stable byte-for-byte for equal datasets)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(RESERVED_COLUMNS) + list(ds.feature_names))
        for subj in ds.subjects:
            for t in range(subj.n_visits):
                row = [subj.subject_id, str(t), str(int(subj.visit_labels[t]))]
                row.extend(format_value(v) for v in subj.visits[t])
                writer.writerow(row)
