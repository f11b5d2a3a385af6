"""The permutation engine: null distributions and p-values per category.

One trial permutes a single category's column block across subjects (raw
values, before standardization), pushes the result through the frozen
per-fold standardizers and models, and recomputes the accuracy metric.
Models are never retrained. Every trial draws its permutation from a
stream keyed by (seed, fold, trial), so the null distribution is identical
for any worker count and any execution order.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ._accel import get_backend
from .crossval import CvRun
from .dataset import CrossSectionalDataset, LongitudinalDataset, apply_standardizer
from .errors import (
    EmptyNull,
    InvalidConfig,
    MismatchedRun,
    NotAPermutation,
    TrajectoryLengthMismatch,
    UnknownCategory,
)
from .metrics import ConfusionMatrix, MetricKind, evaluate_cm
from .models.common import sigmoid
from .rngstream import POOLED_TAG, TAG_CATEGORY, check_seed, derive_seed, stream
from .schema import CategorySchema

EXHAUSTIVE_LIMIT = 100_000
_CHUNK = 32


@dataclass(frozen=True)
class PermutationPlan:
    category: str | None = None
    n_trials: int = 500            # per fold in per_fold mode
    mode: str = "per_fold"         # "per_fold" | "pooled"
    metric: MetricKind = MetricKind.BACC
    seed: int = 0
    exhaustive: bool = False
    tie_rule: str = "ge"           # count ties toward the null ("ge") or not ("gt")
    smoothing: bool = False        # (c+1)/(N+1) instead of c/N

    def __post_init__(self):
        if self.n_trials < 1:
            raise InvalidConfig("n_trials must be >= 1")
        if self.mode not in ("per_fold", "pooled"):
            raise InvalidConfig(f"mode must be per_fold or pooled, got {self.mode!r}")
        if self.tie_rule not in ("ge", "gt"):
            raise InvalidConfig(f"tie_rule must be ge or gt, got {self.tie_rule!r}")
        MetricKind(self.metric)
        check_seed(self.seed)


@dataclass(frozen=True)
class NullDistribution:
    samples: np.ndarray        # psi-hat values, one per trial
    fold_of_sample: np.ndarray  # fold index per sample; -1 in pooled mode
    trial_of_sample: np.ndarray
    category: str
    mode: str
    metric: MetricKind
    seed: int

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def std(self) -> float:
        return float(self.samples.std())


@dataclass(frozen=True)
class CategoryTestResult:
    category: str
    psi_true: float
    null_mean: float
    null_std: float
    p_value: float
    p_is_bound: bool  # zero exceedances: p_value is the upper bound 1/N
    n_trials: int     # total null samples behind the p-value

    @property
    def p_display(self) -> str:
        return f"<{self.p_value:g}" if self.p_is_bound else f"{self.p_value:g}"

    @property
    def difference(self) -> float:
        """Mean accuracy shift caused by permutation (null mean - true)."""
        return self.null_mean - self.psi_true


# -- permutation primitives --------------------------------------------------

def _check_perm(perm, n: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise NotAPermutation(f"expected a bijection on {n} subjects")
    return perm


def permute_category(data, schema: CategorySchema, category: str, perm):
    """Reassign one category's column block across subjects.

    ``perm[i]`` names the subject whose block values subject i receives
    (source map). Rows outside the block are untouched; the input is not
    mutated. For visit-sequence collections the whole trajectory of the
    block moves as one unit, which requires equal visit counts between
    subject i and perm[i].
    """
    cols = np.array(schema.column_indices(schema.columns_of(category)), dtype=np.int64)
    if isinstance(data, np.ndarray):
        perm = _check_perm(perm, data.shape[0])
        out = data.copy()
        out[:, cols] = data[perm][:, cols]
        return out
    seqs = list(data)
    perm = _check_perm(perm, len(seqs))
    out_seqs = []
    for i, donor in enumerate(perm):
        if seqs[i].shape[0] != seqs[donor].shape[0]:
            raise TrajectoryLengthMismatch(
                f"subject {i} has {seqs[i].shape[0]} visits but donor {int(donor)} "
                f"has {seqs[donor].shape[0]}; longitudinal permutations move whole "
                "trajectories and must map equal visit counts"
            )
        s = seqs[i].copy()
        s[:, cols] = seqs[donor][:, cols]
        out_seqs.append(s)
    return out_seqs


def draw_permutation(rng: np.random.Generator, n: int, lengths=None) -> np.ndarray:
    """Uniform random source-map permutation; stratified by visit count.

    With ``lengths`` given, subjects are only permuted within groups of
    equal visit count, so whole trajectories stay well-defined. With equal
    lengths (or ``lengths=None``) this is a single unrestricted draw.
    """
    if lengths is None or len(set(int(x) for x in lengths)) == 1:
        return rng.permutation(n)
    perm = np.empty(n, dtype=np.int64)
    lengths = np.asarray(lengths)
    for length in np.unique(lengths):  # ascending: deterministic group order
        grp = np.flatnonzero(lengths == length)
        perm[grp] = grp[rng.permutation(len(grp))]
    return perm


def enumerate_permutations(n: int, lengths=None):
    """All valid source maps, lexicographically; respects length groups."""
    if lengths is None or len(set(int(x) for x in lengths)) == 1:
        total = math.factorial(n)
        if total > EXHAUSTIVE_LIMIT:
            raise InvalidConfig(f"exhaustive mode over {n} subjects needs {total} trials "
                                f"(limit {EXHAUSTIVE_LIMIT})")
        for p in itertools.permutations(range(n)):
            yield np.array(p, dtype=np.int64)
        return
    lengths = np.asarray(lengths)
    groups = [np.flatnonzero(lengths == length) for length in np.unique(lengths)]
    total = 1
    for g in groups:
        total *= math.factorial(len(g))
    if total > EXHAUSTIVE_LIMIT:
        raise InvalidConfig(f"exhaustive mode needs {total} trials (limit {EXHAUSTIVE_LIMIT})")
    for combo in itertools.product(*(itertools.permutations(range(len(g))) for g in groups)):
        perm = np.empty(n, dtype=np.int64)
        for g, sub in zip(groups, combo):
            perm[g] = g[np.array(sub, dtype=np.int64)]
        yield perm


# -- engine ------------------------------------------------------------------

class _Prepared:
    """Frozen scoring state for one (CvRun, dataset) pair."""

    def __init__(self, cv: CvRun, ds):
        if isinstance(ds, CrossSectionalDataset):
            if cv.architecture != "mlp":
                raise MismatchedRun("cross-sectional data needs an mlp run")
            self.kind = "mlp"
            n = ds.n_subjects
        elif isinstance(ds, LongitudinalDataset):
            if cv.architecture != "gru":
                raise MismatchedRun("longitudinal data needs a gru run")
            self.kind = "gru"
            n = ds.n_subjects
        else:
            raise MismatchedRun(f"unsupported dataset type {type(ds).__name__}")
        if n != len(cv.labels):
            raise MismatchedRun(f"run covers {len(cv.labels)} subjects, dataset has {n}")
        if tuple(cv.subject_ids) != tuple(ds.subject_ids):
            raise MismatchedRun("run and dataset disagree on subject identities")

        self.cv = cv
        self.schema = ds.schema
        self.y = cv.labels.y
        self.n = n
        self.rows = [cv.folds.test_rows(t) for t in range(cv.k)]
        self.backend = get_backend()
        if self.kind == "mlp":
            self.Xs = [apply_standardizer(st, ds.X) for st in cv.standardizers]
            self.lengths = None
        else:
            raw = ds.sequences()
            self.lengths = ds.visit_counts()
            tmax = int(self.lengths.max())
            m = raw[0].shape[1]
            self.padded = []
            for st in cv.standardizers:
                tensor = np.zeros((n, tmax, m))
                for i, seq in enumerate(raw):
                    tensor[i, : seq.shape[0]] = apply_standardizer(st, seq)
                self.padded.append(tensor)

    def fold_lengths(self, rows: np.ndarray):
        return None if self.lengths is None else self.lengths[rows]

    def trial_logits(self, fold: int, rows: np.ndarray, perms: np.ndarray) -> np.ndarray:
        """(T, nt) logits for a chunk of trials scored by fold's model."""
        model = self.cv.models[fold]
        cols = self._cols
        if self.kind == "mlp":
            return self.backend.mlp_block_trials(model, self.Xs[fold], rows, cols, perms)
        return self.backend.gru_block_trials(model, self.padded[fold], self.lengths,
                                             rows, cols, perms)

    def set_columns(self, cols: np.ndarray) -> None:
        self._cols = cols


def _resolve_columns(schema: CategorySchema, plan: PermutationPlan, columns) -> np.ndarray:
    if columns is not None:
        cols = np.asarray(columns, dtype=np.int64)
        if cols.size == 0 or cols.min() < 0 or cols.max() >= schema.n_features:
            raise UnknownCategory(f"column indices out of range: {columns}")
        return cols
    if plan.category is None:
        raise InvalidConfig("plan needs a category name or explicit columns")
    sl = schema.block_slice(plan.category)
    return np.arange(sl.start, sl.stop, dtype=np.int64)


def null_distribution(cv: CvRun, ds, plan: PermutationPlan, columns=None,
                      threads: int = 1, permutations=None) -> NullDistribution:
    """Build the null distribution of the accuracy score for one block.

    per_fold mode: ``n_trials`` permutations within each test fold, each
    scored on that fold's subjects by its own frozen model (k * n_trials
    samples). pooled mode: one permutation over all subjects per trial,
    scored through every fold's frozen pipeline and pooled (n_trials
    samples). ``permutations`` is a testing hook: an explicit list of
    source maps used verbatim (per fold, or globally in pooled mode).
    """
    prepared = _Prepared(cv, ds)
    cols = _resolve_columns(prepared.schema, plan, columns)
    prepared.set_columns(cols)
    metric = MetricKind(plan.metric)
    label = plan.category if plan.category is not None else f"columns{cols.tolist()}"

    if plan.mode == "per_fold":
        per_unit = [
            _unit_perms(plan, prepared.fold_lengths(rows), len(rows), fold, permutations)
            for fold, rows in enumerate(prepared.rows)
        ]
        counts = [p.shape[0] for p in per_unit]
        samples = np.empty(sum(counts))
        fold_of = np.concatenate([np.full(c, t, dtype=np.int64) for t, c in enumerate(counts)])
        trial_of = np.concatenate([np.arange(c, dtype=np.int64) for c in counts])
        offsets = np.concatenate([[0], np.cumsum(counts)])

        def score_fold_chunk(fold: int, lo: int, hi: int):
            rows = prepared.rows[fold]
            donors = rows[per_unit[fold][lo:hi]]
            logits = prepared.trial_logits(fold, rows, donors)
            base = offsets[fold]
            samples[base + lo : base + hi] = _score_chunk(metric, prepared.y[rows], logits)

        tasks = [(t, lo, min(lo + _CHUNK, counts[t]))
                 for t in range(cv.k) for lo in range(0, counts[t], _CHUNK)]
        _run_tasks(score_fold_chunk, tasks, threads)
    else:
        perms = _unit_perms(plan, prepared.lengths, prepared.n, POOLED_TAG, permutations)
        n_samples = perms.shape[0]
        samples = np.empty(n_samples)
        fold_of = np.full(n_samples, -1, dtype=np.int64)
        trial_of = np.arange(n_samples, dtype=np.int64)

        def score_pooled_chunk(lo: int, hi: int):
            chunk = perms[lo:hi]
            logits = np.empty((hi - lo, prepared.n))
            for fold, rows in enumerate(prepared.rows):
                logits[:, rows] = prepared.trial_logits(fold, rows, chunk[:, rows])
            samples[lo:hi] = _score_chunk(metric, prepared.y, logits)

        tasks = [(lo, min(lo + _CHUNK, n_samples)) for lo in range(0, n_samples, _CHUNK)]
        _run_tasks(score_pooled_chunk, tasks, threads)

    samples.flags.writeable = False
    return NullDistribution(samples, fold_of, trial_of, label, plan.mode, metric, plan.seed)


def _score_chunk(metric: MetricKind, y: np.ndarray, logits: np.ndarray) -> np.ndarray:
    """Accuracy per trial row: thresholded predictions, counted in bulk.

    Counting is vectorized across the chunk; the metric value itself still
    comes from the metrics module, so there is a single formula path.
    """
    preds = sigmoid(logits) >= 0.5
    pos = y == 1
    tp = (preds & pos).sum(axis=1)
    fp = (preds & ~pos).sum(axis=1)
    fn = (~preds & pos).sum(axis=1)
    tn = (~preds & ~pos).sum(axis=1)
    return np.array([
        evaluate_cm(metric, ConfusionMatrix(int(tp[j]), int(fp[j]), int(tn[j]), int(fn[j])))
        for j in range(logits.shape[0])
    ])


def _unit_perms(plan: PermutationPlan, lengths, n: int, fold_tag: int,
                permutations) -> np.ndarray:
    """(T, n) source maps for one scoring unit (a fold, or the pooled run)."""
    if permutations is not None:
        return np.vstack([_check_perm(p, n) for p in permutations])
    if plan.exhaustive:
        return np.vstack(list(enumerate_permutations(n, lengths)))
    out = np.empty((plan.n_trials, n), dtype=np.int64)
    for r in range(plan.n_trials):
        out[r] = draw_permutation(stream(plan.seed, fold_tag, r), n, lengths)
    return out


def _run_tasks(fn, tasks, threads: int) -> None:
    if threads <= 1 or len(tasks) <= 1:
        for t in tasks:
            fn(*t)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, *t) for t in tasks]
        for f in futures:
            f.result()  # re-raise worker errors


def p_value(null: NullDistribution, psi_true: float, tie_rule: str = "ge",
            smoothing: bool = False) -> CategoryTestResult:
    """Exceedance fraction of the null at the observed accuracy.

    ``ge`` counts ties toward the null (conservative default); ``gt``
    implements the strictly-higher reading. Zero exceedances report the
    upper bound 1/N with ``p_is_bound`` set (rendered "<1/N").
    """
    n = len(null.samples)
    if n == 0:
        raise EmptyNull("null distribution has no samples")
    if tie_rule == "ge":
        count = int(np.sum(null.samples >= psi_true))
    elif tie_rule == "gt":
        count = int(np.sum(null.samples > psi_true))
    else:
        raise InvalidConfig(f"tie_rule must be ge or gt, got {tie_rule!r}")
    if smoothing:
        p, bound = (count + 1) / (n + 1), False
    elif count == 0:
        p, bound = 1.0 / n, True
    else:
        p, bound = count / n, False
    return CategoryTestResult(
        category=null.category,
        psi_true=float(psi_true),
        null_mean=null.mean,
        null_std=null.std,
        p_value=float(p),
        p_is_bound=bound,
        n_trials=n,
    )


def test_all_categories(cv: CvRun, ds, base_plan: PermutationPlan,
                        threads: int = 1, keep_nulls: bool = False):
    """Run the category test for every schema category; order by p ascending.

    Per-category seeds are derived from the base seed and the category's
    schema position. Returns a list of CategoryTestResult (paired with each
    NullDistribution when ``keep_nulls``).
    """
    schema = ds.schema
    psi_true = cv.psi[MetricKind(base_plan.metric).value]
    results = []
    for ci, cat in enumerate(schema.names):
        plan = replace(base_plan, category=cat,
                       seed=derive_seed(base_plan.seed, TAG_CATEGORY, ci))
        null = null_distribution(cv, ds, plan, threads=threads)
        res = p_value(null, psi_true, base_plan.tie_rule, base_plan.smoothing)
        results.append((res, null) if keep_nulls else res)
    key = (lambda rn: rn[0].p_value) if keep_nulls else (lambda r: r.p_value)
    results.sort(key=key)
    return results
