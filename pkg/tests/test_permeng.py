from __future__ import annotations

import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import single_fold_cvrun
from oracles import brute_force_null, brute_force_p
from permsig import (
    CategorySchema,
    MetricKind,
    PermutationPlan,
    SynthConfig,
    collapse_cross_sectional,
    generate,
    null_distribution,
    p_value,
    permute_category,
    run_cv,
    uniform_block_schema,
)
from permsig.errors import (
    EmptyNull,
    InvalidConfig,
    MismatchedRun,
    NotAPermutation,
    TrajectoryLengthMismatch,
    UnknownCategory,
)
from permsig.permeng import NullDistribution, draw_permutation, enumerate_permutations
from permsig.permeng import test_all_categories as run_category_tests


SCHEMA3 = CategorySchema((("A", ("a0",)), ("B", ("b0", "b1")), ("C", ("c0",))))


# -- permute_category ----------------------------------------------------------

def test_identity_permutation_is_identity():
    X = np.arange(12.0).reshape(3, 4)
    out = permute_category(X, SCHEMA3, "B", [0, 1, 2])
    np.testing.assert_array_equal(out, X)
    assert out is not X


def test_hand_permutation_spec_example():
    # destination map 0->1, 1->2, 2->0 on column block A=[a,b,c] gives [c,a,b];
    # as a source map that permutation reads [2, 0, 1]
    X = np.array([[1.0, 0, 0, 0], [2.0, 0, 0, 0], [3.0, 0, 0, 0]])
    out = permute_category(X, SCHEMA3, "A", [2, 0, 1])
    assert out[:, 0].tolist() == [3.0, 1.0, 2.0]
    np.testing.assert_array_equal(out[:, 1:], X[:, 1:])  # other columns untouched


def test_constant_block_unchanged_for_any_perm():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(5, 4))
    X[:, 1:3] = 7.25
    for _ in range(5):
        perm = rng.permutation(5)
        out = permute_category(X, SCHEMA3, "B", perm)
        np.testing.assert_array_equal(out, X)


def test_input_not_mutated():
    X = np.arange(12.0).reshape(3, 4)
    before = X.copy()
    permute_category(X, SCHEMA3, "B", [2, 0, 1])
    np.testing.assert_array_equal(X, before)


def test_unknown_category_and_bad_perm():
    X = np.zeros((3, 4))
    with pytest.raises(UnknownCategory):
        permute_category(X, SCHEMA3, "nope", [0, 1, 2])
    with pytest.raises(NotAPermutation):
        permute_category(X, SCHEMA3, "A", [0, 0, 2])
    with pytest.raises(NotAPermutation):
        permute_category(X, SCHEMA3, "A", [0, 1])


def test_longitudinal_permutation_moves_whole_trajectory():
    seqs = [np.full((2, 4), i, dtype=float) for i in range(3)]
    out = permute_category(seqs, SCHEMA3, "B", [1, 2, 0])
    for i, donor in enumerate([1, 2, 0]):
        np.testing.assert_array_equal(out[i][:, 1:3], np.full((2, 2), donor))
        np.testing.assert_array_equal(out[i][:, 0], np.full(2, i))  # own columns kept


def test_longitudinal_length_mismatch_rejected():
    seqs = [np.zeros((2, 4)), np.zeros((3, 4)), np.zeros((2, 4))]
    with pytest.raises(TrajectoryLengthMismatch):
        permute_category(seqs, SCHEMA3, "B", [1, 0, 2])
    # equal-length mapping is fine even with mixed lengths present
    out = permute_category(seqs, SCHEMA3, "B", [2, 1, 0])
    assert len(out) == 3


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_multiset_preservation(data):
    n = data.draw(st.integers(2, 8))
    rng = np.random.default_rng(data.draw(st.integers(0, 10_000)))
    X = rng.normal(size=(n, 4))
    perm = np.array(data.draw(st.permutations(list(range(n)))))
    out = permute_category(X, SCHEMA3, "B", perm)
    for col in range(4):
        np.testing.assert_array_equal(np.sort(out[:, col]), np.sort(X[:, col]))


def test_draw_permutation_stratified_respects_groups():
    lengths = np.array([2, 3, 2, 3, 2, 2])
    rng = np.random.default_rng(5)
    for _ in range(20):
        perm = draw_permutation(rng, 6, lengths)
        assert np.array_equal(np.sort(perm), np.arange(6))
        for i in range(6):
            assert lengths[perm[i]] == lengths[i]


def test_enumerate_permutations_counts():
    assert len(list(enumerate_permutations(4))) == 24
    # two groups of sizes 2 and 2: 2! * 2! = 4
    perms = list(enumerate_permutations(4, np.array([1, 2, 1, 2])))
    assert len(perms) == 4
    for p in perms:
        assert np.array_equal(np.sort(p), np.arange(4))
    with pytest.raises(InvalidConfig):
        list(enumerate_permutations(10))


# -- p_value -------------------------------------------------------------------

def _null(samples, category="X"):
    s = np.asarray(samples, dtype=float)
    return NullDistribution(s, np.zeros(len(s), dtype=np.int64),
                            np.arange(len(s), dtype=np.int64),
                            category, "per_fold", MetricKind.BACC, 0)


def test_p_value_hand_count_ge_rule():
    res = p_value(_null([0.5, 0.6, 0.7, 0.8]), 0.65)
    assert res.p_value == 0.5
    assert not res.p_is_bound


def test_p_value_tie_conventions():
    null = _null([0.5, 0.6, 0.6, 0.8])
    assert p_value(null, 0.6, tie_rule="ge").p_value == 0.75
    assert p_value(null, 0.6, tie_rule="gt").p_value == 0.25


def test_p_value_degenerate_all_ties():
    res = p_value(_null([0.7] * 10), 0.7)
    assert res.p_value == 1.0


def test_p_value_zero_exceedances_reports_bound():
    res = p_value(_null([0.1] * 500), 0.9)
    assert res.p_is_bound
    assert res.p_value == pytest.approx(1 / 500)
    assert res.p_display == "<0.002"


def test_p_value_smoothing():
    res = p_value(_null([0.1] * 499 + [0.95]), 0.9, smoothing=True)
    assert res.p_value == pytest.approx(2 / 501)
    assert not res.p_is_bound


def test_p_value_empty_null():
    with pytest.raises(EmptyNull):
        p_value(_null([]), 0.5)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=50), st.data())
@settings(max_examples=80, deadline=None)
def test_p_value_monotone_in_psi(values, data):
    null = _null(values)
    lo = data.draw(st.floats(0, 1))
    hi = data.draw(st.floats(0, 1))
    if lo > hi:
        lo, hi = hi, lo
    assert p_value(null, hi).p_value <= p_value(null, lo).p_value


# -- null_distribution ---------------------------------------------------------

@pytest.fixture(scope="module")
def oracle_setup():
    """n=5 single-fold run for exhaustive-oracle comparisons."""
    schema = CategorySchema((("A", ("a0", "a1")), ("B", ("b0",))))
    train_cfg = SynthConfig(n_subjects=40, visits_per_subject=(1, 1), schema=schema,
                            informative_categories=("A",), signal_strength=1.5,
                            positive_rate=0.4, seed=21)
    train_cs = collapse_cross_sectional(generate(train_cfg))
    test_cfg = SynthConfig(n_subjects=5, visits_per_subject=(1, 1), schema=schema,
                           informative_categories=("A",), signal_strength=1.5,
                           positive_rate=0.45, seed=33)
    cs = collapse_cross_sectional(generate(test_cfg))
    assert 0 < cs.labels.n_positive < 5
    cv = single_fold_cvrun(cs, train_cs, seed=5, epochs=15)
    return cs, cv


def test_exhaustive_mode_matches_brute_force(oracle_setup):
    cs, cv = oracle_setup
    plan = PermutationPlan(category="A", mode="per_fold", exhaustive=True, seed=1)
    null = null_distribution(cv, cs, plan)
    assert len(null) == 120

    perms = list(enumerate_permutations(5))
    oracle = brute_force_null(cv.models[0], cv.standardizers[0], cs.X,
                              cs.labels.y, cs.schema, "A", perms)
    np.testing.assert_array_equal(null.samples, oracle)

    res = p_value(null, cv.psi["bacc"])
    assert res.p_value == brute_force_p(oracle, cv.psi["bacc"])


def test_sampled_with_same_permutations_matches_exhaustive(oracle_setup):
    cs, cv = oracle_setup
    exhaustive = null_distribution(
        cv, cs, PermutationPlan(category="A", exhaustive=True, seed=1))
    perms = list(enumerate_permutations(5))
    sampled = null_distribution(
        cv, cs, PermutationPlan(category="A", n_trials=120, seed=1), permutations=perms)
    assert sorted(sampled.samples.tolist()) == sorted(exhaustive.samples.tolist())
    np.testing.assert_array_equal(sampled.samples, exhaustive.samples)


def test_constant_category_null_equals_psi_exactly(planted_cs):
    cs, cv = planted_cs
    X2 = cs.X.copy()
    X2[:, cs.schema.block_slice("cat2")] = 3.5  # constant block
    from permsig.dataset import CrossSectionalDataset

    cs2 = CrossSectionalDataset(X2, cs.labels, cs.schema, cs.subject_ids)
    cv2 = run_cv(cs2, "mlp", cv.train_config, cv.k, cv.metric_kinds, seed=cv.seed)
    plan = PermutationPlan(category="cat2", n_trials=20, mode="pooled", seed=3)
    null = null_distribution(cv2, cs2, plan)
    assert np.all(null.samples == cv2.psi["bacc"])
    res = p_value(null, cv2.psi["bacc"])
    assert res.p_value == 1.0


def test_per_fold_sample_count_and_layout(planted_cs):
    cs, cv = planted_cs
    plan = PermutationPlan(category="cat0", n_trials=7, mode="per_fold", seed=2)
    null = null_distribution(cv, cs, plan)
    assert len(null) == cv.k * 7
    assert null.fold_of_sample.tolist() == sorted(null.fold_of_sample.tolist())
    for t in range(cv.k):
        assert (null.fold_of_sample == t).sum() == 7


def test_pooled_sample_count(planted_cs):
    cs, cv = planted_cs
    null = null_distribution(cv, cs, PermutationPlan(category="cat0", n_trials=9,
                                                     mode="pooled", seed=2))
    assert len(null) == 9
    assert set(null.fold_of_sample.tolist()) == {-1}


def test_thread_count_independence(planted_cs):
    cs, cv = planted_cs
    plan = PermutationPlan(category="cat1", n_trials=40, mode="per_fold", seed=6)
    ref = null_distribution(cv, cs, plan, threads=1)
    for threads in (2, 8):
        out = null_distribution(cv, cs, plan, threads=threads)
        np.testing.assert_array_equal(out.samples, ref.samples)


def test_same_plan_same_null(planted_cs):
    cs, cv = planted_cs
    plan = PermutationPlan(category="cat1", n_trials=25, seed=8)
    a = null_distribution(cv, cs, plan)
    b = null_distribution(cv, cs, plan)
    np.testing.assert_array_equal(a.samples, b.samples)
    c = null_distribution(cv, cs, PermutationPlan(category="cat1", n_trials=25, seed=9))
    assert not np.array_equal(a.samples, c.samples)


def _model_checksums(cv):
    out = []
    for m in cv.models:
        h = hashlib.sha256()
        for k in sorted(m.params):
            h.update(m.params[k].tobytes())
        out.append(h.hexdigest())
    return out


def test_models_frozen_through_testing(planted_cs):
    cs, cv = planted_cs
    before = _model_checksums(cv)
    run_category_tests(cv, cs, PermutationPlan(n_trials=10, seed=4))
    assert _model_checksums(cv) == before


def test_planted_category_detected(planted_cs):
    cs, cv = planted_cs
    results = run_category_tests(cv, cs, PermutationPlan(n_trials=100, seed=12))
    assert len(results) == cs.schema.n_categories
    assert results[0].category == "cat1"
    assert results[0].p_value < 0.05
    assert results[0].null_mean < cv.psi["bacc"] - 0.05
    assert [r.p_value for r in results] == sorted(r.p_value for r in results)


def test_gru_null_distribution_runs(planted_long):
    ds, cv = planted_long
    plan = PermutationPlan(category="cat0", n_trials=10, seed=3)
    null = null_distribution(cv, ds, plan)
    assert len(null) == cv.k * 10
    res = p_value(null, cv.psi["bacc"])
    assert res.p_value < 0.2  # planted signal should stand out


def test_gru_pooled_mode_with_mixed_lengths():
    # pooled draws stay within equal-visit-count groups across the whole cohort
    cfg = SynthConfig(n_subjects=40, visits_per_subject=(1, 3),
                      schema=uniform_block_schema(2, 3),
                      informative_categories=("cat0",), signal_strength=1.5,
                      positive_rate=0.3, seed=15)
    ds = generate(cfg)
    from permsig import TrainConfig

    cv = run_cv(ds, "gru", TrainConfig.gru_defaults(seed=1, epochs=3), 3, seed=2)
    null = null_distribution(cv, ds, PermutationPlan(category="cat1", n_trials=8,
                                                     mode="pooled", seed=4), threads=2)
    assert len(null) == 8
    assert np.all(np.isfinite(null.samples))
    repeat = null_distribution(cv, ds, PermutationPlan(category="cat1", n_trials=8,
                                                       mode="pooled", seed=4))
    np.testing.assert_array_equal(null.samples, repeat.samples)


def test_gru_identity_permutations_reproduce_psi(planted_long):
    ds, cv = planted_long
    identity = [np.arange(ds.n_subjects)]
    null = null_distribution(cv, ds, PermutationPlan(category="cat1", mode="pooled", seed=0),
                             permutations=identity)
    assert null.samples[0] == cv.psi["bacc"]


def test_mismatched_run_rejected(planted_cs, planted_long):
    cs, cv = planted_cs
    ds_long, cv_gru = planted_long
    with pytest.raises(MismatchedRun):
        null_distribution(cv, ds_long, PermutationPlan(category="cat0", n_trials=2, seed=0))
    with pytest.raises(MismatchedRun):
        null_distribution(cv_gru, cs, PermutationPlan(category="cat0", n_trials=2, seed=0))
    smaller = collapse_cross_sectional(generate(SynthConfig(
        n_subjects=30, visits_per_subject=(1, 1), schema=uniform_block_schema(3, 4),
        informative_categories=(), signal_strength=0.0, positive_rate=0.3, seed=1)))
    with pytest.raises(MismatchedRun):
        null_distribution(cv, smaller, PermutationPlan(category="cat0", n_trials=2, seed=0))


def test_unknown_category_via_plan(planted_cs):
    cs, cv = planted_cs
    with pytest.raises(UnknownCategory):
        null_distribution(cv, cs, PermutationPlan(category="nope", n_trials=2, seed=0))
