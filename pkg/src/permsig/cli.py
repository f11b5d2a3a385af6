"""Command-line front end: generate, train, test, analyze, report.

Exit codes: 0 success, 2 usage/configuration error, 3 numerical failure
during training, 4 artifact mismatch (persisted run vs dataset digest).
Every command writes a manifest sufficient to replay it bit-for-bit; all
randomness flows from explicit --seed flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import SubSchema, feature_importance, hierarchical_test, specificity_study
from .crossval import load_cvrun, run_cv, save_cvrun
from .dataset import collapse_cross_sectional, load_dataset, write_dataset_csv
from .errors import MismatchedRun, NonFiniteLoss, PermsigError
from .manifest import dataset_digest, file_digest, load_manifest, write_manifest
from .metrics import MetricKind
from .models import TrainConfig
from .permeng import PermutationPlan, null_distribution, p_value, test_all_categories
from .schema import CategorySchema
from .synth import SynthConfig, generate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_MISMATCH = 4


def _default_threads() -> int:
    return int(os.environ.get("PERMSIG_THREADS", "1"))


def _fmt(x: float) -> str:
    return f"{x:.4f}"


# -- argument wiring ---------------------------------------------------------

def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arch", choices=("mlp", "gru"), required=True,
                   help="cross-sectional MLP or longitudinal GRU")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--l1", type=float)
    p.add_argument("--batch-size", type=int, help="0 means full batch")
    p.add_argument("--class-weight-r", type=float,
                   help="override the negative/positive training-fold ratio")
    p.add_argument("--hidden", type=str, help="comma-separated layer widths")


def _train_config(args) -> TrainConfig:
    cfg = (TrainConfig.mlp_defaults(seed=args.seed) if args.arch == "mlp"
           else TrainConfig.gru_defaults(seed=args.seed))
    overrides = {}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.dropout is not None:
        overrides["dropout_rate"] = args.dropout
    if args.l1 is not None:
        overrides["l1_lambda"] = args.l1
    if args.batch_size is not None:
        overrides["batch_size"] = None if args.batch_size == 0 else args.batch_size
    if args.class_weight_r is not None:
        overrides["class_weight_R"] = args.class_weight_r
    return replace(cfg, **overrides) if overrides else cfg


def _hidden(args):
    if args.hidden is None:
        return None
    return tuple(int(x) for x in args.hidden.split(","))


def _load_for_arch(data_path, schema_path, arch: str):
    ds = load_dataset(data_path, schema_path)
    return collapse_cross_sectional(ds) if arch == "mlp" else ds


def _plan_from_args(args, category=None) -> PermutationPlan:
    return PermutationPlan(
        category=category,
        n_trials=args.trials,
        mode=args.mode.replace("-", "_"),
        metric=MetricKind(args.metric),
        seed=args.seed,
        exhaustive=getattr(args, "exhaustive", False),
        tie_rule=args.tie_rule,
        smoothing=args.smoothing,
    )


def _add_plan_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trials", type=int, default=500, help="permutations per test fold")
    p.add_argument("--mode", choices=("per-fold", "pooled"), default="per-fold")
    p.add_argument("--metric", choices=[m.value for m in MetricKind], default="bacc")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="worker threads for the trial pool (env PERMSIG_THREADS)")
    p.add_argument("--tie-rule", choices=("ge", "gt"), default="ge")
    p.add_argument("--smoothing", action="store_true",
                   help="report (c+1)/(N+1) instead of c/N")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="permsig", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"permsig {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with planted signal")
    p.add_argument("--schema", required=True, help="category schema JSON")
    p.add_argument("--out-data", required=True)
    p.add_argument("--out-schema", required=True)
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--visits", type=int, nargs=2, default=(1, 1), metavar=("MIN", "MAX"))
    p.add_argument("--informative", type=str, default="",
                   help="comma-separated category names carrying signal")
    p.add_argument("--signal", type=float, default=1.0)
    p.add_argument("--positive-rate", type=float, default=0.15)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--temporal-signal", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest", help="default: <out-data>.manifest.json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="stratified k-fold cross-validated training")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True, help="directory for the cross-validation run")
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("permtest", help="category significance by permutation")
    p.add_argument("--cvrun", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--category", help="test one category")
    g.add_argument("--all", action="store_true", help="test every category")
    p.add_argument("--exhaustive", action="store_true",
                   help="enumerate all permutations instead of sampling")
    p.add_argument("--seed", type=int, default=0)
    _add_plan_flags(p)
    p.add_argument("--report", help="JSON report path (default: <cvrun>/permtest_report.json)")
    p.add_argument("--dump", help="CSV dump of all null samples")
    p.set_defaults(func=cmd_permtest)

    p = sub.add_parser("hier", help="permutation test of sub-blocks within a category")
    p.add_argument("--cvrun", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--sub-schema", required=True,
                   help='JSON: {"parent": name, "subcategories": [{"name","columns"}]}')
    p.add_argument("--seed", type=int, default=0)
    _add_plan_flags(p)
    p.add_argument("--report", help="JSON report path (default: <cvrun>/hier_report.json)")
    p.add_argument("--csv", help="optional CSV of the per-sub-category rows")
    p.add_argument("--dump", help="CSV dump of all null samples")
    p.set_defaults(func=cmd_hier)

    p = sub.add_parser("specificity",
                       help="retrain on only-significant vs only-nonsignificant categories")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--significant", required=True, help="comma-separated category names")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True, help="JSON report path")
    p.add_argument("--csv", help="optional CSV of the three rows")
    _add_train_flags(p)
    p.set_defaults(func=cmd_specificity)

    p = sub.add_parser("importance", help="single-column permutation importance")
    p.add_argument("--cvrun", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--metric", choices=[m.value for m in MetricKind], default="bacc")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True, help="JSON report path")
    p.add_argument("--csv", help="optional CSV of the ranked features")
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("bench", help="compare scoring backends and thread scaling")
    p.add_argument("--subjects", type=int, default=600)
    p.add_argument("--features", type=int, default=126)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--threads", type=str, default="1,2,4",
                   help="comma-separated worker counts to time")
    p.add_argument("--arch", choices=("mlp", "gru"), default="mlp")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    return ap


# -- commands ----------------------------------------------------------------

def cmd_synth(args, argv) -> int:
    schema = CategorySchema.from_json(args.schema)
    informative = tuple(s for s in args.informative.split(",") if s)
    cfg = SynthConfig(
        n_subjects=args.subjects,
        visits_per_subject=tuple(args.visits),
        schema=schema,
        informative_categories=informative,
        signal_strength=args.signal,
        positive_rate=args.positive_rate,
        noise_std=args.noise_std,
        seed=args.seed,
        temporal_signal=args.temporal_signal,
    )
    ds = generate(cfg)
    write_dataset_csv(ds, args.out_data)
    schema.to_json(args.out_schema)
    manifest_path = args.manifest or f"{args.out_data}.manifest.json"
    write_manifest(manifest_path, "synth", argv,
                   options={"subjects": args.subjects, "visits": list(args.visits),
                            "informative": list(informative), "signal": args.signal,
                            "positive_rate": args.positive_rate, "noise_std": args.noise_std,
                            "temporal_signal": args.temporal_signal, "seed": args.seed},
                   input_digests={args.schema: file_digest(args.schema)},
                   outputs=[args.out_data, args.out_schema])
    pos = sum(1 for s in ds.subjects if s.visit_labels.any())
    print(f"wrote {args.out_data}: {ds.n_subjects} subjects, {ds.n_features} features, "
          f"{pos} positive")
    return EXIT_OK


def cmd_train(args, argv) -> int:
    ds = _load_for_arch(args.data, args.schema, args.arch)
    config = _train_config(args)
    digest = dataset_digest(args.data, args.schema)
    run = run_cv(ds, args.arch, config, args.folds,
                 (MetricKind.BACC, MetricKind.F1), args.seed,
                 hidden=_hidden(args), dataset_digest=digest)
    save_cvrun(run, args.out)
    write_manifest(Path(args.out) / "manifest.json", "train", argv,
                   options={"arch": args.arch, "folds": args.folds, "seed": args.seed,
                            "train_config": {k: v for k, v in vars(config).items()}},
                   input_digests={args.data: digest.split(":")[0],
                                  args.schema: digest.split(":")[1]},
                   outputs=[args.out])
    print(f"{'metric':<10}{'pooled':>10}" + "".join(f"{f'fold{t}':>10}" for t in range(run.k)))
    for mk in run.metric_kinds:
        row = f"{mk.value:<10}{_fmt(run.psi[mk.value]):>10}"
        row += "".join(f"{_fmt(v):>10}" for v in run.psi_per_fold[mk.value])
        print(row)
    return EXIT_OK


def _check_digest(cv, data_path, schema_path) -> str:
    digest = dataset_digest(data_path, schema_path)
    if cv.dataset_digest is not None and cv.dataset_digest != digest:
        raise MismatchedRun(
            f"dataset digest {digest[:16]}... does not match the one recorded "
            f"in the run ({cv.dataset_digest[:16]}...)"
        )
    return digest


def _result_row(res) -> dict:
    return {
        "category": res.category,
        "psi_true": res.psi_true,
        "null_mean": res.null_mean,
        "null_std": res.null_std,
        "difference": res.difference,
        "p_value": res.p_value,
        "p_is_bound": res.p_is_bound,
        "p_display": res.p_display,
        "n_trials": res.n_trials,
    }


def _write_report(path, payload: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dump_nulls(path, pairs) -> None:
    import csv as _csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["category", "trial", "fold", "psi_hat"])
        for res, null in pairs:
            for j in range(len(null.samples)):
                writer.writerow([res.category, int(null.trial_of_sample[j]),
                                 int(null.fold_of_sample[j]), repr(float(null.samples[j]))])


def _print_results_table(results) -> None:
    print(f"{'category':<24}{'psi':>9}{'null mean':>11}{'null std':>10}{'diff':>9}  {'p':>12}")
    for res in results:
        print(f"{res.category:<24}{_fmt(res.psi_true):>9}{_fmt(res.null_mean):>11}"
              f"{_fmt(res.null_std):>10}{res.difference:>+9.4f}  {res.p_display:>12}")


def cmd_permtest(args, argv) -> int:
    cv = load_cvrun(args.cvrun)
    digest = _check_digest(cv, args.data, args.schema)
    ds = _load_for_arch(args.data, args.schema, cv.architecture)
    base_plan = _plan_from_args(args)

    if args.all:
        pairs = test_all_categories(cv, ds, base_plan, threads=args.threads, keep_nulls=True)
    else:
        plan = replace(base_plan, category=args.category)
        null = null_distribution(cv, ds, plan, threads=args.threads)
        res = p_value(null, cv.psi[base_plan.metric.value], plan.tie_rule, plan.smoothing)
        pairs = [(res, null)]

    results = [r for r, _ in pairs]
    report_path = args.report or str(Path(args.cvrun) / "permtest_report.json")
    payload = {
        "metric": base_plan.metric.value,
        "mode": base_plan.mode,
        "seed": args.seed,
        "trials": args.trials,
        "tie_rule": base_plan.tie_rule,
        "smoothing": base_plan.smoothing,
        "exhaustive": base_plan.exhaustive,
        "psi_true": cv.psi[base_plan.metric.value],
        "results": [_result_row(r) for r in results],
    }
    _write_report(report_path, payload)
    outputs = [report_path]
    if args.dump:
        _dump_nulls(args.dump, pairs)
        outputs.append(args.dump)
    write_manifest(f"{report_path}.manifest.json", "permtest", argv,
                   options=payload | {"threads": args.threads, "cvrun": args.cvrun},
                   input_digests={args.data: digest.split(":")[0],
                                  args.schema: digest.split(":")[1]},
                   outputs=outputs)
    _print_results_table(results)
    return EXIT_OK


def cmd_hier(args, argv) -> int:
    cv = load_cvrun(args.cvrun)
    digest = _check_digest(cv, args.data, args.schema)
    ds = _load_for_arch(args.data, args.schema, cv.architecture)
    with open(args.sub_schema, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    sub = SubSchema(parent=raw["parent"],
                    subcategories=tuple((s["name"], tuple(s["columns"]))
                                        for s in raw["subcategories"]))
    plan = _plan_from_args(args)
    pairs = hierarchical_test(cv, ds, sub, plan, threads=args.threads, keep_nulls=True)
    results = [r for r, _ in pairs]

    report_path = args.report or str(Path(args.cvrun) / "hier_report.json")
    payload = {
        "parent": sub.parent,
        "metric": plan.metric.value,
        "mode": plan.mode,
        "seed": args.seed,
        "trials": args.trials,
        "psi_true": cv.psi[plan.metric.value],
        "results": [_result_row(r) for r in results],
    }
    _write_report(report_path, payload)
    outputs = [report_path]
    if args.csv:
        _write_rows_csv(args.csv, results)
        outputs.append(args.csv)
    if args.dump:
        _dump_nulls(args.dump, pairs)
        outputs.append(args.dump)
    write_manifest(f"{report_path}.manifest.json", "hier", argv,
                   options=payload | {"threads": args.threads, "cvrun": args.cvrun},
                   input_digests={args.data: digest.split(":")[0],
                                  args.schema: digest.split(":")[1]},
                   outputs=outputs)
    _print_results_table(results)
    return EXIT_OK


def _write_rows_csv(path, results) -> None:
    import csv as _csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["category", "psi_true", "null_mean", "null_std",
                         "difference", "p_value", "p_display", "n_trials"])
        for r in results:
            writer.writerow([r.category, repr(r.psi_true), repr(r.null_mean),
                             repr(r.null_std), repr(r.difference), repr(r.p_value),
                             r.p_display, r.n_trials])


def cmd_specificity(args, argv) -> int:
    ds = _load_for_arch(args.data, args.schema, args.arch)
    significant = tuple(s for s in args.significant.split(",") if s)
    config = _train_config(args)
    report = specificity_study(ds, significant, args.arch, config, args.folds,
                               args.seed, hidden=_hidden(args))
    payload = {
        "significant": list(report.significant),
        "rows": report.rows,
        "arch": args.arch,
        "folds": args.folds,
        "seed": args.seed,
    }
    _write_report(args.report, payload)
    outputs = [args.report]
    if args.csv:
        import csv as _csv

        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["input", "bacc", "f1"])
            for name in report.ROW_ORDER:
                writer.writerow([name, repr(report.rows[name]["bacc"]),
                                 repr(report.rows[name]["f1"])])
        outputs.append(args.csv)
    digest = dataset_digest(args.data, args.schema)
    write_manifest(f"{args.report}.manifest.json", "specificity", argv,
                   options=payload,
                   input_digests={args.data: digest.split(":")[0],
                                  args.schema: digest.split(":")[1]},
                   outputs=outputs)
    print(f"{'input':<24}{'bacc':>9}{'f1':>9}")
    for name in report.ROW_ORDER:
        vals = report.rows[name]
        print(f"{name:<24}{_fmt(vals['bacc']):>9}{_fmt(vals['f1']):>9}")
    return EXIT_OK


def cmd_importance(args, argv) -> int:
    cv = load_cvrun(args.cvrun)
    digest = _check_digest(cv, args.data, args.schema)
    ds = _load_for_arch(args.data, args.schema, cv.architecture)
    fi = feature_importance(cv, ds, n_trials=args.trials, seed=args.seed,
                            metric=MetricKind(args.metric), threads=args.threads)
    payload = {
        "metric": fi.metric.value,
        "trials": fi.n_trials,
        "seed": args.seed,
        "ranking": [{"feature": name, "importance": score} for name, score in fi.entries],
    }
    _write_report(args.report, payload)
    outputs = [args.report]
    if args.csv:
        import csv as _csv

        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["rank", "feature", "importance"])
            for rank, (name, score) in enumerate(fi.entries, start=1):
                writer.writerow([rank, name, repr(score)])
        outputs.append(args.csv)
    write_manifest(f"{args.report}.manifest.json", "importance", argv,
                   options={"metric": fi.metric.value, "trials": fi.n_trials,
                            "seed": args.seed, "cvrun": args.cvrun},
                   input_digests={args.data: digest.split(":")[0],
                                  args.schema: digest.split(":")[1]},
                   outputs=outputs)
    print(f"{'rank':<6}{'feature':<28}{'importance':>12}")
    for rank, (name, score) in enumerate(fi.entries, start=1):
        print(f"{rank:<6}{name:<28}{score:>+12.5f}")
    return EXIT_OK


def cmd_replay(args, argv) -> int:
    manifest = load_manifest(args.manifest)
    recorded = manifest.get("argv", [])
    if not recorded or recorded[0] == "replay":
        raise PermsigError(f"manifest {args.manifest} has no replayable argv")
    print(f"replaying: permsig {' '.join(recorded)}")
    return main(recorded)


def cmd_bench(args, argv) -> int:
    from .bench import print_benchmark

    threads = [int(t) for t in args.threads.split(",") if t]
    print_benchmark(arch=args.arch, n_subjects=args.subjects, n_features=args.features,
                    n_trials=args.trials, thread_counts=threads, seed=args.seed)
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MismatchedRun as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except PermsigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
