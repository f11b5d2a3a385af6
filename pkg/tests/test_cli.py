from __future__ import annotations

import json

import pytest

from conftest import write_schema
from permsig.cli import main
from permsig.synth import uniform_block_schema


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth -> train pipeline shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    schema_in = root / "schema_in.json"
    write_schema(schema_in, uniform_block_schema(3, 4))
    data = root / "data.csv"
    schema = root / "schema.json"
    rc = main(["synth", "--schema", str(schema_in), "--out-data", str(data),
               "--out-schema", str(schema), "--subjects", "80", "--visits", "1", "2",
               "--informative", "cat1", "--signal", "1.5", "--positive-rate", "0.3",
               "--seed", "11"])
    assert rc == 0
    cvdir = root / "cv"
    rc = main(["train", "--data", str(data), "--schema", str(schema), "--arch", "mlp",
               "--folds", "4", "--epochs", "20", "--seed", "3", "--out", str(cvdir)])
    assert rc == 0
    return root, data, schema, cvdir


def test_synth_deterministic_bytes(tmp_path):
    schema_in = tmp_path / "schema.json"
    write_schema(schema_in, uniform_block_schema(2, 3))
    outs = []
    for tag in ("a", "b"):
        data = tmp_path / f"{tag}.csv"
        out_schema = tmp_path / f"{tag}_schema.json"
        rc = main(["synth", "--schema", str(schema_in), "--out-data", str(data),
                   "--out-schema", str(out_schema), "--subjects", "12", "--seed", "7"])
        assert rc == 0
        outs.append(data.read_bytes())
    assert outs[0] == outs[1]


def test_synth_missing_schema_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--out-data", "x.csv", "--out-schema", "y.json", "--subjects", "5"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_synth_output_reloads(workspace):
    from permsig.dataset import load_dataset

    _, data, schema, _ = workspace
    ds = load_dataset(data, schema)
    assert ds.n_subjects == 80


def test_synth_invalid_config_exits_2(tmp_path):
    schema_in = tmp_path / "schema.json"
    write_schema(schema_in, uniform_block_schema(2, 3))
    rc = main(["synth", "--schema", str(schema_in), "--out-data", str(tmp_path / "d.csv"),
               "--out-schema", str(tmp_path / "s.json"), "--subjects", "5",
               "--positive-rate", "1.5"])
    assert rc == 2


def test_train_prints_psi_and_persists(workspace, capsys):
    root, data, schema, cvdir = workspace
    assert (cvdir / "cvrun.json").exists()
    assert (cvdir / "model_fold0.json").exists()
    assert (cvdir / "oof.csv").exists()
    assert (cvdir / "manifest.json").exists()


def test_train_single_fold_exits_2(workspace):
    root, data, schema, _ = workspace
    rc = main(["train", "--data", str(data), "--schema", str(schema), "--arch", "mlp",
               "--folds", "1", "--epochs", "2", "--seed", "0", "--out", str(root / "cv1")])
    assert rc == 2


def test_train_divergence_exits_3(workspace, tmp_path):
    import numpy as np

    root, data, schema, _ = workspace
    with np.errstate(over="ignore", invalid="ignore"):
        rc = main(["train", "--data", str(data), "--schema", str(schema), "--arch", "mlp",
                   "--folds", "4", "--epochs", "3", "--lr", "1e300", "--seed", "0",
                   "--out", str(tmp_path / "cvdiv")])
    assert rc == 3


def test_permtest_all_category_rows(workspace, capsys):
    root, data, schema, cvdir = workspace
    report = root / "report.json"
    rc = main(["permtest", "--cvrun", str(cvdir), "--data", str(data), "--schema", str(schema),
               "--all", "--trials", "20", "--seed", "5", "--report", str(report),
               "--dump", str(root / "nulls.csv")])
    assert rc == 0
    payload = json.loads(report.read_text())
    assert len(payload["results"]) == 3
    assert payload["results"][0]["category"] == "cat1"  # planted, ranked first
    dump = (root / "nulls.csv").read_text().splitlines()
    assert dump[0] == "category,trial,fold,psi_hat"
    assert len(dump) == 1 + 3 * 4 * 20  # header + C * k * trials


def test_permtest_thread_count_byte_identical(workspace):
    root, data, schema, cvdir = workspace
    payloads = []
    for threads in ("1", "2", "8"):
        report = root / f"report_t{threads}.json"
        rc = main(["permtest", "--cvrun", str(cvdir), "--data", str(data),
                   "--schema", str(schema), "--category", "cat1", "--trials", "30",
                   "--seed", "5", "--threads", threads, "--report", str(report)])
        assert rc == 0
        payloads.append(report.read_bytes())
    assert payloads[0] == payloads[1] == payloads[2]


def test_permtest_rerun_byte_identical(workspace):
    root, data, schema, cvdir = workspace
    blobs = []
    for tag in ("r1", "r2"):
        report = root / f"{tag}.json"
        rc = main(["permtest", "--cvrun", str(cvdir), "--data", str(data),
                   "--schema", str(schema), "--category", "cat0", "--trials", "15",
                   "--seed", "9", "--report", str(report)])
        assert rc == 0
        blobs.append(report.read_bytes())
    assert blobs[0] == blobs[1]


def test_permtest_unknown_category_exits_2(workspace):
    root, data, schema, cvdir = workspace
    rc = main(["permtest", "--cvrun", str(cvdir), "--data", str(data), "--schema", str(schema),
               "--category", "nope", "--trials", "5", "--seed", "0",
               "--report", str(root / "x.json")])
    assert rc == 2


def test_permtest_digest_mismatch_exits_4(workspace, tmp_path):
    root, data, schema, cvdir = workspace
    tampered = tmp_path / "tampered.csv"
    text = data.read_text().splitlines()
    text[1] = text[1].replace(text[1].split(",")[3], "9.9")
    tampered.write_text("\n".join(text) + "\n")
    rc = main(["permtest", "--cvrun", str(cvdir), "--data", str(tampered),
               "--schema", str(schema), "--category", "cat0", "--trials", "5",
               "--seed", "0", "--report", str(tmp_path / "x.json")])
    assert rc == 4


def test_permtest_env_threads_default(workspace, monkeypatch):
    monkeypatch.setenv("PERMSIG_THREADS", "2")
    from permsig.cli import build_parser

    args = build_parser().parse_args(["permtest", "--cvrun", "x", "--data", "d",
                                      "--schema", "s", "--all"])
    assert args.threads == 2


def test_hier_identity_matches_permtest(workspace):
    root, data, schema, cvdir = workspace
    from permsig.schema import CategorySchema

    cols = CategorySchema.from_json(schema).columns_of("cat1")
    sub_path = root / "sub.json"
    sub_path.write_text(json.dumps(
        {"parent": "cat1", "subcategories": [{"name": "cat1", "columns": list(cols)}]}))

    perm_report = root / "perm_single.json"
    main(["permtest", "--cvrun", str(cvdir), "--data", str(data), "--schema", str(schema),
          "--category", "cat1", "--trials", "25", "--seed", "21",
          "--report", str(perm_report)])
    hier_report = root / "hier.json"
    hier_csv = root / "hier.csv"
    rc = main(["hier", "--cvrun", str(cvdir), "--data", str(data), "--schema", str(schema),
               "--sub-schema", str(sub_path), "--trials", "25", "--seed", "21",
               "--report", str(hier_report), "--csv", str(hier_csv)])
    assert rc == 0
    a = json.loads(perm_report.read_text())["results"][0]
    b = json.loads(hier_report.read_text())["results"][0]
    assert a == b
    lines = hier_csv.read_text().splitlines()
    assert lines[0].startswith("category,") and len(lines) == 2


def test_specificity_rows_and_degenerate_exit(workspace, tmp_path):
    root, data, schema, cvdir = workspace
    report = tmp_path / "spec.json"
    spec_csv = tmp_path / "spec.csv"
    rc = main(["specificity", "--data", str(data), "--schema", str(schema),
               "--significant", "cat1", "--arch", "mlp", "--folds", "4",
               "--epochs", "10", "--seed", "2", "--report", str(report),
               "--csv", str(spec_csv)])
    assert rc == 0
    payload = json.loads(report.read_text())
    assert set(payload["rows"]) == {"all", "only_significant", "only_nonsignificant"}
    assert len(spec_csv.read_text().splitlines()) == 4  # header + 3 rows
    rc = main(["specificity", "--data", str(data), "--schema", str(schema),
               "--significant", "cat0,cat1,cat2", "--arch", "mlp", "--folds", "4",
               "--epochs", "2", "--seed", "2", "--report", str(tmp_path / "x.json")])
    assert rc == 2


def test_importance_emits_m_rows(workspace, tmp_path, capsys):
    root, data, schema, cvdir = workspace
    report = tmp_path / "imp.json"
    csv_out = tmp_path / "imp.csv"
    rc = main(["importance", "--cvrun", str(cvdir), "--data", str(data),
               "--schema", str(schema), "--trials", "4", "--seed", "3",
               "--report", str(report), "--csv", str(csv_out)])
    assert rc == 0
    payload = json.loads(report.read_text())
    assert len(payload["ranking"]) == 12
    assert len(csv_out.read_text().splitlines()) == 13
    table = [line for line in capsys.readouterr().out.splitlines() if line]
    assert len(table) == 13  # header + m rows


def test_replay_reproduces_synth(tmp_path):
    schema_in = tmp_path / "schema.json"
    write_schema(schema_in, uniform_block_schema(2, 2))
    data = tmp_path / "d.csv"
    out_schema = tmp_path / "s.json"
    rc = main(["synth", "--schema", str(schema_in), "--out-data", str(data),
               "--out-schema", str(out_schema), "--subjects", "10", "--seed", "4"])
    assert rc == 0
    original = data.read_bytes()
    data.unlink()
    rc = main(["replay", "--manifest", str(tmp_path / "d.csv.manifest.json")])
    assert rc == 0
    assert data.read_bytes() == original


def test_bench_smoke(capsys):
    rc = main(["bench", "--subjects", "40", "--features", "12", "--trials", "8",
               "--threads", "1,2"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "backend" in out and "python" in out
