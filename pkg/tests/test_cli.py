#!/usr/bin/env python3
"""
Tests for the command-line interface
"""

import csv
import json
import textwrap

import pytest

import cli
from core_types import MalformedRecord, MissingOracle, scale_preset
from reward_trainer import EvalPoint, RunReport
from run_store import RunStore


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("ORDFB_THREADS", "ORDFB_DB_PATH", "ORDFB_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


def _write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def _read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


# ============================================================
# label
# ============================================================

def test_label_fills_in_labels(tmp_path):
    source = _write_jsonl(tmp_path / "in.jsonl", [
        {"id": "a", "features_1": [1.0], "features_2": [0.0], "oracle": 0.8},
        {"id": "b", "features_1": [0.0], "features_2": [1.0], "score_1": 0.0, "score_2": 2.0},
    ])
    target = tmp_path / "out.jsonl"
    summary = cli.cmd_label(source, target, scale_preset("three_level"), 20 / 3, seed=1)
    records = _read_jsonl(target)
    assert summary["count"] == 2
    assert [r["id"] for r in records] == ["a", "b"]
    assert records[0]["label"] in (0.5, 1.0)
    assert records[1]["oracle"] == pytest.approx(1.0 / (1.0 + 2.718281828459045 ** 0.3))
    assert records[1]["label"] in (0.0, 0.5)
    assert sum(summary["histogram"].values()) == pytest.approx(1.0)


def test_label_is_reproducible_and_replicates(tmp_path):
    source = _write_jsonl(tmp_path / "in.jsonl", [
        {"id": "a", "features_1": [1.0], "features_2": [0.0], "oracle": 0.3},
    ])
    first, second = tmp_path / "1.jsonl", tmp_path / "2.jsonl"
    cli.cmd_label(source, first, scale_preset("binary"), 1.0, seed=4, replicate=2000)
    cli.cmd_label(source, second, scale_preset("binary"), 1.0, seed=4, replicate=2000)
    records = _read_jsonl(first)
    assert records == _read_jsonl(second)
    assert records[1]["id"] == "a-1"
    mean = sum(r["label"] for r in records) / len(records)
    assert mean == pytest.approx(0.3, abs=0.05)


def test_oracle_scale_copies_the_oracle(tmp_path):
    source = _write_jsonl(tmp_path / "in.jsonl", [
        {"id": "a", "features_1": [1.0], "features_2": [0.0], "oracle": 0.37},
    ])
    summary = cli.cmd_label(source, tmp_path / "out.jsonl", "oracle", 1.0, seed=0)
    assert _read_jsonl(tmp_path / "out.jsonl")[0]["label"] == 0.37
    assert summary["histogram"] is None


def test_equal_scores_give_a_tie(tmp_path):
    source = _write_jsonl(tmp_path / "in.jsonl", [
        {"id": "t", "features_1": [0.0], "features_2": [0.0], "score_1": 1.5, "score_2": 1.5},
    ])
    cli.cmd_label(source, tmp_path / "out.jsonl", scale_preset("three_level"), 20 / 3, seed=0)
    record = _read_jsonl(tmp_path / "out.jsonl")[0]
    assert record["oracle"] == 0.5
    assert record["label"] == 0.5


def test_replicated_labels_follow_the_smallest_interval(tmp_path):
    source = _write_jsonl(tmp_path / "in.jsonl", [
        {"id": "a", "features_1": [1.0], "features_2": [0.0], "oracle": 0.8},
    ])
    summary = cli.cmd_label(source, tmp_path / "out.jsonl", scale_preset("three_level"), 20 / 3,
                            seed=2, replicate=100_000)
    assert summary["histogram"][0.0] == 0.0
    assert summary["histogram"][0.5] == pytest.approx(0.4, abs=0.01)
    assert summary["histogram"][1.0] == pytest.approx(0.6, abs=0.01)


@pytest.mark.parametrize("line, error", [
    ("not json", MalformedRecord),
    ('{"id": "a", "features_1": [1], "features_2": [1, 2], "oracle": 0.5}', MalformedRecord),
    ('{"id": "a", "features_1": [1], "features_2": [0], "oracle": 0.5, "score_1": 1, '
     '"score_2": 0}', MalformedRecord),
    ('{"id": "a", "features_1": [1], "features_2": [0], "score_1": 1}', MalformedRecord),
    ('{"id": "a", "features_1": [1], "features_2": [0], "oracle": 1.5}', MalformedRecord),
    ('{"id": 3, "features_1": [1], "features_2": [0], "oracle": 0.5}', MalformedRecord),
    ('{"id": "a", "features_1": [1], "features_2": [0]}', MissingOracle),
])
def test_bad_records(line, error):
    with pytest.raises(error):
        cli.parse_record(line, 1, 1.0)


def test_malformed_record_names_its_line(tmp_path):
    source = tmp_path / "in.jsonl"
    source.write_text('{"id": "a", "features_1": [1], "features_2": [0], "oracle": 0.5}\n'
                      '{"id": "b", "features_1": [1, 2], "features_2": [0, 0], "oracle": 0.5}\n')
    with pytest.raises(MalformedRecord) as info:
        cli.read_records(source, 1.0)
    assert info.value.line == 2


def test_invalid_utf8_is_a_malformed_record(tmp_path, capsys):
    source = tmp_path / "in.jsonl"
    tail = b', "features_1": [1], "features_2": [0], "oracle": 0.5}\n'
    source.write_bytes(b'{"id": "a"' + tail + b'{"id": "\xff\xfe"' + tail)
    with pytest.raises(MalformedRecord) as info:
        cli.read_records(source, 1.0)
    assert info.value.line == 2
    assert cli.main(["label", "--input", str(source), "--output", str(tmp_path / "o.jsonl")]) == 2
    assert "MalformedRecord" in capsys.readouterr().err


@pytest.mark.parametrize("line", [
    '{"id": "a", "features_1": [NaN], "features_2": [0], "oracle": 0.5}',
    '{"id": "a", "features_1": [1], "features_2": [1e400], "oracle": 0.5}',
    '{"id": "a", "features_1": [1], "features_2": [-Infinity], "oracle": 0.5}',
])
def test_non_finite_features_are_rejected(line):
    with pytest.raises(MalformedRecord):
        cli.parse_record(line, 1, 1.0)


def test_non_finite_features_exit_with_input_error(tmp_path, capsys):
    source = tmp_path / "in.jsonl"
    source.write_text('{"id": "a", "features_1": [NaN, 1e400], "features_2": [0, 0], '
                      '"oracle": 0.5}\n')
    assert cli.main(["label", "--input", str(source), "--output", str(tmp_path / "o.jsonl")]) == 2
    assert "MalformedRecord" in capsys.readouterr().err
    assert not (tmp_path / "o.jsonl").exists()


@pytest.mark.parametrize("label, scale", [
    (1.5, None),
    (-0.1, None),
    (0.3, "three_level"),
    (0.5, "binary"),
])
def test_label_outside_the_scale_is_rejected(label, scale):
    line = json.dumps({"id": "a", "features_1": [1], "features_2": [0], "oracle": 0.5,
                       "label": label})
    system = scale_preset(scale) if scale else None
    with pytest.raises(MalformedRecord):
        cli.parse_record(line, 1, 1.0, system)


def test_label_on_the_scale_or_oracle_is_accepted():
    line = json.dumps({"id": "a", "features_1": [1], "features_2": [0], "oracle": 0.5,
                       "label": 0.3})
    assert cli.parse_record(line, 1, 1.0, "oracle")["label"] == 0.3
    on_scale = line.replace("0.3", "0.5")
    assert cli.parse_record(on_scale, 1, 1.0, scale_preset("three_level"))["label"] == 0.5


def test_main_exit_codes(tmp_path, capsys):
    source = _write_jsonl(tmp_path / "in.jsonl", [
        {"id": "a", "features_1": [1.0], "features_2": [0.0]},
    ])
    assert cli.main(["label", "--input", str(source), "--output", str(tmp_path / "o.jsonl")]) == 2
    assert "MissingOracle" in capsys.readouterr().err

    good = _write_jsonl(tmp_path / "good.jsonl", [
        {"id": "a", "features_1": [1.0], "features_2": [0.0], "oracle": 0.5},
    ])
    args = ["label", "--input", str(good), "--output", str(tmp_path / "o.jsonl"),
            "--scale", "0,0.5,1"]
    assert cli.main(args) == 0
    assert "Labeled 1 records" in capsys.readouterr().out

    assert cli.main(["label", "--input", str(tmp_path / "missing.jsonl"),
                     "--output", str(tmp_path / "o.jsonl")]) == 2


# ============================================================
# verify
# ============================================================

def test_affinity_suite_passes():
    verdict = cli.cmd_verify("affinity", seed=0)
    assert verdict["pass"]
    assert len(verdict["results"]) == 4


def test_coupling_suite_with_fixtures():
    verdict = cli.cmd_verify("coupling", seed=0)
    assert verdict["pass"], verdict

    bad = cli.cmd_verify("coupling", seed=0, fixture=cli.CORRUPTED_FIXTURE)
    assert not bad["pass"]
    assert bad["results"][-1]["error"] == "BarycenterViolation"


def test_rademacher_suite():
    verdict = cli.cmd_verify("rademacher", seed=0, replicas=2000)
    assert verdict["pass"], verdict


@pytest.mark.slow
def test_all_suites_print_a_json_verdict(capsys):
    assert cli.main(["verify", "--suite", "all", "--replicas", "2000"]) == 0
    verdict = json.loads(capsys.readouterr().out)
    assert {r["suite"] for r in verdict["results"]} == {
        "affinity", "unbiasedness", "coupling", "rademacher"}


def test_corrupted_fixture_file_fails(tmp_path, capsys):
    fixture = tmp_path / "beta.json"
    fixture.write_text(json.dumps(cli.CORRUPTED_FIXTURE))
    assert cli.main(["verify", "--suite", "coupling", "--fixture", str(fixture)]) == 1
    verdict = json.loads(capsys.readouterr().out)
    assert not verdict["pass"]


# ============================================================
# experiment and plot
# ============================================================

def _config(tmp_path, body):
    path = tmp_path / "exp.toml"
    path.write_text(textwrap.dedent(body).replace("OUT", str(tmp_path / "out")))
    return path


def test_granularity_experiment_writes_csv_and_summary(tmp_path):
    config = _config(tmp_path, """
        [experiment]
        name = "small"
        kind = "granularity"
        seeds = [0, 1, 2]
        output_dir = "OUT"

        [world]
        dimension = 3

        [train]
        n = 60
        holdout_size = 100
        epochs = 10
        eval_every = 5

        [granularity]
        scales = ["oracle", "binary"]
    """)
    csv_path, summary_path = cli.cmd_experiment(config)
    with open(csv_path, newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2 * 3 * 3
    assert {r["scale_or_ratio"] for r in rows} == {"oracle", "binary"}

    summary = json.loads(summary_path.read_text())
    assert set(summary["table"]) == {"oracle", "binary"}
    assert "created_at" not in summary_path.read_text()

    chart = cli.cmd_plot(csv_path, tmp_path / "ce.svg", "oracle_ce")
    text = chart.read_text()
    assert 'id="series-1"' in text and 'id="series-2"' not in text


def test_rademacher_experiment(tmp_path):
    config = _config(tmp_path, """
        [experiment]
        name = "rad"
        kind = "rademacher"
        seeds = [0]
        output_dir = "OUT"

        [rademacher]
        systems = ["oracle", "binary"]
        n_datasets = 50
    """)
    csv_path, summary_path = cli.cmd_experiment(config)
    with open(csv_path, newline="") as f:
        rows = list(csv.DictReader(f))
    assert [r["system"] for r in rows] == ["oracle", "binary"]
    assert "comparisons" in json.loads(summary_path.read_text())["reports"]["0"]


def test_softlabel_experiment(tmp_path):
    config = _config(tmp_path, """
        [experiment]
        name = "soft"
        kind = "softlabel"
        seeds = [0]
        output_dir = "OUT"

        [softlabel]
        n = 4
        n_datasets = 10
        ensemble_size = 2
        teacher_pool = 60
    """)
    csv_path, summary_path = cli.cmd_experiment(config)
    report = json.loads(summary_path.read_text())["reports"]["0"]
    assert set(report) == {"marginal_check", "bias_term", "report", "reduction_gate"}
    gaps = report["report"]["gaps"]
    assert len(gaps) == 3
    expected_gate = (not report["marginal_check"]["pass"]) or all(g["holds"] for g in gaps)
    assert report["reduction_gate"] is expected_gate
    with open(csv_path, newline="") as f:
        assert len(list(csv.DictReader(f))) == 4


def test_experiment_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text('[experiment]\nname = "x"\nkind = "granularity"\nseeds = []\n')
    assert cli.main(["experiment", "--config", str(path)]) == 2
    assert "experiment.seeds" in capsys.readouterr().err


def test_plot_averages_over_seeds(tmp_path):
    store = RunStore(tmp_path / "runs.db")
    experiment_id = store.create_experiment("p", "granularity", {})
    for seed, ce in ((0, 0.4), (1, 0.6)):
        store.save_run(experiment_id, "binary", RunReport(
            "binary", seed, [EvalPoint(0, 0.7, 0.5, 0.5), EvalPoint(5, ce, 0.8, 0.7)]))
    csv_path = store.export_csv(experiment_id, tmp_path / "p.csv")
    chart = cli.cmd_plot(csv_path, tmp_path / "p.svg", "oracle_ce")
    assert 'id="series-0"' in chart.read_text()
    assert cli.main(["plot", "--input", str(tmp_path / "nope.csv"),
                     "--output", str(tmp_path / "x.svg")]) == 2


def test_experiment_csv_is_byte_identical_across_runs(tmp_path):
    body = """
        [experiment]
        name = "again"
        kind = "tied_ratio"
        seeds = [0, 1]
        output_dir = "OUT"

        [world]
        dimension = 3

        [train]
        n = 40
        holdout_size = 50
        epochs = 6
        eval_every = 3

        [tied_ratio]
        ratios = [0.0, 0.5]
    """
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    first_csv, _ = cli.cmd_experiment(_config(tmp_path / "a", body))
    second_csv, _ = cli.cmd_experiment(_config(tmp_path / "b", body))
    assert first_csv != second_csv
    assert first_csv.read_bytes() == second_csv.read_bytes()


def test_stats_lists_experiments_and_settings(tmp_path, capsys):
    db = tmp_path / "runs.db"
    store = RunStore(db)
    experiment_id = store.create_experiment("s", "granularity", {})
    for seed, ce in ((0, 0.4), (1, 0.6)):
        store.save_run(experiment_id, "binary", RunReport(
            "binary", seed, [EvalPoint(0, 0.7, 0.5, 0.5), EvalPoint(5, ce, 0.8, 0.7)]))

    listing = cli.cmd_stats(db)
    assert [e["id"] for e in listing["experiments"]] == [experiment_id]
    assert listing["size_bytes"] > 0

    detail = cli.cmd_stats(db, experiment_id)
    assert detail["experiment"]["name"] == "s"
    assert detail["stats"]["total_runs"] == 2
    assert detail["stats"]["settings"]["binary"]["oracle_ce"] == pytest.approx(0.5)

    assert cli.main(["stats", "--db", str(db), "--experiment", experiment_id]) == 0
    assert "binary: runs=2 oracle_ce=0.5000" in capsys.readouterr().out
    assert cli.main(["stats", "--db", str(db), "--experiment", "nope"]) == 2
    assert cli.main(["stats", "--db", str(tmp_path / "missing.db")]) == 2
    assert not (tmp_path / "missing.db").exists()


def test_experiment_uses_the_configured_store(tmp_path, monkeypatch, capsys):
    db = tmp_path / "shared" / "store.db"
    monkeypatch.setenv("ORDFB_DB_PATH", str(db))
    config = _config(tmp_path, """
        [experiment]
        name = "routed"
        kind = "rademacher"
        seeds = [0]
        output_dir = "OUT"

        [rademacher]
        systems = ["oracle", "binary"]
        n_datasets = 20
    """)
    cli.cmd_experiment(config)
    assert db.exists()
    assert not (tmp_path / "out" / "runs.db").exists()
    assert cli.main(["stats"]) == 0
    assert "1 experiments" in capsys.readouterr().out
