#!/usr/bin/env python3
"""
Command-line interface for ordinal feedback experiments
label: fill JSONL preference records with sampled ordinal labels
experiment: run a TOML-configured sweep and write CSV + summary JSON
verify: run property suites and print a JSON verdict
plot: draw eval curves from an experiment CSV
stats: summarize experiments in the run store
"""

import argparse
import csv
import json
import logging
import math
import sys
from collections import defaultdict
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv

from complexity_lab import RademacherMode, ordering_report, tiny_instance
from core_types import (
    ConfigError,
    EmptySample,
    FeedbackSystem,
    MalformedRecord,
    MissingOracle,
    OrdinalFeedbackError,
    is_oracle,
    make_rng,
    parse_system,
    scale_preset,
    shard_seeds,
)
from coupling_he import check_conditions, find_coupling, to_binary_coupling
from experiment_config import ExperimentConfig, get_settings, load_config
from feedback_synthesis import (
    alg1_three_level,
    check_unbiasedness,
    label_histogram,
    random_unbiased_measure,
    sample_labels,
    smallest_interval_measure,
)
from losses import LossKind, sigmoid, verify_affinity
from reward_trainer import SyntheticWorld, granularity_sweep, tied_ratio_sweep
from run_store import get_run_store
from soft_label_lab import (
    SoftLabel,
    SoftLabelWorld,
    check_marginal_unbiasedness,
    estimate_bias_term,
    random_softmax_class,
    soft_label_coupling,
    train_teacher_ensemble,
    variance_reduction_report,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT_ERROR = 2

MARGIN_GRID = np.linspace(-6.0, 6.0, 13)
PRESETS = ("binary", "three_level", "five_level")


# ============================================================
# JSONL records
# ============================================================

def _number_list(value: Any, key: str, line: int) -> List[float]:
    if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise MalformedRecord(line, f"{key} must be an array of numbers")
    numbers = [float(v) for v in value]
    if not all(math.isfinite(v) for v in numbers):
        raise MalformedRecord(line, f"{key} must hold finite numbers")
    return numbers


def _optional_number(record: Dict[str, Any], key: str, line: int) -> Optional[float]:
    value = record.get(key)
    if value is None:
        return None
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise MalformedRecord(line, f"{key} must be a finite number")
    return float(value)


def _check_label(label: float, scale: Optional[FeedbackSystem], line: int) -> None:
    if not 0.0 <= label <= 1.0:
        raise MalformedRecord(line, f"label {label} outside [0, 1]")
    if scale is not None and not is_oracle(scale) and not scale.contains(label):
        raise MalformedRecord(line, f"label {label} is not a level of {scale.levels}")


def parse_record(text: str, line: int, temperature: float,
                 scale: Optional[FeedbackSystem] = None) -> Dict[str, Any]:
    """
    Validate one JSONL preference record and resolve its oracle

    A label already on the record must be a level of scale (any value in
    [0, 1] for the oracle system, or when no scale is given).

    Returns:
        the record with an "oracle" key filled in
    """
    try:
        record = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedRecord(line, f"invalid JSON: {e.msg}") from None
    if not isinstance(record, dict):
        raise MalformedRecord(line, "record must be a JSON object")
    if not isinstance(record.get("id"), str):
        raise MalformedRecord(line, "id must be a string")

    features1 = _number_list(record.get("features_1"), "features_1", line)
    features2 = _number_list(record.get("features_2"), "features_2", line)
    if len(features1) != len(features2):
        raise MalformedRecord(line, "features_1 and features_2 differ in length")

    oracle = _optional_number(record, "oracle", line)
    score1 = _optional_number(record, "score_1", line)
    score2 = _optional_number(record, "score_2", line)
    if (score1 is None) != (score2 is None):
        raise MalformedRecord(line, "score_1 and score_2 must appear together")
    if oracle is not None and score1 is not None:
        raise MalformedRecord(line, "record has both oracle and scores")
    if oracle is not None and not 0.0 <= oracle <= 1.0:
        raise MalformedRecord(line, f"oracle {oracle} outside [0, 1]")
    label = _optional_number(record, "label", line)
    if label is not None:
        _check_label(label, scale, line)

    if oracle is None:
        if score1 is None:
            raise MissingOracle(
                f"line {line}: record {record['id']!r} has neither oracle nor scores")
        oracle = float(sigmoid((score1 - score2) / temperature))

    out = dict(record)
    out["features_1"] = features1
    out["features_2"] = features2
    out["oracle"] = oracle
    return out


def read_records(path: Path, temperature: float,
                 scale: Optional[FeedbackSystem] = None) -> List[Dict[str, Any]]:
    records: List[Dict[str, Any]] = []
    width = None
    with open(path, "rb") as f:
        for line_number, raw in enumerate(f, start=1):
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise MalformedRecord(line_number, "not valid UTF-8") from None
            if not text.strip():
                continue
            record = parse_record(text, line_number, temperature, scale)
            if width is None:
                width = len(record["features_1"])
            elif len(record["features_1"]) != width:
                raise MalformedRecord(line_number, f"feature length {len(record['features_1'])}, "
                                                   f"expected {width}")
            records.append(record)
    return records


def write_records(path: Path, records: Sequence[Dict[str, Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for record in records:
            f.write(json.dumps(record) + "\n")


def _parse_scale(text: str) -> FeedbackSystem:
    if "," in text:
        try:
            levels = [float(v) for v in text.split(",")]
        except ValueError:
            raise ConfigError("--scale", f"not a list of numbers: {text!r}") from None
        return parse_system(levels)
    return parse_system(text)


# ============================================================
# label
# ============================================================

def cmd_label(input_path: Path, output_path: Path, scale: FeedbackSystem,
              temperature: float, seed: int, replicate: int = 1) -> Dict[str, Any]:
    """Label every record (replicated `replicate` times) and write JSONL."""
    if replicate < 1:
        raise ConfigError("--replicate", "must be at least 1")
    records = read_records(input_path, temperature, scale)

    expanded = []
    for record in records:
        for r in range(replicate):
            copy = dict(record)
            if replicate > 1:
                copy["id"] = f"{record['id']}-{r}"
            expanded.append(copy)

    oracles = np.array([record["oracle"] for record in expanded], dtype=np.float64)
    uniforms = make_rng(seed).random(oracles.size)
    labels = sample_labels(scale, oracles, uniforms)
    for record, label in zip(expanded, labels):
        record["label"] = float(label)
    write_records(output_path, expanded)

    histogram = None if is_oracle(scale) else label_histogram(labels, scale)
    logger.info("Labeled %d records from %s", len(expanded), input_path)
    return {"count": len(expanded), "histogram": histogram}


# ============================================================
# experiment
# ============================================================

def _write_csv(path: Path, headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows(rows)
    return path


def _write_json(path: Path, data: Dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def _run_training_sweep(config: ExperimentConfig, workers: int, progress: bool):
    world = SyntheticWorld.create(config.world.dimension, config.world.temperature,
                                  config.world.seed)
    cfg = config.train.to_train_config()
    if config.kind == "granularity":
        return granularity_sweep(world, config.train.n, config.granularity.scales,
                                 config.seeds, cfg, config.train.holdout_size, workers, progress)
    return tied_ratio_sweep(world, config.train.n, config.tied_ratio.ratios,
                            config.seeds, cfg, config.train.holdout_size, workers, progress)


def _run_rademacher(config: ExperimentConfig, workers: int, progress: bool):
    section = config.rademacher
    distribution, hclass = tiny_instance(section.n)
    rows, per_seed = [], {}
    for seed in config.seeds:
        report = ordering_report(section.systems, distribution, hclass, LossKind(section.loss),
                                 RademacherMode.parse(section.mode), seed, section.n_datasets,
                                 workers=workers, progress=progress)
        per_seed[str(seed)] = report.to_dict()
        rows.extend((seed, name, est.value, est.stderr) for name, est in report.rows)
    return rows, per_seed


def _run_softlabel(config: ExperimentConfig, workers: int):
    section = config.softlabel
    world = SoftLabelWorld.create(section.k, section.dimension, seed=config.world.seed)
    hclass = random_softmax_class(section.k, section.dimension, section.hypotheses,
                                  section.radius, seed=config.world.seed)
    rows, per_seed = [], {}
    for seed in config.seeds:
        teacher_seed, check_seed, bias_seed, report_seed = shard_seeds(seed, 4)
        teacher = train_teacher_ensemble(world, section.teacher_pool, section.ensemble_size,
                                         teacher_seed, workers=workers)
        check = check_marginal_unbiasedness(world, teacher, seed=check_seed)
        bias = estimate_bias_term(world, teacher, hclass, seed=bias_seed)
        report = variance_reduction_report(world, teacher, hclass, section.n, section.n_datasets,
                                           report_seed, RademacherMode.parse(section.mode))
        per_seed[str(seed)] = {
            "marginal_check": check.to_dict(),
            "bias_term": bias.to_dict(),
            "report": report.to_dict(),
            "reduction_gate": (not check.passed) or all(g.holds for g in report.gaps),
        }
        for name, est in (("y", report.rad_y), ("teacher", report.rad_teacher),
                          ("sampled_teacher", report.rad_sampled_teacher),
                          ("oracle", report.rad_oracle)):
            rows.append((seed, name, est.value, est.stderr))
    return rows, per_seed


def cmd_experiment(config_path: Path, progress: bool = False) -> Tuple[Path, Path]:
    """Run one configured experiment; returns (csv path, summary json path)."""
    config = load_config(config_path)
    settings = get_settings()
    output_dir = config.output_dir
    csv_path = output_dir / f"{config.name}.csv"
    summary_path = output_dir / f"{config.name}_summary.json"
    summary: Dict[str, Any] = {"name": config.name, "kind": config.kind,
                               "seeds": list(config.seeds)}

    store = get_run_store(output_dir, settings.db_path)
    experiment_id = store.create_experiment(config.name, config.kind, config.as_dict())

    if config.kind in ("granularity", "tied_ratio"):
        table = _run_training_sweep(config, settings.threads, progress)
        for key, report in table.runs:
            store.save_run(experiment_id, key, report)
        store.export_csv(experiment_id, csv_path)
        summary["table"] = table.summary()
    elif config.kind == "rademacher":
        rows, per_seed = _run_rademacher(config, settings.threads, progress)
        _write_csv(csv_path, ["seed", "system", "rademacher", "stderr"], rows)
        summary["reports"] = per_seed
    else:
        rows, per_seed = _run_softlabel(config, settings.threads)
        _write_csv(csv_path, ["seed", "paradigm", "rademacher", "stderr"], rows)
        summary["reports"] = per_seed

    store.save_summary(experiment_id, summary)
    _write_json(summary_path, summary)
    return csv_path, summary_path


# ============================================================
# verify
# ============================================================

Verdict = Dict[str, Any]


def _verdict(suite: str, prop: str, passed: bool, **details) -> Verdict:
    return {"suite": suite, "property": prop, "pass": bool(passed), **details}


def suite_affinity(seed: int, **_) -> List[Verdict]:
    rng = make_rng(seed)
    scales = [scale_preset(name) for name in PRESETS]
    measures = [random_unbiased_measure(scales[i % len(scales)], rng)[0] for i in range(100)]
    verdicts = []
    for kind in (LossKind.CE, LossKind.HINGE, LossKind.DPO):
        gap = max(verify_affinity(kind, m, MARGIN_GRID) for m in measures)
        verdicts.append(_verdict("affinity", f"{kind.value} affine in label", gap <= 1e-12,
                                 max_gap=gap))
    gap = max(verify_affinity(LossKind.SQUARED, m, MARGIN_GRID) for m in measures)
    verdicts.append(_verdict("affinity", "squared loss is not affine", gap >= 0.1, max_gap=gap))
    return verdicts


def suite_unbiasedness(seed: int, **_) -> List[Verdict]:
    rng = make_rng(seed)
    verdicts = []
    for name in PRESETS:
        scale = scale_preset(name)
        oracles = rng.uniform(0.0, 1.0, 1000)
        worst = max(abs(smallest_interval_measure(scale, float(o)).mean() - o) for o in oracles)
        verdicts.append(_verdict("unbiasedness", f"{name} smallest-interval mean", worst <= 1e-12,
                                 max_error=worst))

    worked = smallest_interval_measure(scale_preset("three_level"), 0.8).mass
    verdicts.append(_verdict("unbiasedness", "oracle 0.8 on three levels gives 0.4 / 0.6",
                             abs(worked[1] - 0.4) <= 1e-12 and abs(worked[2] - 0.6) <= 1e-12,
                             mass=list(worked)))

    oracles = rng.uniform(0.0, 1.0, 1_000_000)
    uniforms = rng.random(oracles.size)
    same = np.array_equal(sample_labels(scale_preset("three_level"), oracles, uniforms),
                          alg1_three_level(oracles, uniforms))
    verdicts.append(_verdict("unbiasedness", "three-level sampler matches reference routine",
                             same))

    samples = sample_labels(scale_preset("binary"), np.full(100_000, 0.3), rng.random(100_000))
    report = check_unbiasedness(samples, 0.3)
    verdicts.append(_verdict("unbiasedness", "binary labels average to the oracle", report.passed,
                             **report.to_dict()))
    return verdicts


CORRUPTED_FIXTURE = {
    "fine_levels": [0.0, 0.5, 1.0],
    "coarse_levels": [0.0, 1.0],
    "beta": [[1.0, 0.0], [0.7, 0.3], [0.0, 1.0]],
}


def _check_fixture(fixture: Dict[str, Any]) -> Optional[str]:
    """Name of the violated condition, or None when the fixture is valid."""
    try:
        check_conditions(np.asarray(fixture["beta"]), np.asarray(fixture["fine_levels"]),
                         np.asarray(fixture["coarse_levels"]),
                         fixture.get("fine_mass"), fixture.get("coarse_mass"))
    except OrdinalFeedbackError as e:
        return type(e).__name__
    return None


def suite_coupling(seed: int, fixture: Optional[Dict[str, Any]] = None, **_) -> List[Verdict]:
    rng = make_rng(seed)
    verdicts = []
    for name in PRESETS:
        scale = scale_preset(name)
        failures = 0
        for _ in range(1000):
            measure, _oracle = random_unbiased_measure(scale, rng)
            try:
                to_binary_coupling(measure)
            except OrdinalFeedbackError:
                failures += 1
        verdicts.append(_verdict("coupling", f"{name} couples to binary", failures == 0,
                                 failures=failures))

    points = [SoftLabel(tuple(p / p.sum())) for p in rng.dirichlet(np.ones(3), 1000)]
    try:
        soft_label_coupling(points)
        error = None
    except OrdinalFeedbackError as e:
        error = type(e).__name__
    verdicts.append(_verdict("coupling", "soft labels couple to one-hot vertices", error is None,
                             error=error))

    error = _check_fixture(CORRUPTED_FIXTURE)
    verdicts.append(_verdict("coupling", "corrupted builtin fixture is rejected",
                             error == "BarycenterViolation", error=error))

    five, three = scale_preset("five_level"), scale_preset("three_level")
    found = 0
    for o in np.linspace(0.05, 0.95, 19):
        try:
            coupling = find_coupling(smallest_interval_measure(five, o),
                                     smallest_interval_measure(three, o))
        except OrdinalFeedbackError:
            coupling = None
        found += coupling is not None
    verdicts.append(_verdict("coupling", "five-level to three-level couplings found (report only)",
                             True, found=found, of=19))

    if fixture is not None:
        error = _check_fixture(fixture)
        verdicts.append(_verdict("coupling", "fixture satisfies coupling conditions",
                                 error is None, error=error))
    return verdicts


def suite_rademacher(seed: int, replicas: int = 5000, **_) -> List[Verdict]:
    distribution, hclass = tiny_instance(4)
    systems = ["oracle"] + [scale_preset(n) for n in ("five_level", "three_level", "binary")]
    report = ordering_report(systems, distribution, hclass, LossKind.CE, RademacherMode(),
                             seed, replicas)
    verdicts = []
    for first, second in (("oracle", "three_level"), ("three_level", "binary"),
                          ("oracle", "five_level"), ("five_level", "binary")):
        c = report.comparison(first, second)
        verdicts.append(_verdict("rademacher", f"{first} <= {second}", c.holds, **c.to_dict()))
    c = report.comparison("oracle", "binary")
    verdicts.append(_verdict("rademacher", "binary exceeds oracle", c.strict, **c.to_dict()))
    return verdicts


SUITES: Dict[str, Callable[..., List[Verdict]]] = {
    "affinity": suite_affinity,
    "unbiasedness": suite_unbiasedness,
    "coupling": suite_coupling,
    "rademacher": suite_rademacher,
}


def cmd_verify(suite: str, seed: int = 0, fixture: Optional[Dict[str, Any]] = None,
               replicas: int = 5000) -> Dict[str, Any]:
    names = list(SUITES) if suite == "all" else [suite]
    results: List[Verdict] = []
    for name in names:
        results.extend(SUITES[name](seed=seed, fixture=fixture, replicas=replicas))
    return {"pass": all(r["pass"] for r in results), "results": results}


# ============================================================
# plot
# ============================================================

def cmd_plot(input_path: Path, output_path: Path, metric: str = "oracle_ce") -> Path:
    """Average an experiment CSV over seeds and chart one metric per setting."""
    from svg_chart import write_line_chart

    sums: Dict[str, Dict[int, List[float]]] = defaultdict(lambda: defaultdict(list))
    with open(input_path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or metric not in reader.fieldnames:
            raise ConfigError("--metric", f"column {metric!r} not in {input_path}")
        for line, row in enumerate(reader, start=2):
            try:
                sums[row["scale_or_ratio"]][int(row["epoch"])].append(float(row[metric]))
            except (KeyError, ValueError) as e:
                raise MalformedRecord(line, str(e)) from None

    series = {
        key: [(epoch, float(np.mean(values))) for epoch, values in sorted(by_epoch.items())]
        for key, by_epoch in sums.items()
    }
    if not series:
        raise EmptySample(f"no eval rows in {input_path}")
    return write_line_chart(output_path, series, title=f"{metric} by epoch",
                            x_label="epoch", y_label=metric)


# ============================================================
# stats
# ============================================================

def cmd_stats(db_path: Path, experiment_id: Optional[str] = None) -> Dict[str, Any]:
    """
    Summarize a run store: every experiment, or the per-setting final
    metrics of one experiment.
    """
    if not Path(db_path).exists():
        raise FileNotFoundError(f"no run store at {db_path}")
    store = get_run_store(db_path=db_path)
    if experiment_id is None:
        return {"experiments": store.list_experiments(),
                "size_bytes": store.get_database_size()}

    experiment = store.get_experiment(experiment_id)
    if experiment is None:
        raise ConfigError("--experiment", f"unknown experiment id {experiment_id!r}")
    return {"experiment": {k: experiment[k] for k in ("id", "name", "kind", "created_at")},
            "stats": store.get_experiment_stats(experiment_id)}


# ============================================================
# Entry point
# ============================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Reward learning from ordinal feedback")
    sub = parser.add_subparsers(dest="command", required=True)

    label = sub.add_parser("label", help="Sample ordinal labels for JSONL records")
    label.add_argument("--input", required=True, type=Path, help="Input JSONL file")
    label.add_argument("--output", required=True, type=Path, help="Output JSONL file")
    label.add_argument("--scale", default="three_level",
                       help="oracle, binary, three_level, five_level or comma-separated levels")
    label.add_argument("--temperature", type=float, default=20.0 / 3.0,
                       help="Score temperature T (default: 20/3)")
    label.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    label.add_argument("--replicate", type=int, default=1,
                       help="Repeat every record N times (default: 1)")

    experiment = sub.add_parser("experiment", help="Run a configured experiment")
    experiment.add_argument("--config", required=True, type=Path, help="TOML experiment file")
    experiment.add_argument("--progress", action="store_true", help="Show progress bars")

    verify = sub.add_parser("verify", help="Run property suites")
    verify.add_argument("--suite", default="all", choices=[*SUITES, "all"])
    verify.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    verify.add_argument("--fixture", type=Path, help="JSON coupling fixture to check")
    verify.add_argument("--replicas", type=int, default=5000,
                        help="Dataset replicas for the rademacher suite (default: 5000)")

    plot = sub.add_parser("plot", help="Chart eval curves from an experiment CSV")
    plot.add_argument("--input", required=True, type=Path, help="Experiment CSV")
    plot.add_argument("--output", required=True, type=Path,
                      help="Output chart (.svg, .png or .pdf)")
    plot.add_argument("--metric", default="oracle_ce", choices=["oracle_ce", "id_acc", "ood_acc"])

    stats = sub.add_parser("stats", help="Summarize experiments in the run store")
    stats.add_argument("--db", type=Path,
                       help="SQLite run store (default: ORDFB_DB_PATH or ./runs.db)")
    stats.add_argument("--experiment", help="Experiment ID for per-setting final metrics")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    try:
        settings = get_settings()
        logging.basicConfig(level=getattr(logging, settings.log_level, logging.INFO),
                            stream=sys.stderr,
                            format="%(asctime)s %(name)s %(levelname)s %(message)s")

        if args.command == "label":
            summary = cmd_label(args.input, args.output, _parse_scale(args.scale),
                                args.temperature, args.seed, args.replicate)
            print(f"✅ Labeled {summary['count']} records -> {args.output}")
            if summary["histogram"]:
                print("📊 Label histogram:")
                for level, share in summary["histogram"].items():
                    print(f"   {level:g}: {share:.4f}")
            return EXIT_OK

        if args.command == "experiment":
            csv_path, summary_path = cmd_experiment(args.config, args.progress)
            print("✅ Experiment finished")
            print(f"📁 CSV: {csv_path}")
            print(f"📊 Summary: {summary_path}")
            return EXIT_OK

        if args.command == "verify":
            fixture = None
            if args.fixture is not None:
                try:
                    fixture = json.loads(args.fixture.read_text())
                except json.JSONDecodeError as e:
                    raise MalformedRecord(e.lineno, e.msg) from None
            verdict = cmd_verify(args.suite, args.seed, fixture, args.replicas)
            print(json.dumps(verdict, indent=2))
            return EXIT_OK if verdict["pass"] else EXIT_FAILED

        if args.command == "stats":
            db_path = args.db or Path(settings.db_path or "runs.db")
            stats = cmd_stats(db_path, args.experiment)
            if args.experiment is None:
                print(f"🗄️  {db_path}: {len(stats['experiments'])} experiments, "
                      f"{stats['size_bytes']} bytes")
                for experiment in stats["experiments"]:
                    print(f"   {experiment['id']}  {experiment['kind']:<12} "
                          f"{experiment['name']}  ({experiment['created_at']})")
                return EXIT_OK
            experiment = stats["experiment"]
            print(f"📊 {experiment['name']} ({experiment['kind']}): "
                  f"{stats['stats']['total_runs']} runs")
            for setting, row in stats["stats"]["settings"].items():
                print(f"   {setting}: runs={row['runs']} oracle_ce={row['oracle_ce']:.4f} "
                      f"id_acc={row['id_acc']:.4f} ood_acc={row['ood_acc']:.4f}")
            return EXIT_OK

        path = cmd_plot(args.input, args.output, args.metric)
        print(f"📈 Chart written to {path}")
        return EXIT_OK

    except (OrdinalFeedbackError, OSError) as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
