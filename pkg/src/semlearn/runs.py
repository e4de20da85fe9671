"""Run orchestration: replay cohorts, grid tuning, analysis, and report files.

Every run writes a manifest (config snapshot, input digests, seed) into its
outputs; rerunning with the same inputs and seed reproduces every file
byte-for-byte, at any worker count. Reports carry no timestamps for that
reason.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .data import Dataset, DataError, load_events, split_learners
from .evaluation import (
    LearnerScore,
    SESSION_FEATURES,
    Trace,
    aggregate,
    paired_t_test_one_tailed,
    recall_by_event_index,
    session_feature_table,
    session_feature_srocc,
    score_learner,
)
from .novel import ModelConfig, replay_session
from .relatedness import SRTable, load_sr_table
from .semantic import PropagationConfig, SemanticPropagator

log = logging.getLogger(__name__)

MODEL_BASELINE = "truelearn-novel"
MODEL_SEMANTIC = "semantic-truelearn"
MODELS = (MODEL_BASELINE, MODEL_SEMANTIC)

SIGNIFICANCE_LEVEL = 0.01

REPORT_FILENAME = "report.json"
SUMMARY_FILENAME = "summary.csv"
BEST_CONFIG_FILENAME = "best_config.json"
TUNING_FILENAME = "tuning_results.csv"
SROCC_FILENAME = "srocc.csv"
RECALL_SERIES_FILENAME = "recall_by_event.csv"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce a run's outputs byte-identically."""

    command: str
    package_version: str
    models: list[str]
    model_config: dict
    propagation_config: dict | None
    seed: int | None
    train_fraction: float | None
    top_learners: int | None
    inputs: dict[str, str]  # input name -> sha256
    outputs: list[str]

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def select_top_learners(dataset: Dataset, n: int) -> Dataset:
    """Keep the n learners with the most events; ties break by learner id."""
    if n < 1:
        raise ValueError(f"top_learners must be >= 1, got {n}")
    ranked = sorted(dataset.learners, key=lambda lid: (-len(dataset.learners[lid]), lid))
    keep = set(ranked[:n])
    return Dataset(
        learners={lid: evs for lid, evs in dataset.learners.items() if lid in keep},
        ingest=dataset.ingest,
    )


# --- cohort replay (cross-learner parallel, per-learner sequential) ---

_WORKER_REPLAYER = None


def _build_replayer(model_id, base_cfg, table, prop_cfg):
    if model_id == MODEL_BASELINE:
        return lambda events: replay_session(events, base_cfg)
    if model_id == MODEL_SEMANTIC:
        if table is None or prop_cfg is None:
            raise ValueError("semantic model needs an SR table and a propagation config")
        propagator = SemanticPropagator(table, prop_cfg, base_cfg)
        return lambda events: replay_session(events, base_cfg, propagator)
    raise ValueError(f"unknown model {model_id!r}; expected one of {MODELS}")


def _init_worker(model_id, base_cfg, table, prop_cfg):
    global _WORKER_REPLAYER
    _WORKER_REPLAYER = _build_replayer(model_id, base_cfg, table, prop_cfg)


def _replay_one(item):
    learner_id, events = item
    return learner_id, _WORKER_REPLAYER(events)


def replay_cohort(
    dataset: Dataset,
    learner_ids: list[str],
    model_id: str,
    base_cfg: ModelConfig,
    table: SRTable | None = None,
    prop_cfg: PropagationConfig | None = None,
    workers: int = 1,
) -> dict[str, Trace]:
    """Replay each listed learner's session independently.

    Output is assembled in sorted learner order, so it is identical at any
    worker count.
    """
    items = [(lid, dataset.learners[lid]) for lid in sorted(learner_ids)]
    if workers <= 1:
        replayer = _build_replayer(model_id, base_cfg, table, prop_cfg)
        return {lid: replayer(events) for lid, events in items}
    traces: dict[str, Trace] = {}
    with ProcessPoolExecutor(
        max_workers=workers,
        initializer=_init_worker,
        initargs=(model_id, base_cfg, table, prop_cfg),
    ) as pool:
        for lid, trace in pool.map(_replay_one, items, chunksize=16):
            traces[lid] = trace
    return {lid: traces[lid] for lid, _ in items}


# --- evaluate ---


@dataclass
class ModelResult:
    model_id: str
    sr_metric: str | None
    omega: int | None  # None = all (when sr_metric set), irrelevant otherwise
    scores: list[LearnerScore]
    weighted: tuple[float, float, float]
    traces: dict[str, Trace]


def _run_model(dataset, learner_ids, model_id, base_cfg, table, prop_cfg, workers):
    traces = replay_cohort(dataset, learner_ids, model_id, base_cfg, table, prop_cfg, workers)
    scores = [score_learner(lid, trace) for lid, trace in traces.items()]
    semantic = model_id == MODEL_SEMANTIC
    return ModelResult(
        model_id=model_id,
        sr_metric=table.metric if semantic and table is not None else None,
        omega=prop_cfg.omega_size if semantic and prop_cfg is not None else None,
        scores=scores,
        weighted=aggregate(scores),
        traces=traces,
    )


def _model_report(result: ModelResult) -> dict:
    precision, recall, f1 = result.weighted
    return {
        "model_id": result.model_id,
        "sr_metric": result.sr_metric,
        "omega": "all" if result.sr_metric and result.omega is None else result.omega,
        "weighted": {"precision": precision, "recall": recall, "f1": f1},
        "learners": [
            {
                "learner_id": s.learner_id,
                "n_events": s.n_events,
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "predictions": [p for p, _ in s.trace],
                "labels": [l for _, l in s.trace],
            }
            for s in sorted(result.scores, key=lambda s: s.learner_id)
        ],
    }


def write_json_report(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_summary_csv(path: Path, digest: str, results: list[ModelResult]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# manifest_digest={digest}\n")
        writer = csv.writer(fh)
        writer.writerow(["Algorithm", "SR Metric", "Prec.", "Rec.", "F1"])
        for result in results:
            precision, recall, f1 = result.weighted
            writer.writerow(
                [
                    result.model_id,
                    result.sr_metric or "-",
                    f"{precision:.4f}",
                    f"{recall:.4f}",
                    f"{f1:.4f}",
                ]
            )


def evaluate_run(
    data_path,
    out_dir,
    model: str = MODEL_BASELINE,
    *,
    sr_table_path=None,
    sr_metric: str | None = None,
    base_cfg: ModelConfig | None = None,
    prop_cfg: PropagationConfig | None = None,
    seed: int = 42,
    train_fraction: float = 0.7,
    top_learners: int | None = None,
    compare: bool = False,
    workers: int = 1,
    data_format: str = "auto",
    top_topics: int | None = None,
) -> dict:
    """Replay the test split under one model (or both with compare) and write reports."""
    base_cfg = base_cfg or ModelConfig()
    models = [MODEL_BASELINE, MODEL_SEMANTIC] if compare else [model]
    needs_sr = MODEL_SEMANTIC in models
    if needs_sr:
        if sr_table_path is None:
            raise DataError("the semantic model needs --sr-table before any replay can start")
        prop_cfg = prop_cfg or PropagationConfig()
        if sr_metric is not None:
            prop_cfg = prop_cfg.replaced(sr_metric=sr_metric)
        table = load_sr_table(sr_table_path, prop_cfg.sr_metric)
    else:
        table, prop_cfg = None, None

    dataset = load_events(data_path, fmt=data_format, top_topics=top_topics)
    if top_learners is not None:
        dataset = select_top_learners(dataset, top_learners)
    dataset = split_learners(dataset, train_fraction, seed)
    test_ids = dataset.test_ids()

    results = [
        _run_model(dataset, test_ids, mid, base_cfg, table, prop_cfg, workers)
        for mid in models
    ]

    comparison = None
    if compare:
        baseline, candidate = results[0], results[1]
        by_id_a = {s.learner_id: s for s in baseline.scores}
        by_id_b = {s.learner_id: s for s in candidate.scores}
        ids = sorted(by_id_a)
        comparison = {"baseline": baseline.model_id, "candidate": candidate.model_id, "metrics": {}}
        for metric in ("precision", "recall", "f1"):
            t, p = paired_t_test_one_tailed(
                [getattr(by_id_a[lid], metric) for lid in ids],
                [getattr(by_id_b[lid], metric) for lid in ids],
            )
            comparison["metrics"][metric] = {"t": t, "p": p}

    inputs = {"data": file_digest(data_path)}
    if needs_sr:
        inputs["sr_table"] = file_digest(sr_table_path)
    manifest = RunManifest(
        command="evaluate",
        package_version=__version__,
        models=models,
        model_config=asdict(base_cfg),
        propagation_config=asdict(prop_cfg) if prop_cfg else None,
        seed=seed,
        train_fraction=train_fraction,
        top_learners=top_learners,
        inputs=inputs,
        outputs=[REPORT_FILENAME, SUMMARY_FILENAME],
    )
    digest = manifest.digest()
    report = {
        "manifest": manifest.to_dict(),
        "manifest_digest": digest,
        "n_test_learners": len(test_ids),
        "models": [_model_report(r) for r in results],
        "comparison": comparison,
    }

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / REPORT_FILENAME
    summary_path = out_dir / SUMMARY_FILENAME
    write_json_report(report, report_path)
    _write_summary_csv(summary_path, digest, results)
    return {"report": report_path, "summary": summary_path, "report_obj": report}


# --- tune ---


def load_grid(path) -> list[ModelConfig]:
    """Expand a JSON grid file ({param: [values...]}) into configs, in file order."""
    with open(path, encoding="utf-8") as fh:
        grid = json.load(fh)
    if not isinstance(grid, dict) or not grid:
        raise DataError(f"{path}: grid file must be a non-empty JSON object")
    names = list(grid)
    value_lists = []
    for name in names:
        values = grid[name]
        if not isinstance(values, list) or not values:
            raise DataError(f"{path}: grid entry {name!r} must be a non-empty list")
        value_lists.append(values)
    configs = []
    for combo in itertools.product(*value_lists):
        configs.append(ModelConfig.from_dict(dict(zip(names, combo))))
    return configs


def tune_run(
    data_path,
    grid_path,
    out_dir,
    model: str = MODEL_BASELINE,
    *,
    sr_table_path=None,
    sr_metric: str | None = None,
    prop_cfg: PropagationConfig | None = None,
    seed: int = 42,
    train_fraction: float = 0.7,
    top_learners: int | None = None,
    workers: int = 1,
    data_format: str = "auto",
    top_topics: int | None = None,
) -> dict:
    """Grid-search hyperparameters on the train split, selecting by weighted F1.

    Ties keep the earliest grid point. Writes the chosen config and the full
    per-point results table.
    """
    configs = load_grid(grid_path)
    if model == MODEL_SEMANTIC:
        if sr_table_path is None:
            raise DataError("the semantic model needs --sr-table before any replay can start")
        prop_cfg = prop_cfg or PropagationConfig()
        if sr_metric is not None:
            prop_cfg = prop_cfg.replaced(sr_metric=sr_metric)
        table = load_sr_table(sr_table_path, prop_cfg.sr_metric)
    else:
        table, prop_cfg = None, None

    dataset = load_events(data_path, fmt=data_format, top_topics=top_topics)
    if top_learners is not None:
        dataset = select_top_learners(dataset, top_learners)
    dataset = split_learners(dataset, train_fraction, seed)
    train_ids = dataset.train_ids()

    rows = []
    best_index, best_f1 = 0, -1.0
    for index, cfg in enumerate(configs):
        result = _run_model(dataset, train_ids, model, cfg, table, prop_cfg, workers)
        precision, recall, f1 = result.weighted
        rows.append((index, cfg, precision, recall, f1))
        if f1 > best_f1:
            best_index, best_f1 = index, f1
        log.info("grid point %d: F1=%.4f %s", index, f1, asdict(cfg))
    best_cfg = configs[best_index]

    inputs = {"data": file_digest(data_path), "grid": file_digest(grid_path)}
    if table is not None:
        inputs["sr_table"] = file_digest(sr_table_path)
    manifest = RunManifest(
        command="tune",
        package_version=__version__,
        models=[model],
        model_config=asdict(best_cfg),
        propagation_config=asdict(prop_cfg) if prop_cfg else None,
        seed=seed,
        train_fraction=train_fraction,
        top_learners=top_learners,
        inputs=inputs,
        outputs=[BEST_CONFIG_FILENAME, TUNING_FILENAME],
    )
    digest = manifest.digest()

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    best_path = out_dir / BEST_CONFIG_FILENAME
    tuning_path = out_dir / TUNING_FILENAME
    best_path.write_text(
        json.dumps(
            {"manifest_digest": digest, "manifest": manifest.to_dict(), "config": asdict(best_cfg)},
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    with open(tuning_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# manifest_digest={digest}\n")
        writer = csv.writer(fh)
        param_names = sorted(asdict(configs[0]))
        writer.writerow(["grid_index", *param_names, "Prec.", "Rec.", "F1", "selected"])
        for index, cfg, precision, recall, f1 in rows:
            values = asdict(cfg)
            writer.writerow(
                [
                    index,
                    *[values[name] for name in param_names],
                    f"{precision:.4f}",
                    f"{recall:.4f}",
                    f"{f1:.4f}",
                    "yes" if index == best_index else "",
                ]
            )
    return {"best_config": best_cfg, "best_f1": best_f1, "paths": [best_path, tuning_path]}


# --- analyze ---


def _load_report(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc


def _traces_from_report(model_entry: dict) -> dict[str, Trace]:
    return {
        learner["learner_id"]: list(zip(learner["predictions"], learner["labels"]))
        for learner in model_entry["learners"]
    }


def analyze_run(
    report_paths,
    data_path,
    sr_table_path,
    out_dir,
    sr_metric: str = "w2v",
    data_format: str = "auto",
    top_topics: int | None = None,
) -> dict:
    """Emit the SROCC feature table and recall-by-event series for given reports.

    All reports must come from the same dataset (digest check) and cover the
    same learner set.
    """
    reports = [_load_report(p) for p in report_paths]
    data_digest = file_digest(data_path)
    for path, report in zip(report_paths, reports):
        if report["manifest"]["inputs"]["data"] != data_digest:
            raise DataError(
                f"{path}: report was produced from a different dataset "
                "(data digest mismatch)"
            )

    models: list[tuple[str, dict[str, Trace]]] = []
    for report in reports:
        for entry in report["models"]:
            models.append((entry["model_id"], _traces_from_report(entry)))
    learner_sets = [set(traces) for _, traces in models]
    if any(s != learner_sets[0] for s in learner_sets[1:]):
        raise DataError("reports cover different learner sets; refusing to analyze")

    table = load_sr_table(sr_table_path, sr_metric)
    dataset = load_events(data_path, fmt=data_format, top_topics=top_topics)

    srocc_by_model = {}
    series_by_model = {}
    max_n = max(len(t) for _, traces in models for t in traces.values())
    for model_id, traces in models:
        rows = session_feature_table(dataset, traces, table)
        srocc_by_model[model_id] = session_feature_srocc(rows)
        series_by_model[model_id] = dict(recall_by_event_index(traces, max_n))

    manifest = RunManifest(
        command="analyze",
        package_version=__version__,
        models=[mid for mid, _ in models],
        model_config={},
        propagation_config=None,
        seed=None,
        train_fraction=None,
        top_learners=None,
        inputs={
            "data": data_digest,
            "sr_table": file_digest(sr_table_path),
            **{f"report_{i}": file_digest(p) for i, p in enumerate(report_paths)},
        },
        outputs=[SROCC_FILENAME, RECALL_SERIES_FILENAME],
    )
    digest = manifest.digest()

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    srocc_path = out_dir / SROCC_FILENAME
    series_path = out_dir / RECALL_SERIES_FILENAME
    model_ids = [mid for mid, _ in models]
    with open(srocc_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# manifest_digest={digest}\n")
        fh.write("# graph_features=full_session\n")
        writer = csv.writer(fh)
        writer.writerow(["feature", *model_ids])
        for feature in SESSION_FEATURES:
            row = [feature]
            for model_id in model_ids:
                rho, p = srocc_by_model[model_id][feature]
                significant = not math.isnan(rho) and p < SIGNIFICANCE_LEVEL
                row.append(f"{rho:.4f}" if significant else "")
            writer.writerow(row)
    with open(series_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# manifest_digest={digest}\n")
        fh.write("# recall=cumulative\n")
        writer = csv.writer(fh)
        writer.writerow(["n", *[f"recall_{mid}" for mid in model_ids]])
        for n in range(1, max_n + 1):
            if all(n not in series_by_model[mid] for mid in model_ids):
                break
            writer.writerow(
                [n]
                + [
                    f"{series_by_model[mid][n]:.6f}" if n in series_by_model[mid] else ""
                    for mid in model_ids
                ]
            )
    return {"srocc": srocc_path, "recall_series": series_path}
