"""Reconstruct-extract-classify orchestration for single runs and the grid.

Layout under ``<out>/<grid_id>/``::

    split.json                    dataset split manifest
    grid_index.json               status of every combination (single writer)
    models/<ConvMx-CORE>/         weights.pt + model.json, shared by all cells
    <ConvMx-CORE__Extractor__Classifier>/
        checkpoint.json  features_{train,validation,test}.csv  scaler.json
        classifier.json  threshold.json  scores.csv  report.csv  report.json
        plots/
"""

from __future__ import annotations

import contextlib
import csv
import itertools
import json
import logging
import os
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import cv2
import numpy as np

from planktonad.autoencoder import TrainedAE, build_model, load_checkpoint, reconstruct_batch, train
from planktonad.autoencoder.architectures import ConvPair, Core
from planktonad.dataset import (
    ALL,
    AnnotatedImage,
    DatasetSplit,
    SampleLabel,
    build_split,
    canonical_resize,
    parse_annotations,
)
from planktonad.errors import DomainError, StageError
from planktonad.evaluation import EvaluationReport, build_report, write_reports_csv
from planktonad.features import Extractor, extract_batch, feature_matrix, load_descriptor, write_feature_csv
from planktonad.oneclass import (
    Classifier,
    DecisionThreshold,
    OneClassModel,
    apply_scaler,
    fit_one_class,
    fit_scaler,
    select_threshold_eer,
)
from planktonad.runner.config import ExperimentConfig
from planktonad.synthetic import make_fixture

logger = logging.getLogger(__name__)

INDEX_FILE = "grid_index.json"
SPLITS = ("train", "validation", "test")


@dataclass(frozen=True, order=True)
class Combination:
    core: Core
    conv_pair: ConvPair
    extractor: Extractor
    classifier: Classifier

    @property
    def model_name(self) -> str:
        return f"{self.conv_pair.value}-{self.core.value}"

    @property
    def id(self) -> str:
        return f"{self.model_name}/{self.extractor.value}/{self.classifier.value}"

    @property
    def dirname(self) -> str:
        return self.id.replace("/", "__")

    @classmethod
    def parse(cls, combination_id: str) -> Combination:
        try:
            model, extractor, classifier = combination_id.split("/")
            pair, core = model.split("-")
            return cls(Core(core), ConvPair(pair), Extractor(extractor), Classifier(classifier))
        except ValueError:
            raise DomainError(f"malformed combination id {combination_id!r}") from None


def enumerate_combinations(cores: Iterable, conv_pairs: Iterable, extractors: Iterable,
                           classifiers: Iterable) -> list[Combination]:
    """Cartesian product in range order; ids are unique by construction."""
    return [Combination(Core(c), ConvPair(p), Extractor(e), Classifier(k))
            for c, p, e, k in itertools.product(cores, conv_pairs, extractors, classifiers)]


def config_combinations(config: ExperimentConfig) -> list[Combination]:
    return enumerate_combinations(config.cores, config.conv_pairs, config.extractors, config.classifiers)


# --------------------------------------------------------------------------
# data


@dataclass
class PreparedData:
    species: str
    split: DatasetSplit
    images: dict[str, np.ndarray]
    labels: dict[str, SampleLabel]

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return next(iter(self.images.values())).shape

    def ids(self, part: str) -> list[str]:
        if part == "train":
            return list(self.split.train)
        return [i for i, _ in getattr(self.split, part)]


def load_samples(config: ExperimentConfig) -> list[AnnotatedImage]:
    ds = config.dataset
    if ds["source"] == "synthetic":
        syn = ds.get("synthetic") or {}
        return make_fixture(int(syn.get("n_ok", 500)), int(syn.get("n_nok", 100)),
                            tuple(syn.get("size", (128, 128))), int(syn.get("seed", 0)))
    return parse_annotations(ds["path"], ds["source"].upper(), ds.get("image_root"))


def _resize(image: AnnotatedImage, config: ExperimentConfig) -> np.ndarray:
    size = config.dataset.get("image_size")
    if size is None:
        return canonical_resize(image, config.species, config.dataset.get("aspect_ratios"))
    h, w = (int(v) for v in size)
    px = image.pixels
    out = cv2.resize(px, (w, h), interpolation=cv2.INTER_LINEAR)
    return (out[:, :, None] if out.ndim == 2 else out).astype(np.float32)


def prepare_data(config: ExperimentConfig, samples: Sequence[AnnotatedImage] | None = None) -> PreparedData:
    """Load, label, split and resize everything the split refers to."""
    samples = load_samples(config) if samples is None else samples
    sp = config.raw["split"]
    split = build_split([(s, s.label) for s in samples], config.species, float(sp["train_frac"]),
                        sp.get("val_count"), sp.get("test_count"), int(sp["seed"]))
    wanted = set(split.train) | {i for i, _ in split.validation} | {i for i, _ in split.test}
    by_id = {s.id: s for s in samples if s.id in wanted}
    images = {sid: _resize(by_id[sid], config) for sid in sorted(by_id)}
    labels = {sid: by_id[sid].label for sid in by_id}
    return PreparedData(config.species, split, images, labels)


# --------------------------------------------------------------------------
# results


@dataclass
class GridResult:
    grid_id: str
    species: str = ALL
    reports: dict[str, EvaluationReport] = field(default_factory=dict)
    status: dict[str, str] = field(default_factory=dict)
    wall_time: dict[str, float] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    checkpoint_hashes: dict[str, str] = field(default_factory=dict)
    trainings: int = 0
    root: Path | None = None

    def ranking(self) -> list[EvaluationReport]:
        """Completed reports by F1 descending, ties broken by combination id."""
        return sorted(self.reports.values(), key=lambda r: (-r.f1, r.combination_id))

    def best(self) -> EvaluationReport:
        ranked = self.ranking()
        if not ranked:
            raise DomainError(f"grid {self.grid_id!r} has no completed combinations")
        return ranked[0]

    def failed(self) -> list[str]:
        return sorted(cid for cid, s in self.status.items() if s == "failed")


class GridIndex:
    """JSON status file; every write goes through one lock and an atomic replace."""

    def __init__(self, root: Path, grid_id: str, species: str, fresh: bool):
        self.path = root / INDEX_FILE
        self._lock = threading.Lock()
        if self.path.exists() and not fresh:
            self.doc = json.loads(self.path.read_text(encoding="utf-8"))
        else:
            self.doc = {"grid_id": grid_id, "species": species, "combinations": {}, "models": {}}

    def _flush(self) -> None:
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.doc, indent=2, sort_keys=True), encoding="utf-8")
        os.replace(tmp, self.path)

    def record(self, cid: str, entry: dict) -> None:
        with self._lock:
            self.doc["combinations"][cid] = entry
            self._flush()

    def record_model(self, name: str, entry: dict) -> None:
        with self._lock:
            self.doc["models"].setdefault(name, {}).update(entry)
            self._flush()

    def completed(self, root: Path) -> set[str]:
        done = set()
        for cid, entry in self.doc["combinations"].items():
            if entry.get("status") == "done" and (root / Combination.parse(cid).dirname / "report.json").exists():
                done.add(cid)
        return done


def load_grid_result(root: str | Path) -> GridResult:
    """Rebuild a GridResult from ``<root>/grid_index.json`` and the cell reports."""
    root = Path(root)
    path = root / INDEX_FILE
    if not path.exists():
        raise DomainError(f"no grid index at {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    result = GridResult(doc["grid_id"], doc.get("species", ALL), root=root)
    for cid, entry in sorted(doc["combinations"].items()):
        result.status[cid] = entry["status"]
        result.wall_time[cid] = entry.get("wall_time", 0.0)
        if entry.get("checkpoint_hash"):
            result.checkpoint_hashes[cid] = entry["checkpoint_hash"]
        if entry["status"] == "done":
            report_path = root / Combination.parse(cid).dirname / "report.json"
            result.reports[cid] = EvaluationReport.from_json(json.loads(report_path.read_text(encoding="utf-8")))
        else:
            result.errors[cid] = entry.get("error", "")
    result.trainings = sum(1 for m in doc["models"].values() if m.get("trained"))
    return result


# --------------------------------------------------------------------------
# stages


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - every failure is attributed to its stage
        raise StageError(name, exc) from exc


def _write_scores(path: Path, rows: Iterable[tuple[str, str, str, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "split", "label", "score"])
        for sid, part, label, score in rows:
            writer.writerow([sid, part, label, repr(float(score))])


def read_scores(path: str | Path) -> tuple[list[str], list[str], list[str], np.ndarray]:
    ids, parts, labels, scores = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            ids.append(row["sample_id"])
            parts.append(row["split"])
            labels.append(row["label"])
            scores.append(float(row["score"]))
    return ids, parts, labels, np.asarray(scores)


def _threshold_to_json(t: DecisionThreshold) -> dict:
    return {"value": t.value, "fpr": t.fpr, "fnr": t.fnr, "source": t.source}


def read_threshold(path: str | Path) -> DecisionThreshold:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return DecisionThreshold(float(doc["value"]), doc["fpr"], doc["fnr"], doc["source"])


@dataclass
class ModelJob:
    """All pending cells that share one (core, conv pair) autoencoder."""

    config_raw: dict
    root: str
    core: Core
    conv_pair: ConvPair
    combinations: list[Combination]
    resume: bool


def _obtain_model(job: ModelJob, config: ExperimentConfig, data: PreparedData) -> tuple[TrainedAE, bool]:
    model_dir = Path(job.root) / "models" / f"{job.conv_pair.value}-{job.core.value}"
    if job.resume and (model_dir / "model.json").exists() and (model_dir / "weights.pt").exists():
        logger.info("reusing checkpoint %s", model_dir)
        return load_checkpoint(model_dir), False
    spec = build_model(job.core, job.conv_pair, data.input_shape, config.latent)
    model = train(spec, data.split, data.images, config.training_config(), labels=data.labels)
    model.save(model_dir)
    return model, True


def _run_cell(combo: Combination, cell: Path, model: TrainedAE, feats: dict[str, np.ndarray],
              data: PreparedData, config: ExperimentConfig, feature_vectors: dict) -> EvaluationReport:
    cell.mkdir(parents=True, exist_ok=True)
    (cell / "checkpoint.json").write_text(json.dumps(
        {"model": combo.model_name, "path": f"../models/{combo.model_name}",
         "checkpoint_hash": model.checkpoint_hash()}, indent=2), encoding="utf-8")
    for part in SPLITS:
        ids = data.ids(part)
        write_feature_csv(cell / f"features_{part}.csv", feature_vectors[part],
                          [data.labels[i].value for i in ids])
    clf_cfg = config.raw["classifier"]
    with stage("classifier"):
        scaler = fit_scaler(feats["train"])
        clf = fit_one_class(combo.classifier, apply_scaler(scaler, feats["train"]),
                            contamination=float(clf_cfg["contamination"]), seed=int(config.raw["split"]["seed"]),
                            n_neighbors=int(clf_cfg["n_neighbors"]), n_trees=int(clf_cfg["n_trees"]))
        (cell / "scaler.json").write_text(json.dumps(scaler.to_json()), encoding="utf-8")
        clf.save(cell / "classifier.json")
        scores = {part: clf.scores(apply_scaler(scaler, feats[part])) for part in SPLITS}
    with stage("threshold"):
        source = config.threshold_source
        ids = data.ids(source)
        threshold = select_threshold_eer(scores[source], [data.labels[i] for i in ids], source=source)
        (cell / "threshold.json").write_text(json.dumps(_threshold_to_json(threshold)), encoding="utf-8")
    with stage("report"):
        _write_scores(cell / "scores.csv", [(sid, part, data.labels[sid].value, s)
                                             for part in SPLITS for sid, s in zip(data.ids(part), scores[part])])
        test_ids = data.ids("test")
        report = build_report(combo.id, data.species, scores["test"], [data.labels[i] for i in test_ids], threshold)
        write_reports_csv(cell / "report.csv", [report])
        (cell / "report.json").write_text(json.dumps(report.to_json(), indent=2), encoding="utf-8")
    return report


def execute_model_job(job: ModelJob, data: PreparedData, strict: bool = False,
                      on_cell: Callable[[Combination, dict], None] | None = None,
                      on_model: Callable[[str, dict], None] | None = None) -> list[tuple[Combination, dict]]:
    """Train (or reuse) one autoencoder and run every pending cell on it.

    With ``strict`` the first failure propagates as StageError; otherwise it
    is recorded against the affected cells and the job continues.
    """
    config = ExperimentConfig(job.config_raw)
    root = Path(job.root)
    results: list[tuple[Combination, dict]] = []
    name = f"{job.conv_pair.value}-{job.core.value}"

    def emit(combo: Combination, entry: dict) -> None:
        results.append((combo, entry))
        if on_cell is not None:
            on_cell(combo, entry)

    def fail(combos: Iterable[Combination], exc: StageError, started: float) -> None:
        if strict:
            raise exc
        logger.error("%s: %s", name, exc)
        for combo in combos:
            emit(combo, {"status": "failed", "error": str(exc), "stage": exc.stage,
                         "wall_time": time.perf_counter() - started})

    t0 = time.perf_counter()
    try:
        with stage("train"):
            model, trained = _obtain_model(job, config, data)
        with stage("reconstruct"):
            triplets = {part: reconstruct_batch(model, [data.images[i] for i in data.ids(part)]) for part in SPLITS}
    except StageError as exc:
        fail(job.combinations, exc, t0)
        return results
    model_entry = {"checkpoint_hash": model.checkpoint_hash(), "trained": trained,
                   "train_seconds": time.perf_counter() - t0, "epochs": len(model.training_log)}
    if on_model is not None:
        on_model(name, model_entry)
    results.append((None, {"model": name, **model_entry}))  # type: ignore[arg-type]

    descriptor = None
    by_extractor: dict[Extractor, list[Combination]] = {}
    for combo in job.combinations:
        by_extractor.setdefault(combo.extractor, []).append(combo)
    for extractor, combos in by_extractor.items():
        t_feat = time.perf_counter()
        try:
            with stage("features"):
                if extractor.value.startswith("HardNet") and descriptor is None:
                    descriptor = load_descriptor(config.raw["features"].get("descriptor_weights"))
                vectors = {part: extract_batch(extractor, triplets[part], descriptor, data.ids(part),
                                               config.raw["features"]["hardnet1_source"]) for part in SPLITS}
                feats = {part: feature_matrix(vectors[part]) for part in SPLITS}
        except StageError as exc:
            fail(combos, exc, t_feat)
            continue
        feat_seconds = time.perf_counter() - t_feat
        for combo in combos:
            t_cell = time.perf_counter()
            try:
                report = _run_cell(combo, root / combo.dirname, model, feats, data, config, vectors)
            except StageError as exc:
                fail([combo], exc, t_cell)
                continue
            emit(combo, {"status": "done", "checkpoint_hash": model.checkpoint_hash(),
                         "wall_time": time.perf_counter() - t_cell + feat_seconds / len(combos),
                         "f1": report.f1, "auc": report.auc})
    return results


def _process_job(job: ModelJob, data: PreparedData) -> list[tuple[Combination | None, dict]]:
    return execute_model_job(job, data)


# --------------------------------------------------------------------------
# entry points


def grid_root(config: ExperimentConfig) -> Path:
    return config.out_dir / config.grid_id


def _prepare(config: ExperimentConfig, root: Path, data: PreparedData | None) -> PreparedData:
    root.mkdir(parents=True, exist_ok=True)
    with stage("data"):
        data = prepare_data(config) if data is None else data
        data.split.save(root / "split.json")
    (root / "config.yaml").write_text(config.to_yaml(), encoding="utf-8")
    return data


def run_experiment(config: ExperimentConfig, data: PreparedData | None = None, resume: bool = False
                   ) -> EvaluationReport:
    """Run one fixed combination end to end; any failure raises StageError."""
    combos = config_combinations(config)
    if len(combos) != 1:
        raise DomainError(f"run_experiment needs exactly one combination, config selects {len(combos)}")
    combo = combos[0]
    root = grid_root(config)
    data = _prepare(config, root, data)
    index = GridIndex(root, config.grid_id, config.species, fresh=False)
    job = ModelJob(config.raw, str(root), combo.core, combo.conv_pair, [combo], resume)
    execute_model_job(job, data, strict=True, on_cell=lambda c, e: index.record(c.id, e),
                      on_model=index.record_model)
    return EvaluationReport.from_json(json.loads((root / combo.dirname / "report.json").read_text(encoding="utf-8")))


def run_grid(config: ExperimentConfig, resume: bool = False, parallel: int | None = None,
             data: PreparedData | None = None) -> GridResult:
    """Evaluate every core x pair x extractor x classifier cell.

    One autoencoder is trained per (core, pair) and shared by its cells. With
    ``resume`` completed cells are skipped and saved checkpoints are reused.
    Failed cells are recorded and the grid continues.
    """
    root = grid_root(config)
    data = _prepare(config, root, data)
    index = GridIndex(root, config.grid_id, config.species, fresh=not resume)
    done = index.completed(root) if resume else set()
    pending = [c for c in config_combinations(config) if c.id not in done]
    jobs = []
    for (core, pair), group in itertools.groupby(sorted(pending, key=lambda c: (c.core, c.conv_pair)),
                                                 key=lambda c: (c.core, c.conv_pair)):
        jobs.append(ModelJob(config.raw, str(root), core, pair, list(group), resume))
    logger.info("grid %s: %d cells pending in %d models (%d already done)",
                config.grid_id, len(pending), len(jobs), len(done))

    trainings = 0
    workers = config.parallel if parallel is None else parallel
    if workers <= 1 or len(jobs) <= 1:
        for job in jobs:
            execute_model_job(job, data, on_cell=lambda c, e: index.record(c.id, e), on_model=index.record_model)
            trainings += bool(index.doc["models"].get(f"{job.conv_pair.value}-{job.core.value}", {}).get("trained"))
    else:
        # processes isolate torch's global RNG state; this process stays the only index writer
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_process_job, job, data) for job in jobs]
            for future in futures:
                for combo, entry in future.result():
                    if combo is None:
                        name = entry.pop("model")
                        index.record_model(name, entry)
                        trainings += bool(entry["trained"])
                    else:
                        index.record(combo.id, entry)

    result = load_grid_result(root)
    wanted = {c.id for c in config_combinations(config)}
    for mapping in (result.reports, result.status, result.wall_time, result.errors, result.checkpoint_hashes):
        for cid in list(mapping):
            if cid not in wanted:
                del mapping[cid]
    result.trainings = trainings
    return result


def write_ranking(result: GridResult, path: str | Path) -> None:
    write_reports_csv(path, result.ranking())
