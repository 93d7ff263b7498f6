"""Experiment stages shared by the CLI and the acceptance suite.

Every stage reads and writes fixed file names inside one output directory,
so a later stage can run in a fresh process from the frozen artifacts of
the earlier ones::

    schema.json  model.json  loss.csv  errors.csv  sweep.csv
    test_errors.csv  roc.csv  andrews.csv  nb_model.json  report.json

plus one PNG per figure unless figures are disabled.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import andrews as andrews_mod
from . import detector, evaluation
from .autoencoder import Architecture, load_model, model_digest
from .baseline_nb import nb_train
from .dataset import (EncodedDataset, FeatureSchema, LabelMapper, RawRecord, build_schema,
                      encode_many, file_checksum, parse_nslkdd)
from .errors import DataError
from .trainer import LossHistory, TrainConfig, atomic_write_text, fit, save_checkpoint

log = logging.getLogger(__name__)

REPORT_FORMAT = "nslkdd-ae/report"


@dataclass
class RunConfig:
    train_path: str | None = None
    test_path: str | None = None
    out_dir: str = "out"
    seed: int = 0
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-4
    validation_fraction: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    grid_points: int = 512
    grid: list[float] | None = None
    objective: str = "balanced"
    threshold: float | None = None
    andrews_resolution: int = 100
    andrews_max_rows: int = 200
    figures: bool = True
    extra: dict[str, Any] = field(default_factory=dict, repr=False)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON config ({exc})") from exc
        return cls.from_dict(doc, **overrides)

    @classmethod
    def from_dict(cls, doc: dict, **overrides) -> "RunConfig":
        aliases = {"train": "train_path", "test": "test_path", "out": "out_dir"}
        known = {f.name for f in fields(cls)} - {"extra"}
        values, extra = {}, {}
        for key, value in doc.items():
            key = aliases.get(key, key)
            (values if key in known else extra)[key] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values, extra=extra)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size, epochs=self.epochs,
            validation_fraction=self.validation_fraction, seed=self.seed,
            adam_beta1=self.adam_beta1, adam_beta2=self.adam_beta2, adam_epsilon=self.adam_epsilon,
        )

    def resolved(self) -> dict:
        """Content-relevant settings (the output directory is left out)."""
        doc = asdict(self)
        doc.pop("out_dir")
        doc.pop("extra")
        return doc

    def digest(self) -> str:
        canonical = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


class Pipeline:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self._records: dict[str, list[RawRecord]] = {}
        self._encoded: dict[str, EncodedDataset] = {}
        self._schema: FeatureSchema | None = None
        self.mapper = LabelMapper()

    # -- paths and cached inputs ---------------------------------------

    def path(self, name: str) -> Path:
        return self.out / name

    def _input(self, split: str) -> Path:
        value = self.cfg.train_path if split == "train" else self.cfg.test_path
        if not value:
            raise DataError(f"no --{split} file given")
        p = Path(value)
        if not p.is_file():
            raise DataError(f"{split} file not found: {p}")
        return p

    def records(self, split: str) -> list[RawRecord]:
        if split not in self._records:
            self._records[split] = parse_nslkdd(self._input(split))
        return self._records[split]

    def schema(self) -> FeatureSchema:
        if self._schema is None:
            p = self.path("schema.json")
            if not p.exists():
                raise DataError(f"{p} not found; run the schema stage first")
            self._schema = FeatureSchema.load(p)
        return self._schema

    def encoded(self, split: str) -> EncodedDataset:
        if split not in self._encoded:
            self._encoded[split] = encode_many(self.records(split), self.schema(), self.mapper)
        return self._encoded[split]

    def model(self):
        p = self.path("model.json")
        if not p.exists():
            raise DataError(f"{p} not found; run the train stage first")
        params, doc = load_model(p)
        if doc.get("schema_checksum") != self.schema().checksum():
            raise DataError("model.json was trained with a different schema than schema.json")
        return params, doc

    # -- report ----------------------------------------------------------

    def load_report(self) -> dict:
        p = self.path("report.json")
        if p.exists():
            return json.loads(p.read_text())
        return {"format": REPORT_FORMAT, "version": 1}

    def update_report(self, section: str, content: dict) -> dict:
        report = self.load_report()
        report[section] = content
        run = report.setdefault("run", {})
        run["config"] = self.cfg.resolved()
        run["config_digest"] = self.cfg.digest()
        sums = run.setdefault("dataset_checksums", {})
        for split in ("train", "test"):
            if split in self._records:
                sums[split] = file_checksum(self._input(split))
        if self._schema is not None:
            run["schema_checksum"] = self._schema.checksum()
        if self.mapper.unknown:
            run["unknown_attack_names"] = dict(sorted(self.mapper.unknown.items()))
        report["literature_results"] = evaluation.LITERATURE_RESULTS
        atomic_write_text(self.path("report.json"), json.dumps(report, indent=2, sort_keys=True) + "\n")
        return report

    def _figure(self, fn, *args):
        if self.cfg.figures:
            from . import plotting
            getattr(plotting, fn)(*args)

    # -- stages ------------------------------------------------------------

    def schema_stage(self) -> FeatureSchema:
        self.out.mkdir(parents=True, exist_ok=True)
        schema = build_schema(self.records("train"))
        schema.save(self.path("schema.json"))
        self._schema = schema
        log.info("schema: encoded_dim=%d (%d protocols, %d services, %d flags)",
                 schema.encoded_dim, *(len(v) for v in schema.vocabularies))
        return schema

    def train_stage(self):
        self.out.mkdir(parents=True, exist_ok=True)
        schema = self.schema() if self.path("schema.json").exists() else self.schema_stage()
        normal = self.encoded("train").normal_only()
        tcfg = self.cfg.train_config()
        log.info("training on %d normal records", len(normal))
        result = fit(normal, tcfg, Architecture(input_dim=schema.encoded_dim))
        save_checkpoint(self.path("model.json"), result.params, history=result.history,
                        adam=result.adam, schema_checksum=schema.checksum(), config=tcfg)
        result.history.write_csv(self.path("loss.csv"))
        self._figure("plot_loss", result.history, self.path("loss.png"))
        self.update_report("training", {
            "n_normal_records": len(normal),
            "n_train": int(result.train_index.size),
            "n_validation": int(result.validation_index.size),
            "final_train_loss": result.history.train_loss[-1],
            "final_validation_loss": result.history.validation_loss[-1],
            "first_train_loss": result.history.train_loss[0],
            "model_digest": model_digest(result.params),
        })
        return result

    def threshold_stage(self) -> detector.ThresholdReport:
        params, _ = self.model()
        train = self.encoded("train")
        errors = detector.score_dataset(params, train)
        if self.cfg.grid is not None:
            grid = np.asarray(self.cfg.grid, dtype=np.float64)
        else:
            grid = detector.default_grid(errors, self.cfg.grid_points)
        tau = detector.select_threshold(errors, train.classes, grid, self.cfg.objective)
        report = detector.sweep_thresholds(errors, train.classes, grid, threshold=tau)
        detector.write_errors_csv(self.path("errors.csv"), errors, train.classes)
        report.write_csv(self.path("sweep.csv"))
        self._figure("plot_error_distribution", errors, train.classes, tau, self.path("errors.png"))
        self._figure("plot_sweep", grid, report.table, tau, self.path("sweep.png"))
        self.update_report("threshold", {
            "threshold": tau,
            "objective": self.cfg.objective,
            "grid_points": int(grid.size),
            "grid_range": [float(grid[0]), float(grid[-1])],
            "train_detection_rates": evaluation.rates_to_dict(report.rates),
        })
        log.info("selected threshold %.6g", tau)
        return report

    def frozen_threshold(self) -> float:
        if self.cfg.threshold is not None:
            return float(self.cfg.threshold)
        section = self.load_report().get("threshold")
        if not section:
            raise DataError("no threshold given and report.json has none; run the threshold stage")
        return float(section["threshold"])

    def eval_stage(self) -> dict:
        params, _ = self.model()
        tau = self.frozen_threshold()
        test = self.encoded("test")
        errors = detector.score_dataset(params, test)
        section = evaluation.evaluate(errors, test.classes, tau)
        detector.write_errors_csv(self.path("test_errors.csv"), errors, test.classes)
        curve = evaluation.roc_curve(errors, test.classes)
        curve.write_csv(self.path("roc.csv"))
        cm = evaluation.confusion(errors > tau, test.classes)
        self._figure("plot_roc", curve, section["auc"], self.path("roc.png"))
        self._figure("plot_confusion", cm, self.path("confusion.png"))
        self._figure("plot_error_distribution", errors, test.classes, tau,
                     self.path("test_errors.png"))
        section["unseen_feature_tokens"] = {f"{col}={tok}": n for (col, tok), n
                                            in sorted(test.unseen_tokens.items())}
        self.update_report("evaluation", section)
        return section

    def baseline_stage(self) -> dict:
        self.out.mkdir(parents=True, exist_ok=True)
        train, test = self.encoded("train"), self.encoded("test")
        model = nb_train(train)
        model.save(self.path("nb_model.json"))
        pred = model.predict_attack(test.features)
        cm = evaluation.confusion(pred, test.classes)
        section = {"model": "naive_bayes", "confusion": cm.to_dict(),
                   "metrics": evaluation.metrics(cm).to_dict()}
        self._figure("plot_confusion", cm, self.path("nb_confusion.png"), "Naive Bayes")
        self.update_report("baseline", section)
        return section

    def andrews_stage(self) -> list:
        self.out.mkdir(parents=True, exist_ok=True)
        samples = andrews_mod.andrews_samples(self.encoded("train"), self.cfg.andrews_resolution,
                                              self.cfg.andrews_max_rows, self.cfg.seed)
        andrews_mod.write_andrews_csv(self.path("andrews.csv"), samples)
        self._figure("plot_andrews", samples, self.path("andrews.png"))
        return samples

    def run(self) -> dict:
        self.schema_stage()
        self.train_stage()
        self.threshold_stage()
        self.eval_stage()
        self.baseline_stage()
        self.andrews_stage()
        return self.load_report()


def loss_history_from_model(path: str | Path) -> LossHistory:
    doc = json.loads(Path(path).read_text())
    return LossHistory.from_dict(doc["loss_history"])


def with_overrides(cfg: RunConfig, **kwargs) -> RunConfig:
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None})
