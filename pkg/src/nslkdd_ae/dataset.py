"""NSL-KDD ingestion and the one-hot + min-max feature encoding.

A raw NSL-KDD row has 43 comma-separated fields: 41 connection features
(three of them categorical: ``protocol_type``, ``service``, ``flag``), the
attack name and the difficulty score.  The encoding learned from the
training split maps the 38 numeric features to ``[0, 1]`` and expands the
categorical ones into one-hot blocks, in that order::

    [38 numeric | protocol one-hot | service one-hot | flag one-hot]
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

N_FIELDS = 43
N_NUMERIC = 38
CATEGORICAL_POSITIONS = (1, 2, 3)
LABEL_POSITION = 41
DIFFICULTY_POSITION = 42
NUMERIC_POSITIONS = tuple(
    i for i in range(LABEL_POSITION) if i not in CATEGORICAL_POSITIONS
)

COLUMNS = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate",
    "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate",
    "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
    "attack_name", "difficulty",
)

SCHEMA_FORMAT = "nslkdd-ae/schema"
SCHEMA_VERSION = 1


class TrafficClass(enum.IntEnum):
    """The five NSL-KDD traffic families; the integer value is the class index."""

    NORMAL = 0
    DOS = 1
    PROBE = 2
    R2L = 3
    U2R = 4

    @property
    def key(self) -> str:
        return self.name.lower()

    @property
    def display(self) -> str:
        return {"NORMAL": "Normal", "DOS": "DoS", "PROBE": "Probe"}.get(self.name, self.name)

    @property
    def is_attack(self) -> bool:
        return self is not TrafficClass.NORMAL

    @classmethod
    def from_key(cls, key: str) -> "TrafficClass":
        try:
            return cls[key.strip().upper()]
        except KeyError:
            raise DataError(f"unknown traffic class {key!r}") from None


ATTACK_CLASSES = tuple(c for c in TrafficClass if c.is_attack)


def load_attack_table() -> dict[str, TrafficClass]:
    """Read the packaged attack-name -> traffic-class table."""
    text = resources.files(__package__).joinpath("data/attack_classes.csv").read_text()
    reader = csv.DictReader(text.splitlines())
    return {row["attack_name"]: TrafficClass.from_key(row["traffic_class"]) for row in reader}


class LabelMapper:
    """Total mapping from attack names to :class:`TrafficClass`.

    Names missing from the table map to ``fallback`` and are tallied in
    :attr:`unknown`; pass ``fallback=None`` to raise instead.
    """

    def __init__(self, table: dict[str, TrafficClass] | None = None,
                 fallback: TrafficClass | None = TrafficClass.DOS):
        self.table = dict(load_attack_table() if table is None else table)
        self.fallback = fallback
        self.unknown: Counter[str] = Counter()

    def __call__(self, attack_name: str) -> TrafficClass:
        name = attack_name.strip().rstrip(".").lower()
        if not name:
            raise DataError("empty attack name")
        cls = self.table.get(name)
        if cls is not None:
            return cls
        if self.fallback is None:
            raise DataError(f"unknown attack name {attack_name!r}")
        if name not in self.unknown:
            warnings.warn(
                f"attack name {name!r} not in the class table; treating it as "
                f"{self.fallback.display}", stacklevel=2,
            )
        self.unknown[name] += 1
        return self.fallback


_default_mapper: LabelMapper | None = None


def map_attack_label(attack_name: str) -> TrafficClass:
    """Map an attack name with the shared default :class:`LabelMapper`."""
    global _default_mapper
    if _default_mapper is None:
        _default_mapper = LabelMapper()
    return _default_mapper(attack_name)


@dataclass(frozen=True)
class RawRecord:
    numeric: tuple[float, ...]
    protocol_type: str
    service: str
    flag: str
    attack_name: str
    difficulty: int | None = None

    @classmethod
    def from_fields(cls, fields: Sequence[str], lineno: int = 0) -> "RawRecord":
        if len(fields) != N_FIELDS:
            raise DataError(f"line {lineno}: expected {N_FIELDS} fields, got {len(fields)}")
        numeric = []
        for pos in NUMERIC_POSITIONS:
            try:
                value = float(fields[pos])
            except ValueError:
                raise DataError(
                    f"line {lineno}: field {pos + 1} ({COLUMNS[pos]}) is not numeric: "
                    f"{fields[pos]!r}"
                ) from None
            if not math.isfinite(value):
                raise DataError(f"line {lineno}: field {pos + 1} ({COLUMNS[pos]}) is not finite")
            numeric.append(value)
        attack = fields[LABEL_POSITION].strip()
        if not attack:
            raise DataError(f"line {lineno}: empty attack name")
        try:
            difficulty = int(fields[DIFFICULTY_POSITION])
        except ValueError:
            raise DataError(f"line {lineno}: difficulty is not an integer: "
                            f"{fields[DIFFICULTY_POSITION]!r}") from None
        protocol, service, flag = (fields[p].strip() for p in CATEGORICAL_POSITIONS)
        return cls(tuple(numeric), protocol, service, flag, attack, difficulty)


def parse_nslkdd(path: str | Path) -> list[RawRecord]:
    """Parse an NSL-KDD CSV file (no header) into records in file order.

    Blank lines are skipped; a file with no records is an error, as is any
    row with the wrong field count or a non-numeric numeric field.  Errors
    name the 1-based line number.
    """
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            records.append(RawRecord.from_fields(line.split(","), lineno))
    if not records:
        raise DataError(f"{path}: no records")
    log.info("parsed %d records from %s", len(records), path)
    return records


@dataclass(frozen=True)
class FeatureSchema:
    protocol_vocab: tuple[str, ...]
    service_vocab: tuple[str, ...]
    flag_vocab: tuple[str, ...]
    numeric_min: tuple[float, ...]
    numeric_max: tuple[float, ...]

    def __post_init__(self):
        for name in ("protocol_vocab", "service_vocab", "flag_vocab"):
            vocab = getattr(self, name)
            if list(vocab) != sorted(set(vocab)):
                raise DataError(f"{name} must be sorted and duplicate-free")
        if len(self.numeric_min) != N_NUMERIC or len(self.numeric_max) != N_NUMERIC:
            raise DataError(f"numeric bounds must have {N_NUMERIC} entries")
        if any(lo > hi for lo, hi in zip(self.numeric_min, self.numeric_max)):
            raise DataError("numeric_min exceeds numeric_max")

    @property
    def vocabularies(self) -> tuple[tuple[str, ...], ...]:
        return (self.protocol_vocab, self.service_vocab, self.flag_vocab)

    @property
    def encoded_dim(self) -> int:
        return N_NUMERIC + sum(len(v) for v in self.vocabularies)

    def block_slices(self) -> dict[str, slice]:
        """Column ranges of each feature block inside an encoded vector."""
        out = {"numeric": slice(0, N_NUMERIC)}
        start = N_NUMERIC
        for name, vocab in zip(("protocol_type", "service", "flag"), self.vocabularies):
            out[name] = slice(start, start + len(vocab))
            start += len(vocab)
        return out

    def to_dict(self) -> dict:
        return {
            "format": SCHEMA_FORMAT,
            "version": SCHEMA_VERSION,
            "protocol_vocab": list(self.protocol_vocab),
            "service_vocab": list(self.service_vocab),
            "flag_vocab": list(self.flag_vocab),
            "numeric_columns": [COLUMNS[p] for p in NUMERIC_POSITIONS],
            "numeric_min": list(self.numeric_min),
            "numeric_max": list(self.numeric_max),
            "encoded_dim": self.encoded_dim,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureSchema":
        if doc.get("format") != SCHEMA_FORMAT or doc.get("version") != SCHEMA_VERSION:
            raise DataError("not a version-%d schema document" % SCHEMA_VERSION)
        schema = cls(
            tuple(doc["protocol_vocab"]), tuple(doc["service_vocab"]), tuple(doc["flag_vocab"]),
            tuple(float(v) for v in doc["numeric_min"]),
            tuple(float(v) for v in doc["numeric_max"]),
        )
        if schema.encoded_dim != doc["encoded_dim"]:
            raise DataError("schema encoded_dim does not match its vocabularies")
        return schema

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def checksum(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: malformed schema ({exc})") from exc


def build_schema(train: Sequence[RawRecord]) -> FeatureSchema:
    if not train:
        raise DataError("cannot build a schema from an empty record set")
    numeric = np.array([r.numeric for r in train], dtype=np.float64)
    return FeatureSchema(
        protocol_vocab=tuple(sorted({r.protocol_type for r in train})),
        service_vocab=tuple(sorted({r.service for r in train})),
        flag_vocab=tuple(sorted({r.flag for r in train})),
        numeric_min=tuple(float(v) for v in numeric.min(axis=0)),
        numeric_max=tuple(float(v) for v in numeric.max(axis=0)),
    )


@dataclass(frozen=True)
class EncodedSample:
    features: np.ndarray
    cls: TrafficClass


@dataclass
class EncodedDataset:
    """Row-stacked encoded samples: ``features`` is (N, D), ``classes`` is (N,)."""

    features: np.ndarray
    classes: np.ndarray
    unseen_tokens: Counter = field(default_factory=Counter)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.classes = np.asarray(self.classes, dtype=np.int64)
        if self.features.ndim != 2 or self.classes.shape != (self.features.shape[0],):
            raise DataError("features must be (N, D) with one class per row")

    def __len__(self) -> int:
        return self.features.shape[0]

    def __getitem__(self, i: int) -> EncodedSample:
        return EncodedSample(self.features[i], TrafficClass(int(self.classes[i])))

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def is_attack(self) -> np.ndarray:
        return self.classes != TrafficClass.NORMAL

    def subset(self, mask_or_index) -> "EncodedDataset":
        return EncodedDataset(self.features[mask_or_index], self.classes[mask_or_index])

    def normal_only(self) -> "EncodedDataset":
        return self.subset(self.classes == TrafficClass.NORMAL)

    def class_counts(self) -> dict[TrafficClass, int]:
        counts = np.bincount(self.classes, minlength=len(TrafficClass))
        return {c: int(counts[c]) for c in TrafficClass}

    @classmethod
    def from_samples(cls, samples: Iterable[EncodedSample]) -> "EncodedDataset":
        samples = list(samples)
        if not samples:
            raise DataError("no samples")
        return cls(np.stack([s.features for s in samples]),
                   np.array([int(s.cls) for s in samples]))

    def save(self, path: str | Path) -> None:
        """Write as ``.npz`` or as a CSV matrix with the class index appended."""
        path = Path(path)
        if path.suffix == ".npz":
            np.savez(path, features=self.features, classes=self.classes)
        else:
            table = np.column_stack([self.features, self.classes])
            np.savetxt(path, table, delimiter=",", fmt="%.17g")

    @classmethod
    def load(cls, path: str | Path) -> "EncodedDataset":
        path = Path(path)
        if path.suffix == ".npz":
            with np.load(path) as data:
                return cls(data["features"], data["classes"])
        table = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls(table[:, :-1], table[:, -1].astype(np.int64))


def _scale_numeric(values: np.ndarray, schema: FeatureSchema) -> np.ndarray:
    lo = np.asarray(schema.numeric_min)
    span = np.asarray(schema.numeric_max) - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (values - lo) / safe, 0.0)
    return np.clip(scaled, 0.0, 1.0)


def encode(record: RawRecord, schema: FeatureSchema,
           mapper: LabelMapper | None = None) -> EncodedSample:
    out = np.zeros(schema.encoded_dim)
    out[:N_NUMERIC] = _scale_numeric(np.asarray(record.numeric, dtype=np.float64), schema)
    start = N_NUMERIC
    for token, vocab in zip((record.protocol_type, record.service, record.flag),
                            schema.vocabularies):
        try:
            out[start + vocab.index(token)] = 1.0
        except ValueError:
            pass
        start += len(vocab)
    label = (mapper or map_attack_label)(record.attack_name)
    return EncodedSample(out, label)


def encode_many(records: Sequence[RawRecord], schema: FeatureSchema,
                mapper: LabelMapper | None = None) -> EncodedDataset:
    """Vectorised :func:`encode` over a record sequence.

    Tokens missing from the schema leave their block all-zero and are
    counted per ``(column, token)`` in ``unseen_tokens`` of the result.
    """
    if not records:
        raise DataError("no records to encode")
    mapper = mapper or map_attack_label
    n = len(records)
    out = np.zeros((n, schema.encoded_dim))
    out[:, :N_NUMERIC] = _scale_numeric(np.array([r.numeric for r in records]), schema)
    unseen: Counter = Counter()
    start = N_NUMERIC
    for name, vocab in zip(("protocol_type", "service", "flag"), schema.vocabularies):
        position = {tok: i for i, tok in enumerate(vocab)}
        idx = np.empty(n, dtype=np.int64)
        for row, r in enumerate(records):
            token = getattr(r, name)
            j = position.get(token, -1)
            if j < 0:
                unseen[(name, token)] += 1
            idx[row] = j
        hit = idx >= 0
        out[np.nonzero(hit)[0], start + idx[hit]] = 1.0
        start += len(vocab)
    if unseen:
        log.info("%d records carry tokens unseen in the schema", sum(unseen.values()))
    classes = np.array([int(mapper(r.attack_name)) for r in records], dtype=np.int64)
    return EncodedDataset(out, classes, unseen)


def file_checksum(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
