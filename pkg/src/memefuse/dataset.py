"""Loading, validation, summarizing and splitting of meme records.

The annotation file is CSV or JSON-lines.  Column names and the
raw-label -> class mapping are not hard-coded: both come from a schema
config (JSON), because the source labels carry more levels than the
classifier's classes and the collapse belongs in reviewable config.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import TASKS, TASK_CLASSES


class SchemaError(ValueError):
    """The file or schema config does not match the declared layout."""


class RowError(ValueError):
    """A single row is malformed; carries the 0-based data row index."""

    def __init__(self, row_index: int, message: str):
        super().__init__(f"row {row_index}: {message}")
        self.row_index = row_index


LOGICAL_COLUMNS = ("id", "text") + TASKS

DEFAULT_COLUMNS = {
    "id": "image_name",
    "text": "text",
    "humor": "humour",
    "sarcasm": "sarcasm",
    "motivation": "motivational",
    "sentiment": "overall_sentiment",
}


@dataclass(frozen=True)
class LabelSet:
    """One class label per task, already collapsed to the canonical classes."""

    humor: str
    sarcasm: str
    motivation: str
    sentiment: str

    def __post_init__(self):
        for task in TASKS:
            value = getattr(self, task)
            if value not in TASK_CLASSES[task]:
                raise ValueError(f"{task} label {value!r} not in {TASK_CLASSES[task]}")

    def get(self, task: str) -> str:
        return getattr(self, task)


@dataclass(frozen=True)
class MemeRecord:
    id: str
    image_ref: str
    text: str
    labels: LabelSet


@dataclass
class ClassDistribution:
    """Counts per class label for one task; counts sum to the dataset size."""

    task: str
    counts: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class DatasetSplit:
    train: list[MemeRecord]
    test: list[MemeRecord]
    seed: int
    ratio: float


@dataclass
class Schema:
    """Column remapping plus the per-task raw-label -> class tables.

    ``labels[task]`` is ordered; summaries print raw levels in this
    order, so the config also fixes presentation.
    """

    columns: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_COLUMNS))
    labels: dict[str, dict[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        missing = [c for c in LOGICAL_COLUMNS if c not in self.columns]
        if missing:
            raise SchemaError(f"schema lacks column mapping for {missing}")
        for task in TASKS:
            if task not in self.labels:
                raise SchemaError(f"schema lacks label mapping for task {task!r}")
            for raw, mapped in self.labels[task].items():
                if mapped not in TASK_CLASSES[task]:
                    raise SchemaError(
                        f"label table {task!r} maps {raw!r} to unknown class {mapped!r}"
                    )

    @classmethod
    def from_json(cls, path: str | Path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
        columns = dict(DEFAULT_COLUMNS)
        columns.update(spec.get("columns", {}))
        return cls(columns=columns, labels=spec.get("labels", {}))


def _iter_rows(path: str | Path, schema: Schema) -> Iterator[tuple[int, dict[str, str]]]:
    """Yield (row_index, logical-column dict) for every data row.

    Checks the physical header once; a missing declared column raises
    SchemaError naming the column.
    """
    path = Path(path)
    if path.suffix.lower() in (".jsonl", ".json", ".ndjson"):
        yield from _iter_jsonl(path, schema)
        return
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for logical in LOGICAL_COLUMNS:
            actual = schema.columns[logical]
            if actual not in header:
                raise SchemaError(f"file is missing declared column {actual!r}")
        for index, row in enumerate(reader):
            yield index, _pick_row(index, row, schema)


def _iter_jsonl(path: Path, schema: Schema) -> Iterator[tuple[int, dict[str, str]]]:
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(ln for ln in fh if ln.strip()):
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RowError(index, f"invalid JSON: {exc}") from exc
            for logical in LOGICAL_COLUMNS:
                actual = schema.columns[logical]
                if actual not in row and logical != "text":
                    raise SchemaError(f"file is missing declared column {actual!r}")
            yield index, _pick_row(index, row, schema)


def _pick_row(index: int, row: dict, schema: Schema) -> dict[str, str]:
    out = {}
    for logical in LOGICAL_COLUMNS:
        value = row.get(schema.columns[logical])
        if value is None:
            if logical == "text":
                value = ""
            else:
                raise RowError(index, f"missing value for column {schema.columns[logical]!r}")
        out[logical] = str(value)
    return out


def load_dataset(path: str | Path, schema: Schema) -> list[MemeRecord]:
    """Read the annotation file into validated records.

    Raw labels are collapsed through the schema's label tables; a raw
    value absent from its table fails with the offending row index.
    """
    records: list[MemeRecord] = []
    seen: set[str] = set()
    for index, row in _iter_rows(path, schema):
        rid = row["id"]
        if not rid:
            raise RowError(index, "empty id")
        if rid in seen:
            raise RowError(index, f"duplicate id {rid!r}")
        seen.add(rid)
        mapped = {}
        for task in TASKS:
            raw = row[task]
            table = schema.labels[task]
            if raw not in table:
                raise RowError(index, f"unmappable {task} label {raw!r}")
            mapped[task] = table[raw]
        records.append(
            MemeRecord(id=rid, image_ref=rid, text=row["text"], labels=LabelSet(**mapped))
        )
    return records


def class_distribution(records: list[MemeRecord], task: str) -> ClassDistribution:
    """Counts of the collapsed classes of one task over the records."""
    if not records:
        raise ValueError("class distribution of an empty record list is undefined")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    counts = {cls: 0 for cls in TASK_CLASSES[task]}
    for record in records:
        counts[record.labels.get(task)] += 1
    return ClassDistribution(task=task, counts=counts)


def raw_distribution(path: str | Path, schema: Schema, task: str) -> ClassDistribution:
    """Counts of the raw source labels of one task, in schema order.

    This is the presentation the source table uses (raw levels, before
    the collapse), so summaries of the annotation file can be compared
    against it level by level.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    counts = {raw: 0 for raw in schema.labels[task]}
    n = 0
    for index, row in _iter_rows(path, schema):
        raw = row[task]
        if raw not in counts:
            raise RowError(index, f"unmappable {task} label {raw!r}")
        counts[raw] += 1
        n += 1
    if n == 0:
        raise ValueError("raw distribution of an empty file is undefined")
    return ClassDistribution(task=task, counts=counts)


def split(records: list[MemeRecord], ratio: float, seed: int) -> DatasetSplit:
    """Seeded uniform shuffle, then cut at floor(ratio * n).

    Deterministic for a fixed seed; both splits keep the shuffled order.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
    if len(records) < 2:
        raise ValueError("need at least 2 records to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(records))
    cut = math.floor(ratio * len(records))
    shuffled = [records[i] for i in order]
    return DatasetSplit(train=shuffled[:cut], test=shuffled[cut:], seed=seed, ratio=ratio)
