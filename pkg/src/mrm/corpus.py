"""Corpus I/O: JSONL with one validation sample per line."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import DuplicateId, ParseError, SchemaViolation
from .types import ValidationSample

_REQUIRED = ("id", "task", "query", "contexts")
_OPTIONAL = ("output", "reference", "annotations", "metadata")


def sample_to_dict(sample: ValidationSample) -> dict:
    d = {
        "id": sample.id,
        "task": sample.task.value,
        "query": sample.query,
        "contexts": list(sample.contexts),
    }
    if sample.output is not None:
        d["output"] = sample.output
    if sample.reference is not None:
        d["reference"] = sample.reference
    if sample.annotations is not None:
        d["annotations"] = sample.annotations
    if sample.metadata:
        d["metadata"] = sample.metadata
    return d


def sample_from_dict(record: dict, line: int | None = None) -> ValidationSample:
    if not isinstance(record, dict):
        raise SchemaViolation("record is not an object", line)
    for key in _REQUIRED:
        if key not in record:
            raise SchemaViolation(f"missing field {key!r}", line, key)
    unknown = set(record) - set(_REQUIRED) - set(_OPTIONAL)
    if unknown:
        raise SchemaViolation(f"unknown fields {sorted(unknown)}", line, sorted(unknown)[0])
    try:
        return ValidationSample(
            id=record["id"],
            task=record["task"],
            query=record["query"],
            contexts=tuple(record["contexts"]),
            output=record.get("output"),
            reference=record.get("reference"),
            annotations=record.get("annotations"),
            metadata=record.get("metadata", {}),
        )
    except ValueError as exc:
        raise SchemaViolation(str(exc), line) from exc


def load_corpus(path: str | Path) -> list[ValidationSample]:
    """Parse and validate a JSONL corpus; rejections carry the line number."""
    samples: list[ValidationSample] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: {exc}", lineno) from exc
            sample = sample_from_dict(record, lineno)
            if sample.id in seen:
                raise DuplicateId(sample.id, lineno)
            seen[sample.id] = lineno
            samples.append(sample)
    return samples


def write_corpus(samples: list[ValidationSample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(sample_to_dict(sample), ensure_ascii=False) + "\n")
