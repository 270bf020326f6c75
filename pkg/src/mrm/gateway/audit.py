"""Append-only audit log for every gateway interaction.

JSONL on disk with fsync per write plus an in-memory index; a single
serialized writer assigns strictly increasing sequence numbers. Prompts
are stored only as salted hashes unless store_prompts is set.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    request_id: str
    timestamp: datetime
    user_id: str
    usage_id: str
    prompt_hash: str
    outcome: str
    reasons: tuple[tuple[str, str], ...] = ()
    generation_metadata: dict | None = None
    prompt: str | None = None  # populated only when store_prompts

    def to_dict(self) -> dict:
        d = {
            "seq": self.seq,
            "request_id": self.request_id,
            "timestamp": self.timestamp.isoformat(),
            "user_id": self.user_id,
            "usage_id": self.usage_id,
            "prompt_hash": self.prompt_hash,
            "outcome": self.outcome,
            "reasons": [list(r) for r in self.reasons],
        }
        if self.generation_metadata is not None:
            d["generation_metadata"] = self.generation_metadata
        if self.prompt is not None:
            d["prompt"] = self.prompt
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AuditEvent":
        return cls(
            seq=d["seq"],
            request_id=d["request_id"],
            timestamp=datetime.fromisoformat(d["timestamp"]),
            user_id=d["user_id"],
            usage_id=d["usage_id"],
            prompt_hash=d["prompt_hash"],
            outcome=d["outcome"],
            reasons=tuple((r[0], r[1]) for r in d.get("reasons", [])),
            generation_metadata=d.get("generation_metadata"),
            prompt=d.get("prompt"),
        )


class AuditLog:
    def __init__(self, path: str | Path, salt: str = "", store_prompts: bool = False):
        self._path = Path(path)
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._salt = salt
        self._store_prompts = store_prompts
        self._lock = threading.Lock()
        self._events: list[AuditEvent] = []
        if self._path.exists():
            with open(self._path, encoding="utf-8") as fh:
                for raw in fh:
                    if raw.strip():
                        self._events.append(AuditEvent.from_dict(json.loads(raw)))
        self._next_seq = self._events[-1].seq + 1 if self._events else 1

    def _hash_prompt(self, prompt: str) -> str:
        return hashlib.sha256((self._salt + prompt).encode("utf-8")).hexdigest()

    def append(
        self,
        request_id: str,
        user_id: str,
        usage_id: str,
        prompt: str,
        outcome: str,
        reasons: list[tuple[str, str]] | None = None,
        generation_metadata: dict | None = None,
    ) -> AuditEvent:
        with self._lock:
            event = AuditEvent(
                seq=self._next_seq,
                request_id=request_id,
                timestamp=datetime.now(timezone.utc),
                user_id=user_id,
                usage_id=usage_id,
                prompt_hash=self._hash_prompt(prompt),
                outcome=outcome,
                reasons=tuple(reasons or ()),
                generation_metadata=generation_metadata,
                prompt=prompt if self._store_prompts else None,
            )
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.to_dict(), ensure_ascii=False) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._events.append(event)
            self._next_seq += 1
            return event

    def query(
        self,
        user_id: str | None = None,
        usage_id: str | None = None,
        outcome: str | None = None,
        since: datetime | None = None,
        until: datetime | None = None,
    ) -> list[AuditEvent]:
        """Conjunctive filters, results in sequence order."""
        with self._lock:
            events = list(self._events)
        out = []
        for e in events:
            if user_id is not None and e.user_id != user_id:
                continue
            if usage_id is not None and e.usage_id != usage_id:
                continue
            if outcome is not None and e.outcome != outcome:
                continue
            if since is not None and e.timestamp < since:
                continue
            if until is not None and e.timestamp >= until:
                continue
            out.append(e)
        return out

    def __len__(self) -> int:
        with self._lock:
            return len(self._events)
