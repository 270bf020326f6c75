"""Held-output store for human-in-the-loop review.

Event-sourced JSONL (created/decided records) so pending holds survive a
restart. State transitions are atomic and one-shot: pending -> approved or
pending -> rejected, never anything else.
"""

from __future__ import annotations

import enum
import json
import os
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from ..errors import MrmError


class HeldState(str, enum.Enum):
    PENDING = "pending"
    APPROVED = "approved"
    REJECTED = "rejected"


class NotFound(MrmError):
    pass


class AlreadyDecided(MrmError):
    pass


@dataclass(frozen=True)
class HeldItem:
    request_id: str
    response_text: str
    created_at: datetime
    state: HeldState = HeldState.PENDING
    reviewer_id: str | None = None
    decided_at: datetime | None = None

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "response_text": self.response_text,
            "created_at": self.created_at.isoformat(),
            "state": self.state.value,
            "reviewer_id": self.reviewer_id,
            "decided_at": self.decided_at.isoformat() if self.decided_at else None,
        }


class HeldStore:
    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._items: dict[str, HeldItem] = {}
        if self._path.exists():
            with open(self._path, encoding="utf-8") as fh:
                for raw in fh:
                    if raw.strip():
                        self._replay(json.loads(raw))

    def _replay(self, rec: dict) -> None:
        if rec["event"] == "created":
            self._items[rec["request_id"]] = HeldItem(
                request_id=rec["request_id"],
                response_text=rec["response_text"],
                created_at=datetime.fromisoformat(rec["created_at"]),
            )
        elif rec["event"] == "decided":
            item = self._items[rec["request_id"]]
            self._items[rec["request_id"]] = replace(
                item,
                state=HeldState(rec["state"]),
                reviewer_id=rec["reviewer_id"],
                decided_at=datetime.fromisoformat(rec["decided_at"]),
            )

    def _append(self, rec: dict) -> None:
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def put(self, request_id: str, response_text: str) -> HeldItem:
        with self._lock:
            if request_id in self._items:
                raise ValueError(f"held item {request_id} already exists")
            item = HeldItem(
                request_id=request_id,
                response_text=response_text,
                created_at=datetime.now(timezone.utc),
            )
            self._append(
                {
                    "event": "created",
                    "request_id": request_id,
                    "response_text": response_text,
                    "created_at": item.created_at.isoformat(),
                }
            )
            self._items[request_id] = item
            return item

    def get(self, request_id: str) -> HeldItem:
        with self._lock:
            item = self._items.get(request_id)
        if item is None:
            raise NotFound(f"no held item {request_id}")
        return item

    def list(self, state: HeldState | None = None) -> list[HeldItem]:
        with self._lock:
            items = sorted(self._items.values(), key=lambda i: i.created_at)
        if state is None:
            return items
        return [i for i in items if i.state is state]

    def decide(self, request_id: str, approve: bool, reviewer_id: str) -> HeldItem:
        """Atomic single-shot transition; a second decision raises
        AlreadyDecided regardless of direction."""
        with self._lock:
            item = self._items.get(request_id)
            if item is None:
                raise NotFound(f"no held item {request_id}")
            if item.state is not HeldState.PENDING:
                raise AlreadyDecided(f"held item {request_id} is already {item.state.value}")
            decided = replace(
                item,
                state=HeldState.APPROVED if approve else HeldState.REJECTED,
                reviewer_id=reviewer_id,
                decided_at=datetime.now(timezone.utc),
            )
            self._append(
                {
                    "event": "decided",
                    "request_id": request_id,
                    "state": decided.state.value,
                    "reviewer_id": reviewer_id,
                    "decided_at": decided.decided_at.isoformat(),
                }
            )
            self._items[request_id] = decided
            return decided
