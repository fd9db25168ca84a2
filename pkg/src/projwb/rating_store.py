"""Append-only JSONL persistence for user ratings.

One file per user, one JSON object per line. Re-rating a projection
appends a new line; readers take the last line per projection as the
current answer, so history is never lost and writes never rewrite.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass
from datetime import datetime, timezone

from .datasets import DataError

# user ids become file names; keep them path-safe
USER_ID_PATTERN = re.compile(r"^[A-Za-z0-9_-]{1,64}$")
SCORE_MIN = 1
SCORE_MAX = 5


def validate_user_id(user_id: str) -> str:
    if not isinstance(user_id, str) or not USER_ID_PATTERN.match(user_id):
        raise ValueError(
            "user id must be 1-64 characters of letters, digits, '-' or '_'"
        )
    return user_id


def validate_score(score) -> int:
    if isinstance(score, bool) or not isinstance(score, int):
        raise ValueError(f"score must be an integer, got {score!r}")
    if not SCORE_MIN <= score <= SCORE_MAX:
        raise ValueError(f"score must be in [{SCORE_MIN}, {SCORE_MAX}], got {score}")
    return score


@dataclass(frozen=True)
class RatingRecord:
    user_id: str
    projection_id: str
    score: int
    submitted_at: str  # UTC ISO-8601

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "projection_id": self.projection_id,
            "score": self.score,
            "submitted_at": self.submitted_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RatingRecord":
        return cls(
            user_id=validate_user_id(d["user_id"]),
            projection_id=str(d["projection_id"]),
            score=validate_score(d["score"]),
            submitted_at=str(d["submitted_at"]),
        )


class RatingStore:
    """Reads and appends per-user rating files under one directory."""

    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def path_for(self, user_id: str) -> str:
        return os.path.join(self.directory, f"ratings_{validate_user_id(user_id)}.jsonl")

    def _lock_for(self, user_id: str) -> threading.Lock:
        with self._locks_guard:
            if user_id not in self._locks:
                self._locks[user_id] = threading.Lock()
            return self._locks[user_id]

    def append(self, user_id: str, projection_id: str, score: int) -> RatingRecord:
        record = RatingRecord(
            user_id=validate_user_id(user_id),
            projection_id=str(projection_id),
            score=validate_score(score),
            submitted_at=datetime.now(timezone.utc).isoformat(),
        )
        line = json.dumps(record.to_dict(), sort_keys=True)
        with self._lock_for(user_id):
            with open(self.path_for(user_id), "a") as fh:
                fh.write(line + "\n")
        return record

    def records(self, user_id: str) -> list[RatingRecord]:
        path = self.path_for(user_id)
        if not os.path.exists(path):
            return []
        out = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    out.append(RatingRecord.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise DataError(f"{path}:{lineno}: bad rating record: {exc}") from None
        return out

    def latest(self, user_id: str) -> dict[str, int]:
        """Last score per projection, in file (submission) order."""
        scores: dict[str, int] = {}
        for record in self.records(user_id):
            scores[record.projection_id] = record.score
        return scores


def load_ratings_file(path: str) -> tuple[str, dict[str, int]]:
    """(user_id, latest scores) from one JSONL file, for offline fitting."""
    if not os.path.exists(path):
        raise DataError(f"ratings file not found: {path}")
    user_ids = set()
    scores: dict[str, int] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = RatingRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad rating record: {exc}") from None
            user_ids.add(record.user_id)
            scores[record.projection_id] = record.score
    if not scores:
        raise DataError(f"{path}: no ratings")
    if len(user_ids) > 1:
        raise DataError(f"{path}: ratings from multiple users: {sorted(user_ids)}")
    return user_ids.pop(), scores
