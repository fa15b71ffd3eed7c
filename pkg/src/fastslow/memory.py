"""Episodic memory of solved instances (minimal MEM and extended EEM records)."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence


class MemoryVariant(str, Enum):
    MEM = "MEM"
    EEM = "EEM"


class PersistenceError(OSError):
    pass


SUCCESS_MARKER = "Correct"


@dataclass(frozen=True)
class HistoryEntry:
    attempt: int
    candidate_solution: str
    feedback_received: str

    def to_json(self) -> dict[str, Any]:
        return {
            "attempt": self.attempt,
            "candidate_solution": self.candidate_solution,
            "feedback_received": self.feedback_received,
        }


@dataclass(frozen=True)
class MemoryRecord:
    """One solved instance.

    ``problem_instance`` is a domain-tagged dict: it always carries
    ``domain`` and ``size`` next to the domain's own fields.
    """

    variant: MemoryVariant
    problem_instance: dict[str, Any]
    correct_solution: str
    interaction_history: tuple[HistoryEntry, ...] = ()

    def __post_init__(self) -> None:
        if self.variant is MemoryVariant.MEM and self.interaction_history:
            raise ValueError("MEM records carry no interaction history")
        if self.variant is MemoryVariant.EEM:
            indices = [h.attempt for h in self.interaction_history]
            if indices != list(range(1, len(indices) + 1)):
                raise ValueError(f"EEM attempt indices must be 1..n, got {indices}")
            if not indices or self.interaction_history[-1].feedback_received != SUCCESS_MARKER:
                raise ValueError("EEM history must end with the success marker")

    @property
    def domain(self) -> str:
        return self.problem_instance.get("domain", "")

    @property
    def size(self) -> int:
        return int(self.problem_instance.get("size", 0))

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"problem_instance": self.problem_instance}
        if self.variant is MemoryVariant.EEM:
            out["interaction_history"] = [h.to_json() for h in self.interaction_history]
        out["correct_solution"] = self.correct_solution
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> MemoryRecord:
        history = data.get("interaction_history")
        variant = MemoryVariant.EEM if history is not None else MemoryVariant.MEM
        return cls(
            variant=variant,
            problem_instance=data["problem_instance"],
            correct_solution=data["correct_solution"],
            interaction_history=tuple(HistoryEntry(**h) for h in history or ()),
        )


class MemoryStore:
    """Append-only store, one JSON-lines file per domain under ``root``.

    With ``root=None`` records live in memory only. Writes are serialized;
    ``snapshot`` returns an immutable view for concurrent readers.
    """

    def __init__(self, root: str | Path | None = None) -> None:
        self.root = Path(root) if root is not None else None
        self._records: list[MemoryRecord] = []
        self._lock = threading.Lock()
        if self.root is not None and self.root.exists():
            for path in sorted(self.root.glob("*.jsonl")):
                self._records.extend(load_records(path))

    def __len__(self) -> int:
        return len(self._records)

    def path_for(self, domain: str) -> Path:
        assert self.root is not None
        return self.root / f"{domain}.jsonl"

    def append(self, record: MemoryRecord) -> None:
        with self._lock:
            if self.root is not None:
                try:
                    self.root.mkdir(parents=True, exist_ok=True)
                    with self.path_for(record.domain).open("a", encoding="utf-8") as fh:
                        fh.write(json.dumps(record.to_json(), sort_keys=False) + "\n")
                except OSError as exc:
                    raise PersistenceError(f"cannot persist memory record: {exc}") from exc
            self._records.append(record)

    def snapshot(self) -> tuple[MemoryRecord, ...]:
        with self._lock:
            return tuple(self._records)


def load_records(path: str | Path) -> list[MemoryRecord]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(MemoryRecord.from_json(json.loads(line)))
    return out


def record_success(
    store: MemoryStore | None,
    outcome: Any,
    variant: MemoryVariant | str,
    problem_instance: dict[str, Any],
) -> MemoryRecord:
    """Build a record from a solved outcome and append it to ``store``.

    The S2 fallback, when it produced the solution, counts as the final attempt
    of the EEM history.
    """
    if not outcome.solved:
        raise ValueError("only solved outcomes can be recorded")
    variant = MemoryVariant(variant)
    history: tuple[HistoryEntry, ...] = ()
    if variant is MemoryVariant.EEM:
        steps = [(a.candidate_text, a.feedback_text) for a in outcome.transcript.attempts]
        if outcome.transcript.fallback is not None:
            steps.append((outcome.transcript.fallback.candidate_text, None))
        history = tuple(
            HistoryEntry(i, text, SUCCESS_MARKER if i == len(steps) else (fb or ""))
            for i, (text, fb) in enumerate(steps, start=1)
        )
    record = MemoryRecord(variant, problem_instance, outcome.solution_text, history)
    if store is not None:
        store.append(record)
    return record


def retrieve(
    records: MemoryStore | Iterable[MemoryRecord], domain: str, size: int, limit: int = 1
) -> list[MemoryRecord]:
    """Same-domain records nearest in size; ties go to the newest record."""
    if limit < 0:
        raise ValueError("limit must be >= 0")
    pool: Sequence[MemoryRecord] = records.snapshot() if isinstance(records, MemoryStore) else tuple(records)
    candidates = [(abs(r.size - size), -pos, r) for pos, r in enumerate(pool) if r.domain == domain]
    candidates.sort(key=lambda t: (t[0], t[1]))
    return [r for _, _, r in candidates[:limit]]
