"""Metacognitive controller: evaluate, feed back, retry, then fall back to S2."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Mapping, Protocol, Sequence

from . import prompts
from .memory import MemoryRecord, MemoryStore, MemoryVariant, record_success, retrieve
from .solvers import Solver, SolverError, SolverSpec, make_solver

log = logging.getLogger(__name__)


class Mode(str, Enum):
    S1_ONLY = "S1Only"
    S2_ONLY = "S2Only"
    PIPELINE = "Pipeline"


class FallbackVariant(str, Enum):
    PO = "PO"
    BA = "BA"
    FH = "FH"


class Status(str, Enum):
    SOLVED_BY_S1 = "SolvedByS1"
    SOLVED_BY_S2 = "SolvedByS2"
    FAILED = "Failed"


class EmptyTranscript(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    T: int = 5
    theta: float = 1.0
    feedback_variant: str = "MLF"
    memory_variant: str = "MEM"
    fallback_variant: FallbackVariant = FallbackVariant.PO
    stagnation_window: int | None = None
    mode: Mode = Mode.PIPELINE
    ba_rule: str | None = None
    memory_limit: int = 1
    memory_on_first_attempt: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "fallback_variant", FallbackVariant(self.fallback_variant))
        object.__setattr__(self, "mode", Mode(self.mode))
        MemoryVariant(self.memory_variant)
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.stagnation_window is not None and self.stagnation_window < 2:
            raise ValueError("stagnation_window must be >= 2")
        if self.ba_rule not in (None, "best", "last"):
            raise ValueError("ba_rule must be 'best' or 'last'")
        if self.feedback_variant not in ("MLF", "SLF"):
            raise ValueError("feedback_variant must be MLF or SLF")

    def to_json(self) -> dict[str, Any]:
        return {
            "T": self.T,
            "theta": self.theta,
            "feedback_variant": self.feedback_variant,
            "memory_variant": self.memory_variant,
            "fallback_variant": self.fallback_variant.value,
            "stagnation_window": self.stagnation_window,
            "mode": self.mode.value,
            "ba_rule": self.ba_rule,
            "memory_limit": self.memory_limit,
        }


@dataclass
class Attempt:
    index: int
    prompt: str
    response: str
    candidate_text: str
    score: Fraction
    feedback_text: str | None
    wall_time: float
    candidate: Any = None
    detail: Any = None
    error: str | None = None


@dataclass
class FallbackCall:
    variant: FallbackVariant
    prompt: str
    response: str
    candidate_text: str
    score: Fraction
    wall_time: float
    candidate: Any = None
    detail: Any = None
    error: str | None = None


@dataclass
class Transcript:
    attempts: list[Attempt] = field(default_factory=list)
    fallback: FallbackCall | None = None

    @property
    def scores(self) -> list[Fraction]:
        return [a.score for a in self.attempts]


@dataclass
class Outcome:
    status: Status
    transcript: Transcript
    total_time: float
    solved_iteration: int | None = None
    final_candidate: Any = None
    solution_text: str = ""
    elapsed: float = 0.0
    diagnostic: str | None = None

    @property
    def solved(self) -> bool:
        return self.status is not Status.FAILED


class DomainAdapter(Protocol):
    domain: str
    default_ba_rule: str

    def instance_size(self, instance: Any) -> int: ...
    def task_block(self, instance: Any) -> str: ...
    def build_prompt(self, instance: Any, memory: Sequence[MemoryRecord], attempts: Sequence[Attempt]) -> str: ...
    def assemble(self, instance: Any, sections: Sequence[str]) -> str: ...
    def parse(self, raw: str, instance: Any) -> Any: ...
    def evaluate(self, instance: Any, candidate: Any) -> tuple[Fraction, Any]: ...
    def feedback(self, instance: Any, candidate: Any, detail: Any, variant: str) -> str: ...
    def candidate_text(self, candidate: Any) -> str: ...
    def format_reminder(self, error: Exception) -> str: ...
    def memory_problem(self, instance: Any) -> dict[str, Any]: ...


def select_best_attempt(transcript: Transcript | Sequence[Attempt]) -> Attempt:
    """Highest score; among equal scores the latest attempt wins."""
    attempts = transcript.attempts if isinstance(transcript, Transcript) else list(transcript)
    if not attempts:
        raise EmptyTranscript("no attempts to choose from")
    best = attempts[0]
    for a in attempts[1:]:
        if a.score >= best.score:
            best = a
    return best


def build_fallback_prompt(
    variant: FallbackVariant | str,
    instance: Any,
    transcript: Transcript,
    adapter: DomainAdapter,
    ba_rule: str = "best",
) -> str:
    variant = FallbackVariant(variant)
    if variant is FallbackVariant.PO:
        return adapter.assemble(instance, [])
    if not transcript.attempts:
        raise EmptyTranscript(f"{variant.value} fallback needs at least one attempt")
    if variant is FallbackVariant.BA:
        chosen = select_best_attempt(transcript) if ba_rule == "best" else transcript.attempts[-1]
        block = prompts.best_attempt_block(chosen.index, chosen.candidate_text, float(chosen.score))
        return adapter.assemble(instance, [block])
    blocks = [prompts.attempt_block(a.index, a.candidate_text, a.feedback_text) for a in transcript.attempts]
    return adapter.assemble(instance, blocks)


def _stagnated(scores: Sequence[Fraction], window: int | None) -> bool:
    """True when each of the last ``window`` attempts failed to beat its predecessor."""
    if window is None or len(scores) < window + 1:
        return False
    tail = scores[-(window + 1):]
    return all(b <= a for a, b in zip(tail, tail[1:]))


def _as_solver(s: Solver | SolverSpec | Mapping[str, Any] | None) -> Solver | None:
    if s is None or isinstance(s, Solver):
        return s
    return make_solver(s)


def _call(solver: Solver, prompt: str) -> tuple[str, float, Exception | None]:
    started = time.perf_counter()
    try:
        reply = solver.complete(prompt)
    except SolverError as exc:
        wall = time.perf_counter() - started
        if solver.spec.timing == "synthetic":
            wall = solver.spec.latency
        return "", wall, exc
    return reply.text, reply.wall_time, None


def run_instance(
    adapter: DomainAdapter,
    s1: Solver | SolverSpec | None,
    s2: Solver | SolverSpec | None,
    instance: Any,
    cfg: RunConfig,
    memory_store: MemoryStore | None = None,
) -> Outcome:
    """Solve one instance under ``cfg`` and return its outcome and transcript."""
    started = time.perf_counter()
    solver1, solver2 = _as_solver(s1), _as_solver(s2)
    transcript = Transcript()
    theta = Fraction(cfg.theta).limit_denominator(10**9)
    ba_rule = cfg.ba_rule or adapter.default_ba_rule

    def finish(status: Status, **kw: Any) -> Outcome:
        total = sum(a.wall_time for a in transcript.attempts)
        if transcript.fallback is not None:
            total += transcript.fallback.wall_time
        out = Outcome(status, transcript, total, elapsed=time.perf_counter() - started, **kw)
        if out.solved and memory_store is not None:
            record_success(memory_store, out, cfg.memory_variant, adapter.memory_problem(instance))
        return out

    try:
        if cfg.mode is not Mode.S2_ONLY:
            if solver1 is None:
                raise ValueError("S1 solver required")
            memory: list[MemoryRecord] = []
            if memory_store is not None and cfg.memory_limit > 0:
                memory = retrieve(memory_store, adapter.domain, adapter.instance_size(instance), cfg.memory_limit)
            for t in range(1, cfg.T + 1):
                shown = memory if (t > 1 or cfg.memory_on_first_attempt) else []
                prompt = adapter.build_prompt(instance, shown, transcript.attempts)
                text, wall, err = _call(solver1, prompt)
                if err is not None:
                    transcript.attempts.append(
                        Attempt(t, prompt, "", "", Fraction(0), adapter.format_reminder(err), wall, error=str(err))
                    )
                else:
                    candidate = adapter.parse(text, instance)
                    value, detail = adapter.evaluate(instance, candidate)
                    solved = value >= theta
                    fb = None if solved else adapter.feedback(instance, candidate, detail, cfg.feedback_variant)
                    transcript.attempts.append(
                        Attempt(t, prompt, text, adapter.candidate_text(candidate), value, fb, wall, candidate, detail)
                    )
                    if solved:
                        return finish(
                            Status.SOLVED_BY_S1,
                            solved_iteration=t,
                            final_candidate=candidate,
                            solution_text=adapter.candidate_text(candidate),
                        )
                if cfg.mode is Mode.PIPELINE and t < cfg.T and _stagnated(transcript.scores, cfg.stagnation_window):
                    log.debug("stagnation after attempt %d; falling back early", t)
                    break
            if cfg.mode is Mode.S1_ONLY:
                return finish(Status.FAILED)

        if solver2 is None:
            raise ValueError("S2 solver required")
        variant = FallbackVariant.PO if cfg.mode is Mode.S2_ONLY else cfg.fallback_variant
        prompt = build_fallback_prompt(variant, instance, transcript, adapter, ba_rule)
        text, wall, err = _call(solver2, prompt)
        if err is not None:
            transcript.fallback = FallbackCall(variant, prompt, "", "", Fraction(0), wall, error=str(err))
            return finish(Status.FAILED)
        candidate = adapter.parse(text, instance)
        value, detail = adapter.evaluate(instance, candidate)
        transcript.fallback = FallbackCall(
            variant, prompt, text, adapter.candidate_text(candidate), value, wall, candidate, detail
        )
        if value >= theta:
            return finish(Status.SOLVED_BY_S2, final_candidate=candidate, solution_text=adapter.candidate_text(candidate))
        return finish(Status.FAILED, final_candidate=candidate)
    except Exception as exc:  # adapter or configuration failure
        log.warning("instance aborted: %s", exc)
        total = sum(a.wall_time for a in transcript.attempts)
        return Outcome(
            Status.FAILED,
            transcript,
            total,
            elapsed=time.perf_counter() - started,
            diagnostic=f"{type(exc).__name__}: {exc}",
        )


def transcript_record(
    instance_id: str,
    cfg: RunConfig,
    outcome: Outcome,
    adapter: Any = None,
    meta: Mapping[str, Any] | None = None,
    include_wall_clock: bool = True,
    label: str | None = None,
) -> dict[str, Any]:
    """JSON-ready transcript line for one instance."""

    def detail(d: Any) -> Any:
        if adapter is not None and hasattr(adapter, "detail_json"):
            return adapter.detail_json(d)
        return None

    attempts = [
        {
            "index": a.index,
            "prompt": a.prompt,
            "response": a.response,
            "candidate": a.candidate_text,
            "score": float(a.score),
            "feedback_text": a.feedback_text,
            "wall_time_ms": round(a.wall_time * 1000, 3),
            "detail": detail(a.detail) if a.error is None else None,
            "error": a.error,
        }
        for a in outcome.transcript.attempts
    ]
    fb = outcome.transcript.fallback
    fallback = None
    if fb is not None:
        fallback = {
            "variant": fb.variant.value,
            "prompt": fb.prompt,
            "response": fb.response,
            "candidate": fb.candidate_text,
            "score": float(fb.score),
            "wall_time_ms": round(fb.wall_time * 1000, 3),
            "detail": detail(fb.detail) if fb.error is None else None,
            "error": fb.error,
        }
    rec: dict[str, Any] = {"instance_id": instance_id}
    if label is not None:
        rec["label"] = label
    rec.update(
        {
            "meta": dict(meta or {}),
            "config": cfg.to_json(),
            "attempts": attempts,
            "fallback": fallback,
            "status": outcome.status.value,
            "solved_iteration": outcome.solved_iteration,
            "total_time_ms": round(outcome.total_time * 1000, 3),
            "diagnostic": outcome.diagnostic,
        }
    )
    if include_wall_clock:
        rec["wall_time_ms"] = round(outcome.elapsed * 1000, 3)
    return rec
