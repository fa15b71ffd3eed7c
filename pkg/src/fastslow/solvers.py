"""Solver backends behind one ``complete(prompt) -> SolverReply`` call.

``HttpModel`` talks to a local inference server. ``ScriptedReplay`` and
``SyntheticColorer`` are deterministic stand-ins for tests and sweeps.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading
import time
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import requests

from .graph import CandidateKind, ColoringCandidate, GraphInstance, parse_dimacs
from .prompts import ATTEMPT_HEADER, BEST_HEADER, prompt_key, task_section


class SolverError(RuntimeError):
    pass


class SolverTimeout(SolverError):
    pass


class TransportError(SolverError):
    pass


class FixtureExhausted(SolverError):
    pass


class Backend(str, Enum):
    HTTP = "HttpModel"
    REPLAY = "ScriptedReplay"
    SYNTHETIC = "SyntheticColorer"


@dataclass(frozen=True)
class Decoding:
    seed: int = 12345
    temperature: float = 0.0
    top_k: int = 1
    top_p: float = 1.0


@dataclass(frozen=True)
class SolverSpec:
    """Immutable solver description; build a live solver with :func:`make_solver`.

    ``timing="synthetic"`` makes mock backends report exactly ``latency``
    seconds instead of measured time plus ``latency``.
    """

    backend: Backend = Backend.SYNTHETIC
    model_name: str | None = None
    decoding: Decoding = field(default_factory=Decoding)
    timeout: float = 300.0
    url: str = "http://localhost:11434/api/generate"
    prompt_field: str = "prompt"
    response_field: str = "response"
    options_field: str = "options"
    fixture: str | tuple[tuple[str, str], ...] | None = None
    fix_prob: float = 1.0
    seed: int = 0
    latency: float = 0.0
    timing: str = "measured"

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> SolverSpec:
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown solver fields: {sorted(unknown)}")
        if "backend" in data:
            data["backend"] = Backend(data["backend"])
        if "decoding" in data:
            data["decoding"] = Decoding(**data["decoding"])
        if isinstance(data.get("fixture"), list):
            data["fixture"] = tuple((e["prompt_key"], e["response_text"]) for e in data["fixture"])
        return cls(**data)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"backend": self.backend.value}
        if self.backend is Backend.HTTP:
            out.update(model_name=self.model_name, url=self.url, decoding=vars(self.decoding), timeout=self.timeout)
        elif self.backend is Backend.REPLAY:
            out["fixture"] = self.fixture if isinstance(self.fixture, str) else "<inline>"
        else:
            out.update(fix_prob=self.fix_prob, seed=self.seed)
        if self.latency:
            out["latency"] = self.latency
        return out


@dataclass(frozen=True)
class SolverReply:
    text: str
    wall_time: float
    truncated: bool = False


class Solver:
    def __init__(self, spec: SolverSpec) -> None:
        self.spec = spec

    def complete(self, prompt: str) -> SolverReply:
        started = time.perf_counter()
        text, truncated = self._complete(prompt)
        elapsed = time.perf_counter() - started
        return SolverReply(text, self._report_time(elapsed), truncated)

    def _report_time(self, elapsed: float) -> float:
        if self.spec.timing == "synthetic":
            return self.spec.latency
        return elapsed + self.spec.latency

    def _complete(self, prompt: str) -> tuple[str, bool]:
        raise NotImplementedError


class HttpSolver(Solver):
    """POSTs ``{model, prompt, stream: false, options}`` and reads the reply field."""

    def payload(self, prompt: str) -> dict[str, Any]:
        d = self.spec.decoding
        return {
            "model": self.spec.model_name,
            self.spec.prompt_field: prompt,
            "stream": False,
            self.spec.options_field: {"seed": d.seed, "temperature": d.temperature, "top_k": d.top_k, "top_p": d.top_p},
        }

    def _complete(self, prompt: str) -> tuple[str, bool]:
        try:
            resp = requests.post(self.spec.url, json=self.payload(prompt), timeout=self.spec.timeout)
            resp.raise_for_status()
            body = resp.json()
        except requests.Timeout as exc:
            raise SolverTimeout(f"no reply within {self.spec.timeout:g} s") from exc
        except (requests.RequestException, ValueError) as exc:
            raise TransportError(str(exc)) from exc
        if self.spec.response_field not in body:
            raise TransportError(f"reply lacks field {self.spec.response_field!r}")
        return str(body[self.spec.response_field]), body.get("done_reason") == "length"


def load_fixture(source: str | Path | Sequence[Any] | None) -> list[tuple[str, str]]:
    if source is None:
        return []
    if isinstance(source, (str, Path)):
        source = json.loads(Path(source).read_text(encoding="utf-8"))
    out = []
    for entry in source:
        if isinstance(entry, Mapping):
            out.append((entry["prompt_key"], entry["response_text"]))
        else:
            key, text = entry
            out.append((key, text))
    return out


class ReplaySolver(Solver):
    """Serves fixture responses in order among entries matching the prompt key.

    A fixture key of ``"*"`` matches any prompt.
    """

    def __init__(self, spec: SolverSpec) -> None:
        super().__init__(spec)
        self._entries = load_fixture(spec.fixture)
        self._used = [False] * len(self._entries)
        self._lock = threading.Lock()

    def _complete(self, prompt: str) -> tuple[str, bool]:
        key = prompt_key(prompt)
        with self._lock:
            for i, (k, text) in enumerate(self._entries):
                if not self._used[i] and k in (key, "*"):
                    self._used[i] = True
                    return text, False
        raise FixtureExhausted(f"no fixture response left for prompt key {key}")


# ---------------------------------------------------------------------------
# Synthetic colorer


@dataclass(frozen=True)
class SyntheticProfile:
    fix_prob: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.fix_prob <= 1.0:
            raise ValueError("fix_prob must lie in [0, 1]")


def _render(assignment: Mapping[str, int]) -> str:
    return "\n".join(f"({v} {c})" for v, c in sorted(assignment.items()))


def repair(
    g: GraphInstance,
    assignment: Mapping[str, int],
    targets: Iterable[str],
    fix_prob: float,
    rng: random.Random,
) -> dict[str, int]:
    """Greedy recoloring of ``targets``, each chosen with probability ``fix_prob``.

    A chosen vertex takes the smallest color unused by its neighbours; when
    all ``k`` colors are taken it takes the color seen least among them.
    Vertices missing from ``assignment`` are always colored.
    """
    adj = g.adjacency()
    out = dict(assignment)
    wanted = set(targets)
    for v in g.vertices:
        if v not in wanted and v in out:
            continue
        if v in out and rng.random() >= fix_prob:
            continue
        counts = [0] * (g.k + 1)
        for u in adj[v]:
            c = out.get(u)
            if c is not None and 1 <= c <= g.k:
                counts[c] += 1
        out[v] = min(range(1, g.k + 1), key=lambda c: (counts[c], c))
    return out


def synthetic_colorer(
    g: GraphInstance,
    previous: ColoringCandidate | None,
    feedback: Any | None,
    profile: SyntheticProfile,
) -> str:
    """LLM-free coloring agent.

    Without a usable previous assignment it emits a uniformly random coloring
    in ``[1, k]``; otherwise it repairs the vertices named in ``feedback``
    (a ``GcFeedback``, a ``ConflictReport`` or an iterable of vertices).
    """
    rng = random.Random(profile.seed)
    if previous is None or previous.kind is not CandidateKind.ASSIGNMENT:
        return _render({v: rng.randint(1, g.k) for v in g.vertices})
    targets = _feedback_vertices(feedback)
    return _render(repair(g, previous.assignment or {}, targets, profile.fix_prob, rng))


def _feedback_vertices(feedback: Any) -> set[str]:
    if feedback is None:
        return set()
    report = getattr(feedback, "conflicts", feedback)
    if hasattr(report, "conflict_vertices"):
        out = set(report.conflict_vertices) | set(report.unassigned)
        out.update(v for v, _ in report.out_of_range)
        return out
    return set(report)


_PAIR = re.compile(r"\(\s*([^\s(),]+)\s+(-?\d+)\s*\)")
_ONLY_PAIRS = re.compile(r"^(\s*\(\s*[^\s(),]+\s+-?\d+\s*\))+\s*$")
_MLF = re.compile(r"vertices (\S+) and (\S+) share color")
_SLF = re.compile(r"\(([^,()\s]+),([^,()\s]+)\)")
_MISSING = re.compile(r"no color given for vertices (.+)")
_RANGE = re.compile(r"vertex (\S+) has color -?\d+, allowed range")


def graph_from_prompt(prompt: str) -> GraphInstance:
    task = task_section(prompt)
    m = re.search(r"### Input Graph[^\n]*\n(.*?)\n### Output Format", task, re.DOTALL)
    k = re.search(r"inclusive range \[1, (\d+)\]", task)
    if m is None or k is None:
        raise TransportError("prompt carries no graph-coloring task")
    return parse_dimacs(m.group(1), k=int(k.group(1)))


def _last_attempt(prompt: str) -> tuple[int, dict[str, int] | None, set[str]]:
    """Number of attempts shown, the last assignment and its fed-back vertices."""
    heads = [m.start() for m in re.finditer(rf"^(?:{ATTEMPT_HEADER}|{BEST_HEADER})", prompt, re.MULTILINE)]
    if not heads:
        return 0, None, set()
    block = prompt[heads[-1]:].splitlines()[1:]
    pairs: dict[str, int] = {}
    i = 0
    while i < len(block) and _ONLY_PAIRS.match(block[i]):
        for v, c in _PAIR.findall(block[i]):
            pairs[v] = int(c)
        i += 1
    rest = "\n".join(block[i:]).split("### Adaptive Example")[0]
    vertices: set[str] = set()
    for u, v in _MLF.findall(rest):
        vertices.update((u, v))
    if "adjacent-conflict(s) on pairs:" in rest:
        for u, v in _SLF.findall(rest.split("adjacent-conflict(s) on pairs:", 1)[1]):
            vertices.update((u, v))
    for m in _MISSING.finditer(rest):
        vertices.update(x.strip() for x in m.group(1).split(","))
    vertices.update(_RANGE.findall(rest))
    return len(heads), (pairs or None), vertices


class SyntheticSolver(Solver):
    """Reads the graph and the latest attempt/feedback back out of the prompt."""

    def _complete(self, prompt: str) -> tuple[str, bool]:
        g = graph_from_prompt(prompt)
        shown, previous, targets = _last_attempt(prompt)
        digest = hashlib.sha256(f"{self.spec.seed}|{prompt_key(prompt)}|{shown}".encode()).digest()
        profile = SyntheticProfile(self.spec.fix_prob, int.from_bytes(digest[:8], "big"))
        prev = ColoringCandidate.from_assignment(previous) if previous else None
        return synthetic_colorer(g, prev, targets, profile), False


_BACKENDS = {Backend.HTTP: HttpSolver, Backend.REPLAY: ReplaySolver, Backend.SYNTHETIC: SyntheticSolver}


def make_solver(spec: SolverSpec | Mapping[str, Any]) -> Solver:
    if not isinstance(spec, SolverSpec):
        spec = SolverSpec.from_mapping(spec)
    return _BACKENDS[spec.backend](spec)


def complete(spec: SolverSpec | Solver, prompt: str) -> SolverReply:
    """One completion. A bare spec gets a fresh solver, so replay state does not persist."""
    solver = spec if isinstance(spec, Solver) else make_solver(spec)
    return solver.complete(prompt)


def fixture_entries(prompts_and_replies: Iterable[tuple[str, str]]) -> list[dict[str, str]]:
    """Build fixture JSON entries from (prompt, response) pairs."""
    return [{"prompt_key": prompt_key(p), "response_text": r} for p, r in prompts_and_replies]


def with_timing(spec: SolverSpec, timing: str) -> SolverSpec:
    return replace(spec, timing=timing)
