"""Graph-coloring domain adapter: prompts, output parsing, feedback rendering."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Mapping, Sequence

from . import prompts
from .graph import (
    CandidateKind,
    ColoringCandidate,
    ConflictReport,
    GraphInstance,
    Solution,
    emit_dimacs,
    exact_color,
    has_isolated,
    induced_subgraph,
    parse_dimacs,
    score,
)
from .memory import MemoryRecord

NOT_SOLVABLE = "NOT SOLVABLE"
ADAPTIVE_MAX_VERTICES = 8
ADAPTIVE_ORACLE_BUDGET = 2.0

_PAIR = re.compile(r"\(\s*([^\s(),]+)\s+(-?\d+)\s*\)")


class FeedbackVariant(str, Enum):
    MLF = "MLF"
    SLF = "SLF"


@dataclass(frozen=True)
class GcFeedback:
    variant: FeedbackVariant
    text: str
    conflicts: ConflictReport
    adaptive_example: str | None = None

    @property
    def full_text(self) -> str:
        if self.adaptive_example:
            return f"{self.text}\n\n{self.adaptive_example}"
        return self.text


# ---------------------------------------------------------------------------
# Rendering helpers


def prompt_graph(g: GraphInstance) -> str:
    """Graph block in the prompt dialect: ``p edges`` header and bare edges."""
    lines = [f" p edges {g.n} {len(g.edges)}"]
    if has_isolated(g):
        lines.append(" c vertices: " + " ".join(g.vertices))
    lines.append(" c edges")
    lines.extend(f" {u} {v}" for u, v in g.sorted_edges())
    return "\n".join(lines)


def format_assignment(assignment: Mapping[str, int], sep: str = "\n") -> str:
    return sep.join(f"({v} {c})" for v, c in sorted(assignment.items()))


def candidate_text(c: ColoringCandidate) -> str:
    if c.kind is CandidateKind.ASSIGNMENT:
        return format_assignment(c.assignment or {})
    if c.kind is CandidateKind.NOT_SOLVABLE:
        return NOT_SOLVABLE
    return c.raw_text.strip()


def task_block(g: GraphInstance) -> str:
    return prompts.render("gc_task", k=g.k, k_plus_one=g.k + 1, graph=prompt_graph(g))


def memory_example(record: MemoryRecord, index: int) -> str:
    problem = record.problem_instance
    lines = [
        f"Example {index}: {problem.get('task', 'Graph Coloring Decision Problem')}",
        problem.get("graph", ""),
        "Solution:",
        record.correct_solution,
    ]
    if record.interaction_history:
        lines.append("How it was reached:")
        for h in record.interaction_history:
            lines.append(f"Attempt {h.attempt}:")
            lines.append(h.candidate_solution)
            lines.append(f"Feedback: {h.feedback_received}")
    return "\n".join(lines)


def build_s1_prompt(
    g: GraphInstance,
    memory: Sequence[MemoryRecord] = (),
    history: Sequence[Any] = (),
) -> str:
    """Prompt for the fast solver.

    ``history`` holds earlier attempts (objects with ``index``,
    ``candidate_text`` and ``feedback_text``); each is appended after the task
    with its feedback.
    """
    parts = []
    mem = prompts.memory_block([memory_example(r, i) for i, r in enumerate(memory, start=1)])
    if mem:
        parts.append(mem)
    parts.append(task_block(g))
    parts.extend(prompts.attempt_block(a.index, a.candidate_text, a.feedback_text) for a in history)
    return "\n\n".join(parts)


# ---------------------------------------------------------------------------
# Parsing


def parse_coloring(raw: str, g: GraphInstance | None = None) -> ColoringCandidate:
    if raw.strip() == NOT_SOLVABLE:
        return ColoringCandidate(CandidateKind.NOT_SOLVABLE, raw_text=raw)
    assignment: dict[str, int] = {}
    for m in _PAIR.finditer(raw):
        vertex = m.group(1)
        assignment.pop(vertex, None)  # last occurrence wins, in output order
        assignment[vertex] = int(m.group(2))
    if not assignment:
        return ColoringCandidate(CandidateKind.PARSE_FAILURE, raw_text=raw)
    unknown: tuple[str, ...] = ()
    if g is not None:
        known = set(g.vertices)
        unknown = tuple(v for v in assignment if v not in known)
        for v in unknown:
            del assignment[v]
    return ColoringCandidate(CandidateKind.ASSIGNMENT, assignment, raw, unknown)


# ---------------------------------------------------------------------------
# Feedback


def _notes(report: ConflictReport, k: int) -> list[str]:
    notes = []
    if report.unassigned:
        notes.append("missing-color: no color given for vertices " + ", ".join(report.unassigned))
    for v, c in report.out_of_range:
        notes.append(f"color-out-of-range: vertex {v} has color {c}, allowed range is [1, {k}]")
    if report.unknown_vertices:
        notes.append("format: ignored unknown vertices " + ", ".join(report.unknown_vertices))
    return notes


def adaptive_example(
    g: GraphInstance,
    report: ConflictReport,
    oracle: Callable[..., Any] = exact_color,
    max_vertices: int = ADAPTIVE_MAX_VERTICES,
) -> str | None:
    """Oracle-colored subgraph induced by the conflict vertices, or None."""
    if not report.conflict_vertices:
        return None
    sub = induced_subgraph(g, report.conflict_vertices)
    if sub.n > max_vertices:
        adj = sub.adjacency()
        keep = sorted(sub.vertices, key=lambda v: (-len(adj[v]), v))[:max_vertices]
        sub = induced_subgraph(sub, keep)
    result = oracle(sub, ADAPTIVE_ORACLE_BUDGET)
    if not isinstance(result, Solution):
        return None
    coloring = "  ".join(f"({v} {result.assignment[v]})" for v in sub.vertices)
    return prompts.render("gc_adaptive", graph=emit_dimacs(sub), coloring=coloring)


def render_feedback(
    g: GraphInstance,
    report: ConflictReport,
    variant: FeedbackVariant | str = FeedbackVariant.MLF,
    include_adaptive: bool | None = None,
    oracle: Callable[..., Any] = exact_color,
) -> GcFeedback:
    """Feedback for an unsuccessful candidate.

    Adaptive examples default to on for MLF and off for SLF.
    """
    variant = FeedbackVariant(variant)
    if include_adaptive is None:
        include_adaptive = variant is FeedbackVariant.MLF

    if report.kind is CandidateKind.NOT_SOLVABLE:
        text = (
            f"That was incorrect. A valid coloring with at most {g.k} colors exists, "
            f"so {NOT_SOLVABLE} is not the right answer. Please try again and provide a coloring."
        )
        return GcFeedback(variant, text, report)
    if report.kind is CandidateKind.PARSE_FAILURE:
        text = (
            "That was incorrect. Your response could not be parsed. Provide one (vertex color) "
            f"pair per line, for example (a 1), or respond exactly with: {NOT_SOLVABLE}"
        )
        return GcFeedback(variant, text, report)

    notes = _notes(report, g.k)
    if variant is FeedbackVariant.MLF:
        lines = ["That was incorrect. The coloring is invalid for the following reason(s):"]
        lines += [
            f"  {i}. adjacent-conflict: vertices {u} and {v} share color {c}"
            for i, (u, v, c) in enumerate(report.conflicts, start=1)
        ]
        lines += [f"  - {n}" for n in notes]
        text = "\n".join(lines)
    else:
        parts = []
        if report.conflicts:
            pairs = ", ".join(f"({u},{v})" for u, v, _ in report.conflicts)
            parts.append(f"adjacent-conflict(s) on pairs: {pairs}")
        parts.extend(notes)
        text = "That was incorrect. The coloring is invalid: " + "; ".join(parts) + "."

    example = adaptive_example(g, report, oracle) if include_adaptive else None
    return GcFeedback(variant, text, report, example)


# ---------------------------------------------------------------------------
# Adapter used by the controller


class GraphColoringAdapter:
    domain = "graph_coloring"
    default_ba_rule = "best"

    def __init__(self, include_adaptive: bool | None = None, oracle: Callable[..., Any] = exact_color) -> None:
        self.include_adaptive = include_adaptive
        self.oracle = oracle

    def instance_size(self, g: GraphInstance) -> int:
        return g.n

    def task_block(self, g: GraphInstance) -> str:
        return task_block(g)

    def build_prompt(self, g: GraphInstance, memory: Sequence[MemoryRecord], attempts: Sequence[Any]) -> str:
        return build_s1_prompt(g, memory, attempts)

    def assemble(self, g: GraphInstance, sections: Sequence[str]) -> str:
        return "\n\n".join([task_block(g), *sections])

    def parse(self, raw: str, g: GraphInstance) -> ColoringCandidate:
        return parse_coloring(raw, g)

    def evaluate(self, g: GraphInstance, candidate: ColoringCandidate) -> tuple[Fraction, ConflictReport]:
        report = score(g, candidate)
        return report.score, report

    def feedback(self, g: GraphInstance, candidate: ColoringCandidate, report: ConflictReport, variant: str) -> str:
        return render_feedback(g, report, variant, self.include_adaptive, self.oracle).full_text

    def candidate_text(self, candidate: ColoringCandidate) -> str:
        return candidate_text(candidate)

    def format_reminder(self, error: Exception) -> str:
        return (
            f"That attempt produced no usable response ({type(error).__name__}: {error}). "
            "Provide one (vertex color) pair per line, sorted lexicographically, "
            f"or respond exactly with: {NOT_SOLVABLE}"
        )

    def memory_problem(self, g: GraphInstance) -> dict[str, Any]:
        return {
            "domain": self.domain,
            "task": f"Graph Coloring Decision Problem (< {g.k + 1} colors)",
            "graph": prompt_graph(g).strip("\n"),
            "k": g.k,
            "size": g.n,
        }

    def detail_json(self, report: ConflictReport) -> dict[str, Any]:
        return {
            "kind": report.kind.value,
            "conflicts": [list(c) for c in report.conflicts],
            "score_exact": f"{report.score.numerator}/{report.score.denominator}",
        }


def graph_from_memory(problem: Mapping[str, Any]) -> GraphInstance:
    return parse_dimacs(problem["graph"], k=int(problem["k"]))
