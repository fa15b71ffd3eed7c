"""Graph-coloring instances: DIMACS I/O, seeded generation, exact oracle, scoring."""

from __future__ import annotations

import itertools
import json
import random
import string
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class DimacsError(ValueError):
    """Base class for DIMACS parse failures."""


class MissingHeader(DimacsError):
    pass


class CountMismatch(DimacsError):
    pass


class MalformedLine(DimacsError):
    pass


class SelfLoop(DimacsError):
    pass


class UnknownVertex(KeyError):
    pass


class MissingLabel(ValueError):
    """A NOT SOLVABLE claim was scored against an instance with no oracle label."""


class OracleTimeout(TimeoutError):
    pass


Edge = tuple[str, str]


def _norm(u: str, v: str) -> Edge:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class GraphMeta:
    size: int
    edge_prob: float | None = None
    seed: int | None = None
    solvable: bool | None = None


@dataclass(frozen=True)
class GraphInstance:
    """Undirected graph with a color budget ``k``.

    Edges are stored as lexicographically ordered pairs, so ``(u, v)`` and
    ``(v, u)`` denote the same edge.
    """

    vertices: tuple[str, ...]
    edges: frozenset[Edge]
    k: int = 4
    meta: GraphMeta = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        vertices = tuple(self.vertices)
        object.__setattr__(self, "vertices", vertices)
        if len(set(vertices)) != len(vertices):
            raise ValueError("duplicate vertex identifiers")
        known = set(vertices)
        edges = set()
        for u, v in self.edges:
            if u == v:
                raise SelfLoop(f"self-loop on vertex {u}")
            if u not in known or v not in known:
                raise UnknownVertex(f"edge ({u}, {v}) references an unknown vertex")
            edges.add(_norm(u, v))
        object.__setattr__(self, "edges", frozenset(edges))
        if self.k < 1:
            raise ValueError("color budget k must be >= 1")
        if self.meta is None:
            object.__setattr__(self, "meta", GraphMeta(size=len(vertices)))
        elif self.meta.size != len(vertices):
            raise ValueError("meta.size does not match the vertex count")

    @property
    def n(self) -> int:
        return len(self.vertices)

    def adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {v: set() for v in self.vertices}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def with_k(self, k: int) -> GraphInstance:
        return replace(self, k=k)


class CandidateKind(str, Enum):
    ASSIGNMENT = "Assignment"
    NOT_SOLVABLE = "NotSolvableClaim"
    PARSE_FAILURE = "ParseFailure"


@dataclass(frozen=True)
class ColoringCandidate:
    kind: CandidateKind
    assignment: Mapping[str, int] | None = None
    raw_text: str = ""
    unknown_vertices: tuple[str, ...] = ()

    @classmethod
    def from_assignment(cls, assignment: Mapping[str, int], raw_text: str = "") -> ColoringCandidate:
        return cls(CandidateKind.ASSIGNMENT, dict(assignment), raw_text)


@dataclass(frozen=True)
class ConflictReport:
    """Result of checking one candidate against one instance.

    ``unassigned`` and ``out_of_range`` list vertices whose color does not
    count as valid; they are penalized on every incident edge.
    """

    conflicts: tuple[tuple[str, str, int], ...] = ()
    conflict_vertices: tuple[str, ...] = ()
    score: Fraction = Fraction(0)
    kind: CandidateKind = CandidateKind.ASSIGNMENT
    unassigned: tuple[str, ...] = ()
    out_of_range: tuple[tuple[str, int], ...] = ()
    unknown_vertices: tuple[str, ...] = ()

    @property
    def solved(self) -> bool:
        return self.score == 1


# ---------------------------------------------------------------------------
# DIMACS


def parse_dimacs(text: str, k: int = 4) -> GraphInstance:
    """Parse DIMACS-like text into a :class:`GraphInstance`.

    Both ``p edge``/``p edges`` headers and both ``e u v`` and bare ``u v``
    edge lines are accepted. A ``c vertices: ...`` comment registers
    vertices (including isolated ones) in the listed order.
    """
    header: tuple[int, int] | None = None
    order: dict[str, None] = {}
    edges: set[Edge] = set()
    parsed_edge_lines = 0

    lines = text.splitlines()
    # In the bare edge form a vertex may be called "c"; "c x" is then an edge.
    bare = not any(_is_e_line(ln.split()) for ln in lines)
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "c" and not (bare and _bare_c_edge(tokens)):
            rest = line[1:].strip()
            if rest.startswith("vertices:"):
                for v in rest[len("vertices:"):].split():
                    order.setdefault(v, None)
            continue
        if tokens[0] == "p":
            if header is not None:
                raise MalformedLine(f"line {lineno}: duplicate 'p' line")
            if len(tokens) != 4 or tokens[1] not in ("edge", "edges", "col"):
                raise MalformedLine(f"line {lineno}: expected 'p edge N M', got {line!r}")
            try:
                header = (int(tokens[2]), int(tokens[3]))
            except ValueError as exc:
                raise MalformedLine(f"line {lineno}: non-integer counts in {line!r}") from exc
            continue
        if _is_e_line(tokens):
            tokens = tokens[1:]
        if len(tokens) != 2:
            raise MalformedLine(f"line {lineno}: expected an edge 'e u v' or 'u v', got {line!r}")
        u, v = tokens
        if u == v:
            raise SelfLoop(f"line {lineno}: self-loop on vertex {u}")
        order.setdefault(u, None)
        order.setdefault(v, None)
        edges.add(_norm(u, v))
        parsed_edge_lines += 1

    if header is None:
        raise MissingHeader("no 'p' line found")
    n_declared, m_declared = header
    if len(order) != n_declared:
        raise CountMismatch(f"declared {n_declared} vertices, found {len(order)}")
    if parsed_edge_lines != m_declared or len(edges) != m_declared:
        raise CountMismatch(f"declared {m_declared} edges, found {parsed_edge_lines} ({len(edges)} distinct)")
    vertices = tuple(order)
    return GraphInstance(vertices, frozenset(edges), k, GraphMeta(size=len(vertices)))


def _is_e_line(tokens: list[str]) -> bool:
    # "e h" is a bare edge touching vertex "e"; "e h i" is a prefixed edge.
    return len(tokens) == 3 and tokens[0] == "e"


def _bare_c_edge(tokens: list[str]) -> bool:
    return len(tokens) == 2 and tokens[1] not in ("edges", "edge", "vertices:") and not tokens[1].startswith("vertices:")


def has_isolated(g: GraphInstance) -> bool:
    touched = {v for e in g.edges for v in e}
    return any(v not in touched for v in g.vertices)


def emit_dimacs(g: GraphInstance) -> str:
    """Canonical serialization: ``p edge`` header, optional roster, ``e u v`` lines."""
    lines = [f"p edge {g.n} {len(g.edges)}"]
    if has_isolated(g):
        lines.append("c vertices: " + " ".join(g.vertices))
    lines.append("c edges")
    lines.extend(f"e {u} {v}" for u, v in g.sorted_edges())
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Generation


def vertex_names(n: int) -> list[str]:
    if n <= 26:
        return list(string.ascii_lowercase[:n])
    return [f"v{i}" for i in range(1, n + 1)]


def generate_instance(n: int, edge_prob: float, seed: int, k: int = 4) -> GraphInstance:
    """Draw a G(n, p) graph; a pure function of its arguments."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    rng = random.Random(seed)
    names = vertex_names(n)
    edges = frozenset(
        _norm(names[i], names[j])
        for i, j in itertools.combinations(range(n), 2)
        if rng.random() < edge_prob
    )
    return GraphInstance(tuple(names), edges, k, GraphMeta(size=n, edge_prob=edge_prob, seed=seed))


def induced_subgraph(g: GraphInstance, vs: Iterable[str]) -> GraphInstance:
    keep = set(vs)
    unknown = keep.difference(g.vertices)
    if unknown:
        raise UnknownVertex(f"not in graph: {sorted(unknown)}")
    vertices = tuple(v for v in g.vertices if v in keep)
    edges = frozenset(e for e in g.edges if e[0] in keep and e[1] in keep)
    return GraphInstance(vertices, edges, g.k, GraphMeta(size=len(vertices)))


# ---------------------------------------------------------------------------
# Exact oracle


@dataclass(frozen=True)
class Solution:
    assignment: dict[str, int]


@dataclass(frozen=True)
class Unsolvable:
    pass


@dataclass(frozen=True)
class Timeout:
    elapsed: float


def exact_color(g: GraphInstance, time_budget: float | None = 10.0) -> Solution | Unsolvable | Timeout:
    """Decide ``k``-colorability by backtracking with forward checking.

    Vertices are ordered by descending degree, ties by identifier. Colors are
    tried in increasing order and a new color is opened only once (symmetry
    breaking), so the search is deterministic.
    """
    k = g.k
    adj = g.adjacency()
    order = sorted(g.vertices, key=lambda v: (-len(adj[v]), v))
    index = {v: i for i, v in enumerate(order)}
    nbrs = [[index[u] for u in adj[v]] for v in order]
    n = len(order)
    colors = [0] * n
    full = (1 << k) - 1
    domains = [full] * n
    deadline = None if time_budget is None else time.perf_counter() + time_budget
    steps = 0

    def solve(i: int, used: int) -> bool:
        nonlocal steps
        if i == n:
            return True
        steps += 1
        if deadline is not None and steps & 1023 == 0 and time.perf_counter() > deadline:
            raise OracleTimeout
        dom = domains[i]
        # Colors beyond used+1 are symmetric to used+1.
        limit = min(used + 1, k)
        for c in range(limit):
            bit = 1 << c
            if not dom & bit:
                continue
            pruned: list[int] = []
            ok = True
            for j in nbrs[i]:
                if j > i and domains[j] & bit:
                    domains[j] &= ~bit
                    pruned.append(j)
                    if not domains[j]:
                        ok = False
                        break
            if ok:
                colors[i] = c + 1
                if solve(i + 1, max(used, c + 1)):
                    return True
            for j in pruned:
                domains[j] |= bit
        return False

    started = time.perf_counter()
    try:
        found = solve(0, 0)
    except OracleTimeout:
        return Timeout(time.perf_counter() - started)
    if not found:
        return Unsolvable()
    return Solution({order[i]: colors[i] for i in range(n)})


def label_solvability(g: GraphInstance, time_budget: float | None = 10.0) -> GraphInstance:
    result = exact_color(g, time_budget)
    if isinstance(result, Timeout):
        raise OracleTimeout(f"oracle exceeded {time_budget}s on a {g.n}-vertex graph")
    return replace(g, meta=replace(g.meta, solvable=isinstance(result, Solution)))


# ---------------------------------------------------------------------------
# Scoring


def score(g: GraphInstance, c: ColoringCandidate) -> ConflictReport:
    """Fraction of satisfied constraints for a candidate.

    Each edge is a constraint satisfied when both endpoints hold distinct
    colors in ``[1, k]``. Isolated vertices add a unary constraint (hold a
    color in ``[1, k]``), which keeps full-but-invalid assignments below 1.0
    and defines the edgeless case. NOT SOLVABLE claims score 1 or 0 against
    the oracle label.
    """
    if c.kind is CandidateKind.PARSE_FAILURE:
        return ConflictReport(kind=c.kind, score=Fraction(0))
    if c.kind is CandidateKind.NOT_SOLVABLE:
        if g.meta.solvable is None:
            raise MissingLabel("instance has no solvability label")
        return ConflictReport(kind=c.kind, score=Fraction(0 if g.meta.solvable else 1))

    assignment = c.assignment or {}
    known = set(g.vertices)
    unknown = tuple(sorted(set(assignment).difference(known) | set(c.unknown_vertices)))
    valid: dict[str, bool] = {}
    unassigned: list[str] = []
    out_of_range: list[tuple[str, int]] = []
    for v in g.vertices:
        if v not in assignment:
            valid[v] = False
            unassigned.append(v)
        elif not 1 <= assignment[v] <= g.k:
            valid[v] = False
            out_of_range.append((v, assignment[v]))
        else:
            valid[v] = True

    conflicts: list[tuple[str, str, int]] = []
    good = 0
    for u, v in g.sorted_edges():
        if u in assignment and v in assignment and assignment[u] == assignment[v]:
            conflicts.append((u, v, assignment[u]))
        elif valid[u] and valid[v]:
            good += 1
    touched = {x for e in g.edges for x in e}
    isolated = [v for v in g.vertices if v not in touched]
    good += sum(valid[v] for v in isolated)
    total = len(g.edges) + len(isolated)

    seen: dict[str, None] = {}
    for u, v, _ in conflicts:
        seen.setdefault(u, None)
        seen.setdefault(v, None)
    return ConflictReport(
        conflicts=tuple(conflicts),
        conflict_vertices=tuple(seen),
        score=Fraction(good, total) if total else Fraction(1),
        kind=c.kind,
        unassigned=tuple(unassigned),
        out_of_range=tuple(out_of_range),
        unknown_vertices=unknown,
    )


# ---------------------------------------------------------------------------
# Dataset files


def instance_id(size: int, index: int) -> str:
    return f"gc_n{size:02d}_{index:03d}"


def write_dataset(instances: Sequence[tuple[str, GraphInstance]], out_dir: str | Path) -> Path:
    """Write one ``.col`` file per instance plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for ident, g in instances:
        fname = f"{ident}.col"
        (out / fname).write_text(emit_dimacs(g) + "\n")
        entries.append(
            {
                "id": ident,
                "file": fname,
                "size": g.meta.size,
                "edge_prob": g.meta.edge_prob,
                "seed": g.meta.seed,
                "k": g.k,
                "solvable": g.meta.solvable,
            }
        )
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"domain": "graph_coloring", "instances": entries}, indent=2) + "\n")
    return manifest


def read_dataset(path: str | Path, solvable: bool | None = None) -> list[tuple[str, GraphInstance]]:
    """Load a dataset from a manifest file or its directory, optionally filtered by label."""
    p = Path(path)
    manifest = p / "manifest.json" if p.is_dir() else p
    data = json.loads(manifest.read_text())
    out = []
    for entry in data["instances"]:
        if solvable is not None and entry.get("solvable") is not solvable:
            continue
        g = parse_dimacs((manifest.parent / entry["file"]).read_text(), k=entry["k"])
        meta = GraphMeta(
            size=entry["size"], edge_prob=entry.get("edge_prob"), seed=entry.get("seed"), solvable=entry.get("solvable")
        )
        out.append((entry["id"], replace(g, meta=meta)))
    return out
