"""Acceptance criteria; each test prints one PASS/FAIL line in the terminal summary."""

import itertools
import random
import time
from fractions import Fraction

import pytest

from conftest import WALKTHROUGH_ATTEMPT_1, brute_force_colorable, fixture_path
from fastslow.coloring import GraphColoringAdapter, parse_coloring, render_feedback
from fastslow.debugging import CodeDebuggingAdapter, FailureKind, run_tests
from fastslow.graph import (
    ColoringCandidate,
    GraphInstance,
    Solution,
    Unsolvable,
    emit_dimacs,
    exact_color,
    generate_instance,
    parse_dimacs,
    score,
)
from fastslow.harness import Configuration, SweepSpec, aggregate, cmd_generate, cmd_run, run_configuration
from fastslow.memory import MemoryRecord, MemoryStore, load_records
from fastslow.metacog import (
    Attempt,
    FallbackVariant,
    Mode,
    RunConfig,
    Status,
    Transcript,
    build_fallback_prompt,
    run_instance,
    select_best_attempt,
)
from fastslow.solvers import Backend, SolverSpec, make_solver

criterion = pytest.mark.criterion

CORRECTED = """class Solution:
    def kthFactor(self, n: int, k: int) -> int:
        factors = []
        for i in range(1, n + 1):
            if n % i == 0:
                factors.append(i)
        if k <= len(factors):
            return factors[k - 1]
        else:
            return -1"""


def _synthetic(fix_prob=1.0, seed=0):
    return SolverSpec(Backend.SYNTHETIC, fix_prob=fix_prob, seed=seed, timing="synthetic")


# 1 --------------------------------------------------------------------------


@criterion("1 oracle equivalence: 200 graphs n<=8, k in {2,3,4}, < 60 s")
def test_oracle_equivalence():
    rng = random.Random(2024)
    started = time.perf_counter()
    for i in range(200):
        g = generate_instance(rng.randint(1, 8), rng.uniform(0.1, 0.9), rng.randrange(10**9), k=rng.choice([2, 3, 4]))
        result = exact_color(g)
        expected = brute_force_colorable(g)
        if expected:
            assert isinstance(result, Solution), i
            f = result.assignment
            assert set(f) == set(g.vertices)
            assert all(1 <= c <= g.k for c in f.values())
            assert all(f[u] != f[v] for u, v in g.edges)
        else:
            assert isinstance(result, Unsolvable), i
    assert time.perf_counter() - started < 60


# 2 --------------------------------------------------------------------------


def _recount(g, assignment):
    """Edge-by-edge recount; isolated vertices count as unary constraints."""
    ok = lambda v: v in assignment and 1 <= assignment[v] <= g.k  # noqa: E731
    satisfied = sum(ok(u) and ok(v) and assignment[u] != assignment[v] for u, v in g.edges)
    degree = {v: 0 for v in g.vertices}
    for u, v in g.edges:
        degree[u] += 1
        degree[v] += 1
    isolated = [v for v in g.vertices if degree[v] == 0]
    return Fraction(satisfied + sum(ok(v) for v in isolated), len(g.edges) + len(isolated))


@criterion("2 score fidelity: 1000 random pairs, exact rational equality")
def test_score_fidelity():
    rng = random.Random(7)
    for _ in range(1000):
        g = generate_instance(rng.randint(1, 12), rng.uniform(0.0, 1.0), rng.randrange(10**9))
        assignment = {}
        for v in g.vertices:
            roll = rng.random()
            if roll < 0.85:
                assignment[v] = rng.randint(1, g.k)
            elif roll < 0.93:
                assignment[v] = rng.choice([0, g.k + 1, -3])
        report = score(g, ColoringCandidate.from_assignment(assignment))
        assert report.score == _recount(g, assignment)
        assert (report.score == 1) == (
            len(assignment) == g.n
            and all(1 <= c <= g.k for c in assignment.values())
            and all(assignment[u] != assignment[v] for u, v in g.edges)
        )


# 3 --------------------------------------------------------------------------


@criterion("3 DIMACS round trip: 1000 instances, sizes 5-25, isolated vertices included")
def test_dimacs_round_trip():
    rng = random.Random(3)
    isolated_seen = 0
    for i in range(1000):
        p = 0.1 if i % 4 == 0 else rng.uniform(0.1, 0.9)
        g = generate_instance(rng.randint(5, 25), p, rng.randrange(10**9))
        back = parse_dimacs(emit_dimacs(g), k=g.k)
        assert set(back.vertices) == set(g.vertices)
        assert back.edges == g.edges
        touched = {x for e in g.edges for x in e}
        isolated_seen += any(v not in touched for v in g.vertices)
    assert isolated_seen > 0


# 4 --------------------------------------------------------------------------

TRIANGLE = "p edge 3 3\nc edges\ne h i\ne h j\ne i j"


@pytest.fixture
def attempt1_report(walkthrough_graph):
    return score(walkthrough_graph, parse_coloring(WALKTHROUGH_ATTEMPT_1, walkthrough_graph))


@criterion("4a walkthrough attempt-1 conflict set {(h,i),(h,j),(i,j)} with score 9/12")
def test_walkthrough_conflict_set(attempt1_report):
    assert {(u, v) for u, v, _ in attempt1_report.conflicts} == {("h", "i"), ("h", "j"), ("i", "j")}
    assert attempt1_report.score == Fraction(9, 12)


@criterion("4b walkthrough MLF text contains the three adjacent-conflict lines")
def test_walkthrough_mlf_lines(walkthrough_graph, attempt1_report):
    text = render_feedback(walkthrough_graph, attempt1_report, "MLF").text
    assert text.startswith("That was incorrect. The coloring is invalid for the following reason(s):")
    for u, v in [("h", "i"), ("h", "j"), ("i", "j")]:
        assert f"adjacent-conflict: vertices {u} and {v} share color 3" in text


@criterion("4c walkthrough adaptive example equals the 3-vertex triangle block")
def test_walkthrough_adaptive_triangle(walkthrough_graph, attempt1_report):
    fb = render_feedback(walkthrough_graph, attempt1_report, "MLF")
    assert fb.adaptive_example is not None
    assert f"Subproblem Graph:\n{TRIANGLE}\n" in fb.adaptive_example
    assert "(h 1)  (i 2)  (j 3)" in fb.adaptive_example


@criterion("4d walkthrough Scenario 3 solved by S1 at iteration 2")
def test_walkthrough_scenario3(walkthrough_graph):
    s1 = SolverSpec(Backend.REPLAY, fixture=fixture_path("walkthrough_scenario3.json"))
    out = run_instance(GraphColoringAdapter(), s1, _synthetic(), walkthrough_graph, RunConfig(T=5))
    assert out.status is Status.SOLVED_BY_S1 and out.solved_iteration == 2
    assert out.transcript.fallback is None


@criterion("4e walkthrough Scenario 2 falls back to S2 at T=2")
def test_walkthrough_scenario2(walkthrough_graph):
    s1 = SolverSpec(Backend.REPLAY, fixture=fixture_path("walkthrough_scenario2.json"))
    out = run_instance(GraphColoringAdapter(), s1, _synthetic(), walkthrough_graph, RunConfig(T=2))
    assert [a.score < 1 for a in out.transcript.attempts] == [True, True]
    assert out.transcript.fallback is not None
    assert out.status in (Status.SOLVED_BY_S2, Status.FAILED)


# 5 --------------------------------------------------------------------------


@criterion("5 kthFactor: buggy fails (4,3) with -1, corrected passes >=5 tests, < 10 s")
def test_kth_factor(kth_instance):
    started = time.perf_counter()
    assert len(kth_instance.tests) >= 5
    buggy = run_tests(kth_instance.buggy_code, kth_instance)
    failing = buggy.last_failing
    assert failing.input == "n = 4, k = 3" and failing.actual_output.strip() == "-1"
    assert failing.failure_kind is FailureKind.WRONG_OUTPUT
    assert run_tests(CORRECTED, kth_instance).pass_ratio == 1
    assert time.perf_counter() - started < 10


# 6 --------------------------------------------------------------------------


@criterion("6 fallback context contracts: 500 randomized transcripts, 0 violations")
def test_fallback_contracts(walkthrough_graph, kth_instance):
    rng = random.Random(6)
    adapters = [(GraphColoringAdapter(include_adaptive=False), walkthrough_graph), (CodeDebuggingAdapter(), kth_instance)]
    violations = []
    for trial in range(500):
        adapter, inst = adapters[trial % 2]
        t = rng.randint(1, 8)
        attempts = [
            Attempt(i, "", "", f"(zz{trial}x{i} {rng.randint(1, 4)})", Fraction(rng.randint(0, 4), 4), f"fb{i}", 0.0)
            for i in range(1, t + 1)
        ]
        tr = Transcript(attempts)
        texts = [a.candidate_text for a in attempts]
        rule = rng.choice(["best", "last"])
        po = build_fallback_prompt("PO", inst, tr, adapter, rule)
        ba = build_fallback_prompt("BA", inst, tr, adapter, rule)
        fh = build_fallback_prompt("FH", inst, tr, adapter, rule)
        chosen = select_best_attempt(tr) if rule == "best" else attempts[-1]
        if any(x in po for x in texts):
            violations.append((trial, "PO"))
        if [x for x in texts if x in ba] != [chosen.candidate_text] or ba.count(chosen.candidate_text) != 1:
            violations.append((trial, "BA"))
        positions = [fh.find(x) for x in texts]
        if -1 in positions or positions != sorted(positions) or any(fh.count(x) != 1 for x in texts):
            violations.append((trial, "FH"))
    assert violations == []


# 7 --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def size15_solvable():
    items = cmd_generate([15], 320, seed=15)["items"]
    solvable = [(ident, g, {"size": 15, "solvable": True}) for ident, g in items if g.meta.solvable][:100]
    assert len(solvable) == 100
    return solvable


@criterion("7 monotone budget: success(T=15)>=T=10>=T=5>=T=1, strict for fix_prob=1.0, < 120 s")
def test_monotone_budget(size15_solvable):
    started = time.perf_counter()
    adapter = GraphColoringAdapter()
    for fix_prob in (0.5, 1.0):
        rates = []
        for T in (1, 5, 10, 15):
            conf = Configuration(f"T{T}", RunConfig(T=T, mode=Mode.S1_ONLY, memory_limit=0), _synthetic(fix_prob, 1), None)
            first = run_configuration(conf, size15_solvable, adapter, timing="synthetic")
            again = run_configuration(conf, size15_solvable, adapter, timing="synthetic")
            assert first == again
            rates.append(aggregate(conf.label, first).success_rate)
        print(f"fix_prob={fix_prob}: success rates at T=1,5,10,15 -> {rates}")
        assert rates == sorted(rates)
        if fix_prob == 1.0:
            assert rates[-1] > rates[0]
    assert time.perf_counter() - started < 120


# 8 --------------------------------------------------------------------------


@criterion("8 determinism: identical mock sweeps give byte-identical transcripts and CSV")
def test_determinism(tmp_path):
    cmd_generate([5, 8, 11], 4, seed=8, out_dir=tmp_path / "data")
    replay = {"backend": "ScriptedReplay", "fixture": [{"prompt_key": "*", "response_text": "(a 1)"}] * 200}
    confs = [
        {"label": "fh", "T": 3, "fallback_variant": "FH", "s1": {"backend": "SyntheticColorer", "fix_prob": 0.5}, "s2": replay},
        {"label": "ba-eem", "T": 4, "fallback_variant": "BA", "memory_variant": "EEM",
         "s1": {"backend": "SyntheticColorer", "fix_prob": 0.7, "seed": 4, "latency": 0.25},
         "s2": {"backend": "SyntheticColorer", "latency": 3.0}},
        {"label": "lrm", "mode": "S2Only", "s2": {"backend": "SyntheticColorer", "seed": 9}},
    ]
    outputs = []
    for run in ("one", "two"):
        spec = SweepSpec.from_mapping(
            {"dataset": str(tmp_path / "data"), "output": str(tmp_path / run), "configurations": confs,
             "timing": "synthetic", "workers": 3}
        )
        cmd_run(spec)
        files = sorted((tmp_path / run).rglob("*.*"))
        outputs.append({f.relative_to(tmp_path / run): f.read_bytes() for f in files})
    assert len(outputs[0]) == 4
    assert outputs[0] == outputs[1]


# 9 --------------------------------------------------------------------------


@criterion("9 memory schema: EEM round trip, t history entries, MEM zero")
def test_memory_schema(tmp_path):
    adapter = GraphColoringAdapter()
    rng = random.Random(9)
    checked = 0
    for i in range(40):
        g = generate_instance(rng.randint(4, 10), rng.uniform(0.2, 0.6), rng.randrange(10**9))
        for variant in ("EEM", "MEM"):
            root = tmp_path / f"{variant}{i}"
            store = MemoryStore(root)
            cfg = RunConfig(T=rng.randint(1, 6), memory_variant=variant)
            out = run_instance(adapter, _synthetic(rng.random(), i), _synthetic(), g, cfg, store)
            if not out.solved:
                continue
            (line,) = (root / "graph_coloring.jsonl").read_text().splitlines()
            (record,) = load_records(root / "graph_coloring.jsonl")
            assert record == store.snapshot()[0]
            data = record.to_json()
            if variant == "EEM":
                assert list(data) == ["problem_instance", "interaction_history", "correct_solution"]
                for h in data["interaction_history"]:
                    assert list(h) == ["attempt", "candidate_solution", "feedback_received"]
                t = len(out.transcript.attempts) + (out.transcript.fallback is not None)
                assert len(record.interaction_history) == t
                assert record.interaction_history[-1].feedback_received == "Correct"
            else:
                assert list(data) == ["problem_instance", "correct_solution"]
                assert record.interaction_history == ()
            assert MemoryRecord.from_json(data) == record
            checked += 1
    assert checked > 40


# 10 -------------------------------------------------------------------------


class _Counting:
    def __init__(self, spec):
        self.inner = make_solver(spec)
        self.spec = self.inner.spec
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        return self.inner.complete(prompt)


@criterion("10 budget safety: 1000 runs, attempts <= T, one S2 call iff fallback outcome")
def test_budget_safety(monkeypatch):
    import fastslow.metacog as metacog

    monkeypatch.setattr(metacog, "Solver", (metacog.Solver, _Counting))
    adapter = GraphColoringAdapter(include_adaptive=False)
    rng = random.Random(10)
    for _ in range(1000):
        g = generate_instance(rng.randint(2, 9), rng.uniform(0.1, 0.9), rng.randrange(10**9))
        cfg = RunConfig(
            T=rng.randint(1, 6),
            fallback_variant=rng.choice(list(FallbackVariant)),
            stagnation_window=rng.choice([None, 2, 3]),
            feedback_variant=rng.choice(["MLF", "SLF"]),
        )
        s1 = _Counting(_synthetic(rng.random(), rng.randrange(1000)))
        s2 = _Counting(_synthetic(rng.random(), rng.randrange(1000)))
        out = run_instance(adapter, s1, s2, g, cfg)
        assert out.diagnostic is None
        assert s1.calls == len(out.transcript.attempts) <= cfg.T
        fell_back = out.status is Status.SOLVED_BY_S2 or (out.status is Status.FAILED and out.transcript.fallback)
        assert (s2.calls == 1) == bool(fell_back)
        assert s2.calls in (0, 1)
        assert (s2.calls == 0) == (out.status is Status.SOLVED_BY_S1)
