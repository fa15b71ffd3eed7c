import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastslow.coloring import (
    FeedbackVariant,
    adaptive_example,
    build_s1_prompt,
    format_assignment,
    parse_coloring,
    render_feedback,
)
from fastslow.graph import (
    CandidateKind,
    ColoringCandidate,
    ConflictReport,
    GraphInstance,
    generate_instance,
    label_solvability,
    parse_dimacs,
    score,
)
from fastslow.metacog import Attempt

from conftest import WALKTHROUGH_ATTEMPT_1


TRIANGLE_CONFLICTS = ConflictReport(
    conflicts=(("h", "i", 3), ("h", "j", 3), ("i", "j", 3)),
    conflict_vertices=("h", "i", "j"),
)


def test_first_prompt_sections(walkthrough_graph):
    p = build_s1_prompt(walkthrough_graph)
    for heading in ("### Task: Graph Coloring Decision Problem (< 5 colors)", "### Input Graph", "### Output Format", "### Constraints Recap"):
        assert heading in p
    assert "respond exactly with: NOT SOLVABLE" in p
    assert "Provide one (vertex color) pair per line, sorted lexicographically" in p
    assert " p edges 10 12\n c edges\n a b\n a c" in p
    assert "That was incorrect." not in p


def test_prompt_k_phrasing():
    g = generate_instance(5, 0.5, 1, k=2)
    p = build_s1_prompt(g)
    assert "(< 3 colors)" in p and "inclusive range [1, 2]" in p


def test_retry_prompt_contains_feedback(walkthrough_graph):
    cand = parse_coloring(WALKTHROUGH_ATTEMPT_1, walkthrough_graph)
    fb = render_feedback(walkthrough_graph, score(walkthrough_graph, cand), "MLF")
    a = Attempt(1, "", WALKTHROUGH_ATTEMPT_1, format_assignment(cand.assignment), 0, fb.full_text, 0.0)
    p = build_s1_prompt(walkthrough_graph, history=[a])
    assert "### Previous Attempt 1\n(a 1)\n(b 2)" in p
    assert "That was incorrect. The coloring" in p
    assert p.index("### Constraints Recap") < p.index("### Previous Attempt 1")


def test_prompt_graph_block_parses_back(walkthrough_graph):
    g = GraphInstance(("a", "b", "c"), frozenset({("a", "b")}), 2)
    p = build_s1_prompt(g)
    block = p.split("### Input Graph \n")[1].split("\n### Output Format")[0]
    assert parse_dimacs(block).vertices == ("a", "b", "c")


def test_parse_pairs_and_claims():
    assert parse_coloring("(a 1)\n(b 2)").assignment == {"a": 1, "b": 2}
    assert parse_coloring("  NOT SOLVABLE \n").kind is CandidateKind.NOT_SOLVABLE
    assert parse_coloring("not solvable").kind is CandidateKind.PARSE_FAILURE
    failed = parse_coloring("I think the answer is...")
    assert failed.kind is CandidateKind.PARSE_FAILURE and failed.raw_text == "I think the answer is..."


def test_parse_tolerates_prose_whitespace_and_repeats():
    c = parse_coloring("Here you go:\n( a   1 )\n(b 2)\n(a 3) -- fixed\n")
    assert c.assignment == {"a": 3, "b": 2}


def test_parse_drops_unknown_vertices(walkthrough_graph):
    c = parse_coloring("(a 1)\n(zz 2)", walkthrough_graph)
    assert c.assignment == {"a": 1} and c.unknown_vertices == ("zz",)
    fb = render_feedback(walkthrough_graph, score(walkthrough_graph, c), "MLF", include_adaptive=False)
    assert "unknown vertices zz" in fb.text


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,5}", fullmatch=True), st.integers(-3, 30), min_size=1))
def test_print_parse_round_trip(assignment):
    assert parse_coloring(format_assignment(assignment)).assignment == assignment


def test_mlf_triangle_lines(walkthrough_graph):
    fb = render_feedback(walkthrough_graph, TRIANGLE_CONFLICTS, FeedbackVariant.MLF, include_adaptive=False)
    assert fb.text == (
        "That was incorrect. The coloring is invalid for the following reason(s):\n"
        "  1. adjacent-conflict: vertices h and i share color 3\n"
        "  2. adjacent-conflict: vertices h and j share color 3\n"
        "  3. adjacent-conflict: vertices i and j share color 3"
    )


def test_slf_triangle_line(walkthrough_graph):
    fb = render_feedback(walkthrough_graph, TRIANGLE_CONFLICTS, "SLF")
    assert fb.text == (
        "That was incorrect. The coloring is invalid: adjacent-conflict(s) on pairs: (h,i), (h,j), (i,j)."
    )
    assert "\n" not in fb.text and fb.adaptive_example is None


def test_adaptive_example_for_triangle(walkthrough_graph):
    fb = render_feedback(walkthrough_graph, TRIANGLE_CONFLICTS, "MLF")
    block = fb.adaptive_example
    assert "### Adaptive Example" in block
    assert "To help you, here is a smaller, related subproblem:" in block
    assert "p edge 3 3\nc edges\ne h i\ne h j\ne i j" in block
    assert "(h 1)  (i 2)  (j 3)" in block
    assert fb.full_text.endswith("---")


def test_adaptive_example_omitted_when_uncolorable():
    g = label_solvability(generate_instance(5, 1.0, 0, k=3))
    everything_one = ColoringCandidate.from_assignment({v: 1 for v in g.vertices})
    assert adaptive_example(g, score(g, everything_one)) is None


def test_adaptive_example_capped_at_eight_vertices():
    g = generate_instance(12, 0.6, 4, k=12)
    r = score(g, ColoringCandidate.from_assignment({v: 1 for v in g.vertices}))
    block = adaptive_example(g, r)
    header = [ln for ln in block.splitlines() if ln.startswith("p edge")][0]
    assert int(header.split()[2]) == 8


def test_wrong_claim_and_parse_failure_feedback(walkthrough_graph):
    g = label_solvability(walkthrough_graph)
    claim = parse_coloring("NOT SOLVABLE", g)
    fb = render_feedback(g, score(g, claim), "MLF")
    assert "valid coloring with at most 4 colors exists" in fb.text
    fb = render_feedback(g, score(g, parse_coloring("hmm", g)), "SLF")
    assert "could not be parsed" in fb.text


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 10), k=st.integers(1, 4), data=st.data())
def test_mlf_slf_equivalence(seed, n, k, data):
    g = generate_instance(n, 0.5, seed, k)
    assignment = {v: data.draw(st.integers(1, k)) for v in g.vertices}
    r = score(g, ColoringCandidate.from_assignment(assignment))
    mlf = render_feedback(g, r, "MLF", include_adaptive=True)
    slf = render_feedback(g, r, "SLF")
    numbered = [ln for ln in mlf.text.splitlines() if ln.strip()[:1].isdigit()]
    assert len(numbered) == len(r.conflicts)
    mlf_pairs = sorted(ln.split("vertices ")[1].split(" share")[0].replace(" and ", ",") for ln in numbered)
    slf_pairs = sorted(f"{u},{v}" for u, v, _ in r.conflicts) if r.conflicts else []
    assert mlf_pairs == slf_pairs
    for pair in slf_pairs:
        assert f"({pair})" in slf.text
    if mlf.adaptive_example:
        sub_text = mlf.adaptive_example.split("Subproblem Graph:\n")[1].split("\n\nColoring:")[0]
        sub = parse_dimacs(sub_text, k=k)
        coloring = parse_coloring(mlf.adaptive_example.split("Coloring:\n")[1], sub)
        assert score(sub, coloring).score == 1
