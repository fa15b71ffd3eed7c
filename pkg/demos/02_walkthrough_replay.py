"""Replay the graph-coloring walkthrough with scripted solver responses."""

# %%
from importlib import resources

from fastslow.coloring import GraphColoringAdapter, parse_coloring, render_feedback
from fastslow.graph import parse_dimacs, score
from fastslow.metacog import RunConfig, run_instance
from fastslow.solvers import Backend, SolverSpec

fixtures = resources.files("fastslow.fixtures")
g = parse_dimacs(fixtures.joinpath("walkthrough_graph.col").read_text(), k=4)

# %% [markdown]
# Feedback on the first printed attempt. Note that edge f-i also clashes,
# so four conflicts show up rather than three.

# %%
first = "(a 1)  (b 2)  (c 2)  (d 1)  (e 1)\n(f 3)  (g 2)  (h 3)  (i 3)  (j 3)"
report = score(g, parse_coloring(first, g))
print(report.score)
print(render_feedback(g, report, "MLF").full_text)

# %%
print(render_feedback(g, report, "SLF").full_text)

# %% [markdown]
# Scenario 3: the second attempt is correct.

# %%
s1 = SolverSpec(Backend.REPLAY, fixture=str(fixtures.joinpath("walkthrough_scenario3.json")))
out = run_instance(GraphColoringAdapter(), s1, None, g, RunConfig(T=5, mode="S1Only"))
print(out.status.value, "at iteration", out.solved_iteration)

# %%
# Scenario 2: two failed attempts, then the slow solver takes over.
s1 = SolverSpec(Backend.REPLAY, fixture=str(fixtures.joinpath("walkthrough_scenario2.json")))
s2 = SolverSpec(Backend.SYNTHETIC, seed=1)
out = run_instance(GraphColoringAdapter(), s1, s2, g, RunConfig(T=2, fallback_variant="FH"))
print(out.status.value, [float(a.score) for a in out.transcript.attempts])
print(out.transcript.fallback.prompt[-400:])
