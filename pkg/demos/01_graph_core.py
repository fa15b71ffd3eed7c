"""Graph instances, DIMACS text, the exact oracle and the score function."""

# %%
from fastslow import graph

g = graph.generate_instance(8, 0.4, seed=1, k=3)
print(graph.emit_dimacs(g))

# %% [markdown]
# The oracle does backtracking with forward checking. It returns a
# `Solution`, `Unsolvable` or `Timeout`.

# %%
result = graph.exact_color(g, time_budget=5.0)
print(type(result).__name__, getattr(result, "assignment", None))

# %%
# Score a deliberately bad candidate: everything gets color 1.
bad = graph.ColoringCandidate.from_assignment({v: 1 for v in g.vertices})
report = graph.score(g, bad)
print(report.score, "conflicts:", report.conflicts)

# %%
# Parsing is liberal: `p edges`, bare edge lines and comments all work.
text = " p edges 3 2\n c edges\n a b\n b c"
print(graph.parse_dimacs(text).edges)
