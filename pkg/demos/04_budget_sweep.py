"""Sweep the iteration budget with the synthetic colorer and plot the result."""

# %%
import tempfile
from pathlib import Path

from fastslow.harness import SweepSpec, cmd_generate, cmd_plot, cmd_run

work = Path(tempfile.mkdtemp(prefix="fastslow-demo-"))
summary = cmd_generate([10, 15], 30, seed=0, out_dir=work / "data")
print({k: v for k, v in summary.items() if k != "items"})

# %%
s1 = {"backend": "SyntheticColorer", "fix_prob": 0.5, "seed": 1, "latency": 0.5}
s2 = {"backend": "SyntheticColorer", "fix_prob": 1.0, "seed": 2, "latency": 20.0}
configs = [{"label": f"S1@{T}", "T": T, "mode": "S1Only", "s1": s1} for T in (1, 5, 10, 15)]
configs.append({"label": "S2", "mode": "S2Only", "s2": s2})
configs.append({"label": "S1@5+S2", "T": 5, "s1": s1, "s2": s2})
spec = SweepSpec.from_mapping(
    {"dataset": str(work / "data"), "output": str(work / "out"), "configurations": configs,
     "timing": "synthetic", "solvable": True}
)
for row in cmd_run(spec):
    print(row)

# %%
print(cmd_plot([work / "out" / "report.csv"], work / "tradeoff.svg", title="budget sweep"))
