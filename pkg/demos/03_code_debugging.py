"""Run a buggy program against its tests in the local sandbox."""

# %%
import json
from importlib import resources

from fastslow.debugging import CodeDebuggingAdapter, DebugInstance, build_cd_prompt, render_cd_feedback, run_tests
from fastslow.metacog import RunConfig, run_instance
from fastslow.solvers import Backend, SolverSpec

fixtures = resources.files("fastslow.fixtures")
inst = DebugInstance.from_json(json.loads(fixtures.joinpath("kth_factor.json").read_text()))
print(build_cd_prompt(inst))

# %%
result = run_tests(inst.buggy_code, inst)
print(result.passed, "/", result.total)
print(render_cd_feedback(result))

# %% [markdown]
# Replay the printed repair session. Its first reply keeps the `n // 2` loop
# but appends `n` itself, which already makes it correct, so the loop stops
# after one attempt.

# %%
s1 = SolverSpec(Backend.REPLAY, fixture=str(fixtures.joinpath("kth_factor_scenario1.json")))
out = run_instance(CodeDebuggingAdapter(), s1, None, inst, RunConfig(T=3, mode="S1Only"))
print(out.status.value, [float(a.score) for a in out.transcript.attempts])
