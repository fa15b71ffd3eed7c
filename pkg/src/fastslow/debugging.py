"""Code-debugging domain: instances, a sandboxed local test runner, feedback."""

from __future__ import annotations

import json
import logging
import os
import re
import resource
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

from . import prompts
from .memory import MemoryRecord

log = logging.getLogger(__name__)

COMPILE_EXIT = 97


class RuntimeUnavailable(RuntimeError):
    pass


class SandboxSetupError(RuntimeError):
    pass


class FailureKind(str, Enum):
    WRONG_OUTPUT = "WrongOutput"
    COMPILE_ERROR = "CompileError"
    RUNTIME_ERROR = "RuntimeError"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class TestCase:
    input: str
    expected_output: str

    __test__ = False


@dataclass(frozen=True)
class DebugInstance:
    slug: str
    description: str
    buggy_code: str
    tests: tuple[TestCase, ...]
    language_tag: str = "python3"

    def __post_init__(self) -> None:
        if not self.tests:
            raise ValueError(f"{self.slug}: at least one test is required")

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> DebugInstance:
        return cls(
            slug=data["slug"],
            description=data["description"],
            buggy_code=data["buggy_code"],
            language_tag=data.get("language_tag", "python3"),
            tests=tuple(TestCase(str(t["input"]), str(t["expected_output"])) for t in data["tests"]),
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "slug": self.slug,
            "description": self.description,
            "buggy_code": self.buggy_code,
            "language_tag": self.language_tag,
            "tests": [{"input": t.input, "expected_output": t.expected_output} for t in self.tests],
        }


@dataclass(frozen=True)
class FailingTest:
    input: str
    expected_output: str
    actual_output: str
    failure_kind: FailureKind
    detail: str = ""


@dataclass(frozen=True)
class TestRunResult:
    passed: int
    total: int
    last_failing: FailingTest | None = None

    __test__ = False

    @property
    def pass_ratio(self) -> Fraction:
        return Fraction(self.passed, self.total)


@dataclass(frozen=True)
class CodeCandidate:
    code: str | None
    raw_text: str

    @property
    def parse_failure(self) -> bool:
        return self.code is None


@dataclass(frozen=True)
class Limits:
    wall_time: float = 5.0
    memory_mb: int = 256


def load_instances(path: str | Path) -> list[DebugInstance]:
    """Load one instance per ``*.json`` file in a directory, or a single file."""
    p = Path(path)
    files = sorted(p.glob("*.json")) if p.is_dir() else [p]
    out = []
    seen = set()
    for f in files:
        if f.name == "manifest.json":
            continue
        inst = DebugInstance.from_json(json.loads(f.read_text()))
        if inst.slug in seen:
            raise ValueError(f"duplicate slug {inst.slug!r} in {p}")
        seen.add(inst.slug)
        out.append(inst)
    return out


# ---------------------------------------------------------------------------
# Prompts and parsing


def _fence_lang(tag: str) -> str:
    return {"python3": "python", "python": "python", "cpp": "cpp"}.get(tag, tag)


def task_block(inst: DebugInstance) -> str:
    return prompts.render(
        "cd_task",
        description=inst.description.strip(),
        buggy_code=inst.buggy_code.rstrip(),
        fence_lang=_fence_lang(inst.language_tag),
    )


def wrap_code(code: str) -> str:
    return f"<code>\n{code.strip()}\n</code>"


def memory_example(record: MemoryRecord, index: int) -> str:
    p = record.problem_instance
    lines = [
        f"Example {index}: {p.get('slug', '')}",
        "Problem Description:",
        p.get("description", ""),
        "Buggy Code:",
        p.get("buggy_code", ""),
        "Correct Code:",
        record.correct_solution,
    ]
    for h in record.interaction_history:
        lines += [f"Attempt {h.attempt}:", h.candidate_solution, f"Feedback: {h.feedback_received}"]
    return "\n".join(lines)


def build_cd_prompt(
    inst: DebugInstance,
    history: Sequence[Any] = (),
    memory: Sequence[MemoryRecord] = (),
) -> str:
    parts = []
    mem = prompts.memory_block([memory_example(r, i) for i, r in enumerate(memory, start=1)])
    if mem:
        parts.append(mem)
    parts.append(task_block(inst))
    parts.extend(prompts.attempt_block(a.index, a.candidate_text, a.feedback_text) for a in history)
    parts.append(prompts.CD_TAIL)
    return "\n\n".join(parts)


_TAGGED = re.compile(r"<code>(.*?)</code>", re.DOTALL)
_FENCED = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def parse_code(raw: str) -> CodeCandidate:
    """First ``<code>`` pair, else the first fenced block, else a parse failure."""
    m = _TAGGED.search(raw) or _FENCED.search(raw)
    if m is None:
        return CodeCandidate(None, raw)
    return CodeCandidate(m.group(1).strip("\n"), raw)


# ---------------------------------------------------------------------------
# Sandboxed execution


def _driver_source() -> str:
    return resources.files("fastslow").joinpath("sandbox_driver.py").read_text(encoding="utf-8")


def normalize_output(text: str) -> list[str]:
    lines = [ln.rstrip() for ln in text.replace("\r\n", "\n").split("\n")]
    while lines and not lines[-1]:
        lines.pop()
    return lines


def _limit_child(limits: Limits):
    mem = limits.memory_mb * 1024 * 1024
    cpu = int(limits.wall_time) + 1

    def apply() -> None:
        os.setsid()
        resource.setrlimit(resource.RLIMIT_AS, (mem, mem))
        resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu))
        resource.setrlimit(resource.RLIMIT_FSIZE, (16 * 1024 * 1024,) * 2)
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
        _drop_network()

    return apply


def _drop_network() -> None:
    # Best effort: a private network namespace when the kernel allows it.
    try:
        import ctypes

        libc = ctypes.CDLL(None, use_errno=True)
        libc.unshare(0x40000000)  # CLONE_NEWNET
    except Exception:
        pass


class Runner(Protocol):
    def run_tests(self, code: str, inst: DebugInstance, limits: Limits) -> TestRunResult: ...


@dataclass
class LocalRunner:
    """Runs candidates in child processes, one process per test.

    ``executables`` maps a language tag to an interpreter or compiler path;
    missing entries are looked up on ``PATH``.
    """

    executables: dict[str, str] = field(default_factory=dict)

    def executable(self, tag: str) -> str:
        if tag in self.executables:
            exe = self.executables[tag]
        elif tag in ("python3", "python"):
            exe = sys.executable
        elif tag == "cpp":
            exe = shutil.which("g++")
        else:
            raise RuntimeUnavailable(f"no runtime registered for language {tag!r}")
        if not exe or not Path(exe).exists():
            raise RuntimeUnavailable(f"runtime for {tag!r} not found")
        return exe

    def run_tests(self, code: str, inst: DebugInstance, limits: Limits = Limits()) -> TestRunResult:
        exe = self.executable(inst.language_tag)
        try:
            workdir = tempfile.mkdtemp(prefix="fastslow-")
        except OSError as exc:
            raise SandboxSetupError(str(exc)) from exc
        try:
            if inst.language_tag in ("python3", "python"):
                command, compile_error = self._prepare_python(exe, code, workdir)
            else:
                command, compile_error = self._prepare_cpp(exe, code, workdir)
            passed = 0
            last: FailingTest | None = None
            for test in inst.tests:
                if compile_error is not None:
                    last = FailingTest(test.input, test.expected_output, "", FailureKind.COMPILE_ERROR, compile_error)
                    continue
                failure = self._run_one(command, test, workdir, limits)
                if failure is None:
                    passed += 1
                else:
                    last = failure
            return TestRunResult(passed, len(inst.tests), last)
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    def _env(self, workdir: str) -> dict[str, str]:
        return {"PATH": "/usr/bin:/bin", "HOME": workdir, "TMPDIR": workdir, "LANG": "C.UTF-8"}

    def _prepare_python(self, exe: str, code: str, workdir: str) -> tuple[list[str], str | None]:
        Path(workdir, "solution.py").write_text(code, encoding="utf-8")
        Path(workdir, "driver.py").write_text(_driver_source(), encoding="utf-8")
        mode = "call" if re.search(r"^\s*class\s+Solution\b", code, re.MULTILINE) else "script"
        command = [exe, "-I", "-B", "driver.py", mode]
        proc = subprocess.run(
            [exe, "-I", "-B", "driver.py", "check"],
            cwd=workdir,
            env=self._env(workdir),
            capture_output=True,
            text=True,
            timeout=30,
        )
        if proc.returncode == COMPILE_EXIT:
            return command, _first_line(proc.stderr)
        if proc.returncode != 0:
            raise SandboxSetupError(f"driver self-check failed: {proc.stderr.strip()}")
        return command, None

    def _prepare_cpp(self, exe: str, code: str, workdir: str) -> tuple[list[str], str | None]:
        Path(workdir, "solution.cpp").write_text(code, encoding="utf-8")
        proc = subprocess.run(
            [exe, "-std=c++17", "-O2", "-o", "solution", "solution.cpp"],
            cwd=workdir,
            env=self._env(workdir),
            capture_output=True,
            text=True,
            timeout=120,
        )
        if proc.returncode != 0:
            diag = next((ln for ln in proc.stderr.splitlines() if "error" in ln), proc.stderr)
            return [], _first_line(diag)
        return [str(Path(workdir, "solution"))], None

    def _run_one(self, command: list[str], test: TestCase, workdir: str, limits: Limits) -> FailingTest | None:
        try:
            proc = subprocess.run(
                command,
                input=test.input,
                cwd=workdir,
                env=self._env(workdir),
                capture_output=True,
                text=True,
                timeout=limits.wall_time,
                preexec_fn=_limit_child(limits),
            )
        except subprocess.TimeoutExpired as exc:
            out = exc.stdout.decode(errors="replace") if isinstance(exc.stdout, bytes) else (exc.stdout or "")
            return FailingTest(test.input, test.expected_output, out, FailureKind.TIMEOUT, f"{limits.wall_time:g} s")
        if proc.returncode != 0:
            return FailingTest(
                test.input,
                test.expected_output,
                proc.stdout,
                FailureKind.RUNTIME_ERROR,
                _last_line(proc.stderr) or f"exit status {proc.returncode}",
            )
        if normalize_output(proc.stdout) != normalize_output(test.expected_output):
            return FailingTest(test.input, test.expected_output, proc.stdout, FailureKind.WRONG_OUTPUT)
        return None


def _first_line(text: str) -> str:
    return next((ln.strip() for ln in text.splitlines() if ln.strip()), "")


def _last_line(text: str) -> str:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    return lines[-1] if lines else ""


def run_tests(
    code: str, inst: DebugInstance, limits: Limits = Limits(), runner: Runner | None = None
) -> TestRunResult:
    return (runner or LocalRunner()).run_tests(code, inst, limits)


# ---------------------------------------------------------------------------
# Feedback


def _reason(f: FailingTest, limits: Limits | None = None) -> str:
    if f.failure_kind is FailureKind.COMPILE_ERROR:
        return f"Your code failed to compile: {f.detail}"
    if f.failure_kind is FailureKind.RUNTIME_ERROR:
        return f"Your code raised a runtime error: {f.detail}"
    if f.failure_kind is FailureKind.TIMEOUT:
        limit = f"{limits.wall_time:g} s" if limits else f.detail
        return f"Your code exceeded the time limit of {limit} per test."
    return "Your code's output does not match the expected output."


def render_cd_feedback(result: TestRunResult, limits: Limits | None = None) -> str:
    if result.last_failing is None or result.passed == result.total:
        raise ValueError("feedback requested for a fully passing result")
    f = result.last_failing
    return prompts.render(
        "cd_feedback",
        input=f.input.strip(),
        expected=f.expected_output.strip(),
        actual=f.actual_output.strip() or "(no output)",
        reason=_reason(f, limits),
        passed=result.passed,
        total=result.total,
    )


PARSE_FAILURE_FEEDBACK = (
    "Your response did not contain code. You MUST return the complete, corrected code "
    "enclosed within <code> and </code> tags."
)


class CodeDebuggingAdapter:
    domain = "code_debugging"
    default_ba_rule = "last"

    def __init__(self, runner: Runner | None = None, limits: Limits = Limits()) -> None:
        self.runner = runner or LocalRunner()
        self.limits = limits

    def instance_size(self, inst: DebugInstance) -> int:
        return len(inst.buggy_code.splitlines())

    def task_block(self, inst: DebugInstance) -> str:
        return task_block(inst)

    def build_prompt(self, inst: DebugInstance, memory: Sequence[MemoryRecord], attempts: Sequence[Any]) -> str:
        return build_cd_prompt(inst, attempts, memory)

    def assemble(self, inst: DebugInstance, sections: Sequence[str]) -> str:
        return "\n\n".join([task_block(inst), *sections, prompts.CD_TAIL])

    def parse(self, raw: str, inst: DebugInstance) -> CodeCandidate:
        return parse_code(raw)

    def evaluate(self, inst: DebugInstance, candidate: CodeCandidate) -> tuple[Fraction, TestRunResult | None]:
        if candidate.code is None:
            return Fraction(0), None
        result = self.runner.run_tests(candidate.code, inst, self.limits)
        return result.pass_ratio, result

    def feedback(self, inst: DebugInstance, candidate: CodeCandidate, result: TestRunResult | None, variant: str) -> str:
        if result is None:
            return PARSE_FAILURE_FEEDBACK
        return render_cd_feedback(result, self.limits)

    def candidate_text(self, candidate: CodeCandidate) -> str:
        return wrap_code(candidate.code) if candidate.code is not None else candidate.raw_text.strip()

    def format_reminder(self, error: Exception) -> str:
        return f"That attempt produced no usable response ({type(error).__name__}: {error}). " + PARSE_FAILURE_FEEDBACK

    def memory_problem(self, inst: DebugInstance) -> dict[str, Any]:
        return {
            "domain": self.domain,
            "slug": inst.slug,
            "description": inst.description,
            "buggy_code": inst.buggy_code,
            "language_tag": inst.language_tag,
            "size": self.instance_size(inst),
        }

    def detail_json(self, result: TestRunResult | None) -> dict[str, Any]:
        if result is None:
            return {"kind": "ParseFailure"}
        out: dict[str, Any] = {"passed": result.passed, "total": result.total}
        if result.last_failing is not None:
            f = result.last_failing
            out["last_failing"] = {
                "input": f.input,
                "expected_output": f.expected_output,
                "actual_output": f.actual_output,
                "failure_kind": f.failure_kind.value,
            }
        return out

