"""Dataset generation, configuration sweeps, aggregation and plotting."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import yaml

from .coloring import GraphColoringAdapter
from .debugging import CodeDebuggingAdapter, DebugInstance, Limits, LocalRunner, load_instances
from .graph import (
    GraphInstance,
    OracleTimeout,
    generate_instance,
    instance_id,
    label_solvability,
    read_dataset,
    write_dataset,
)
from .memory import MemoryStore
from .metacog import Mode, RunConfig, run_instance, transcript_record
from .solvers import SolverSpec, make_solver

log = logging.getLogger(__name__)

CSV_COLUMNS = ["label", "instances", "solved", "success_rate", "mean_time_s", "mean_iterations", "fallback_rate"]


class EmptyInput(ValueError):
    pass


# ---------------------------------------------------------------------------
# generate


def _derive_seed(*parts: Any) -> int:
    digest = hashlib.sha256("|".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def cmd_generate(
    sizes: Sequence[int],
    count_per_size: int,
    edge_prob_range: tuple[float, float] = (0.1, 0.9),
    k: int = 4,
    seed: int = 0,
    out_dir: str | Path | None = None,
    oracle_budget: float = 10.0,
    max_redraws: int = 50,
) -> dict[str, Any]:
    """Draw ``count_per_size`` unique labeled instances per size.

    Each instance gets its own edge probability, uniform in ``edge_prob_range``.
    Oracle timeouts and duplicate graphs are redrawn.
    """
    if not sizes:
        raise ValueError("sizes must be nonempty")
    lo, hi = edge_prob_range
    instances: list[tuple[str, GraphInstance]] = []
    redraws = 0
    for size in sizes:
        seen: set[frozenset] = set()
        for i in range(count_per_size):
            for attempt in range(max_redraws + 1):
                inst_seed = _derive_seed(seed, size, i, attempt)
                p = random.Random(inst_seed).uniform(lo, hi)
                g = generate_instance(size, p, inst_seed, k)
                if g.edges in seen and attempt < max_redraws:
                    redraws += 1
                    continue
                try:
                    g = label_solvability(g, oracle_budget)
                except OracleTimeout:
                    redraws += 1
                    continue
                break
            else:
                raise OracleTimeout(f"size {size}, index {i}: no instance labeled within {max_redraws} redraws")
            seen.add(g.edges)
            instances.append((instance_id(size, i), g))
    if redraws:
        log.info("redrew %d instance(s) after oracle timeouts or duplicates", redraws)
    solvable = sum(1 for _, g in instances if g.meta.solvable)
    summary = {
        "instances": len(instances),
        "solvable": solvable,
        "unsolvable": len(instances) - solvable,
        "redraws": redraws,
    }
    if out_dir is not None:
        summary["manifest"] = str(write_dataset(instances, out_dir))
    summary["items"] = instances
    return summary


# ---------------------------------------------------------------------------
# run


@dataclass(frozen=True)
class Configuration:
    label: str
    cfg: RunConfig
    s1: SolverSpec | None
    s2: SolverSpec | None

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> Configuration:
        data = dict(data)
        label = data.pop("label")
        s1 = data.pop("s1", None)
        s2 = data.pop("s2", None)
        return cls(
            label,
            RunConfig(**data),
            SolverSpec.from_mapping(s1) if s1 is not None else None,
            SolverSpec.from_mapping(s2) if s2 is not None else None,
        )


@dataclass(frozen=True)
class SweepSpec:
    dataset: str
    configurations: tuple[Configuration, ...]
    output: str
    workers: int = 1
    timing: str = "measured"
    solvable: bool | None = None
    memory_dir: str | None = None
    limits: Limits = field(default_factory=Limits)
    executables: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        labels = [c.label for c in self.configurations]
        if len(set(labels)) != len(labels):
            raise ValueError("configuration labels must be unique")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.timing not in ("measured", "synthetic"):
            raise ValueError("timing must be 'measured' or 'synthetic'")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base: Path | None = None) -> SweepSpec:
        data = dict(data)
        base = base or Path(".")

        def resolve(p: str | None) -> str | None:
            if p is None:
                return None
            return str(p if Path(p).is_absolute() else base / p)

        configs = []
        for c in data.pop("configurations"):
            c = dict(c)
            for side in ("s1", "s2"):
                if isinstance(c.get(side), Mapping) and isinstance(c[side].get("fixture"), str):
                    c[side] = {**c[side], "fixture": resolve(c[side]["fixture"])}
            configs.append(Configuration.from_mapping(c))
        limits = Limits(**data.pop("limits", {}))
        return cls(
            dataset=resolve(data.pop("dataset")),  # type: ignore[arg-type]
            output=resolve(data.pop("output")),  # type: ignore[arg-type]
            memory_dir=resolve(data.pop("memory_dir", None)),
            configurations=tuple(configs),
            limits=limits,
            **data,
        )

    @classmethod
    def load(cls, path: str | Path) -> SweepSpec:
        path = Path(path)
        return cls.from_mapping(yaml.safe_load(path.read_text()), base=path.parent)


def load_problems(path: str | Path, solvable: bool | None = None) -> tuple[str, list[tuple[str, Any, dict]]]:
    """Return ``(domain, [(instance_id, instance, meta), ...])`` for a dataset path."""
    p = Path(path)
    manifest = p / "manifest.json" if p.is_dir() else p
    if manifest.name == "manifest.json" and manifest.exists():
        domain = json.loads(manifest.read_text()).get("domain", "graph_coloring")
        if domain == "graph_coloring":
            items = []
            for ident, g in read_dataset(manifest, solvable):
                meta = {"size": g.meta.size, "edge_prob": g.meta.edge_prob, "k": g.k, "solvable": g.meta.solvable}
                items.append((ident, g, meta))
            return domain, items
    problems: list[DebugInstance] = load_instances(p)
    return "code_debugging", [(d.slug, d, {"size": len(d.buggy_code.splitlines()), "tests": len(d.tests)}) for d in problems]


def _adapter(domain: str, spec: SweepSpec) -> Any:
    if domain == "graph_coloring":
        return GraphColoringAdapter()
    return CodeDebuggingAdapter(LocalRunner(dict(spec.executables)), spec.limits)


def _with_timing(s: SolverSpec | None, timing: str) -> SolverSpec | None:
    if s is None or timing == "measured":
        return s
    return replace(s, timing=timing)


def run_configuration(
    conf: Configuration,
    problems: Sequence[tuple[str, Any, dict]],
    adapter: Any,
    workers: int = 1,
    timing: str = "measured",
    memory: MemoryStore | None = None,
) -> list[dict[str, Any]]:
    """Run one configuration over all problems; records come back in dataset order.

    Each instance gets fresh solver objects, so replay cursors and synthetic
    seeds never leak between instances. With a memory store and a retrieval
    limit above zero, instances run sequentially: online memory makes each
    prompt depend on the instances solved before it.
    """
    s1 = _with_timing(conf.s1, timing)
    s2 = _with_timing(conf.s2, timing)
    uses_memory = memory is not None and conf.cfg.memory_limit > 0 and conf.cfg.mode is not Mode.S2_ONLY

    def one(item: tuple[str, Any, dict]) -> dict[str, Any]:
        ident, inst, meta = item
        outcome = run_instance(
            adapter,
            make_solver(s1) if s1 is not None else None,
            make_solver(s2) if s2 is not None else None,
            inst,
            conf.cfg,
            memory,
        )
        return transcript_record(
            ident, conf.cfg, outcome, adapter, meta, include_wall_clock=timing == "measured", label=conf.label
        )

    if workers == 1 or uses_memory:
        if uses_memory and workers > 1:
            log.info("%s: memory enabled, running sequentially", conf.label)
        return [one(item) for item in problems]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, problems))


@dataclass(frozen=True)
class ReportRow:
    label: str
    instances: int
    solved: int
    success_rate: float
    mean_time: float
    mean_iterations: float
    fallback_rate: float

    def as_csv(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "instances": self.instances,
            "solved": self.solved,
            "success_rate": f"{self.success_rate:.2f}",
            "mean_time_s": f"{self.mean_time:.6f}",
            "mean_iterations": f"{self.mean_iterations:.4f}",
            "fallback_rate": f"{self.fallback_rate:.2f}",
        }


def aggregate(label: str, records: Sequence[Mapping[str, Any]]) -> ReportRow:
    n = len(records)
    if n == 0:
        return ReportRow(label, 0, 0, 0.0, 0.0, 0.0, 0.0)
    solved = sum(r["status"] != "Failed" for r in records)
    return ReportRow(
        label=label,
        instances=n,
        solved=solved,
        success_rate=100.0 * solved / n,
        mean_time=sum(r["total_time_ms"] for r in records) / n / 1000.0,
        mean_iterations=sum(len(r["attempts"]) for r in records) / n,
        fallback_rate=100.0 * sum(r["fallback"] is not None for r in records) / n,
    )


def rows_to_csv(rows: Iterable[ReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_csv())
    return buf.getvalue()


def _safe(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_.@" else "_" for ch in label)


def write_transcripts(path: Path, records: Sequence[Mapping[str, Any]]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_transcripts(path: str | Path) -> list[dict[str, Any]]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def cmd_run(spec: SweepSpec) -> list[ReportRow]:
    """Execute every configuration; writes ``transcripts/<label>.jsonl`` and ``report.csv``."""
    domain, problems = load_problems(spec.dataset, spec.solvable)
    adapter = _adapter(domain, spec)
    out = Path(spec.output)
    (out / "transcripts").mkdir(parents=True, exist_ok=True)
    rows = []
    for conf in spec.configurations:
        memory = MemoryStore(Path(spec.memory_dir) / _safe(conf.label)) if spec.memory_dir else MemoryStore()
        try:
            records = run_configuration(conf, problems, adapter, spec.workers, spec.timing, memory)
        except Exception as exc:  # keep the sweep alive
            log.error("configuration %s failed: %s", conf.label, exc)
            records = []
        write_transcripts(out / "transcripts" / f"{_safe(conf.label)}.jsonl", records)
        rows.append(aggregate(conf.label, records))
    (out / "report.csv").write_text(rows_to_csv(rows))
    return rows


def cmd_report(
    transcript_paths: Sequence[str | Path],
    out: str | Path | None = None,
    solvable: bool | None = None,
    size: int | None = None,
) -> list[ReportRow]:
    """Recompute report rows from transcript files, optionally filtered."""
    rows = []
    for path in transcript_paths:
        records = read_transcripts(path)
        if solvable is not None:
            records = [r for r in records if r.get("meta", {}).get("solvable") is solvable]
        if size is not None:
            records = [r for r in records if r.get("meta", {}).get("size") == size]
        label = records[0].get("label", Path(path).stem) if records else Path(path).stem
        rows.append(aggregate(label, records))
    if out is not None:
        Path(out).write_text(rows_to_csv(rows))
    return rows


def read_report(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_plot(csv_paths: Sequence[str | Path], out: str | Path, title: str | None = None) -> Path:
    """Scatter of success rate against mean time, one labeled point per row."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [row for p in csv_paths for row in read_report(p)]
    if not rows:
        raise EmptyInput("no report rows to plot")
    xs = [float(r["mean_time_s"]) for r in rows]
    ys = [float(r["success_rate"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.scatter(xs, ys, s=40, zorder=3)
    for x, y, r in zip(xs, ys, rows):
        ax.annotate(r["label"], (x, y), textcoords="offset points", xytext=(5, 5), fontsize=8)
    span = max(xs) or 1.0
    ax.set_xlim(-0.05 * span, 1.15 * span)
    ax.set_ylim(-5, 105)
    ax.set_xlabel("average time per instance (s)")
    ax.set_ylabel("success rate (%)")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format=out.suffix.lstrip(".") or "svg")
    plt.close(fig)
    return out
