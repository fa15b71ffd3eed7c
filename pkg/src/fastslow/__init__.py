"""Fast/slow solver orchestration with a feedback-driven metacognitive controller."""

from .graph import (
    ColoringCandidate,
    ConflictReport,
    GraphInstance,
    emit_dimacs,
    exact_color,
    generate_instance,
    induced_subgraph,
    label_solvability,
    parse_dimacs,
    score,
)
from .memory import MemoryRecord, MemoryStore, MemoryVariant
from .metacog import Outcome, RunConfig, Status, Transcript, run_instance
from .solvers import SolverSpec, make_solver

__version__ = "0.1.0"
