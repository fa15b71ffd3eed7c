"""Prompt template resources and the section layout shared by both domains.

Every prompt is laid out as::

    [### Worked Examples ... ### End of Worked Examples]   (memory, optional)
    <task block>
    [### Previous Attempt i / ### Best Previous Attempt ...] (history, optional)
    [tail cue]

``task_section`` recovers the task block, which is what replay fixtures key on.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from importlib import resources

MEMORY_OPEN = "### Worked Examples"
MEMORY_CLOSE = "### End of Worked Examples"
ATTEMPT_HEADER = "### Previous Attempt"
BEST_HEADER = "### Best Previous Attempt"
CD_TAIL = "### Correct Code:"
TAIL_CUES = (CD_TAIL,)


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    text = resources.files("fastslow.templates").joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return text.rstrip("\n")


def render(name: str, **fields: object) -> str:
    return load_template(name).format(**fields)


def task_section(prompt: str) -> str:
    text = prompt
    if MEMORY_CLOSE in text:
        text = text.split(MEMORY_CLOSE, 1)[1]
    cut = len(text)
    for marker in (ATTEMPT_HEADER, BEST_HEADER):
        pos = text.find("\n" + marker)
        if pos != -1:
            cut = min(cut, pos)
    text = text[:cut].strip()
    for cue in TAIL_CUES:
        if text.endswith(cue):
            text = text[: -len(cue)].rstrip()
    return text


def prompt_key(prompt: str) -> str:
    """Stable key for a prompt: sha256 of its task section, first 16 hex digits."""
    return hashlib.sha256(task_section(prompt).encode("utf-8")).hexdigest()[:16]


def attempt_block(index: int, candidate_text: str, feedback: str | None) -> str:
    parts = [f"{ATTEMPT_HEADER} {index}", candidate_text.rstrip() or "(empty response)"]
    if feedback:
        parts.append(feedback.rstrip())
    return "\n".join(parts)


def best_attempt_block(index: int, candidate_text: str, score: float) -> str:
    return "\n".join(
        [
            f"{BEST_HEADER} (attempt {index}, score {score:.3f})",
            "This prior partial solution is the best one found so far; it may still contain errors.",
            candidate_text.rstrip() or "(empty response)",
        ]
    )


def memory_block(examples: list[str]) -> str:
    if not examples:
        return ""
    return "\n\n".join([MEMORY_OPEN, *examples, MEMORY_CLOSE])
