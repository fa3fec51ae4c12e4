"""Procedural skill library: tokenization, Okapi BM25 retrieval, prompt injection.

Skills are short procedure notes scoped to an environment.  Retrieval runs once
per episode over the task instruction; only positively scoring skills are ever
injected, and injection appends a delimited section without touching the
original instruction text.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable

import yaml

if TYPE_CHECKING:  # pragma: no cover
    from .runtime import TaskSpec

BM25_K1 = 1.2
BM25_B = 0.75
DEFAULT_TOP_K = 1
MIN_TOKEN_LEN = 2

# Fixed list of 30 common English words dropped during tokenization.
STOPWORDS = frozenset(
    [
        "a", "an", "and", "are", "as", "at", "be", "by", "for", "from",
        "has", "have", "in", "is", "it", "its", "not", "of", "on", "or",
        "that", "the", "this", "to", "was", "were", "will", "with", "you", "your",
    ]
)

_TOKEN_RE = re.compile(r"[0-9a-z]+")

SKILL_SECTION_HEADER = "=== RELEVANT SKILLS ==="


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop short tokens and stopwords."""
    return [
        tok
        for tok in _TOKEN_RE.findall(text.lower())
        if len(tok) >= MIN_TOKEN_LEN and tok not in STOPWORDS
    ]


@dataclass(frozen=True)
class Skill:
    skill_id: str
    environment_id: str
    title: str
    body: str
    task_type_tags: tuple[str, ...] = ()

    @property
    def document(self) -> str:
        """Indexed text: title and body concatenated."""
        return f"{self.title}\n{self.body}"


class SkillLibrary:
    """Immutable indexed collection of skills.

    Index state: per-skill token counts and lengths, document frequencies,
    average document length.
    """

    def __init__(self, skills: Iterable[Skill]):
        self.skills: tuple[Skill, ...] = tuple(skills)
        ids = [s.skill_id for s in self.skills]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate skill_id in library")
        self._tokens: dict[str, Counter[str]] = {}
        self._doc_len: dict[str, int] = {}
        self.doc_freq: Counter[str] = Counter()
        for skill in self.skills:
            toks = tokenize(skill.document)
            counts = Counter(toks)
            self._tokens[skill.skill_id] = counts
            self._doc_len[skill.skill_id] = len(toks)
            for term in counts:
                self.doc_freq[term] += 1
        self.size = len(self.skills)
        self.avg_doc_len = (
            sum(self._doc_len.values()) / self.size if self.size else 0.0
        )

    def term_counts(self, skill_id: str) -> Counter[str]:
        return self._tokens[skill_id]

    def doc_len(self, skill_id: str) -> int:
        return self._doc_len[skill_id]


def idf(library: SkillLibrary, term: str) -> float:
    """Non-negative Okapi IDF: ln((N - df + 0.5) / (df + 0.5) + 1)."""
    df = library.doc_freq.get(term, 0)
    n = library.size
    return math.log((n - df + 0.5) / (df + 0.5) + 1.0)


def bm25_score(query_tokens: list[str], skill: Skill, library: SkillLibrary) -> float:
    """Okapi BM25 with k1=1.2, b=0.75; repeated query tokens contribute repeatedly."""
    if library.size == 0 or library.avg_doc_len == 0:
        return 0.0
    counts = library.term_counts(skill.skill_id)
    dl = library.doc_len(skill.skill_id)
    norm = BM25_K1 * (1.0 - BM25_B + BM25_B * dl / library.avg_doc_len)
    score = 0.0
    for term in query_tokens:
        tf = counts.get(term, 0)
        if tf == 0:
            continue
        score += idf(library, term) * tf * (BM25_K1 + 1.0) / (tf + norm)
    return score


# Keyword cues for the task-type pre-filter, checked in order.
_TASK_TYPE_CUES: dict[str, tuple[tuple[str, tuple[str, ...]], ...]] = {
    "minidb": (
        ("mutation", ("insert", "add ", "update", "delete", "remove", "change", "set ")),
        ("count", ("how many", "count")),
        ("aggregate", ("average", "total", "sum", "maximum", "minimum", "highest", "lowest", "largest", "smallest", "cheapest", "most expensive")),
    ),
    "gridhouse": (
        ("clean", ("clean",)),
        ("heat", ("hot", "heat", "warm")),
        ("cool", ("cool", "cold", "chill")),
    ),
}

_TASK_TYPE_DEFAULT = {"minidb": "select", "gridhouse": "place"}


def task_type_of(environment_id: str, instruction: str) -> str:
    """Classify a task instruction into the environment's coarse task types."""
    text = instruction.lower()
    for task_type, cues in _TASK_TYPE_CUES.get(environment_id, ()):
        if any(cue in text for cue in cues):
            return task_type
    return _TASK_TYPE_DEFAULT.get(environment_id, "")


def retrieve(
    task: "TaskSpec",
    library: SkillLibrary,
    k: int = DEFAULT_TOP_K,
    prefilter: bool = True,
) -> list[Skill]:
    """Top-k skills for a task: environment filter, task-type pre-filter, BM25.

    Zero-scoring skills are never returned.  Ties break on ascending skill_id.
    """
    candidates = [s for s in library.skills if s.environment_id == task.environment_id]
    if prefilter:
        task_type = task_type_of(task.environment_id, task.instruction)
        if task_type:
            # untagged skills are environment-generic and always pass
            candidates = [
                s for s in candidates if not s.task_type_tags or task_type in s.task_type_tags
            ]
    query = tokenize(task.instruction)
    scored = [(bm25_score(query, s, library), s) for s in candidates]
    scored = [(sc, s) for sc, s in scored if sc > 0.0]
    scored.sort(key=lambda pair: (-pair[0], pair[1].skill_id))
    return [s for _, s in scored[: max(k, 0)]]


def inject(task: "TaskSpec", skills: list[Skill]) -> "TaskSpec":
    """Append a delimited skill section to the instruction; empty list is identity."""
    if not skills:
        return task
    blocks = [f"[SKILL] {s.title}\n{s.body}" for s in skills]
    new_instruction = (
        task.instruction + "\n\n" + SKILL_SECTION_HEADER + "\n" + "\n\n".join(blocks)
    )
    return replace(task, instruction=new_instruction)


def skill_from_dict(doc: dict[str, Any]) -> Skill:
    return Skill(
        skill_id=str(doc["skill_id"]),
        environment_id=str(doc["environment_id"]),
        title=str(doc.get("title", doc["skill_id"])),
        body=str(doc.get("body", "")).rstrip("\n"),
        task_type_tags=tuple(doc.get("task_type_tags") or ()),
    )


def skill_to_dict(skill: Skill) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "skill_id": skill.skill_id,
        "environment_id": skill.environment_id,
        "title": skill.title,
        "body": skill.body,
    }
    if skill.task_type_tags:
        doc["task_type_tags"] = list(skill.task_type_tags)
    return doc


def parse_skill_text(text: str) -> Skill:
    """Parse one skill document: YAML front matter between --- markers, then body."""
    stripped = text.lstrip("﻿\n")
    if not stripped.startswith("---"):
        raise ValueError("skill document must start with a --- front-matter block")
    _, _, rest = stripped.partition("---")
    header, sep, body = rest.partition("\n---")
    if not sep:
        raise ValueError("unterminated front-matter block")
    meta = yaml.safe_load(header) or {}
    meta["body"] = body.lstrip("\n")
    return skill_from_dict(meta)


def load_skill_library(directory: str | Path) -> SkillLibrary:
    """Load every .md/.txt skill document in a directory (sorted by filename)."""
    root = Path(directory)
    skills = [
        parse_skill_text(path.read_text(encoding="utf-8"))
        for path in sorted(root.iterdir())
        if path.suffix in {".md", ".txt"} and path.is_file()
    ]
    return SkillLibrary(skills)
