"""Parallel tool-call decomposition and accuracy scoring.

A turn with K parallel calls becomes K single-call entries; entry i sees
the first i-1 calls, shuffled, as history and targets call i.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

from .codec import FunctionCall, ToolCall, ToolSchema, call_from_tool_call, canonical_value
from .errors import InvalidCall, MissingGroupMember, SchemaMismatch


@dataclass
class Sample:
    """One dataset record before decomposition."""

    id: str
    query: str
    tools: list[ToolSchema]
    calls: list[ToolCall]
    environment: str = ""
    history: list[ToolCall] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def tool(self, name: str) -> Optional[ToolSchema]:
        for t in self.tools:
            if t.function_name == name:
                return t
        return None


@dataclass(frozen=True)
class ParallelGroup:
    group_id: str
    index: int  # 1-based
    size: int


@dataclass
class EvalEntry:
    id: str
    query: str
    tools: list[ToolSchema]
    history: list[ToolCall]
    ground_truth: FunctionCall
    target: ToolCall
    parallel_group: Optional[ParallelGroup] = None
    environment: str = ""
    prior_history: list[ToolCall] = field(default_factory=list)
    raw_query: str = ""

    @property
    def schema(self) -> ToolSchema:
        for t in self.tools:
            if t.function_name == self.ground_truth.name:
                return t
        raise KeyError(self.ground_truth.name)

    def to_dict(self) -> dict:
        g = self.parallel_group
        return {
            "id": self.id,
            "query": self.query,
            "raw_query": self.raw_query,
            "environment": self.environment,
            "tools": [t.to_dict() for t in self.tools],
            "history": [c.to_dict() for c in self.prior_history + self.history],
            "target": self.target.to_dict(),
            "ground_truth": {"name": self.ground_truth.name, "args": list(self.ground_truth.args), "overflow": list(self.ground_truth.overflow)},
            "parallel_group": None if g is None else {"group_id": g.group_id, "index": g.index, "size": g.size},
        }


@dataclass(frozen=True)
class ScoreRecord:
    entry_id: str
    function_correct: bool
    overall_correct: bool


def _format_value(v: Any) -> str:
    return json.dumps(v, ensure_ascii=False) if isinstance(v, str) else canonical_value(v)


def format_history(calls: Sequence[ToolCall]) -> str:
    """One ``-> name(param=value, ...)`` line per call."""
    lines = []
    for c in calls:
        args = ", ".join(f"{k}={_format_value(v)}" for k, v in c.arguments.items())
        lines.append(f"-> {c.name}({args})")
    return "\n".join(lines)


def _shuffle_rng(seed: int, sample_id: str, index: int) -> random.Random:
    # named stream per (seed, sample, entry) so entries don't perturb each other
    return random.Random(f"stool:{seed}:{sample_id}:{index}")


def build_query(environment: str, history: str, query: str) -> str:
    parts = [p for p in (environment, f"History:\n{history}" if history else "", query) if p]
    return "\n".join(parts)


def decompose_parallel_calls(
    sample: Sample, seed: int = 0, shuffle: bool = True, permute_calls: bool = False
) -> list[EvalEntry]:
    """Split a K-call sample into K entries with shuffled prefix histories.

    ``permute_calls`` first applies a seeded permutation to the call order,
    so different seeds pick different targets for the early entries (a
    two-call turn then yields either of its two training versions).
    """
    if not sample.calls:
        raise InvalidCall(f"{sample.id}: sample has no calls")
    gts = []
    for c in sample.calls:
        schema = sample.tool(c.name)
        if schema is None:
            raise InvalidCall(f"{sample.id}: call {c.name!r} not among the tools")
        try:
            gts.append(call_from_tool_call(c, schema))
        except SchemaMismatch as e:
            raise InvalidCall(f"{sample.id}: {e}") from None

    calls = list(sample.calls)
    if permute_calls:
        order = list(range(len(calls)))
        random.Random(f"stool:{seed}:{sample.id}:order").shuffle(order)
        calls, gts = [calls[j] for j in order], [gts[j] for j in order]

    K = len(calls)
    entries = []
    for i in range(1, K + 1):
        prefix = list(calls[: i - 1])
        if shuffle:
            _shuffle_rng(seed, sample.id, i).shuffle(prefix)
        history = format_history(sample.history + prefix)
        entries.append(
            EvalEntry(
                id=sample.id if K == 1 else f"{sample.id}#{i}",
                query=build_query(sample.environment, history, sample.query),
                tools=list(sample.tools),
                history=prefix,
                ground_truth=gts[i - 1],
                target=calls[i - 1],
                parallel_group=ParallelGroup(sample.id, i, K) if K > 1 else None,
                environment=sample.environment,
                prior_history=list(sample.history),
                raw_query=sample.query,
            )
        )
    return entries


def score_prediction(
    pred: Optional[FunctionCall], gt: FunctionCall, schema: Optional[ToolSchema] = None, entry_id: str = ""
) -> ScoreRecord:
    """Exact match on the name, then on all six slots plus overflow.

    ``pred=None`` stands for an output that could not be parsed at all.
    """
    if pred is None:
        return ScoreRecord(entry_id, False, False)
    fn = pred.name == gt.name
    width = len(schema.overflow) if schema is not None else max(len(pred.overflow), len(gt.overflow))

    def _ov(c: FunctionCall) -> tuple:
        return c.overflow + (None,) * (width - len(c.overflow))

    overall = fn and pred.args == gt.args and _ov(pred) == _ov(gt)
    return ScoreRecord(entry_id, fn, overall)


def sample_groups(entries: Iterable[EvalEntry]) -> dict[str, list[str]]:
    """Map each original sample to its entry ids; single-call samples form groups of one."""
    groups: dict[str, list[str]] = {}
    for e in entries:
        gid = e.parallel_group.group_id if e.parallel_group else e.id
        groups.setdefault(gid, []).append(e.id)
    return groups


def aggregate_accuracy(records: Sequence[ScoreRecord], groups: Mapping[str, Sequence[str]]) -> tuple[float, float, float]:
    """Return (overall, function, group) accuracy.

    A group counts as correct only if every member entry is fully correct.
    """
    by_id = {r.entry_id: r for r in records}
    for gid, members in groups.items():
        for m in members:
            if m not in by_id:
                raise MissingGroupMember(f"group {gid}: no score for entry {m}")
    if not records:
        return 0.0, 0.0, 0.0
    n = len(records)
    overall = sum(r.overall_correct for r in records) / n
    function = sum(r.function_correct for r in records) / n
    group = (sum(all(by_id[m].overall_correct for m in ms) for ms in groups.values()) / len(groups)) if groups else 0.0
    return overall, function, group
