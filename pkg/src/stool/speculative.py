"""Greedy draft-and-verify speculative decoding over two backends.

Each round the draft proposes up to ``depth`` tokens, the target scores the
whole block in one forward pass, and the longest agreeing prefix is kept.
On the first disagreement the target's own token is emitted; if the whole
block is accepted the target's next token comes for free as a bonus. The
output is therefore identical to greedy decoding with the target alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .backends import Backend, CostModel, prefill
from .codec import HeadStreamSet
from .errors import EmptyPrompt, NoHeads, VocabMismatch
from .scheduler import FUNCTION_HEADS, StopConfig, StopTracker, baseline_stop_config, head_stop_config
from .tokens import ByteTokenizer


@dataclass(frozen=True)
class SpecConfig:
    depth: int = 4
    stop: Optional[StopConfig] = None

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("speculation depth must be >= 1")


@dataclass
class SpecTrace:
    drafted: int = 0
    accepted: int = 0
    corrections: int = 0
    bonus: int = 0
    target_forward_passes: int = 0
    draft_forward_passes: int = 0
    vanilla_forward_passes: int = 0
    target_time: float = 0.0

    @property
    def accept_rate(self) -> float:
        return self.accepted / self.drafted if self.drafted else 0.0

    @property
    def forward_reduction(self) -> float:
        return self.vanilla_forward_passes / self.target_forward_passes if self.target_forward_passes else 0.0

    def to_dict(self) -> dict:
        return {
            "drafted": self.drafted,
            "accepted": self.accepted,
            "corrections": self.corrections,
            "bonus": self.bonus,
            "target_forward_passes": self.target_forward_passes,
            "draft_forward_passes": self.draft_forward_passes,
            "vanilla_forward_passes": self.vanilla_forward_passes,
            "accept_rate": self.accept_rate,
            "forward_reduction": self.forward_reduction,
        }


def aggregate_spec_traces(traces: Iterable[SpecTrace]) -> SpecTrace:
    """Pool counts, so rates are ratios of totals rather than means of ratios."""
    agg = SpecTrace()
    for t in traces:
        agg.drafted += t.drafted
        agg.accepted += t.accepted
        agg.corrections += t.corrections
        agg.bonus += t.bonus
        agg.target_forward_passes += t.target_forward_passes
        agg.draft_forward_passes += t.draft_forward_passes
        agg.vanilla_forward_passes += t.vanilla_forward_passes
        agg.target_time += t.target_time
    return agg


def closed_form_passes(length: int, depth: int) -> int:
    """Target passes when every drafted token is accepted."""
    return math.ceil(length / (depth + 1))


def _check_vocab(draft: Backend, target: Backend) -> None:
    if draft.vocab_size != target.vocab_size or draft.eos_id != target.eos_id:
        raise VocabMismatch(f"draft vocab {draft.vocab_size} != target vocab {target.vocab_size}")


def _speculate(
    draft: Backend,
    target: Backend,
    context: Sequence[int],
    depth: int,
    tracker: StopTracker,
) -> SpecTrace:
    trace = SpecTrace()
    ctx = list(context)
    budget = tracker.stop.max_tokens_per_head
    while not tracker.done:
        # draft until depth, the length budget, or a draft-side stop
        proposal: list[int] = []
        shadow = tracker.copy()
        dctx = list(ctx)
        remaining = budget - len(tracker.tokens)
        while len(proposal) < min(depth, remaining):
            t = draft.greedy_next(dctx)
            proposal.append(t)
            dctx.append(t)
            if shadow.feed(t):
                break
        trace.drafted += len(proposal)
        trace.draft_forward_passes += len(proposal)

        # one target pass scores every prefix of the block
        trace.target_forward_passes += 1
        verify_ctx = list(ctx)
        for i in range(len(proposal) + 1):
            expected = target.greedy_next(verify_ctx)
            if i < len(proposal) and proposal[i] == expected:
                trace.accepted += 1
                verify_ctx.append(expected)
                if tracker.feed(expected):
                    break
                continue
            if i < len(proposal):
                trace.corrections += 1
            else:
                trace.bonus += 1
            verify_ctx.append(expected)
            tracker.feed(expected)
            break
        ctx = verify_ctx
    trace.vanilla_forward_passes = len(tracker.tokens)
    return trace


def speculate_generate(
    draft: Backend,
    target: Backend,
    prompt: Sequence[int],
    tokenizer: ByteTokenizer,
    config: SpecConfig = SpecConfig(),
    cost: Optional[CostModel] = None,
) -> tuple[list[int], SpecTrace]:
    _check_vocab(draft, target)
    if len(prompt) == 0:
        raise EmptyPrompt("prompt must contain at least one token")
    cost = cost or CostModel()
    stop = config.stop or baseline_stop_config(tokenizer)
    tracker = StopTracker(stop, tokenizer)
    _, t_p = prefill(target, prompt, cost)
    trace = _speculate(draft, target, prompt, config.depth, tracker)
    trace.target_time = t_p + trace.target_forward_passes * cost.step_time(1)
    return list(tracker.tokens), trace


def speculate_parallel(
    draft: Backend,
    target: Backend,
    prompt: Sequence[int],
    tokenizer: ByteTokenizer,
    heads: Sequence[str] = FUNCTION_HEADS,
    config: SpecConfig = SpecConfig(),
    cost: Optional[CostModel] = None,
) -> tuple[HeadStreamSet, dict[str, SpecTrace]]:
    """Speculate each head independently from its own forked prefix."""
    _check_vocab(draft, target)
    heads = list(heads)
    if not heads:
        raise NoHeads("at least one head is required")
    if len(prompt) == 0:
        raise EmptyPrompt("prompt must contain at least one token")
    cost = cost or CostModel()
    stop = config.stop or head_stop_config(tokenizer)
    table = tokenizer.table
    _, t_p = prefill(target, prompt, cost)

    streams, term, traces = {}, {}, {}
    for h in heads:
        tracker = StopTracker(stop, tokenizer)
        tr = _speculate(draft, target, list(prompt) + [table.open_id(h)], config.depth, tracker)
        tr.target_time = t_p + tr.target_forward_passes * cost.step_time(1)
        streams[h], term[h], traces[h] = tracker.tokens, tracker.reason, tr
    return HeadStreamSet(streams, term), traces
