"""Parallel head decoding over a shared prefix, and the sequential baseline."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .backends import Backend, CostModel, decode_step, fork, prefill
from .codec import CLOSE_TAG, END_OF_SEQUENCE, MAX_TOKENS, NULL_TOKEN, HeadStreamSet
from .errors import EmptyPrompt, NoHeads
from .tokens import EOS_TEXT, HEAD_NAMES, N_ARG_HEADS, ByteTokenizer, SpecialTokenKind

FUNCTION_HEADS = HEAD_NAMES[1:]  # function + arg1..arg6, H = 7

CONTINUE = "continue"
STOP = "stop"
STOP_NEXT = "stop_next"


@dataclass(frozen=True)
class StopConfig:
    stop_strings: tuple[str, ...] = ()
    stop_token_ids: tuple[int, ...] = ()
    max_tokens_per_head: int = 64

    def __post_init__(self):
        if self.max_tokens_per_head < 1:
            raise ValueError("max_tokens_per_head must be >= 1")
        object.__setattr__(self, "stop_strings", tuple(self.stop_strings))
        object.__setattr__(self, "stop_token_ids", tuple(self.stop_token_ids))


def head_stop_config(tokenizer: ByteTokenizer, max_tokens: int = 64, token_ids: bool = True) -> StopConfig:
    """Null, every close tag and EOS as stop strings; ids are each string's last token.

    ``token_ids=False`` leaves only string matching, which costs one extra step.
    """
    strings = [SpecialTokenKind.NULL.value, SpecialTokenKind.FUNCTION_CLOSE.value]
    strings += [f"</arg{k}>" for k in range(1, N_ARG_HEADS + 1)]
    strings += [SpecialTokenKind.CONTENT_CLOSE.value, EOS_TEXT]
    ids = tuple(tokenizer.encode(s)[-1] for s in strings) if token_ids else ()
    return StopConfig(tuple(strings), ids, max_tokens)


def baseline_stop_config(tokenizer: ByteTokenizer, max_tokens: int = 256) -> StopConfig:
    return StopConfig((EOS_TEXT,), (tokenizer.eos_id,), max_tokens)


@dataclass(frozen=True)
class TerminationDecision:
    action: str  # CONTINUE, STOP or STOP_NEXT
    reason: Optional[str] = None
    rule: Optional[str] = None  # "token_id" or "string"


def _reason_for(tokenizer: ByteTokenizer, token_id: Optional[int], text: Optional[str]) -> str:
    table = tokenizer.table
    if token_id is not None:
        if token_id == table.null_id:
            return NULL_TOKEN
        if token_id == table.eos_id:
            return END_OF_SEQUENCE
        return CLOSE_TAG
    if text == SpecialTokenKind.NULL.value:
        return NULL_TOKEN
    if text == EOS_TEXT:
        return END_OF_SEQUENCE
    return CLOSE_TAG


def stop_check(stop: StopConfig, tokenizer: ByteTokenizer, new_token: int, stream_text_tail: str) -> TerminationDecision:
    """Token-id matches stop now; a stop string seen only in the text stops one step later."""
    if new_token in stop.stop_token_ids:
        return TerminationDecision(STOP, _reason_for(tokenizer, new_token, None), "token_id")
    for s in stop.stop_strings:
        if stream_text_tail.endswith(s):
            return TerminationDecision(STOP_NEXT, _reason_for(tokenizer, None, s), "string")
    return TerminationDecision(CONTINUE)


class StopTracker:
    """Feeds tokens one at a time and reports when a stream has finished."""

    def __init__(self, stop: StopConfig, tokenizer: ByteTokenizer):
        self.stop = stop
        self.tokenizer = tokenizer
        self.tokens: list[int] = []
        self.reason: Optional[str] = None
        self._pending: Optional[str] = None
        self._tail_len = max((len(s) for s in stop.stop_strings), default=0) + 8

    @property
    def done(self) -> bool:
        return self.reason is not None

    def copy(self) -> "StopTracker":
        c = StopTracker.__new__(StopTracker)
        c.__dict__.update(self.__dict__)
        c.tokens = list(self.tokens)
        return c

    def feed(self, token: int) -> bool:
        if self.done:
            raise RuntimeError("stream already terminated")
        self.tokens.append(token)
        if self._pending is not None:
            self.reason = self._pending
            return True
        tail = self.tokenizer.decode(self.tokens[-self._tail_len:]) if self.stop.stop_strings else ""
        d = stop_check(self.stop, self.tokenizer, token, tail)
        if d.action == STOP:
            self.reason = d.reason
        elif d.action == STOP_NEXT:
            self._pending = d.reason
        if self.reason is None and len(self.tokens) >= self.stop.max_tokens_per_head:
            self.reason = MAX_TOKENS
        return self.done


@dataclass
class DecodeTrace:
    H: int
    N_i: dict[str, int]
    N: int
    forward_passes: int
    T_p: float
    decode_time: float
    total_time: float
    overhead_factor: float = 1.0
    # decode time if the batch stayed at B = H for every step
    fixed_batch_decode_time: float = 0.0
    batch_sizes: list[int] = field(default_factory=list)
    cached_tokens: int = 0
    wall_time: float = 0.0

    @property
    def bottleneck(self) -> int:
        return max(self.N_i.values())

    def to_dict(self) -> dict:
        return {
            "H": self.H,
            "N_i": dict(self.N_i),
            "N": self.N,
            "forward_passes": self.forward_passes,
            "T_p": self.T_p,
            "decode_time": self.decode_time,
            "total_time": self.total_time,
            "overhead_factor": self.overhead_factor,
            "fixed_batch_decode_time": self.fixed_batch_decode_time,
            "batch_sizes": list(self.batch_sizes),
            "cached_tokens": self.cached_tokens,
        }


def generate_parallel(
    backend: Backend,
    prompt: Sequence[int],
    tokenizer: ByteTokenizer,
    heads: Sequence[str] = FUNCTION_HEADS,
    stop: Optional[StopConfig] = None,
    cost: Optional[CostModel] = None,
    overhead_factor: float = 1.0,
) -> tuple[HeadStreamSet, DecodeTrace]:
    """One prefill, one fork per head, then lockstep batched greedy steps.

    A head leaves the batch on the step it stops, so the batch only shrinks.
    """
    heads = list(heads)
    if not heads:
        raise NoHeads("at least one head is required")
    bad = [h for h in heads if h not in HEAD_NAMES]
    if bad or len(set(heads)) != len(heads):
        raise ValueError(f"invalid head list {heads}")
    if len(prompt) == 0:
        raise EmptyPrompt("prompt must contain at least one token")
    stop = stop or head_stop_config(tokenizer)
    cost = cost or CostModel()
    table = tokenizer.table

    root, t_p = prefill(backend, prompt, cost)
    sessions = {h: fork(root, table.open_id(h)) for h in heads}
    trackers = {h: StopTracker(stop, tokenizer) for h in heads}

    active = list(heads)
    decode_time = fixed = wall = 0.0
    batch_sizes = []
    while active:
        out = decode_step(backend, [sessions[h] for h in active], cost)
        decode_time += out.step_cost
        fixed += cost.step_time(len(heads))
        wall += out.wall_time
        batch_sizes.append(len(active))
        active = [h for h, t in zip(active, out.tokens) if not trackers[h].feed(t)]

    decode_time *= overhead_factor
    fixed *= overhead_factor
    streams = HeadStreamSet(
        {h: trackers[h].tokens for h in heads},
        {h: trackers[h].reason for h in heads},
    )
    n_i = {h: len(trackers[h].tokens) for h in heads}
    trace = DecodeTrace(
        H=len(heads),
        N_i=n_i,
        N=sum(n_i.values()),
        forward_passes=len(batch_sizes),
        T_p=t_p,
        decode_time=decode_time,
        total_time=t_p + decode_time,
        overhead_factor=overhead_factor,
        fixed_batch_decode_time=fixed,
        batch_sizes=batch_sizes,
        cached_tokens=root.ledger.cached_tokens,
        wall_time=wall,
    )
    return streams, trace


def generate_sequential_baseline(
    backend: Backend,
    prompt: Sequence[int],
    tokenizer: ByteTokenizer,
    stop: Optional[StopConfig] = None,
    cost: Optional[CostModel] = None,
) -> tuple[list[int], DecodeTrace]:
    """Single-stream greedy decoding: ``T_p + N * step_time(1)``."""
    if len(prompt) == 0:
        raise EmptyPrompt("prompt must contain at least one token")
    stop = stop or baseline_stop_config(tokenizer)
    cost = cost or CostModel()
    session, t_p = prefill(backend, prompt, cost)
    tracker = StopTracker(stop, tokenizer)
    decode_time = wall = 0.0
    done = False
    while not done:
        out = decode_step(backend, [session], cost)
        decode_time += out.step_cost
        wall += out.wall_time
        done = tracker.feed(out.tokens[0])
    n = len(tracker.tokens)
    trace = DecodeTrace(
        H=1,
        N_i={"sequential": n},
        N=n,
        forward_passes=n,
        T_p=t_p,
        decode_time=decode_time,
        total_time=t_p + decode_time,
        fixed_batch_decode_time=decode_time,
        batch_sizes=[1] * n,
        cached_tokens=session.ledger.cached_tokens,
        wall_time=wall,
    )
    return list(tracker.tokens), trace
