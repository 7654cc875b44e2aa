"""Toy language-model backends with prefill/fork/step semantics.

Nothing here runs a transformer. A backend is any object with a
``vocab_size`` and a ``greedy_next(context)`` method; sessions hold the
cached prefix and a shared ledger that counts KV-cache tokens so prefix
sharing between forked heads is observable.
"""
from __future__ import annotations

import hashlib
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from .errors import BadOrder, DuplicateScriptKey, EmptyPrompt, ForeignSession
from .tokens import ByteTokenizer


class Backend(Protocol):
    vocab_size: int
    eos_id: int

    def greedy_next(self, context: Sequence[int]) -> int: ...


@dataclass(frozen=True)
class CostModel:
    """Roofline-style simulated costs.

    A decode step over ``B`` sequences costs ``max(t_mem, B * t_compute_per_seq)``:
    flat while weight loading dominates, linear once compute saturates.
    """

    t_prefill_per_token: float = 0.1
    t_mem: float = 1.0
    t_compute_per_seq: float = 0.05

    def __post_init__(self):
        for name in ("t_prefill_per_token", "t_mem", "t_compute_per_seq"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    def step_time(self, batch: int) -> float:
        if batch < 1:
            raise ValueError("batch must be >= 1")
        return max(self.t_mem, batch * self.t_compute_per_seq)

    def prefill_time(self, n_tokens: int) -> float:
        return n_tokens * self.t_prefill_per_token

    @property
    def knee(self) -> float:
        """Largest batch that stays memory-bound."""
        return self.t_mem / self.t_compute_per_seq

    def to_dict(self) -> dict:
        return {
            "t_prefill_per_token": self.t_prefill_per_token,
            "t_mem": self.t_mem,
            "t_compute_per_seq": self.t_compute_per_seq,
        }


class KVLedger:
    """Counts tokens held in the (conceptual) KV cache across related sessions."""

    def __init__(self):
        self.cached_tokens = 0

    def add(self, n: int) -> None:
        self.cached_tokens += n


@dataclass
class Session:
    backend: Backend
    tokens: list[int]
    ledger: KVLedger
    prefix_length: int = field(init=False)

    def __post_init__(self):
        self.prefix_length = len(self.tokens)

    def append(self, token: int) -> None:
        self.tokens.append(token)
        self.prefix_length += 1
        self.ledger.add(1)


@dataclass(frozen=True)
class StepOutput:
    tokens: list[int]
    step_cost: float
    wall_time: float = 0.0


def prefill(backend: Backend, tokens: Sequence[int], cost: CostModel) -> tuple[Session, float]:
    if len(tokens) == 0:
        raise EmptyPrompt("prompt must contain at least one token")
    ledger = KVLedger()
    ledger.add(len(tokens))
    return Session(backend, list(tokens), ledger), cost.prefill_time(len(tokens))


def fork(session: Session, token: int) -> Session:
    """Branch off the cached prefix with one extra token; the prefix is not re-prefilled."""
    child = Session(session.backend, session.tokens + [token], session.ledger)
    session.ledger.add(1)
    return child


def decode_step(backend: Backend, sessions: Sequence[Session], cost: CostModel) -> StepOutput:
    """Advance every session by one greedy token in a single batched step."""
    if not sessions:
        raise ValueError("batch must be nonempty")
    for s in sessions:
        if s.backend is not backend:
            raise ForeignSession("session belongs to a different backend")
    t0 = time.perf_counter()
    out = [backend.greedy_next(s.tokens) for s in sessions]
    wall = time.perf_counter() - t0
    for s, t in zip(sessions, out):
        s.append(t)
    return StepOutput(out, cost.step_time(len(sessions)), wall)


def greedy_generate(backend: Backend, context: Sequence[int], n: int, stop_ids: Iterable[int] = ()) -> list[int]:
    """Plain greedy loop without sessions; handy as a reference oracle."""
    ctx = list(context)
    stops = set(stop_ids)
    out = []
    for _ in range(n):
        t = backend.greedy_next(ctx)
        out.append(t)
        ctx.append(t)
        if t in stops:
            break
    return out


class NGramBackend:
    """Add-alpha smoothed n-gram model over bytes, special tokens and EOS.

    Contexts shorter than ``order - 1`` fall back to the matching lower order,
    so the distribution is a pure function of the last ``order - 1`` tokens.
    """

    def __init__(self, corpus_tokens: Sequence[int], order: int, alpha: float, vocab_size: int, eos_id: int, seed: int = 0):
        if order < 1:
            raise BadOrder(f"order must be >= 1, got {order}")
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        if not corpus_tokens:
            raise ValueError("corpus must be nonempty")
        self.order = order
        self.alpha = float(alpha)
        self.vocab_size = vocab_size
        self.eos_id = eos_id
        self.seed = seed
        h = hashlib.sha256(np.asarray(corpus_tokens, dtype=np.int64).tobytes())
        h.update(f"{order}:{alpha}:{seed}".encode())
        self.fingerprint = h.hexdigest()[:16]

        self._counts: dict[tuple[int, ...], Counter] = defaultdict(Counter)
        toks = list(corpus_tokens)
        for n in range(1, order + 1):
            for i in range(len(toks) - n + 1):
                self._counts[tuple(toks[i : i + n - 1])][toks[i + n - 1]] += 1
        self._dist_cache: dict[tuple[int, ...], np.ndarray] = {}

    def _context_key(self, context: Sequence[int]) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        return tuple(context[-(self.order - 1):])

    def distribution(self, context: Sequence[int]) -> np.ndarray:
        key = self._context_key(context)
        cached = self._dist_cache.get(key)
        if cached is not None:
            return cached
        counts = np.zeros(self.vocab_size)
        for tok, c in self._counts.get(key, {}).items():
            counts[tok] = c
        p = (counts + self.alpha) / (counts.sum() + self.alpha * self.vocab_size)
        self._dist_cache[key] = p
        return p

    def greedy_next(self, context: Sequence[int]) -> int:
        # np.argmax returns the first maximum, so ties go to the lowest id
        return int(np.argmax(self.distribution(context)))


def build_ngram_backend(
    corpus: str | bytes,
    order: int,
    alpha: float = 0.1,
    seed: int = 0,
    tokenizer: Optional[ByteTokenizer] = None,
) -> NGramBackend:
    tokenizer = tokenizer or ByteTokenizer()
    if isinstance(corpus, bytes):
        corpus = corpus.decode("utf-8")
    if order < 1:
        raise BadOrder(f"order must be >= 1, got {order}")
    return NGramBackend(tokenizer.encode(corpus), order, alpha, tokenizer.vocab_size, tokenizer.eos_id, seed)


def _key(prefix: Sequence[int], head: Optional[int]) -> tuple[str, Optional[int]]:
    digest = hashlib.sha256(np.asarray(prefix, dtype=np.int64).tobytes()).hexdigest()
    return digest, head


class ScriptedBackend:
    """Replays fixed targets keyed by (prompt, head-open token).

    For a context ``prompt + [head] + generated`` the backend emits the next
    target token while ``generated`` is still a prefix of the target, and EOS
    once the target is exhausted or the context is unknown.
    """

    def __init__(self, script: Iterable[tuple[Sequence[int], Optional[int], Sequence[int]]], vocab_size: int, eos_id: int):
        self.vocab_size = vocab_size
        self.eos_id = eos_id
        self._targets: dict[tuple[str, Optional[int]], tuple[int, ...]] = {}
        self._lengths: set[int] = set()
        for prefix, head, target in script:
            k = _key(prefix, head)
            if k in self._targets:
                raise DuplicateScriptKey(f"duplicate script entry for head {head}")
            self._targets[k] = tuple(target)
            self._lengths.add(len(prefix))
        self._lengths_desc = sorted(self._lengths, reverse=True)

    def _lookup(self, context: Sequence[int]) -> Optional[tuple[tuple[int, ...], tuple[int, ...]]]:
        for L in self._lengths_desc:
            if L > len(context):
                continue
            digest = _key(context[:L], None)[0]
            if L < len(context):
                target = self._targets.get((digest, context[L]))
                if target is not None:
                    return target, tuple(context[L + 1 :])
            target = self._targets.get((digest, None))
            if target is not None:
                return target, tuple(context[L:])
        return None

    def greedy_next(self, context: Sequence[int]) -> int:
        hit = self._lookup(context)
        if hit is None:
            return self.eos_id
        target, generated = hit
        n = len(generated)
        if n < len(target) and target[:n] == generated:
            return target[n]
        return self.eos_id


def build_scripted_backend(
    script: Iterable[tuple[Sequence[int], Optional[int], Sequence[int]]],
    tokenizer: Optional[ByteTokenizer] = None,
) -> ScriptedBackend:
    tokenizer = tokenizer or ByteTokenizer()
    return ScriptedBackend(script, tokenizer.vocab_size, tokenizer.eos_id)
