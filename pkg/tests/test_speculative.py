import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stool.backends import CostModel, build_ngram_backend, build_scripted_backend, greedy_generate
from stool.errors import VocabMismatch
from stool.harness import bundled_path
from stool.scheduler import FUNCTION_HEADS, StopConfig, generate_parallel, head_stop_config
from stool.speculative import (
    SpecConfig,
    SpecTrace,
    aggregate_spec_traces,
    closed_form_passes,
    speculate_generate,
    speculate_parallel,
)


class ConstantBackend:
    """Always proposes the same token."""

    def __init__(self, token, vocab_size, eos_id):
        self.token, self.vocab_size, self.eos_id = token, vocab_size, eos_id

    def greedy_next(self, context):
        return self.token


@pytest.fixture(scope="module")
def corpus():
    return bundled_path("corpus.txt").read_text(encoding="utf-8")


@pytest.fixture(scope="module")
def target(corpus, tok):
    return build_ngram_backend(corpus, 3, 0.1, 0, tok)


def _prompts(corpus, tok, n, seed=0):
    rng = random.Random(seed)
    lines = [ln for ln in corpus.splitlines() if ln.startswith("User:")]
    return [tok.encode(rng.choice(lines) + "\n") for _ in range(n)]


@pytest.fixture(scope="module")
def drafts(corpus, tok):
    return {k: build_ngram_backend(corpus, k, 0.1, 0, tok) for k in (1, 2, 3)}


def test_identical_models_example(target, tok):
    P = tok.encode("User: request 5\n")
    cfg = SpecConfig(4, StopConfig((), (), 20))
    out, tr = speculate_generate(target, target, P, tok, cfg)
    assert len(out) == 20
    assert tr.accept_rate == 1.0
    assert tr.target_forward_passes == 4 == math.ceil(20 / 5)
    assert tr.forward_reduction == 5.0


def test_closed_form():
    assert closed_form_passes(20, 4) == 4
    assert closed_form_passes(1, 4) == 1
    assert closed_form_passes(21, 4) == 5


def test_heterogeneous_exact(corpus, target, tok):
    draft = build_ngram_backend(corpus, 1, 0.1, 0, tok)
    cfg = SpecConfig(4, head_stop_config(tok, 60))
    rates = []
    for P in _prompts(corpus, tok, 10):
        out, tr = speculate_generate(draft, target, P, tok, cfg)
        ref, _ = speculate_generate(target, target, P, tok, cfg)
        assert out == ref
        rates.append(tr.accept_rate)
        assert tr.accepted + tr.corrections + tr.bonus == len(out)
    pooled = sum(rates) / len(rates)
    assert 0 < pooled < 1


def test_wrong_draft_accepts_nothing(tok):
    P = tok.encode("p")
    target = build_scripted_backend([(P, None, tok.encode("hello world"))], tok)
    draft = ConstantBackend(ord("q"), tok.vocab_size, tok.eos_id)
    out, tr = speculate_generate(draft, target, P, tok, SpecConfig(3))
    assert tok.decode(out) == "hello world<|endoftext|>"
    assert tr.accept_rate == 0.0
    assert tr.corrections == len(out)
    assert tr.target_forward_passes == len(out)


def test_vocab_mismatch(target, tok):
    other = ConstantBackend(0, tok.vocab_size + 1, tok.eos_id)
    with pytest.raises(VocabMismatch):
        speculate_generate(other, target, [1], tok)


def test_bad_depth():
    with pytest.raises(ValueError):
        SpecConfig(0)


@given(st.integers(1, 6), st.integers(1, 60), st.integers(0, 10_000))
def test_closed_form_when_draft_is_target(target, tok, depth, length, seed):
    P = tok.encode(f"User: request {seed}\n")
    out, tr = speculate_generate(target, target, P, tok, SpecConfig(depth, StopConfig((), (), length)))
    ref = greedy_generate(target, P, length)
    assert out == ref
    assert tr.accept_rate == 1.0
    assert tr.target_forward_passes == closed_form_passes(len(out), depth)


@given(st.integers(1, 3), st.integers(1, 6), st.integers(0, 10_000))
def test_accounting_identity(drafts, target, tok, order, depth, seed):
    draft = drafts[order]
    P = tok.encode(f"User: request {seed}\n")
    out, tr = speculate_generate(draft, target, P, tok, SpecConfig(depth, head_stop_config(tok, 40)))
    assert tr.accepted + tr.corrections + tr.bonus == len(out) == tr.vanilla_forward_passes
    assert out == speculate_generate(target, target, P, tok, SpecConfig(depth, head_stop_config(tok, 40)))[0]


def test_accept_rate_trend(corpus, tok):
    target = build_ngram_backend(corpus, 3, 0.1, 0, tok)
    prompts = _prompts(corpus, tok, 8, seed=3)
    cfg = SpecConfig(4, head_stop_config(tok, 48))
    pooled = []
    for order in (1, 2, 3):
        draft = build_ngram_backend(corpus, order, 0.1, 0, tok)
        agg = aggregate_spec_traces(speculate_generate(draft, target, P, tok, cfg)[1] for P in prompts)
        pooled.append(agg.accept_rate)
    assert pooled[0] <= pooled[1] <= pooled[2] == 1.0


def test_parallel_heads_match_plain(corpus, target, tok):
    draft = build_ngram_backend(corpus, 2, 0.1, 0, tok)
    P = tok.encode("User: request 11\n")
    stop = head_stop_config(tok, 40)
    ref, _ = generate_parallel(target, P, tok, FUNCTION_HEADS, stop)
    got, traces = speculate_parallel(draft, target, P, tok, FUNCTION_HEADS, SpecConfig(4, stop))
    assert got.streams == ref.streams
    assert got.termination == ref.termination
    assert set(traces) == set(FUNCTION_HEADS)
    _, traces_same = speculate_parallel(target, target, P, tok, FUNCTION_HEADS, SpecConfig(4, stop))
    assert all(t.accept_rate == 1.0 for t in traces_same.values())


def test_aggregate_pools_counts():
    a = SpecTrace(drafted=10, accepted=9, target_forward_passes=3, vanilla_forward_passes=12)
    b = SpecTrace(drafted=2, accepted=0, target_forward_passes=2, vanilla_forward_passes=2)
    agg = aggregate_spec_traces([a, b])
    assert agg.accept_rate == 9 / 12
    assert agg.forward_reduction == 14 / 5


def test_target_time(target, tok):
    P = tok.encode("User: x\n")
    cost = CostModel(t_prefill_per_token=0.5)
    _, tr = speculate_generate(target, target, P, tok, SpecConfig(4, StopConfig((), (), 10)), cost)
    assert tr.target_time == pytest.approx(len(P) * 0.5 + tr.target_forward_passes * 1.0)
