# %% [markdown]
# # Draft and verify on every head
#
# Two n-gram models trained on the bundled corpus: a cheap bigram drafts
# a block, the order-4 model checks it in one pass. Output matches greedy
# decoding from the larger model token for token.

# %%
from stool import ByteTokenizer, SpecConfig, build_ngram_backend, generate_parallel, speculate_parallel
from stool.harness import bundled_path
from stool.speculative import aggregate_spec_traces, closed_form_passes

tok = ByteTokenizer()
corpus = bundled_path("corpus.txt").read_text(encoding="utf-8")
target = build_ngram_backend(corpus, 4, 0.01, tokenizer=tok)
draft = build_ngram_backend(corpus, 2, 0.01, tokenizer=tok)

prompt = tok.encode("User: Book a flight from Oslo to Lima on 2025-03-02 for 2 passengers\n")

# %%
plain, _ = generate_parallel(target, prompt, tok)
for depth in (1, 2, 4, 8):
    streams, traces = speculate_parallel(draft, target, prompt, tok, config=SpecConfig(depth=depth))
    assert streams.streams == plain.streams
    agg = aggregate_spec_traces(traces.values())
    print(f"depth {depth}: accept {agg.accept_rate:.2f}, target passes {agg.target_forward_passes}"
          f" vs {agg.vanilla_forward_passes} plain ({agg.forward_reduction:.2f}x)")

# %% [markdown]
# With a perfect draft every block is accepted plus a bonus token.

# %%
_, traces = speculate_parallel(target, target, prompt, tok, config=SpecConfig(depth=4))
for head, tr in traces.items():
    assert tr.target_forward_passes == closed_form_passes(tr.vanilla_forward_passes, 4)
print("self-draft matches the ceiling formula on every head")
