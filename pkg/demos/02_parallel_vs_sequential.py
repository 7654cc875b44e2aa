# %% [markdown]
# # Lockstep heads versus one long stream
#
# A scripted backend replays known targets, so both decoders produce the
# exact same call. The difference is in step counts and simulated time.

# %%
from stool import ByteTokenizer, CostModel, decode_streams, generate_parallel, generate_sequential_baseline
from stool.harness import build_prompt, decompose_dataset, load_dataset, oracle_script
from stool.backends import build_scripted_backend
from stool.scheduler import FUNCTION_HEADS

tok = ByteTokenizer()
entries = decompose_dataset(load_dataset("bundled:mobile_mini.jsonl"))
backend = build_scripted_backend(oracle_script(entries, tok, FUNCTION_HEADS), tok)
cost = CostModel()

# %%
entry = next(e for e in entries if e.ground_truth.name == "create_calendar_event")
prompt = tok.encode(build_prompt(entry))
print(build_prompt(entry))

# %%
streams, ptrace = generate_parallel(backend, prompt, tok, cost=cost)
ids, btrace = generate_sequential_baseline(backend, prompt, tok, cost=cost)
print("decoded:", decode_streams(streams, entry.schema, tok))
print("per-head tokens:", ptrace.N_i)
print("batch sizes per step:", ptrace.batch_sizes)

# %% [markdown]
# Seven sequences fit under the roofline knee, so a batched step costs
# the same as a single-sequence step.

# %%
print(f"knee at B={cost.knee:.0f}")
print(f"sequential: {btrace.forward_passes} steps, {btrace.total_time:.1f} time units")
print(f"parallel:   {ptrace.forward_passes} steps, {ptrace.total_time:.1f} time units")
print(f"speedup {btrace.total_time / ptrace.total_time:.2f}x")
