# %% [markdown]
# # From samples to a report
#
# Multi-call samples are split into one entry per call with the earlier
# calls moved into history. The harness then runs both decoders and
# aggregates latency percentiles, compression and batch efficiency.

# %%
from stool import CostModel, batch_efficiency, decompose_parallel_calls
from stool.harness import build_prompt, load_config, load_dataset, run_eval, sample_from_dict
from stool.metrics import roofline_times

raw = load_dataset("bundled:mobile_mini.jsonl")
sample = sample_from_dict(raw[0])
for seed in (0, 2):
    print(f"--- seed {seed}")
    for e in decompose_parallel_calls(sample, seed=seed, permute_calls=True):
        # skip the long tool listing
        print("\n".join(build_prompt(e).splitlines()[1:]))

# %%
report = run_eval(load_config("bundled:oracle_config.json"), raw)
print("accuracy:", report.accuracy)
print("speedup percentiles:", {k: round(v, 2) for k, v in report.latency["speedup"].items() if k.startswith("P")})
cr = report.compression["cr"]
print(f"CR mean of ratios {cr['mean_of_ratios']:.3f}, ratio of means {cr['ratio_of_means']:.3f}")

# %% [markdown]
# Per-token efficiency stays at 1 until the batch crosses the knee, then
# drops as compute takes over.

# %%
eff = batch_efficiency(roofline_times(CostModel()))
for row in eff.rows():
    print(f"B={row['B']:4d}  efficiency {row['efficiency']:.3f}")
