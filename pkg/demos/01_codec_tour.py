# %% [markdown]
# # Encoding one call into per-head streams
#
# A function call is split across seven heads: one for the name and six
# for positional argument slots. Each head is a short token stream that
# ends in its own closing tag, or is a single null token when unused.

# %%
from stool import ByteTokenizer, FunctionCall, baseline_json_render, decode_streams, encode_call, normalize_schema
from stool.codec import baseline_tokens, bottleneck_tokens, render_stream_text

tok = ByteTokenizer()
print("vocab:", tok.vocab_size, "eos:", tok.eos_id, repr(tok.decode([tok.eos_id])))

# %%
# Optional params are sorted by name after the required ones.
schema = normalize_schema({"name": "send_email", "parameters": [
    {"name": "to", "required": True},
    {"name": "subject", "required": True},
    {"name": "body", "required": False},
]})
print([p.name for p in schema.params])

call = FunctionCall("send_email", ("ana@example.com", "Lunch", None))
streams = encode_call(call, schema, tok)
print(render_stream_text(streams, tok))

# %% [markdown]
# The longest stream bounds how many lockstep steps are needed, while a
# single JSON stream has to spell everything out in order.

# %%
for head, ids in streams.streams.items():
    if ids:
        print(f"{head:9s} {len(ids):3d} tokens")
print("baseline JSON:", baseline_json_render(call, schema))
n_json = baseline_tokens(call, schema, tok)
n_max = bottleneck_tokens(call, schema, tok)
print(f"JSON tokens {n_json}, bottleneck {n_max}, ratio {n_json / n_max:.2f}")

# %%
assert decode_streams(streams, schema, tok) == call
print("round trip ok")
