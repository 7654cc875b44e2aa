"""Parallel function-call decoding with special tokens, at desk scale.

Toy backends stand in for real models so the latency, compression and
speculative-decoding accounting can be checked exactly.
"""
from .backends import CostModel, build_ngram_backend, build_scripted_backend, decode_step, fork, prefill
from .codec import (
    FunctionCall,
    HeadStreamSet,
    ParamSpec,
    ToolCall,
    ToolSchema,
    baseline_json_render,
    decode_streams,
    encode_call,
    normalize_schema,
)
from .decompose import aggregate_accuracy, decompose_parallel_calls, format_history, score_prediction
from .metrics import (
    LatencyModel,
    batch_efficiency,
    combined_speedup,
    compression_ratio,
    latency_baseline,
    latency_parallel,
    percentile_stats,
)
from .scheduler import StopConfig, generate_parallel, generate_sequential_baseline, stop_check
from .speculative import SpecConfig, speculate_generate, speculate_parallel
from .tokens import ByteTokenizer, SpecialTokenKind, SpecialTokenTable, build_token_table, classify_token

__version__ = "0.1.0"
