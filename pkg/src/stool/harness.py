"""Dataset ingestion, run configuration, evaluation and report emission."""
from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from . import codec
from .backends import CostModel, build_ngram_backend, build_scripted_backend, decode_step, fork, prefill
from .codec import ToolCall, ToolSchema, normalize_schema
from .decompose import (
    EvalEntry,
    Sample,
    aggregate_accuracy,
    decompose_parallel_calls,
    format_history,
    score_prediction,
)
from .errors import ConfigError, MissingField, ParseError, StoolError
from .metrics import batch_efficiency, compression_report, percentile_stats
from .scheduler import (
    FUNCTION_HEADS,
    baseline_stop_config,
    generate_parallel,
    generate_sequential_baseline,
    head_stop_config,
)
from .speculative import SpecConfig, aggregate_spec_traces, speculate_parallel
from .tokens import HEAD_NAMES, ByteTokenizer

WARMUP_REQUESTS = 5
BUNDLED_PREFIX = "bundled:"
REQUIRED_FIELDS = ("id", "query", "tools", "calls")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("stool") / "data" / name))


def _resolve(path: str | os.PathLike, base: Optional[Path] = None) -> Path:
    s = str(path)
    if s.startswith(BUNDLED_PREFIX):
        return bundled_path(s[len(BUNDLED_PREFIX):])
    p = Path(s)
    if not p.is_absolute() and base is not None:
        p = base / p
    return p


# --------------------------------------------------------------------------- dataset


def load_dataset(path: str | os.PathLike) -> list[dict]:
    """Read one JSON object per line; blank lines are skipped, unknown fields kept."""
    out = []
    with open(_resolve(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(lineno, e.msg) from None
            if not isinstance(obj, dict):
                raise ParseError(lineno, "expected a JSON object")
            for f in REQUIRED_FIELDS:
                if f not in obj:
                    raise MissingField(f, f"line {lineno}")
            out.append(obj)
    return out


def dump_dataset(samples: Iterable[dict]) -> str:
    return "".join(json.dumps(s, ensure_ascii=False) + "\n" for s in samples)


def sample_from_dict(d: dict) -> Sample:
    for f in REQUIRED_FIELDS:
        if f not in d:
            raise MissingField(f, str(d.get("id", "?")))
    tools = [normalize_schema(ToolSchema.from_dict(t)) for t in d["tools"]]
    return Sample(
        id=str(d["id"]),
        query=d["query"],
        tools=tools,
        calls=[ToolCall.from_dict(c) for c in d["calls"]],
        environment=d.get("environment", "") or "",
        history=[ToolCall.from_dict(c) for c in d.get("history", []) or []],
        extra={k: v for k, v in d.items() if k not in REQUIRED_FIELDS + ("environment", "history")},
    )


def decompose_dataset(raw: Sequence[dict], seed: int = 0, shuffle: bool = True) -> list[EvalEntry]:
    entries = []
    for d in raw:
        entries.extend(decompose_parallel_calls(sample_from_dict(d), seed=seed, shuffle=shuffle))
    return entries


def build_prompt(entry: EvalEntry) -> str:
    """environment, canonical tool JSON, history, then the user query."""
    tools = json.dumps([t.to_dict() for t in entry.tools], separators=(",", ":"), ensure_ascii=False)
    hist = format_history(entry.prior_history + entry.history)
    parts = [entry.environment, f"Tools: {tools}", f"History:\n{hist}" if hist else "", f"User: {entry.raw_query}"]
    return "\n".join(p for p in parts if p) + "\n"


# --------------------------------------------------------------------------- config


@dataclass
class RunConfig:
    backend: dict = field(default_factory=lambda: {"kind": "oracle"})
    draft_backend: Optional[dict] = None
    cost: CostModel = field(default_factory=CostModel)
    heads: list[str] = field(default_factory=lambda: list(FUNCTION_HEADS))
    max_tokens_per_head: int = 64
    max_tokens_baseline: int = 512
    speculation_depth: Optional[int] = None
    overhead_factor: float = 1.082
    seed: int = 0
    shuffle_history: bool = True
    batches: Optional[list[int]] = None
    timing: str = "simulated"
    base_dir: Optional[Path] = None

    @classmethod
    def from_dict(cls, d: dict, base_dir: Optional[Path] = None) -> "RunConfig":
        known = {
            "backend", "draft_backend", "cost", "heads", "max_tokens_per_head", "max_tokens_baseline",
            "speculation_depth", "overhead_factor", "seed", "shuffle_history", "batches", "timing",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kw = {k: v for k, v in d.items() if k != "cost"}
        try:
            cost = CostModel(**d.get("cost", {}))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad cost model: {e}") from None
        cfg = cls(cost=cost, base_dir=base_dir, **kw)
        if "STOOL_SEED" in os.environ:
            cfg.seed = int(os.environ["STOOL_SEED"])
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.max_tokens_per_head < 1 or self.max_tokens_baseline < 1:
            raise ConfigError("token limits must be positive")
        if self.overhead_factor < 1:
            raise ConfigError("overhead_factor must be >= 1")
        bad = [h for h in self.heads if h not in HEAD_NAMES]
        if bad or not self.heads:
            raise ConfigError(f"bad head list {self.heads}")
        if self.speculation_depth is not None and self.speculation_depth < 1:
            raise ConfigError("speculation_depth must be >= 1")
        if self.timing not in ("simulated", "wallclock"):
            raise ConfigError("timing must be 'simulated' or 'wallclock'")
        for spec in (self.backend, self.draft_backend):
            if spec is None:
                continue
            kind = spec.get("kind")
            if kind not in ("oracle", "ngram", "scripted"):
                raise ConfigError(f"unknown backend kind {kind!r}")
            for key in ("corpus", "script"):
                if key in spec and not _resolve(spec[key], self.base_dir).exists():
                    raise ConfigError(f"{key} file not found: {spec[key]}")

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "draft_backend": self.draft_backend,
            "cost": self.cost.to_dict(),
            "heads": list(self.heads),
            "max_tokens_per_head": self.max_tokens_per_head,
            "max_tokens_baseline": self.max_tokens_baseline,
            "speculation_depth": self.speculation_depth,
            "overhead_factor": self.overhead_factor,
            "seed": self.seed,
            "shuffle_history": self.shuffle_history,
            "batches": self.batches,
            "timing": self.timing,
        }


def load_config(path: str | os.PathLike) -> RunConfig:
    p = _resolve(path)
    with open(p, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{p}: {e}") from None
    return RunConfig.from_dict(d, base_dir=p.parent)


# --------------------------------------------------------------------------- backends


def oracle_script(entries: Sequence[EvalEntry], tokenizer: ByteTokenizer, heads: Sequence[str]) -> list:
    """Script that replays each entry's ground truth, both as JSON and per head."""
    seen: dict[tuple, tuple] = {}
    for e in entries:
        prompt = tuple(tokenizer.encode(build_prompt(e)))
        schema = e.schema
        items = [(None, tokenizer.encode(codec.baseline_json_render(e.ground_truth, schema)))]
        streams = codec.encode_call(e.ground_truth, schema, tokenizer)
        items += [(tokenizer.table.open_id(h), streams.streams[h]) for h in heads]
        for head, target in items:
            key = (prompt, head)
            if key in seen and seen[key] != tuple(target):
                raise ConfigError(f"{e.id}: identical prompt with a different ground truth")
            seen[key] = tuple(target)
    return [(list(p), h, list(t)) for (p, h), t in seen.items()]


def build_backend(spec: dict, entries: Sequence[EvalEntry], tokenizer: ByteTokenizer, heads: Sequence[str], base_dir=None):
    kind = spec.get("kind")
    if kind == "oracle":
        return build_scripted_backend(oracle_script(entries, tokenizer, heads), tokenizer)
    if kind == "ngram":
        corpus = _resolve(spec.get("corpus", "bundled:corpus.txt"), base_dir).read_text(encoding="utf-8")
        return build_ngram_backend(corpus, int(spec.get("order", 3)), float(spec.get("alpha", 0.1)), int(spec.get("seed", 0)), tokenizer)
    if kind == "scripted":
        with open(_resolve(spec["script"], base_dir), encoding="utf-8") as fh:
            items = json.load(fh)
        script = []
        for it in items:
            head = it.get("head")
            script.append(
                (
                    tokenizer.encode(it["prompt"]),
                    None if head is None else tokenizer.table.open_id(head),
                    tokenizer.encode(it["target"]),
                )
            )
        return build_scripted_backend(script, tokenizer)
    raise ConfigError(f"unknown backend kind {kind!r}")


# --------------------------------------------------------------------------- evaluation


@dataclass
class EvalReport:
    entries: list[dict] = field(default_factory=list)
    accuracy: dict = field(default_factory=dict)
    baseline_accuracy: dict = field(default_factory=dict)
    latency: dict = field(default_factory=dict)
    compression: dict = field(default_factory=dict)
    efficiency: Optional[dict] = None
    speculative: Optional[dict] = None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "accuracy": self.accuracy,
            "baseline_accuracy": self.baseline_accuracy,
            "latency": self.latency,
            "compression": self.compression,
            "efficiency": self.efficiency,
            "speculative": self.speculative,
            "entries": self.entries,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**{k: d.get(k) for k in ("entries", "accuracy", "baseline_accuracy", "latency", "compression", "efficiency", "speculative", "config")})


def _predict_parallel(streams, entry: EvalEntry, tokenizer):
    name_guess = None
    try:
        name_guess = tokenizer.decode(streams.streams["function"]).split("<")[0]
    except ValueError:
        pass
    schema = next((t for t in entry.tools if t.function_name == name_guess), None)
    diagnostics: list = []
    try:
        pred = codec.decode_streams(streams, schema, tokenizer, diagnostics)
    except StoolError as e:
        return None, str(e)
    return pred, "; ".join(f"{d.head}: {d.message}" for d in diagnostics) or None


def _predict_baseline(tokens, entry: EvalEntry, tokenizer):
    text = tokenizer.decode([t for t in tokens if t != tokenizer.eos_id])
    try:
        tc = codec.parse_baseline_json(text)
    except StoolError as e:
        return None, str(e)
    schema = next((t for t in entry.tools if t.function_name == tc.name), None)
    if schema is None:
        return codec.FunctionCall(tc.name), None
    try:
        return codec.call_from_tool_call(tc, schema), None
    except StoolError as e:
        return codec.FunctionCall(tc.name), str(e)


def _groups_from_records(records: Sequence[dict]) -> dict[str, list[str]]:
    groups: dict[str, list[str]] = {}
    for r in records:
        groups.setdefault(r["group"], []).append(r["id"])
    return groups


def _accuracy(records: Sequence[dict], side: str) -> dict:
    from .decompose import ScoreRecord

    scores = [ScoreRecord(r["id"], r[side]["function_correct"], r[side]["overall_correct"]) for r in records]
    overall, function, group = aggregate_accuracy(scores, _groups_from_records(records))
    return {"overall": overall, "function": function, "group": group, "entries": len(records), "groups": len(_groups_from_records(records))}


def aggregate_records(records: Sequence[dict]) -> dict:
    """Every per-run aggregate, computed only from per-entry records."""
    out: dict[str, Any] = {
        "accuracy": _accuracy(records, "parallel"),
        "baseline_accuracy": _accuracy(records, "baseline"),
        "latency": {},
        "compression": compression_report([]).to_dict(),
        "speculative": None,
    }
    if records:
        out["latency"] = {
            "baseline": percentile_stats(r["baseline"]["time"] for r in records).to_dict(),
            "parallel": percentile_stats(r["parallel"]["time"] for r in records).to_dict(),
            "speedup": percentile_stats(r["speedup"] for r in records).to_dict(),
        }
        if all("wall_ms" in r["baseline"] for r in records):
            out["latency"]["wall_baseline_ms"] = percentile_stats(r["baseline"]["wall_ms"] for r in records).to_dict()
            out["latency"]["wall_parallel_ms"] = percentile_stats(r["parallel"]["wall_ms"] for r in records).to_dict()
        both = [r for r in records if r["baseline"]["overall_correct"] and r["parallel"]["overall_correct"]]
        out["compression"] = compression_report(
            (r["id"], r["baseline"]["N_output"], r["parallel"]["N_bottleneck"]) for r in both
        ).to_dict()
    spec = [r["speculative"] for r in records if r.get("speculative")]
    if spec:
        drafted = sum(s["drafted"] for s in spec)
        accepted = sum(s["accepted"] for s in spec)
        passes = sum(s["target_forward_passes"] for s in spec)
        vanilla = sum(s["vanilla_forward_passes"] for s in spec)
        out["speculative"] = {
            "drafted": drafted,
            "accepted": accepted,
            "target_forward_passes": passes,
            "vanilla_forward_passes": vanilla,
            "accept_rate": accepted / drafted if drafted else 0.0,
            "forward_reduction": vanilla / passes if passes else 0.0,
            "exact": all(s["exact"] for s in spec),
        }
    return out


def check_report(report: EvalReport | dict) -> list[str]:
    """Names of aggregate sections that differ from a re-aggregation of the entries."""
    d = report.to_dict() if isinstance(report, EvalReport) else report
    fresh = aggregate_records(d["entries"])
    return [k for k, v in fresh.items() if d.get(k) != v]


def measure_batch_times(backend, prompt: Sequence[int], cost: CostModel, batches: Iterable[int], steps: int = 4, wallclock: bool = False) -> dict[int, float]:
    """Fork ``B`` copies of one prompt and time ``steps`` batched decode steps."""
    table_open = prompt[-1]
    times = {}
    for b in batches:
        root, _ = prefill(backend, prompt, cost)
        sessions = [fork(root, table_open) for _ in range(b)]
        sim = wall = 0.0
        for _ in range(steps):
            out = decode_step(backend, sessions, cost)
            sim += out.step_cost
            wall += out.wall_time
        times[b] = (wall if wallclock else sim) / steps
    return times


def run_eval(config: RunConfig, dataset: Sequence[dict], entries: Optional[Sequence[EvalEntry]] = None) -> EvalReport:
    tokenizer = ByteTokenizer()
    if entries is None:
        entries = decompose_dataset(dataset, seed=config.seed, shuffle=config.shuffle_history)
    backend = build_backend(config.backend, entries, tokenizer, config.heads, config.base_dir)
    draft = None
    if config.speculation_depth is not None:
        draft = backend
        if config.draft_backend:
            draft = build_backend(config.draft_backend, entries, tokenizer, config.heads, config.base_dir)
    head_stop = head_stop_config(tokenizer, config.max_tokens_per_head)
    base_stop = baseline_stop_config(tokenizer, config.max_tokens_baseline)
    wallclock = config.timing == "wallclock"

    def evaluate(e: EvalEntry) -> dict:
        prompt = tokenizer.encode(build_prompt(e))
        t0 = time.perf_counter()
        base_tokens, btrace = generate_sequential_baseline(backend, prompt, tokenizer, base_stop, config.cost)
        t1 = time.perf_counter()
        streams, ptrace = generate_parallel(backend, prompt, tokenizer, config.heads, head_stop, config.cost, config.overhead_factor)
        t2 = time.perf_counter()

        schema = e.schema
        # JSON tokens only; the trailing EOS is a terminator, not output
        n_output = btrace.N - (1 if base_tokens and base_tokens[-1] == tokenizer.eos_id else 0)
        bpred, berr = _predict_baseline(base_tokens, e, tokenizer)
        ppred, perr = _predict_parallel(streams, e, tokenizer)
        bscore = score_prediction(bpred, e.ground_truth, schema, e.id)
        pscore = score_prediction(ppred, e.ground_truth, schema, e.id)
        rec = {
            "id": e.id,
            "group": e.parallel_group.group_id if e.parallel_group else e.id,
            "prompt_tokens": len(prompt),
            "baseline": {
                "N": btrace.N,
                "N_output": n_output,
                "T_p": btrace.T_p,
                "time": btrace.total_time,
                "function_correct": bscore.function_correct,
                "overall_correct": bscore.overall_correct,
                "error": berr,
            },
            "parallel": {
                "N_i": dict(ptrace.N_i),
                "N_total": ptrace.N,
                "N_bottleneck": ptrace.bottleneck,
                "forward_passes": ptrace.forward_passes,
                "T_p": ptrace.T_p,
                "decode_time": ptrace.decode_time,
                "time": ptrace.total_time,
                "fixed_batch_time": ptrace.T_p + ptrace.fixed_batch_decode_time,
                "cached_tokens": ptrace.cached_tokens,
                "termination": {h: streams.termination[h] for h in config.heads},
                "function_correct": pscore.function_correct,
                "overall_correct": pscore.overall_correct,
                "error": perr,
            },
            "speedup": btrace.total_time / ptrace.total_time,
            "cr": n_output / ptrace.bottleneck,
        }
        if wallclock:
            rec["baseline"]["wall_ms"] = (t1 - t0) * 1e3
            rec["parallel"]["wall_ms"] = (t2 - t1) * 1e3
        if draft is not None:
            sstreams, straces = speculate_parallel(
                draft, backend, prompt, tokenizer, config.heads, SpecConfig(config.speculation_depth, head_stop), config.cost
            )
            agg = aggregate_spec_traces(straces.values())
            rec["speculative"] = agg.to_dict() | {
                "exact": all(sstreams.streams[h] == streams.streams[h] for h in config.heads)
            }
        return rec

    if wallclock:
        for e in list(entries)[:WARMUP_REQUESTS]:
            evaluate(e)

    records = []
    for e in entries:
        try:
            records.append(evaluate(e))
        except StoolError as err:
            err.args = (f"entry {e.id}: {err}",)
            raise
    records.sort(key=lambda r: r["id"])

    agg = aggregate_records(records)
    report = EvalReport(entries=records, config=config.to_dict(), **agg)
    if config.batches:
        probe = tokenizer.encode("User: ping\n") + [tokenizer.table.open_id("function")]
        times = measure_batch_times(backend, probe, config.cost, config.batches, wallclock=wallclock)
        report.efficiency = batch_efficiency(times).to_dict()
    return report


# --------------------------------------------------------------------------- reports

LATENCY_COLUMNS = ("id", "N_total", "N_bottleneck", "t_baseline", "t_parallel", "speedup")
ENTRY_COLUMNS = (
    "id", "group", "baseline_function_correct", "baseline_overall_correct",
    "function_correct", "overall_correct", "forward_passes", "cr",
)
COMPRESSION_COLUMNS = ("id", "baseline_tokens", "bottleneck_tokens", "cr")
EFFICIENCY_COLUMNS = ("B", "per_token_time", "efficiency", "overhead")


def _table(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def csv_tables(report: EvalReport | dict) -> dict[str, str]:
    d = report.to_dict() if isinstance(report, EvalReport) else report
    entries = d.get("entries") or []
    eff = d.get("efficiency") or {}
    comp = (d.get("compression") or {}).get("samples", [])
    return {
        "entries": _table(
            ENTRY_COLUMNS,
            (
                (
                    r["id"], r["group"], r["baseline"]["function_correct"], r["baseline"]["overall_correct"],
                    r["parallel"]["function_correct"], r["parallel"]["overall_correct"],
                    r["parallel"]["forward_passes"], r["cr"],
                )
                for r in entries
            ),
        ),
        "latency": _table(
            LATENCY_COLUMNS,
            (
                (r["id"], r["baseline"]["N"], r["parallel"]["N_bottleneck"], r["baseline"]["time"], r["parallel"]["time"], r["speedup"])
                for r in entries
            ),
        ),
        "compression": _table(COMPRESSION_COLUMNS, ((s["id"], s["baseline_tokens"], s["bottleneck_tokens"], s["cr"]) for s in comp)),
        "efficiency": efficiency_csv(eff),
    }


def efficiency_csv(eff: dict) -> str:
    rows = zip(eff.get("batch_sizes", []), eff.get("per_token_time", []), eff.get("efficiency", []), eff.get("overhead", []))
    return _table(EFFICIENCY_COLUMNS, rows)


def emit_report(report: EvalReport | dict, path: str | os.PathLike, fmt: str = "json") -> list[Path]:
    """Write the report; CSV writes ``<stem>_<section>.csv`` next to ``path``."""
    path = Path(path)
    d = report.to_dict() if isinstance(report, EvalReport) else report
    if fmt == "json":
        path.write_text(json.dumps(d, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return [path]
    if fmt == "csv":
        written = []
        for section, text in csv_tables(d).items():
            p = path.with_name(f"{path.stem}_{section}.csv")
            p.write_text(text, encoding="utf-8")
            written.append(p)
        return written
    raise ValueError(f"unknown format {fmt!r}")


def load_report(path: str | os.PathLike, verify: bool = True) -> EvalReport:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if verify:
        bad = check_report(d)
        if bad:
            raise StoolError(f"report aggregates disagree with entries: {bad}")
    return EvalReport.from_dict(d)
