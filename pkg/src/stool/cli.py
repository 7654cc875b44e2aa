"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import codec, harness
from .backends import CostModel
from .errors import StoolError
from .metrics import REFERENCE_BATCHES, batch_efficiency, roofline_times
from .tokens import ByteTokenizer

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write(text: str, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_tools(path: str) -> list[codec.ToolSchema]:
    data = json.loads(_read(path))
    if isinstance(data, dict):
        data = data.get("tools", [data])
    return [codec.normalize_schema(codec.ToolSchema.from_dict(t)) for t in data]


def _batches(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad batch list {text!r}") from None
    if not out or any(b < 1 for b in out):
        raise argparse.ArgumentTypeError("batch sizes must be positive integers")
    return out


def cmd_encode(args) -> int:
    tok = ByteTokenizer()
    tools = _load_tools(args.tools)
    tc = codec.ToolCall.from_dict(json.loads(_read(args.call)))
    schema = next((t for t in tools if t.function_name == tc.name), None)
    if schema is None:
        raise codec.SchemaMismatch(f"no tool named {tc.name!r}")
    call = codec.call_from_tool_call(tc, schema, content=args.content)
    _write(codec.render_stream_text(codec.encode_call(call, schema, tok), tok) + "\n", args.out)
    return EXIT_OK


def cmd_decode(args) -> int:
    tok = ByteTokenizer()
    tools = _load_tools(args.tools) if args.tools else []
    streams = codec.parse_stream_text(_read(args.streams), tok)
    name = tok.decode(streams.streams["function"]).split("<")[0]
    schema = next((t for t in tools if t.function_name == name), None)
    call = codec.decode_streams(streams, schema, tok)
    out = codec.tool_call_from_call(call, schema).to_dict()
    if call.content is not None:
        out["content"] = call.content
    _write(json.dumps(out, ensure_ascii=False) + "\n", args.out)
    return EXIT_OK


def cmd_decompose(args) -> int:
    raw = harness.load_dataset(args.dataset)
    entries = harness.decompose_dataset(raw, seed=args.seed, shuffle=args.shuffle_history)
    _write("".join(json.dumps(e.to_dict(), ensure_ascii=False) + "\n" for e in entries), args.out)
    return EXIT_OK


def _config(args) -> harness.RunConfig:
    return harness.load_config(args.config) if args.config else harness.RunConfig()


def _emit(report, out: Optional[str], fmt: str) -> None:
    if out in (None, "-"):
        if fmt == "json":
            _write(json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n", None)
        else:
            for section, text in harness.csv_tables(report).items():
                _write(f"# {section}\n{text}", None)
        return
    harness.emit_report(report, out, fmt)


def cmd_run(args) -> int:
    cfg = _config(args)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.shuffle_history is not None:
        cfg.shuffle_history = args.shuffle_history
    report = harness.run_eval(cfg, harness.load_dataset(args.dataset))
    _emit(report, args.out, args.format)
    acc = report.accuracy
    print(
        f"entries={acc['entries']} overall={acc['overall']:.4f} function={acc['function']:.4f} group={acc['group']:.4f}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_spec_run(args) -> int:
    cfg = _config(args)
    cfg.speculation_depth = args.depth if args.depth is not None else (cfg.speculation_depth or 4)
    report = harness.run_eval(cfg, harness.load_dataset(args.dataset))
    _emit(report, args.out, args.format)
    s = report.speculative
    print(f"accept_rate={s['accept_rate']:.4f} forward_reduction={s['forward_reduction']:.4f} exact={s['exact']}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep_batch(args) -> int:
    cfg = _config(args)
    cost = cfg.cost
    if args.t_mem is not None or args.t_compute is not None:
        cost = CostModel(cost.t_prefill_per_token, args.t_mem or cost.t_mem, args.t_compute or cost.t_compute_per_seq)
    batches = args.batches or cfg.batches or list(REFERENCE_BATCHES)
    if args.measure:
        from .backends import build_ngram_backend

        tok = ByteTokenizer()
        backend = build_ngram_backend(harness.bundled_path("corpus.txt").read_text(encoding="utf-8"), 3, 0.1, 0, tok)
        probe = tok.encode("User: ping\n") + [tok.table.open_id("function")]
        times = harness.measure_batch_times(backend, probe, cost, batches)
    else:
        times = roofline_times(cost, batches)
    _write(harness.efficiency_csv(batch_efficiency(times).to_dict()), args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    report = harness.load_report(args.input, verify=not args.no_verify)
    _emit(report, args.out, args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stool", description="Parallel function-call decoding toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("encode", help="call JSON -> head stream text")
    e.add_argument("--call", required=True, help="call JSON file ('-' for stdin)")
    e.add_argument("--tools", required=True, help="tool schema JSON (object or list)")
    e.add_argument("--content", default=None)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="head stream text -> call JSON")
    d.add_argument("--streams", required=True)
    d.add_argument("--tools", default=None)
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_decode)

    c = sub.add_parser("decompose", help="split parallel calls into single-call entries")
    c.add_argument("--dataset", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--shuffle-history", action=argparse.BooleanOptionalAction, default=True)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_decompose)

    for name, fn, hlp in (("run", cmd_run, "full evaluation"), ("spec-run", cmd_spec_run, "evaluation with speculative decoding")):
        r = sub.add_parser(name, help=hlp)
        r.add_argument("--config", default=None)
        r.add_argument("--dataset", required=True)
        r.add_argument("--out", default=None)
        r.add_argument("--format", choices=("json", "csv"), default="json")
        if name == "run":
            r.add_argument("--seed", type=int, default=None)
            r.add_argument("--shuffle-history", action=argparse.BooleanOptionalAction, default=None)
        else:
            r.add_argument("--depth", type=int, default=None)
        r.set_defaults(func=fn)

    s = sub.add_parser("sweep-batch", help="Efficiency(B) over a batch list")
    s.add_argument("--config", default=None)
    s.add_argument("--batches", type=_batches, default=None)
    s.add_argument("--t-mem", type=float, default=None)
    s.add_argument("--t-compute", type=float, default=None)
    s.add_argument("--measure", action="store_true", help="time batched steps on a toy backend instead of the closed form")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_sweep_batch)

    rp = sub.add_parser("report", help="re-render a saved JSON report")
    rp.add_argument("--in", dest="input", required=True)
    rp.add_argument("--format", choices=("json", "csv"), default="json")
    rp.add_argument("--out", default=None)
    rp.add_argument("--no-verify", action="store_true")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(e, file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (StoolError, OSError, json.JSONDecodeError, KeyError, ValueError) as e:
        print(f"stool: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
