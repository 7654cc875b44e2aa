"""Conversion between JSON-style tool calls and per-head token streams."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

from .errors import DuplicateParamName, MalformedStream, MissingFunctionName, SchemaMismatch
from .tokens import HEAD_NAMES, N_ARG_HEADS, ByteTokenizer, SpecialTokenKind, close_kind, open_kind

OVERFLOW_SEP = "\x1f"

# Termination reasons for a head stream.
CLOSE_TAG = "CloseTag"
NULL_TOKEN = "NullToken"
MAX_TOKENS = "MaxTokens"
END_OF_SEQUENCE = "EndOfSequence"
TERMINATION_REASONS = (CLOSE_TAG, NULL_TOKEN, MAX_TOKENS, END_OF_SEQUENCE)

ARG_HEADS = HEAD_NAMES[2:]


@dataclass(frozen=True)
class ParamSpec:
    name: str
    required: bool = True
    description: str = ""
    type_tag: str = "string"

    def __post_init__(self):
        if not self.name:
            raise ValueError("parameter name must be nonempty")

    def to_dict(self) -> dict:
        d = {"name": self.name, "type": self.type_tag, "required": self.required}
        if self.description:
            d["description"] = self.description
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ParamSpec":
        return cls(
            name=d["name"],
            required=bool(d.get("required", True)),
            description=d.get("description", ""),
            type_tag=d.get("type", "string"),
        )


@dataclass(frozen=True)
class ToolSchema:
    function_name: str
    params: tuple[ParamSpec, ...] = ()
    overflow: tuple[ParamSpec, ...] = ()

    @property
    def all_params(self) -> tuple[ParamSpec, ...]:
        return self.params + self.overflow

    @property
    def param_names(self) -> list[str]:
        return [p.name for p in self.all_params]

    def to_dict(self) -> dict:
        return {"name": self.function_name, "parameters": [p.to_dict() for p in self.all_params]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ToolSchema":
        params = tuple(ParamSpec.from_dict(p) for p in d.get("parameters", []))
        return cls(function_name=d["name"], params=params)


@dataclass(frozen=True)
class FunctionCall:
    """A call in slot form: six positional argument slots, None marks a null slot.

    ``overflow`` carries values for the schema's overflow parameters; they are
    folded into head 6 on encoding.
    """

    name: str
    args: tuple[Optional[str], ...] = (None,) * N_ARG_HEADS
    content: Optional[str] = None
    overflow: tuple[Optional[str], ...] = ()

    def __post_init__(self):
        args = tuple(self.args)
        if len(args) > N_ARG_HEADS:
            raise ValueError(f"at most {N_ARG_HEADS} argument slots")
        args = args + (None,) * (N_ARG_HEADS - len(args))
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "overflow", tuple(self.overflow))

    @property
    def arity(self) -> int:
        return sum(v is not None for v in self.args + self.overflow)


@dataclass(frozen=True)
class ToolCall:
    """JSON-style call: a name and an ordered argument mapping."""

    name: str
    arguments: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "arguments": dict(self.arguments)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ToolCall":
        # accept the OpenAI-style nesting and string-encoded arguments
        if "function" in d and "name" not in d:
            d = d["function"]
        args = d.get("arguments", {})
        if isinstance(args, str):
            args = json.loads(args) if args.strip() else {}
        return cls(name=d["name"], arguments=dict(args))


@dataclass
class HeadStreamSet:
    """Token streams for the eight heads plus why each one stopped.

    A head that was not run has an empty stream and a termination of None.
    """

    streams: dict[str, list[int]] = field(default_factory=dict)
    termination: dict[str, Optional[str]] = field(default_factory=dict)

    def __post_init__(self):
        for h in HEAD_NAMES:
            self.streams.setdefault(h, [])
            self.termination.setdefault(h, None)
        extra = set(self.streams) - set(HEAD_NAMES)
        if extra:
            raise ValueError(f"unknown heads: {sorted(extra)}")

    def lengths(self, heads: Iterable[str] = HEAD_NAMES) -> dict[str, int]:
        return {h: len(self.streams[h]) for h in heads}

    def bottleneck(self) -> int:
        """Longest function/argument head; the content head is excluded."""
        return max(len(self.streams[h]) for h in HEAD_NAMES[1:])


@dataclass(frozen=True)
class DecodeDiagnostic:
    head: str
    message: str


def canonical_value(v: Any) -> str:
    """Argument values travel as text; non-strings become canonical JSON."""
    if isinstance(v, str):
        return v
    return json.dumps(v, separators=(",", ":"), sort_keys=True, ensure_ascii=False)


def normalize_schema(raw: ToolSchema | Mapping[str, Any]) -> ToolSchema:
    """Required params in listed order, then optional params alphabetically.

    Everything past the sixth slot moves to ``overflow``.
    """
    if not isinstance(raw, ToolSchema):
        raw = ToolSchema.from_dict(raw)
    params = raw.all_params
    seen = set()
    for p in params:
        if p.name in seen:
            raise DuplicateParamName(f"{raw.function_name}: duplicate parameter {p.name!r}")
        seen.add(p.name)
    ordered = [p for p in params if p.required]
    ordered += sorted((p for p in params if not p.required), key=lambda p: p.name)
    return ToolSchema(raw.function_name, tuple(ordered[:N_ARG_HEADS]), tuple(ordered[N_ARG_HEADS:]))


def call_from_tool_call(tc: ToolCall, schema: ToolSchema, content: Optional[str] = None) -> FunctionCall:
    """Place a JSON-style call's arguments into the schema's slots."""
    if tc.name != schema.function_name:
        raise SchemaMismatch(f"call {tc.name!r} does not match schema {schema.function_name!r}")
    unknown = set(tc.arguments) - set(schema.param_names)
    if unknown:
        raise SchemaMismatch(f"{tc.name}: unknown arguments {sorted(unknown)}")
    vals = [canonical_value(tc.arguments[p.name]) if p.name in tc.arguments else None for p in schema.all_params]
    return FunctionCall(
        name=tc.name,
        args=tuple(vals[:N_ARG_HEADS]),
        content=content,
        overflow=tuple(vals[N_ARG_HEADS:]),
    )


def tool_call_from_call(call: FunctionCall, schema: Optional[ToolSchema]) -> ToolCall:
    """Inverse of :func:`call_from_tool_call`; unnamed slots become ``argK``."""
    names = schema.param_names if schema is not None and schema.function_name == call.name else []
    values = list(call.args) + list(call.overflow)
    args = {}
    for i, v in enumerate(values):
        if v is None:
            continue
        args[names[i] if i < len(names) else f"arg{i + 1}"] = v
    return ToolCall(call.name, args)


def normalize_call(call: FunctionCall, schema: ToolSchema) -> FunctionCall:
    """Pad the overflow tuple to the schema's overflow width."""
    pad = len(schema.overflow) - len(call.overflow)
    if pad <= 0:
        return call
    return FunctionCall(call.name, call.args, call.content, call.overflow + (None,) * pad)


def _check_conforms(call: FunctionCall, schema: ToolSchema) -> None:
    if call.name != schema.function_name:
        raise SchemaMismatch(f"call {call.name!r} does not match schema {schema.function_name!r}")
    for k in range(len(schema.params), N_ARG_HEADS):
        if call.args[k] is not None:
            raise SchemaMismatch(f"{call.name}: slot {k + 1} set but schema has {len(schema.params)} params")
    if len(call.overflow) > len(schema.overflow):
        raise SchemaMismatch(f"{call.name}: {len(call.overflow)} overflow values, schema allows {len(schema.overflow)}")
    if any(v is not None and OVERFLOW_SEP in v for v in call.args[-1:] + call.overflow) and schema.overflow:
        raise SchemaMismatch("overflow values may not contain the unit separator")


def _head6_text(call: FunctionCall, schema: ToolSchema) -> Optional[str]:
    if not schema.overflow:
        return call.args[-1]
    vals = [call.args[-1]] + list(call.overflow) + [None] * (len(schema.overflow) - len(call.overflow))
    if all(v is None for v in vals):
        return None
    # missing members of an overflow list travel as empty fields
    return OVERFLOW_SEP.join("" if v is None else v for v in vals)


def encode_call(call: FunctionCall, schema: ToolSchema, tokenizer: ByteTokenizer) -> HeadStreamSet:
    _check_conforms(call, schema)
    table = tokenizer.table
    streams: dict[str, list[int]] = {}
    term: dict[str, Optional[str]] = {}

    if call.content is not None:
        streams["content"] = tokenizer.encode(call.content) + [table.close_id("content")]
        term["content"] = CLOSE_TAG
    streams["function"] = tokenizer.encode(call.name) + [table.close_id("function")]
    term["function"] = CLOSE_TAG

    slot_text = list(call.args[:-1]) + [_head6_text(call, schema)]
    for k, v in enumerate(slot_text, start=1):
        head = f"arg{k}"
        if v is None:
            streams[head] = [table.null_id]
            term[head] = NULL_TOKEN
        else:
            streams[head] = tokenizer.encode(v) + [table.close_id(head)]
            term[head] = CLOSE_TAG
    return HeadStreamSet(streams, term)


def _head_value(
    head: str,
    tokens: Sequence[int],
    reason: Optional[str],
    tokenizer: ByteTokenizer,
    diagnostics: Optional[list],
) -> tuple[Optional[str], bool]:
    """Return (text, is_null) for one head stream."""
    table = tokenizer.table
    own_close = table.close_id(head)
    body = list(tokens)
    if body and body[-1] in (own_close, table.eos_id):
        if body[-1] == table.eos_id and diagnostics is not None:
            diagnostics.append(DecodeDiagnostic(head, "terminated by end-of-sequence without close tag"))
        body.pop()
    elif reason == MAX_TOKENS and diagnostics is not None:
        diagnostics.append(DecodeDiagnostic(head, "truncated at max tokens"))

    if body and body[0] == table.null_id:
        if len(body) > 1:
            raise MalformedStream(f"{head}: tokens after null placeholder")
        return None, True
    for t in body:
        kind = table.kind_of(t)
        if kind is SpecialTokenKind.NULL:
            raise MalformedStream(f"{head}: null placeholder after value tokens")
        if kind is not None:
            raise MalformedStream(f"{head}: unexpected {kind.value}")
        if t == table.eos_id:
            raise MalformedStream(f"{head}: end-of-sequence inside value")
    return tokenizer.decode(body), False


def decode_streams(
    streams: HeadStreamSet,
    schema: Optional[ToolSchema],
    tokenizer: ByteTokenizer,
    diagnostics: Optional[list] = None,
) -> FunctionCall:
    """Rebuild a call from head streams.

    ``schema`` is only needed to split overflow values out of head 6; pass
    None when the predicted function is not in the tool list. Truncated or
    end-of-sequence terminated heads are parsed best effort and noted in
    ``diagnostics`` when a list is supplied.
    """
    content = None
    if streams.streams["content"]:
        content, is_null = _head_value(
            "content", streams.streams["content"], streams.termination["content"], tokenizer, diagnostics
        )
        if is_null:
            content = None

    name, is_null = _head_value(
        "function", streams.streams["function"], streams.termination["function"], tokenizer, diagnostics
    )
    if is_null or not name:
        raise MissingFunctionName("function head is empty")

    args: list[Optional[str]] = []
    for head in ARG_HEADS:
        toks = streams.streams[head]
        if not toks and streams.termination[head] is None:
            args.append(None)  # head not run
            continue
        value, _ = _head_value(head, toks, streams.termination[head], tokenizer, diagnostics)
        args.append(value)

    overflow: tuple[Optional[str], ...] = ()
    if schema is not None and schema.function_name == name and schema.overflow:
        overflow = (None,) * len(schema.overflow)
        if args[-1] is not None:
            parts = args[-1].split(OVERFLOW_SEP)
            parts += [""] * (1 + len(schema.overflow) - len(parts))
            args[-1] = parts[0] or None
            overflow = tuple(p or None for p in parts[1 : 1 + len(schema.overflow)])
    return FunctionCall(name=name, args=tuple(args), content=content, overflow=overflow)


def _typed(text: str, type_tag: str) -> Any:
    if type_tag == "string":
        return text
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def baseline_json_render(call: FunctionCall, schema: Optional[ToolSchema]) -> str:
    """Canonical compact JSON a conventional model would emit for this call.

    Values of non-string parameters are emitted as JSON literals (``2``, not ``"2"``).
    """
    tc = tool_call_from_call(call, schema)
    types = {p.name: p.type_tag for p in schema.all_params} if schema is not None else {}
    args = {k: _typed(v, types.get(k, "string")) for k, v in tc.arguments.items()}
    return json.dumps({"name": tc.name, "arguments": args}, separators=(",", ":"), ensure_ascii=False)


def parse_baseline_json(text: str) -> ToolCall:
    """Parse the sequential baseline's JSON output; raises MalformedStream."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedStream(f"baseline output is not JSON: {e}") from None
    if not isinstance(d, dict) or "name" not in d:
        raise MalformedStream("baseline output lacks a name")
    args = d.get("arguments", {})
    if not isinstance(args, dict):
        raise MalformedStream("baseline arguments must be an object")
    return ToolCall(str(d["name"]), {k: canonical_value(v) for k, v in args.items()})


def render_stream_text(streams: HeadStreamSet, tokenizer: ByteTokenizer) -> str:
    """One line per head, ``<head>...`` with null heads shown as ``<argK><|null|></argK>``.

    Heads that were not run, and an empty content head, are omitted.
    """
    table = tokenizer.table
    lines = []
    for head in HEAD_NAMES:
        toks = streams.streams[head]
        if not toks:
            continue
        body = list(toks)
        if body == [table.null_id]:
            body.append(table.close_id(head))
        lines.append(open_kind(head).value + tokenizer.decode(body))
    return "\n".join(lines)


def parse_stream_text(text: str, tokenizer: ByteTokenizer) -> HeadStreamSet:
    """Inverse of :func:`render_stream_text`."""
    table = tokenizer.table
    streams: dict[str, list[int]] = {}
    term: dict[str, Optional[str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        toks = tokenizer.encode(line)
        kind = table.kind_of(toks[0])
        if kind is None or not kind.is_open:
            raise MalformedStream(f"line {lineno}: expected a head open tag")
        head = kind.head
        if head in streams:
            raise MalformedStream(f"line {lineno}: duplicate head {head}")
        body = toks[1:]
        if body[:1] == [table.null_id] and body[1:] in ([], [table.close_id(head)]):
            body = [table.null_id]
        streams[head] = body
        if body == [table.null_id]:
            term[head] = NULL_TOKEN
        elif body and body[-1] == table.close_id(head):
            term[head] = CLOSE_TAG
        elif body and body[-1] == table.eos_id:
            term[head] = END_OF_SEQUENCE
        else:
            term[head] = MAX_TOKENS
    return HeadStreamSet(streams, term)


def bottleneck_tokens(call: FunctionCall, schema: ToolSchema, tokenizer: ByteTokenizer) -> int:
    return encode_call(call, schema, tokenizer).bottleneck()


def baseline_tokens(call: FunctionCall, schema: ToolSchema, tokenizer: ByteTokenizer) -> int:
    return tokenizer.count(baseline_json_render(call, schema))
