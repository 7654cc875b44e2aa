"""Special-token vocabulary and the reference byte-level tokenizer.

The 17 structural tokens sit directly above the base vocabulary in a fixed
order: content pair, function pair, the six argument pairs, then the null
placeholder. One extra end-of-sequence id follows the special block.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

N_ARG_HEADS = 6
N_SPECIAL = 17

HEAD_NAMES = ("content", "function") + tuple(f"arg{k}" for k in range(1, N_ARG_HEADS + 1))

EOS_TEXT = "<|endoftext|>"


class SpecialTokenKind(enum.Enum):
    CONTENT_OPEN = "<content>"
    CONTENT_CLOSE = "</content>"
    FUNCTION_OPEN = "<function>"
    FUNCTION_CLOSE = "</function>"
    ARG1_OPEN = "<arg1>"
    ARG1_CLOSE = "</arg1>"
    ARG2_OPEN = "<arg2>"
    ARG2_CLOSE = "</arg2>"
    ARG3_OPEN = "<arg3>"
    ARG3_CLOSE = "</arg3>"
    ARG4_OPEN = "<arg4>"
    ARG4_CLOSE = "</arg4>"
    ARG5_OPEN = "<arg5>"
    ARG5_CLOSE = "</arg5>"
    ARG6_OPEN = "<arg6>"
    ARG6_CLOSE = "</arg6>"
    NULL = "<|null|>"

    @property
    def text(self) -> str:
        return self.value

    @property
    def head(self) -> Optional[str]:
        """Head this tag opens or closes; None for the null placeholder."""
        if self is SpecialTokenKind.NULL:
            return None
        return self.value.strip("</>")

    @property
    def is_open(self) -> bool:
        return self is not SpecialTokenKind.NULL and not self.value.startswith("</")

    @property
    def is_close(self) -> bool:
        return self.value.startswith("</")

    @property
    def arg_index(self) -> Optional[int]:
        h = self.head
        if h is not None and h.startswith("arg"):
            return int(h[3:])
        return None


_KINDS = tuple(SpecialTokenKind)
assert len(_KINDS) == N_SPECIAL


def arg_open(k: int) -> SpecialTokenKind:
    if not 1 <= k <= N_ARG_HEADS:
        raise ValueError(f"argument head index must be in 1..{N_ARG_HEADS}, got {k}")
    return SpecialTokenKind[f"ARG{k}_OPEN"]


def arg_close(k: int) -> SpecialTokenKind:
    if not 1 <= k <= N_ARG_HEADS:
        raise ValueError(f"argument head index must be in 1..{N_ARG_HEADS}, got {k}")
    return SpecialTokenKind[f"ARG{k}_CLOSE"]


def open_kind(head: str) -> SpecialTokenKind:
    return SpecialTokenKind(f"<{head}>")


def close_kind(head: str) -> SpecialTokenKind:
    return SpecialTokenKind(f"</{head}>")


@dataclass(frozen=True)
class SpecialTokenTable:
    """Maps special-token kinds to ids ``base .. base+16``."""

    base_vocab_size: int

    def __post_init__(self):
        if self.base_vocab_size < 1:
            raise ValueError("base_vocab_size must be >= 1")

    def id_of(self, kind: SpecialTokenKind) -> int:
        return self.base_vocab_size + _KINDS.index(kind)

    @staticmethod
    def text_of(kind: SpecialTokenKind) -> str:
        return kind.value

    def kind_of(self, token_id: int) -> Optional[SpecialTokenKind]:
        off = token_id - self.base_vocab_size
        if 0 <= off < N_SPECIAL:
            return _KINDS[off]
        return None

    def open_id(self, head: str) -> int:
        return self.id_of(open_kind(head))

    def close_id(self, head: str) -> int:
        return self.id_of(close_kind(head))

    @property
    def null_id(self) -> int:
        return self.id_of(SpecialTokenKind.NULL)

    @property
    def eos_id(self) -> int:
        return self.base_vocab_size + N_SPECIAL

    @property
    def vocab_size(self) -> int:
        """Base vocabulary + 17 special tokens + end-of-sequence."""
        return self.base_vocab_size + N_SPECIAL + 1

    def is_special(self, token_id: int) -> bool:
        return self.base_vocab_size <= token_id < self.base_vocab_size + N_SPECIAL


def build_token_table(base_vocab_size: int) -> SpecialTokenTable:
    return SpecialTokenTable(base_vocab_size)


def classify_token(table: SpecialTokenTable, token_id: int) -> Optional[SpecialTokenKind]:
    """Return the special kind for ``token_id``, or None for an ordinary token."""
    if token_id < 0:
        raise ValueError("token ids are non-negative")
    return table.kind_of(token_id)


@dataclass(frozen=True)
class ByteTokenizer:
    """Byte-level tokenizer over UTF-8 with whole-marker special tokens.

    Ordinary text maps to its byte values; each special surface string
    (and the end-of-sequence marker) maps to a single id.
    """

    table: SpecialTokenTable = field(default_factory=lambda: SpecialTokenTable(256))

    def __post_init__(self):
        if self.table.base_vocab_size != 256:
            raise ValueError("ByteTokenizer requires base_vocab_size == 256")
        markers = {k.value: self.table.id_of(k) for k in _KINDS}
        markers[EOS_TEXT] = self.table.eos_id
        object.__setattr__(self, "_markers", markers)
        # longest first so greedy matching prefers the longer marker
        object.__setattr__(self, "_by_len", sorted(markers, key=len, reverse=True))
        object.__setattr__(self, "_text", {v: k for k, v in markers.items()})

    @property
    def vocab_size(self) -> int:
        return self.table.vocab_size

    @property
    def eos_id(self) -> int:
        return self.table.eos_id

    def encode(self, text: str) -> list[int]:
        out: list[int] = []
        buf: list[str] = []
        i = 0
        n = len(text)
        while i < n:
            if text[i] == "<":
                for m in self._by_len:
                    if text.startswith(m, i):
                        if buf:
                            out.extend("".join(buf).encode("utf-8"))
                            buf.clear()
                        out.append(self._markers[m])
                        i += len(m)
                        break
                else:
                    buf.append(text[i])
                    i += 1
            else:
                buf.append(text[i])
                i += 1
        if buf:
            out.extend("".join(buf).encode("utf-8"))
        return out

    def decode(self, tokens: Iterable[int]) -> str:
        parts: list[str] = []
        raw = bytearray()
        for t in tokens:
            if 0 <= t < 256:
                raw.append(t)
                continue
            if raw:
                parts.append(raw.decode("utf-8", errors="replace"))
                raw.clear()
            try:
                parts.append(self._text[t])
            except KeyError:
                raise ValueError(f"token id {t} outside vocabulary") from None
        if raw:
            parts.append(raw.decode("utf-8", errors="replace"))
        return "".join(parts)

    def count(self, text: str) -> int:
        return len(self.encode(text))


def tokenize(tokenizer: ByteTokenizer, text: str) -> list[int]:
    return tokenizer.encode(text)


def detokenize(tokenizer: ByteTokenizer, tokens: Sequence[int]) -> str:
    return tokenizer.decode(tokens)
