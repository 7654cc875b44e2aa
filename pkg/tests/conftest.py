import random

import pytest
from hypothesis import HealthCheck, settings

from stool.codec import ParamSpec, ToolSchema
from stool.tokens import ByteTokenizer

settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

VALUE_CHARS = (
    [chr(c) for c in range(0x20, 0x7F)]
    + ["é", "ß", "中", "文", "😀", "\t"]
)


@pytest.fixture(scope="session")
def tok():
    return ByteTokenizer()


def random_value(rng: random.Random, max_bytes: int = 32) -> str:
    """A string of 0..max_bytes UTF-8 bytes."""
    target = rng.randint(0, max_bytes)
    out, size = [], 0
    while True:
        ch = rng.choice(VALUE_CHARS)
        n = len(ch.encode("utf-8"))
        if size + n > target:
            break
        out.append(ch)
        size += n
    return "".join(out)


def random_schema_and_args(rng: random.Random, n_params: int):
    """Raw schema with n_params params (mixed required/optional) and an argument dict.

    Required params are always filled; optional ones about half the time.
    """
    names = rng.sample([f"p{i}" for i in range(20)], n_params)
    params = [ParamSpec(n, required=rng.random() < 0.5) for n in names]
    args = {}
    for p in params:
        if p.required or rng.random() < 0.5:
            args[p.name] = random_value(rng)
    fname = "fn_" + "".join(rng.choice("abcdefghij") for _ in range(rng.randint(1, 12)))
    return ToolSchema(fname, tuple(params)), args


def expected_slots(raw: ToolSchema, args: dict) -> list:
    """Slot order worked out independently: required as listed, then optional by name."""
    req = [p.name for p in raw.params if p.required]
    opt = sorted(p.name for p in raw.params if not p.required)
    return [args.get(n) for n in req + opt]


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=int):
        ok, text = results[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {text}")
