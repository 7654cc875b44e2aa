import json
from pathlib import Path

import pytest

from stool import harness
from stool.backends import CostModel
from stool.errors import ConfigError, MissingField, ParseError, StoolError
from stool.harness import (
    LATENCY_COLUMNS,
    RunConfig,
    build_prompt,
    check_report,
    csv_tables,
    decompose_dataset,
    dump_dataset,
    emit_report,
    load_config,
    load_dataset,
    load_report,
    run_eval,
)

HERE = Path(__file__).parent
TINY = HERE / "data" / "tiny.jsonl"
ORACLE_CFG = HERE / "data" / "oracle.json"
GOLDEN = HERE / "golden"


@pytest.fixture(scope="module")
def tiny_report():
    return run_eval(load_config(ORACLE_CFG), load_dataset(TINY))


# ------------------------------------------------------------------ dataset

def test_bundled_fixture_counts():
    ds = load_dataset("bundled:mobile_mini.jsonl")
    assert len(ds) == 24
    assert sum(len(d["calls"]) >= 2 for d in ds) == 6
    assert len({d["id"] for d in ds}) == 24


def test_empty_file(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_text("")
    assert load_dataset(p) == []


def test_malformed_line(tmp_path):
    lines = dump_dataset(load_dataset(TINY)[:2]).splitlines()
    p = tmp_path / "bad.jsonl"
    p.write_text("\n".join(lines + ["{not json"]) + "\n")
    with pytest.raises(ParseError) as ei:
        load_dataset(p)
    assert ei.value.line == 3


def test_missing_field(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text(json.dumps({"id": "x", "query": "q", "tools": []}) + "\n")
    with pytest.raises(MissingField) as ei:
        load_dataset(p)
    assert ei.value.name == "calls"


def test_dataset_round_trip(tmp_path):
    ds = load_dataset("bundled:mobile_mini.jsonl")
    ds[0]["custom_field"] = {"kept": True}
    p = tmp_path / "rt.jsonl"
    p.write_text(dump_dataset(ds))
    assert load_dataset(p) == ds


def test_prompt_layout():
    e = decompose_dataset(load_dataset(TINY))[1]
    text = build_prompt(e)
    lines = text.splitlines()
    assert lines[0].startswith("Tools: [")
    assert lines[1:3] == ["History:", "-> turn_on_flashlight()"]
    assert lines[3].startswith("User: Turn on my flashlight")
    assert text.endswith("\n")


# ------------------------------------------------------------------ config

def test_config_defaults():
    c = RunConfig()
    assert c.overhead_factor == 1.082
    assert c.heads == ["function"] + [f"arg{k}" for k in range(1, 7)]
    assert c.cost == CostModel()


def test_config_rejects_unknown(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"backend": {"kind": "gpt"}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"cost": {"t_mem": -1}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"backend": {"kind": "ngram", "corpus": "missing.txt"}}, base_dir=tmp_path)
    p = tmp_path / "c.json"
    p.write_text("{oops")
    with pytest.raises(ConfigError):
        load_config(p)


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv("STOOL_SEED", "17")
    assert RunConfig.from_dict({"seed": 3}).seed == 17


def test_bundled_configs_load():
    for name in ("oracle_config.json", "ngram_config.json"):
        load_config(f"bundled:{name}")


# ------------------------------------------------------------------ evaluation

def test_oracle_accuracy(tiny_report):
    assert tiny_report.accuracy == {"overall": 1.0, "function": 1.0, "group": 1.0, "entries": 4, "groups": 3}
    assert tiny_report.baseline_accuracy["overall"] == 1.0


def test_speedup_matches_formula(tiny_report):
    cfg = load_config(ORACLE_CFG)
    for r in tiny_report.entries:
        T_p = r["prompt_tokens"] * cfg.cost.t_prefill_per_token
        t_d = cfg.cost.t_mem
        expect = (T_p + r["baseline"]["N"] * t_d) / (T_p + r["parallel"]["N_bottleneck"] * t_d * cfg.overhead_factor)
        assert r["speedup"] == pytest.approx(expect, rel=1e-12)
        assert r["parallel"]["forward_passes"] == r["parallel"]["N_bottleneck"]


def test_compression_counts_only_both_correct():
    cfg = load_config(ORACLE_CFG)
    rep = run_eval(cfg, load_dataset(TINY))
    d = rep.to_dict()
    d["entries"][0]["parallel"]["overall_correct"] = False
    agg = harness.aggregate_records(d["entries"])
    assert agg["compression"]["count"] == 3
    assert d["entries"][0]["id"] not in {s["id"] for s in agg["compression"]["samples"]}


def test_report_self_consistent(tiny_report):
    assert check_report(tiny_report) == []
    bad = tiny_report.to_dict()
    bad["accuracy"] = dict(bad["accuracy"], overall=0.5)
    assert check_report(bad) == ["accuracy"]


def test_report_deterministic(tmp_path):
    cfg = load_config(ORACLE_CFG)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    emit_report(run_eval(cfg, load_dataset(TINY)), a)
    emit_report(run_eval(cfg, load_dataset(TINY)), b)
    assert a.read_bytes() == b.read_bytes()


def test_json_round_trip(tmp_path, tiny_report):
    p = tmp_path / "r.json"
    emit_report(tiny_report, p)
    back = load_report(p)
    assert back.to_dict() == json.loads(json.dumps(tiny_report.to_dict()))


def test_load_report_verifies(tmp_path, tiny_report):
    d = tiny_report.to_dict()
    d["latency"]["speedup"]["P50"] = 99.0
    p = tmp_path / "r.json"
    p.write_text(json.dumps(d))
    with pytest.raises(StoolError):
        load_report(p)
    assert load_report(p, verify=False).latency["speedup"]["P50"] == 99.0


@pytest.mark.parametrize("section", ["latency", "entries", "compression", "efficiency"])
def test_csv_golden(tmp_path, tiny_report, section):
    emit_report(tiny_report, tmp_path / "tiny.json", "csv")
    got = (tmp_path / f"tiny_{section}.csv").read_text()
    assert got == (GOLDEN / f"tiny_{section}.csv").read_text()


def test_csv_latency_header(tiny_report):
    assert csv_tables(tiny_report)["latency"].splitlines()[0] == ",".join(LATENCY_COLUMNS)


def test_empty_report_headers_only():
    empty = harness.EvalReport()
    for text in csv_tables(empty).values():
        assert text.count("\n") == 1


def test_wrong_oracle_prompt_collision():
    ds = load_dataset(TINY)
    dup = json.loads(json.dumps(ds[1]))
    dup["id"] = "clone"
    dup["calls"][0]["arguments"] = {}
    dup["calls"][0]["name"] = "turn_off_flashlight"
    with pytest.raises(ConfigError):
        run_eval(RunConfig(), [ds[1], dup])


def test_ngram_run_scores_errors_as_wrong():
    cfg = load_config("bundled:ngram_config.json")
    cfg.speculation_depth = None
    rep = run_eval(cfg, load_dataset(TINY))
    assert check_report(rep) == []
    for r in rep.entries:
        assert r["parallel"]["forward_passes"] == r["parallel"]["N_bottleneck"]
        assert r["parallel"]["overall_correct"] in (True, False)


def test_speculative_section():
    cfg = load_config("bundled:ngram_config.json")
    rep = run_eval(cfg, load_dataset(TINY))
    s = rep.speculative
    assert s["exact"] is True
    assert 0 < s["accept_rate"] <= 1
    assert s["forward_reduction"] >= 1


def test_oracle_speculation_is_perfect():
    cfg = load_config(ORACLE_CFG)
    cfg.speculation_depth = 4
    rep = run_eval(cfg, load_dataset(TINY))
    assert rep.speculative["accept_rate"] == 1.0 and rep.speculative["exact"]


def test_wallclock_mode_adds_wall_stats():
    cfg = load_config(ORACLE_CFG)
    cfg.timing = "wallclock"
    cfg.batches = None
    rep = run_eval(cfg, load_dataset(TINY))
    assert "wall_baseline_ms" in rep.latency
    assert check_report(rep) == []


def test_scripted_backend_from_file(tmp_path):
    ds = load_dataset(TINY)[1:2]  # ma-002, single call
    entry = decompose_dataset(ds)[0]
    prompt = build_prompt(entry)
    items = [{"prompt": prompt, "head": None, "target": '{"name":"turn_on_flashlight","arguments":{}}'}]
    items.append({"prompt": prompt, "head": "function", "target": "turn_on_flashlight</function>"})
    items += [{"prompt": prompt, "head": f"arg{k}", "target": "<|null|>"} for k in range(1, 7)]
    (tmp_path / "script.json").write_text(json.dumps(items))
    cfg = RunConfig.from_dict({"backend": {"kind": "scripted", "script": "script.json"}}, base_dir=tmp_path)
    rep = run_eval(cfg, ds)
    assert rep.accuracy["overall"] == 1.0
