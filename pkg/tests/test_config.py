from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from eprlab.config import ConfigError, ConfigFile, load_config, parse_config, render
from eprlab.harness import ScheduleKind
from eprlab.model import ALL_PAIRS, SettingPair
from eprlab.oracle import PcMode
from eprlab.strategies import Kind

from conftest import CONFIGS

MINIMAL = """\
version: 1
run:
  schedule: MERMIN_TWO_PAIR
  L: 10
  seed: 1
strategy:
  kind: DETERMINISTIC_SET
  set: GGR
"""


def errors_of(text: str) -> list[str]:
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.errors


def test_minimal_config_parses():
    cfg = parse_config(MINIMAL)
    assert cfg.run.schedule_kind is ScheduleKind.MERMIN_TWO_PAIR
    assert cfg.run.L == 10 and cfg.run.seed == 1
    assert cfg.strategy.kind is Kind.DETERMINISTIC_SET
    assert cfg.pair_weights == {SettingPair.parse("11"): Fraction(1, 2), SettingPair.parse("12"): Fraction(1, 2)}
    assert len(cfg.run.schedule()) == 20


def test_pair_weights_not_summing_to_one():
    errs = errors_of(MINIMAL.replace("  seed: 1\n", "  seed: 1\n  pair_weights: {'11': 0.5, '12': 0.4}\n"))
    assert len(errs) == 1
    assert "run.pair_weights" in errs[0] and "0.9" in errs[0] and errs[0].startswith("line 6")


def test_realized_delayed_oracle_is_cross_field_error():
    text = MINIMAL + "oracle: {T: 3, pc_mode: REALIZED, choice_mode: DELAYED_CHOICE}\n"
    errs = errors_of(text)
    assert any("oracle" in e and "FIXED_SCHEDULE" in e for e in errs)


def test_unknown_keys_rejected():
    errs = errors_of(MINIMAL + "colour: blue\n")
    assert errs == ["line 9: colour: unknown key"]
    errs = errors_of(MINIMAL.replace("  seed: 1\n", "  seed: 1\n  delayed: true\n"))
    assert errs[0].startswith("line 6: run.delayed: unknown key")


def test_all_errors_reported_with_lines():
    text = """\
version: 2
run:
  schedule: SOMETIMES
  L: -3
  seed: x
strategy:
  kind: DETERMINISTIC_SET
  set: GGQ
"""
    errs = errors_of(text)
    assert len(errs) == 5
    assert [e.split(":")[0] for e in errs] == sorted(
        (e.split(":")[0] for e in errs), key=lambda s: int(s.split()[1])
    )
    joined = "\n".join(errs)
    for frag in ("line 1: version", "line 3: run.schedule", "line 4: run.L", "line 5: run.seed", "line 8: strategy.set"):
        assert frag in joined


def test_missing_required_fields():
    errs = errors_of("version: 1\nrun: {schedule: ALL_NINE_UNIFORM}\n")
    joined = "\n".join(errs)
    assert "'L'" in joined and "'seed'" in joined and "'strategy'" in joined


def test_seed_is_mandatory():
    errs = errors_of(MINIMAL.replace("  seed: 1\n", ""))
    assert any("'seed'" in e for e in errs)


def test_invalid_yaml_and_empty():
    assert errors_of("run: [unclosed")[0].startswith("invalid YAML")
    assert errors_of("") == ["empty configuration"]


def test_custom_schedule_entries():
    text = MINIMAL.replace("MERMIN_TWO_PAIR", "CUSTOM") + ""
    assert any("entries" in e for e in errors_of(text))
    ok = text.replace("  seed: 1\n", "  seed: 1\n  entries: [[4, '11'], [2, '12']]\n").replace("L: 10", "L: 1")
    cfg = parse_config(ok)
    assert cfg.run.schedule().ticks.tolist() == [2, 4]


def test_time_dependent_needs_tables_or_stochastic():
    text = MINIMAL.replace("  kind: DETERMINISTIC_SET\n  set: GGR\n", "  kind: TIME_DEPENDENT\n  response: [G, R]\n")
    assert any("exactly one of" in e for e in errors_of(text))


def test_bundled_configs_load_and_round_trip():
    for path in sorted(Path(CONFIGS).glob("*.yaml")):
        cfg = load_config(path)
        assert parse_config(render(cfg)) == cfg, path.name


def test_oracle_block_list_and_all_nine():
    cfg = load_config(Path(CONFIGS) / "oracle.yaml")
    assert len(cfg.oracle) == 5
    assert cfg.oracle[0].pc_mode is PcMode.REALIZED and len(cfg.oracle[0].schedule) == 9


# round-trip property over generated configurations

set_text = st.text("GR", min_size=3, max_size=3)


@st.composite
def strategy_blocks(draw):
    kind = draw(st.sampled_from(list(Kind)))
    if kind is Kind.DETERMINISTIC_SET:
        return {"kind": kind.value, "set": draw(set_text)}
    if kind is Kind.MIXED_SET:
        return {"kind": kind.value, "sets": draw(st.lists(set_text, min_size=8, max_size=8))}
    if kind is Kind.BELL_STATIC:
        return {
            "kind": kind.value,
            "station1": draw(st.lists(set_text, min_size=1, max_size=8)),
            "station2": draw(st.lists(set_text, min_size=1, max_size=8)),
        }
    if kind is Kind.TIME_DEPENDENT:
        period = draw(st.integers(1, 4))
        n_ids = draw(st.integers(1, 4))
        table = st.lists(st.integers(0, n_ids - 1), min_size=period, max_size=period)
        station = {x: draw(table) for x in ("1", "2", "3")}
        return {
            "kind": kind.value,
            "period": period,
            "tables": {"station1": station, "station2": draw(st.sampled_from(["mirror", station]))},
            "response": [draw(st.text("GR", min_size=8, max_size=8)) for _ in range(n_ids)],
        }
    return {"kind": kind.value, "cross_setting_agree": draw(st.sampled_from([0.25, 0.5, 0.0]))}


@st.composite
def config_docs(draw):
    import yaml

    run = {
        "schedule": draw(st.sampled_from(["MERMIN_TWO_PAIR", "ALL_NINE_UNIFORM"])),
        "L": draw(st.integers(1, 10**6)),
        "seed": draw(st.integers(0, 2**64 - 1)),
        "delayed_choice": draw(st.booleans()),
        "clock_offsets": draw(st.lists(st.integers(0, 1000), min_size=2, max_size=2)),
        "alpha": draw(st.sampled_from([0.05, 0.01, 0.1])),
        "workers": draw(st.integers(1, 8)),
    }
    if draw(st.booleans()):
        run["source"] = {"K": draw(st.integers(1, 16))}
    doc = {"version": 1, "run": run, "strategy": draw(strategy_blocks())}
    if draw(st.booleans()):
        doc["oracle"] = [{"T": draw(st.integers(1, 12)), "pc_mode": "COUNTERFACTUAL", "choice_mode": "DELAYED_CHOICE"}]
    if draw(st.booleans()):
        doc["outputs"] = {"dir": "o", "csv": "f.csv"}
    return yaml.safe_dump(doc)


@settings(max_examples=60, deadline=None)
@given(config_docs())
def test_render_parse_round_trip(text):
    cfg = parse_config(text)
    again = parse_config(render(cfg))
    assert isinstance(again, ConfigFile) and again == cfg
    assert render(again) == render(cfg)
