import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from strat_lab.errors import ParseError, ValidationError
from strat_lab.harness import (
    CSV_HEADER,
    ReportRow,
    Task,
    emit_report,
    parse_config,
    parse_report,
    run_sweep,
    run_task,
)

MINIMAL = """
[params]
nu = 1e-2
kappa = 1e-2
beta = 1
[ic]
u2 = 0, 1, 1
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.scenario_id == "scenario"
    assert cfg.modes == ((1, 0),)
    assert cfg.eta_samples == (0.0,)
    assert cfg.checks == ("envelopes", "divergence")
    assert cfg.integrator.method == "integrating_factor"
    assert cfg.integrator.rel_tol == 1e-9
    assert cfg.grid.cutoff == 24 and cfg.grid.nodes.size == 256
    assert (-1, 0) in cfg.ic.profiles  # conjugate partner added
    assert cfg.warnings == ()


def test_gate_disables_theorem_checks():
    text = MINIMAL.replace("beta = 1", "beta = 0.4") + "[checks]\nenabled = theorem1, envelopes, divergence\n"
    cfg = parse_config(text)
    assert cfg.checks == ("divergence",)
    assert any("theorem1" in w for w in cfg.warnings)
    asym = MINIMAL.replace("kappa = 1e-2", "kappa = 4e-2") + "[checks]\nenabled = theorem1\n"
    cfg = parse_config(asym + "")
    assert cfg.checks == ()


def test_malformed_numeric_cites_line():
    text = MINIMAL.replace("kappa = 1e-2", "kappa = 1e-2z")
    with pytest.raises(ParseError) as err:
        parse_config(text)
    assert err.value.line == 4 and "line 4" in str(err.value)


@pytest.mark.parametrize("text,line", [
    ("[params\nnu = 1\n", 1),
    ("nu = 1\n", 1),
    ("[params]\nnu 1\n", 2),
    ("[params]\nnu = 1\n[params]\n", 3),
    ("[params]\nnu=1\nkappa=1\nbeta=1\n[modes]\nk = 1.5\n", 6),
    ("[params]\nnu=1\nkappa=1\nbeta=1\n[modes]\npairs = 1:0:2\n", 6),
])
def test_parse_errors(text, line):
    with pytest.raises(ParseError) as err:
        parse_config(text)
    assert err.value.line == line


@pytest.mark.parametrize("text,field", [
    ("[scenario]\nid = x\n", "params"),
    ("[params]\nnu = 1\nkappa = 1\n", "params.beta"),
    ("[params]\nnu = 0\nkappa = 1\nbeta = 1\n", "params"),
    (MINIMAL + "[checks]\nenabled = bogus\n", "checks.enabled"),
    (MINIMAL.replace("[ic]", "[scenario]\nic = other\n[ic]"), "scenario.ic"),
    (MINIMAL + "[integrator]\nmethod = euler\n", "integrator"),
    (MINIMAL.replace("u2 = 0, 1, 1", "u2 = 0, -1, 1"), "ic.u2"),
    ("[scenario]\nid = a\x00b\n" + MINIMAL, "scenario.id"),
])
def test_validation_errors(text, field):
    with pytest.raises(ValidationError) as err:
        parse_config(text)
    assert err.value.field == field


def test_explicit_pairs_and_named_ic():
    text = """
[scenario]
id = demo
ic = bumps
[params]
nu = 1e-2
kappa = 1e-2
beta = 1
[modes]
pairs = 1:1, 0:2
eta = -1, 1
[bumps]
u2 = 0, 1, 1
theta = 0, 1, 0.5, 0.5
projection = false
[checks]
enabled = envelopes, liftup_baseline, hyperbolic_bounds, theorem2
theorem2_horizon = 500
"""
    cfg = parse_config(text)
    assert cfg.modes == ((1, 1), (0, 2))
    assert cfg.ic.divergence_projection is False
    assert cfg.mode_list() == [(0, 2, -1.0), (0, 2, 1.0), (1, 1, -1.0), (1, 1, 1.0)]
    rows = run_sweep(cfg, 1)
    assert [(r.mode_k, r.check) for r in rows] == [
        (0, "liftup_baseline"), (0, "hyperbolic_bounds"), (0, "liftup_baseline"), (0, "hyperbolic_bounds"),
        (1, "envelopes"), (1, "envelopes"), (None, "theorem2")]
    assert all(r.passed for r in rows)


def test_empty_mode_list_gives_header_only():
    cfg = parse_config(MINIMAL.replace("[ic]", "[modes]\nk = 0\nl = 0\n[ic]"))
    rows = run_sweep(cfg, 1)
    assert rows == []
    assert emit_report(rows) == ",".join(CSV_HEADER) + "\n"


def test_failed_task_becomes_failed_row():
    cfg = parse_config(MINIMAL + "[checks]\nenabled = energy_identity\nidentity_dt = 10\nidentity_window = 5\n")
    rows = run_sweep(cfg, 1)
    assert len(rows) == 1 and not rows[0].passed
    assert rows[0].check.startswith("energy_identity [error:")
    assert math.isnan(rows[0].statistic)


def test_isolation():
    text = MINIMAL.replace("[ic]", "[modes]\nk = 1\neta = 0, 1\n[ic]")
    base = run_sweep(parse_config(text), 1)
    broken = parse_config(text)
    tasks_ok = run_task(Task((0,), broken, "divergence", (1, 0, 1.0)))
    assert tasks_ok == base[-1]


def test_report_one_row():
    row = ReportRow("s", 1, 0, 0.5, "envelopes", 1e-12, 1e-9, True, 0.0)
    text = emit_report([row])
    assert text.count("\n") == 2
    assert text.splitlines()[0] == "scenario,mode_k,mode_l,eta,check,statistic,threshold,pass,wall_ms"
    assert parse_report(text) == [row]


doubles = st.floats(allow_nan=False, width=64)
ascii_controls = "".join(map(chr, range(32))) + "\x7f"
names = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters=ascii_controls),
                min_size=1, max_size=8)


@given(st.lists(st.tuples(names, st.one_of(st.none(), st.integers(-9, 9)),
                          st.one_of(st.none(), doubles), doubles, doubles, st.booleans(),
                          st.floats(0, 1e6))))
def test_report_round_trip(items):
    rows = [ReportRow(name, k, k, eta, "check,with comma", stat, thr, ok, wall)
            for name, k, eta, stat, thr, ok, wall in items]
    for fmt in ("csv", "jsonl"):
        back = parse_report(emit_report(rows, fmt), fmt)
        assert back == rows
        for a, b in zip(rows, back):
            assert struct.pack("d", a.statistic) == struct.pack("d", b.statistic)


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_control_characters_rejected(fmt):
    with pytest.raises(ValueError, match="control characters"):
        emit_report([ReportRow("a\x00b", 1, 0, 0.0, "c", 0.0, 1.0, True)], fmt)


def test_error_text_is_single_line():
    cfg = parse_config(MINIMAL)

    def boom(*args):
        raise RuntimeError("first\nsecond\x00third")

    from strat_lab import harness
    original = harness._PER_MODE["divergence"]
    harness._PER_MODE["divergence"] = boom
    try:
        row = run_task(Task((0,), cfg, "divergence", (1, 0, 0.0)))
    finally:
        harness._PER_MODE["divergence"] = original
    assert row.check == "divergence [error: RuntimeError: first second?third]"
    assert parse_report(emit_report([row]))[0].check == row.check


def test_non_finite_round_trip():
    rows = [ReportRow("s", None, None, None, "x", v, 1.0, False) for v in (math.inf, -math.inf)]
    for fmt in ("csv", "jsonl"):
        assert parse_report(emit_report(rows, fmt), fmt) == rows
    nan_row = ReportRow("s", None, None, None, "x", math.nan, 1.0, False)
    assert math.isnan(parse_report(emit_report([nan_row], "jsonl"), "jsonl")[0].statistic)


def test_seventeen_significant_digits():
    text = emit_report([ReportRow("s", 1, 1, 0.1, "c", 1 / 3, 0.1, True)])
    assert "0.33333333333333331" in text and "0.10000000000000001" in text


def test_determinism_across_workers():
    text = MINIMAL.replace("[ic]", "[modes]\nk = 1, 2\nl = 0, 1\neta = -1, 0, 2\n[ic]")
    cfg = parse_config(text + "[checks]\nenabled = envelopes, divergence, theorem1\n")
    outputs = {w: emit_report(run_sweep(cfg, w)) for w in (1, 2)}
    assert outputs[1] == outputs[2]
    assert emit_report(run_sweep(cfg, 1)) == outputs[1]


def test_timings_opt_in():
    rows = run_sweep(parse_config(MINIMAL), 1, record_timing=True)
    assert all(r.wall_ms > 0 for r in rows)
    assert all(r.wall_ms == 0 for r in run_sweep(parse_config(MINIMAL), 1))
