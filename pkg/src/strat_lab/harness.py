"""Scenario configuration, parallel sweeps and report serialization.

A scenario is described in a flat text format: ``[section]`` headers,
``key = value`` lines, comma-separated numeric lists and ``#`` comments.
See ``docs/config_format.md`` for the full annotated reference.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ParseError, ValidationError
from .nonzero import (
    IntegratorConfig,
    check_energy_identity,
    divergence_drift,
    envelope_violations,
    integrate_mode,
)
from .pipeline import (
    FIELDS,
    EtaGrid,
    GaussianProfile,
    InitialConditionSpec,
    run_theorem1,
    run_theorem2,
    sample_fields,
)
from .streaks import StreakState, hyperbolic_bounds_check, kernel_params, liftup_baseline
from .symbols import ModeIndex, PhysParams
from .symmetrization import NonzeroModeState, q_from_u2

log = logging.getLogger(__name__)

CHECKS = ("energy_identity", "envelopes", "divergence", "theorem1", "theorem2",
          "liftup_baseline", "hyperbolic_bounds")
PER_MODE_CHECKS = {"energy_identity", "envelopes", "divergence", "liftup_baseline", "hyperbolic_bounds"}
CSV_HEADER = ("scenario", "mode_k", "mode_l", "eta", "check", "statistic", "threshold", "pass", "wall_ms")

THRESHOLDS = {
    "energy_identity": 1e-4,
    "envelopes": 1e-9,
    "divergence": 1e-8,
    "liftup_baseline": 1e-2,
    "hyperbolic_bounds": 0.0,
}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str
    params: PhysParams
    modes: Tuple[Tuple[int, int], ...]
    eta_samples: Tuple[float, ...]
    grid: EtaGrid
    ic: InitialConditionSpec
    integrator: IntegratorConfig
    checks: Tuple[str, ...]
    identity_window: float = 5.0
    identity_dt: float = 1e-3
    theorem1_bound: float = 1.0
    theorem2_bound: float = 1.0
    theorem2_horizon: Optional[float] = None
    warnings: Tuple[str, ...] = ()

    def mode_list(self) -> List[Tuple[int, int, float]]:
        out = []
        for k, l in self.modes:
            for eta in self.eta_samples:
                if k == 0 and l == 0 and eta == 0:
                    continue
                out.append((k, l, float(eta)))
        return sorted(out)


# --- parsing ----------------------------------------------------------------

def _split_sections(text: str) -> Dict[str, Dict[str, Tuple[str, int]]]:
    sections: Dict[str, Dict[str, Tuple[str, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ParseError(f"malformed section header {raw.strip()!r}", lineno)
            current = line[1:-1].strip()
            if current in sections:
                raise ParseError(f"duplicate section [{current}]", lineno)
            sections[current] = {}
            continue
        if current is None:
            raise ParseError("key outside of any section", lineno)
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        sections[current][key] = (value, lineno)
    return sections


class _Section:
    def __init__(self, name, entries):
        self.name = name
        self.entries = entries

    def _get(self, key):
        return self.entries.get(key, (None, None))

    def float(self, key, default=None):
        value, line = self._get(key)
        if value is None or value == "":
            return default
        try:
            return float(value)
        except ValueError:
            raise ParseError(f"{self.name}.{key}: not a number: {value!r}", line) from None

    def floats(self, key, default=None):
        value, line = self._get(key)
        if value is None or value == "":
            return default
        try:
            return tuple(float(v) for v in value.split(","))
        except ValueError:
            raise ParseError(f"{self.name}.{key}: malformed numeric list {value!r}", line) from None

    def ints(self, key, default=None):
        vals = self.floats(key, None)
        if vals is None:
            return default
        if any(v != int(v) for v in vals):
            raise ParseError(f"{self.name}.{key}: wavenumbers must be integers", self.entries[key][1])
        return tuple(int(v) for v in vals)

    def str(self, key, default=None):
        value, _ = self._get(key)
        return default if value is None or value == "" else value

    def bool(self, key, default=False):
        value, line = self._get(key)
        if value is None or value == "":
            return default
        if value.lower() in ("true", "yes", "on", "1"):
            return True
        if value.lower() in ("false", "no", "off", "0"):
            return False
        raise ParseError(f"{self.name}.{key}: expected a boolean, got {value!r}", line)


def _profile(section: _Section, name: str) -> Optional[GaussianProfile]:
    vals = section.floats(name)
    if vals is None:
        return None
    if len(vals) not in (3, 4):
        raise ParseError(f"{section.name}.{name}: expected 'center, width, re[, im]'",
                         section.entries[name][1])
    centre, width, re = vals[:3]
    im = vals[3] if len(vals) == 4 else 0.0
    if not width > 0:
        raise ValidationError(f"{section.name}.{name}", "width must be positive")
    return GaussianProfile(centre, width, complex(re, im))


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario description.

    Parameter gates are evaluated eagerly; checks whose hypotheses fail are
    dropped with a warning rather than rejected, so exploratory runs outside
    the admissible range still execute.
    """
    raw = _split_sections(text)
    sec = {name: _Section(name, entries) for name, entries in raw.items()}
    empty = lambda name: _Section(name, {})
    scen = sec.get("scenario", empty("scenario"))

    if "params" not in sec:
        raise ValidationError("params", "section [params] is required")
    p = sec["params"]
    nu, kappa, beta = p.float("nu"), p.float("kappa"), p.float("beta")
    for key, value in (("nu", nu), ("kappa", kappa), ("beta", beta)):
        if value is None:
            raise ValidationError(f"params.{key}", "missing")
    if not (nu > 0 and kappa > 0):
        raise ValidationError("params", "nu and kappa must be positive")
    if beta < 0:
        raise ValidationError("params.beta", "must be non-negative")
    params = PhysParams(nu, kappa, beta)

    m = sec.get("modes", empty("modes"))
    pairs = m.str("pairs")
    if pairs is not None:
        try:
            modes = tuple(tuple(int(x) for x in item.split(":")) for item in pairs.split(","))
        except ValueError:
            raise ParseError(f"modes.pairs: expected 'k:l, k:l, ...', got {pairs!r}",
                             m.entries["pairs"][1]) from None
        if any(len(pr) != 2 for pr in modes):
            raise ParseError("modes.pairs: each entry must be 'k:l'", m.entries["pairs"][1])
    else:
        modes = tuple((k, l) for k in m.ints("k", (1,)) for l in m.ints("l", (0,)))
    eta_samples = m.floats("eta", (0.0,))

    g = sec.get("grid", empty("grid"))
    cutoff = g.float("cutoff", 24.0)
    panels = int(g.float("panels", 16))
    order = int(g.float("order", 16))
    if not (cutoff > 0 and panels > 0 and order > 0):
        raise ValidationError("grid", "cutoff, panels and order must be positive")
    grid = EtaGrid.gauss_legendre(cutoff, panels, order)

    ic_name = scen.str("ic", "ic")
    if ic_name not in sec:
        raise ValidationError("scenario.ic", f"section [{ic_name}] not found")
    ic_sec = sec[ic_name]
    profiles = {name: prof for name in FIELDS if (prof := _profile(ic_sec, name)) is not None}
    ic = InitialConditionSpec.real_field({mode: profiles for mode in modes},
                                         ic_sec.bool("projection", True))

    i = sec.get("integrator", empty("integrator"))
    try:
        integrator = IntegratorConfig(
            rel_tol=i.float("rel_tol", 1e-9), abs_tol=i.float("abs_tol", 1e-12),
            max_step=i.float("max_step", 1.0), t_end=i.float("t_end"),
            sample_dt=i.float("sample_dt"), method=i.str("method", "integrating_factor"))
    except ValueError as exc:
        raise ValidationError("integrator", str(exc)) from None

    c = sec.get("checks", empty("checks"))
    enabled = c.str("enabled", "envelopes, divergence")
    checks = tuple(name.strip() for name in enabled.split(",") if name.strip())
    unknown = [name for name in checks if name not in CHECKS]
    if unknown:
        raise ValidationError("checks.enabled", f"unknown checks {unknown}")
    if not checks:
        raise ValidationError("checks.enabled", "at least one check must be enabled")

    warnings = []
    gated = {
        "theorem1": params.theorem1_applicable,
        "envelopes": params.theorem1_applicable,
        "energy_identity": beta > 0.5,
        "theorem2": beta > 0,
        "hyperbolic_bounds": beta > 0,
    }
    kept = []
    for name in checks:
        if not gated.get(name, True):
            msg = f"check {name} disabled: parameters (nu={nu:g}, kappa={kappa:g}, beta={beta:g}) outside its range"
            warnings.append(msg)
            log.warning(msg)
            continue
        kept.append(name)

    scenario_id = scen.str("id", "scenario")
    if _has_control(scenario_id):
        raise ValidationError("scenario.id", "must not contain control characters")

    return ScenarioConfig(
        scenario_id=scenario_id,
        params=params, modes=modes, eta_samples=eta_samples, grid=grid, ic=ic,
        integrator=integrator, checks=tuple(kept),
        identity_window=c.float("identity_window", 5.0),
        identity_dt=c.float("identity_dt", 1e-3),
        theorem1_bound=c.float("theorem1_bound", 1.0),
        theorem2_bound=c.float("theorem2_bound", 1.0),
        theorem2_horizon=c.float("theorem2_horizon"),
        warnings=tuple(warnings),
    )


# --- report rows ------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    """One line of a sweep report; failures carry their error text in ``check``."""

    scenario: str
    mode_k: Optional[int]
    mode_l: Optional[int]
    eta: Optional[float]
    check: str
    statistic: float
    threshold: float
    passed: bool
    wall_ms: float = 0.0


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _has_control(text: str) -> bool:
    return any(ord(ch) < 32 or ord(ch) == 127 for ch in text)


def _check_text(row: "ReportRow"):
    # control characters do not survive csv round trips (NUL cannot be written at all)
    for name in ("scenario", "check"):
        if _has_control(getattr(row, name)):
            raise ValueError(f"report field {name!r} contains control characters: {getattr(row, name)!r}")


def _row_values(row: ReportRow):
    _check_text(row)
    return (
        row.scenario,
        "" if row.mode_k is None else str(row.mode_k),
        "" if row.mode_l is None else str(row.mode_l),
        "" if row.eta is None else _fmt(row.eta),
        row.check,
        _fmt(row.statistic),
        _fmt(row.threshold),
        "true" if row.passed else "false",
        _fmt(row.wall_ms),
    )


def _json_number(x):
    return float(x) if math.isfinite(x) else _fmt(x)


def emit_report(rows: Iterable[ReportRow], fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(_row_values(row))
        return buf.getvalue()
    if fmt == "jsonl":
        lines = []
        for row in rows:
            obj = dict(zip(CSV_HEADER, _row_values(row)))
            obj["mode_k"], obj["mode_l"] = row.mode_k, row.mode_l
            obj["pass"] = row.passed
            lines.append(json.dumps(obj, separators=(",", ":")))
        return "".join(line + "\n" for line in lines)
    raise ValueError(f"unknown format {fmt!r}")


def _parse_opt_int(s):
    return None if s in ("", None) else int(s)


def _parse_opt_float(s):
    return None if s in ("", None) else float(s)


def parse_report(text: str, fmt: str = "csv") -> List[ReportRow]:
    """Inverse of :func:`emit_report`."""
    rows = []
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ParseError(f"unexpected report header {header}", 1)
        for rec in reader:
            rows.append(ReportRow(rec[0], _parse_opt_int(rec[1]), _parse_opt_int(rec[2]),
                                  _parse_opt_float(rec[3]), rec[4], float(rec[5]), float(rec[6]),
                                  rec[7] == "true", float(rec[8])))
        return rows
    if fmt == "jsonl":
        for line in text.splitlines():
            if not line.strip():
                continue
            o = json.loads(line)
            rows.append(ReportRow(o["scenario"], o["mode_k"], o["mode_l"], _parse_opt_float(o["eta"]),
                                  o["check"], float(o["statistic"]), float(o["threshold"]),
                                  bool(o["pass"]), float(o["wall_ms"])))
        return rows
    raise ValueError(f"unknown format {fmt!r}")


# --- tasks ------------------------------------------------------------------

@dataclass(frozen=True)
class Task:
    order: Tuple
    config: ScenarioConfig
    check: str
    mode: Optional[Tuple[int, int, float]] = None


def _nonzero_initial(config: ScenarioConfig, k, l, eta):
    f = sample_fields(config.ic, k, l, np.array([eta]))
    mode = ModeIndex(k, l, eta)
    state = NonzeroModeState(complex(q_from_u2(f["u2"][0], 0.0, mode)), complex(f["theta"][0]),
                             complex(f["u1"][0]), complex(f["u3"][0]))
    # per-mode statistics are scale-invariant; unit amplitude keeps abs_tol meaningful
    amp = float(np.max(np.abs(state.as_array())))
    if amp > 0:
        state = state.scaled(1.0 / amp)
    return mode, state


def _check_energy_identity(config, k, l, eta):
    mode, state = _nonzero_initial(config, k, l, eta)
    cfg = replace(config.integrator, t_end=config.identity_window, sample_dt=config.identity_dt,
                  method="rk45")
    traj = integrate_mode(state, mode, config.params, cfg)
    emax = float(np.max(np.abs(traj.diagnostics["energy"])))
    if emax == 0:
        return 0.0
    return check_energy_identity(traj) / emax


def _check_envelopes(config, k, l, eta):
    mode, state = _nonzero_initial(config, k, l, eta)
    traj = integrate_mode(state, mode, config.params, config.integrator)
    return max(envelope_violations(traj).values())


def _check_divergence(config, k, l, eta):
    mode, state = _nonzero_initial(config, k, l, eta)
    traj = integrate_mode(state, mode, config.params, config.integrator)
    return divergence_drift(traj)


def liftup_peak(nu: float, eta: float, l: int, n: int = 20001):
    """Sampled ``max_t |u1(t)|`` of the unstratified streak with ``u2(0) = 1``."""
    d = eta * eta + l * l
    t_peak = 1.0 / (nu * d)
    t = np.linspace(0.0, 5.0 * t_peak, n)
    sol = liftup_baseline(StreakState(0.0, 1.0, 0.0, 0.0), t, nu, eta, l)
    return float(np.max(np.abs(sol.u1))), 1.0 / (math.e * nu * d)


def _check_liftup(config, k, l, eta):
    peak, exact = liftup_peak(config.params.nu, eta, l)
    return abs(peak - exact) / exact


def hyperbolic_samples(kp, n: int = 20001):
    """Times through 100 characteristic times ``1/min(a, b)`` (``1/b`` when ``a = 0``)."""
    rate = min(kp.a, kp.b) if kp.a > 0 else kp.b
    return np.linspace(0.0, 100.0 / rate, n)


def _check_hyperbolic(config, k, l, eta):
    kp = kernel_params(config.params, eta, l)
    return hyperbolic_bounds_check(kp, hyperbolic_samples(kp))


def _check_theorem1(config):
    spec = config.ic.restricted(lambda k, l: k != 0)
    if not spec.profiles:
        return 0.0
    report, _ = run_theorem1(spec, config.params, config.grid, config.integrator)
    return report.sup_ratio


def _check_theorem2(config):
    spec = config.ic.restricted(lambda k, l: k == 0)
    if not spec.profiles:
        return 0.0
    horizon = config.theorem2_horizon or 10.0 / config.params.min_diffusivity
    times = np.linspace(0.0, horizon, 4001)
    return run_theorem2(spec, config.params, config.grid, times).sup_ratio


_PER_MODE = {
    "energy_identity": _check_energy_identity,
    "envelopes": _check_envelopes,
    "divergence": _check_divergence,
    "liftup_baseline": _check_liftup,
    "hyperbolic_bounds": _check_hyperbolic,
}


def _applies(check: str, k: int, l: int) -> bool:
    if check in ("energy_identity", "envelopes", "divergence"):
        return k != 0
    if check == "liftup_baseline":
        return k == 0
    if check == "hyperbolic_bounds":
        return k == 0 and l != 0
    return False


def build_tasks(configs: Sequence[ScenarioConfig]) -> List[Task]:
    tasks = []
    for si, config in enumerate(configs):
        for ci, check in enumerate(CHECKS):
            if check not in config.checks:
                continue
            if check in PER_MODE_CHECKS:
                for k, l, eta in config.mode_list():
                    if _applies(check, k, l):
                        tasks.append(Task((si, 0, k, l, eta, ci), config, check, (k, l, eta)))
            else:
                tasks.append(Task((si, 1, 0, 0, 0.0, ci), config, check))
    return sorted(tasks, key=lambda t: t.order)


def _threshold(task: Task) -> float:
    if task.check == "theorem1":
        return task.config.theorem1_bound
    if task.check == "theorem2":
        return task.config.theorem2_bound
    return THRESHOLDS[task.check]


def run_task(task: Task, record_timing: bool = False) -> ReportRow:
    """Execute one (mode, check) unit; exceptions become failed rows."""
    k, l, eta = task.mode if task.mode else (None, None, None)
    threshold = _threshold(task)
    start = time.perf_counter()
    try:
        if task.mode is not None:
            stat = float(_PER_MODE[task.check](task.config, k, l, eta))
        elif task.check == "theorem1":
            stat = float(_check_theorem1(task.config))
        else:
            stat = float(_check_theorem2(task.config))
        check, passed = task.check, bool(math.isfinite(stat) and stat <= threshold)
    except Exception as exc:  # noqa: BLE001 - a failing task must not abort the sweep
        msg = " ".join(f"{type(exc).__name__}: {exc}".split())
        msg = "".join(ch if not _has_control(ch) else "?" for ch in msg)
        check, stat, passed = f"{task.check} [error: {msg}]", math.nan, False
    wall = (time.perf_counter() - start) * 1e3 if record_timing else 0.0
    return ReportRow(task.config.scenario_id, k, l, eta, check, stat, threshold, passed, wall)


def _run_task_untimed(task):
    return run_task(task, False)


def _run_task_timed(task):
    return run_task(task, True)


def run_sweep(config, workers: int = 1, record_timing: bool = False) -> List[ReportRow]:
    """Run every (mode, check) task of one or several scenarios.

    Rows come back ordered by (scenario, mode, check) whatever the worker
    count.  Wall times are only recorded when ``record_timing`` is set, since
    they would otherwise break byte-for-byte reproducibility of the report.
    """
    configs = [config] if isinstance(config, ScenarioConfig) else list(config)
    tasks = build_tasks(configs)
    fn = _run_task_timed if record_timing else _run_task_untimed
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def all_passed(rows: Sequence[ReportRow]) -> bool:
    return all(r.passed for r in rows)
