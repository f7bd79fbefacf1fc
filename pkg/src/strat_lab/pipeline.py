"""Spectral initial data, eta quadrature, and theorem-level norm reports.

Initial data are sums of Gaussian bumps in ``eta``, one per field and per
``(k, l)``.  The eta integral in every L^2 / H^s norm is carried out with
composite Gauss-Legendre quadrature on ``[-cutoff, cutoff]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erfc

from .errors import QuadratureError, SymmetryViolationError
from .nonzero import IntegratorConfig, Trajectory, default_t_end, integrate_mode
from .streaks import StreakState, propagate_streak
from .symbols import ModeIndex, PhysParams, RateConstants, rate_constants, symbol_p
from .symmetrization import NonzeroModeState, q_from_u2, u2_from_q

FIELDS = ("u1", "u2", "u3", "theta")
SYMMETRY_TOL = 1e-12
TRUNCATION_TOL = 1e-8


@dataclass(frozen=True)
class GaussianProfile:
    """``amplitude * exp(-(eta - center)**2 / (2 width**2))``."""

    center: float
    width: float
    amplitude: complex

    def __call__(self, eta):
        z = (np.asarray(eta, float) - self.center) / self.width
        return self.amplitude * np.exp(-0.5 * z * z)

    @property
    def l2_norm(self) -> float:
        return abs(self.amplitude) * math.sqrt(self.width * math.sqrt(math.pi))

    def tail_fraction(self, cutoff: float) -> float:
        """Fraction of the squared L^2 mass lying outside ``[-cutoff, cutoff]``."""
        return 0.5 * (erfc((cutoff - self.center) / self.width)
                      + erfc((cutoff + self.center) / self.width))

    def conjugate(self) -> "GaussianProfile":
        return GaussianProfile(-self.center, self.width, complex(self.amplitude).conjugate())


ModeProfiles = Mapping[str, GaussianProfile]


@dataclass(frozen=True)
class InitialConditionSpec:
    profiles: Mapping[Tuple[int, int], ModeProfiles]
    divergence_projection: bool = True

    @classmethod
    def real_field(cls, profiles: Mapping[Tuple[int, int], ModeProfiles],
                   divergence_projection: bool = True) -> "InitialConditionSpec":
        """Complete ``profiles`` with the conjugate bumps a real field requires."""
        full = {key: dict(v) for key, v in profiles.items()}
        for (k, l), fields in profiles.items():
            if (-k, -l) not in full:
                full[(-k, -l)] = {name: prof.conjugate() for name, prof in fields.items()}
        return cls(full, divergence_projection)

    @property
    def active_modes(self):
        return sorted(self.profiles)

    def restricted(self, predicate) -> "InitialConditionSpec":
        return replace(self, profiles={m: p for m, p in self.profiles.items() if predicate(*m)})


@dataclass(frozen=True)
class EtaGrid:
    nodes: np.ndarray
    weights: np.ndarray
    cutoff: float

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    @classmethod
    def gauss_legendre(cls, cutoff: float, panels: int = 16, order: int = 16) -> "EtaGrid":
        x, w = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(-cutoff, cutoff, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        return cls(nodes, weights, float(cutoff))

    @property
    def symmetric(self) -> bool:
        return bool(np.allclose(self.nodes, -self.nodes[::-1], rtol=0, atol=1e-13 * self.cutoff))

    def integrate(self, values) -> float:
        return float(np.sum(self.weights * values))


def project_divergence_free(k, eta, l, u1, u2, u3):
    """Remove the component of ``(u1, u2, u3)`` along ``(k, eta, l)``."""
    norm2 = k * k + eta * eta + l * l
    along = (k * u1 + eta * u2 + l * u3) / norm2
    return u1 - k * along, u2 - eta * along, u3 - l * along


def sample_fields(spec: InitialConditionSpec, k: int, l: int, eta) -> Dict[str, np.ndarray]:
    eta = np.asarray(eta, float)
    fields = spec.profiles.get((k, l), {})
    out = {name: (fields[name](eta) if name in fields else np.zeros(eta.shape, complex))
           for name in FIELDS}
    if spec.divergence_projection:
        out["u1"], out["u2"], out["u3"] = project_divergence_free(
            k, eta, l, out["u1"], out["u2"], out["u3"])
    return out


def check_conjugate_symmetry(spec: InitialConditionSpec, eta):
    eta = np.asarray(eta, float)
    for (k, l) in spec.active_modes:
        if (-k, -l) not in spec.profiles:
            raise SymmetryViolationError(f"mode ({k}, {l}) has no conjugate partner ({-k}, {-l})")
        here = sample_fields(spec, k, l, eta)
        there = sample_fields(spec, -k, -l, -eta)
        for name in FIELDS:
            gap = np.max(np.abs(there[name] - np.conj(here[name])), initial=0.0)
            scale = max(1.0, float(np.max(np.abs(here[name]), initial=0.0)))
            if gap > SYMMETRY_TOL * scale:
                raise SymmetryViolationError(
                    f"field {name} at ({k}, {l}) breaks conjugate symmetry by {gap:.3e}")


def check_truncation(spec: InitialConditionSpec, grid: EtaGrid):
    for mode, fields in spec.profiles.items():
        for name, prof in fields.items():
            frac = prof.tail_fraction(grid.cutoff)
            if frac > TRUNCATION_TOL:
                raise QuadratureError(
                    f"cutoff {grid.cutoff} drops {frac:.2e} of the mass of {name} at {mode}")


def build_modes(spec: InitialConditionSpec, grid: EtaGrid):
    """Sample the initial data on the grid, one batched entry per ``(k, l)``.

    Returns ``[(ModeIndex(k, l, grid.nodes), state), ...]`` sorted by
    ``(k, l)``; ``state`` is a :class:`NonzeroModeState` for ``k != 0`` and a
    :class:`StreakState` for ``k = 0``.
    """
    check_conjugate_symmetry(spec, grid.nodes)
    out = []
    for (k, l) in spec.active_modes:
        if k == 0 and l == 0 and np.any(grid.nodes == 0):
            raise ValueError("the eta grid contains the excluded mean mode")
        f = sample_fields(spec, k, l, grid.nodes)
        mode = ModeIndex(k, l, grid.nodes)
        if k == 0:
            state = StreakState(f["u1"], f["u2"], f["u3"], f["theta"])
        else:
            state = NonzeroModeState(q_from_u2(f["u2"], 0.0, mode), f["theta"], f["u1"], f["u3"])
        out.append((mode, state))
    return out


def hs_norm(coefficients: Mapping[Tuple[int, int], object], s: float, grid: EtaGrid) -> float:
    """Sobolev norm of spectral data sampled on ``grid.nodes``.

    ``coefficients`` maps ``(k, l)`` to one array of values, or to a sequence
    of arrays for a vector field.
    """
    total = 0.0
    for (k, l), values in coefficients.items():
        comps = [values] if isinstance(values, np.ndarray) else list(values)
        weight = (1.0 + k * k + grid.nodes**2 + l * l) ** s
        for comp in comps:
            total += grid.integrate(weight * np.abs(comp) ** 2)
    return math.sqrt(total)


def initial_norms(spec: InitialConditionSpec, grid: EtaGrid, select, orders=(0, 1, 1.5, 2, 3, 4)):
    """H^s norms of each field of the initial data restricted to ``select(k, l)``."""
    sampled = {m: sample_fields(spec, *m, grid.nodes) for m in spec.active_modes if select(*m)}
    out = {}
    for name in FIELDS:
        out[name] = {s: hs_norm({m: f[name] for m, f in sampled.items()}, s, grid) for s in orders}
    return out


def japanese_bracket(t):
    return np.sqrt(1.0 + np.asarray(t, float) ** 2)


@dataclass(frozen=True)
class NormReport:
    times: np.ndarray
    series: Mapping[str, np.ndarray]
    data_norms: Mapping[str, Mapping[float, float]]
    envelope: np.ndarray
    sup_ratio: float
    extras: Mapping[str, float] = field(default_factory=dict)


def _sup_ratio(numerator, denominator):
    if np.all(numerator == 0):
        return 0.0
    return float(np.max(numerator / denominator))


def _aligned_times(trajectories):
    times = trajectories[0].times
    for tr in trajectories[1:]:
        if tr.times.shape != times.shape or np.any(tr.times != times):
            raise ValueError("all trajectories must share their sample times")
    return times


def theorem1_report(trajectories: Sequence[Trajectory], spec: InitialConditionSpec,
                    rates: RateConstants, grid: EtaGrid) -> NormReport:
    """Aggregate nonzero-mode trajectories into the enhanced-dissipation statement.

    Each trajectory must be batched over ``grid.nodes`` (in grid order).  The
    reported ``sup_ratio`` is the smallest constant for which the weighted
    left-hand side stays below ``exp(-lam t^3/24)`` times the H^3 size of the
    data on the sampled times.
    """
    check_truncation(spec, grid)
    nonzero = lambda k, l: k != 0
    norms = initial_norms(spec, grid, nonzero)
    env_times = trajectories[0].times if trajectories else np.zeros(1)
    envelope = np.exp(-rates.lam * env_times**3 / 24.0)
    if not trajectories:
        zeros = np.zeros_like(env_times)
        return NormReport(env_times, {"u13": zeros, "u2": zeros, "theta": zeros, "lhs": zeros},
                          norms, envelope, 0.0, {"sup_ratio_minimal": 0.0})
    times = _aligned_times(trajectories)
    u13 = np.zeros_like(times)
    u2 = np.zeros_like(times)
    th = np.zeros_like(times)
    for tr in trajectories:
        t = times[:, None]
        w = grid.weights[None, :]
        u2_vals = u2_from_q(tr.states.q, t, tr.mode)
        u13 += np.sum(w * (np.abs(tr.states.u1) ** 2 + np.abs(tr.states.u3) ** 2), axis=1)
        u2 += np.sum(w * np.abs(u2_vals) ** 2, axis=1)
        th += np.sum(w * np.abs(tr.states.theta) ** 2, axis=1)
    u13, u2, th = np.sqrt(u13), np.sqrt(u2), np.sqrt(th)
    bracket = japanese_bracket(times)
    lhs = u13 + bracket**1.5 * u2 + bracket**0.5 * th
    data_h3 = math.sqrt(sum(norms[n][3] ** 2 for n in ("u1", "u2", "u3"))) + norms["theta"][3]
    sup = _sup_ratio(lhs, envelope * data_h3) if data_h3 > 0 else 0.0

    # component-wise ratios against the least regular data each estimate needs
    extras = {}
    if data_h3 > 0:
        minimal = {
            "u13": math.hypot(norms["u1"][0], norms["u3"][0]) + norms["u2"][1.5] + norms["theta"][1],
            "u2": norms["u2"][3] + norms["theta"][3],
            "theta": norms["u2"][2] + norms["theta"][1],
        }
        comp = {"u13": u13, "u2": bracket**1.5 * u2, "theta": bracket**0.5 * th}
        for name, value in comp.items():
            extras[f"ratio_{name}_minimal"] = _sup_ratio(value, envelope * minimal[name]) if minimal[name] > 0 else 0.0
            extras[f"ratio_{name}_h3"] = _sup_ratio(value, envelope * data_h3)
        extras["sup_ratio_minimal"] = max(extras[f"ratio_{n}_minimal"] for n in comp)
    else:
        extras["sup_ratio_minimal"] = 0.0
    return NormReport(times, {"u13": u13, "u2": u2, "theta": th, "lhs": lhs},
                      norms, envelope, sup, extras)


def mirror_trajectory(traj: Trajectory, grid: EtaGrid) -> Trajectory:
    """Conjugate trajectory re-indexed onto ``grid.nodes`` (requires a symmetric grid)."""
    conj = traj.conjugate()
    flip = lambda a: np.ascontiguousarray(a[:, ::-1])
    states = NonzeroModeState(*(flip(x) for x in (conj.states.q, conj.states.theta,
                                                  conj.states.u1, conj.states.u3)))
    mode = ModeIndex(conj.mode.k, conj.mode.l, grid.nodes)
    diag = {name: flip(v) for name, v in traj.diagnostics.items()}
    return Trajectory(mode, traj.params, traj.times, states, diag, traj.n_steps)


def run_theorem1(spec: InitialConditionSpec, params: PhysParams, grid: EtaGrid,
                 cfg: IntegratorConfig = IntegratorConfig(method="integrating_factor")):
    """Integrate every nonzero mode of ``spec`` on ``grid`` and build the report.

    Conjugate modes are obtained by symmetry when the grid is symmetric.
    """
    rates = rate_constants(params)
    check_truncation(spec, grid)
    modes = [(m, s) for m, s in build_modes(spec, grid) if m.k != 0]
    if cfg.t_end is None and modes:
        kmin = min(abs(m.k) for m, _ in modes)
        cfg = replace(cfg, t_end=default_t_end(params, kmin))
    done: Dict[Tuple[int, int], Trajectory] = {}
    for mode, state in modes:
        partner = (-mode.k, -mode.l)
        if partner in done and grid.symmetric:
            done[(mode.k, mode.l)] = mirror_trajectory(done[partner], grid)
        else:
            done[(mode.k, mode.l)] = integrate_mode(state, mode, params, cfg)
    trajectories = [done[key] for key in sorted(done)]
    return theorem1_report(trajectories, spec, rates, grid), trajectories


@dataclass(frozen=True)
class StreakRun:
    mode: ModeIndex
    times: np.ndarray
    states: StreakState      # fields of shape (len(times), len(nodes))


def propagate_streak_modes(spec: InitialConditionSpec, params: PhysParams, grid: EtaGrid, times):
    runs = []
    times = np.asarray(times, float)
    for mode, state in build_modes(spec, grid):
        if mode.k != 0:
            continue
        cols = {name: np.empty((times.size, grid.nodes.size), complex) for name in FIELDS}
        for j, eta in enumerate(grid.nodes):
            init = StreakState(*(getattr(state, name)[j] for name in FIELDS))
            sol = propagate_streak(init, times, params, float(eta), mode.l)
            for name in FIELDS:
                cols[name][:, j] = getattr(sol, name)
        runs.append(StreakRun(mode, times, StreakState(**cols)))
    return runs


def theorem2_report(streak_runs: Sequence[StreakRun], spec: InitialConditionSpec,
                    params: PhysParams, grid: EtaGrid) -> NormReport:
    """Aggregate streak solutions into the lift-up suppression statement.

    ``sup_ratio`` is ``sup_t exp(m t) ||(u, theta)_0(t)|| / ||(u, theta)_0(0)||_{H^4}``
    with ``m = min(nu, kappa)``.  ``extras["u1_beta_ratio"]`` compares
    ``||u1_0(t)||`` with ``||u1_0(0)||_{H^4} + (||u2_0(0)||_{H^4} + ||theta_0(0)||_{H^4}) / beta``.
    """
    check_truncation(spec, grid)
    norms = initial_norms(spec, grid, lambda k, l: k == 0)
    if not streak_runs:
        t = np.zeros(1)
        return NormReport(t, {"total": t, "u1": t}, norms, np.ones(1), 0.0, {"u1_beta_ratio": 0.0})
    times = streak_runs[0].times
    per_field = {name: np.zeros_like(times) for name in FIELDS}
    for run in streak_runs:
        for name in FIELDS:
            per_field[name] += np.sum(grid.weights[None, :] * np.abs(getattr(run.states, name)) ** 2, axis=1)
    total = np.sqrt(sum(per_field.values()))
    u1 = np.sqrt(per_field["u1"])
    m = params.min_diffusivity
    growth = np.exp(m * times)
    envelope = np.exp(-m * times)
    data_h4 = math.sqrt(sum(norms[n][4] ** 2 for n in FIELDS))
    sup = _sup_ratio(total * growth, data_h4) if data_h4 > 0 else 0.0
    extras = {}
    if params.beta > 0:
        combo = norms["u1"][4] + (norms["u2"][4] + norms["theta"][4]) / params.beta
        extras["u1_beta_ratio"] = _sup_ratio(u1 * growth, combo) if combo > 0 else 0.0
    extras["u1_sup"] = float(np.max(u1))
    extras["u1_sup_weighted"] = float(np.max(u1 * growth))
    return NormReport(times, {"total": total, "u1": u1}, norms, envelope, sup, extras)


def run_theorem2(spec: InitialConditionSpec, params: PhysParams, grid: EtaGrid, times) -> NormReport:
    return theorem2_report(propagate_streak_modes(spec, params, grid, times), spec, params, grid)
