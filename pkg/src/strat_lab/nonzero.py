"""Evolution of the ``k != 0`` Fourier modes in the moving frame.

The state of one mode is ``(q, theta, u1, u3)``.  ``q`` and ``theta`` obey a
closed 2x2 system; ``u1`` and ``u3`` are slaved to it.  This module provides
the right-hand sides, adaptive time integration, the energy functional built
on the symmetric variables, and the decay envelopes that the trajectories are
checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np
from scipy import integrate as sp_integrate

from .errors import InsufficientSamplingError
from .integrator import dopri5
from .symbols import (
    ModeIndex,
    PhysParams,
    RateConstants,
    integral_p,
    rate_constants,
    symbol_p,
    symbol_ratio,
    symbol_ratio_derivative,
)
from .symmetrization import (
    NonzeroModeState,
    SymmetricState,
    divergence_residual,
    to_symmetric,
)

METHODS = ("rk45", "integrating_factor")


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and output cadence.

    ``t_end=None`` selects three enhanced-dissipation time scales for the
    mode being integrated; ``sample_dt=None`` selects ``t_end / 400``.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = 1.0
    t_end: Optional[float] = None
    sample_dt: Optional[float] = None
    method: str = "rk45"

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.t_end is not None and not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.sample_dt is not None:
            if not self.sample_dt > 0:
                raise ValueError("sample_dt must be positive")
            if self.t_end is not None and self.sample_dt > self.t_end:
                raise ValueError("sample_dt must not exceed t_end")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    def sample_times(self, params: PhysParams, mode: ModeIndex) -> np.ndarray:
        t_end = self.t_end if self.t_end is not None else default_t_end(params, mode.k)
        dt = self.sample_dt if self.sample_dt is not None else t_end / 400
        n = max(1, int(math.ceil(t_end / dt - 1e-9)))
        return np.linspace(0.0, t_end, n + 1)


def default_t_end(params: PhysParams, k: int = 1) -> float:
    """Three e-foldings of the ``exp(-rate k^2 t^3 / 12)`` decay."""
    if params.theorem1_applicable:
        rate = rate_constants(params).lam
    else:
        rate = params.min_diffusivity
    return 3.0 * (rate * k * k / 12.0) ** (-1.0 / 3.0)


# --- right-hand sides -------------------------------------------------------

def rhs_qtheta(t, q, theta, mode: ModeIndex, params: PhysParams):
    p = symbol_p(t, mode)
    dq = params.beta * mode.kl_norm**2 * theta - params.nu * p * q
    dtheta = -params.beta * q / p - params.kappa * p * theta
    return dq, dtheta


def rhs_u1u3(t, state: NonzeroModeState, mode: ModeIndex, params: PhysParams):
    """Forcing of the horizontal velocities by ``(q, theta)``.

    The pressure contributions carry a minus sign on the ``q / p**2`` terms;
    with that sign the divergence ``k u1 + (eta - k t) u2 + l u3`` is exactly
    conserved up to viscous decay.
    """
    k, l = mode.k, mode.l
    p = symbol_p(t, mode)
    shear = mode.eta - k * t
    q, theta = state.q, state.theta
    buoyancy = params.beta * shear * theta / p
    du1 = -params.nu * p * state.u1 + q / p - 2.0 * k * k * q / (p * p) + k * buoyancy
    du3 = -params.nu * p * state.u3 - 2.0 * k * l * q / (p * p) + l * buoyancy
    return du1, du3


def rhs_symmetric(t, s: SymmetricState, mode: ModeIndex, params: PhysParams):
    p = symbol_p(t, mode)
    drift = 0.25 * (-2.0 * mode.k * (mode.eta - mode.k * t)) / p
    coupling = params.beta * mode.kl_norm / np.sqrt(p)
    dg = -drift * s.g + coupling * s.gamma - params.nu * p * s.g
    dgamma = drift * s.gamma - coupling * s.g - params.kappa * p * s.gamma
    return dg, dgamma


def _full_rhs(mode: ModeIndex, params: PhysParams, shift: float = 0.0):
    def fun(t, y):
        state = NonzeroModeState(y[0], y[1], y[2], y[3])
        dq, dtheta = rhs_qtheta(t, state.q, state.theta, mode, params)
        du1, du3 = rhs_u1u3(t, state, mode, params)
        out = np.stack((dq, dtheta, du1, du3))
        if shift:
            out += shift * symbol_p(t, mode) * y
        return out
    return fun


# --- energy functional ------------------------------------------------------

def energy(t, s: SymmetricState, mode: ModeIndex, params: PhysParams):
    """Augmented energy of the symmetric pair.

    The cross term enters with a minus sign: that is the sign for which the
    time derivative of this functional matches :func:`energy_identity_rhs`
    along solutions of :func:`rhs_symmetric`.
    """
    if not params.beta > 0:
        raise ValueError("energy requires beta > 0")
    cross = np.real(s.g * np.conj(s.gamma))
    ratio = symbol_ratio(t, mode)
    return 0.5 * (np.abs(s.g) ** 2 + np.abs(s.gamma) ** 2 - ratio * cross / (2.0 * params.beta))


def energy_identity_rhs(t, s: SymmetricState, mode: ModeIndex, params: PhysParams):
    beta = params.beta
    p = symbol_p(t, mode)
    cross = np.real(s.g * np.conj(s.gamma))
    return (-symbol_ratio_derivative(t, mode) * cross / (4.0 * beta)
            - params.nu * p * np.abs(s.g) ** 2
            - params.kappa * p * np.abs(s.gamma) ** 2
            + (params.nu + params.kappa) / (4.0 * beta) * symbol_ratio(t, mode) * p * cross)


# --- envelopes --------------------------------------------------------------

def envelope_symmetric(t, mode: ModeIndex, rates: RateConstants, init_norm2, sharp: bool = False):
    """Upper bound for ``|G(t)|^2 + |Gamma(t)|^2``.

    ``sharp=True`` uses the time integral of ``p`` and the extra factor
    ``4 beta / (2 beta + 1)`` instead of the cubic lower bound.
    """
    if sharp:
        exponent = rates.sharp_factor * rates.lam * integral_p(t, mode)
    else:
        exponent = rates.lam * mode.k**2 * np.asarray(t) ** 3 / 12.0
    return rates.c_beta**2 * np.exp(-exponent) * init_norm2


def envelope_u1u3(t, mode: ModeIndex, rates: RateConstants, u_init, sym_init_norm):
    k2, l2 = mode.k**2, mode.l**2
    forcing = 6.0 * rates.c_beta * (3.0 + rates.beta) * ((k2 + l2) / k2**3) ** 0.25
    return np.exp(-rates.lam * k2 * np.asarray(t) ** 3 / 24.0) * (u_init + forcing * sym_init_norm)


def integral_p_minus_three_quarters(mode: ModeIndex) -> float:
    """Adaptive quadrature of ``p(t)**(-3/4)`` over the whole real line."""
    if mode.k == 0:
        raise ValueError("the integral diverges for k = 0")
    centre = mode.eta / mode.k
    f = lambda t: symbol_p(t, mode) ** -0.75
    left, _ = sp_integrate.quad(f, -np.inf, centre, epsabs=0, epsrel=1e-12, limit=500)
    right, _ = sp_integrate.quad(f, centre, np.inf, epsabs=0, epsrel=1e-12, limit=500)
    return left + right


# --- trajectories -----------------------------------------------------------

def _freeze(arr):
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


def _time_column(times, shape):
    return times.reshape((-1,) + (1,) * len(shape))


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of one mode (or one eta-batch of modes).

    State fields and diagnostics have shape ``(len(times),) + eta.shape``.
    Energy diagnostics are NaN when ``beta <= 1/2``; envelope diagnostics are
    NaN when the rate constants are not defined.
    """

    mode: ModeIndex
    params: PhysParams
    times: np.ndarray
    states: NonzeroModeState
    diagnostics: Mapping[str, np.ndarray] = field(default_factory=dict)
    n_steps: int = 0

    def state_at(self, i: int) -> NonzeroModeState:
        s = self.states
        return NonzeroModeState(s.q[i], s.theta[i], s.u1[i], s.u3[i])

    def symmetric(self) -> SymmetricState:
        t = _time_column(self.times, np.shape(self.mode.eta))
        return to_symmetric(self.states, t, self.mode)

    def conjugate(self) -> "Trajectory":
        """Trajectory of the conjugate data at ``(-k, -eta, -l)``."""
        return Trajectory(self.mode.conjugate(), self.params, self.times,
                          self.states.conjugate(), self.diagnostics, self.n_steps)


def _diagnostics(times, states, mode, params):
    shape = np.shape(mode.eta)
    t = _time_column(times, shape)
    sym = to_symmetric(states, t, mode)
    norm2 = np.abs(sym.g) ** 2 + np.abs(sym.gamma) ** 2
    nan = np.full(norm2.shape, np.nan)
    diag = {
        "sym_norm2": norm2,
        "divergence": divergence_residual(states, t, mode),
        "energy": energy(t, sym, mode, params) if params.beta > 0.5 else nan,
    }
    if params.theorem1_applicable:
        rates = rate_constants(params)
        init2 = norm2[0]
        diag["envelope_sym"] = envelope_symmetric(t, mode, rates, init2)
        diag["envelope_sym_sharp"] = envelope_symmetric(t, mode, rates, init2, sharp=True)
        diag["envelope_u1"] = envelope_u1u3(t, mode, rates, np.abs(states.u1[0]), np.sqrt(init2))
        diag["envelope_u3"] = envelope_u1u3(t, mode, rates, np.abs(states.u3[0]), np.sqrt(init2))
    else:
        for name in ("envelope_sym", "envelope_sym_sharp", "envelope_u1", "envelope_u3"):
            diag[name] = nan
    return MappingProxyType({name: _freeze(v) for name, v in diag.items()})


def integrate_mode(initial: NonzeroModeState, mode: ModeIndex, params: PhysParams,
                   cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate the moving-frame system for one ``k != 0`` mode.

    ``cfg.method == "integrating_factor"`` integrates ``exp(m int p) y`` with
    ``m = min(nu, kappa)``, which removes the stiff common decay and allows
    long horizons at modest cost.
    """
    if mode.k == 0:
        raise ValueError("integrate_mode requires k != 0; use streaks.propagate_streak")
    times = cfg.sample_times(params, mode)
    y0 = initial.as_array()
    if np.shape(mode.eta) and y0.shape[1:] != np.shape(mode.eta):
        y0 = np.broadcast_to(y0, (4,) + np.shape(mode.eta)).copy()

    if cfg.method == "integrating_factor":
        m = params.min_diffusivity
        sol = dopri5(_full_rhs(mode, params, shift=m), y0, times, cfg.rel_tol, cfg.abs_tol, cfg.max_step)
        decay = np.exp(-m * integral_p(_time_column(times, y0.shape[1:]), mode))
        ys = sol.y * decay[:, None]
    else:
        sol = dopri5(_full_rhs(mode, params), y0, times, cfg.rel_tol, cfg.abs_tol, cfg.max_step)
        ys = sol.y

    states = NonzeroModeState(*(_freeze(ys[:, j]) for j in range(4)))
    return Trajectory(mode, params, _freeze(times), states,
                      _diagnostics(times, states, mode, params), sol.n_steps)


# --- checks on trajectories -------------------------------------------------

def energy_identity_residuals(traj: Trajectory, stride: int = 1, centres=None) -> np.ndarray:
    """Centred-difference ``dE/dt`` minus the identity's right-hand side.

    Differences use samples ``stride`` apart; ``centres`` selects the sample
    indices at which the residual is evaluated.
    """
    n = traj.times.size
    if n < 3:
        raise InsufficientSamplingError(f"need at least 3 samples, got {n}")
    if not traj.params.beta > 0:
        raise ValueError("the energy identity needs beta > 0")
    mode, params = traj.mode, traj.params
    sym = traj.symmetric()
    t = _time_column(traj.times, np.shape(mode.eta))
    e = energy(t, sym, mode, params)
    rhs = energy_identity_rhs(t, sym, mode, params)
    if centres is None:
        centres = np.arange(stride, n - stride)
    centres = np.asarray(centres)
    if centres.size == 0:
        raise InsufficientSamplingError("no interior samples for the requested stride")
    dt = traj.times[centres + stride] - traj.times[centres - stride]
    de = (e[centres + stride] - e[centres - stride]) / _time_column(dt, np.shape(mode.eta))
    return np.abs(de - rhs[centres])


def check_energy_identity(traj: Trajectory, mode: Optional[ModeIndex] = None,
                          params: Optional[PhysParams] = None, stride: int = 1) -> float:
    if (mode is not None and mode != traj.mode) or (params is not None and params != traj.params):
        traj = Trajectory(mode or traj.mode, params or traj.params, traj.times, traj.states)
    return float(np.max(energy_identity_residuals(traj, stride)))


def energy_identity_order(traj: Trajectory, strides=(4, 8)) -> float:
    """Observed convergence order of the identity residual in the sample spacing."""
    s1, s2 = strides
    n = traj.times.size
    common = np.arange(s2, n - s2, s2)
    r1 = np.max(energy_identity_residuals(traj, s1, common))
    r2 = np.max(energy_identity_residuals(traj, s2, common))
    return float(np.log(r2 / r1) / np.log(s2 / s1))


def envelope_violations(traj: Trajectory) -> dict:
    """Largest normalised excess of each quantity over its envelope.

    Values are divided by the size of the initial data (per eta node), so a
    run passes when every entry is at most the 1e-9 floating-point slack.
    ``ordering`` measures how far the sharp envelope exceeds the cubic one.
    """
    d = traj.diagnostics
    norm2 = d["sym_norm2"]
    size2 = np.maximum(norm2[0], 1e-300)
    u1, u3 = np.abs(traj.states.u1), np.abs(traj.states.u3)
    size_u1 = np.maximum(u1[0] + np.sqrt(norm2[0]), 1e-300)
    size_u3 = np.maximum(u3[0] + np.sqrt(norm2[0]), 1e-300)
    return {
        "sym": float(np.max((norm2 - d["envelope_sym"]) / size2)),
        "sym_sharp": float(np.max((norm2 - d["envelope_sym_sharp"]) / size2)),
        "ordering": float(np.max((d["envelope_sym_sharp"] - d["envelope_sym"]) / size2)),
        "u1": float(np.max((u1 - d["envelope_u1"]) / size_u1)),
        "u3": float(np.max((u3 - d["envelope_u3"]) / size_u3)),
    }


def divergence_drift(traj: Trajectory) -> float:
    """Divergence residual along the run relative to the initial amplitude."""
    s = traj.states
    amp = np.abs(s.u1[0]) + np.abs(s.u3[0]) + np.abs(s.q[0]) / symbol_p(0.0, traj.mode)
    return float(np.max(traj.diagnostics["divergence"] / np.maximum(amp, 1e-300)))
