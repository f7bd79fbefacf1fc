"""Exact solutions of the ``k = 0`` (streak) modes.

For ``l != 0`` the rescaled unknowns ``(f0, h0, g0, gamma0)`` satisfy a
block-triangular linear system whose exponential is available in closed form:
``exp(M t)`` for the buoyancy-coupled pair ``(g0, gamma0)`` and the coupling
block ``S (N - M)^{-1} (exp(N t) - exp(M t))`` feeding ``(f0, h0)``.  The
hyperbolic kernels ``cosh(c t)`` and ``sinh(c t)/c`` are evaluated through
``c**2`` so that the oscillatory case ``c**2 < 0`` and the degenerate case
``c = 0`` stay real and continuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModeError
from .integrator import dopri5
from .symbols import PhysParams

SERIES_THRESHOLD = 1e-4


@dataclass(frozen=True)
class StreakState:
    u1: complex
    u2: complex
    u3: complex
    theta: complex

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(*(np.asarray(x, dtype=complex) for x in
                                               (self.u1, self.u2, self.u3, self.theta))))

    @classmethod
    def from_array(cls, y) -> "StreakState":
        return cls(y[0], y[1], y[2], y[3])


@dataclass(frozen=True)
class StreakScaled:
    f0: complex
    h0: complex
    g0: complex
    gamma0: complex


@dataclass(frozen=True)
class KernelParams:
    a: float
    b: float
    c_squared: float

    @classmethod
    def from_ab(cls, a: float, b: float) -> "KernelParams":
        return cls(a, b, a * a - b * b)


def _wavenumber_sq(eta, l):
    return eta * eta + l * l


def kernel_params(params: PhysParams, eta: float, l: int) -> KernelParams:
    d = _wavenumber_sq(eta, l)
    a = abs(params.nu - params.kappa) * d / 2.0
    b = params.beta * abs(l) / math.sqrt(d)
    return KernelParams.from_ab(a, b)


# --- stable kernels ---------------------------------------------------------

def sinhc_stable(c_squared, t):
    """``sinh(c t)/c`` as a real function of ``c**2``; equals ``t`` at ``c = 0``."""
    c2, t = np.broadcast_arrays(np.asarray(c_squared, float), np.asarray(t, float))
    x = c2 * t * t
    out = np.empty(x.shape)
    small = np.abs(x) < SERIES_THRESHOLD
    pos = ~small & (c2 > 0)
    neg = ~small & (c2 < 0)
    out[small] = t[small] * (1.0 + x[small] / 6.0 + x[small] ** 2 / 120.0)
    c = np.sqrt(c2[pos])
    out[pos] = np.sinh(c * t[pos]) / c
    s = np.sqrt(-c2[neg])
    out[neg] = np.sin(s * t[neg]) / s
    return out if out.ndim else float(out)


def coshc_stable(c_squared, t):
    """``cosh(c t)`` as a real function of ``c**2``; ``cos(s t)`` when ``c**2 = -s**2``."""
    c2, t = np.broadcast_arrays(np.asarray(c_squared, float), np.asarray(t, float))
    x = c2 * t * t
    out = np.empty(x.shape)
    small = np.abs(x) < SERIES_THRESHOLD
    pos = ~small & (c2 > 0)
    neg = ~small & (c2 < 0)
    out[small] = 1.0 + x[small] / 2.0 + x[small] ** 2 / 24.0
    out[pos] = np.cosh(np.sqrt(c2[pos]) * t[pos])
    out[neg] = np.cos(np.sqrt(-c2[neg]) * t[neg])
    return out if out.ndim else float(out)


def damped_kernels(rate, c_squared, t):
    """``exp(-rate t)`` times ``(coshc, sinhc)`` without intermediate overflow.

    Requires ``rate >= c`` when ``c**2 > 0``, which holds for every use here
    since ``c < a <= rate``.
    """
    c2, t = np.broadcast_arrays(np.asarray(c_squared, float), np.asarray(t, float))
    damp = np.exp(-rate * t)
    x = c2 * t * t
    ch, sh = np.empty(x.shape), np.empty(x.shape)
    series = (np.abs(x) < SERIES_THRESHOLD) | (c2 <= 0)
    ch[series] = damp[series] * coshc_stable(c2[series], t[series])
    sh[series] = damp[series] * sinhc_stable(c2[series], t[series])
    pos = ~series
    c, tp = np.sqrt(c2[pos]), t[pos]
    grow = np.exp((c - rate) * tp)
    tail = np.expm1(-2.0 * c * tp)
    ch[pos] = grow * (1.0 + 0.5 * tail)
    sh[pos] = -grow * tail / (2.0 * c)
    if ch.ndim == 0:
        return float(ch), float(sh)
    return ch, sh


# --- matrix blocks ----------------------------------------------------------

def _require_spanwise(l):
    if l == 0:
        raise DegenerateModeError("the scaled streak system needs l != 0")


def _matrix(m11, m12, m21, m22):
    return np.moveaxis(np.array([[m11, m12], [m21, m22]]), (0, 1), (-2, -1))


def generator_blocks(params: PhysParams, eta: float, l: int):
    """The 2x2 blocks ``N``, ``S``, ``M`` of the scaled streak generator."""
    _require_spanwise(l)
    d = _wavenumber_sq(eta, l)
    b = params.beta * abs(l) / math.sqrt(d)
    n_block = -params.nu * d * np.eye(2)
    s_block = np.diag([1.0, float(eta)])
    m_block = np.array([[-params.nu * d, -b], [b, -params.kappa * d]])
    return n_block, s_block, m_block


def _phi(kp, params, d, t):
    """``(phi_minus, phi_plus, sinhc)`` with the signed ``(nu - kappa)`` coefficient.

    All three carry the common factor ``exp(-(nu + kappa) d t / 2)``.
    """
    ch, sc = damped_kernels(0.5 * (params.nu + params.kappa) * d, kp.c_squared, t)
    skew = 0.5 * (params.nu - params.kappa) * d * sc
    return ch - skew, ch + skew, sc


def exp_M(t, kp: KernelParams, params: PhysParams, eta: float, l: int) -> np.ndarray:
    """``exp(M t)`` for the buoyancy-coupled pair; shape ``t.shape + (2, 2)``."""
    _require_spanwise(l)
    d = _wavenumber_sq(eta, l)
    t = np.asarray(t, float)
    phi_m, phi_p, sc = _phi(kp, params, d, t)
    return _matrix(phi_m, -kp.b * sc, kp.b * sc, phi_p)


def coupling_entries(t, kp: KernelParams, params: PhysParams, eta: float, l: int):
    """``(m11, m12, m22)`` of ``(N - M)^{-1}(exp(N t) - exp(M t))``."""
    _require_spanwise(l)
    d = _wavenumber_sq(eta, l)
    t = np.asarray(t, float)
    heat = np.exp(-params.nu * d * t)
    phi_m, _, sc = _phi(kp, params, d, t)
    m11 = (params.nu - params.kappa) * d / kp.b**2 * (phi_m - heat) + sc
    m12 = (phi_m - heat) / kp.b
    m22 = sc
    return m11, m12, m22


def coupling_block(t, kp: KernelParams, params: PhysParams, eta: float, l: int) -> np.ndarray:
    m11, m12, m22 = coupling_entries(t, kp, params, eta, l)
    return _matrix(m11, m12, -m12, m22)


# --- scaling maps -----------------------------------------------------------

def to_scaled(state: StreakState, params: PhysParams, eta: float, l: int) -> StreakScaled:
    _require_spanwise(l)
    if not params.beta > 0:
        raise DegenerateModeError("the scaled streak variables need beta > 0")
    d = _wavenumber_sq(eta, l)
    w = d**0.75 / math.sqrt(abs(l))
    return StreakScaled(
        f0=-w * state.u1,
        h0=d**1.25 * math.sqrt(abs(l)) / (params.beta * l) * state.u3,
        g0=w * state.u2,
        gamma0=d**0.25 * math.sqrt(abs(l)) * state.theta,
    )


def from_scaled(s: StreakScaled, params: PhysParams, eta: float, l: int) -> StreakState:
    _require_spanwise(l)
    d = _wavenumber_sq(eta, l)
    w = d**0.75 / math.sqrt(abs(l))
    return StreakState(
        u1=-s.f0 / w,
        u2=s.g0 / w,
        u3=s.h0 * params.beta * l / (d**1.25 * math.sqrt(abs(l))),
        theta=s.gamma0 / (d**0.25 * math.sqrt(abs(l))),
    )


# --- solutions --------------------------------------------------------------

def _decoupled_spanwise_free(initial: StreakState, t, params: PhysParams, eta: float) -> StreakState:
    # l = 0: u2 only feeds u1 and theta, and vanishes for incompressible data
    d = eta * eta
    t = np.asarray(t, float)
    e_nu, e_kappa = np.exp(-params.nu * d * t), np.exp(-params.kappa * d * t)
    if params.nu == params.kappa:
        transfer = t * e_nu
    else:
        transfer = (e_nu - e_kappa) / ((params.kappa - params.nu) * d)
    return StreakState(
        u1=e_nu * (initial.u1 - t * initial.u2),
        u2=e_nu * initial.u2,
        u3=e_nu * initial.u3,
        theta=e_kappa * initial.theta + params.beta * transfer * initial.u2,
    )


def propagate_streak(initial: StreakState, t, params: PhysParams, eta: float, l: int) -> StreakState:
    """Closed-form solution of the streak system at time(s) ``t``."""
    if eta == 0 and l == 0:
        raise DegenerateModeError("the mean mode is excluded")
    if l == 0 or params.beta == 0:
        if params.beta == 0:
            return liftup_baseline(initial, t, params.nu, eta, l, kappa=params.kappa)
        return _decoupled_spanwise_free(initial, t, params, eta)

    kp = kernel_params(params, eta, l)
    d = _wavenumber_sq(eta, l)
    s0 = to_scaled(initial, params, eta, l)
    t = np.asarray(t, float)
    heat = np.exp(-params.nu * d * t)
    m11, m12, m22 = coupling_entries(t, kp, params, eta, l)
    em = exp_M(t, kp, params, eta, l)
    st = StreakScaled(
        f0=heat * s0.f0 + m11 * s0.g0 + m12 * s0.gamma0,
        h0=heat * s0.h0 + eta * (-m12 * s0.g0 + m22 * s0.gamma0),
        g0=em[..., 0, 0] * s0.g0 + em[..., 0, 1] * s0.gamma0,
        gamma0=em[..., 1, 0] * s0.g0 + em[..., 1, 1] * s0.gamma0,
    )
    return from_scaled(st, params, eta, l)


def liftup_baseline(initial: StreakState, t, nu: float, eta: float, l: int,
                    kappa: float | None = None) -> StreakState:
    """Unstratified streaks: ``u1`` is forced linearly in time by ``u2``.

    ``theta`` decays at rate ``kappa |eta,l|^2`` (``kappa`` defaults to ``nu``).
    """
    d = _wavenumber_sq(eta, l)
    t = np.asarray(t, float)
    heat = np.exp(-nu * d * t)
    kappa = nu if kappa is None else kappa
    return StreakState(
        u1=heat * (initial.u1 - t * initial.u2),
        u2=heat * initial.u2,
        u3=heat * initial.u3,
        theta=np.exp(-kappa * d * t) * initial.theta,
    )


def rhs_streak(t, y, params: PhysParams, eta: float, l: int):
    """Unscaled streak equations in Fourier variables."""
    return _streak_field(y, params.nu, params.kappa, params.beta, eta, l)


def _streak_field(y, nu, kappa, beta, eta, l):
    d = _wavenumber_sq(eta, l)
    u1, u2, u3, theta = y
    return np.stack((
        -u2 - nu * d * u1,
        -beta * l * l / d * theta - nu * d * u2,
        beta * eta * l / d * theta - nu * d * u3,
        beta * u2 - kappa * d * theta,
    ))


def oracle_integrate_streaks(cases, initials, times, rtol: float = 1e-11, atol: float = 1e-300):
    """Integrate many independent streak modes numerically in one batch.

    ``cases`` is a sequence of ``(params, eta, l)``; ``initials`` a matching
    sequence of :class:`StreakState`.  Returns a list of time-sampled states.
    This path never touches the closed-form kernels and serves as their check.
    """
    if len(cases) == 0:
        return []
    cols = np.array([(p.nu, p.kappa, p.beta, eta, l) for p, eta, l in cases], dtype=float).T
    nu, kappa, beta, eta, l = cols
    y0 = np.stack([s.as_array() for s in initials], axis=-1)
    sol = dopri5(lambda t, y: _streak_field(y, nu, kappa, beta, eta, l), y0, times, rtol=rtol, atol=atol)
    return [StreakState.from_array(np.moveaxis(sol.y[..., j], 0, 1)) for j in range(len(cases))]


def oracle_integrate_streak(initial: StreakState, times, params: PhysParams, eta: float, l: int,
                            rtol: float = 1e-11, atol: float = 1e-300) -> StreakState:
    """Numerical solution of one streak mode (independent check)."""
    return oracle_integrate_streaks([(params, eta, l)], [initial], times, rtol, atol)[0]


# --- bounds -----------------------------------------------------------------

def hyperbolic_bounds_check(kp: KernelParams, t_samples) -> float:
    """Largest excess of ``e^{-at}|cosh(ct)|`` over 2 and of ``e^{-at}|sinh(ct)/c|`` over ``2/max(a,b)``.

    Absolute values are used, which is stricter than bounding the signed kernels.
    """
    t = np.asarray(t_samples, float)
    ch, sh = damped_kernels(kp.a, kp.c_squared, t)
    excess = np.concatenate([np.abs(ch) - 2.0, np.abs(sh) - 2.0 / max(kp.a, kp.b)])
    if not np.all(np.isfinite(excess)):
        return math.inf
    return max(float(np.max(excess, initial=0.0)), 0.0)


@dataclass(frozen=True)
class StreakBound:
    """Bracketed initial-data combinations bounding each streak component.

    Each component times ``exp(min(nu, kappa) |eta,l|^2 t)`` is bounded by an
    absolute constant times the corresponding field.
    """

    u1: float
    u2: float
    u3: float
    theta: float


def streak_pointwise_bound(initial: StreakState, params: PhysParams, eta: float, l: int) -> StreakBound:
    _require_spanwise(l)
    if not params.beta > 0:
        raise DegenerateModeError("the streak bounds need beta > 0")
    beta = params.beta
    d = _wavenumber_sq(eta, l)
    norm = math.sqrt(d)
    a1, a2, a3, at = (abs(complex(x)) for x in (initial.u1, initial.u2, initial.u3, initial.theta))
    return StreakBound(
        u1=a1 + d * d / (beta * l * l) * a2 + (a2 + at) / beta,
        u2=a2 + abs(l) / norm * at,
        u3=a3 + abs(eta) / abs(l) * a2 + abs(eta) / norm * at,
        theta=norm / abs(l) * a2 + at,
    )


def fitted_streak_constants(initial: StreakState, params: PhysParams, eta: float, l: int, times) -> StreakBound:
    """Sup over ``times`` of each weighted component divided by its bracket."""
    bound = streak_pointwise_bound(initial, params, eta, l)
    sol = propagate_streak(initial, times, params, eta, l)
    weight = np.exp(params.min_diffusivity * _wavenumber_sq(eta, l) * np.asarray(times, float))
    out = {}
    for name in ("u1", "u2", "u3", "theta"):
        sup = float(np.max(np.abs(getattr(sol, name)) * weight))
        denom = getattr(bound, name)
        out[name] = sup / denom if denom > 0 else (0.0 if sup == 0 else math.inf)
    return StreakBound(**out)
