"""Change of unknowns between (Q, Theta) and the symmetric pair (G, Gamma).

With ``w = |k,l|**0.5 * p**0.25`` the symmetric variables are ``G = Q / w`` and
``Gamma = w * Theta``.  In these unknowns the buoyancy coupling becomes
antisymmetric, which is what makes the energy functional work.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateModeError
from .symbols import ArrayLike, ModeIndex, symbol_p


@dataclass(frozen=True)
class NonzeroModeState:
    """Moving-frame amplitudes for a ``k != 0`` mode.

    ``q`` is the amplitude of the Laplacian of the vertical velocity; the
    velocity itself is recovered with :func:`u2_from_q`.  Fields may be
    arrays (batched over eta, over time, or both).
    """

    q: ArrayLike
    theta: ArrayLike
    u1: ArrayLike
    u3: ArrayLike

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(*(np.asarray(x, dtype=complex) for x in
                                               (self.q, self.theta, self.u1, self.u3))))

    @classmethod
    def from_array(cls, y) -> "NonzeroModeState":
        return cls(y[0], y[1], y[2], y[3])

    def conjugate(self) -> "NonzeroModeState":
        return NonzeroModeState(*(np.conj(x) for x in (self.q, self.theta, self.u1, self.u3)))

    def scaled(self, factor) -> "NonzeroModeState":
        return replace(self, q=factor * self.q, theta=factor * self.theta,
                       u1=factor * self.u1, u3=factor * self.u3)


@dataclass(frozen=True)
class SymmetricState:
    g: ArrayLike
    gamma: ArrayLike


def symmetric_weight(t: ArrayLike, mode: ModeIndex) -> ArrayLike:
    """``|k,l|**0.5 * p**0.25`` evaluated through logarithms."""
    return np.exp(0.5 * np.log(mode.kl_norm) + 0.25 * np.log(symbol_p(t, mode)))


def _require_streamwise(mode: ModeIndex):
    if mode.k == 0:
        raise DegenerateModeError("symmetric variables are defined for k != 0 only")


def to_symmetric(state: NonzeroModeState, t: ArrayLike, mode: ModeIndex) -> SymmetricState:
    _require_streamwise(mode)
    w = symmetric_weight(t, mode)
    return SymmetricState(g=state.q / w, gamma=w * state.theta)


def from_symmetric(state: SymmetricState, t: ArrayLike, mode: ModeIndex):
    """Inverse of :func:`to_symmetric`; returns ``(q, theta)``."""
    _require_streamwise(mode)
    w = symmetric_weight(t, mode)
    return state.g * w, state.gamma / w


def u2_from_q(q: ArrayLike, t: ArrayLike, mode: ModeIndex) -> ArrayLike:
    # the symbol of the sheared Laplacian is -p
    return -q / symbol_p(t, mode)


def q_from_u2(u2: ArrayLike, t: ArrayLike, mode: ModeIndex) -> ArrayLike:
    return -symbol_p(t, mode) * u2


def divergence_residual(state: NonzeroModeState, t: ArrayLike, mode: ModeIndex) -> ArrayLike:
    """``|k u1 + (eta - k t) u2 + l u3|``; zero for incompressible data."""
    u2 = u2_from_q(state.q, t, mode)
    return np.abs(mode.k * state.u1 + (mode.eta - mode.k * t) * u2 + mode.l * state.u3)
