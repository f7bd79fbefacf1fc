"""Physical parameters, Fourier mode indexing and the sheared Laplacian symbol.

In the frame moving with the Couette flow the Laplacian acquires the
time-dependent Fourier symbol

    p(t) = k**2 + (eta - k*t)**2 + l**2

and everything in the nonzero-mode analysis is built from ``p``, its time
derivative and its time integral.  All functions broadcast over numpy arrays
in ``t`` and in ``mode.eta`` so a whole eta grid can be processed at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ParameterGateError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class PhysParams:
    """Viscosity ``nu``, thermal diffusivity ``kappa`` and buoyancy frequency ``beta``."""

    nu: float
    kappa: float
    beta: float

    def __post_init__(self):
        if not (self.nu > 0 and self.kappa > 0):
            raise ValueError(f"nu and kappa must be positive, got {self.nu}, {self.kappa}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")

    @property
    def diffusivity_ratio(self) -> float:
        return max(self.nu, self.kappa) / min(self.nu, self.kappa)

    @property
    def theorem1_applicable(self) -> bool:
        # equality is rejected: the rate would vanish
        return self.beta > 0.5 and self.diffusivity_ratio < 4.0 * self.beta - 1.0

    @property
    def min_diffusivity(self) -> float:
        return min(self.nu, self.kappa)


@dataclass(frozen=True)
class ModeIndex:
    """A Fourier mode ``(k, eta, l)``.

    ``eta`` may be a numpy array, in which case the index stands for a batch
    of modes sharing ``(k, l)``; every function below then returns arrays.
    """

    k: int
    l: int
    eta: ArrayLike

    def __post_init__(self):
        if self.k == 0 and self.l == 0 and np.any(np.asarray(self.eta) == 0):
            raise ValueError("the mean mode (0, 0, 0) is excluded")

    @property
    def kl_norm(self) -> float:
        return math.hypot(self.k, self.l)

    @property
    def full_norm(self) -> ArrayLike:
        return np.sqrt(self.k**2 + np.asarray(self.eta) ** 2 + self.l**2)

    def conjugate(self) -> "ModeIndex":
        return ModeIndex(-self.k, -self.l, -np.asarray(self.eta) if np.ndim(self.eta) else -self.eta)


@dataclass(frozen=True)
class RateConstants:
    lambda_nu: float
    lambda_kappa: float
    lam: float
    c_beta: float
    beta: float

    @property
    def sharp_factor(self) -> float:
        """Factor 4*beta/(2*beta+1) multiplying the rate in the sharper envelope."""
        return 4.0 * self.beta / (2.0 * self.beta + 1.0)


def symbol_p(t: ArrayLike, mode: ModeIndex) -> ArrayLike:
    shear = mode.eta - mode.k * t
    return mode.k**2 + shear * shear + mode.l**2


def symbol_p_prime(t: ArrayLike, mode: ModeIndex) -> ArrayLike:
    return -2.0 * mode.k * (mode.eta - mode.k * t)


def symbol_ratio(t: ArrayLike, mode: ModeIndex) -> ArrayLike:
    """``p' / (|k,l| sqrt(p))``, bounded by 2 in absolute value."""
    return symbol_p_prime(t, mode) / (mode.kl_norm * np.sqrt(symbol_p(t, mode)))


def symbol_ratio_derivative(t: ArrayLike, mode: ModeIndex) -> ArrayLike:
    """Exact time derivative of :func:`symbol_ratio` (requires ``k != 0``)."""
    if mode.k == 0:
        raise ValueError("symbol_ratio_derivative requires k != 0")
    p = symbol_p(t, mode)
    dp = symbol_p_prime(t, mode)
    d2p = 2.0 * mode.k**2
    return (d2p - dp * dp / (2.0 * p)) / (mode.kl_norm * np.sqrt(p))


def integral_p(t: ArrayLike, mode: ModeIndex) -> ArrayLike:
    """Closed form of the integral of ``p(s)`` over ``[0, t]``."""
    k, l = mode.k, mode.l
    centred = mode.eta - 0.5 * k * t
    return (k * k + l * l) * t + t * (centred * centred + k * k * t * t / 12.0)


def rate_constants(params: PhysParams) -> RateConstants:
    """Enhanced-dissipation rates and the coercivity constant ``C_beta``.

    Raises
    ------
    ParameterGateError
        If ``beta <= 1/2`` or ``max(nu, kappa)/min(nu, kappa) >= 4*beta - 1``.
    """
    beta = params.beta
    if not beta > 0.5:
        raise ParameterGateError(f"beta = {beta} must exceed 1/2")
    if not params.diffusivity_ratio < 4.0 * beta - 1.0:
        raise ParameterGateError(
            f"diffusivity ratio {params.diffusivity_ratio:g} must be < 4*beta - 1 = {4 * beta - 1:g}"
        )
    shared = (params.nu + params.kappa) / (4.0 * beta)
    lambda_nu = params.nu - shared
    lambda_kappa = params.kappa - shared
    c_beta = math.sqrt((2 * beta + 1) / (2 * beta - 1) * math.exp(1.0 / (2 * beta - 1)))
    return RateConstants(lambda_nu, lambda_kappa, min(lambda_nu, lambda_kappa), c_beta, beta)
