"""Dormand-Prince 5(4) integrator with PI step-size control.

The integrator works on complex arrays of arbitrary shape, which lets a whole
batch of independent Fourier modes share one step sequence.  The error norm
is the maximum over components, so every member of the batch meets the
tolerance individually.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StepSizeUnderflow

# Butcher tableau (Hairer, Norsett & Wanner, table II.5.2)
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# fifth-order minus embedded fourth-order weights
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                          22 / 525, -1 / 40)

SAFETY = 0.9
ALPHA = 0.7 / 5
BETA = 0.4 / 5
MIN_FACTOR, MAX_FACTOR = 0.2, 10.0
MIN_STEP = 1e-12


@dataclass
class Solution:
    t: np.ndarray
    y: np.ndarray          # shape (len(t),) + y0.shape
    n_steps: int
    n_rejected: int


def _initial_step(fun, t0, y0, f0, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale) if y0.size else 0.0
    d1 = np.max(np.abs(f0) / scale) if y0.size else 0.0
    if d0 < 1e-5 or d1 < 1e-5:
        return 1e-6
    # components starting at zero with a tiny atol make d1 huge; the controller
    # recovers from an optimistic first step, not from one below MIN_STEP
    return max(0.01 * d0 / d1, 1e-6)


def dopri5(fun, y0, sample_times, rtol=1e-9, atol=1e-12, max_step=np.inf,
           first_step=None, max_steps=5_000_000):
    """Integrate ``y' = fun(t, y)`` and return the state at ``sample_times``.

    ``sample_times[0]`` is the initial time.  Steps are shortened so that every
    sample time is hit exactly; no interpolation is involved.

    Raises
    ------
    StepSizeUnderflow
        If the controller asks for a step below ``1e-12``.
    """
    ts = np.asarray(sample_times, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError("sample_times must be a non-empty 1-D sequence")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("sample_times must be strictly increasing")
    y = np.array(y0, dtype=complex)
    out = np.empty((ts.size,) + y.shape, dtype=complex)
    out[0] = y

    t = float(ts[0])
    f = fun(t, y)
    h = first_step if first_step is not None else _initial_step(fun, t, y, f, rtol, atol)
    h = min(h, max_step)
    err_prev = 1.0
    n_steps = n_rejected = 0

    for i in range(1, ts.size):
        target = float(ts[i])
        while t < target:
            if n_steps + n_rejected >= max_steps:
                raise RuntimeError(f"exceeded {max_steps} steps before t = {target}")
            remaining = target - t
            clipped = h >= remaining * (1 - 1e-12)
            step = remaining if clipped else h
            if step < MIN_STEP and not clipped:
                raise StepSizeUnderflow(f"step {step:.3e} below {MIN_STEP:g} at t = {t:.6g}")

            k1 = f
            k2 = fun(t + C2 * step, y + step * (A21 * k1))
            k3 = fun(t + C3 * step, y + step * (A31 * k1 + A32 * k2))
            k4 = fun(t + C4 * step, y + step * (A41 * k1 + A42 * k2 + A43 * k3))
            k5 = fun(t + C5 * step, y + step * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
            k6 = fun(t + step, y + step * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
            y_new = y + step * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
            k7 = fun(t + step, y_new)

            err_vec = step * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.max(np.abs(err_vec) / scale)) if y.size else 0.0

            if err <= 1.0:
                factor = MAX_FACTOR if err == 0 else SAFETY * err**-ALPHA * err_prev**BETA
                factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
                t = target if clipped else t + step
                y, f = y_new, k7
                err_prev = max(err, 1e-4)
                n_steps += 1
                h_new = min(step * factor, max_step)
                # a step shortened to land on a sample must not throttle the next one
                h = max(h, h_new) if clipped else h_new
                h = min(h, max_step)
            else:
                n_rejected += 1
                h = step * max(MIN_FACTOR, SAFETY * err**-0.2)
                if h < MIN_STEP:
                    raise StepSizeUnderflow(f"step {h:.3e} below {MIN_STEP:g} at t = {t:.6g}")
        out[i] = y
    return Solution(ts, out, n_steps, n_rejected)
