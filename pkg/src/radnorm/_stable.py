"""Cancellation-free modulus formulas for points near the disc boundary.

Every pole-type function in this package has its singularity just outside
the closed disc, at distance ``delta`` from the boundary.  Evaluating
``|1 + delta - r e^{i psi}|`` by complex subtraction loses all precision
once ``delta`` and ``1 - r`` drop below 1e-8 or so.  The identity

    |1 + delta - r e^{i psi}|^2
        = (delta + x)^2 + 4 (1 - x)(1 + delta) sin^2(psi / 2),    x = 1 - r,

has only nonnegative summands, so it is exact to rounding for delta and x
all the way down to the underflow threshold.  The same expansion with
``delta = -(1 - a)`` handles kernels ``(1 - a r e^{i psi})`` with a in [0, 1).
"""

from __future__ import annotations

import numpy as np


def stable_pole_modulus_sq(delta, x, theta_offset):
    """``|1 + delta - (1 - x) e^{i theta_offset}|^2`` without cancellation.

    ``delta`` must be positive and ``x`` in (0, 1].  Accepts scalars or
    numpy arrays (broadcast).  The two summands are nonnegative, so the
    only failure mode left is underflow of ``(delta + x)**2`` itself,
    which callers rule out (schedule construction refuses deltas whose
    square is not representable).
    """
    s = np.sin(0.5 * np.asarray(theta_offset, dtype=float))
    out = (delta + x) ** 2 + 4.0 * (1.0 - x) * (1.0 + delta) * (s * s)
    if np.ndim(out) == 0:
        return float(out)
    return out


def log_pole_modulus(delta, x, theta_offset):
    """``log |1 + delta - (1 - x) e^{i theta_offset}|`` via hypot.

    hypot never under- or overflows for representable inputs, so this is
    safe even when ``(delta + x)**2`` would underflow.
    """
    a = np.asarray(delta + x, dtype=float)
    s = np.abs(np.sin(0.5 * np.asarray(theta_offset, dtype=float)))
    b = 2.0 * np.sqrt((1.0 - x) * (1.0 + delta)) * s
    out = np.log(np.hypot(a, b))
    if np.ndim(out) == 0:
        return float(out)
    return out


def log_kernel_modulus(a, x, psi):
    """``log |1 - a (1 - x) e^{i psi}|`` for a in [0, 1), stable near r = 1.

    Uses ``1 - a (1 - x) = (1 - a) + a x`` (both terms nonnegative).
    """
    re0 = (1.0 - a) + a * np.asarray(x, dtype=float)
    s = np.abs(np.sin(0.5 * np.asarray(psi, dtype=float)))
    b = 2.0 * np.sqrt(a * (1.0 - x)) * s
    out = np.log(np.hypot(re0, b))
    if np.ndim(out) == 0:
        return float(out)
    return out
