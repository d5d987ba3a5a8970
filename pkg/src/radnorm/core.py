"""Domain types and the function algebra consumed by every other module.

Functions on the unit disc are represented by a small closed algebra of
variants (power series, pole kernels, shifted pole bumps, sums, scalar
multiples, region masks).  All of them evaluate pointwise magnitudes and
complex values; evaluation is pure and immutable, so values are safe for
unlimited concurrent callers.

Two representation choices matter numerically:

* the radial coordinate is stored as ``x = 1 - r`` so that quantities such
  as ``1 + delta - r = delta + x`` never suffer cancellation, even for
  delta near 1e-50;
* angular positions are passed around as an ``(anchor, offset)`` pair with
  ``theta = anchor + offset``.  Integrators center the anchor on a pole or
  region angle, which keeps offsets meaningful far below the rounding
  granularity of the absolute angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._stable import log_kernel_modulus, log_pole_modulus

TWO_PI = 2.0 * math.pi


class ResultStatus(Enum):
    """Outcome of an adaptive integration or norm evaluation."""

    OK = "ok"
    NO_CONVERGENCE = "no_convergence"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class NormResult:
    """A computed integral or norm with an a-posteriori error estimate.

    ``value`` is always finite.  For a diverged computation it carries the
    partial lower bound accumulated before divergence was detected, and
    ``status`` is ``DIVERGED``.
    """

    value: float
    error_estimate: float
    evaluations: int
    status: ResultStatus = ResultStatus.OK

    @property
    def ok(self) -> bool:
        return self.status is ResultStatus.OK

    @property
    def diverged(self) -> bool:
        return self.status is ResultStatus.DIVERGED


@dataclass(frozen=True)
class PoleHint:
    """Structural hint for the quadrature engine.

    ``location`` is where the integrand's nearest singularity (or sharp
    feature) sits on the integration axis; it may lie outside the
    integration interval.  ``scale`` is the distance over which the
    integrand varies near that point.  ``local_breaks`` are jump
    discontinuities expressed as offsets from ``location``; keeping them
    relative preserves them even when ``location + offset`` is not
    representable as a double.
    """

    location: float
    scale: float
    local_breaks: tuple[float, ...] = ()


@dataclass(frozen=True)
class ExponentPair:
    """Integrability exponents ``(p, q)``, both restricted to (1, inf)."""

    p: float
    q: float

    def __post_init__(self):
        for name, v in (("p", self.p), ("q", self.q)):
            if not (1.0 < v < math.inf):
                raise ValueError(f"exponent {name}={v!r} outside (1, inf)")

    def conjugate(self) -> "ExponentPair":
        """The pair ``(p', q')`` with 1/p + 1/p' = 1 and 1/q + 1/q' = 1."""
        return ExponentPair(self.p / (self.p - 1.0), self.q / (self.q - 1.0))


def conjugate(e: ExponentPair) -> ExponentPair:
    return e.conjugate()


@dataclass(frozen=True)
class DiscPoint:
    """A point ``(1 - x) e^{i theta}`` strictly inside the unit disc.

    The radius is stored via ``one_minus_r = 1 - r`` in (0, 1].
    """

    one_minus_r: float
    theta: float

    def __post_init__(self):
        if not (0.0 < self.one_minus_r <= 1.0):
            raise ValueError(
                f"one_minus_r={self.one_minus_r!r} outside (0, 1]: "
                "point not strictly inside the disc"
            )
        object.__setattr__(self, "theta", self.theta % TWO_PI)

    @property
    def r(self) -> float:
        return 1.0 - self.one_minus_r


@dataclass(frozen=True)
class MeasureConvention:
    """The fixed integration conventions used throughout.

    Angular measure is ``dtheta / 2pi`` (unit mass on the circle).  Area
    measure is normalized so the disc has unit mass, i.e. ``dA = dx dy / pi``;
    in polar coordinates that is ``2 r dr`` times the angular measure.
    """

    @staticmethod
    def angular_density() -> float:
        return 1.0 / TWO_PI

    @staticmethod
    def area_radial_weight(one_minus_r):
        """Radial density ``2r`` of the normalized area measure."""
        return 2.0 * (1.0 - one_minus_r)


MEASURE = MeasureConvention()


def _wrap_pm_pi(v: float) -> float:
    """Reduce an O(1) angle difference to [-pi, pi]."""
    return math.remainder(v, TWO_PI)


@dataclass(frozen=True)
class AnnulusArc:
    """A product region ``{r in I, theta in J}``.

    The radial interval is stored in ``one_minus_r`` coordinates.  The
    angular interval is stored as center plus half-width: the schedule
    regions have half-widths as small as 1e-50 times machine epsilon of
    their center angle, so an endpoint pair would collapse to a single
    double.  ``theta_interval`` reconstructs the endpoint pair.
    """

    x_lo: float
    x_hi: float
    theta_center: float
    theta_halfwidth: float

    def __post_init__(self):
        if not (0.0 < self.x_lo < self.x_hi <= 1.0):
            raise ValueError("radial interval must satisfy 0 < lo < hi <= 1 in one_minus_r")
        if not (0.0 < self.theta_halfwidth <= math.pi):
            raise ValueError("angular interval must have positive length <= 2*pi")

    @classmethod
    def from_intervals(cls, radial_interval, angular_interval) -> "AnnulusArc":
        """Build from a (lo, hi) pair in one_minus_r and a (lo, hi) angle pair."""
        x_lo, x_hi = radial_interval
        t_lo, t_hi = angular_interval
        length = (t_hi - t_lo) % TWO_PI
        if length == 0.0 and t_hi != t_lo:
            length = TWO_PI
        return cls(x_lo, x_hi, t_lo + 0.5 * length, 0.5 * length)

    @property
    def theta_interval(self) -> tuple[float, float]:
        return (self.theta_center - self.theta_halfwidth,
                self.theta_center + self.theta_halfwidth)

    def contains(self, z: DiscPoint) -> bool:
        return bool(self.indicator(z.one_minus_r, z.theta, 0.0))

    def indicator(self, x, theta_anchor: float, theta_delta):
        """0/1 membership for broadcastable ``x`` and angular offsets.

        The anchor difference is wrapped once at scalar precision; the
        offsets then enter exactly, which is what keeps masks meaningful
        at half-widths far below eps * theta_center.
        """
        x = np.asarray(x, dtype=float)
        dd = _wrap_pm_pi(theta_anchor - self.theta_center) + np.asarray(theta_delta, dtype=float)
        w = self.theta_halfwidth
        ang = (np.abs(dd) <= w) | (np.abs(dd) >= TWO_PI - w)
        rad = (x >= self.x_lo) & (x <= self.x_hi)
        out = (ang & rad).astype(float)
        if out.ndim == 0:
            return float(out)
        return out

    def disjoint_from(self, other: "AnnulusArc") -> bool:
        radial = self.x_hi < other.x_lo or other.x_hi < self.x_lo
        gap = abs(_wrap_pm_pi(self.theta_center - other.theta_center))
        angular = gap > self.theta_halfwidth + other.theta_halfwidth
        return radial or angular

    def rotated(self, phi: float) -> "AnnulusArc":
        return AnnulusArc(self.x_lo, self.x_hi,
                          (self.theta_center + phi) % TWO_PI, self.theta_halfwidth)


class DiscFunction:
    """Base class of the function algebra.

    Subclasses implement ``complex_values`` and (when a numerically better
    route exists) ``abs_values``.  Both take ``x = 1 - r`` and the angle as
    an ``(anchor, offset)`` pair, broadcasting over numpy arrays.  They
    assume points strictly inside the disc; the scalar entry points
    validate through :class:`DiscPoint`.
    """

    is_analytic: bool = True

    def complex_values(self, x, theta_anchor, theta_delta):
        raise NotImplementedError

    def abs_values(self, x, theta_anchor, theta_delta):
        return np.abs(self.complex_values(x, theta_anchor, theta_delta))

    # Structural quadrature hints.  ``radial_hints`` describes the inner
    # integral over x at a fixed angle (pass None for the angle to get the
    # worst case over all angles, used by the outer radial integral).
    # ``angular_hints`` is the same for integrals over theta at fixed x.

    def radial_hints(self, theta_anchor, theta_delta):
        return (), ()

    def angular_hints(self, x):
        return (), ()

    def __add__(self, other):
        if not isinstance(other, DiscFunction):
            return NotImplemented
        return Sum((self, other))

    def __rmul__(self, c):
        return Scale(complex(c), self)


def _as_float_or_array(v):
    if np.ndim(v) == 0:
        return complex(v) if np.iscomplexobj(v) else float(v)
    return v


@dataclass(frozen=True)
class PowerSeries(DiscFunction):
    """A polynomial ``sum_k c_k z^k`` given by its finite coefficient vector."""

    coefficients: tuple

    def __post_init__(self):
        object.__setattr__(self, "coefficients",
                           tuple(complex(c) for c in self.coefficients))

    def complex_values(self, x, theta_anchor, theta_delta):
        x = np.asarray(x, dtype=float)
        ang = theta_anchor + np.asarray(theta_delta, dtype=float)
        z = (1.0 - x) * np.exp(1j * ang)
        out = np.zeros_like(z)
        for c in reversed(self.coefficients):
            out = out * z + c
        return _as_float_or_array(out)


@dataclass(frozen=True)
class PoleKernel(DiscFunction):
    """``(1 - conj(alpha) z)^{-beta}`` with |alpha| < 1, via the main branch."""

    alpha: complex
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        if not abs(self.alpha) < 1.0:
            raise ValueError("pole parameter must satisfy |alpha| < 1")
        if not self.beta > 0.0:
            raise ValueError("exponent beta must be positive")

    @property
    def _mod_arg(self):
        return abs(self.alpha), math.atan2(self.alpha.imag, self.alpha.real)

    def abs_values(self, x, theta_anchor, theta_delta):
        a, phi = self._mod_arg
        if a == 0.0:
            shape = np.broadcast(np.asarray(x), np.asarray(theta_delta)).shape
            return 1.0 if shape == () else np.ones(shape)
        psi = (theta_anchor - phi) + np.asarray(theta_delta, dtype=float)
        out = np.exp(-self.beta * log_kernel_modulus(a, np.asarray(x, dtype=float), psi))
        return _as_float_or_array(out)

    def complex_values(self, x, theta_anchor, theta_delta):
        a, phi = self._mod_arg
        if a == 0.0:
            return self.abs_values(x, theta_anchor, theta_delta) + 0j
        x = np.asarray(x, dtype=float)
        psi = (theta_anchor - phi) + np.asarray(theta_delta, dtype=float)
        # 1 - a(1-x) e^{i psi}, real part rewritten without cancellation
        s = np.sin(0.5 * psi)
        re = (1.0 - a) + a * x + 2.0 * a * (1.0 - x) * s * s
        im = -a * (1.0 - x) * np.sin(psi)
        logmod = np.log(np.hypot(re, im))
        arg = np.arctan2(im, re)
        out = np.exp(-self.beta * (logmod + 1j * arg))
        return _as_float_or_array(out)

    def radial_hints(self, theta_anchor, theta_delta):
        a, phi = self._mod_arg
        if a == 0.0:
            return (), ()
        base = (1.0 - a) / a
        if theta_anchor is None:
            return (PoleHint(-base, base),), ()
        psi = (theta_anchor - phi) + theta_delta
        scale = base + 2.0 * abs(math.sin(0.5 * psi)) / math.sqrt(a)
        return (PoleHint(-base, scale),), ()

    def angular_hints(self, x):
        a, phi = self._mod_arg
        if a == 0.0:
            return (), ()
        if x is None:
            scale = (1.0 - a) / math.sqrt(a)
        else:
            scale = ((1.0 - a) + a * x) / math.sqrt(a)
        return (PoleHint(phi, scale),), ()


@dataclass(frozen=True)
class PoleShift(DiscFunction):
    """``delta / (1 + delta - z e^{-i rotation})^{exponent}``.

    The pole parameter is carried in log space (``log_delta = ln delta``)
    because the separation schedules drive it doubly-exponentially small.
    """

    log_delta: float
    exponent: float
    rotation: float = 0.0

    def __post_init__(self):
        if not self.exponent > 0.0:
            raise ValueError("exponent must be positive")
        if not self.log_delta < math.log(0.5):
            raise ValueError("pole shift delta must lie in (0, 1/2)")

    @property
    def delta(self) -> float:
        return math.exp(self.log_delta)

    def abs_values(self, x, theta_anchor, theta_delta):
        psi = (theta_anchor - self.rotation) + np.asarray(theta_delta, dtype=float)
        logmod = log_pole_modulus(self.delta, np.asarray(x, dtype=float), psi)
        out = np.exp(self.log_delta - self.exponent * logmod)
        return _as_float_or_array(out)

    def complex_values(self, x, theta_anchor, theta_delta):
        d = self.delta
        x = np.asarray(x, dtype=float)
        psi = (theta_anchor - self.rotation) + np.asarray(theta_delta, dtype=float)
        s = np.sin(0.5 * psi)
        re = (d + x) + 2.0 * (1.0 - x) * s * s
        im = -(1.0 - x) * np.sin(psi)
        logmod = np.log(np.hypot(re, im))
        arg = np.arctan2(im, re)
        out = np.exp(self.log_delta - self.exponent * (logmod + 1j * arg))
        return _as_float_or_array(out)

    def radial_hints(self, theta_anchor, theta_delta):
        d = self.delta
        if theta_anchor is None:
            return (PoleHint(-d, d),), ()
        psi = (theta_anchor - self.rotation) + theta_delta
        return (PoleHint(-d, d + 2.0 * abs(math.sin(0.5 * psi))),), ()

    def angular_hints(self, x):
        d = self.delta
        scale = d if x is None else d + x
        return (PoleHint(self.rotation, scale),), ()


@dataclass(frozen=True)
class Sum(DiscFunction):
    """Pointwise sum of finitely many disc functions."""

    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("Sum needs at least one term")

    @property
    def is_analytic(self):
        return all(t.is_analytic for t in self.terms)

    def complex_values(self, x, theta_anchor, theta_delta):
        out = self.terms[0].complex_values(x, theta_anchor, theta_delta)
        for t in self.terms[1:]:
            out = out + t.complex_values(x, theta_anchor, theta_delta)
        return out

    def radial_hints(self, theta_anchor, theta_delta):
        poles, breaks = [], []
        for t in self.terms:
            p, b = t.radial_hints(theta_anchor, theta_delta)
            poles.extend(p)
            breaks.extend(b)
        return tuple(poles), tuple(breaks)

    def angular_hints(self, x):
        poles, breaks = [], []
        for t in self.terms:
            p, b = t.angular_hints(x)
            poles.extend(p)
            breaks.extend(b)
        return tuple(poles), tuple(breaks)


@dataclass(frozen=True)
class Scale(DiscFunction):
    """A complex scalar multiple of a disc function."""

    factor: complex
    fn: DiscFunction

    def __post_init__(self):
        object.__setattr__(self, "factor", complex(self.factor))

    @property
    def is_analytic(self):
        return self.fn.is_analytic

    def complex_values(self, x, theta_anchor, theta_delta):
        return self.factor * self.fn.complex_values(x, theta_anchor, theta_delta)

    def abs_values(self, x, theta_anchor, theta_delta):
        return abs(self.factor) * self.fn.abs_values(x, theta_anchor, theta_delta)

    def radial_hints(self, theta_anchor, theta_delta):
        return self.fn.radial_hints(theta_anchor, theta_delta)

    def angular_hints(self, x):
        return self.fn.angular_hints(x)


@dataclass(frozen=True)
class Masked(DiscFunction):
    """A disc function cut by the indicator of an annulus arc.

    Masked functions are measurable rather than analytic; the norm
    evaluators accept them like any other variant.
    """

    fn: DiscFunction
    arc: AnnulusArc
    keep_inside: bool = True

    is_analytic = False

    def _gate(self, x, theta_anchor, theta_delta):
        ind = self.arc.indicator(x, theta_anchor, theta_delta)
        return ind if self.keep_inside else 1.0 - ind

    def complex_values(self, x, theta_anchor, theta_delta):
        return self.fn.complex_values(x, theta_anchor, theta_delta) * \
            self._gate(x, theta_anchor, theta_delta)

    def abs_values(self, x, theta_anchor, theta_delta):
        return self.fn.abs_values(x, theta_anchor, theta_delta) * \
            self._gate(x, theta_anchor, theta_delta)

    def radial_hints(self, theta_anchor, theta_delta):
        poles, breaks = self.fn.radial_hints(theta_anchor, theta_delta)
        return poles, breaks + (self.arc.x_lo, self.arc.x_hi)

    def angular_hints(self, x):
        poles, breaks = self.fn.angular_hints(x)
        w = self.arc.theta_halfwidth
        edge = PoleHint(self.arc.theta_center, w, local_breaks=(-w, w))
        return poles + (edge,), breaks


def evaluate_abs(f: DiscFunction, z: DiscPoint) -> float:
    """``|f(z)|`` at a validated point strictly inside the disc."""
    if not isinstance(z, DiscPoint):
        z = DiscPoint(*z)
    return float(f.abs_values(z.one_minus_r, z.theta, 0.0))


def evaluate_complex(f: DiscFunction, z: DiscPoint) -> complex:
    """``f(z)`` as a complex number."""
    if not isinstance(z, DiscPoint):
        z = DiscPoint(*z)
    return complex(f.complex_values(z.one_minus_r, z.theta, 0.0))


def rotate(f: DiscFunction, phi: float) -> DiscFunction:
    """The function ``z -> f(z e^{-i phi})``.

    Rotation is closed on every variant, and both norms are invariant
    under it.
    """
    if isinstance(f, PowerSeries):
        coef = tuple(c * complex(math.cos(-k * phi), math.sin(-k * phi))
                     for k, c in enumerate(f.coefficients))
        return PowerSeries(coef)
    if isinstance(f, PoleKernel):
        return PoleKernel(f.alpha * complex(math.cos(phi), math.sin(phi)), f.beta)
    if isinstance(f, PoleShift):
        return PoleShift(f.log_delta, f.exponent, f.rotation + phi)
    if isinstance(f, Sum):
        return Sum(tuple(rotate(t, phi) for t in f.terms))
    if isinstance(f, Scale):
        return Scale(f.factor, rotate(f.fn, phi))
    if isinstance(f, Masked):
        return Masked(rotate(f.fn, phi), f.arc.rotated(phi), f.keep_inside)
    raise TypeError(f"cannot rotate {type(f).__name__}")
