"""Adaptive quadrature with pole-adapted substitutions, and the two norms.

The engine integrates over panels with an embedded Gauss-Kronrod (G7, K15)
rule.  Panels come in two kinds:

* plain panels live directly on the integration axis;
* mapped panels live in a log-stretched coordinate ``u`` around a hinted
  feature at ``c`` with scale ``s``: the axis point is ``t = c +/- s*(e^u - 1)``.
  The map turns a power singularity (or a sharp peak) whose distance to the
  interval spans many decades into a mildly varying integrand over a short
  ``u`` range, and it hands the integrand its offset from ``c`` at full
  relative precision.

Hints are supplied structurally by the function being integrated, never
detected numerically: the features of interest sit at distances down to
1e-50 where detection is hopeless but the structure is known exactly.

Divergence is detected two ways: the total estimate growing by more than
10% on three successive refinement sweeps (catches strong power blow-up
early), and a panel lineage that reaches the subdivision depth cap with
undecayed values (catches logarithmic and near-threshold blow-up, which
grows too slowly for the global test).

Everything is deterministic: fixed panel ordering, compensated final
summation, no randomness.  Identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _stable
from .core import ExponentPair, NormResult, PoleHint, ResultStatus, TWO_PI

_EPS = float(np.finfo(float).eps)

# Gauss-Kronrod (G7, K15) nodes and weights, ascending node order.
_XGK_POS = (0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
            0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
            0.2077849550078985)
_WGK_POS = (0.0229353220105292, 0.0630920926299785, 0.1047900103222502,
            0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
            0.2044329400752989)
_WGK_0 = 0.2094821410847278
_WG_POS = (0.1294849661688697, 0.2797053914892767, 0.3818300505051189)
_WG_0 = 0.4179591836734694

_XGK = np.array([-x for x in _XGK_POS] + [0.0] + [x for x in reversed(_XGK_POS)])
_WGK = np.array(list(_WGK_POS) + [_WGK_0] + list(reversed(_WGK_POS)))
_WG_FULL = np.zeros(15)
_WG_FULL[[1, 3, 5]] = _WG_POS
_WG_FULL[7] = _WG_0
_WG_FULL[[9, 11, 13]] = list(reversed(_WG_POS))

_DU_INIT = 2.0            # initial mapped-panel width in log-stretched units
_DEPTH_CAP = 50           # panels never subdivide deeper than this
_DECAY_TOL = 0.98         # lineage counts as undecayed above this value ratio
_LINEAGE_DIVERGE = 10     # undecayed splits before an unresolvable lineage diverges
_GROWTH_FACTOR = 1.10     # documented global divergence threshold (+10%)
_GROWTH_STREAK = 3        # successive growing sweeps before declaring divergence
_MAX_SPLITS_PER_SWEEP = 64


class QuadratureDivergedError(ArithmeticError):
    """Raised by operators whose return type cannot carry a divergence flag."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and budgets for the adaptive engine.

    ``outer_samples`` sizes the non-adaptive fallback discretization the
    norm evaluators fall back to when the adaptive outer integral runs out
    of panels.  ``pole_hints`` are extra ``(location, scale)`` hints merged
    into direct ``integrate_1d`` calls.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_panels: int = 4096
    outer_samples: int = 512
    pole_hints: tuple = ()

    def __post_init__(self):
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValueError("tolerances must be positive")
        if self.max_panels < 8:
            raise ValueError("max_panels must be at least 8")


DEFAULT_CONFIG = QuadratureConfig()


def stable_pole_modulus_sq(delta: float, x: float, theta_offset: float):
    """``|1 + delta - (1 - x) e^{i theta}|^2`` free of cancellation.

    Valid for ``delta > 0`` and ``0 < x <= 1``; both summands of the
    expansion are nonnegative, so accuracy holds for delta and x down to
    the underflow threshold.
    """
    if np.ndim(delta) == 0 and not delta > 0.0:
        raise ValueError("delta must be positive")
    if np.ndim(x) == 0 and not (0.0 < x <= 1.0):
        raise ValueError("x = 1 - r must lie in (0, 1]")
    return _stable.stable_pole_modulus_sq(delta, x, theta_offset)


@dataclass
class _IntResult:
    value: object          # float, or complex for the operator integrals
    trunc: float
    prop: float
    evaluations: int
    status: ResultStatus

    @property
    def error_estimate(self) -> float:
        return self.trunc + self.prop


class _Panel:
    __slots__ = ("zone", "lo", "hi", "depth", "streak",
                 "frozen", "value", "err", "prop")

    def __init__(self, zone, lo, hi, depth=0, streak=0):
        self.zone = zone
        self.lo = lo
        self.hi = hi
        self.depth = depth
        self.streak = streak
        self.frozen = False
        self.value = 0.0
        self.err = 0.0
        self.prop = 0.0


class _Zone:
    """A log-stretched neighborhood of one hinted feature."""

    __slots__ = ("center", "scale", "sign")

    def __init__(self, center, scale, sign):
        self.center = center
        self.scale = scale
        self.sign = sign  # +1: axis points at center + distance; -1: center - distance


def _normalize_hints(hints):
    out = []
    for h in hints or ():
        if isinstance(h, PoleHint):
            out.append(h)
        else:
            loc, scale = h
            out.append(PoleHint(float(loc), float(scale)))
    return out


def _merge_colocated(hints):
    by_loc = {}
    for h in hints:
        prev = by_loc.get(h.location)
        if prev is None:
            by_loc[h.location] = h
        else:
            by_loc[h.location] = PoleHint(
                h.location,
                min(prev.scale, h.scale),
                tuple(sorted(set(prev.local_breaks) | set(h.local_breaks))),
            )
    return sorted(by_loc.values(), key=lambda h: h.location)


def _subdivide(lo, hi, max_width):
    n = max(1, int(math.ceil((hi - lo) / max_width)))
    edges = [lo + (hi - lo) * k / n for k in range(n + 1)]
    edges[-1] = hi
    return edges


def _initial_panels(a, b, hints, breaks, zones, du=_DU_INIT):
    """Tile [a, b] with mapped panels around kept hints and plain panels elsewhere.

    Hints partition the interval at midpoints between their locations, so
    nested same-side features (several poles stacked beyond one endpoint)
    automatically collapse onto the finest-scale hint, whose log map
    resolves every coarser scale further out.
    """
    panels = []
    abs_breaks = sorted(b0 for b0 in breaks if a < b0 < b)

    kept = []
    dropped_breaks = []
    span = b - a
    for h in hints:
        dist = max(a - h.location, h.location - b, 0.0)
        if dist <= span and h.scale > 0.0:
            kept.append(h)
        else:
            dropped_breaks.extend(h.location + o for o in h.local_breaks)
    kept = _merge_colocated(kept)
    abs_breaks = sorted(set(abs_breaks) | {d for d in dropped_breaks if a < d < b})

    if not kept:
        cuts = [a] + abs_breaks + [b]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            n = max(1, min(8, round(8 * (hi - lo) / span)))
            edges = _subdivide(lo, hi, (hi - lo) / n)
            for u0, u1 in zip(edges[:-1], edges[1:]):
                panels.append(_Panel(-1, u0, u1))
        return panels

    locs = [h.location for h in kept]
    seg_bounds = [a]
    for c0, c1 in zip(locs[:-1], locs[1:]):
        seg_bounds.append(min(b, max(a, 0.5 * (c0 + c1))))
    seg_bounds.append(b)

    for h, seg_lo, seg_hi in zip(kept, seg_bounds[:-1], seg_bounds[1:]):
        if not seg_lo < seg_hi:
            continue
        c, s = h.location, h.scale
        local_abs = [bp for bp in abs_breaks if seg_lo < bp < seg_hi]
        for sign in (-1, +1):
            if sign < 0:
                t0, t1 = seg_lo, min(seg_hi, c)
            else:
                t0, t1 = max(seg_lo, c), seg_hi
            if not t0 < t1:
                continue
            if sign < 0:
                g0, g1 = c - t1, c - t0
            else:
                g0, g1 = t0 - c, t1 - c
            u0 = math.log1p(max(g0, 0.0) / s)
            u1 = math.log1p(g1 / s)
            if not u0 < u1:
                continue
            usplits = {u0, u1}
            for off in h.local_breaks:
                if sign * off > 0 and g0 < abs(off) < g1:
                    usplits.add(math.log1p(abs(off) / s))
            for bp in local_abs:
                d = sign * (bp - c)
                if g0 < d < g1:
                    usplits.add(math.log1p(d / s))
            cuts = sorted(usplits)
            zid = len(zones)
            zones.append(_Zone(c, s, sign))
            for ulo, uhi in zip(cuts[:-1], cuts[1:]):
                for e0, e1 in zip(*(lambda e: (e[:-1], e[1:]))(_subdivide(ulo, uhi, du))):
                    panels.append(_Panel(zid, e0, e1))
    return panels


def _evaluate_panels(panels, zones, g2, with_uncertainty, state):
    """Batched G7/K15 evaluation, grouped per zone so anchors stay scalar."""
    groups = {}
    for p in panels:
        groups.setdefault(p.zone, []).append(p)
    for zid, group in sorted(groups.items(), key=lambda kv: kv[0]):
        lo = np.array([p.lo for p in group])
        hi = np.array([p.hi for p in group])
        mid = 0.5 * (lo + hi)
        hw = 0.5 * (hi - lo)
        nodes = mid[:, None] + hw[:, None] * _XGK[None, :]
        if zid < 0:
            anchor = 0.0
            deltas = nodes
            jac = 1.0
        else:
            z = zones[zid]
            anchor = z.center
            deltas = z.sign * z.scale * np.expm1(nodes)
            jac = z.scale * np.exp(nodes)
        with np.errstate(all="ignore"):
            out = g2(anchor, deltas.reshape(-1))
        state["evals"] += deltas.size
        if with_uncertainty:
            vals, uncs = out
            uncs = np.asarray(uncs, dtype=float).reshape(deltas.shape) * jac
        else:
            vals, uncs = out, None
        fv = np.asarray(vals).reshape(deltas.shape) * jac
        if not np.all(np.isfinite(np.abs(fv))):
            state["nonfinite"] = True
            fv = np.nan_to_num(fv, nan=0.0, posinf=0.0, neginf=0.0)
        resk = hw * (fv @ _WGK)
        resg = hw * (fv @ _WG_FULL)
        resabs = hw * (np.abs(fv) @ _WGK)
        mean = resk / np.where(hw > 0.0, 2.0 * hw, 1.0)
        resasc = hw * (np.abs(fv - mean[:, None]) @ _WGK)
        diff = np.abs(resk - resg)
        with np.errstate(all="ignore"):
            scaled = np.minimum(1.0, (200.0 * diff / np.maximum(resasc, 5e-324)) ** 1.5)
        err = np.where(resasc > 0.0, resasc * scaled, diff)
        err = np.maximum(err, 50.0 * _EPS * resabs)
        for i, p in enumerate(group):
            p.value = complex(resk[i]) if np.iscomplexobj(resk) else float(resk[i])
            p.err = float(err[i])
            p.prop = float(hw[i] * (uncs[i] @ _WGK)) if uncs is not None else 0.0


def _compensated_total(panels):
    ordered = sorted(panels, key=lambda p: (p.zone, p.lo))
    if any(isinstance(p.value, complex) for p in ordered):
        re = math.fsum(p.value.real for p in ordered)
        im = math.fsum(complex(p.value).imag for p in ordered)
        return complex(re, im)
    return math.fsum(p.value for p in ordered)


def _integrate_anchored(g2, a, b, config, poles=(), breaks=(), *,
                        with_uncertainty=False, fixed_panels=None) -> _IntResult:
    """Adaptive core.  ``g2(anchor, offsets)`` evaluates at ``anchor + offsets``.

    Mapped panels pass the feature location as the anchor and exact
    log-stretched distances as offsets, which is what preserves relative
    precision for features living far below the rounding granularity of
    their absolute position.
    """
    if not a < b:
        raise ValueError("integration interval must satisfy a < b")
    zones = []
    hints = _merge_colocated(_normalize_hints(poles))
    panels = _initial_panels(a, b, hints, breaks, zones)
    if fixed_panels is not None:
        while len(panels) < fixed_panels:
            widest = max(panels, key=lambda p: (p.hi - p.lo, p.zone, p.lo))
            mid = 0.5 * (widest.lo + widest.hi)
            if not widest.lo < mid < widest.hi:
                break
            panels.remove(widest)
            panels.append(_Panel(widest.zone, widest.lo, mid))
            panels.append(_Panel(widest.zone, mid, widest.hi))

    state = {"evals": 0, "nonfinite": False}
    _evaluate_panels(panels, zones, g2, with_uncertainty, state)

    status = ResultStatus.OK
    growth_streak = 0
    prev_total = None
    sweep = 0
    while True:
        total = _compensated_total(panels)
        trunc = math.fsum(p.err for p in panels)
        prop = math.fsum(p.prop for p in panels)
        if state["nonfinite"]:
            status = ResultStatus.DIVERGED
            break
        if fixed_panels is not None:
            break
        target = max(config.abs_tol, config.rel_tol * abs(total))
        if trunc <= target:
            break

        if sweep >= 2 and prev_total is not None and abs(prev_total) > config.abs_tol:
            growth_streak = growth_streak + 1 if abs(total) > _GROWTH_FACTOR * abs(prev_total) else 0
            if growth_streak >= _GROWTH_STREAK:
                status = ResultStatus.DIVERGED
                break
        prev_total = total

        candidates = sorted(
            (p for p in panels if not p.frozen and p.err > 0.0),
            key=lambda p: (-p.err, p.zone, p.lo),
        )
        if not candidates or len(panels) >= config.max_panels:
            status = ResultStatus.NO_CONVERGENCE
            break

        budget = min(_MAX_SPLITS_PER_SWEEP, config.max_panels - len(panels))
        cand_err = math.fsum(p.err for p in candidates)
        to_split, acc = [], 0.0
        for p in candidates:
            if len(to_split) >= budget:
                break
            to_split.append(p)
            acc += p.err
            if acc >= 0.9 * cand_err:
                break

        new_children = []
        diverged = False
        for p in to_split:
            mid = 0.5 * (p.lo + p.hi)
            if not (p.lo < mid < p.hi) or p.depth >= _DEPTH_CAP:
                p.frozen = True
                if p.streak >= _LINEAGE_DIVERGE:
                    diverged = True
                continue
            panels.remove(p)
            left = _Panel(p.zone, p.lo, mid, p.depth + 1)
            right = _Panel(p.zone, mid, p.hi, p.depth + 1)
            left.parent_value = p.value
            right.parent_value = p.value
            left.parent_streak = p.streak
            right.parent_streak = p.streak
            panels.append(left)
            panels.append(right)
            new_children.extend((left, right))
        if diverged:
            status = ResultStatus.DIVERGED
            break
        if new_children:
            _evaluate_panels(new_children, zones, g2, with_uncertainty, state)
            for ch in new_children:
                pv = abs(ch.parent_value)
                ch.streak = ch.parent_streak + 1 if abs(ch.value) >= _DECAY_TOL * pv else 0
                del ch.parent_value, ch.parent_streak
        elif not any(not p.frozen and p.err > 0.0 for p in panels):
            status = ResultStatus.NO_CONVERGENCE
            break
        sweep += 1

    total = _compensated_total(panels)
    trunc = math.fsum(p.err for p in panels)
    prop = math.fsum(p.prop for p in panels)
    return _IntResult(total, trunc, prop, state["evals"], status)


def integrate_1d(g, a: float, b: float, config: QuadratureConfig | None = None,
                 hints=(), breaks=()) -> NormResult:
    """Adaptively integrate a real function over ``(a, b)``.

    ``g`` must accept numpy arrays of abscissas.  ``hints`` is a list of
    :class:`~radnorm.core.PoleHint` (or bare ``(location, scale)`` pairs)
    marking endpoint singularities or sharp features; the panels nearest a
    hinted location are integrated under the log-stretching substitution
    ``t = c +/- s * (e^u - 1)``.  The returned ``error_estimate`` bounds
    the estimated truncation error.  Identical inputs produce bit-identical
    results.
    """
    cfg = config or DEFAULT_CONFIG
    all_hints = tuple(_normalize_hints(hints)) + tuple(_normalize_hints(cfg.pole_hints))

    def g2(anchor, offsets):
        return np.asarray(g(anchor + offsets), dtype=float)

    res = _integrate_anchored(g2, float(a), float(b), cfg, all_hints, breaks)
    value = res.value.real if isinstance(res.value, complex) else res.value
    return NormResult(float(value), res.error_estimate, res.evaluations, res.status)


def _pow_pos(v: float, e: float) -> float:
    """``v**e`` for v >= 0, routed through logs outside the comfortable range."""
    if v == 0.0:
        return 0.0
    if 1e-200 < v < 1e200 and abs(e) * abs(math.log10(v)) < 300.0:
        return v ** e
    le = e * math.log(v)
    if le >= 709.0:
        return math.inf
    return math.exp(le)


def _power_with_err(v: float, dv: float, e: float) -> tuple[float, float]:
    """``(v**e, error)`` with the error honest even when dv is not << v."""
    v = max(v, 0.0)
    g = _pow_pos(v, e)
    if dv <= 0.0:
        return g, 0.0
    if v > 0.0 and dv < 1e-3 * v:
        return g, abs(e) * _pow_pos(v, e - 1.0) * dv
    up = _pow_pos(v + dv, e) - g
    dn = g - _pow_pos(max(v - dv, 0.0), e)
    return g, max(up, dn, 0.0)


def _with_angular_replicas(poles):
    """Duplicate angular hints one period away so wraparound poles are seen."""
    out = list(poles)
    for h in poles:
        out.append(PoleHint(h.location - TWO_PI, h.scale, h.local_breaks))
        out.append(PoleHint(h.location + TWO_PI, h.scale, h.local_breaks))
    return tuple(out)


def _merge_status(*statuses) -> ResultStatus:
    if ResultStatus.DIVERGED in statuses:
        return ResultStatus.DIVERGED
    if ResultStatus.NO_CONVERGENCE in statuses:
        return ResultStatus.NO_CONVERGENCE
    return ResultStatus.OK


def _nested_norm(f, e: ExponentPair, config, radial_inner: bool) -> NormResult:
    """Shared driver for both norms; the flag picks which axis is inner."""
    cfg = config or DEFAULT_CONFIG
    p, q = e.p, e.q
    if radial_inner:
        inner_exp, outer_exp = p, q
    else:
        inner_exp, outer_exp = q, p
    power_ratio = outer_exp / inner_exp
    state = {"evals": 0, "inner_status": ResultStatus.OK}

    def outer_integrand(anchor, offsets):
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
        vals = np.empty(offsets.shape)
        uncs = np.empty(offsets.shape)
        for i, d in enumerate(offsets):
            d = float(d)
            if radial_inner:
                poles, brks = f.radial_hints(anchor, d)

                def g2(anc2, off2):
                    x = np.clip(anc2 + np.asarray(off2, dtype=float), 0.0, 1.0)
                    with np.errstate(all="ignore"):
                        return f.abs_values(x, anchor, d) ** inner_exp

                res = _integrate_anchored(g2, 0.0, 1.0, cfg, poles, brks)
                inner_val = res.value
            else:
                x = min(max(anchor + d, 0.0), 1.0)
                poles, brks = f.angular_hints(x)

                def g2(anc2, off2):
                    with np.errstate(all="ignore"):
                        return f.abs_values(x, anc2, np.asarray(off2, dtype=float)) ** inner_exp

                res = _integrate_anchored(g2, 0.0, TWO_PI, cfg,
                                          _with_angular_replicas(poles), brks)
                inner_val = res.value / TWO_PI
            state["evals"] += res.evaluations
            if res.status is ResultStatus.DIVERGED:
                vals[i], uncs[i] = math.inf, 0.0
                continue
            if res.status is ResultStatus.NO_CONVERGENCE:
                state["inner_status"] = ResultStatus.NO_CONVERGENCE
            err = res.error_estimate / (1.0 if radial_inner else TWO_PI)
            vals[i], uncs[i] = _power_with_err(inner_val, err, power_ratio)
        return vals, uncs

    if radial_inner:
        poles, _ = f.angular_hints(None)
        outer = _integrate_anchored(outer_integrand, 0.0, TWO_PI, cfg,
                                    _with_angular_replicas(poles), (),
                                    with_uncertainty=True)
        if outer.status is ResultStatus.NO_CONVERGENCE:
            retry = _integrate_anchored(outer_integrand, 0.0, TWO_PI, cfg,
                                        _with_angular_replicas(poles), (),
                                        with_uncertainty=True,
                                        fixed_panels=cfg.outer_samples)
            if retry.error_estimate < outer.error_estimate:
                outer = retry
        raw, raw_err = outer.value / TWO_PI, outer.error_estimate / TWO_PI
    else:
        poles, brks = f.radial_hints(None, None)
        outer = _integrate_anchored(outer_integrand, 0.0, 1.0, cfg, poles, brks,
                                    with_uncertainty=True)
        if outer.status is ResultStatus.NO_CONVERGENCE:
            retry = _integrate_anchored(outer_integrand, 0.0, 1.0, cfg, poles, brks,
                                        with_uncertainty=True,
                                        fixed_panels=cfg.outer_samples)
            if retry.error_estimate < outer.error_estimate:
                outer = retry
        raw, raw_err = outer.value, outer.error_estimate

    status = _merge_status(outer.status, state["inner_status"])
    value, err = _power_with_err(max(raw, 0.0), raw_err, 1.0 / outer_exp)
    return NormResult(value, err, state["evals"], status)


def rm_norm(f, e: ExponentPair, config: QuadratureConfig | None = None) -> NormResult:
    """Average-radial-integrability norm: p-integral along each radius
    (in ``dr``), then q-integral over angles (in ``dtheta / 2pi``).
    """
    return _nested_norm(f, e, config, radial_inner=True)


def mixed_norm(f, e: ExponentPair, config: QuadratureConfig | None = None) -> NormResult:
    """Mixed norm with the integration order swapped: q-integral over each
    circle (in ``dtheta / 2pi``), then p-integral over radii (in ``dr``).
    """
    return _nested_norm(f, e, config, radial_inner=False)
