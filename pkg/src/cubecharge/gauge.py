"""Gauge-driven integration: 1D adaptive interval integration, the
partial-integral sup norm, the d-dimensional dyadic cube integral, and
a divergence-theorem harness.

The 1D integrator tags interior intervals at their midpoints and the
two boundary intervals at the domain endpoints (a tag may sit on an
interval's end).  A non-finite sample at 0 or 1 is treated as 0 and
recorded in the result notes; integrals are insensitive to values on
null sets.  Refinement is discrepancy guided: an interval whose
one-point contribution disagrees with its two-child probe is split.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .charges import eval_figure, flux_charge
from .dyadic import DyadicFigure, default_depth, unit_cube_index
from .errors import (DepthExceeded, NonFiniteSample, NumericalError,
                     ValidationError)

DEFAULT_BUDGET_1D = 2 ** 20
DEFAULT_BUDGET_DD = 2 ** 22
COUSIN_MAX_DEPTH = 48

# interval kinds: tag at the left end, at the midpoint, at the right end
_LEFT, _MID, _RIGHT = 0, 1, 2


@dataclass(frozen=True)
class TaggedPartition1D:
    """Breakpoints 0 = a_0 < ... < a_n = 1 with one tag per interval,
    each tag lying inside its interval."""

    breakpoints: np.ndarray
    tags: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        tg = np.asarray(self.tags, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or tg.shape != (bp.size - 1,):
            raise ValidationError("need n+1 breakpoints and n tags")
        if bp[0] != 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
            raise ValidationError("breakpoints must increase from 0 to 1")
        if np.any(tg < bp[:-1]) or np.any(tg > bp[1:]):
            raise ValidationError("each tag must lie in its interval")
        bp.setflags(write=False)
        tg.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "tags", tg)

    @property
    def mesh(self):
        return float(np.diff(self.breakpoints).max())


@dataclass(frozen=True)
class IntegralResult:
    """Adaptive integration outcome; history holds the successive
    Riemann sums, notes any conventions applied along the way."""

    value: float
    count: int
    finest_mesh: float
    converged: bool
    history: tuple
    notes: tuple = field(default=())


def cousin_partition_1d(delta, max_depth=COUSIN_MAX_DEPTH) -> TaggedPartition1D:
    """A delta-fine tagged partition by recursive bisection.

    [a, b] is accepted with tag at its midpoint m when b - a < delta(m)
    (strict), else split.  A positive gauge admits such a partition; the
    depth guard catches gauges that sink too fast for the budget.
    """
    breaks = [0.0]
    tags = []
    stack = [(0.0, 1.0, 0)]
    while stack:
        a, b, depth = stack.pop()
        if depth > max_depth:
            raise DepthExceeded(
                "bisection passed depth %d; the gauge sinks too fast" % max_depth)
        m = 0.5 * (a + b)
        g = float(delta(m))
        if not g > 0:
            raise ValidationError("gauge must be positive (delta(%r) = %r)" % (m, g))
        if b - a < g:
            breaks.append(b)
            tags.append(m)
        else:
            # right half pushed first so the left half is handled next
            stack.append((m, b, depth + 1))
            stack.append((a, m, depth + 1))
    return TaggedPartition1D(np.array(breaks), np.array(tags))


def _eval_many(f, xs, notes, boundary_ok):
    """Evaluate f on an array of points, vectorized when possible.

    Non-finite values at 0 or 1 become 0 when boundary_ok (recorded);
    non-finite values elsewhere raise.
    """
    xs = np.asarray(xs, dtype=float)
    try:
        vals = np.asarray(f(xs), dtype=float)
        if vals.shape != xs.shape:
            raise ValueError
    except (TypeError, ValueError, ZeroDivisionError):
        vals = np.empty(xs.shape)
        for i, x in enumerate(xs.ravel()):
            try:
                vals.ravel()[i] = f(float(x))
            except ZeroDivisionError:
                vals.ravel()[i] = np.nan
    bad = ~np.isfinite(vals)
    if np.any(bad):
        on_end = (xs == 0.0) | (xs == 1.0)
        if boundary_ok and np.all(on_end[bad]):
            vals = np.where(bad, 0.0, vals)
            note = "non-finite sample at a domain endpoint treated as 0"
            if note not in notes:
                notes.append(note)
        else:
            raise NonFiniteSample(
                "integrand non-finite at x = %r" % float(xs[bad].ravel()[0]))
    return vals


def _child_tags(lo, hi, kind):
    """Tags of the two children of an interval under the kind rules."""
    m = 0.5 * (lo + hi)
    lk = np.where(kind == _LEFT, _LEFT, _MID)
    rk = np.where(kind == _RIGHT, _RIGHT, _MID)
    lt = np.where(lk == _LEFT, lo, 0.5 * (lo + m))
    rt = np.where(rk == _RIGHT, hi, 0.5 * (m + hi))
    return m, lt, lk, rt, rk


class _Partition1D:
    """Mutable tagged-partition state for the 1D integrator: interval
    bounds, kinds, tags, cached tag values, and cached child-tag values
    (the probes that a split promotes to child tags)."""

    def __init__(self, f, notes):
        self.f = f
        self.notes = notes
        self.lo = np.array([0.0, 0.5])
        self.hi = np.array([0.5, 1.0])
        self.kind = np.array([_LEFT, _RIGHT])
        self.tag = np.array([0.0, 1.0])
        self.ftag = _eval_many(f, self.tag, notes, True)
        _, lt, _, rt, _ = _child_tags(self.lo, self.hi, self.kind)
        self.flt = _eval_many(f, lt, notes, True)
        self.frt = _eval_many(f, rt, notes, True)
        self.settled = np.zeros(2, dtype=bool)

    @property
    def count(self):
        return self.lo.size

    def sum(self):
        return float(np.dot(self.ftag, self.hi - self.lo))

    def disc(self):
        lens = self.hi - self.lo
        return np.abs(self.ftag * lens - 0.5 * (self.flt + self.frt) * lens)

    def split(self, mask):
        """Replace every masked interval by its two children, reusing
        the cached probe values as the children's tag values."""
        lo, hi, kind = self.lo, self.hi, self.kind
        m, lt, lk, rt, rk = (arr[mask] for arr in _child_tags(lo, hi, kind))
        keep = ~mask
        nlo = np.concatenate([lo[keep], lo[mask], m])
        nhi = np.concatenate([hi[keep], m, hi[mask]])
        nkind = np.concatenate([kind[keep], lk, rk])
        ntag = np.concatenate([self.tag[keep], lt, rt])
        nftag = np.concatenate([self.ftag[keep], self.flt[mask], self.frt[mask]])
        _, clt, _, crt, _ = _child_tags(
            np.concatenate([lo[mask], m]), np.concatenate([m, hi[mask]]),
            np.concatenate([lk, rk]))
        fresh = _eval_many(self.f, np.concatenate([clt, crt]), self.notes, True)
        half = clt.size
        nflt = np.concatenate([self.flt[keep], fresh[:half]])
        nfrt = np.concatenate([self.frt[keep], fresh[half:]])
        fresh_flags = np.zeros(2 * half, dtype=bool)
        nsettled = np.concatenate([self.settled[keep], fresh_flags])
        order = np.argsort(nlo, kind="stable")
        self.lo, self.hi, self.kind = nlo[order], nhi[order], nkind[order]
        self.tag, self.ftag = ntag[order], nftag[order]
        self.flt, self.frt = nflt[order], nfrt[order]
        self.settled = nsettled[order]

    def active(self):
        """Interior intervals still subject to discrepancy refinement:
        not endpoint-tagged, not locked by a completed settling pass."""
        return (self.kind == _MID) & ~self.settled

    def audit(self):
        """Disagreement of each active interval's one-point sum with
        its four-grandchild refinement, from one fresh vectorized pass.

        A tag and its two cached probes can agree by aliasing on an
        unresolved oscillation; checking the next level down as well
        makes that coincidence much rarer.  Boundary-kind intervals are
        excluded (their mismatch reflects the endpoint, not the mesh).
        """
        act = self.active()
        lo, hi = self.lo[act], self.hi[act]
        off = (hi - lo)[:, None] * np.array([1.0, 3.0, 5.0, 7.0]) / 8.0
        vals = _eval_many(self.f, (lo[:, None] + off).ravel(),
                          self.notes, False).reshape(-1, 4)
        gap = np.zeros(self.count)
        gap[act] = np.abs(self.ftag[act] - vals.mean(axis=1)) * (hi - lo)
        return gap

    def result(self, converged, history, notes):
        return IntegralResult(history[-1], self.count,
                              float((self.hi - self.lo).min()), converged,
                              tuple(history), tuple(notes))


def hk_integrate_1d(f, tol=1e-6, budget=DEFAULT_BUDGET_1D) -> IntegralResult:
    """Adaptive gauge-style integration of f over [0, 1].

    Interior intervals split where their one-point and two-child
    Riemann contributions disagree, until the summed discrepancy drops
    below a fixed fraction of tol and a fresh four-point audit
    confirms it; intervals surviving a completed settling pass are
    locked and cost nothing afterwards.  The two endpoint-tagged
    boundary intervals are exempt from discrepancy refinement (an
    integrand oscillating near an endpoint keeps their discrepancy
    large no matter how short they get).  Instead each is halved once
    per cycle (repeatedly while halving it stays cheap), and a side
    retires once the settled contribution of its end region has moved
    less than a fraction of tol across two consecutive halvings.  The
    run converges when both sides have retired; hitting the interval
    budget, or the length floor on a side that refuses to settle,
    returns the best estimate with converged False.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    notes = []
    part = _Partition1D(f, notes)
    history = []
    pending = [None, None]   # (region edge, prior contribution) per side
    streak = [0, 0]
    stopped = [False, False]
    while True:
        # settle the intervals exposed since the last completed pass
        while True:
            history.append(part.sum())
            if part.count >= budget:
                return part.result(False, history, notes)
            disc = part.disc()
            disc[~part.active()] = 0.0
            top = float(disc.max())
            if disc.sum() < 0.125 * tol or top == 0.0:
                gap = part.audit()
                gtop = float(gap.max())
                if gap.sum() < 0.25 * tol or gtop == 0.0:
                    break
                split = gap >= max(gtop / 16.0, tol / (16.0 * part.count))
            else:
                split = disc >= max(top / 16.0, tol / (16.0 * part.count))
            if not np.any(split):
                break
            if part.count + int(split.sum()) > budget:
                split &= np.cumsum(split) <= budget - part.count
                if not np.any(split):
                    return part.result(False, history, notes)
            part.split(split)
        part.settled[:] = True
        # compare each halved end region against its pre-halving value
        lens = part.hi - part.lo
        for side in range(2):
            if pending[side] is None:
                continue
            edge, prior = pending[side]
            pending[side] = None
            cut = int(np.searchsorted(part.lo, edge))
            sl = slice(None, cut) if side == 0 else slice(cut, None)
            current = float(np.dot(part.ftag[sl], lens[sl]))
            streak[side] = streak[side] + 1 \
                if abs(current - prior) < 0.25 * tol else 0
            if streak[side] >= 2:
                stopped[side] = True
        if stopped[0] and stopped[1]:
            return part.result(True, history, notes)
        # halve the boundary interval of each unretired side, staying
        # above the subnormal length range; a side whose discrepancy is
        # already small (a tame endpoint) is halved several times, since
        # pushing it deeper is cheap and its endpoint-tag error decays
        # quadratically, while a wild side gets one halving per cycle.
        can = [not stopped[0] and lens[0] > 1e-300,
               not stopped[1] and lens[-1] > 1e-300]
        if can[0]:
            pending[0] = (float(part.hi[0]), float(part.ftag[0] * lens[0]))
        if can[1]:
            pending[1] = (float(part.lo[-1]),
                          float(part.ftag[-1] * lens[-1]))
        if not (can[0] or can[1]):
            # no side can move; further cycles would repeat the same
            # sums without producing new evidence
            return part.result(False, history, notes)
        for step in range(8):
            lens = part.hi - part.lo
            disc = part.disc()
            mask = np.zeros(part.count, dtype=bool)
            mask[0] = can[0] and lens[0] > 1e-300 and (
                step == 0 or disc[0] < 0.25 * tol)
            mask[-1] = can[1] and lens[-1] > 1e-300 and (
                step == 0 or disc[-1] < 0.25 * tol)
            if not np.any(mask):
                break
            if part.count + int(mask.sum()) > budget:
                return part.result(False, history, notes)
            part.split(mask)


def alexiewicz_norm_1d(f, tol=1e-6, budget=DEFAULT_BUDGET_1D,
                       max_level=10) -> float:
    """max over a dyadic grid of |integral of f from 0 to x|.

    Cell integrals are computed by the adaptive 1D integrator on
    rescaled subintervals and accumulated; the grid is refined until the
    maximum stabilizes within tol.
    """
    prev = None
    for level in range(1, max_level + 1):
        cells = 2 ** level
        width = 1.0 / cells
        per_cell_tol = tol / cells
        parts = []
        for j in range(cells):
            a = j * width

            def g(t, a=a):
                return f(a + t * width) * width

            parts.append(hk_integrate_1d(g, per_cell_tol,
                                         max(budget // cells, 1024)).value)
        sums = np.concatenate([[0.0], np.cumsum(parts)])
        cur = float(np.abs(sums).max())
        if prev is not None and abs(cur - prev) < tol:
            return cur
        prev = cur
    raise NumericalError(
        "partial-integral maximum did not stabilize within %d levels"
        % max_level)


def dyadic_henstock(f, dim=None, tol=1e-6, budget=DEFAULT_BUDGET_DD,
                    tagrule="center", figure=None) -> IntegralResult:
    """Adaptive dyadic-cube integration of f over the unit cube or a
    dyadic figure.

    Cubes split into their 2^d children when the one-point contribution
    disagrees with the child sum.  Center tags keep every tag off cube
    faces (and so off face singularities); 'lower' tags at lower corners
    are available and stay on the vertex grid.
    """
    if figure is not None:
        if dim is not None and dim != figure.dim:
            raise ValidationError("dim contradicts the figure")
        dim = figure.dim
    if dim is None:
        raise ValidationError("pass dim or a figure")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if tagrule == "center":
        shift = 0.5
    elif tagrule in ("lower", "lower-corner"):
        shift = 0.0
    else:
        raise ValidationError("tagrule must be 'lower' or 'center'")
    offsets = np.array(list(product((0, 1), repeat=dim)), dtype=np.int64)

    def tag_eval(gens, pos):
        coords = (pos + shift) * 2.0 ** (-gens)[:, None]
        vals = np.asarray(f(*(coords[:, i] for i in range(dim))), dtype=float)
        vals = np.broadcast_to(vals, (pos.shape[0],)).astype(float)
        if not np.all(np.isfinite(vals)):
            i = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise NonFiniteSample(
                "integrand non-finite at tag %r" % coords[i].tolist())
        return vals

    def child_values(gens, pos):
        cg = np.repeat(gens + 1, 2 ** dim)
        cp = (pos[:, None, :] * 2 + offsets[None, :, :]).reshape(-1, dim)
        return tag_eval(cg, cp).reshape(-1, 2 ** dim)

    if figure is not None:
        cubes = figure.cubes
        gens = np.array([c.gen for c in cubes], dtype=np.int64)
        pos = np.array([c.pos for c in cubes], dtype=np.int64)
    else:
        gens = np.zeros(1, dtype=np.int64)
        pos = np.zeros((1, dim), dtype=np.int64)
    fval = tag_eval(gens, pos)
    childvals = child_values(gens, pos)

    history = []
    streak = 0
    while True:
        vols = 2.0 ** (-gens * dim)
        s = float(np.dot(fval, vols))
        if history:
            streak = streak + 1 if abs(s - history[-1]) < tol else 0
        history.append(s)
        mesh = float(2.0 ** (-gens.max()))
        if streak >= 2:
            return IntegralResult(s, int(gens.size), mesh, True,
                                  tuple(history))
        if gens.size >= budget:
            return IntegralResult(s, int(gens.size), mesh, False,
                                  tuple(history))
        disc = np.abs(fval - childvals.mean(axis=1)) * vols
        top = float(disc.max())
        thr = max(top / 16.0, tol / (4.0 * gens.size))
        split = disc >= thr
        if top == 0.0 or not np.any(split):
            streak += 1
            if streak >= 2:
                return IntegralResult(s, int(gens.size), mesh, True,
                                      tuple(history))
            continue
        room = budget - gens.size
        if int(split.sum()) * (2 ** dim - 1) > room:
            split &= np.cumsum(split) * (2 ** dim - 1) <= room
            if not np.any(split):
                return IntegralResult(s, int(gens.size), mesh, False,
                                      tuple(history))
        sg = gens[split]
        sp = pos[split]
        cg = np.repeat(sg + 1, 2 ** dim)
        cp = (sp[:, None, :] * 2 + offsets[None, :, :]).reshape(-1, dim)
        cf = childvals[split].reshape(-1)
        ccv = child_values(cg, cp)
        gens = np.concatenate([gens[~split], cg])
        pos = np.concatenate([pos[~split], cp])
        fval = np.concatenate([fval[~split], cf])
        childvals = np.concatenate([childvals[~split], ccv])


@dataclass(frozen=True)
class DivergenceCheck:
    """Both sides of the divergence theorem on a figure and their gap."""

    lhs: float
    rhs: float
    gap: float
    volume_integral: IntegralResult


def divergence_check(v, div_v, fig: DyadicFigure, tol=1e-8, depth=None,
                     order=4) -> DivergenceCheck:
    """Compare the adaptive volume integral of the divergence over a
    figure against the boundary flux quadrature of the field.

    div_v is the analytic divergence as a callable (the CLI derives it
    symbolically from the field expression).
    """
    d = fig.dim
    if depth is None:
        depth = max(fig.max_gen, default_depth(d))
    lhs_res = dyadic_henstock(div_v, dim=d, tol=tol, figure=fig)
    rhs = eval_figure(flux_charge(v, d, depth=depth, order=order), fig)
    return DivergenceCheck(lhs_res.value, rhs, abs(lhs_res.value - rhs),
                           lhs_res)
