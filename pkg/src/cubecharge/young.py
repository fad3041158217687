"""Sewing of almost-additive cube germs and Young integration.

sew turns a per-cube germ into an exactly additive charge by replacing
every value with the sum of the germ over the finest stored descendants,
and reports how far the germ moved.  The Young integral of samples f
against a charge is the sewing of the one-point germ f(tag) * value.
The 1D coefficient pairing and the error-scaling report live here too.
"""

from dataclasses import dataclass

import numpy as np

from .charges import CubeCharge, FaberCoeffs, eval_figure
from .dyadic import DyadicFigure, VertexField, figure_geometry
from .errors import (AlmostAdditivityViolation, ValidationError,
                     YoungConditionViolated)
from .util import block_sum, fit_line

# multiplicative slack on the declared almost-additivity bound,
# absorbing float rounding in user-computed germs
SEW_SLACK = 1e-9


@dataclass(frozen=True)
class RawGerm:
    """Per-cube values for generations 0..N with no additivity demand;
    the shape contract matches CubeCharge."""

    dim: int
    depth: int
    gens: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if self.depth < 0:
            raise ValidationError("depth must be >= 0")
        gens = tuple(np.ascontiguousarray(np.asarray(g, dtype=float))
                     for g in self.gens)
        if len(gens) != self.depth + 1:
            raise ValidationError("need one value array per generation 0..N")
        for n, g in enumerate(gens):
            if g.shape != (2 ** n,) * self.dim:
                raise ValidationError(
                    "generation %d array must have shape %s"
                    % (n, str((2 ** n,) * self.dim)))
            if not np.all(np.isfinite(g)):
                raise ValidationError("germ values must be finite")
            g.setflags(write=False)
        object.__setattr__(self, "gens", gens)


@dataclass(frozen=True)
class SewReport:
    """Outcome of sewing a germ: the additive result, per-generation
    max residuals |result - germ|, the fitted residual exponent against
    cube volume, and the worst residual ratio against C |K|^(1+eps)."""

    result: CubeCharge
    residuals: np.ndarray
    residual_exponent: float
    kappa_hat: float
    C: float
    epsilon: float


def sew(eta: RawGerm, C: float, epsilon: float) -> SewReport:
    """Extend an almost-additive germ to an exactly additive charge.

    Validates |eta(K) - child sum| <= C |K|^(1+epsilon) (with a small
    slack) at every parent, then assigns each cube the sum of the germ
    over its finest-generation descendants.  Aggregation is the same
    iterated block sum used by the charge constructors, so an already
    additive germ round-trips bit for bit.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if C < 0:
        raise ValidationError("the almost-additivity constant must be >= 0")
    d = eta.dim
    for n in range(eta.depth):
        resid = np.abs(eta.gens[n] - block_sum(eta.gens[n + 1], 2))
        worst = float(resid.max())
        bound = C * 2.0 ** (-n * d * (1.0 + epsilon))
        if worst > bound * (1.0 + SEW_SLACK):
            raise AlmostAdditivityViolation(
                "generation %d residual %.3e exceeds C|K|^(1+eps) = %.3e"
                % (n, worst, bound), residual=worst, bound=bound)
    gens = [eta.gens[eta.depth]]
    for _ in range(eta.depth):
        gens.append(block_sum(gens[-1], 2))
    gens.reverse()
    result = CubeCharge(d, eta.depth, tuple(gens))

    residuals = np.array([float(np.abs(a - b).max())
                          for a, b in zip(result.gens, eta.gens)])
    vols = 2.0 ** (-np.arange(eta.depth + 1) * d)
    pos = residuals > 0
    with np.errstate(divide="ignore"):
        exponent, _ = fit_line(np.log2(vols[pos]), np.log2(residuals[pos]))
    denom = C * vols ** (1.0 + epsilon)
    kappa = float((residuals / denom).max()) if C > 0 else float("inf")
    if not np.any(residuals):
        kappa = 0.0
    return SewReport(result, residuals, exponent, kappa, C, epsilon)


def _tag_values(f: VertexField, depth: int, tagrule: str) -> list:
    """Per-generation arrays of f at the tag of every cube."""
    if tagrule in ("lower", "lower-corner"):
        offset_num = 0
    elif tagrule == "center":
        offset_num = 1
    else:
        raise ValidationError("tagrule must be 'lower' or 'center'")
    out = []
    for n in range(depth + 1):
        step = 2 ** (f.resolution - n)
        if offset_num:
            if step < 2:
                raise ValidationError(
                    "center tags need f resolution >= depth + 1")
            start = step // 2
        else:
            start = 0
        idx = (slice(start, start + step * 2 ** n, step),) * f.dim
        out.append(f.values[idx])
    return out


def germ_young(f: VertexField, cc: CubeCharge, tagrule="lower") -> RawGerm:
    """One-point germ of the Young integral: cube value = f(tag) * charge.

    The default tag is the cube's lower corner, always a vertex-grid
    point; 'center' needs one extra level of resolution in f.
    """
    if f.dim != cc.dim:
        raise ValidationError("field and charge dimensions differ")
    if f.resolution < cc.depth:
        raise ValidationError("f resolution must be at least the charge depth")
    tags = _tag_values(f, cc.depth, tagrule)
    return RawGerm(cc.dim, cc.depth,
                   tuple(t * g for t, g in zip(tags, cc.gens)))


def young_integral(f: VertexField, cc: CubeCharge, beta: float, gamma: float,
                   tagrule="lower") -> SewReport:
    """Young integral of samples f against a charge, by sewing the
    one-point germ with epsilon = (beta + gamma - 1) / d and the
    almost-additivity constant taken as the germ's own worst ratio."""
    if not 0.0 < beta < 1.0 or not 0.0 < gamma < 1.0:
        raise ValidationError("beta and gamma must lie strictly between 0 and 1")
    if beta + gamma <= 1.0:
        raise YoungConditionViolated(
            "declared exponents violate beta + gamma > 1")
    d = cc.dim
    epsilon = (beta + gamma - 1.0) / d
    eta = germ_young(f, cc, tagrule)
    C = 0.0
    for n in range(eta.depth):
        resid = float(np.abs(eta.gens[n] - block_sum(eta.gens[n + 1], 2)).max())
        C = max(C, resid * 2.0 ** (n * d * (1.0 + epsilon)))
    return sew(eta, C, epsilon)


@dataclass(frozen=True)
class Young1DResult:
    """Coefficient pairing value with per-generation partial sums (entry
    0 is the exceptional term alone)."""

    value: float
    partial_sums: np.ndarray


def young_1d(a: FaberCoeffs, b: FaberCoeffs, beta=None, gamma=None) -> Young1DResult:
    """Pairing of 1D coefficient trees: the integral of f against dg is
    the exceptional product plus the sum of coefficient products.

    a holds the square-wave coefficients of f, b the tent coefficients
    of g with g(0) = 0.
    """
    if a.dim != 1 or b.dim != 1:
        raise ValidationError("one-dimensional coefficient trees required")
    if a.depth != b.depth:
        raise ValidationError("coefficient trees must share a depth")
    if beta is not None and gamma is not None and beta + gamma <= 1.0:
        raise YoungConditionViolated(
            "declared exponents violate beta + gamma > 1")
    partials = [a.exceptional * b.exceptional]
    for ga, gb in zip(a.gens, b.gens):
        partials.append(partials[-1] + float(np.dot(ga[:, 0], gb[:, 0])))
    return Young1DResult(partials[-1], np.array(partials))


def young_1d_fields(f: VertexField, g: VertexField, beta=None, gamma=None):
    """young_1d plumbing for two 1D vertex-sample fields.

    f enters through its trapezoid cell averages as a density charge; g
    enters through its tent coefficients (its value at 0 is subtracted).
    Returns (Young1DResult, g(0)).
    """
    from .charges import charge_from_density, to_faber_coeffs
    from .dyadic import CellField
    from .holder import analyze_1d
    if f.dim != 1 or g.dim != 1:
        raise ValidationError("one-dimensional fields required")
    if f.resolution != g.resolution:
        raise ValidationError("fields must share a resolution")
    cells = 0.5 * (f.values[:-1] + f.values[1:])
    a = to_faber_coeffs(charge_from_density(CellField(1, f.resolution, cells)))
    b = analyze_1d(g)
    g0 = float(g.values[0])
    return young_1d(a, b, beta=beta, gamma=gamma), g0


@dataclass(frozen=True)
class YoungLoeveRow:
    """One figure's error-versus-bound comparison."""

    lhs: float
    bound: float
    ratio: float
    volume: float
    diameter: float
    isop: float


@dataclass(frozen=True)
class YoungLoeveReport:
    """Per-figure error table for the one-point approximation.

    For each figure B with base point x (lower corner of its first
    member cube), lhs = |result(B) - f(x) charge(B)| and bound is the
    structural part |B|^delta (diam B)^beta / (isop B)^(1-gamma); the
    constant in front is unknown, so only ratios and scaling slopes are
    meaningful.  cube_slope fits log2 lhs against log2 |K| over the
    single-cube figures and is expected near delta + beta/d.
    """

    rows: tuple
    C_hat: float
    cube_slope: float
    expected_slope: float
    delta: float


def young_loeve_report(f: VertexField, cc: CubeCharge, result: CubeCharge,
                       figures, beta: float, gamma: float) -> YoungLoeveReport:
    if not 0.0 < beta < 1.0 or not 0.0 < gamma < 1.0:
        raise ValidationError("beta and gamma must lie strictly between 0 and 1")
    d = cc.dim
    delta = (d - 1.0 + gamma) / d
    rows = []
    cube_vols = []
    cube_lhs = []
    for fig in figures:
        fig = fig if isinstance(fig, DyadicFigure) else DyadicFigure([fig])
        first = fig.cubes[0]
        tag_idx = tuple(int(p * 2 ** (f.resolution - first.gen))
                        for p in first.pos)
        fx = float(f.values[tag_idx])
        lhs = abs(eval_figure(result, fig) - fx * eval_figure(cc, fig))
        geo = figure_geometry(fig)
        bound = (geo.volume ** delta * geo.diameter ** beta
                 / geo.isop ** (1.0 - gamma))
        rows.append(YoungLoeveRow(lhs, bound, lhs / bound, geo.volume,
                                  geo.diameter, geo.isop))
        if len(fig.cubes) == 1 and lhs > 0:
            cube_vols.append(geo.volume)
            cube_lhs.append(lhs)
    slope, _ = fit_line(np.log2(np.array(cube_vols)),
                        np.log2(np.array(cube_lhs)))
    C_hat = max((r.ratio for r in rows), default=0.0)
    return YoungLoeveReport(tuple(rows), C_hat, slope, delta + beta / d, delta)
