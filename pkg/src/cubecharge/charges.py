"""Additive cube charges at finite resolution.

A CubeCharge stores one value per dyadic cube for every generation
0..N.  Parent values must equal the sum of their 2^d children, so the
container is the finite-depth realization of an additive set function
on dyadic cubes, and evaluation on figures is subdivision independent.

The multiresolution transform pairs each charge with its coefficient
array: the exceptional coefficient is the total mass, and the
generation-n coefficients are signed child sums scaled by 2^(n d / 2).
Analysis and synthesis invert each other by character orthogonality of
the sign patterns.
"""

from dataclasses import dataclass

import numpy as np

from .dyadic import (CellField, CubeIndex, DyadicFigure, VertexField,
                     default_depth, increment_array, unit_cube_index)
from .errors import (AdditivityViolation, NonFiniteSample, NumericalError,
                     ValidationError)
from .util import (block_sum, child_blocks, fit_line, from_child_blocks,
                   gauss_panel, pattern_signs)

ADDITIVITY_RTOL = 1e-12

# fitted coefficient-decay slopes ignore this many leading generations
PROFILE_SKIP_GENS = 2
PROFILE_SLOPE_SLACK = 0.1


@dataclass(frozen=True)
class CubeCharge:
    """Values of an additive set function on all dyadic cubes up to a
    fixed depth.  gens[n] has shape (2^n,)*dim, row-major."""

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
                raise ValidationError("charge values must be finite")
            g.setflags(write=False)
        object.__setattr__(self, "gens", gens)
        scale = float(np.abs(gens[-1]).sum())
        tol = ADDITIVITY_RTOL * max(scale, np.finfo(float).tiny)
        for n in range(self.depth):
            resid = np.abs(gens[n] - block_sum(gens[n + 1], 2))
            worst = float(resid.max())
            if worst > tol:
                pos = np.unravel_index(int(resid.argmax()), resid.shape)
                cube = CubeIndex(self.dim, n, tuple(int(p) for p in pos))
                raise AdditivityViolation(
                    "parent %s differs from its child sum by %.3e (tol %.3e)"
                    % (cube, worst, tol), cube=cube, residual=worst)

    @classmethod
    def from_finest(cls, dim, finest):
        """Build all generations by summing children upward; additivity
        is then exact by construction."""
        finest = np.asarray(finest, dtype=float)
        depth = 0
        side = finest.shape[0] if finest.ndim else 1
        while (1 << depth) < side:
            depth += 1
        gens = [finest]
        for _ in range(depth):
            gens.append(block_sum(gens[-1], 2))
        return cls(dim, depth, tuple(reversed(gens)))

    @property
    def finest(self):
        return self.gens[-1]

    @property
    def total(self):
        return float(self.gens[0].reshape(()))

    def value(self, cube: CubeIndex) -> float:
        if cube.dim != self.dim:
            raise ValidationError("cube dimension mismatch")
        if cube.gen > self.depth:
            raise ValidationError(
                "cube generation %d exceeds stored depth %d"
                % (cube.gen, self.depth))
        return float(self.gens[cube.gen][cube.pos])

    def __add__(self, other):
        if not isinstance(other, CubeCharge):
            return NotImplemented
        if other.dim != self.dim or other.depth != self.depth:
            raise ValidationError("charges must share dim and depth")
        return CubeCharge.from_finest(self.dim, self.finest + other.finest)

    def __sub__(self, other):
        if not isinstance(other, CubeCharge):
            return NotImplemented
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return CubeCharge.from_finest(self.dim, float(scalar) * self.finest)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def __repr__(self):
        return "CubeCharge(dim=%d, depth=%d, total=%r)" % (
            self.dim, self.depth, self.total)


@dataclass(frozen=True)
class FaberCoeffs:
    """Multiresolution coefficients of a charge at depth N.

    exceptional is the coefficient of the constant function (the total
    mass); gens[n] has shape (2^n,)*dim + (2^dim - 1,) with the sign
    pattern on the last axis, for n = 0..N-1.
    """

    dim: int
    depth: int
    exceptional: float
    gens: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if self.depth < 0:
            raise ValidationError("depth must be >= 0")
        if not np.isfinite(self.exceptional):
            raise ValidationError("coefficients must be finite")
        gens = tuple(np.ascontiguousarray(np.asarray(g, dtype=float))
                     for g in self.gens)
        if len(gens) != self.depth:
            raise ValidationError("need one coefficient array per generation 0..N-1")
        npat = 2 ** self.dim - 1
        for n, g in enumerate(gens):
            if g.shape != (2 ** n,) * self.dim + (npat,):
                raise ValidationError(
                    "generation %d coefficient array must have shape %s"
                    % (n, str((2 ** n,) * self.dim + (npat,))))
            if not np.all(np.isfinite(g)):
                raise ValidationError("coefficients must be finite")
            g.setflags(write=False)
        object.__setattr__(self, "gens", gens)
        object.__setattr__(self, "exceptional", float(self.exceptional))

    def __add__(self, other):
        if not isinstance(other, FaberCoeffs):
            return NotImplemented
        if other.dim != self.dim or other.depth != self.depth:
            raise ValidationError("coefficient sets must share dim and depth")
        return FaberCoeffs(self.dim, self.depth,
                           self.exceptional + other.exceptional,
                           tuple(a + b for a, b in zip(self.gens, other.gens)))

    def __mul__(self, scalar):
        s = float(scalar)
        return FaberCoeffs(self.dim, self.depth, s * self.exceptional,
                           tuple(s * g for g in self.gens))

    __rmul__ = __mul__

    def __repr__(self):
        return "FaberCoeffs(dim=%d, depth=%d)" % (self.dim, self.depth)


def charge_from_cube_values(gens, dim=None) -> CubeCharge:
    """Validate user-supplied per-generation cube values as a charge.

    gens is a sequence of arrays, one per generation 0..N, each of shape
    (2^n,)*dim.  Raises AdditivityViolation when any parent value fails
    to match its child sum.
    """
    gens = [np.asarray(g, dtype=float) for g in gens]
    if not gens:
        raise ValidationError("need at least the generation-0 value")
    if dim is None:
        dim = gens[-1].ndim if len(gens) > 1 else 1
    try:
        shaped = tuple(g.reshape((2 ** n,) * dim) for n, g in enumerate(gens))
    except ValueError as exc:
        raise ValidationError("generation array sizes do not match: %s" % exc)
    return CubeCharge(dim, len(gens) - 1, shaped)


def charge_from_density(f: CellField, depth=None) -> CubeCharge:
    """Charge of a density: cube value = sum of cell averages times cell
    volume over the cells inside the cube."""
    if depth is None:
        depth = f.resolution
    if depth > f.resolution:
        raise ValidationError("depth exceeds the field resolution")
    cellvol = 2.0 ** (-f.resolution * f.dim)
    finest = f.values * cellvol
    if depth < f.resolution:
        finest = block_sum(finest, 2 ** (f.resolution - depth))
    return CubeCharge.from_finest(f.dim, finest)


def charge_from_increments(g: VertexField, depth=None) -> CubeCharge:
    """Charge of rectangular increments of vertex samples: cube value =
    alternating corner sum of g over the cube."""
    if depth is None:
        depth = g.resolution
    if depth > g.resolution:
        raise ValidationError("depth exceeds the field resolution")
    return CubeCharge.from_finest(g.dim, increment_array(g, depth))


def lebesgue_charge(dim, depth) -> CubeCharge:
    """The volume charge: every generation-n cube carries 2^(-n dim)."""
    finest = np.full((2 ** depth,) * dim, 2.0 ** (-depth * dim))
    return CubeCharge.from_finest(dim, finest)


def _face_panel_integrals(v, dim, depth, order):
    """Per-axis arrays of face integrals on the finest grid.

    Element [j, c_1, ..., c_{d-1}] of the axis-i array is the integral
    of component i over the panel of the plane x_i = j 2^-N indexed by
    the transverse cell c.  Composite tensor Gauss of the given order.
    """
    side = 2 ** depth
    h = 2.0 ** (-depth)
    nodes, weights = gauss_panel(order)
    # transverse evaluation points: every cell refined by the rule nodes
    tnodes = ((np.arange(side)[:, None] + nodes[None, :]) * h).ravel()
    planes = np.arange(side + 1) * h
    out = []
    for axis in range(dim):
        grids = []
        for k in range(dim):
            if k == axis:
                grids.append(planes)
            else:
                grids.append(tnodes)
        mesh = np.meshgrid(*grids, indexing="ij")
        comp = np.asarray(v(*mesh)[axis], dtype=float)
        comp = np.broadcast_to(comp, mesh[0].shape).astype(float)
        if not np.all(np.isfinite(comp)):
            raise NonFiniteSample("vector field returned non-finite values")
        # plane axis first, then contract the rule nodes transversely
        comp = np.moveaxis(comp, axis, 0)
        for t in range(1, dim):
            shape = comp.shape[:t] + (side, order) + comp.shape[t + 1:]
            comp = np.tensordot(comp.reshape(shape), weights, axes=([t + 1], [0]))
        out.append(comp * h ** (dim - 1))
    return out


def flux_charge(v, dim, depth=None, order=4) -> CubeCharge:
    """Charge of the boundary flux of a vector field.

    v maps d coordinate arrays to a sequence of d component arrays.  The
    cube value is the outward flux through the cube boundary, built from
    composite per-panel Gauss quadrature at the finest generation so
    that interior faces cancel and additivity is exact by construction.
    A direct face evaluation at every coarser generation is compared
    against the aggregated values as an integrity check.
    """
    if depth is None:
        depth = default_depth(dim)
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    if order < 1:
        raise ValidationError("quadrature order must be >= 1")
    if isinstance(v, (list, tuple)):
        comps = tuple(v)
        if len(comps) != dim:
            raise ValidationError(
                "expected %d component functions, got %d" % (dim, len(comps)))
        v = lambda *xs: [c(*xs) for c in comps]
    panels = _face_panel_integrals(v, dim, depth, order)

    def flux_at(gen):
        total = None
        step = 2 ** (depth - gen)
        for axis in range(dim):
            arr = panels[axis]
            if step > 1:
                # aggregate transverse cells, then keep every step-th plane
                tshape = arr.shape[:1]
                agg = arr.reshape(
                    tshape + sum(((2 ** gen, step),) * (dim - 1), ()))
                agg = agg.sum(axis=tuple(range(2, 2 * dim, 2)))
                arr = agg[::step]
            diff = arr[1:] - arr[:-1]
            diff = np.moveaxis(diff, 0, axis)
            total = diff if total is None else total + diff
        return total

    finest = flux_at(depth)
    cc = CubeCharge.from_finest(dim, finest)
    scale = max(1.0, max(float(np.abs(p).sum()) for p in panels))
    for n in range(depth):
        direct = flux_at(n)
        gap = float(np.abs(direct - cc.gens[n]).max())
        if gap > 1e-12 * scale:
            raise NumericalError(
                "face quadrature is inconsistent across generations "
                "(gap %.3e at generation %d)" % (gap, n))
    return cc


def eval_figure(cc: CubeCharge, fig: DyadicFigure) -> float:
    """Charge of a figure: the sum over its member cubes."""
    if fig.dim != cc.dim:
        raise ValidationError("figure dimension mismatch")
    return float(sum(cc.value(c) for c in fig.cubes))


def to_faber_coeffs(cc: CubeCharge) -> FaberCoeffs:
    """Analysis: coefficient of pattern e on cube K (generation n) is
    2^(n d / 2) times the sign_e-weighted sum of the child values, where
    sign_e flips for every axis with pattern 1 on which the child sits
    in the upper half."""
    if cc.depth < 1:
        raise ValidationError("analysis needs depth >= 1")
    signs = pattern_signs(cc.dim)
    gens = []
    for n in range(cc.depth):
        ch = child_blocks(cc.gens[n + 1])
        a = np.tensordot(ch, signs, axes=([cc.dim], [1]))
        gens.append(2.0 ** (n * cc.dim / 2.0) * a)
    return FaberCoeffs(cc.dim, cc.depth, cc.total, tuple(gens))


def from_faber_coeffs(fc: FaberCoeffs) -> CubeCharge:
    """Synthesis: each refinement splits the parent value equally among
    the 2^d children and adds the signed generation-n contributions.
    Inverse of to_faber_coeffs by orthogonality of the sign patterns."""
    signs = pattern_signs(fc.dim)
    split = 2.0 ** (-fc.dim)
    gens = [np.full((1,) * fc.dim, fc.exceptional)]
    for n in range(fc.depth):
        contrib = np.tensordot(fc.gens[n], signs, axes=([fc.dim], [0]))
        children = split * (gens[n][..., None] + 2.0 ** (-n * fc.dim / 2.0) * contrib)
        gens.append(from_child_blocks(children))
    return CubeCharge(fc.dim, fc.depth, tuple(gens))


@dataclass(frozen=True)
class FractionalProfile:
    """Scale profile of a charge against a target fractional exponent.

    For exponent gamma the natural cube bound is C |K|^delta with
    delta = (d - 1 + gamma) / d.  scale_ratios[n] is the worst ratio
    |value| / |K|^delta over generation n, control_constant their
    maximum, coeff_maxima[n] the largest coefficient magnitude per
    generation, and coeff_slope the fitted slope of log2 coeff_maxima
    against n.  consistent is True when the fitted decay is at least as
    fast as (1 - gamma - d/2) up to a fixed slack, ignoring the first
    two generations.
    """

    gamma: float
    delta: float
    scale_ratios: np.ndarray
    coeff_maxima: np.ndarray
    control_constant: float
    coeff_slope: float
    consistent: bool


def fractional_profile(cc: CubeCharge, gamma: float) -> FractionalProfile:
    if not 0.0 < gamma < 1.0:
        raise ValidationError("gamma must lie strictly between 0 and 1")
    d = cc.dim
    delta = (d - 1.0 + gamma) / d
    ratios = np.array([float(np.abs(g).max()) * 2.0 ** (n * d * delta)
                       for n, g in enumerate(cc.gens)])
    if cc.depth >= 1:
        fc = to_faber_coeffs(cc)
        maxima = np.array([float(np.abs(g).max()) for g in fc.gens])
    else:
        maxima = np.zeros(0)
    with np.errstate(divide="ignore"):
        logs = np.log2(maxima)
    ns = np.arange(len(maxima), dtype=float)
    keep = ns >= PROFILE_SKIP_GENS
    slope, _ = fit_line(ns[keep], logs[keep])
    target = 1.0 - gamma - d / 2.0
    consistent = bool(np.isnan(slope) or slope <= target + PROFILE_SLOPE_SLACK)
    return FractionalProfile(gamma, delta, ratios, maxima,
                             float(ratios.max()), float(slope), consistent)


def holder_control_check(cc: CubeCharge, C: float, gamma: float):
    """Whether |value| <= C |K|^delta holds on every stored cube.

    Returns (ok, worst) where worst is the cube with the largest ratio
    |value| / |K|^delta.
    """
    if C < 0:
        raise ValidationError("the control constant must be >= 0")
    if not 0.0 < gamma < 1.0:
        raise ValidationError("gamma must lie strictly between 0 and 1")
    d = cc.dim
    delta = (d - 1.0 + gamma) / d
    best = -1.0
    worst = unit_cube_index(d)
    for n, g in enumerate(cc.gens):
        ratios = np.abs(g) * 2.0 ** (n * d * delta)
        top = float(ratios.max())
        if top > best:
            best = top
            pos = np.unravel_index(int(ratios.argmax()), ratios.shape)
            worst = CubeIndex(d, n, tuple(int(p) for p in pos))
    return best <= C, worst
