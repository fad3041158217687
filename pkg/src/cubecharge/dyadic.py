"""Dyadic cubes and figures on the unit cube, multiresolution step and
tent functions, rectangular increments, and dyadic Vitali variation.

Conventions used across the package:

* Generation n splits [0,1]^d into 2^(n d) cubes of side 2^-n; a cube is
  addressed by integer coordinates 0 <= pos_i < 2^n.
* Point membership uses half-open cells [a, b) along each axis, except
  that the last cell is closed at 1.  Piecewise-constant evaluation is
  therefore single-valued; integrals never see the convention.
* Row-major linearization: the first axis is the slowest.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ValidationError
from .util import block_sum

# Stored tree depth defaults by dimension (desk-scale memory).
DEFAULT_DEPTHS = {1: 8, 2: 8, 3: 5}


def default_depth(dim):
    return DEFAULT_DEPTHS.get(dim, 4)


@dataclass(frozen=True)
class CubeIndex:
    """Address of one dyadic cube: dimension, generation, position."""

    dim: int
    gen: int
    pos: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if self.gen < 0:
            raise ValidationError("gen must be >= 0")
        pos = tuple(int(k) for k in self.pos)
        object.__setattr__(self, "pos", pos)
        if len(pos) != self.dim:
            raise ValidationError("pos length must equal dim")
        top = 2 ** self.gen
        if any(k < 0 or k >= top for k in pos):
            raise ValidationError("pos out of range for generation %d" % self.gen)

    @property
    def side(self):
        return 2.0 ** (-self.gen)

    @property
    def volume(self):
        return 2.0 ** (-self.gen * self.dim)

    def lower_corner(self):
        return np.array(self.pos, dtype=float) * self.side

    def center(self):
        return (np.array(self.pos, dtype=float) + 0.5) * self.side

    def corners(self):
        """All 2^d corner points, row-major over offsets."""
        lo = self.lower_corner()
        out = []
        for off in product((0.0, 1.0), repeat=self.dim):
            out.append(lo + np.array(off) * self.side)
        return np.array(out)

    def children(self):
        out = []
        for off in product((0, 1), repeat=self.dim):
            pos = tuple(2 * k + o for k, o in zip(self.pos, off))
            out.append(CubeIndex(self.dim, self.gen + 1, pos))
        return out

    def parent(self):
        if self.gen == 0:
            raise ValidationError("the unit cube has no parent")
        return CubeIndex(self.dim, self.gen - 1, tuple(k // 2 for k in self.pos))

    def ancestor(self, gen):
        if gen > self.gen:
            raise ValidationError("ancestor generation must be <= own generation")
        shift = self.gen - gen
        return CubeIndex(self.dim, gen, tuple(k >> shift for k in self.pos))

    def descendants(self, gen):
        """All descendant cubes at the given (deeper or equal) generation."""
        if gen < self.gen:
            raise ValidationError("descendant generation must be >= own generation")
        shift = gen - self.gen
        side = 2 ** shift
        out = []
        for off in product(range(side), repeat=self.dim):
            pos = tuple((k << shift) + o for k, o in zip(self.pos, off))
            out.append(CubeIndex(self.dim, gen, pos))
        return out

    @property
    def linear(self):
        """Row-major linear index within its generation."""
        lin = 0
        for k in self.pos:
            lin = (lin << self.gen) + k
        return lin

    @classmethod
    def from_linear(cls, dim, gen, linear):
        mask = (1 << gen) - 1
        pos = []
        for i in range(dim):
            shift = gen * (dim - 1 - i)
            pos.append((linear >> shift) & mask)
        return cls(dim, gen, tuple(pos))


def unit_cube_index(dim):
    return CubeIndex(dim, 0, (0,) * dim)


@dataclass(frozen=True)
class HaarIndex:
    """Index of a multiresolution step function.

    cube is None for the exceptional constant-one function; otherwise the
    function lives on the given cube and carries a nonzero sign pattern
    (pattern_i = 1 means a square-wave factor along axis i, 0 a constant
    factor).
    """

    dim: int
    cube: CubeIndex = None
    pattern: tuple = None

    def __post_init__(self):
        if (self.cube is None) != (self.pattern is None):
            raise ValidationError("cube and pattern must be given together")
        if self.cube is not None:
            if self.cube.dim != self.dim:
                raise ValidationError("cube dimension mismatch")
            pattern = tuple(int(e) for e in self.pattern)
            object.__setattr__(self, "pattern", pattern)
            if len(pattern) != self.dim or any(e not in (0, 1) for e in pattern):
                raise ValidationError("pattern must be a 0/1 vector of length dim")
            if not any(pattern):
                raise ValidationError("pattern must not be all zero")

    @property
    def exceptional(self):
        return self.cube is None

    @property
    def gen(self):
        return None if self.exceptional else self.cube.gen

    @classmethod
    def constant(cls, dim):
        return cls(dim)

    @classmethod
    def regular(cls, cube, pattern):
        return cls(cube.dim, cube, tuple(pattern))


def haar_1d(gen, k):
    """The classical 1D square-wave index (gen, k)."""
    return HaarIndex.regular(CubeIndex(1, gen, (k,)), (1,))


def _cell_of(x, gen):
    """Generation-gen cell index of a coordinate in [0,1], half-open
    convention with the last cell closed."""
    j = int(np.floor(x * (1 << gen)))
    return min(max(j, 0), (1 << gen) - 1)


def haar_eval(idx: HaarIndex, x) -> float:
    """Evaluate a multiresolution step function at a point of [0,1]^d.

    Returns 1 for the exceptional constant; otherwise
    2^(n d / 2) times a product of +-1 factors: along every axis with
    pattern 1, +1 on the lower half of the support cube and -1 on the
    upper half; constant 1 along pattern-0 axes; 0 outside the support.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (idx.dim,):
        raise ValidationError("point dimension does not match the index")
    if np.any(x < 0) or np.any(x > 1):
        raise ValidationError("point outside the unit cube")
    if idx.exceptional:
        return 1.0
    n = idx.cube.gen
    sign = 1.0
    for i in range(idx.dim):
        if _cell_of(x[i], n) != idx.cube.pos[i]:
            return 0.0
        if idx.pattern[i]:
            # child half along axis i under the same half-open rule
            if _cell_of(x[i], n + 1) != 2 * idx.cube.pos[i]:
                sign = -sign
    return sign * 2.0 ** (n * idx.dim / 2.0)


def faber_eval_1d(idx: HaarIndex, x) -> float:
    """Evaluate a 1D tent (the running integral of a square wave).

    The exceptional index integrates the constant 1, giving x.  A regular
    index (n, k) gives a tent supported on [k 2^-n, (k+1) 2^-n] with peak
    2^(-n/2 - 1) at the midpoint.
    """
    if idx.dim != 1:
        raise ValidationError("one-dimensional index required")
    x = float(x)
    if x < 0 or x > 1:
        raise ValidationError("point outside [0, 1]")
    if idx.exceptional:
        return x
    n, (k,) = idx.cube.gen, idx.cube.pos
    t = x * (1 << n) - k
    if t <= 0.0 or t >= 1.0:
        return 0.0
    return 2.0 ** (-n / 2.0) * min(t, 1.0 - t)


@dataclass(frozen=True)
class VertexField:
    """Samples of a function on the dyadic vertex grid.

    values[j1, ..., jd] = f(j * 2^-resolution), shape (2^N + 1,)*d.
    """

    dim: int
    resolution: int
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        side = 2 ** self.resolution + 1
        if v.shape != (side,) * self.dim:
            raise ValidationError(
                "vertex array must have shape %s" % str((side,) * self.dim))
        if not np.all(np.isfinite(v)):
            raise ValidationError("vertex values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fn, dim, resolution):
        axes = [np.linspace(0.0, 1.0, 2 ** resolution + 1)] * dim
        grids = np.meshgrid(*axes, indexing="ij")
        return cls(dim, resolution, np.asarray(fn(*grids), dtype=float))

    def axis(self):
        return np.linspace(0.0, 1.0, 2 ** self.resolution + 1)


@dataclass(frozen=True)
class CellField:
    """Per-cell averages of a function on the generation-N cell grid.

    values[j1, ..., jd] is the average over the cell with lower corner
    j * 2^-resolution, shape (2^N,)*d.  The from_function constructor
    uses center values, which equals the average exactly for affine
    integrands and is second-order accurate otherwise.
    """

    dim: int
    resolution: int
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        side = 2 ** self.resolution
        if v.shape != (side,) * self.dim:
            raise ValidationError(
                "cell array must have shape %s" % str((side,) * self.dim))
        if not np.all(np.isfinite(v)):
            raise ValidationError("cell values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fn, dim, resolution):
        step = 2.0 ** (-resolution)
        ax = (np.arange(2 ** resolution) + 0.5) * step
        grids = np.meshgrid(*([ax] * dim), indexing="ij")
        return cls(dim, resolution, np.asarray(fn(*grids), dtype=float))


def _grid_index(field, point):
    """Convert a grid point (indices or coordinates) to integer indices."""
    side = 2 ** field.resolution
    pt = np.atleast_1d(np.asarray(point))
    if pt.shape != (field.dim,):
        raise ValidationError("point dimension mismatch")
    if np.issubdtype(pt.dtype, np.integer):
        idx = pt.astype(int)
    else:
        scaled = pt * side
        idx = np.rint(scaled).astype(int)
        if np.max(np.abs(scaled - idx)) > 1e-9:
            raise ValidationError("point is not on the vertex grid")
    if np.any(idx < 0) or np.any(idx > side):
        raise ValidationError("grid point out of range")
    return tuple(int(j) for j in idx)


def rect_increment(field: VertexField, lo, hi) -> float:
    """Alternating-sign corner sum of the samples over a grid rectangle.

    Each corner picks lo_i or hi_i per axis and carries sign
    (-1)^(number of lo coordinates).  Additive under splitting the
    rectangle by any grid hyperplane.
    """
    lo = _grid_index(field, lo)
    hi = _grid_index(field, hi)
    if any(a > b for a, b in zip(lo, hi)):
        raise ValidationError("need lo <= hi componentwise")
    total = 0.0
    for choice in product((0, 1), repeat=field.dim):
        corner = tuple(hi[i] if c else lo[i] for i, c in enumerate(choice))
        sign = -1.0 if (field.dim - sum(choice)) % 2 else 1.0
        total += sign * field.values[corner]
    return float(total)


def increment_array(field: VertexField, gen: int) -> np.ndarray:
    """Rectangular increments of all generation-gen cubes at once.

    Returns a (2^gen,)*d array; entry k is the corner-sum increment over
    cube (gen, k).  Computed as the iterated first difference of the
    corner-subsampled vertex array.
    """
    if gen > field.resolution:
        raise ValidationError("generation exceeds the field resolution")
    stride = 2 ** (field.resolution - gen)
    sl = (slice(None, None, stride),) * field.dim
    a = field.values[sl]
    for axis in range(field.dim):
        a = np.diff(a, axis=axis)
    return a


def vitali_variation_dyadic(field: VertexField, gen: int) -> float:
    """Sum of absolute rectangular increments over all generation-gen
    cubes.  Nondecreasing in gen; a lower bound for the full variation
    over arbitrary rectangle partitions."""
    return float(np.abs(increment_array(field, gen)).sum())


class DyadicFigure:
    """A finite union of dyadic cubes with pairwise disjoint interiors."""

    def __init__(self, cubes):
        cubes = tuple(cubes)
        if not cubes:
            raise ValidationError("figure must contain at least one cube")
        dim = cubes[0].dim
        if any(c.dim != dim for c in cubes):
            raise ValidationError("all cubes must share one dimension")
        cubes = tuple(sorted(cubes, key=lambda c: (c.gen, c.pos)))
        # overlap test: two dyadic cubes overlap iff one contains the other
        for i in range(len(cubes)):
            for j in range(i + 1, len(cubes)):
                a, b = cubes[i], cubes[j]
                if a.gen > b.gen:
                    a, b = b, a
                if b.ancestor(a.gen) == a:
                    raise ValidationError(
                        "cubes %s and %s overlap" % (cubes[i], cubes[j]))
        self.dim = dim
        self.cubes = cubes

    @property
    def max_gen(self):
        return max(c.gen for c in self.cubes)

    def normalized(self, gen=None):
        """Members refined to a common generation (default: the maximum
        generation present)."""
        gen = self.max_gen if gen is None else gen
        if gen < self.max_gen:
            raise ValidationError("normalization generation too shallow")
        count = sum(2 ** ((gen - c.gen) * self.dim) for c in self.cubes)
        if count > 2 ** 22:
            raise ValidationError("normalized figure would be too large")
        out = []
        for c in self.cubes:
            out.extend(c.descendants(gen))
        return out

    def __eq__(self, other):
        if not isinstance(other, DyadicFigure) or other.dim != self.dim:
            return NotImplemented
        gen = max(self.max_gen, other.max_gen)
        mine = {c.pos for c in self.normalized(gen)}
        theirs = {c.pos for c in other.normalized(gen)}
        return mine == theirs

    def __hash__(self):
        return hash((self.dim, self.cubes))

    def __repr__(self):
        return "DyadicFigure(%d cubes, dim %d)" % (len(self.cubes), self.dim)


def unit_figure(dim):
    return DyadicFigure([unit_cube_index(dim)])


@dataclass(frozen=True)
class FigureGeometry:
    """Volume, boundary face measure, diameter, and the two derived
    shape coefficients of a dyadic figure."""

    volume: float
    perimeter: float
    diameter: float
    reg: float
    isop: float


def figure_geometry(fig: DyadicFigure) -> FigureGeometry:
    """Exact face-count geometry of a figure.

    Volume sums member volumes; the boundary measure counts faces not
    shared by two member cubes (at the finest member generation);
    diameter is the largest corner-to-corner distance; then
    reg = volume / (perimeter * diameter) and
    isop = volume^((d-1)/d) / perimeter.
    """
    d = fig.dim
    volume = sum(c.volume for c in fig.cubes)
    gen = fig.max_gen
    cells = {c.pos for c in fig.normalized(gen)}
    face_area = 2.0 ** (-gen * (d - 1))
    boundary = 0
    for pos in cells:
        for axis in range(d):
            for step in (-1, 1):
                nb = list(pos)
                nb[axis] += step
                if tuple(nb) not in cells:
                    boundary += 1
    perimeter = boundary * face_area
    corners = np.concatenate([c.corners() for c in fig.cubes], axis=0)
    diff = corners[:, None, :] - corners[None, :, :]
    diameter = float(np.sqrt((diff ** 2).sum(axis=2)).max())
    reg = volume / (perimeter * diameter)
    isop = volume ** ((d - 1) / d) / perimeter
    return FigureGeometry(volume, perimeter, diameter, reg, isop)
