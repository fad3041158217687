"""Shared small helpers: block sums, sign tables, line fits."""

import numpy as np


def block_sum(values, factor):
    """Sum a d-dim array over axis-aligned blocks of side ``factor``.

    values has shape (m,)*d with m divisible by factor; the result has
    shape (m//factor,)*d.  Used to aggregate child cubes into parents.
    """
    a = np.asarray(values)
    d = a.ndim
    m = a.shape[0]
    out = a.reshape(sum(((m // factor, factor) for _ in range(d)), ()))
    return out.sum(axis=tuple(range(1, 2 * d, 2)))


def child_blocks(values):
    """Regroup a generation-(n+1) array into per-parent child vectors.

    Input shape (2^(n+1),)*d; output shape (2^n,)*d + (2^d,), where the
    last axis enumerates the 2^d child offsets in row-major order
    (offset_lin = sum_i offset_i * 2^(d-1-i)).
    """
    a = np.asarray(values)
    d = a.ndim
    m = a.shape[0] // 2
    a = a.reshape(sum(((m, 2) for _ in range(d)), ()))
    a = a.transpose(tuple(range(0, 2 * d, 2)) + tuple(range(1, 2 * d, 2)))
    return a.reshape((m,) * d + (2 ** d,))


def from_child_blocks(blocks):
    """Inverse of child_blocks: (2^n,)*d + (2^d,) -> (2^(n+1),)*d."""
    b = np.asarray(blocks)
    d = b.ndim - 1
    m = b.shape[0]
    a = b.reshape((m,) * d + (2,) * d)
    order = []
    for i in range(d):
        order += [i, d + i]
    a = a.transpose(order)
    return a.reshape((2 * m,) * d)


def pattern_list(dim):
    """All nonzero sign patterns e in {0,1}^dim, in row-major index order.

    Pattern p (p = 1 .. 2^dim - 1) has e_i = bit (dim-1-i) of p, so the
    first axis is the most significant bit.
    """
    out = []
    for p in range(1, 2 ** dim):
        out.append(tuple((p >> (dim - 1 - i)) & 1 for i in range(dim)))
    return tuple(out)


def pattern_signs(dim):
    """Sign table S[p-1, offset_lin] = (-1)^popcount(p AND offset).

    Row p is the sign of pattern p on the child at the given offset:
    +1 on the lower half and -1 on the upper half along every axis where
    e_i = 1, constant along axes where e_i = 0.  Rows are orthogonal
    characters: sum_off S[p] S[q] = 2^dim * (p == q).
    """
    n = 2 ** dim
    table = np.empty((n - 1, n))
    for p in range(1, n):
        for off in range(n):
            table[p - 1, off] = -1.0 if bin(p & off).count("1") % 2 else 1.0
    return table


def fit_line(x, y):
    """Least-squares slope and intercept of y against x.

    Non-finite y entries are dropped.  Returns (nan, nan) when fewer
    than two usable points remain.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(y) & np.isfinite(x)
    x, y = x[keep], y[keep]
    if x.size < 2 or np.ptp(x) == 0:
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def gauss_panel(order):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return (nodes + 1.0) / 2.0, weights / 2.0
