"""Sampled log-concave functions on regular lattices (1D and 2D).

Values are stored as logs; ``-inf`` marks points outside the support.  A
lattice is described by the coordinates of its first sample (``origin``) and
the spacing per axis, so sample ``i`` sits at ``origin + i * spacing``.  Two
grids can be combined when their spacings agree; the sum of two lattices is
again a lattice with origin ``origin_f + origin_g``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.signal import convolve as _sp_convolve

from .polytope import Polytope

NEG = -np.inf


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridFunction:
    origin: np.ndarray
    spacing: np.ndarray
    log_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", np.atleast_1d(np.asarray(self.origin, dtype=float)))
        object.__setattr__(self, "spacing", np.atleast_1d(np.asarray(self.spacing, dtype=float)))
        lv = np.asarray(self.log_values, dtype=float)
        if lv.ndim != len(self.origin) or len(self.spacing) != lv.ndim:
            raise GridError("origin/spacing/log_values dimension mismatch")
        if lv.ndim not in (1, 2):
            raise GridError("grid functions are limited to 1 or 2 dimensions")
        if np.any(self.spacing <= 0):
            raise GridError("spacing must be positive")
        if np.any(np.isnan(lv)) or np.any(lv == np.inf):
            raise GridError("log values must be finite or -inf")
        if not np.isfinite(lv).any():
            raise GridError("grid has no finite value")
        object.__setattr__(self, "log_values", lv)

    @property
    def dim(self) -> int:
        return self.log_values.ndim

    @property
    def shape(self) -> tuple:
        return self.log_values.shape

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    @property
    def support(self) -> np.ndarray:
        return np.isfinite(self.log_values)

    @cached_property
    def log_max(self) -> float:
        return float(self.log_values.max())

    def sup_norm(self) -> float:
        return float(np.exp(self.log_max))

    def axes(self) -> list[np.ndarray]:
        return [o + h * np.arange(m) for o, h, m in zip(self.origin, self.spacing, self.shape)]

    def points(self, mask=None) -> np.ndarray:
        idx = np.argwhere(self.support if mask is None else mask)
        return self.origin + idx * self.spacing

    def index_of(self, x) -> tuple:
        """Lattice index of a point, rounding to the nearest node."""
        k = np.rint((np.atleast_1d(x) - self.origin) / self.spacing).astype(int)
        return tuple(k)

    def at(self, x) -> float:
        k = self.index_of(x)
        if any(i < 0 or i >= m for i, m in zip(k, self.shape)):
            return 0.0
        return float(np.exp(self.log_values[k]))

    def scaled(self, c: float) -> "GridFunction":
        return GridFunction(self.origin, self.spacing, self.log_values + np.log(c))

    def trimmed(self) -> "GridFunction":
        """Drop border rows/columns that lie entirely outside the support."""
        sl = []
        for ax in range(self.dim):
            other = tuple(a for a in range(self.dim) if a != ax)
            live = self.support.any(axis=other) if other else self.support
            nz = np.flatnonzero(live)
            sl.append(slice(nz[0], nz[-1] + 1))
        origin = self.origin + np.array([s.start for s in sl]) * self.spacing
        return GridFunction(origin, self.spacing, self.log_values[tuple(sl)])


def _same_spacing(f: GridFunction, g: GridFunction):
    if f.dim != g.dim:
        raise GridError("dimension mismatch")
    if not np.allclose(f.spacing, g.spacing, rtol=1e-12, atol=0):
        raise GridError(f"spacing mismatch: {f.spacing} vs {g.spacing}")


def integral(f: GridFunction) -> float:
    """Midpoint rule: sum of samples times the cell volume."""
    m = f.log_max
    return float(np.exp(m) * np.exp(f.log_values - m).sum() * f.cell_volume)


def reflect(f: GridFunction) -> GridFunction:
    """Samples of x -> f(-x)."""
    last = f.origin + (np.array(f.shape) - 1) * f.spacing
    return GridFunction(-last, f.spacing, f.log_values[(slice(None, None, -1),) * f.dim])


def translate(f: GridFunction, v) -> GridFunction:
    return GridFunction(f.origin + np.asarray(v, dtype=float), f.spacing, f.log_values)


def convolve(f: GridFunction, g: GridFunction, method: str = "direct") -> GridFunction:
    """f * g (x) = ∫ f(z) g(x - z) dz as a discrete sum.

    ``method="fft"`` is much faster on large 2D grids but leaves round-off
    noise of order 1e-13 relative to the peak, so values below that are
    dropped from the support; only use it when the sup or integral matters.
    """
    _same_spacing(f, g)
    mf, mg = f.log_max, g.log_max
    c = _sp_convolve(np.exp(f.log_values - mf), np.exp(g.log_values - mg), method=method)
    floor = 1e-300 if method == "direct" else 1e-13 * c.max()
    with np.errstate(divide="ignore"):
        lv = np.log(np.clip(c, 0.0, None)) + mf + mg + np.log(f.cell_volume)
    lv[c <= floor] = NEG
    return GridFunction(f.origin + g.origin, f.spacing, lv)


def maxplus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """out[k] = max_{i+j=k} a[i] + b[j] for 1D or 2D arrays with -inf allowed."""
    if np.isfinite(a).sum() > np.isfinite(b).sum():
        a, b = b, a
    shape = tuple(p + q - 1 for p, q in zip(a.shape, b.shape))
    out = np.full(shape, NEG)
    for idx in np.argwhere(np.isfinite(a)):
        sl = tuple(slice(i, i + m) for i, m in zip(idx, b.shape))
        np.maximum(out[sl], a[tuple(idx)] + b, out=out[sl])
    return out


def asplund(f: GridFunction, g: GridFunction) -> GridFunction:
    """Sup-convolution f ⋆ g (x) = max_z f(z) g(x - z) over lattice offsets."""
    _same_spacing(f, g)
    return GridFunction(f.origin + g.origin, f.spacing, maxplus(f.log_values, g.log_values))


def asplund_argmax(f: GridFunction, g: GridFunction, x) -> np.ndarray:
    """A lattice maximiser z of f(z) g(x - z); ties go to the smallest index."""
    _same_spacing(f, g)
    k = np.rint((np.atleast_1d(x) - f.origin - g.origin) / f.spacing).astype(int)
    lf = f.log_values
    vals = np.full(lf.shape, NEG)
    # z index i pairs with g index k - i
    if f.dim == 1:
        i = np.arange(f.shape[0])
        j = k[0] - i
        ok = (j >= 0) & (j < g.shape[0])
        vals[ok] = lf[ok] + g.log_values[j[ok]]
    else:
        I, J = np.meshgrid(np.arange(f.shape[0]), np.arange(f.shape[1]), indexing="ij")
        A, B = k[0] - I, k[1] - J
        ok = (A >= 0) & (A < g.shape[0]) & (B >= 0) & (B < g.shape[1])
        vals[ok] = lf[ok] + g.log_values[A[ok], B[ok]]
    best = vals.max()
    if not np.isfinite(best):
        raise GridError("x lies outside supp f + supp g")
    flat = int(np.flatnonzero(vals.ravel() >= best - 1e-12)[0])
    idx = np.array(np.unravel_index(flat, f.shape))
    return f.origin + idx * f.spacing


def oplus(f: GridFunction, g: GridFunction) -> GridFunction:
    """f ⊕ g (z) = sqrt(f ⋆ g (2z)) on the half lattice of the sum grid."""
    s = asplund(f, g)
    return GridFunction(s.origin / 2, s.spacing / 2, s.log_values / 2)


def diff_function(f: GridFunction) -> GridFunction:
    """Δf = f ⊕ f̄, i.e. sup over 2z = x + y of sqrt(f(x) f(-y))."""
    return oplus(f, reflect(f))


def _common(f: GridFunction, g: GridFunction):
    """Views of f and g on the intersection of their (aligned) lattices."""
    _same_spacing(f, g)
    off = (g.origin - f.origin) / f.spacing
    k = np.rint(off).astype(int)
    if np.any(np.abs(off - k) > 1e-6):
        raise GridError("lattices are not aligned")
    lo = np.maximum(0, k)
    hi = np.minimum(np.array(f.shape), k + np.array(g.shape))
    if np.any(hi <= lo):
        return None
    sf = tuple(slice(a, b) for a, b in zip(lo, hi))
    sg = tuple(slice(a - kk, b - kk) for a, b, kk in zip(lo, hi, k))
    return f.origin + lo * f.spacing, f.log_values[sf], g.log_values[sg]


def geometric_mean(f: GridFunction, g: GridFunction) -> GridFunction | None:
    """x -> sqrt(f(x) g(x)) on the overlap of the two lattices."""
    c = _common(f, g)
    if c is None:
        return None
    origin, a, b = c
    lv = 0.5 * (a + b)
    if not np.isfinite(lv).any():
        return None
    return GridFunction(origin, f.spacing, lv)


def product(f: GridFunction, g: GridFunction) -> GridFunction | None:
    c = _common(f, g)
    if c is None:
        return None
    origin, a, b = c
    lv = a + b
    if not np.isfinite(lv).any():
        return None
    return GridFunction(origin, f.spacing, lv)


# -- level sets -------------------------------------------------------------


def mask_hull(points: np.ndarray, mask: np.ndarray, origin, spacing) -> Polytope | None:
    """Convex hull of the centres of the cells in ``mask``."""
    if not mask.any():
        return None
    if mask.ndim == 1:
        nz = np.flatnonzero(mask)
        P = origin + np.array([[nz[0]], [nz[-1]]]) * spacing
        return Polytope.from_vertices(P)
    # row extremes suffice for the hull
    rows = np.flatnonzero(mask.any(axis=1))
    first = np.argmax(mask[rows], axis=1)
    last = mask.shape[1] - 1 - np.argmax(mask[rows, ::-1], axis=1)
    idx = np.concatenate([np.stack([rows, first], 1), np.stack([rows, last], 1)])
    return Polytope.from_vertices(origin + idx * spacing)


@dataclass(frozen=True)
class LevelSet:
    mask: np.ndarray
    hull: Polytope | None
    origin: np.ndarray
    spacing: np.ndarray


def level_set(f: GridFunction, t: float) -> LevelSet:
    """Cells with f >= t and the hull of their centres; empty above sup f."""
    if t <= 0:
        raise GridError("level must be positive")
    mask = f.log_values >= np.log(t) - 1e-12
    return LevelSet(mask, mask_hull(None, mask, f.origin, f.spacing), f.origin, f.spacing)


def mask_rle(mask: np.ndarray) -> dict:
    """Run-length encoding (row-major) of a boolean mask, starting with a False run."""
    flat = mask.ravel().astype(np.int8)
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0] == 1:
        runs = [0] + runs
    return {"shape": list(mask.shape), "runs": runs}


def mask_from_rle(d: dict) -> np.ndarray:
    vals, v = [], False
    for r in d["runs"]:
        vals.extend([v] * r)
        v = not v
    return np.array(vals, dtype=bool).reshape(d["shape"])


# -- diagnostics ------------------------------------------------------------


def _triples(ndim):
    if ndim == 1:
        return [(1,)]
    return [(1, 0), (0, 1), (1, 1), (1, -1)]


def log_concavity_violations(f: GridFunction, tol: float = 1e-9) -> int:
    """Count lattice triples (x-d, x, x+d) breaking 2 log f(x) >= log f(x-d) + log f(x+d).

    Directions are the coordinate axes and, in 2D, both diagonals.
    """
    lv = f.log_values
    bad = 0
    for d in _triples(f.dim):
        d = np.array(d)
        sl_m, sl_c, sl_p = [], [], []
        for ax, step in enumerate(d):
            n = lv.shape[ax]
            a = abs(step)
            if 2 * a >= n:
                break
            if step >= 0:
                sl_m.append(slice(0, n - 2 * a)); sl_c.append(slice(a, n - a)); sl_p.append(slice(2 * a, n))
            else:
                sl_p.append(slice(0, n - 2 * a)); sl_c.append(slice(a, n - a)); sl_m.append(slice(2 * a, n))
        else:
            lm, lc, lp = lv[tuple(sl_m)], lv[tuple(sl_c)], lv[tuple(sl_p)]
            both = np.isfinite(lm) & np.isfinite(lp)
            with np.errstate(invalid="ignore"):
                viol = both & ~(2 * lc >= lm + lp - tol)
            bad += int(viol.sum())
    return bad


def is_grid_convex(f: GridFunction) -> bool:
    """Support equals the rasterised hull of its cell centres, up to one cell."""
    mask = f.support
    H = mask_hull(None, mask, f.origin, f.spacing)
    if H is None:
        return False
    pts = np.stack(np.meshgrid(*f.axes(), indexing="ij"), axis=-1).reshape(-1, f.dim)
    inside = H.contains(pts, tol=1e-9 * max(1.0, float(np.abs(pts).max()))).reshape(f.shape)
    dil = maximum_filter(mask, size=3, mode="constant")
    return bool(np.all(~inside | dil))


# -- Legendre-Fenchel ---------------------------------------------------------


def _is_convex_seq(u: np.ndarray, x: np.ndarray) -> bool:
    fin = np.isfinite(u)
    if fin.sum() <= 2:
        return bool(fin.sum() == 0 or np.all(np.diff(np.flatnonzero(fin)) == 1))
    idx = np.flatnonzero(fin)
    if np.any(np.diff(idx) != 1):
        return False
    uu, xx = u[idx], x[idx]
    slopes = np.diff(uu) / np.diff(xx)
    return bool(np.all(np.diff(slopes) >= -1e-9 * max(1.0, np.abs(slopes).max())))


def legendre(u: np.ndarray, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """u*(s) = max_i s x_i - u_i for sorted x and sorted s.

    Linear time for convex u: the maximiser index is nondecreasing in s and
    the objective is unimodal in i, so one pointer sweep suffices.  Other
    inputs fall back to an O(N M) scan with a warning.
    """
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    fin = np.isfinite(u)
    if not fin.any():
        return np.full(s.shape, NEG)
    if not _is_convex_seq(u, x):
        warnings.warn("legendre: non-convex input, using brute force", RuntimeWarning, stacklevel=2)
        return np.max(s[:, None] * x[None, fin] - u[None, fin], axis=1)
    xs, us = x[fin], u[fin]
    out = np.empty(len(s))
    i, m = 0, len(xs)
    for j, sj in enumerate(s):
        while i + 1 < m and sj * xs[i + 1] - us[i + 1] >= sj * xs[i] - us[i]:
            i += 1
        out[j] = sj * xs[i] - us[i]
    return out


def _dedupe(S: np.ndarray) -> np.ndarray:
    # merge only round-off duplicates; a wider window would drop real kinks
    S = np.sort(S[np.isfinite(S)])
    if len(S) == 0:
        return np.zeros(1)
    keep = np.concatenate([[True], np.diff(S) > 1e-13 * max(1.0, float(np.abs(S).max()))])
    return S[keep]


def _slopes(u: np.ndarray, h: float) -> np.ndarray:
    fin = np.isfinite(u)
    if fin.sum() < 2:
        return np.zeros(0)
    uu = u[fin]
    return np.diff(uu) / h


def inf_convolve_legendre(u: np.ndarray, v: np.ndarray, h: float) -> np.ndarray:
    """Min-plus convolution of convex lattice potentials through conjugates.

    Computes (u* + v*)* at the sum lattice.  The conjugate sum is piecewise
    linear with kinks at the union of the difference slopes of u and v, so
    evaluating the outer transform at those slopes is exact.  Works on 1D
    arrays and on separable 2D arrays (axis by axis).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim == 1:
        return _infconv_1d(u, v, h)
    if u.ndim == 2:
        return _infconv_2d(u, v, h)
    raise GridError("1D or 2D potentials only")


def _infconv_1d(u, v, h):
    S = _dedupe(np.concatenate([_slopes(u, h), _slopes(v, h), [0.0]]))
    xu = h * np.arange(len(u))
    xv = h * np.arange(len(v))
    w = legendre(u, xu, S) + legendre(v, xv, S)
    X = h * np.arange(len(u) + len(v) - 1)
    # (w)*(X) = max_s X s - w(s): concave in s, X sorted -> reuse the sweep
    out = legendre(w, S, X)
    fu, fv = np.flatnonzero(np.isfinite(u)), np.flatnonzero(np.isfinite(v))
    k = np.arange(len(X))
    outside = (k < fu[0] + fv[0]) | (k > fu[-1] + fv[-1])
    out[outside] = np.inf
    return out


def _conj_axis(U, coords, S, axis):
    """Discrete conjugate of U along one axis (max over coords)."""
    U = np.moveaxis(U, axis, -1)
    out = np.empty(U.shape[:-1] + (len(S),))
    for idx in np.ndindex(U.shape[:-1]):
        out[idx] = legendre(U[idx], coords, S)
    return np.moveaxis(out, -1, axis)


def _infconv_2d(u, v, h):
    S = []
    for ax in range(2):
        with np.errstate(invalid="ignore"):  # inf - inf outside the domain
            d = np.concatenate([np.diff(a, axis=ax).ravel() for a in (u, v)]) / h
        S.append(_dedupe(np.concatenate([d, [0.0]])))

    def conj(a):
        # max_x0 [s0 x0 + max_x1 (s1 x1 - a)], one axis at a time
        inner = _conj_axis(a, h * np.arange(a.shape[1]), S[1], 1)
        return _conj_axis(-inner, h * np.arange(a.shape[0]), S[0], 0)

    w = conj(u) + conj(v)
    X0 = h * np.arange(u.shape[0] + v.shape[0] - 1)
    X1 = h * np.arange(u.shape[1] + v.shape[1] - 1)
    inner = _conj_axis(w, S[1], X1, 1)
    out = _conj_axis(-inner, S[0], X0, 0)
    dom = maxplus(np.where(np.isfinite(u), 0.0, NEG), np.where(np.isfinite(v), 0.0, NEG))
    out[~np.isfinite(dom)] = np.inf
    return out
