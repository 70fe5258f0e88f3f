"""Level sets of sup-convolution integrands and the bodies built from them.

For grid functions f, g on lattices with equal spacing, A_t(x) is the set of
f-lattice points z with f(z) g(x - z) >= t |f|_inf |g|_inf, and x ranges over
the sum lattice.  Measures of A_t(x) are cell counts times the cell volume
("volume") or half the perimeter of the hull of the cell centres ("w1", 2D).

For polyhedral functions and Gaussians A_t(x) is a polytope or an ellipsoid,
and the evaluators at the end of the module measure it exactly.
"""
from __future__ import annotations

import csv
import io
from math import gamma as gamma_fn
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ellipe

from . import grid as G
from .grid import NEG, GridError, GridFunction
from .polytope import quermass_w1

TIE = 1e-12


class _Windows:
    """Products z -> log f(z) + log g(x - z) over f's lattice, one x at a time.

    g is flipped and padded so that each x (sum-lattice index k) corresponds
    to a plain window of the padded array.
    """

    def __init__(self, f: GridFunction, g: GridFunction):
        G._same_spacing(f, g)
        self.f, self.g = f, g
        nf, ng = np.array(f.shape), np.array(g.shape)
        flip = g.log_values[(slice(None, None, -1),) * g.dim]
        self.pad = np.pad(flip, [(m - 1, m - 1) for m in nf], constant_values=NEG)
        self.base = nf + ng - 2
        self.shape = tuple(nf + ng - 1)
        self.origin = f.origin + g.origin

    def product(self, k) -> np.ndarray:
        s = self.base - np.asarray(k)
        sl = tuple(slice(a, a + m) for a, m in zip(s, self.f.shape))
        return self.f.log_values + self.pad[sl]

    def index(self, x) -> np.ndarray:
        return np.rint((np.atleast_1d(x) - self.origin) / self.f.spacing).astype(int)

    def point(self, k) -> np.ndarray:
        return self.origin + np.asarray(k) * self.f.spacing


def _threshold(f: GridFunction, g: GridFunction, t: float) -> float:
    if not (0 < t <= 1):
        raise GridError("t must lie in (0, 1]")
    return np.log(t) + f.log_max + g.log_max - TIE


def a_set(f: GridFunction, g: GridFunction, t: float, x) -> np.ndarray:
    """Boolean mask of A_t(x) over f's lattice."""
    W = _Windows(f, g)
    k = W.index(x)
    if np.any(k < 0) or np.any(k >= np.array(W.shape)):
        return np.zeros(f.shape, dtype=bool)
    return W.product(k) >= _threshold(f, g, t)


def _w1_of_mask(mask, origin, spacing) -> float:
    H = G.mask_hull(None, mask, origin, spacing)
    return 0.0 if H is None else quermass_w1(H)


def volume_map(f: GridFunction, g: GridFunction, t: float, measure: str = "volume") -> np.ndarray:
    """x -> measure of A_t(x) over the whole sum lattice."""
    thr = _threshold(f, g, t)
    if measure == "volume":
        A = f.log_values >= thr - g.log_max
        out = np.zeros(tuple(p + q - 1 for p, q in zip(f.shape, g.shape)))
        # f(z) >= c / max g is necessary, so only those z are visited
        lg = g.log_values
        for idx in np.argwhere(A):
            sl = tuple(slice(i, i + m) for i, m in zip(idx, g.shape))
            out[sl] += lg + f.log_values[tuple(idx)] >= thr
        return out * f.cell_volume
    if measure == "w1":
        if f.dim != 2:
            raise GridError("w1 measure needs 2D grids")
        W = _Windows(f, g)
        nonempty = G.maxplus(f.log_values, g.log_values) >= thr
        out = np.zeros(W.shape)
        for k in np.argwhere(nonempty):
            out[tuple(k)] = _w1_of_mask(W.product(k) >= thr, f.origin, f.spacing)
        return out
    raise GridError(f"unknown measure {measure!r}")


def _lex_argmax(a: np.ndarray) -> tuple:
    best = a.max()
    flat = int(np.flatnonzero(a.ravel() >= best - TIE * max(1.0, abs(best)))[0])
    return tuple(int(i) for i in np.unravel_index(flat, a.shape))


def m_t(f: GridFunction, g: GridFunction, t: float, measure: str = "volume"):
    """(M_t, x0): the largest measure of A_t(x) and the lexicographically first maximiser."""
    vm = volume_map(f, g, t, measure)
    k = _lex_argmax(vm)
    return float(vm[k]), f.origin + g.origin + np.array(k) * f.spacing


def nonempty_map(f: GridFunction, g: GridFunction, t: float) -> np.ndarray:
    return G.maxplus(f.log_values, g.log_values) >= _threshold(f, g, t)


def conv_set(f: GridFunction, g: GridFunction, theta: float, t: float, k: int | None = None):
    """Mask of C_{θ,t} on the sum lattice; k = n uses volume, k = n - 1 uses W1 (2D)."""
    n = f.dim
    k = n if k is None else k
    if not (0 <= theta <= 1):
        raise GridError("theta must lie in [0, 1]")
    if k == n:
        measure = "volume"
    elif k == n - 1 and n == 2:
        measure = "w1"
    else:
        raise GridError("k must be n, or n - 1 in 2D")
    vm = volume_map(f, g, t, measure)
    M = vm.max()
    return nonempty_map(f, g, t) & (vm >= theta * M - TIE * max(1.0, M))


@dataclass
class ConvolutionSetFamily:
    """C_{θ,t} volumes and M_t over a (t, θ) sample grid."""

    t: np.ndarray
    theta: np.ndarray
    M: np.ndarray
    x0: np.ndarray
    volumes: np.ndarray  # shape (len(t), len(theta))
    k: int
    level: np.ndarray  # |C_{0,t}|, the volume of {f*g >= t |f| |g|}
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        """One row per t: t, M_t, x0 coordinates, |C_{0,t}|, then one column per θ."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.x0.shape[1]
        w.writerow(["t", "M_t"] + [f"x0_{i + 1}" for i in range(n)] + ["C0_volume"]
                   + [f"theta_{th:.6g}" for th in self.theta])
        for i, t in enumerate(self.t):
            w.writerow([repr(float(t)), repr(float(self.M[i]))] + [repr(float(v)) for v in self.x0[i]]
                       + [repr(float(self.level[i]))] + [repr(float(v)) for v in self.volumes[i]])
        return buf.getvalue()


def family(f: GridFunction, g: GridFunction, t_samples: int = 16, theta_samples: int = 16,
           k: int | None = None) -> ConvolutionSetFamily:
    """Midpoint samples in t and θ of the convolution bodies."""
    n = f.dim
    k = n if k is None else k
    measure = "volume" if k == n else "w1"
    ts = (np.arange(t_samples) + 0.5) / t_samples
    ths = (np.arange(theta_samples) + 0.5) / theta_samples
    M = np.zeros(len(ts))
    X0 = np.zeros((len(ts), n))
    vols = np.zeros((len(ts), len(ths)))
    level = np.zeros(len(ts))
    for i, t in enumerate(ts):
        vm = volume_map(f, g, t, measure)
        ne = nonempty_map(f, g, t)
        kk = _lex_argmax(vm)
        M[i] = vm[kk]
        X0[i] = f.origin + g.origin + np.array(kk) * f.spacing
        level[i] = ne.sum() * f.cell_volume
        for j, th in enumerate(ths):
            vols[i, j] = (ne & (vm >= th * M[i] - TIE)).sum() * f.cell_volume
    return ConvolutionSetFamily(ts, ths, M, X0, vols, k, level, {"measure": measure})


# -- W1 of functions ------------------------------------------------------------


def _w1_levels(lv: np.ndarray, origin, spacing, samples: int) -> float:
    """∫_0^max W1({f >= t}) dt by the midpoint rule with ``samples`` levels."""
    fin = np.isfinite(lv)
    if not fin.any():
        return 0.0
    m = lv[fin].max()
    s = (np.arange(samples) + 0.5) / samples
    thr = m + np.log(s) - TIE
    vals = np.sort(lv[fin])
    counts = len(vals) - np.searchsorted(vals, thr, side="left")
    out = np.zeros(samples)
    cache = {}
    for j in range(samples):
        c = int(counts[j])
        if c not in cache:
            # level sets are nested, so equal counts mean equal masks
            cache[c] = _w1_of_mask(lv >= thr[j], origin, spacing)
        out[j] = cache[c]
    return float(np.exp(m) * out.mean())


def w1_function(f: GridFunction, samples: int = 64) -> float:
    if f.dim != 2:
        raise GridError("W1 of a function is implemented for 2D grids")
    return _w1_levels(f.log_values, f.origin, f.spacing, samples)


def crofton_w1(f: GridFunction, samples: int = 4000, seed: int = 0):
    """Monte Carlo W1(f) = π R E[max of f over a random line meeting the disk of radius R].

    Returns (estimate, standard error).  A line meets a cell when its distance
    to the cell centre is below the half-width of the cell in the normal direction.
    """
    if f.dim != 2:
        raise GridError("crofton_w1 needs a 2D grid")
    if samples < 100:
        raise GridError("crofton_w1 needs at least 100 samples")
    P = f.points()
    v = np.exp(f.log_values[f.support])
    h = f.spacing
    c0 = 0.5 * (P.min(axis=0) + P.max(axis=0))
    R = 1.25 * float(np.max(np.linalg.norm(np.abs(P - c0) + h / 2, axis=1)))
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, np.pi, samples)
    p = rng.uniform(-R, R, samples)
    best = np.zeros(samples)
    Q = P - c0
    for a in range(0, samples, 64):
        b = min(samples, a + 64)
        n = np.stack([np.cos(phi[a:b]), np.sin(phi[a:b])], axis=1)
        half = 0.5 * (h[0] * np.abs(n[:, 0]) + h[1] * np.abs(n[:, 1]))
        hit = np.abs(n @ Q.T - p[a:b, None]) <= half[:, None]
        best[a:b] = np.where(hit, v[None, :], 0.0).max(axis=1)
    est = np.pi * R * best
    return float(est.mean()), float(est.std(ddof=1) / np.sqrt(samples))


def _section_w1(W: _Windows, k, samples: int) -> float:
    return _w1_levels(W.product(k), W.f.origin, W.f.spacing, samples)


def max_w1_section(f: GridFunction, g: GridFunction, samples: int = 64, exhaustive: int = 2500):
    """max over x0 of W1(z -> f(z) g(x0 - z)) and its lexicographically first maximiser.

    Small problems are scanned exhaustively; larger ones start from a strided
    scan and refine by pattern search with halving steps.
    """
    if f.dim != 2:
        raise GridError("max_w1_section needs 2D grids")
    W = _Windows(f, g)
    cand = G.maxplus(f.log_values, g.log_values) > NEG
    idx = np.argwhere(cand)
    cache = {}

    def val(k):
        k = tuple(int(i) for i in k)
        if k not in cache:
            inside = all(0 <= a < m for a, m in zip(k, W.shape)) and cand[k]
            cache[k] = _section_w1(W, k, samples) if inside else -1.0
        return cache[k]

    if len(idx) <= exhaustive:
        for k in idx:
            val(k)
    else:
        stride = int(np.ceil(np.sqrt(len(idx) / 400)))
        for k in idx[np.all(idx % stride == 0, axis=1)]:
            val(k)
        step = stride
        best = max(cache, key=lambda q: (cache[q], tuple(-i for i in q)))
        while step >= 1:
            moved = False
            for d in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]:
                q = (best[0] + d[0] * step, best[1] + d[1] * step)
                if val(q) > cache[best] + TIE:
                    best, moved = q, True
            if not moved:
                step //= 2
    top = max(cache.values())
    keys = sorted(q for q, v in cache.items() if v >= top - TIE * max(1.0, top))
    return float(top), W.point(keys[0])


# -- exact evaluation for 1D piecewise log-linear interpolants ------------------


class Interp1D:
    """A_t(x) lengths when f and g are replaced by their log-linear interpolants.

    log f and log g are piecewise linear between lattice nodes, so for fixed x
    w(z) = -log f(z) - log g(x - z) is piecewise linear with breakpoints at the
    nodes of f and the reflected, shifted nodes of g; its sublevel set is an
    interval whose endpoints follow by linear interpolation.
    """

    def __init__(self, f: GridFunction, g: GridFunction):
        if f.dim != 1 or g.dim != 1:
            raise GridError("Interp1D needs 1D grids")
        self.zf, self.uf = self._nodes(f)
        self.zg, self.ug = self._nodes(g)
        self.top = -(f.log_max + g.log_max)

    @staticmethod
    def _nodes(f):
        fin = np.flatnonzero(f.support)
        if np.any(np.diff(fin) != 1):
            raise GridError("support must be an interval")
        return f.origin[0] + fin * f.spacing[0], -f.log_values[fin]

    def length(self, x: float, t: float) -> float:
        zf, zg = self.zf, self.zg
        lo, hi = max(zf[0], x - zg[-1]), min(zf[-1], x - zg[0])
        if lo > hi:
            return 0.0
        c = self.top - np.log(t)
        b = np.concatenate([[lo, hi], zf[(zf > lo) & (zf < hi)], x - zg[(x - zg > lo) & (x - zg < hi)]])
        b = np.unique(b)
        w = np.interp(b, zf, self.uf) + np.interp(x - b, zg, self.ug)
        ok = np.flatnonzero(w <= c + 1e-13)
        if len(ok) == 0:
            return 0.0
        i, j = ok[0], ok[-1]
        zl = b[i] if i == 0 else b[i - 1] + (c - w[i - 1]) / (w[i] - w[i - 1]) * (b[i] - b[i - 1])
        zr = b[j] if j == len(b) - 1 else b[j] + (c - w[j]) / (w[j + 1] - w[j]) * (b[j + 1] - b[j])
        return float(max(zr - zl, 0.0))

    def m_t(self, t: float, lattice: int = 256, iters: int = 100):
        """M_t by a lattice scan followed by golden-section search (the length is concave on its support)."""
        X = np.linspace(self.zf[0] + self.zg[0], self.zf[-1] + self.zg[-1], lattice + 1)
        L = np.array([self.length(x, t) for x in X])
        i = int(np.argmax(L))
        a, b = X[max(i - 1, 0)], X[min(i + 1, lattice)]
        r = (np.sqrt(5) - 1) / 2
        c, d = b - r * (b - a), a + r * (b - a)
        fc, fd = self.length(c, t), self.length(d, t)
        for _ in range(iters):
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - r * (b - a)
                fc = self.length(c, t)
            else:
                a, c, fc = c, d, fd
                d = a + r * (b - a)
                fd = self.length(d, t)
        cands = [(L[i], X[i]), (fc, c), (fd, d)]
        best = max(cands, key=lambda p: p[0])
        return float(best[0]), float(best[1])


# -- exact measures for polyhedral functions --------------------------------------


def polyhedral_form(m):
    """(A, b, P, q) with log f = -max(P z + q) on {A z <= b}, or None.

    Covers polytope indicators, exponentials on cones and piecewise-affine
    potentials; for these every A_t(x) is a polytope.
    """
    from . import model as M

    if isinstance(m, M.IndicatorPolytope):
        return m.body.A, m.body.b, np.zeros((1, m.dim)), np.array([-np.log(m.scale)])
    if isinstance(m, M.ExpAffineOnCone):
        return m.cone_A, m.cone_A @ m.apex, m.a[None, :], np.array([-m.a @ m.apex - np.log(m.c)])
    if isinstance(m, M.PiecewiseAffine):
        return m.body.A, m.body.b, m.slopes, m.offsets
    return None


def interpolant(f: GridFunction):
    """The log-linear interpolant of a 1D grid as a piecewise-affine model."""
    from . import model as M
    from .polytope import Polytope

    z, u = Interp1D._nodes(f)
    if len(z) < 2:
        raise GridError("need at least two support nodes")
    slope = np.diff(u) / np.diff(z)
    return M.PiecewiseAffine(Polytope.from_vertices([[z[0]], [z[-1]]]), slope[:, None],
                             u[:-1] - slope * z[:-1])


def _clip(Pts, cnt, a, c):
    """Clip convex polygons (m, V, 2) with ``cnt`` live vertices by a.z <= c.

    Slots past ``cnt`` repeat the first vertex, so rolling by one gives each
    live vertex its successor.
    """
    m, V, _ = Pts.shape
    sp = Pts[..., 0] * a[0] + Pts[..., 1] * a[1] - c[:, None]
    inside = sp <= 0
    if inside.all():
        return Pts, cnt
    live = np.arange(V)[None, :] < cnt[:, None]
    Q = np.roll(Pts, -1, axis=1)
    sq = np.roll(sp, -1, axis=1)
    cross = live & (inside != (sq <= 0))
    lam = np.divide(sp, sp - sq, out=np.zeros_like(sp), where=cross)
    cand = np.empty((m, V, 2, 2))
    cand[:, :, 0] = Pts
    cand[:, :, 1] = Pts + lam[..., None] * (Q - Pts)
    keep = np.empty((m, V, 2), dtype=bool)
    keep[..., 0] = live & inside
    keep[..., 1] = cross
    cand, keep = cand.reshape(m, 2 * V, 2), keep.reshape(m, 2 * V)
    slot = np.cumsum(keep, axis=1) - 1
    cnt = slot[:, -1] + 1
    W = max(int(cnt.max()), 1)
    out = np.zeros((m, W, 2))
    r, k = np.nonzero(keep)
    out[r, slot[r, k]] = cand[r, k]
    pad = np.arange(W)[None, :] >= cnt[:, None]
    out[pad] = np.broadcast_to(out[:, :1], out.shape)[pad]
    return out, cnt


class Sections:
    """Measures of {z : N z <= c0 + D x} as x varies (n = 1 or 2).

    The rows with D = 0 must bound the set.  In 2D their polygon is computed
    once and clipped by the remaining rows, vectorised over x;
    ``measure="w1"`` returns half the perimeter.
    """

    def __init__(self, N: np.ndarray, c0: np.ndarray, D: np.ndarray):
        from .polytope import enumerate_vertices

        self.n = N.shape[1]
        live = np.linalg.norm(N, axis=1) > 1e-14
        self.dead = (c0[~live], D[~live])
        N, c0, D = N[live], c0[live], D[live]
        self.N, self.c0, self.D = N, c0, D
        if self.n == 1:
            return
        if self.n != 2:
            raise GridError("param_measure supports n = 1 or 2")
        fixed = ~D.any(axis=1)
        V0 = enumerate_vertices(N[fixed], c0[fixed]) if fixed.any() else None
        if V0 is not None and len(V0) >= 3:
            c = V0.mean(axis=0)
            V0 = V0[np.argsort(np.arctan2(V0[:, 1] - c[1], V0[:, 0] - c[0]))]
        else:
            V0 = None
        self.V0 = V0
        self.moving = np.flatnonzero(~fixed)
        # largest value of each moving row over the fixed polygon
        self.reach = (V0 @ N[self.moving].T).max(axis=0) if V0 is not None else None

    def __call__(self, X, measure: str = "volume", chunk: int = 4096) -> np.ndarray:
        X = np.atleast_2d(X)
        if len(X) > chunk:
            return np.concatenate([self(X[i:i + chunk], measure, chunk) for i in range(0, len(X), chunk)])
        if measure not in ("volume", "w1"):
            raise GridError(f"unknown measure {measure!r}")
        cd, Dd = self.dead
        feasible = np.all(cd[None, :] + X @ Dd.T >= -1e-12, axis=1)
        if self.n == 1:
            C = self.c0[None, :] + X @ self.D.T
            a = self.N[:, 0]
            with np.errstate(divide="ignore"):
                up = np.min(np.where(a > 0, C / np.where(a > 0, a, 1), np.inf), axis=1)
                lo = np.max(np.where(a < 0, C / np.where(a < 0, a, 1), -np.inf), axis=1)
            if not (np.isfinite(up).all() and np.isfinite(lo).all()):
                raise GridError("unbounded set")
            length = np.clip(up - lo, 0.0, None)
            out = length if measure == "volume" else np.where(up >= lo, 2.0, 0.0)
            return np.where(feasible, out, 0.0)
        if self.V0 is None:
            return np.zeros(len(X))
        Pts = np.broadcast_to(self.V0, (len(X),) + self.V0.shape).copy()
        cnt = np.full(len(X), len(self.V0))
        rhs = self.c0[self.moving] + X @ self.D[self.moving].T
        # rows that hold on the whole fixed polygon for every x need no clipping
        for r, c, skip in zip(self.moving, rhs.T, rhs.min(axis=0) >= self.reach):
            if not skip:
                Pts, cnt = _clip(Pts, cnt, self.N[r], c)
        Pn = np.roll(Pts, -1, axis=1)
        if measure == "volume":
            out = 0.5 * np.abs(np.sum(Pts[..., 0] * Pn[..., 1] - Pts[..., 1] * Pn[..., 0], axis=1))
        else:
            out = 0.5 * np.sum(np.linalg.norm(Pn - Pts, axis=-1), axis=1)
        return np.where(feasible & (cnt > 0), out, 0.0)


def param_measure(N: np.ndarray, c0: np.ndarray, D: np.ndarray, X: np.ndarray,
                  measure: str = "volume", chunk: int = 4096) -> np.ndarray:
    """Measure of {z : N z <= c0 + D x} for every row x of X; see :class:`Sections`."""
    return Sections(N, c0, D)(X, measure, chunk)


def _bracket_max(fn, a, b, first: int, refine: int, tol: float, vtol: float, floor: float = -np.inf):
    """Maximise concave functions of one variable, one per row, by bracketing.

    ``fn(nodes, rows)`` maps nodes (B', K + 1) of the listed rows to values
    and a payload of the same leading shape.  Values must be concave on the
    support and zero off it.  A concave function peaks within one node of its
    best node, so each round keeps that two-cell bracket and refines it; the
    secants through the best node bound the peak from above.  A row stops when
    its bracket is below ``tol`` of the initial width, when the bound is within
    ``vtol`` (relative) of its best value, or when the bound falls under the
    best value of any row or ``floor``.  Rows whose nodes are all zero are
    taken as empty.  Returns best value, node, payload and upper bound per row.
    """
    a0, b0 = np.array(a, dtype=float), np.array(b, dtype=float)
    a, b = a0.copy(), b0.copy()
    B = len(a)
    best, arg, upper = np.full(B, -np.inf), a.copy(), np.full(B, np.inf)
    pay = [None] * B
    active = np.ones(B, dtype=bool)
    K = first
    while active.any():
        idx = np.flatnonzero(active)
        g = a[idx, None] + (b - a)[idx, None] * np.linspace(0.0, 1.0, K + 1)
        v, p = fn(g, idx)
        r = np.arange(len(idx))
        j = np.argmax(v, axis=1)
        vj, gj = v[r, j], g[r, j]
        for q, i in enumerate(idx):
            if vj[q] > best[i]:
                best[i], arg[i], pay[i] = vj[q], gj[q], p[q, j[q]]
        vl = np.where(j > 0, v[r, np.maximum(j - 1, 0)], np.inf)
        vr = np.where(j < K, v[r, np.minimum(j + 1, K)], np.inf)
        # the left half of the bracket is bounded by the right secant and vice versa
        left = np.where(j == 0, -np.inf, np.where(vr > 0, 2 * vj - vr, np.inf))
        right = np.where(j == K, -np.inf, np.where(vl > 0, 2 * vj - vl, np.inf))
        U = np.where(vj > 0, np.maximum(np.maximum(left, right), vj), 0.0)
        upper[idx] = np.minimum(upper[idx], U)
        step = (b[idx] - a[idx]) / K
        a[idx], b[idx] = np.maximum(gj - step, a0[idx]), np.minimum(gj + step, b0[idx])
        lead = max(floor, float(best.max()))
        done = ((step <= tol * np.maximum(b0[idx] - a0[idx], 1e-300))
                | (upper[idx] - best[idx] <= vtol * np.abs(best[idx]))
                | (upper[idx] < lead))
        active[idx[done]] = False
        K = refine
    return best, arg, pay, upper


class _ExactPair:
    """Shared maximisation of x -> measure(A_t(x)) for the closed-form families."""

    n: int

    def measure(self, X, t: float, measure: str = "volume") -> np.ndarray:
        raise NotImplementedError

    def evaluator(self, t: float):
        return lambda X, measure="volume": self.measure(X, t, measure)

    def level_box(self, t: float):
        raise NotImplementedError

    def m_t(self, t: float, measure: str = "volume", tol: float = 1e-8, vtol: float = 1e-10):
        """(M_t, x0) by bracketing searches over the level box.

        phi = M(A_t(x))^{1/k} is concave on its support (k = n for volume,
        k = 1 for W1 in 2D).  In 2D the profile x1 -> max over x2 of phi is
        again concave, so a bracketing search over x1 whose values are
        bracketing searches over x2 finds the maximum without a lattice guess.
        """
        lo, hi = (np.asarray(v, dtype=float) for v in self.level_box(t))
        ev = self.evaluator(t)
        k = self.n if measure == "volume" else max(self.n - 1, 1)

        def phi(X):
            return ev(X, measure) ** (1 / k)

        if self.n == 1:
            best, x, _, _ = _bracket_max(lambda g, rows: (phi(g.reshape(-1, 1)).reshape(g.shape), g),
                                         lo, hi, 200, 16, tol, vtol)
            return float(best[0]) ** k, x.copy()
        if self.n != 2:
            raise GridError("exact maximisation supports n <= 2")
        state = {"floor": -np.inf}

        def outer(g, rows):
            x1 = g[0]

            def col(h, r):
                X = np.stack([np.broadcast_to(x1[r, None], h.shape).ravel(), h.ravel()], axis=1)
                return phi(X).reshape(h.shape), h

            n1 = len(x1)
            v, y, _, _ = _bracket_max(col, np.full(n1, lo[1]), np.full(n1, hi[1]), 32, 16, tol, vtol,
                                      state["floor"])
            state["floor"] = max(state["floor"], float(v.max()))
            return v[None, :], y[None, :]

        best, x1, x2, _ = _bracket_max(outer, lo[:1], hi[:1], 32, 8, tol, vtol)
        return float(best[0]) ** k, np.array([x1[0], x2[0]])


class PolyhedralPair(_ExactPair):
    """Exact measures of A_t(x) for two polyhedral log-concave functions.

    A_t(x) is cut out by the domain of f, the reflected and shifted domain of
    g, and one halfspace per pair of affine pieces.
    """

    def __init__(self, f, g):
        from . import model as M

        self.f, self.g = polyhedral_form(f), polyhedral_form(g)
        if self.f is None or self.g is None:
            raise GridError("both functions must be polyhedral")
        self.uf = M.potential_min(*self.f)
        self.ug = M.potential_min(*self.g)
        self.n = self.f[0].shape[1]

    def rows(self, t: float):
        Af, bf, Pf, qf = self.f
        Ag, bg, Pg, qg = self.g
        L = -np.log(t) + self.uf + self.ug
        # the level rows of f are implied, but they make the x-free part bounded
        N = [Af, Pf, -Ag]
        c0 = [bf, self.uf - np.log(t) - qf, bg]
        D = [np.zeros_like(Af), np.zeros_like(Pf), -Ag]
        for j in range(len(Pf)):
            N.append(Pf[j] - Pg)
            c0.append(L - qf[j] - qg)
            D.append(-Pg)
        return np.vstack(N), np.concatenate(c0), np.vstack(D)

    def measure(self, X, t: float, measure: str = "volume") -> np.ndarray:
        return Sections(*self.rows(t))(X, measure)

    def evaluator(self, t: float):
        return Sections(*self.rows(t))

    def level_box(self, t: float):
        """Bounding box of the x with A_t(x) possibly nonempty."""
        from .polytope import Polytope

        out = []
        for (A, b, Pm, q), umin in ((self.f, self.uf), (self.g, self.ug)):
            B = Polytope.from_halfspaces(np.vstack([A, Pm]), np.concatenate([b, umin - np.log(t) - q]))
            out.append(B.bbox())
        return out[0][0] + out[1][0], out[0][1] + out[1][1]


def _ball_volume(n: int) -> float:
    return float(np.pi ** (n / 2) / gamma_fn(n / 2 + 1))


def _ellipse_w1(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # half the perimeter 4 a E(1 - b^2/a^2) of an ellipse with semi-axes a >= b
    a, b = np.maximum(a, b), np.minimum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.where(a > 0, 1 - (b / np.where(a > 0, a, 1)) ** 2, 0.0)
    return 2 * a * ellipe(m)


class GaussianPair(_ExactPair):
    """Closed-form A_t(x) for two Gaussians: an ellipsoid of fixed shape.

    With A, B the inverse covariances and d = x - mu_f - mu_g, A_t(x) is
    {z : (z - m)' (A + B) (z - m) <= 2 log(1/t) - d' (S_f + S_g)^{-1} d}.
    """

    def __init__(self, f, g):
        self.f, self.g = f, g
        self.n = f.dim
        self.S = np.linalg.inv(f.cov) + np.linalg.inv(g.cov)
        self.H = np.linalg.inv(f.cov + g.cov)
        self.centre = f.mean + g.mean
        self.eig = np.linalg.eigvalsh(self.S)

    def radius2(self, X, t: float) -> np.ndarray:
        d = np.atleast_2d(X) - self.centre
        return 2 * np.log(1 / t) - np.einsum("ij,jk,ik->i", d, self.H, d)

    def measure(self, X, t: float, measure: str = "volume") -> np.ndarray:
        r = np.sqrt(np.clip(self.radius2(X, t), 0, None))
        if measure == "volume":
            return _ball_volume(self.n) * r ** self.n / np.sqrt(np.prod(self.eig))
        if measure == "w1":
            if self.n == 1:
                return np.where(self.radius2(X, t) >= 0, 2.0, 0.0)
            if self.n != 2:
                raise GridError("Gaussian W1 supports n <= 2")
            return _ellipse_w1(r / np.sqrt(self.eig[0]), r / np.sqrt(self.eig[1]))
        raise GridError(f"unknown measure {measure!r}")

    def level_box(self, t: float):
        half = np.sqrt(2 * np.log(1 / t) * np.diag(self.f.cov + self.g.cov))
        return self.centre - half, self.centre + half

    def m_t(self, t: float, measure: str = "volume", tol: float = 1e-10):
        return float(self.measure(self.centre, t, measure)[0]), self.centre.copy()


class PolyhedralSelf:
    """|K_t ∩ (x + K_t)| for K_t = {f >= sqrt(t) |f|}, the sets A_t(f, f̄)(0)."""

    def __init__(self, f):
        from . import model as M

        self.form = polyhedral_form(f)
        if self.form is None:
            raise GridError("function must be polyhedral")
        self.umin = M.potential_min(*self.form)

    def rows(self, t: float):
        A, b, Pm, q = self.form
        NK = np.vstack([A, Pm])
        cK = np.concatenate([b, self.umin - 0.5 * np.log(t) - q])
        return np.vstack([NK, NK]), np.concatenate([cK, cK]), np.vstack([np.zeros_like(NK), NK])

    def overlap(self, X, t: float) -> np.ndarray:
        return param_measure(*self.rows(t), np.atleast_2d(X))


class GaussianSelf:
    """|K_t ∩ (x + K_t)| for a Gaussian, where K_t is an ellipsoid (n <= 2)."""

    def __init__(self, f):
        if f.dim > 2:
            raise GridError("Gaussian overlap supports n <= 2")
        self.f = f
        self.W = np.linalg.cholesky(np.linalg.inv(f.cov))
        self.det = np.sqrt(np.linalg.det(f.cov))

    def overlap(self, X, t: float) -> np.ndarray:
        rho = np.sqrt(np.log(1 / t))
        d = np.linalg.norm(np.atleast_2d(X) @ self.W, axis=1)
        if self.f.dim == 1:
            return np.clip(2 * rho - d, 0, None) * self.det
        h = np.clip(d / (2 * rho), 0, 1)
        lens = 2 * rho ** 2 * (np.arccos(h) - h * np.sqrt(1 - h ** 2))
        return lens * self.det


def exact_pair(f, g):
    """A closed-form evaluator of A_t(x) for the pair, or None."""
    from . import model as M

    if isinstance(f, M.GridSample) and f.dim == 1:
        f = interpolant(f.grid)
    if isinstance(g, M.GridSample) and g.dim == 1:
        g = interpolant(g.grid)
    if isinstance(f, M.Gaussian) and isinstance(g, M.Gaussian):
        return GaussianPair(f, g)
    if polyhedral_form(f) is not None and polyhedral_form(g) is not None and f.dim <= 2:
        return PolyhedralPair(f, g)
    return None


def exact_self(f):
    """A closed-form evaluator of |K_t ∩ (x + K_t)|, or None."""
    from . import model as M

    if isinstance(f, M.GridSample) and f.dim == 1:
        f = interpolant(f.grid)
    if isinstance(f, M.Gaussian) and f.dim <= 2:
        return GaussianSelf(f)
    if polyhedral_form(f) is not None and f.dim <= 2:
        return PolyhedralSelf(f)
    return None
