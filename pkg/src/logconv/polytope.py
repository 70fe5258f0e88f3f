"""Exact convex polytopes in dimension 1 to 3.

A :class:`Polytope` carries both representations: the vertex list and the
halfspace list ``A x <= b``.  Vertex enumeration for intersections is done by
brute force over ``n``-subsets of constraints, which is cheap for the small
bodies handled here.  Hull facets come from qhull (``scipy.spatial``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from math import comb

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull

SNAP = 1e-12
TOL = 1e-9


class PolytopeError(ValueError):
    pass


def _snap(x):
    x = np.array(x, dtype=float)
    x[np.abs(x) < SNAP] = 0.0
    return x


def _unique_rows(X, tol=TOL):
    if len(X) == 0:
        return X
    scale = max(1.0, float(np.abs(X).max()))
    keys = np.round(X / (tol * scale * 10)).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return X[np.sort(idx)]


def _affine_basis(P, tol=TOL):
    """Return (center, basis) of the affine hull; basis columns orthonormal."""
    c = P.mean(axis=0)
    Q = P - c
    if len(P) == 1:
        return c, np.zeros((P.shape[1], 0))
    _, s, vt = np.linalg.svd(Q, full_matrices=True)
    scale = max(1.0, float(np.abs(P).max()))
    r = int(np.sum(s > tol * scale))
    return c, vt[:r].T


def _hull_in_coords(Y):
    """Vertices (indices) and halfspaces of the full-dimensional hull of Y (m, r)."""
    r = Y.shape[1]
    if r == 1:
        lo, hi = int(np.argmin(Y[:, 0])), int(np.argmax(Y[:, 0]))
        A = np.array([[1.0], [-1.0]])
        b = np.array([Y[hi, 0], -Y[lo, 0]])
        return np.array([lo, hi]), A, b, None
    hull = ConvexHull(Y)
    eq = _unique_rows(hull.equations)
    return hull.vertices, eq[:, :-1], -eq[:, -1], hull


@dataclass(frozen=True, eq=False)
class Polytope:
    """Bounded convex polytope with dual V/H representation.

    ``full_dim`` is False for lower-dimensional sets, which arise as
    intersections of bodies that only touch.
    """

    vertices: np.ndarray
    A: np.ndarray
    b: np.ndarray
    full_dim: bool

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @classmethod
    def from_vertices(cls, points) -> "Polytope":
        P = _snap(np.atleast_2d(np.asarray(points, dtype=float)))
        n = P.shape[1]
        if not 1 <= n <= 3:
            raise PolytopeError(f"dimension {n} not supported (1..3)")
        if not np.all(np.isfinite(P)):
            raise PolytopeError("unbounded or non-finite vertex")
        P = _unique_rows(P)
        c, B = _affine_basis(P)
        r = B.shape[1]
        if r == n:
            idx, A, b, _ = _hull_in_coords(P)
            return cls(P[np.sort(idx)], A, b, True)
        # lower-dimensional: hull inside the affine hull, plus equality pairs
        N = _complement(B, n)
        rows, rhs = [], []
        if r > 0:
            Y = (P - c) @ B
            idx, Ar, br, _ = _hull_in_coords(Y)
            V = P[np.sort(idx)]
            Al = Ar @ B.T
            rows.append(Al)
            rhs.append(br + Al @ c)
        else:
            V = P[:1]
        rows += [N.T, -N.T]
        rhs += [N.T @ c, -(N.T @ c)]
        return cls(V, np.vstack(rows), np.concatenate(rhs), False)

    @classmethod
    def from_halfspaces(cls, A, b) -> "Polytope | None":
        """Polytope ``{x : A x <= b}``; None if empty."""
        V = enumerate_vertices(A, b)
        if V is None:
            return None
        return cls.from_vertices(V)

    @classmethod
    def box(cls, lo, hi) -> "Polytope":
        lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
        grids = np.meshgrid(*[[l, h] for l, h in zip(lo, hi)], indexing="ij")
        return cls.from_vertices(np.stack([g.ravel() for g in grids], axis=1))

    @classmethod
    def simplex(cls, n: int) -> "Polytope":
        """Standard simplex conv{0, e_1, ..., e_n}."""
        return cls.from_vertices(np.vstack([np.zeros(n), np.eye(n)]))

    # -- geometry -----------------------------------------------------------

    @cached_property
    def _hull(self):
        if not self.full_dim or self.dim == 1:
            return None
        return ConvexHull(self.vertices)

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def contains(self, x, tol: float = TOL) -> np.ndarray | bool:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all(X @ self.A.T <= self.b + tol, axis=1)
        return inside if np.ndim(x) > 1 else bool(inside[0])

    def translate(self, v) -> "Polytope":
        v = np.asarray(v, dtype=float)
        return Polytope(_snap(self.vertices + v), self.A, self.b + self.A @ v, self.full_dim)

    def scale(self, lam: float) -> "Polytope":
        if lam <= 0:
            raise PolytopeError("scale factor must be positive")
        return Polytope(_snap(lam * self.vertices), self.A, lam * self.b, self.full_dim)

    def reflect(self) -> "Polytope":
        return Polytope(_snap(-self.vertices), -self.A, self.b.copy(), self.full_dim)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def affine_dim(self) -> int:
        return _affine_basis(self.vertices)[1].shape[1]

    def __repr__(self):
        return f"Polytope(dim={self.dim}, nverts={len(self.vertices)}, full_dim={self.full_dim})"

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist(),
                "halfspaces": [[row.tolist(), float(bi)] for row, bi in zip(self.A, self.b)]}

    @classmethod
    def from_dict(cls, d) -> "Polytope":
        return cls.from_vertices(d["vertices"])


def _complement(B, n):
    if B.shape[1] == 0:
        return np.eye(n)
    q, _ = np.linalg.qr(np.hstack([B, np.eye(n)]))
    return q[:, B.shape[1]:n]


def enumerate_vertices(A, b, tol: float = TOL) -> np.ndarray | None:
    """Vertices of ``{A x <= b}`` by checking every n-subset of constraints."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    n = A.shape[1]
    idx = np.array(list(combinations(range(len(A)), n)))
    if len(idx) == 0:
        return None
    M = A[idx]
    det = np.linalg.det(M)
    keep = np.abs(det) > 1e-12
    if not keep.any():
        return None
    X = np.linalg.solve(M[keep], b[idx[keep]][..., None])[..., 0]
    scale = max(1.0, float(np.abs(b).max()))
    feas = np.all(X @ A.T <= b + tol * scale, axis=1)
    if not feas.any():
        return None
    return _unique_rows(_snap(X[feas]))


# -- arithmetic -------------------------------------------------------------


def _check_dims(P: Polytope, Q: Polytope):
    if P.dim != Q.dim:
        raise PolytopeError(f"dimension mismatch: {P.dim} vs {Q.dim}")


def minkowski_sum(P: Polytope, Q: Polytope) -> Polytope:
    _check_dims(P, Q)
    S = (P.vertices[:, None, :] + Q.vertices[None, :, :]).reshape(-1, P.dim)
    return Polytope.from_vertices(S)


def difference_body(K: Polytope) -> Polytope:
    return minkowski_sum(K, K.reflect())


def conv_union(P: Polytope, Q: Polytope) -> Polytope:
    """conv(P ∪ Q)."""
    _check_dims(P, Q)
    return Polytope.from_vertices(np.vstack([P.vertices, Q.vertices]))


def intersect(P: Polytope, Q: Polytope) -> Polytope | None:
    """P ∩ Q, or None when empty; degenerate results carry full_dim=False."""
    _check_dims(P, Q)
    return Polytope.from_halfspaces(np.vstack([P.A, Q.A]), np.concatenate([P.b, Q.b]))


def volume(P: Polytope | None) -> float:
    """Lebesgue measure; 0 for empty or lower-dimensional sets."""
    if P is None or not P.full_dim:
        return 0.0
    V = P.vertices
    if P.dim == 1:
        return float(V.max() - V.min())
    c = P.centroid
    hull = P._hull
    if P.dim == 2:
        W = V[hull.vertices] - c  # counter-clockwise order
        W2 = np.roll(W, -1, axis=0)
        return float(0.5 * np.sum(W[:, 0] * W2[:, 1] - W[:, 1] * W2[:, 0]))
    T = V[hull.simplices] - c
    return float(np.abs(np.linalg.det(T)).sum() / 6.0)


def _relative_volume(P: Polytope) -> float:
    """Volume of P inside its own affine hull (0-dim sets count as 1)."""
    c, B = _affine_basis(P.vertices)
    r = B.shape[1]
    if r == 0:
        return 1.0
    Y = (P.vertices - c) @ B
    if r == 1:
        return float(Y.max() - Y.min())
    return float(ConvexHull(Y).volume)


def surface_area(P: Polytope) -> float:
    """Boundary measure of a full-dimensional polytope (endpoint count in 1D)."""
    if not P.full_dim:
        raise PolytopeError("surface area needs a full-dimensional polytope")
    if P.dim == 1:
        return 2.0
    V, hull = P.vertices, P._hull
    if P.dim == 2:
        W = V[hull.vertices]
        return float(np.linalg.norm(W - np.roll(W, -1, axis=0), axis=1).sum())
    T = V[hull.simplices]
    cr = np.cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0])
    return float(0.5 * np.linalg.norm(cr, axis=1).sum())


def boundary_measure(P: Polytope | None) -> float:
    """Surface area extended to degenerate sets as a limit of thin bodies."""
    if P is None:
        return 0.0
    if P.full_dim:
        return surface_area(P)
    if P.affine_dim() == P.dim - 1:
        return 2.0 * _relative_volume(P)
    return 0.0


def quermass_w1(P: Polytope | None) -> float:
    """W_1 = |boundary| / n."""
    return boundary_measure(P) / (P.dim if P is not None else 1)


def support_function(P: Polytope, x) -> np.ndarray | float:
    X = np.asarray(x, dtype=float)
    h = np.atleast_2d(X) @ P.vertices.T
    out = h.max(axis=1)
    return out if X.ndim > 1 else float(out[0])


def polar(P: Polytope) -> Polytope:
    """{y : <x, y> <= 1 for all x in P}; needs 0 in the interior."""
    if not P.full_dim or np.any(P.b <= TOL):
        raise PolytopeError("origin is not an interior point")
    Q = Polytope.from_halfspaces(P.vertices, np.ones(len(P.vertices)))
    assert Q is not None
    return Q


def is_centrally_symmetric(P: Polytope, tol: float = TOL) -> bool:
    V = P.vertices
    c = V.mean(axis=0)
    R = 2 * c - V
    d = np.abs(R[:, None, :] - V[None, :, :]).max(axis=2)
    scale = max(1.0, float(np.abs(V).max()))
    return bool(np.all(d.min(axis=1) <= tol * 10 * scale))


def hausdorff(P: Polytope, Q: Polytope) -> float:
    """Hausdorff distance, via support functions on a dense direction set."""
    _check_dims(P, Q)
    if P.dim == 1:
        U = np.array([[1.0], [-1.0]])
    else:
        U = _directions(P.dim, 2048)
    return float(np.abs(support_function(P, U) - support_function(Q, U)).max())


def _directions(n, m):
    if n == 2:
        a = np.linspace(0, 2 * np.pi, m, endpoint=False)
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    # Fibonacci sphere
    i = np.arange(m) + 0.5
    phi = np.arccos(1 - 2 * i / m)
    th = np.pi * (1 + 5 ** 0.5) * i
    return np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)


# -- fast section volumes ---------------------------------------------------


def _ccw(P: Polytope) -> np.ndarray:
    return P.vertices[P._hull.vertices]


def _clip(poly: np.ndarray, a: np.ndarray, b: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon against <a, x> <= b."""
    if len(poly) == 0:
        return poly
    s = poly @ a - b
    out = []
    m = len(poly)
    for i in range(m):
        j = (i + 1) % m
        if s[i] <= 0:
            out.append(poly[i])
        if (s[i] < 0 < s[j]) or (s[j] < 0 < s[i]):
            t = s[i] / (s[i] - s[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.array(out) if out else np.zeros((0, 2))


def _shoelace(W: np.ndarray) -> float:
    if len(W) < 3:
        return 0.0
    W2 = np.roll(W, -1, axis=0)
    return 0.5 * abs(float(np.sum(W[:, 0] * W2[:, 1] - W[:, 1] * W2[:, 0])))


def section_volume(K: Polytope, L: Polytope, x) -> float:
    """|K ∩ (x - L)| evaluated exactly."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if K.dim == 1:
        lo = max(K.vertices.min(), x[0] - L.vertices.max())
        hi = min(K.vertices.max(), x[0] - L.vertices.min())
        return max(0.0, float(hi - lo))
    if K.dim == 2 and K.full_dim and L.full_dim:
        poly = _ccw(K)
        # x - L = {y : -A_L y <= b_L - A_L x}
        for a, bb in zip(-L.A, L.b - L.A @ x):
            poly = _clip(poly, a, bb)
            if len(poly) == 0:
                return 0.0
        return _shoelace(poly)
    return volume(intersect(K, L.reflect().translate(x)))


def section(K: Polytope, L: Polytope, x) -> Polytope | None:
    """K ∩ (x - L)."""
    return intersect(K, L.reflect().translate(np.atleast_1d(x)))


def _node_lattice(lo, hi, resolution):
    axes = [np.linspace(l, h, resolution + 1) for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return axes, np.stack([m.ravel() for m in mesh], axis=1)


def max_section(K: Polytope, L: Polytope, measure=None, resolution: int | None = None):
    """max over x of ``measure(K ∩ (x - L))`` (volume by default).

    Node-lattice search over K + L followed by a Nelder-Mead polish from the
    best node.  Ties on the lattice go to the lexicographically smallest node.
    Returns ``(value, x0)``.
    """
    _check_dims(K, L)
    n = K.dim
    if resolution is None:
        resolution = {1: 256, 2: 48, 3: 12}[n]
    S = minkowski_sum(K, L)
    lo, hi = S.bbox()
    if measure is None:
        def fn(x):
            return section_volume(K, L, x)
    else:
        def fn(x):
            return measure(section(K, L, x))
    return maximize_on_box(fn, lo, hi, resolution)


def maximize_on_box(fn, lo, hi, resolution: int):
    """Maximise fn over a box: node lattice, then Nelder-Mead from the best node.

    Ties on the lattice go to the lexicographically smallest node.  Meant for
    functions that are concave (after a monotone transform) on their support.
    """
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    _, X = _node_lattice(lo, hi, resolution)
    vals = np.array([fn(x) for x in X])
    best = float(vals.max())
    cand = X[vals >= best - 1e-15]
    order = np.lexsort(cand.T[::-1])
    x0 = cand[order[0]]
    res = minimize(lambda y: -fn(y), x0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000,
                            "initial_simplex": _simplex_around(x0, (hi - lo) / resolution)})
    if -res.fun > best + 1e-15:
        return float(-res.fun), np.asarray(res.x)
    return best, x0


def _simplex_around(x0, step):
    n = len(x0)
    S = np.tile(x0, (n + 1, 1))
    for i in range(n):
        S[i + 1, i] += step[i]
    return S


@dataclass(frozen=True)
class ThetaBody:
    axes: list
    values: np.ndarray  # section volumes v(x) on the node lattice
    nonempty: np.ndarray
    mask: np.ndarray
    cell_volume: float

    @property
    def measured_volume(self) -> float:
        return float(self.mask.sum() * self.cell_volume)


def theta_convolution_body(K: Polytope, L: Polytope, theta: float, resolution: int = 64) -> ThetaBody:
    """Grid mask of K +_theta L = {x : |K ∩ (x-L)| >= theta max_z |K ∩ (z-L)|}.

    Evaluated exactly at the nodes of a regular lattice over the bounding box
    of K + L.
    """
    if resolution < 8:
        raise PolytopeError("resolution must be >= 8")
    if not 0.0 <= theta <= 1.0:
        raise PolytopeError("theta must lie in [0, 1]")
    if not (K.full_dim and L.full_dim):
        raise PolytopeError("K and L must be full-dimensional")
    S = minkowski_sum(K, L)
    lo, hi = S.bbox()
    axes, X = _node_lattice(lo, hi, resolution)
    shape = tuple(len(a) for a in axes)
    v = np.array([section_volume(K, L, x) for x in X]).reshape(shape)
    nonempty = S.contains(X, tol=1e-12).reshape(shape)
    vmax = v.max()
    if theta == 0.0:
        mask = nonempty.copy()
    else:
        mask = nonempty & (v >= theta * vmax - 1e-12)
    cell = float(np.prod((hi - lo) / resolution))
    return ThetaBody(axes, v, nonempty, mask, cell)


def central_binomial(n: int) -> int:
    return comb(2 * n, n)
