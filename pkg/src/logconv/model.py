"""Symbolic log-concave functions.

Four variants are supported: the indicator of a polytope, an exponential of
an affine function restricted to a translated cone, a scaled Gaussian, and a
sampled :class:`~logconv.grid.GridFunction`.  A fifth, :class:`PiecewiseAffine`
(a polytope indicator times exp of minus a max of affine functions), backs the
random instance generator.  Each variant knows how to
evaluate itself, reflect, report its sup-norm and integral, and pick a
bounding box that keeps all but ``eps_tail`` of its mass.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.special import gammainccinv
from scipy.stats import chi2

from . import grid as G
from .grid import GridFunction
from .polytope import Polytope, volume

EPS_TAIL = 1e-6


class ModelError(ValueError):
    pass


def _check_point(model, x):
    X = np.asarray(x, dtype=float)
    if X.ndim == 0:
        X = X[None]
    if X.shape[-1] != model.dim:
        raise ModelError(f"point of dimension {X.shape[-1]} for a {model.dim}-dimensional model")
    return X


class LogConcaveModel:
    """Common interface; subclasses implement ``log_eval`` and friends."""

    dim: int

    def log_eval(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, x):
        X = _check_point(self, x)
        v = np.exp(self.log_eval(np.atleast_2d(X)))
        return v if X.ndim > 1 else float(v[0])

    def __call__(self, x):
        return self.evaluate(x)


@dataclass(frozen=True, eq=False)
class IndicatorPolytope(LogConcaveModel):
    body: Polytope
    scale: float = 1.0

    def __post_init__(self):
        if not self.body.full_dim:
            raise ModelError("support must be full-dimensional")

    @property
    def dim(self):
        return self.body.dim

    def log_eval(self, X):
        inside = self.body.contains(X, tol=1e-12)
        return np.where(inside, np.log(self.scale), -np.inf)

    def reflect(self):
        return IndicatorPolytope(self.body.reflect(), self.scale)

    def sup_norm(self):
        return self.scale

    def integral(self):
        return self.scale * volume(self.body)

    def truncation_box(self, eps_tail=EPS_TAIL):
        return self.body.bbox()

    def to_dict(self):
        return {"variant": "indicator", "scale": self.scale, **self.body.to_dict()}


def cone_rays(cone_A: np.ndarray) -> np.ndarray:
    """Extreme rays (unit length) of the pointed cone {y : cone_A y <= 0}."""
    A = np.atleast_2d(np.asarray(cone_A, dtype=float))
    n = A.shape[1]
    if n == 1:
        cand = np.array([[1.0], [-1.0]])
    elif n == 2:
        perp = np.stack([-A[:, 1], A[:, 0]], axis=1)
        cand = np.vstack([perp, -perp])
    elif n == 3:
        cr = [np.cross(A[i], A[j]) for i in range(len(A)) for j in range(i + 1, len(A))]
        cr = np.array([c for c in cr if np.linalg.norm(c) > 1e-12])
        cand = np.vstack([cr, -cr])
    else:
        raise ModelError("cones are supported up to dimension 3")
    cand = cand / np.linalg.norm(cand, axis=1, keepdims=True)
    ok = np.all(cand @ A.T <= 1e-9, axis=1)
    R = cand[ok]
    if len(R) == 0:
        raise ModelError("cone has no extreme rays")
    keys = np.round(R, 9)
    _, idx = np.unique(keys, axis=0, return_index=True)
    R = R[np.sort(idx)]
    if np.linalg.matrix_rank(R) < n:
        raise ModelError("cone is not full-dimensional")
    return R


def _cone_fan(R: np.ndarray) -> list[np.ndarray]:
    """Split a cone given by extreme rays into simplicial cones."""
    n = R.shape[1]
    if len(R) == n:
        return [R]
    if n != 3:
        raise ModelError("cone with too many rays")
    axis = R.mean(axis=0)
    axis /= np.linalg.norm(axis)
    u = np.cross(axis, [1.0, 0, 0] if abs(axis[0]) < 0.9 else [0, 1.0, 0])
    u /= np.linalg.norm(u)
    w = np.cross(axis, u)
    ang = np.arctan2(R @ w, R @ u)
    Rs = R[np.argsort(ang)]
    return [np.stack([Rs[0], Rs[i], Rs[i + 1]]) for i in range(1, len(Rs) - 1)]


@dataclass(frozen=True, eq=False)
class ExpAffineOnCone(LogConcaveModel):
    """f(x) = c exp(-<a, x - p>) on p + C, zero elsewhere.

    The cone C is given in H-form ``cone_A y <= 0``.  In 1D the cone
    ``[0, inf)`` is ``cone_A = [[-1]]``.
    """

    c: float
    a: np.ndarray
    apex: np.ndarray
    cone_A: np.ndarray
    rays: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_1d(np.asarray(self.a, dtype=float)))
        object.__setattr__(self, "apex", np.atleast_1d(np.asarray(self.apex, dtype=float)))
        object.__setattr__(self, "cone_A", np.atleast_2d(np.asarray(self.cone_A, dtype=float)))
        if self.c <= 0:
            raise ModelError("scale must be positive")
        R = cone_rays(self.cone_A)
        if np.any(R @ self.a <= 1e-12):
            raise ModelError("not integrable: <a, r> must be positive on every ray")
        object.__setattr__(self, "rays", R)

    @property
    def dim(self):
        return len(self.a)

    def log_eval(self, X):
        Y = X - self.apex
        inside = np.all(Y @ self.cone_A.T <= 1e-12, axis=1)
        return np.where(inside, np.log(self.c) - Y @ self.a, -np.inf)

    def reflect(self):
        return ExpAffineOnCone(self.c, -self.a, -self.apex, -self.cone_A)

    def sup_norm(self):
        return self.c

    def integral(self):
        tot = 0.0
        for R in _cone_fan(self.rays):
            tot += abs(np.linalg.det(R)) / np.prod(R @ self.a)
        return self.c * tot

    def truncation_box(self, eps_tail=EPS_TAIL):
        tau = float(gammainccinv(self.dim, eps_tail))
        P = np.vstack([self.apex, self.apex + tau * self.rays / (self.rays @ self.a)[:, None]])
        return P.min(axis=0), P.max(axis=0)

    def to_dict(self):
        return {"variant": "exp_cone", "c": self.c, "a": self.a.tolist(),
                "apex": self.apex.tolist(), "cone_halfspaces": self.cone_A.tolist()}


@dataclass(frozen=True, eq=False)
class Gaussian(LogConcaveModel):
    mean: np.ndarray
    cov: np.ndarray
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "cov", cov)
        if cov.shape != (self.dim, self.dim) or not np.allclose(cov, cov.T):
            raise ModelError("covariance must be a symmetric dim x dim matrix")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ModelError("covariance must be positive definite")
        if self.c <= 0:
            raise ModelError("scale must be positive")

    @property
    def dim(self):
        return len(self.mean)

    def log_eval(self, X):
        Y = X - self.mean
        q = np.einsum("ij,jk,ik->i", Y, np.linalg.inv(self.cov), Y)
        return np.log(self.c) - 0.5 * q

    def reflect(self):
        return Gaussian(-self.mean, self.cov, self.c)

    def sup_norm(self):
        return self.c

    def integral(self):
        return self.c * np.sqrt((2 * np.pi) ** self.dim * np.linalg.det(self.cov))

    def truncation_box(self, eps_tail=EPS_TAIL):
        r = np.sqrt(chi2.isf(eps_tail, self.dim))
        half = r * np.sqrt(np.diag(self.cov))
        return self.mean - half, self.mean + half

    def to_dict(self):
        return {"variant": "gaussian", "mean": self.mean.tolist(), "cov": self.cov.tolist(), "c": self.c}


@dataclass(frozen=True, eq=False)
class GridSample(LogConcaveModel):
    grid: GridFunction

    @property
    def dim(self):
        return self.grid.dim

    def log_eval(self, X):
        g = self.grid
        k = np.rint((X - g.origin) / g.spacing).astype(int)
        ok = np.all((k >= 0) & (k < np.array(g.shape)), axis=1)
        out = np.full(len(X), -np.inf)
        out[ok] = g.log_values[tuple(k[ok].T)]
        return out

    def reflect(self):
        return GridSample(G.reflect(self.grid))

    def sup_norm(self):
        return self.grid.sup_norm()

    def integral(self):
        return G.integral(self.grid)

    def truncation_box(self, eps_tail=EPS_TAIL):
        g = self.grid
        lo = g.origin - g.spacing / 2
        return lo, lo + np.array(g.shape) * g.spacing

    def to_dict(self):
        g = self.grid
        return {"variant": "grid", "origin": g.origin.tolist(), "spacing": g.spacing.tolist(),
                "shape": list(g.shape)}


def potential_min(A, b, slopes, offsets) -> float:
    """min over {A z <= b} of max_j <slopes_j, z> + offsets_j, as a linear programme."""
    A = np.atleast_2d(A)
    n = A.shape[1]
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.vstack([np.hstack([slopes, -np.ones((len(slopes), 1))]),
                      np.hstack([A, np.zeros((len(A), 1))])])
    b_ub = np.concatenate([-np.asarray(offsets), b])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * (n + 1), method="highs")
    if res.status != 0:
        raise ModelError("potential is unbounded below on its domain")
    return float(res.fun)


@dataclass(frozen=True, eq=False)
class PiecewiseAffine(LogConcaveModel):
    """exp(-max_j <P_j, x> + q_j) on a polytope."""

    body: Polytope
    slopes: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        if not self.body.full_dim:
            raise ModelError("support must be full-dimensional")
        P = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        q = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if P.shape != (len(q), self.body.dim):
            raise ModelError("slopes must be (pieces, dim) and offsets (pieces,)")
        object.__setattr__(self, "slopes", P)
        object.__setattr__(self, "offsets", q)

    @property
    def dim(self):
        return self.body.dim

    def log_eval(self, X):
        u = np.max(X @ self.slopes.T + self.offsets, axis=1)
        return np.where(self.body.contains(X, tol=1e-12), -u, -np.inf)

    def reflect(self):
        return PiecewiseAffine(self.body.reflect(), -self.slopes, self.offsets)

    def sup_norm(self):
        return float(np.exp(-potential_min(self.body.A, self.body.b, self.slopes, self.offsets)))

    def integral(self):
        raise ModelError("no closed form; rasterize and integrate the grid")

    def truncation_box(self, eps_tail=EPS_TAIL):
        return self.body.bbox()

    def to_dict(self):
        return {"variant": "piecewise_affine", **self.body.to_dict(),
                "slopes": self.slopes.tolist(), "offsets": self.offsets.tolist()}


def reflect(model: LogConcaveModel) -> LogConcaveModel:
    """Model of x -> f(-x)."""
    return model.reflect()


def sup_norm(model: LogConcaveModel) -> float:
    return float(model.sup_norm())


# -- rasterisation ------------------------------------------------------------


def _box_contains(outer, inner, tol=1e-9):
    (olo, ohi), (ilo, ihi) = outer, inner
    return bool(np.all(olo <= ilo + tol) and np.all(ohi >= ihi - tol))


def rasterize(model: LogConcaveModel, box, resolution, eps_tail: float = EPS_TAIL) -> GridFunction:
    """Midpoint samples of ``model`` on ``box`` split into ``resolution`` cells per axis."""
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    res = np.broadcast_to(np.atleast_1d(resolution), lo.shape).astype(int)
    if np.any(res < 2):
        raise ModelError("resolution must be at least 2")
    if len(lo) != model.dim:
        raise ModelError("box dimension does not match the model")
    if not _box_contains((lo, hi), model.truncation_box(eps_tail)):
        raise ModelError("box does not capture 1 - eps_tail of the mass")
    h = (hi - lo) / res
    axes = [l + hh * (np.arange(m) + 0.5) for l, hh, m in zip(lo, h, res)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model.dim)
    lv = model.log_eval(mesh).reshape(tuple(res))
    return GridFunction(lo + h / 2, h, lv)


def aligned_boxes(models, resolution: int, eps_tail: float = EPS_TAIL):
    """Boxes on one common lattice for a group of models.

    The spacing is the largest ``extent / resolution`` over the models and
    every box edge is snapped outward to a multiple of it, so all sample
    lattices (and their reflections) coincide.
    """
    boxes = [m.truncation_box(eps_tail) for m in models]
    ext = np.max([hi - lo for lo, hi in boxes], axis=0)
    h = ext / resolution
    out = []
    for lo, hi in boxes:
        a = np.floor(lo / h + 1e-9) * h
        b = np.ceil(hi / h - 1e-9) * h
        b = np.maximum(b, a + 2 * h)
        out.append((a, b, np.rint((b - a) / h).astype(int)))
    return h, out


def rasterize_aligned(models, resolution: int, eps_tail: float = EPS_TAIL) -> list[GridFunction]:
    _, boxes = aligned_boxes(models, resolution, eps_tail)
    return [rasterize(m, (lo, hi), n, eps_tail) for m, (lo, hi, n) in zip(models, boxes)]


def midpoint_violations(model: LogConcaveModel, samples: int = 1000, seed: int = 0,
                        rtol: float = 1e-9) -> int:
    """Random midpoint test f((x+y)/2)^2 >= f(x) f(y) inside the truncation box."""
    rng = np.random.default_rng(seed)
    lo, hi = model.truncation_box()
    X = rng.uniform(lo, hi, (samples, model.dim))
    Y = rng.uniform(lo, hi, (samples, model.dim))
    lm = model.log_eval((X + Y) / 2)
    lx, ly = model.log_eval(X), model.log_eval(Y)
    both = np.isfinite(lx) & np.isfinite(ly)
    with np.errstate(invalid="ignore"):
        bad = both & ~(2 * lm >= lx + ly - rtol * (1 + np.abs(lx + ly)))
    return int(bad.sum())


# -- serialisation ----------------------------------------------------------


def to_json(model: LogConcaveModel, path) -> None:
    """Write a model document; grid payloads go to a ``.bin`` sidecar (float64 LE)."""
    path = Path(path)
    d = model.to_dict()
    if isinstance(model, GridSample):
        side = path.with_suffix(".bin")
        model.grid.log_values.astype("<f8").tofile(side)
        d["data"] = side.name
    path.write_text(json.dumps(d, indent=1, sort_keys=True))


def from_dict(d: dict, base: Path | None = None) -> LogConcaveModel:
    v = d.get("variant")
    if v == "indicator":
        return IndicatorPolytope(Polytope.from_vertices(d["vertices"]), float(d.get("scale", 1.0)))
    if v == "exp_cone":
        return ExpAffineOnCone(float(d["c"]), d["a"], d["apex"], d["cone_halfspaces"])
    if v == "gaussian":
        return Gaussian(d["mean"], d["cov"], float(d.get("c", 1.0)))
    if v == "piecewise_affine":
        return PiecewiseAffine(Polytope.from_vertices(d["vertices"]), d["slopes"], d["offsets"])
    if v == "grid":
        side = (base or Path(".")) / d["data"]
        lv = np.fromfile(side, dtype="<f8").reshape(d["shape"])
        return GridSample(GridFunction(d["origin"], d["spacing"], lv))
    raise ModelError(f"unknown variant {v!r}")


def from_json(path) -> LogConcaveModel:
    path = Path(path)
    return from_dict(json.loads(path.read_text()), path.parent)
