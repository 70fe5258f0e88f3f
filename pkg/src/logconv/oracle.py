"""Slow reference computations for the test suite.

Nothing here imports the fast paths in :mod:`logconv.grid`; the point is to
have an independent second route to every number the fast code produces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, gamma, pi, sqrt

import numpy as np
from scipy import integrate


@dataclass(frozen=True)
class OracleResult:
    value: float
    method: str
    stderr: float = 0.0
    worklog: dict = field(default_factory=dict)


def brute_inf_conv(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """out[k] = min over i + j = k of u[i] + v[j], by exhaustive scan (1D or 2D)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = tuple(p + q - 1 for p, q in zip(u.shape, v.shape))
    out = np.full(shape, np.inf)
    for i in np.ndindex(u.shape):
        if not np.isfinite(u[i]):
            continue
        for j in np.ndindex(v.shape):
            k = tuple(a + b for a, b in zip(i, j))
            s = u[i] + v[j]
            if s < out[k]:
                out[k] = s
    return out


def brute_sup_conv(lf: np.ndarray, lg: np.ndarray) -> np.ndarray:
    """Log-domain sup-convolution through the min-plus oracle."""
    with np.errstate(invalid="ignore"):
        return -brute_inf_conv(-np.asarray(lf), -np.asarray(lg))


def _rng(seed: int, chunk: int) -> np.random.Generator:
    # counter-based stream keyed by (seed, chunk): order of evaluation is irrelevant
    return np.random.Generator(np.random.Philox(key=[seed, chunk]))


def mc_volume(P, samples: int = 100_000, seed: int = 0, chunk: int = 20_000) -> OracleResult:
    """Hit-or-miss volume: bounding-box volume times the fraction of hits."""
    if samples < 1000:
        raise ValueError("mc_volume needs at least 1000 samples")
    lo, hi = P.vertices.min(axis=0), P.vertices.max(axis=0)
    box = float(np.prod(hi - lo))
    hits, done, c = 0, 0, 0
    while done < samples:
        m = min(chunk, samples - done)
        X = _rng(seed, c).uniform(lo, hi, (m, P.dim))
        hits += int(np.all(X @ P.A.T <= P.b, axis=1).sum())
        done += m
        c += 1
    p = hits / samples
    return OracleResult(box * p, "mc_volume", box * sqrt(p * (1 - p) / samples),
                        {"samples": samples, "hits": hits, "seed": seed})


def theta_integral_exact(n: int, k: int) -> Fraction:
    """∫_0^1 (1 - θ^{1/k})^n dθ by expanding the binomial: Σ_j C(n,j) (-1)^j k/(k+j)."""
    return sum((Fraction((-1) ** j * comb(n, j) * k, k + j) for j in range(n + 1)), Fraction(0))


def quad(fn, a: float, b: float) -> OracleResult:
    val, err = integrate.quad(fn, a, b, limit=400, epsabs=1e-13, epsrel=1e-12)
    return OracleResult(float(val), "quad", float(err))


def _w1_gaussian_2d() -> float:
    # isotropic e^{-|x|^2/2}: level s is a disk of radius sqrt(2 ln 1/s), W1 = pi r
    return quad(lambda s: pi * sqrt(2 * np.log(1 / s)), 0.0, 1.0).value


_CATALOG = {
    "gauss_integral_1d": (lambda: sqrt(2 * pi), "∫ e^{-x²/2}"),
    "gauss_conv_sup_1d": (lambda: sqrt(pi), "f*f(0) = ∫ e^{-z²}"),
    "gauss_asplund_integral_1d": (lambda: 2 * sqrt(pi), "∫ e^{-x²/4}, optimum z = x/2"),
    "gauss_rs_fun_ratio_1d": (lambda: 0.5, "2π / 4π"),
    "colesanti_exp_pair_lhs": (lambda: 2.0, "∫ e^{-|z|} times ∫ e^{-x} on [0, ∞)"),
    "colesanti_exp_pair_rhs": (lambda: 2.0, "2 ∫f ∫g with ∫f = ∫g = 1"),
    "tent_peak": (lambda: 1.0, "|[0,1] ∩ [x-1, x]| at x = 1"),
    "tent_integral": (lambda: 1.0, "triangle area"),
    "simplex_difference_area_2d": (lambda: 3.0, "hexagon T - T"),
    "cross_polytope_area_2d": (lambda: 2.0, "conv{±e1, ±e2}"),
    "exp_support_square_integral": (lambda: 4.0, "∫ e^{-|x1|-|x2|} = 2! |K°|"),
    "w1_disk": (lambda: pi, "perimeter 2π over 2"),
    "w1_square": (lambda: 2.0, "perimeter 4 over 2"),
    "w1_triangle": (lambda: (2 + sqrt(2)) / 2, "perimeter 2+√2 over 2"),
    "w1_gaussian_2d": (_w1_gaussian_2d, "∫_0^1 π sqrt(2 ln 1/s) ds"),
    "w1_gaussian_2d_gamma": (lambda: pi * sqrt(2) * gamma(1.5), "π √2 Γ(3/2)"),
}


def closed_form(name: str) -> OracleResult:
    """Analytic fixture values; ``theta_integral_n{n}_k{k}`` is parametric."""
    if name.startswith("theta_integral_"):
        parts = {p[0]: int(p[1:]) for p in name[len("theta_integral_"):].split("_")}
        n, k = parts["n"], parts["k"]
        return OracleResult(1.0 / comb(n + k, k), "closed_form", worklog={"derivation": "1/C(n+k,k)"})
    if name not in _CATALOG:
        raise KeyError(f"unknown closed form {name!r}")
    fn, tag = _CATALOG[name]
    return OracleResult(float(fn()), "closed_form", worklog={"derivation": tag})


def catalog() -> list[str]:
    return sorted(_CATALOG)


# every oracle entry point; the test suite checks each is exercised
REGISTRY = ("brute_inf_conv", "brute_sup_conv", "mc_volume", "theta_integral_exact", "quad",
            "closed_form")
