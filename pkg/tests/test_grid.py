import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from logconv import grid as G
from logconv import model as M
from logconv import oracle
from logconv.grid import GridError, GridFunction
from logconv.polytope import Polytope


def indicator_01(N=100):
    return M.rasterize(M.IndicatorPolytope(Polytope.from_vertices([[0.0], [1.0]])), ([0.0], [1.0]), N)


def test_integral_examples(gauss1d):
    assert np.isclose(G.integral(indicator_01()), 1.0, rtol=1e-12)
    F = M.rasterize(gauss1d, ([-6.0], [6.0]), 256)
    assert np.isclose(G.integral(F), oracle.closed_form("gauss_integral_1d").value, rtol=1e-4)


def test_convolve_tent():
    N = 100
    F = indicator_01(N)
    C = G.convolve(F, F)
    assert abs(C.sup_norm() - oracle.closed_form("tent_peak").value) <= 1 / N
    assert abs(C.at([1.0]) - 1.0) <= 1 / N
    assert np.isclose(G.integral(C), oracle.closed_form("tent_integral").value, rtol=1e-9)


def test_convolve_simplex_pair():
    T = Polytope.simplex(2)
    F, Gg = M.rasterize_aligned([M.IndicatorPolytope(T), M.IndicatorPolytope(T.reflect())], 64)
    assert abs(G.convolve(F, Gg).sup_norm() - 0.5) <= 2 / 64


def test_convolve_fubini_and_fft(gauss1d):
    F, Gg = M.rasterize_aligned([gauss1d, M.Gaussian([1.0], [[0.5]])], 128)
    C = G.convolve(F, Gg)
    assert np.isclose(G.integral(C), G.integral(F) * G.integral(Gg), rtol=1e-9)
    Cf = G.convolve(F, Gg, method="fft")
    assert np.isclose(Cf.sup_norm(), C.sup_norm(), rtol=1e-10)


def test_asplund_examples(gauss1d):
    F = indicator_01(64)
    S = G.asplund(F, F)
    # the sum lattice has 2N - 1 cells
    assert abs(G.integral(S) - 2 * G.integral(F)) <= F.spacing[0] + 1e-12
    Gf = M.rasterize(gauss1d, ([-8.0], [8.0]), 512)
    A = G.asplund(Gf, Gf)
    assert np.isclose(G.integral(A), oracle.closed_form("gauss_asplund_integral_1d").value, rtol=1e-3)


def test_asplund_identity_element(gauss1d):
    F = M.rasterize(gauss1d, ([-6.0], [6.0]), 64)
    delta = GridFunction([0.0], F.spacing, np.array([0.0]))
    assert np.allclose(G.asplund(F, delta).log_values, F.log_values)


def test_maxplus_matches_oracle(rng):
    a = np.log(rng.uniform(0.1, 1, (7, 5)))
    b = np.log(rng.uniform(0.1, 1, (4, 6)))
    a[0, 0] = -np.inf
    assert np.allclose(G.maxplus(a, b), oracle.brute_sup_conv(a, b))
    u = np.log(rng.uniform(0.1, 1, 30))
    v = np.log(rng.uniform(0.1, 1, 17))
    assert np.allclose(G.maxplus(u, v), oracle.brute_sup_conv(u, v))


def test_asplund_argmax_examples(gauss1d):
    Gf = M.rasterize(gauss1d, ([-6.0], [6.0]), 240)
    assert np.isclose(G.asplund_argmax(Gf, Gf, [2.0])[0], 1.0, atol=Gf.spacing[0])
    F = indicator_01(64)
    z = G.asplund_argmax(F, F, [0.5])
    assert np.isclose(z[0], F.origin[0])


def test_oplus_exp_pair():
    f = M.ExpAffineOnCone(1.0, [1.0], [0.0], [[-1.0]])
    F, Gg = M.rasterize_aligned([f, f.reflect()], 512)
    O = G.oplus(F, Gg)
    # f ⊕ g (z) = e^{-|z|}
    assert np.isclose(G.integral(O), oracle.closed_form("colesanti_exp_pair_lhs").value, rtol=0.02)


def test_diff_function_indicator():
    F = indicator_01(64)
    D = G.diff_function(F)
    h = D.spacing[0]
    pts = D.points()
    assert abs(pts.min() + 0.5) <= h and abs(pts.max() - 0.5) <= h
    assert G.integral(D) <= 2 * G.integral(F)


def test_level_set_examples(gauss1d):
    F = M.rasterize(gauss1d, ([-6.0], [6.0]), 240)
    L = G.level_set(F, np.exp(-0.5))
    h = F.spacing[0]
    lo, hi = L.hull.bbox()
    assert abs(lo[0] + 1) <= h and abs(hi[0] - 1) <= h
    I = indicator_01(32)
    assert G.level_set(I, 0.3).mask.all()
    assert not G.level_set(F, 1.01 * F.sup_norm()).mask.any()


def test_legendre_examples():
    x = np.linspace(-4, 4, 801)
    h = x[1] - x[0]
    s = np.linspace(-2, 2, 41)
    assert np.allclose(G.legendre(x ** 2 / 2, x, s), s ** 2 / 2, atol=h ** 2)
    x01 = np.linspace(0, 1, 101)
    assert np.allclose(G.legendre(np.zeros_like(x01), x01, s), np.maximum(0, s))


def test_legendre_nonconvex_warns():
    x = np.linspace(0, 1, 5)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        G.legendre(np.array([0.0, 1.0, 0.0, 1.0, 0.0]), x, np.array([0.0]))
    assert any(issubclass(i.category, RuntimeWarning) for i in w)


CONVEX_FIXTURES = {
    "quadratic": lambda x: x ** 2 / 2,
    "abs": lambda x: np.abs(x - 0.3),
    "exp": lambda x: np.exp(x / 3),
    "interval": lambda x: np.where(np.abs(x) <= 1, 0.0, np.inf),
    "cone": lambda x: np.where(x >= 0, x, np.inf),
}


@pytest.mark.parametrize("name", sorted(CONVEX_FIXTURES))
def test_legendre_infconv_matches_brute_1d(name):
    h = 0.05
    x = np.arange(-40, 41) * h
    u = CONVEX_FIXTURES[name](x)
    v = CONVEX_FIXTURES["quadratic"](x[:60])
    fast = G.inf_convolve_legendre(u, v, h)
    slow = oracle.brute_inf_conv(u, v)
    fin = np.isfinite(slow)
    assert np.array_equal(fin, np.isfinite(fast))
    assert np.max(np.abs(fast[fin] - slow[fin])) <= 1e-10


def test_quadratic_infconv_closed_form():
    h = 0.05
    x = np.arange(-40, 41) * h
    out = oracle.brute_inf_conv(x ** 2 / 2, x ** 2 / 2)
    X = 2 * x[0] + h * np.arange(len(out))
    assert np.allclose(out, X ** 2 / 4, atol=h ** 2)


@pytest.mark.parametrize("pair", [("quadratic", "abs"), ("interval", "quadratic"), ("exp", "cone")])
def test_legendre_infconv_matches_brute_2d_separable(pair):
    h = 0.1
    x = np.arange(-12, 13) * h
    a, b = (CONVEX_FIXTURES[p] for p in pair)
    u = a(x)[:, None] + b(x)[None, :17]
    v = b(x[:14])[:, None] + a(x)[None, :]
    fast = G.inf_convolve_legendre(u, v, h)
    slow = oracle.brute_inf_conv(u, v)
    fin = np.isfinite(slow)
    assert np.array_equal(fin, np.isfinite(fast))
    assert np.max(np.abs(fast[fin] - slow[fin])) <= 1e-10


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=25), st.lists(st.floats(-2, 2), min_size=3, max_size=25))
def test_legendre_infconv_random_convex(du, dv):
    # cumulative sums of sorted increments are convex sequences
    u = np.concatenate([[0.0], np.cumsum(np.sort(du))])
    v = np.concatenate([[0.0], np.cumsum(np.sort(dv))])
    h = 1.0
    fast = G.inf_convolve_legendre(u, v, h)
    assert np.max(np.abs(fast - oracle.brute_inf_conv(u, v))) <= 1e-10


def test_log_concavity_diagnostics(gauss1d):
    F = M.rasterize(gauss1d, ([-6.0], [6.0]), 64)
    assert G.log_concavity_violations(F) == 0
    bad = GridFunction([0.0], [1.0], np.array([0.0, -3.0, 0.0]))
    assert G.log_concavity_violations(bad) == 1
    assert G.is_grid_convex(F)
    holes = GridFunction([0.0], [1.0], np.array([0.0, -np.inf, -np.inf, -np.inf, 0.0]))
    assert not G.is_grid_convex(holes)


def test_mask_rle_roundtrip(rng):
    m = rng.uniform(size=(13, 7)) > 0.5
    assert np.array_equal(G.mask_from_rle(G.mask_rle(m)), m)
    assert G.mask_rle(np.ones(3, bool))["runs"] == [0, 3]


def test_spacing_mismatch_raises():
    a = GridFunction([0.0], [1.0], np.zeros(3))
    b = GridFunction([0.0], [0.5], np.zeros(3))
    with pytest.raises(GridError):
        G.asplund(a, b)


def test_reflect_involution(gauss1d):
    F = M.rasterize(M.Gaussian([0.5], [[1.0]]), ([-6.0], [7.0]), 64)
    R = G.reflect(G.reflect(F))
    assert np.allclose(R.origin, F.origin) and np.array_equal(R.log_values, F.log_values)
