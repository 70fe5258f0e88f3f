import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logconv import convbody as C
from logconv import grid as G
from logconv import model as M
from logconv import oracle
from logconv import polytope as P
from logconv.grid import GridError, GridFunction
from logconv.polytope import Polytope
from logconv.verify import random_polygon

I01 = Polytope.from_vertices([[0.0], [1.0]])


def interval_pair(N=64):
    f = M.IndicatorPolytope(I01)
    return M.rasterize_aligned([f, f], N)


def gauss_pair(N=200):
    f = M.Gaussian([0.0], [[1.0]])
    return M.rasterize_aligned([f, f.reflect()], N)


def disk(N=256):
    h = 2.2 / N
    ax = -1.1 + h * np.arange(N + 1)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    return GridFunction([-1.1, -1.1], [h, h], np.where(X ** 2 + Y ** 2 <= 1, 0.0, -np.inf))


def test_a_set_indicators_independent_of_t():
    F, Gg = interval_pair()
    h = F.spacing[0]
    masks = [C.a_set(F, Gg, t, [1.0]) for t in (0.1, 0.5, 1.0)]
    assert all(np.array_equal(masks[0], m) for m in masks)
    z = F.points()[masks[0].ravel()]
    assert abs(z.min()) <= h and abs(z.max() - 1) <= h


def test_a_set_gaussian_examples():
    # f(z) f(-z) = e^{-z^2}
    F, Gg = gauss_pair()
    h = F.spacing[0]
    z = F.points()[C.a_set(F, Gg, np.exp(-1), [0.0]).ravel()]
    assert abs(z.min() + 1) <= h and abs(z.max() - 1) <= h
    assert not C.a_set(F, Gg, 1.0, [0.5]).any()


def test_m_t_examples(T):
    F, Gg = interval_pair()
    for t in (0.2, 0.9):
        m, x0 = C.m_t(F, Gg, t)
        assert abs(m - oracle.closed_form("tent_peak").value) <= F.spacing[0] and np.isclose(x0[0], 1.0)
    Fs, Gs = M.rasterize_aligned([M.IndicatorPolytope(T), M.IndicatorPolytope(T.reflect())], 48)
    m, x0 = C.m_t(Fs, Gs, 0.5)
    assert abs(m - 0.5) <= 3 * Fs.spacing[0] and np.allclose(x0, 0, atol=Fs.spacing[0])
    # cell counts plateau near 0 on the grid, so check that 0 is within one cell of M_t
    f = M.Gaussian([0.0], [[1.0]])
    Fg, Gg = gauss_pair()
    m, _ = C.m_t(Fg, Gg, 0.3)
    assert 0 <= m - C.a_set(Fg, Gg, 0.3, [0.0]).sum() * Fg.cell_volume <= Fg.cell_volume
    assert np.allclose(C.exact_pair(f, f.reflect()).m_t(0.3)[1], 0)


def test_m_t_nonincreasing():
    Fg, Gg = gauss_pair(120)
    ms = [C.m_t(Fg, Gg, t)[0] for t in np.linspace(0.05, 1, 12)]
    assert np.all(np.diff(ms) <= 1e-12)


def test_conv_set_examples():
    F, Gg = interval_pair()
    h = F.spacing[0]
    W = C._Windows(F, Gg)
    x = W.origin[0] + h * np.arange(W.shape[0])
    half = x[C.conv_set(F, Gg, 0.5, 0.7)]
    assert abs(half.min() - 0.5) <= h and abs(half.max() - 1.5) <= h
    one = x[C.conv_set(F, Gg, 1.0, 0.7)]
    assert np.allclose(one, 1.0)
    Fg, Gg2 = gauss_pair(128)
    conv = G.convolve(Fg, Gg2)
    lvl = conv.log_values >= np.log(np.exp(-1)) + Fg.log_max + Gg2.log_max - 1e-12
    # the level set of the sup-convolution is C_{0,t}
    sup = G.maxplus(Fg.log_values, Gg2.log_values)
    assert np.array_equal(C.conv_set(Fg, Gg2, 0.0, np.exp(-1)), sup >= np.log(np.exp(-1)) + Fg.log_max + Gg2.log_max - 1e-12)
    assert lvl.any()


def test_conv_set_is_grid_convex():
    f = M.Gaussian([0.0, 0.0], [[1.0, 0.3], [0.3, 1.0]])
    F, Gg = M.rasterize_aligned([f, f.reflect()], 24)
    for th in (0.2, 0.7):
        m = C.conv_set(F, Gg, th, 0.4)
        lv = np.where(m, 0.0, -np.inf)
        assert G.is_grid_convex(GridFunction(F.origin + Gg.origin, F.spacing, lv))


def test_conv_set_rejects_bad_k():
    F, Gg = interval_pair(16)
    with pytest.raises(GridError):
        C.conv_set(F, Gg, 0.5, 0.5, k=0)


def test_family_csv():
    F, Gg = interval_pair(32)
    fam = C.family(F, Gg, t_samples=4, theta_samples=3)
    rows = fam.to_csv().splitlines()
    assert rows[0].split(",")[:4] == ["t", "M_t", "x0_1", "C0_volume"]
    assert len(rows) == 5 and len(rows[1].split(",")) == 4 + 3
    assert np.all(np.diff(fam.M) <= 1e-12)
    assert np.all(np.diff(fam.volumes, axis=1) <= 1e-12)


def test_w1_function_examples():
    S = M.rasterize(M.IndicatorPolytope(Polytope.box([0, 0], [1, 1])), ([0, 0], [1, 1]), 64)
    h = S.spacing[0]
    assert abs(C.w1_function(S) - oracle.closed_form("w1_square").value) <= 4 * h
    assert abs(C.w1_function(disk()) - oracle.closed_form("w1_disk").value) <= 0.05
    g = M.rasterize(M.Gaussian([0.0, 0.0], np.eye(2)), ([-7, -7], [7, 7]), 256)
    ref = oracle.closed_form("w1_gaussian_2d").value
    assert np.isclose(ref, oracle.closed_form("w1_gaussian_2d_gamma").value, rtol=1e-10)
    assert np.isclose(C.w1_function(g, samples=256), ref, rtol=0.02)


def test_crofton_matches_w1():
    for F, ref in ((disk(128), np.pi), (M.rasterize(M.IndicatorPolytope(Polytope.box([0, 0], [1, 1])),
                                                    ([0, 0], [1, 1]), 64), 2.0)):
        est, se = C.crofton_w1(F, samples=4000, seed=1)
        h = F.spacing[0]
        assert abs(est - ref) <= 3 * se + 2 * h
    g = M.rasterize(M.Gaussian([0.0, 0.0], np.eye(2)), ([-7, -7], [7, 7]), 128)
    est, se = C.crofton_w1(g, samples=4000, seed=2)
    assert abs(est - C.w1_function(g)) <= 3 * se + 0.02 * est


def test_crofton_deterministic_and_validates():
    F = disk(32)
    assert C.crofton_w1(F, 200, seed=5) == C.crofton_w1(F, 200, seed=5)
    with pytest.raises(GridError):
        C.crofton_w1(F, samples=10)


def test_max_w1_section_examples(T):
    F, Gg = M.rasterize_aligned([M.IndicatorPolytope(T), M.IndicatorPolytope(T.reflect())], 48)
    h = F.spacing[0]
    v, x0 = C.max_w1_section(F, Gg)
    assert abs(v - oracle.closed_form("w1_triangle").value) <= 4 * h and np.allclose(x0, 0, atol=h)
    Q = M.IndicatorPolytope(Polytope.box([0, 0], [1, 1]))
    F, Gg = M.rasterize_aligned([Q, Q], 32)
    v, x0 = C.max_w1_section(F, Gg)
    assert abs(v - 2) <= 4 * F.spacing[0] and np.allclose(x0, 1, atol=F.spacing[0])


def test_interp1d_matches_interpolant_pair():
    F, Gg = gauss_pair(64)
    ref = C.Interp1D(F, Gg)
    pair = C.exact_pair(M.GridSample(F), M.GridSample(Gg))
    X = np.linspace(-2, 2, 41)
    got = pair.measure(X[:, None], 0.3)
    want = np.array([ref.length(x, 0.3) for x in X])
    assert np.allclose(got, want, atol=1e-9)


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_param_measure_matches_sections(seed):
    rng = np.random.default_rng(seed)
    K = random_polygon(rng)
    L = random_polygon(np.random.default_rng(seed + 1))
    f, g = M.IndicatorPolytope(K), M.IndicatorPolytope(L)
    pair = C.PolyhedralPair(f, g)
    lo, hi = pair.level_box(0.5)
    X = rng.uniform(lo, hi, (12, 2))
    got = pair.measure(X, 0.5)
    want = [P.section_volume(K, L, x) for x in X]
    assert np.allclose(got, want, atol=1e-9)


def test_polyhedral_w1_is_half_perimeter(T):
    pair = C.PolyhedralPair(M.IndicatorPolytope(T), M.IndicatorPolytope(T.reflect()))
    assert np.isclose(pair.measure(np.zeros((1, 2)), 0.5, "w1")[0], P.quermass_w1(T))
    m, x0 = pair.m_t(0.5)
    assert np.isclose(m, 0.5) and np.allclose(x0, 0, atol=1e-6)


def test_gaussian_pair_against_grid():
    f = M.Gaussian([0.2, -0.1], [[1.0, 0.3], [0.3, 1.0]])
    g = M.Gaussian([0.0, 0.5], [[0.7, 0.0], [0.0, 1.2]])
    pair = C.exact_pair(f, g)
    F, Gg = M.rasterize_aligned([f, g], 96)
    mg, xg = C.m_t(F, Gg, 0.4)
    me, xe = pair.m_t(0.4)
    assert np.isclose(me, mg, rtol=0.03)
    assert np.allclose(xe, xg, atol=2 * F.spacing.max())
    # w1 through the ellipse perimeter against the hull of the grid set
    w = pair.measure(xe[None, :], 0.4, "w1")[0]
    k = tuple(np.rint((xe - F.origin - Gg.origin) / F.spacing).astype(int))
    mask = C._Windows(F, Gg).product(k) >= C._threshold(F, Gg, 0.4)
    # the hull of cell centres sits up to one cell inside the ellipse
    assert abs(w - C._w1_of_mask(mask, F.origin, F.spacing)) <= 2 * F.spacing.max()


def test_self_overlaps_at_zero():
    f = M.Gaussian([0.0, 0.0], [[1.0, 0.3], [0.3, 1.0]])
    S = C.exact_self(f)
    t = 0.3
    # |K_t| = pi log(1/t) sqrt(det) for the ellipse {f >= sqrt(t)}
    assert np.isclose(S.overlap(np.zeros((1, 2)), t)[0], np.pi * np.log(1 / t) * np.sqrt(np.linalg.det(f.cov)))
    assert S.overlap(np.array([[50.0, 0.0]]), t)[0] == 0
    g = M.IndicatorPolytope(Polytope.box([0, 0], [1, 1]))
    Q = C.exact_self(g)
    assert np.isclose(Q.overlap(np.array([[0.25, 0.5]]), 0.7)[0], 0.75 * 0.5)


def test_exact_factories_decline_unknown():
    assert C.exact_pair(M.Gaussian([0.0], [[1.0]]), M.IndicatorPolytope(I01)) is None
    cube = M.IndicatorPolytope(Polytope.box([0, 0, 0], [1, 1, 1]))
    assert C.exact_pair(cube, cube) is None
