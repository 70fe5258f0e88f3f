import numpy as np
import pytest

from logconv import grid as G
from logconv import model as M
from logconv import oracle
from logconv import verify as V
from logconv.polytope import Polytope
from logconv.verify import CheckConfig, VerifyError

I01 = Polytope.from_vertices([[0.0], [1.0]])
FAST = CheckConfig(resolution=64, t_samples=32)


def test_passes_table():
    assert V.passes("upper", 1.01, 0.02) and not V.passes("upper", 1.03, 0.02)
    assert V.passes("lower", 0.99, 0.02) and not V.passes("lower", 0.97, 0.02)
    assert V.passes("predicate", 1.0, 0.0) and not V.passes("predicate", 0.99, 0.0)
    assert not V.passes("upper", float("nan"), 0.02)
    with pytest.raises(VerifyError):
        V.passes("sideways", 1.0, 0.0)


def test_report_fields():
    rep = V.make_report("rs_diff", 3.0, 6.0, 1e-9, "exact", cfg=FAST)
    d = rep.to_dict()
    assert d["ratio"] == 0.5 and d["pass"] and d["direction"] == "upper"
    assert {"inequality", "lhs", "rhs", "ratio", "pass", "error_estimate", "resolution", "seed"} <= set(d)


def test_body_examples(T):
    r = V.check_body("rs_diff", T)
    assert np.isclose(r.lhs, oracle.closed_form("simplex_difference_area_2d").value) and abs(r.ratio - 1) <= 1e-9
    r = V.check_body("rs_union", T)
    assert np.isclose(r.lhs, oracle.closed_form("cross_polytope_area_2d").value) and abs(r.ratio - 1) <= 1e-9
    r = V.check_body("rs_diff", Polytope.box([0, 0], [1, 1]))
    assert np.isclose(r.lhs, 4) and np.isclose(r.ratio, 2 / 3)
    assert abs(V.check_body("rs_two", T, T.reflect()).ratio - 1) <= 1e-9
    assert V.check_body("bm", T, Polytope.box([0, 0], [1, 1])).passed


def test_body_origin_precondition():
    with pytest.raises(VerifyError):
        V.check_body("rs_union", Polytope.box([1, 1], [2, 2]))


def test_polar_square():
    Q = Polytope.box([-1, -1], [1, 1])
    r = V.check_polar(Q, Q)
    assert np.isclose(r.lhs, 16) and np.isclose(r.rhs, 64) and np.isclose(r.ratio, 0.25)
    assert np.isclose(r.params["middle"], 16) and r.params["ordered"]


def test_polar_random_pairs():
    rng = np.random.default_rng(11)
    for _ in range(50):
        K = V.random_polygon(rng)
        K = K.translate(-K.centroid)
        L = V.random_polygon(rng)
        L = L.translate(-L.centroid)
        assert V.check_polar(K, L).passed


def test_function_examples():
    f = M.IndicatorPolytope(I01)
    r = V.check_function("rs_fun", f, f)
    assert np.isclose(r.lhs, 2) and np.isclose(r.rhs, 2) and r.path == "exact"
    g = M.Gaussian([0.0], [[1.0]])
    r = V.check_function("rs_fun", g, g, CheckConfig(resolution=128))
    assert abs(r.ratio - oracle.closed_form("gauss_rs_fun_ratio_1d").value) <= 0.01
    e = M.ExpAffineOnCone(1.0, [1.0], [0.0], [[-1.0]])
    r = V.check_function("colesanti", e, e.reflect(), CheckConfig(resolution=128))
    want = oracle.closed_form("colesanti_exp_pair_lhs").value / oracle.closed_form("colesanti_exp_pair_rhs").value
    assert abs(r.ratio - want) <= 0.02


def test_rs_surface_fun_simplex_exact(T):
    r = V.check_function("rs_surface_fun", M.IndicatorPolytope(T), M.IndicatorPolytope(T.reflect()))
    assert abs(r.ratio - 1) <= 1e-9


def test_function_errors(gauss1d):
    with pytest.raises(VerifyError):
        V.check_function("rs_fun", gauss1d)
    with pytest.raises(VerifyError):
        V.check_function("nope", gauss1d, gauss1d)


@pytest.mark.parametrize("name", ["gauss1d", "expcone1d", "tent1d", "simplex2d", "square2d"])
def test_pair_ratio_below_self_ratio(name):
    # with g = reflect(f) the ratios differ by |f|_inf ∫f / ∫f^2 >= 1
    f = V.fixtures()[name].f
    fb = M.reflect(f)
    a = V.check_function("rs_self", f, cfg=FAST)
    b = V.check_function("rs_fun", f, fb, cfg=FAST)
    assert b.ratio <= a.ratio + 1e-9 + 0.02
    if a.path == "grid":
        (F,) = M.rasterize_aligned([f], FAST.resolution, FAST.eps_tail)
        F2 = G.GridFunction(F.origin, F.spacing, 2 * F.log_values)
        gap = F.sup_norm() * G.integral(F) / G.integral(F2)
        assert np.isclose(a.params["ratio_N"] / b.params["ratio_N"], gap, rtol=0.02)


def test_simplex_certificate_examples(T):
    assert V.simplex_certificate(M.IndicatorPolytope(T))["isSimplexIndicator"]
    assert not V.simplex_certificate(M.IndicatorPolytope(Polytope.box([0, 0], [1, 1])))["isSimplexIndicator"]
    cfg = CheckConfig(resolution=64)
    g = V.simplex_certificate(M.Gaussian([0.0, 0.0], np.eye(2)), cfg)
    assert not g["isSimplexIndicator"] and max(g["evidence"]["vertex_counts"]) > 3
    cone = M.ExpAffineOnCone(1.0, [1.0, 1.0], [0.0, 0.0], [[-1.0, 0.0], [0.0, -1.0]])
    c = V.simplex_certificate(cone, cfg)
    assert not c["isSimplexIndicator"] and not all(c["evidence"]["facet_in_top"])
    grid_T = V.simplex_certificate(M.IndicatorPolytope(T), CheckConfig(resolution=64, path="grid"))
    assert grid_T["isSimplexIndicator"]


@pytest.mark.parametrize("name", ["simplex2d", "square2d", "hexagon2d", "gauss2d"])
def test_certificate_implies_equality(name):
    f = V.fixtures()[name].f
    if not V.simplex_certificate(f, FAST)["isSimplexIndicator"]:
        return
    assert abs(V.check_function("rs_self", f, cfg=FAST).ratio - 1) <= 0.02
    assert abs(V.check_function("rs_fun", f, M.reflect(f), cfg=FAST).ratio - 1) <= 0.02


def test_theta_integral_checks():
    for n, k in V.THETA_CASES:
        r = V.check_structure("theta_integral", n=n, k=k)
        assert r.passed and abs(r.lhs - float(oracle.theta_integral_exact(n, k))) <= 1e-6


@pytest.mark.parametrize("name", ["tent1d", "gauss1d", "expcone1d", "simplex2d", "hexagon2d"])
def test_structure_checks_on_fixtures(name):
    inst = V.fixtures()[name]
    cfg = CheckConfig(resolution=64 if inst.dim == 1 else 32, t_samples=32)
    for r in V._structure_reports(inst, cfg):
        assert r.passed, (r.name, r.lhs, r.rhs, r.params)


def test_structure_scaling_tent_grid():
    inst = V.fixtures()["tent1d"]
    r = V.check_structure("scaling", inst, CheckConfig(resolution=64, path="grid"))
    assert r.passed and r.path == "grid"


def test_half_translate_gaussian_samples(gauss1d):
    r = V.check_structure("half_translate", V.Instance("g", gauss1d), FAST)
    assert r.passed and r.rhs >= 16


def test_scaling_k_needs_2d():
    with pytest.raises(VerifyError):
        V.check_structure("scaling_k", V.fixtures()["tent1d"], FAST)


def test_random_structure_instances():
    cfg = CheckConfig(resolution=32, t_samples=16)
    for seed in range(2):
        for dim in (1, 2):
            for r in V._structure_reports(V.random_structure_instance(seed, dim), cfg):
                assert r.passed, (seed, dim, r.name, r.params)


def test_error_estimate_shrinks_with_resolution():
    g = V.fixtures()["gauss1d"]
    for name in ("rs_fun", "rs_self"):
        e1 = V.check_function(name, g.f, g.second, CheckConfig(resolution=64)).error_estimate
        e2 = V.check_function(name, g.f, g.second, CheckConfig(resolution=128)).error_estimate
        assert e2 <= e1


def test_equality_suite_on_tent():
    inst = V.fixtures()["tent1d"]
    reps = V.run_instance(inst, "equality", FAST)
    assert reps and all(r.passed and r.params["expect_equality"] for r in reps)


def test_default_suite_square():
    reps = V.run_instance(V.fixtures()["square2d"], "default", FAST)
    names = {r.name for r in reps}
    assert {"rs_diff", "bm", "rs_fun", "colesanti"} <= names
    assert all(r.passed for r in reps)


def test_suite_instances_sorted_and_validated():
    names = [i.name for i in V.suite_instances("default")]
    assert names == sorted(names)
    assert all(i.dim == 1 for i in V.suite_instances("default", dim=1))
    with pytest.raises(VerifyError):
        V.suite_instances("default", names=["nope"])


def test_fuzz_deterministic_and_sorted():
    a = V.fuzz("polygons", 30, 5, "rs_diff")
    b = V.fuzz("polygons", 30, 5, "rs_diff")
    assert a == b
    ratios = [r.ratio for r in a]
    assert ratios == sorted(ratios, reverse=True)
    # other triangles tie with the simplex, so only the top ratio is fixed
    assert abs(a[0].ratio - 1) <= 1e-9
    assert abs(next(r for r in a if r.instance == "polygon_0").ratio - 1) <= 1e-9
    with pytest.raises(VerifyError):
        V.fuzz("polygons", 3, 0, "rs_fun")


def test_fuzz_logconcave_rows():
    rows = V.fuzz("logconcave", 3, 1, "rs_self", CheckConfig(resolution=32, richardson=False), dim=1)
    assert len(rows) == 3 and all(r.ratio <= 1.02 for r in rows)


def test_non_logconcave_samples_are_flagged():
    x = np.linspace(-4, 4, 65)
    two_bumps = np.logaddexp(-(x - 2) ** 2, -(x + 2) ** 2)
    f = M.GridSample(G.GridFunction([-4.0], [x[1] - x[0]], two_bumps))
    r = V.check_function("rs_self", f, cfg=CheckConfig(resolution=32, richardson=False))
    assert r.params["log_concavity_violations"]["f"] > 0
    g = M.GridSample(G.GridFunction([-4.0], [x[1] - x[0]], -x ** 2 / 2))
    r = V.check_function("rs_self", g, cfg=CheckConfig(resolution=32, richardson=False))
    assert r.params["log_concavity_violations"] == {"f": 0, "g": 0}


def test_surface_near_equality_recorded_in_2d(T):
    f, g = M.IndicatorPolytope(T), M.IndicatorPolytope(T.reflect())
    assert V.check_function("rs_surface_fun", f, g).params["near_equality"]
    q = M.IndicatorPolytope(Polytope.box([0, 0], [1, 1]))
    r = V.check_function("rs_surface_fun", q, q)
    assert r.passed and not r.params["near_equality"]
