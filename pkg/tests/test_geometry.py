import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neumann_green import geometry as geo


# -- builders ---------------------------------------------------------------


def test_disk_parametrization():
    c = geo.disk()
    t = np.linspace(0, 2 * math.pi, 7)
    assert np.allclose(c.position(t), np.column_stack([np.cos(t), np.sin(t)]), atol=1e-15)


def test_ellipse_parametrization():
    c = geo.ellipse(2.0, 0.5)
    t = np.array([0.3, 2.0])
    assert np.allclose(c.position(t), np.column_stack([2 * np.cos(t), 0.5 * np.sin(t)]))


def test_cassini_pill_symmetry_and_area():
    c = geo.cassini(1 / math.sqrt(2), area=math.pi)
    t = np.linspace(0, 2 * math.pi, 101)
    P = c.position(t)
    Q = c.position(math.pi - t)
    assert np.allclose(P[:, 0], -Q[:, 0], atol=1e-13) and np.allclose(P[:, 1], Q[:, 1], atol=1e-13)
    assert abs(geo.area(c) - math.pi) < 1e-12
    # the closed-form area with the factor 2 agrees with the numerical one
    d = c.descriptor
    assert abs(geo.cassini_area_closed_form(d["k"], d["b"]) - math.pi) < 1e-12


def test_cassini_receptors_on_curve():
    c = geo.cassini(0.5)
    a, b = c.descriptor["a"], c.descriptor["b"]
    x = c.position(np.array([0.0]))[0]
    assert abs(x[0] - math.sqrt(a * a + b * b)) < 1e-14


@pytest.mark.parametrize("k", [1.0, 1.2, 0.0])
def test_cassini_rejects_bad_k(k):
    with pytest.raises(geo.GeometryError):
        geo.cassini(k)


def test_fourier_random_is_reproducible():
    c1 = geo.fourier_random(11)
    c2 = geo.fourier_random(11)
    t = np.linspace(0, 6, 9)
    assert np.array_equal(c1.position(t), c2.position(t))
    d = c1.descriptor
    assert d["a0"] == pytest.approx(1.1 * sum(abs(v) for v in d["a"] + d["b"]), rel=1e-15)


def test_self_intersecting_samples_rejected():
    t = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    # figure eight
    pts = np.column_stack([np.sin(t), np.sin(t) * np.cos(t)])
    with pytest.raises(geo.GeometryError):
        geo.from_samples(pts)


def test_build_curve_descriptor_round_trip():
    for desc in [{"type": "ellipse", "a": 2.0, "b": 0.5}, {"type": "cassini", "k": 0.7},
                 {"type": "fourier", "seed": 3}, {"type": "star"}]:
        c = geo.build_curve(desc)
        text = geo.descriptor_to_config(c.descriptor, n_panels=40, order=16)
        back, n, k = geo.config_to_descriptor(text)
        assert (n, k) == (40, 16)
        c2 = geo.build_curve(back)
        t = np.linspace(0, 6, 13)
        assert np.allclose(c.position(t), c2.position(t), atol=1e-14)


def test_unknown_curve_type():
    with pytest.raises(geo.GeometryError):
        geo.build_curve({"type": "blob"})


@pytest.mark.parametrize("make", [geo.disk, lambda: geo.ellipse(2, 0.5), lambda: geo.cassini(0.9),
                                  lambda: geo.fourier_random(5), geo.star, geo.barbell])
def test_counterclockwise_and_positive_speed(make):
    c = make()
    t = np.linspace(0, 2 * math.pi, 2000, endpoint=False)
    assert geo.area(c) > 0
    assert c.speed(t).min() > 0


# -- curvature ----------------------------------------------------------------


def test_curvature_examples():
    assert np.allclose(geo.curvature(geo.disk(), np.linspace(0, 6, 5)), 1.0)
    e = geo.ellipse(2.0, 0.5)
    assert geo.curvature(e, 0.0)[0] == pytest.approx(8.0, rel=1e-14)
    assert geo.curvature(e, math.pi / 2)[0] == pytest.approx(0.125, rel=1e-14)


def test_curvature_zero_speed_raises():
    flat = geo.ParametricCurve(lambda t: np.zeros((np.size(t), 2)), lambda t: np.zeros((np.size(t), 2)),
                               lambda t: np.zeros((np.size(t), 2)), {"type": "samples"})
    with pytest.raises(geo.GeometryError):
        geo.curvature(flat, 0.1)


@pytest.mark.parametrize("make", [geo.disk, lambda: geo.ellipse(2, 0.5), lambda: geo.cassini(0.95),
                                  lambda: geo.fourier_random(7), geo.star, geo.barbell])
def test_gauss_bonnet(make):
    c = make()
    pan = geo.panelize(c, 96, 16)
    assert abs(np.dot(pan.kappa, pan.weights) - 2 * math.pi) <= 1e-10


# -- panelization ---------------------------------------------------------------


def test_panelize_disk_circumference():
    pan = geo.panelize(geo.disk(), 32, 16)
    assert abs(pan.weights.sum() - 2 * math.pi) <= 1e-13
    assert pan.n_nodes == 512 and pan.n_panels == 32


def test_panelize_ellipse_arclength_vs_adaptive():
    c = geo.ellipse(2.0, 0.5)
    pan = geo.panelize(c, 64, 16)
    assert abs(pan.weights.sum() - geo.arclength(c)) <= 1e-12
    # independent oracle: complete elliptic integral of the second kind
    from scipy.special import ellipe
    assert abs(geo.arclength(c) - 4 * 2.0 * ellipe(1 - (0.5 / 2.0) ** 2)) < 1e-13


def test_panel_normals_unit_and_outward():
    for c in [geo.disk(), geo.ellipse(2, 0.5), geo.cassini(0.5)]:
        pan = geo.panelize(c, 32, 16)
        assert np.allclose(np.hypot(*pan.normals.T), 1.0, atol=1e-14)
        assert np.all(np.einsum("ij,ij->i", pan.normals, pan.x) > 0)


def test_panel_curvature_matches_formula():
    c = geo.fourier_random(7)
    pan = geo.panelize(c, 32, 8)
    assert np.allclose(pan.kappa, geo.curvature(c, pan.t), rtol=1e-14, atol=1e-14)


def test_panels_partition_parameter_range():
    pan = geo.panelize(geo.ellipse(2, 1), 12, 8, refine_at=[0.5], refine_levels=4)
    e = pan.edges
    assert e[0] == 0.0 and abs(e[-1] - 2 * math.pi) < 1e-15
    assert np.all(np.diff(e) > 0)
    assert pan.n_panels == len(e) - 1


@pytest.mark.parametrize("n, k", [(3, 16), (8, 5), (8, 12)])
def test_panelize_preconditions(n, k):
    with pytest.raises(ValueError):
        geo.panelize(geo.disk(), n, k)


def test_refinement_convergence_monotone():
    # arclength and area under panel doubling at order 4; the Cassini curve is
    # not a trigonometric polynomial, so neither quantity is exact early
    c = geo.cassini(0.9)
    L, A = geo.arclength(c), geo.area(c)
    errs_L, errs_A = [], []
    for n in (8, 16, 32, 64):
        pan = geo.panelize(c, n, 4)
        errs_L.append(abs(pan.weights.sum() - L))
        errs_A.append(abs(pan.area - A))
    for errs in (errs_L, errs_A):
        assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs_L[-1] < 1e-11


# -- integrals ----------------------------------------------------------------


def test_area_examples():
    assert abs(geo.area(geo.disk()) - math.pi) < 1e-14
    assert abs(geo.area(geo.ellipse(2, 0.5)) - math.pi) < 1e-14


def test_area_random_vs_extrapolated_shoelace(random_curve):
    def shoelace(n):
        t = np.arange(n) * (2 * math.pi / n)
        P = random_curve.position(t)
        x, y = P[:, 0], P[:, 1]
        return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)

    # polygon area converges like n^-2; one Richardson step removes that term
    a1, a2 = shoelace(10**6), shoelace(2 * 10**6)
    oracle = (4 * a2 - a1) / 3
    assert abs(geo.area(random_curve) - oracle) <= 1e-10


def test_moment_v_examples():
    assert geo.moment_v(geo.disk()) == pytest.approx(math.pi / 8, abs=1e-14)
    assert geo.moment_v(geo.disk(2.0)) == pytest.approx(2 * math.pi, abs=1e-13)
    # ellipse: int (x^2 + y^2)/4 = pi a b (a^2 + b^2) / 16, checked against tensor quadrature
    a, b = 2.0, 0.5
    r, wr = np.polynomial.legendre.leggauss(60)
    r, wr = 0.5 * (r + 1), 0.5 * wr
    th = np.arange(200) * 2 * math.pi / 200
    R, TH = np.meshgrid(r, th, indexing="ij")
    f = ((a * R * np.cos(TH)) ** 2 + (b * R * np.sin(TH)) ** 2) / 4 * a * b * R
    tensor = float(np.sum(f * wr[:, None]) * 2 * math.pi / 200)
    assert abs(geo.moment_v(geo.ellipse(a, b)) - tensor) <= 1e-12
    assert abs(tensor - math.pi * a * b * (a * a + b * b) / 16) < 1e-13


# -- point inclusion ---------------------------------------------------------


def test_contains_examples():
    d = geo.disk()
    assert geo.contains(d, np.array([[0.0, 0.0]]))[0]
    assert not geo.contains(d, np.array([[2.0, 0.0]]))[0]
    assert geo.contains(geo.cassini(0.99), np.array([[0.0, 0.0]]))[0]


def test_contains_boundary_flag():
    with pytest.raises(geo.BoundaryProximityError):
        geo.contains(geo.disk(), np.array([[1.0, 0.0]]))
    flags = geo.contains(geo.disk(), np.array([[1.0, 0.0]]), raise_on_boundary=False)
    assert flags.shape == (1,)


def _implicit(curve, P):
    d = curve.descriptor
    x, y = P[:, 0], P[:, 1]
    if d["type"] == "disk":
        return x * x + y * y < 1
    if d["type"] == "ellipse":
        return (x / d["a"]) ** 2 + (y / d["b"]) ** 2 < 1
    a, b = d["a"], d["b"]
    return ((x - a) ** 2 + y * y) * ((x + a) ** 2 + y * y) < b**4


@pytest.mark.parametrize("make", [geo.disk, lambda: geo.ellipse(2, 0.5), lambda: geo.cassini(0.9),
                                  lambda: geo.cassini(0.99)])
def test_contains_agrees_with_implicit_form(make):
    c = make()
    rng = np.random.default_rng(1)
    P = rng.uniform(-2.2, 2.2, size=(10_000, 2))
    assert np.array_equal(geo.contains(c, P, raise_on_boundary=False), _implicit(c, P))


# -- properties ---------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), M=st.integers(1, 8))
def test_fourier_random_radius_positive(seed, M):
    c = geo.fourier_random(seed, M)
    t = np.linspace(0, 2 * math.pi, 4096)
    assert c.radius(t).min() > 0


def test_polyline_export(disk_pan, tmp_path):
    path = tmp_path / "poly.csv"
    geo.export_polyline_csv(disk_pan, path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (disk_pan.n_nodes, 6)
    assert np.allclose(data[:, 5], 1.0)
