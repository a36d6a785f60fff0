import math

import numpy as np
import pytest

from neumann_green import bie
from neumann_green import geometry as geo
from neumann_green import greens as gr
from neumann_green import oracles as orc

PI = math.pi


def test_double_layer_kernel_on_unit_circle(disk_pan):
    K = bie.double_layer_matrix(disk_pan)
    # K'[i, j] = -(1/2 pi) (x - z).n / |x - z|^2 w_j = -(1/(4 pi)) w_j on the unit circle
    expect = -disk_pan.weights[None, :] / (4 * PI)
    assert np.max(np.abs(K - expect)) < 1e-13


def test_rhs_cancels_for_centered_disk_source(disk_pan):
    prob = bie.bulk_problem(disk_pan, [0.0, 0.0])
    dn = bie.normal_derivative_free_space(disk_pan, prob)
    dnv = bie.dn_v(disk_pan)
    assert np.allclose(dnv, 0.5, atol=1e-15)
    assert np.max(np.abs(-dnv / PI - dn)) < 1e-15


def test_centered_disk_density_constant(disk_pan):
    sol = bie.solve_density(bie.bulk_problem(disk_pan, [0.0, 0.0]))
    assert np.max(np.abs(sol.sigma + 3 / (16 * PI**2))) <= 1e-12
    assert np.ptp(sol.sigma) <= 1e-13
    assert abs(sol.alpha + 3 / (8 * PI)) <= 1e-12
    assert abs(sol.mu - 3 / 8) <= 1e-12


@pytest.mark.parametrize("y", [[0.25, 1 / 3], [-0.6, 0.2], [0.0, 0.95]])
def test_constraint_defect(disk_pan, y):
    sol = bie.solve_density(bie.bulk_problem(disk_pan, y))
    assert abs(sol.constraint_defect()) <= 1e-12


def test_solvability_of_unconstrained_rhs(random_pan):
    for y in ([0.1, 0.2], [1.5, -0.4]):
        if not geo.contains(random_pan.curve, np.array([y]))[0]:
            continue
        prob = bie.bulk_problem(random_pan, y)
        assert abs(bie.solvability_defect(prob)) <= 1e-12


def test_solvability_surface_source(ellipse_pan):
    prob = bie.surface_problem(ellipse_pan, 0.7)
    assert abs(bie.solvability_defect(prob)) <= 1e-12


def test_alternative_form_agrees_off_the_circle():
    # the alpha = 0 form is singular on the unit circle, where h vanishes;
    # a radius-2 disk keeps both forms well posed
    pan = geo.panelize(geo.disk(2.0), 32, 16)
    y = [0.5, 2 / 3]
    s1 = bie.solve_density(bie.bulk_problem(pan, y), form="augmented")
    s2 = bie.solve_density(bie.bulk_problem(pan, y), form="alternative")
    x = np.array([[0.3, -0.4], [1.2, 0.9], [-1.5, 0.1]])
    R1 = gr.regular_part(s1, x)
    R2 = gr.regular_part(s2, x)
    assert np.max(np.abs(R1 - R2)) <= 1e-10
    # both match the scaled disk oracle, R_r(x; y) = R_1(x/r; y/r) + log(r)/(2 pi)
    for xi, r in zip(x, R1):
        assert abs(r - (orc.disk_R_bulk(xi / 2, np.array(y) / 2)[0] + math.log(2) / (2 * PI))) <= 1e-12


def test_alternative_form_singular_on_unit_circle(disk_pan):
    with pytest.raises(bie.SolverError):
        bie.solve_density(bie.bulk_problem(disk_pan, [0.1, 0.0]), form="alternative")


def test_condition_bounded_under_refinement():
    conds = []
    for n in (16, 32, 64):
        pan = geo.panelize(geo.disk(), n, 16)
        conds.append(bie.solve_density(bie.bulk_problem(pan, [0.2, 0.1])).condition)
    assert max(conds) < 1e3
    assert conds[-1] < 2 * conds[0]


def test_exterior_disk_surface_source():
    pan = geo.panelize(geo.disk(), 32, 16)
    sol = bie.solve_density(bie.surface_problem(pan, PI / 2, bie.EXTERIOR))
    assert sol.alpha == 0.0
    t = np.linspace(0, 2 * PI, 16, endpoint=False) + 0.1
    assert np.max(np.abs(gr.regular_part(sol, t=t))) <= 1e-11


def test_exterior_far_field_constant():
    pan = geo.panelize(geo.disk(), 32, 16)
    sol = bie.solve_density(bie.surface_problem(pan, 0.0, bie.EXTERIOR))
    # R = log|x|/(2 pi) exactly; the single layer has total charge 1
    for r in (1e2, 1e4):
        x = np.array([[r, 0.0], [0.0, -r]])
        assert np.max(np.abs(gr.regular_part(sol, x) - math.log(r) / (2 * PI))) <= 1e-10


def test_exterior_ellipse_surface_value():
    pan = geo.panelize(geo.ellipse(2.0, 0.5), 96, 16)
    sol = bie.solve_density(bie.surface_problem(pan, PI / 2, bie.EXTERIOR))
    R = gr.regular_part(sol, t=[PI / 2])[0]
    assert abs(R - math.log(3.2) / (2 * PI)) <= 1e-10


def test_exterior_rejects_interior_source(disk_pan):
    with pytest.raises(ValueError):
        bie.bulk_problem(disk_pan, [0.2, 0.0], side=bie.EXTERIOR)


def test_problem_argument_validation(disk_pan):
    with pytest.raises(ValueError):
        bie.GreensProblem(disk_pan, "inside", bie.BULK, np.zeros(2))
    with pytest.raises(ValueError):
        bie.GreensProblem(disk_pan, bie.INTERIOR, bie.SURFACE, np.zeros(2))
    with pytest.raises(ValueError):
        bie.interior_matrix(disk_pan, form="other")


def test_near_boundary_source_refines(disk_pan):
    prob = bie.bulk_problem(disk_pan, [0.0, 0.995])
    assert prob.panelization is not disk_pan
    assert prob.panelization.n_panels > disk_pan.n_panels
    sol = bie.solve_density(prob)
    y = np.array([0.0, 0.995])
    R = gr.regular_part(sol, y[None, :])[0]
    assert abs(R - orc.disk_R_self(y)[0]) <= 1e-10 * abs(orc.disk_R_self(y)[0])


def test_dump_and_load_round_trip(tmp_path, disk_pan):
    prob = bie.bulk_problem(disk_pan, [0.25, 1 / 3])
    path = tmp_path / "sys.bin"
    bie.dump_system(prob, path)
    A, f, sigma = bie.load_system(path)
    assert A.shape == (disk_pan.n_nodes, disk_pan.n_nodes)
    assert np.allclose(A @ sigma, f, atol=1e-12)
    assert np.allclose(sigma, bie.solve_density(prob).sigma, atol=1e-13)
