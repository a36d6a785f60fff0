"""Evaluation of Green's functions, regular parts and their derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bie
from . import geometry as geo
from . import quadrature as quad

INV2PI = 1.0 / (2.0 * math.pi)

VARIANTS = {
    "interior-bulk": (bie.INTERIOR, bie.BULK),
    "interior-surface": (bie.INTERIOR, bie.SURFACE),
    "exterior-surface": (bie.EXTERIOR, bie.SURFACE),
    "exterior-bulk": (bie.EXTERIOR, bie.BULK),
}


class EvaluationError(ValueError):
    """Target on the wrong side of the boundary or otherwise unusable."""


@dataclass
class GreensEvaluation:
    x: np.ndarray
    y: np.ndarray
    R: float
    G: float | None
    grad: np.ndarray | None = None
    hess: np.ndarray | None = None


def _check_side(sol, pts):
    curve = sol.problem.curve
    try:
        inside = geo.contains(curve, pts)
    except geo.BoundaryProximityError as exc:
        raise EvaluationError(
            "target lies on the boundary; pass a curve parameter instead") from exc
    want = sol.problem.side == bie.INTERIOR
    if np.any(inside != want):
        raise EvaluationError(f"target outside the {sol.problem.side} domain")


def _interior_terms(sol, pts):
    if sol.problem.side != bie.INTERIOR:
        return 0.0
    q = 0.25 * (pts[:, 0] ** 2 + pts[:, 1] ** 2) / sol.area
    return sol.alpha + q


def regular_part(sol, x=None, t=None, check=True):
    """``R(x; y)`` at off-curve points ``x`` or on-curve parameters ``t``.

    Interior: ``alpha + |x|^2/(4|Omega|) - (1/2 pi) int log|x - z| sigma``.
    Exterior: the single layer alone.
    """
    pan = sol.panelization
    if t is not None:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pts = pan.curve.position(t)
        S = quad.single_layer_on_curve(pan, sol.sigma, t)
    else:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if check:
            _check_side(sol, pts)
        S = quad.layer_potential(pan, sol.sigma, pts, kinds=("log",))["log"][:, 0]
    out = _interior_terms(sol, pts) - INV2PI * S
    return out


def gradient(sol, x, check=True):
    """``grad_x R(x; y)`` at off-curve targets (shape ``(n, 2)``)."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if check:
        _check_side(sol, pts)
    g = -INV2PI * quad.layer_potential(sol.panelization, sol.sigma, pts, kinds=("grad",))["grad"]
    if sol.problem.side == bie.INTERIOR:
        g = g + pts / (2.0 * sol.area)
    return g


def hessian(sol, x, check=True):
    """``grad_x^2 R(x; y)`` as an ``(n, 2, 2)`` array."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if check:
        _check_side(sol, pts)
    h = -INV2PI * quad.layer_potential(sol.panelization, sol.sigma, pts, kinds=("hess",))["hess"]
    if sol.problem.side == bie.INTERIOR:
        h[:, 0] += 0.5 / sol.area
        h[:, 2] += 0.5 / sol.area
    out = np.empty((len(pts), 2, 2))
    out[:, 0, 0] = h[:, 0]
    out[:, 0, 1] = out[:, 1, 0] = h[:, 1]
    out[:, 1, 1] = h[:, 2]
    return out


def derivatives(sol, x, check=True, with_hessian=True):
    """``(R, grad R, hess R)`` at off-curve targets from a single near-field pass.

    With ``with_hessian=False`` the third entry is ``None``.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if check:
        _check_side(sol, pts)
    kinds = ("log", "grad", "hess") if with_hessian else ("log", "grad")
    lp = quad.layer_potential(sol.panelization, sol.sigma, pts, kinds=kinds)
    R = _interior_terms(sol, pts) - INV2PI * lp["log"][:, 0]
    g = -INV2PI * lp["grad"]
    if sol.problem.side == bie.INTERIOR:
        g = g + pts / (2.0 * sol.area)
    if not with_hessian:
        return R, g, None
    h = -INV2PI * lp["hess"]
    if sol.problem.side == bie.INTERIOR:
        h[:, 0] += 0.5 / sol.area
        h[:, 2] += 0.5 / sol.area
    H = np.empty((len(pts), 2, 2))
    H[:, 0, 0] = h[:, 0]
    H[:, 0, 1] = H[:, 1, 0] = h[:, 1]
    H[:, 1, 1] = h[:, 2]
    return R, g, H


def greens_value(sol, x=None, t=None, check=True):
    """``G(x; y) = G0(x; y) + R(x; y)`` for targets distinct from the source."""
    pan = sol.panelization
    pts = pan.curve.position(np.atleast_1d(t)) if t is not None else np.atleast_2d(x)
    d = pts - sol.problem.y
    if np.any(np.hypot(d[:, 0], d[:, 1]) < 1e-14):
        raise EvaluationError("G is singular at the source; use regular_part for the limit")
    return bie.free_space(pts, sol.problem.y, sol.problem.kind) + regular_part(sol, x, t, check)


def evaluate(sol, x):
    """Full :class:`GreensEvaluation` at one off-curve point."""
    R, g, H = derivatives(sol, x)
    xx = np.asarray(x, dtype=float)
    d = xx - sol.problem.y
    G = None if math.hypot(*d) < 1e-14 else float(R[0] + bie.free_space(xx, sol.problem.y,
                                                                         sol.problem.kind)[0])
    return GreensEvaluation(xx, sol.problem.y, float(R[0]), G, g[0], H[0])


# ---------------------------------------------------------------------------
# convenience constructors


def solve(pan, variant, source, form="augmented"):
    """Solve for one source; ``source`` is a point (bulk) or a curve parameter (surface)."""
    side, kind = VARIANTS[variant]
    if kind == bie.SURFACE:
        prob = bie.surface_problem(pan, float(source), side)
    else:
        prob = bie.bulk_problem(pan, source, side)
    return bie.solve_density(prob, form=form)


@dataclass
class GreensMatrix:
    """Interaction matrix with ``R`` on the diagonal and ``G`` off it."""

    matrix: np.ndarray
    variant: str
    points: np.ndarray
    params: np.ndarray | None
    solutions: list

    @property
    def n(self):
        return self.matrix.shape[0]

    def symmetry_defect(self):
        return float(np.max(np.abs(self.matrix - self.matrix.T)))


def build_greens_matrix(pan, points, variant):
    """``N x N`` Green's matrix for ``points`` (curve parameters for surface variants).

    Each source is a fresh right-hand side against the cached factorization.
    """
    side, kind = VARIANTS[variant]
    if kind == bie.SURFACE:
        params = np.mod(np.atleast_1d(np.asarray(points, dtype=float)), geo.TWO_PI)
        pts = pan.curve.position(params)
    else:
        params = None
        pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    d = pts[:, None, :] - pts[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    np.fill_diagonal(dist, np.inf)
    if n > 1 and dist.min() < 1e-12:
        raise EvaluationError("coincident points in Green's matrix")
    M = np.empty((n, n))
    sols = []
    for j in range(n):
        sol = solve(pan, variant, params[j] if params is not None else pts[j])
        sols.append(sol)
        if params is not None:
            R = regular_part(sol, t=params)
        else:
            R = regular_part(sol, x=pts, check=False)
        G0 = np.zeros(n)
        mask = np.arange(n) != j
        G0[mask] = bie.free_space(pts[mask], pts[j], kind)
        M[:, j] = R + G0
    return GreensMatrix(M, variant, pts, params, sols)


# ---------------------------------------------------------------------------
# domain integrals and exports


def polar_grid(curve, n_radial=200, n_angle=200):
    """Quadrature nodes and weights on a star-shaped domain via its radial function."""
    if curve.radius is None:
        raise ValueError("polar grid needs a star-shaped curve with a radial function")
    cx, cy = curve.star_center
    s, ws = np.polynomial.legendre.leggauss(n_radial)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    th = np.arange(n_angle) * (geo.TWO_PI / n_angle)
    wth = geo.TWO_PI / n_angle
    r_b = curve.radius(th)
    # points r = s r_b(th); dA = r dr dth = s r_b^2 ds dth
    S, TH = np.meshgrid(s, th, indexing="ij")
    rr = S * r_b[None, :]
    pts = np.column_stack([(cx + rr * np.cos(TH)).ravel(), (cy + rr * np.sin(TH)).ravel()])
    w = (ws[:, None] * wth * S * r_b[None, :] ** 2).ravel()
    return pts, w


def free_space_domain_integral(pan, y, kind=bie.BULK):
    """``int_Omega G0(x; y) dx`` via ``int log|x-y| dx = int (x-y).n (2 log|x-y| - 1)/4 dS``."""
    d = pan.x - np.asarray(y, dtype=float)
    r = np.hypot(d[:, 0], d[:, 1])
    integrand = np.einsum("ij,ij->i", d, pan.normals) * (2.0 * np.log(r) - 1.0) / 4.0
    return -bie.strength(kind) * float(np.dot(integrand, pan.weights))


def mean_value(sol, n_radial=200, n_angle=200):
    """``int_Omega G(x; y) dx`` for an interior bulk solution (should vanish)."""
    pts, w = polar_grid(sol.problem.curve, n_radial, n_angle)
    R = regular_part(sol, x=pts, check=False)
    fine = geo.panelize(sol.problem.curve, max(64, sol.panelization.n_panels), 16)
    return float(np.dot(R, w)) + free_space_domain_integral(fine, sol.problem.y, sol.problem.kind)


def flux_defect(sol):
    """``int d_n G dS`` over the boundary for interior solutions (zero in exact arithmetic)."""
    pan = sol.panelization
    d = bie.panel_data(pan)
    # interior limit of d_n S[sigma] is (1/2 I + K') sigma
    dS = 0.5 * sol.sigma + d.K @ sol.sigma
    dn = bie.normal_derivative_free_space(pan, sol.problem) + d.dnv / d.area + dS
    return float(np.dot(dn, pan.weights))


def export_grid_csv(sol, pts, path_or_file):
    pts = np.atleast_2d(pts)
    R, g, H = derivatives(sol, pts)
    d = pts - sol.problem.y
    with np.errstate(divide="ignore"):
        G = R + bie.free_space(pts, sol.problem.y, sol.problem.kind)
    G[np.hypot(d[:, 0], d[:, 1]) < 1e-14] = np.nan
    rows = np.column_stack([pts, R, G, g, H[:, 0, 0], H[:, 0, 1], H[:, 1, 1]])
    lines = ["x1,x2,R,G,Rx1,Rx2,Rx1x1,Rx1x2,Rx2x2"]
    lines += [",".join(f"{v:.17g}" for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)
