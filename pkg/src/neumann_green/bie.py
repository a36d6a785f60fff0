"""Second-kind boundary integral equations for the four Neumann Green's functions.

Interior (``y`` in the domain or on its boundary)::

    Delta G = 1/|Omega| - delta_y,   d_n G = 0,   int_Omega G = 0

Exterior::

    Delta G = -delta_y,   d_n G = 0,   G + log|x|/(2 pi) -> 0

The correction ``w = G - G0`` is written as a single-layer potential
``S[sigma](x) = -(1/2 pi) int log|x - z| sigma(z) dS(z)``; in the interior an
extra ``|x|^2/(4|Omega|) + alpha`` carries the compensating source and the
zero-mean constant.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import geometry as geo
from . import quadrature as quad

INTERIOR = "interior"
EXTERIOR = "exterior"
BULK = "bulk"
SURFACE = "surface"

CONDITION_LIMIT = 1e12


class SolverError(RuntimeError):
    """The discrete system could not be solved reliably."""


def strength(kind):
    """Free-space strength: ``1/(2 pi)`` for bulk sources, ``1/pi`` on the boundary."""
    return 1.0 / (2.0 * math.pi) if kind == BULK else 1.0 / math.pi


def free_space(x, y, kind):
    """``G0(x; y) = -s log|x - y|``."""
    x = np.atleast_2d(x)
    d = x - np.asarray(y, dtype=float)
    return -strength(kind) * np.log(np.hypot(d[:, 0], d[:, 1]))


# ---------------------------------------------------------------------------
# problem description


@dataclass(eq=False)
class GreensProblem:
    """A Green's function to solve for.

    ``y`` is the source point; for surface sources ``t_y`` is its curve
    parameter and ``y`` is derived from it. ``panelization`` is the
    discretization actually used (it may be a locally refined copy of
    ``base``).
    """

    base: geo.Panelization
    side: str
    kind: str
    y: np.ndarray
    t_y: float | None = None
    panelization: geo.Panelization = field(init=False)

    def __post_init__(self):
        if self.side not in (INTERIOR, EXTERIOR):
            raise ValueError(f"side must be interior or exterior, got {self.side!r}")
        if self.kind not in (BULK, SURFACE):
            raise ValueError(f"source kind must be bulk or surface, got {self.kind!r}")
        self.y = np.asarray(self.y, dtype=float)
        if self.kind == SURFACE:
            if self.t_y is None:
                raise ValueError("surface sources need the curve parameter t_y")
            self.t_y = float(self.base.wrap(self.t_y))
            self.y = self.base.curve.position(np.array([self.t_y]))[0]
            self.panelization = self.base
        else:
            inside = bool(geo.contains(self.base.curve, self.y[None, :])[0])
            if inside != (self.side == INTERIOR):
                raise ValueError(f"bulk source {self.y.tolist()} is not in the {self.side} domain")
            self.panelization = panelization_for_source(self.base, self.y)

    @property
    def strength(self):
        return strength(self.kind)

    @property
    def curve(self):
        return self.base.curve


def surface_problem(pan, t_y, side=INTERIOR):
    return GreensProblem(pan, side, SURFACE, np.zeros(2), t_y=t_y)


def bulk_problem(pan, y, side=INTERIOR):
    return GreensProblem(pan, side, BULK, np.asarray(y, dtype=float))


_REFINED: "dict[tuple, geo.Panelization]" = {}


SOURCE_SPACINGS = 10.0


def panelization_for_source(pan, y, factor=None):
    """``pan`` itself, or a copy refined so that ``y`` is far from every panel.

    Panels closer to ``y`` than ``factor`` times their own length are bisected
    until none remain; this keeps both the right-hand side and the density
    resolved when the source approaches the boundary. The default factor
    asks for ten mean node spacings, ``10 / order`` panel lengths.
    """
    if factor is None:
        factor = SOURCE_SPACINGS / pan.order
    d = quad.panel_distances(pan, np.asarray(y, dtype=float)[None, :])[0]
    if np.all(d >= factor * pan.panel_length):
        return pan
    edges = geo.refine_edges_near(pan.curve, pan.edges, y, factor=factor)
    key = (id(pan), edges.tobytes())
    hit = _REFINED.get(key)
    if hit is not None and hit[0] is pan:
        return hit[1]
    refined = geo.Panelization(pan.curve, edges, pan.order)
    if len(_REFINED) > 32:
        _REFINED.clear()
    _REFINED[key] = (pan, refined)
    return refined


# ---------------------------------------------------------------------------
# operators


def double_layer_matrix(pan):
    """``K'[i, j] w_j`` with ``K' = -(1/2 pi) (x - z).n(x) / |x - z|^2``.

    Same-panel pairs use the cancellation-free chord forms; the diagonal is
    the limit ``-(1/2 pi) kappa / 2``.
    """
    x, n = pan.x, pan.normals
    dx = x[:, None, 0] - x[None, :, 0]
    dy = x[:, None, 1] - x[None, :, 1]
    r2 = dx * dx + dy * dy
    num = dx * n[:, None, 0] + dy * n[:, None, 1]
    np.fill_diagonal(r2, 1.0)
    K = num / r2
    k = pan.order
    curve = pan.curve
    ii, jj = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    off = ii != jj
    for p in range(pan.n_panels):
        sl = pan.panel_slice(p)
        t = pan.t[sl]
        ti, tj = t[ii[off]], t[jj[off]]
        ch = geo.chord(curve, tj, ti)
        gap = geo.normal_chord_gap(curve, tj, ti)
        blk = K[sl, sl]
        blk[off] = gap / (ch[:, 0] ** 2 + ch[:, 1] ** 2)
        K[sl, sl] = blk
    np.fill_diagonal(K, 0.5 * pan.kappa)
    return (-1.0 / (2.0 * math.pi)) * K * pan.weights[None, :]


def normal_derivative_free_space(pan, problem):
    """``d_n G0(x_j; y)`` at every node of ``pan``."""
    s = problem.strength
    if problem.kind == BULK:
        d = pan.x - problem.y
        return -s * np.einsum("ij,ij->i", d, pan.normals) / (d[:, 0] ** 2 + d[:, 1] ** 2)
    ty = problem.t_y
    tj = pan.t
    shift = ty + geo.TWO_PI * np.round((tj - ty) / geo.TWO_PI)
    ch = geo.chord(pan.curve, shift, tj)
    gap = geo.normal_chord_gap(pan.curve, shift, tj)
    r2 = ch[:, 0] ** 2 + ch[:, 1] ** 2
    tiny = r2 < 1e-28
    out = np.where(tiny, 0.0, gap / np.where(tiny, 1.0, r2))
    out[tiny] = 0.5 * pan.kappa[tiny]
    return -s * out


def dn_v(pan):
    """``d_n v`` for ``v = |x|^2 / 4``."""
    return 0.5 * np.einsum("ij,ij->i", pan.x, pan.normals)


# ---------------------------------------------------------------------------
# cached per-panelization data


@dataclass
class _PanelData:
    area: float
    moment: float
    dnv: np.ndarray
    h: np.ndarray
    v_dnv: float
    K: np.ndarray
    lu: dict = field(default_factory=dict)
    cond: dict = field(default_factory=dict)


_DATA: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def panel_data(pan):
    hit = _DATA.get(pan)
    if hit is not None:
        return hit
    area = pan.area
    moment = float(np.sum((pan.x[:, 0] ** 3 * pan.normals[:, 0] + pan.x[:, 1] ** 3 * pan.normals[:, 1])
                          * pan.weights) / 12.0)
    dnv = dn_v(pan)
    table = quad.build_corrections(pan)
    h = table.apply(dnv)
    v = 0.25 * (pan.x[:, 0] ** 2 + pan.x[:, 1] ** 2)
    data = _PanelData(area, moment, dnv, h, float(np.sum(v * dnv * pan.weights)),
                      double_layer_matrix(pan))
    _DATA[pan] = data
    return data


def interior_matrix(pan, form="augmented"):
    """Interior system matrix.

    ``augmented``: ``1/2 I + K' + 1 w^T - (1/(2 pi |Omega|)) 1 (h w)^T``.
    ``alternative``: ``1/2 I + K' - (1/(2 pi)) 1 (h w)^T`` (the ``alpha = 0``
    variant; singular whenever ``h`` vanishes, e.g. on the unit circle).
    """
    d = panel_data(pan)
    n = pan.n_nodes
    A = d.K.copy()
    A[np.diag_indices(n)] += 0.5
    hw = d.h * pan.weights
    if form == "augmented":
        A += pan.weights[None, :] - hw[None, :] / (2.0 * math.pi * d.area)
    elif form == "alternative":
        A -= hw[None, :] / (2.0 * math.pi)
    else:
        raise ValueError(f"unknown interior form {form!r}")
    return A


def exterior_matrix(pan):
    """``-1/2 I + K'``; injective for the exterior Neumann problem in the plane."""
    A = panel_data(pan).K.copy()
    A[np.diag_indices(pan.n_nodes)] -= 0.5
    return A


def _factor(pan, key, builder):
    d = panel_data(pan)
    if key not in d.lu:
        A = builder()
        lu, piv = sla.lu_factor(A, check_finite=False)
        anorm = np.linalg.norm(A, 1)
        rcond, info = sla.lapack.dgecon(lu, anorm, norm="1")
        d.lu[key] = (A, lu, piv)
        d.cond[key] = math.inf if rcond == 0 else 1.0 / rcond
    return d.lu[key], d.cond[key]


# ---------------------------------------------------------------------------
# assembly and solve


def mu(problem):
    """Constant ``mu(y)`` of the zero-mean condition (interior only).

    ``mu = M_v/|Omega| - |y|^2/4 + int d_n v (v/|Omega| + G0(x; y)) dS``.
    """
    pan = problem.panelization
    d = panel_data(pan)
    y = problem.y
    if problem.kind == BULK:
        g0 = free_space(pan.x, y, BULK)
        src = float(np.dot(d.dnv * g0, pan.weights))
    else:
        src = -problem.strength * float(quad.single_layer_on_curve(pan, d.dnv, [problem.t_y])[0])
    return d.moment / d.area - 0.25 * float(y @ y) + d.v_dnv / d.area + src


def rhs_unconstrained(problem):
    """``-d_n v/|Omega| - d_n G0`` (interior) or ``-d_n G0`` (exterior)."""
    pan = problem.panelization
    dg = normal_derivative_free_space(pan, problem)
    if problem.side == EXTERIOR:
        return -dg
    return -panel_data(pan).dnv / panel_data(pan).area - dg


def assemble_interior_system(problem, form="augmented"):
    """Dense matrix and right-hand side of the interior equation."""
    if problem.side != INTERIOR:
        raise ValueError("interior assembly needs an interior problem")
    pan = problem.panelization
    m = mu(problem)
    f0 = rhs_unconstrained(problem)
    if form == "augmented":
        f = f0 - m / panel_data(pan).area
    else:
        f = f0 - m
    return interior_matrix(pan, form), f


def assemble_exterior_system(problem):
    if problem.side != EXTERIOR:
        raise ValueError("exterior assembly needs an exterior problem")
    return exterior_matrix(problem.panelization), rhs_unconstrained(problem)


@dataclass(eq=False)
class DensitySolution:
    """Solved density and constants for one source.

    ``alpha`` is the additive constant of the regular part (0 for exterior
    problems and for the alternative interior form).
    """

    problem: GreensProblem
    sigma: np.ndarray
    alpha: float
    mu: float
    residual: float
    condition: float
    form: str = "augmented"

    @property
    def panelization(self):
        return self.problem.panelization

    @property
    def area(self):
        return panel_data(self.panelization).area

    def constraint_defect(self):
        return float(np.dot(self.sigma, self.panelization.weights) - self.alpha)


def solve_density(problem, form="augmented", check=True):
    """Solve for ``sigma`` (reusing a cached LU factorization of the panelization)."""
    pan = problem.panelization
    if problem.side == INTERIOR:
        key = ("int", form)
        builder = lambda: interior_matrix(pan, form)  # noqa: E731
        m = mu(problem)
        f0 = rhs_unconstrained(problem)
        f = f0 - (m / panel_data(pan).area if form == "augmented" else m)
    else:
        key = ("ext",)
        builder = lambda: exterior_matrix(pan)  # noqa: E731
        m = float("nan")
        f = rhs_unconstrained(problem)
    (A, lu, piv), cond = _factor(pan, key, builder)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SolverError(
            f"system matrix is numerically singular (condition ~ {cond:.3g}); "
            + ("the rank-one nullspace regularization failed for this geometry"
               if problem.side == INTERIOR else "the exterior operator lost injectivity"))
    sigma = sla.lu_solve((lu, piv), f, check_finite=False)
    res = float(np.linalg.norm(A @ sigma - f))
    fn = float(np.linalg.norm(f))
    if check and res > 1e-12 * max(fn, 1.0) * max(1.0, math.sqrt(pan.n_nodes) / 8):
        # one step of iterative refinement before giving up
        sigma = sigma + sla.lu_solve((lu, piv), f - A @ sigma, check_finite=False)
        res = float(np.linalg.norm(A @ sigma - f))
    if problem.side == INTERIOR and form == "augmented":
        d = panel_data(pan)
        alpha = float(np.dot(d.h * sigma, pan.weights)) / (2.0 * math.pi * d.area) - m / d.area
    else:
        alpha = 0.0
    return DensitySolution(problem, sigma, alpha, m, res, cond, form)


def solvability_defect(problem):
    """``int (RHS of the unconstrained interior equation) dS``; zero in exact arithmetic."""
    return float(np.dot(rhs_unconstrained(problem), problem.panelization.weights))


def dump_system(problem, path, form="augmented"):
    """Write ``(N, A, f, sigma)`` as little-endian float64 after an int64 header."""
    if problem.side == INTERIOR:
        A, f = assemble_interior_system(problem, form)
    else:
        A, f = assemble_exterior_system(problem)
    sigma = np.linalg.solve(A, f)
    with open(path, "wb") as fh:
        np.array([A.shape[0]], dtype="<i8").tofile(fh)
        A.astype("<f8").tofile(fh)
        f.astype("<f8").tofile(fh)
        sigma.astype("<f8").tofile(fh)


def load_system(path):
    with open(path, "rb") as fh:
        n = int(np.fromfile(fh, dtype="<i8", count=1)[0])
        A = np.fromfile(fh, dtype="<f8", count=n * n).reshape(n, n)
        f = np.fromfile(fh, dtype="<f8", count=n)
        sigma = np.fromfile(fh, dtype="<f8", count=n)
    return A, f, sigma
