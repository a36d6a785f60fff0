"""Narrow-capture quantities built on Green's matrices.

Covers the discrete energy ``p = sum_ij G_ij``, global mean first passage
times, the principal eigenvalue expansion, multistart trap-placement
optimization and the orientation of a small elliptical trap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize

from . import bie
from . import geometry as geo
from . import greens as gr

INV2PI = 1.0 / (2.0 * math.pi)
PENALTY = 1e6


class OptimizationError(RuntimeError):
    """No multistart run produced a usable minimum."""


@dataclass
class TrapConfiguration:
    """Trap centers (or boundary parameters for windows) and their gauges."""

    centers: np.ndarray
    nu: np.ndarray
    d: np.ndarray | None = None
    eps: float | None = None
    D: float = 1.0
    params: np.ndarray | None = None

    @classmethod
    def from_eps(cls, centers, eps, d=1.0, D=1.0, params=None):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        d = np.broadcast_to(np.asarray(d, dtype=float), (len(centers),)).copy()
        if np.any(eps * d >= 1.0):
            raise ValueError("gauge needs eps * d < 1")
        return cls(centers, -1.0 / np.log(eps * d), d, eps, D, params)

    @classmethod
    def identical(cls, centers, nu, D=1.0, params=None):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        return cls(centers, np.full(len(centers), float(nu)), None, None, D, params)

    @property
    def N(self):
        return len(self.centers)


# ---------------------------------------------------------------------------
# energy


def _grad_free_space(pts, j):
    d = pts - pts[j]
    r2 = d[:, 0] ** 2 + d[:, 1] ** 2
    r2[j] = 1.0
    g0 = -INV2PI * d / r2[:, None]
    g0[j] = 0.0
    return g0


def discrete_energy(gm, with_gradient=False):
    """``p = sum_ij G_ij`` and, for interior-bulk matrices, ``dp/dx_i``.

    The gradient uses reciprocity,
    ``dp/dx_i = 2 [grad_x R(x; x_i) + sum_{j != i} grad_x G(x; x_j)]`` at
    ``x = x_i``, so no derivative with respect to a source is needed.
    """
    p = float(np.sum(gm.matrix))
    if not with_gradient:
        return p
    if gm.variant != "interior-bulk":
        raise ValueError("analytic energy gradient is available for interior-bulk matrices")
    pts = gm.points
    grad = np.zeros_like(pts)
    for j, sol in enumerate(gm.solutions):
        _, g, _ = gr.derivatives(sol, pts, check=False, with_hessian=False)
        grad += 2.0 * (g + _grad_free_space(pts, j))
    return p, grad


def energy(pan, centers, with_gradient=True):
    """Discrete energy (and gradient) for interior-bulk traps at ``centers``.

    Same result as ``discrete_energy(build_greens_matrix(...))`` but each
    source's layer potential is evaluated once for values and gradients.
    """
    if not with_gradient:
        return float(np.sum(gr.build_greens_matrix(pan, centers, "interior-bulk").matrix))
    pts = np.atleast_2d(np.asarray(centers, dtype=float))
    n = len(pts)
    d = pts[:, None, :] - pts[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    np.fill_diagonal(dist, np.inf)
    if n > 1 and dist.min() < 1e-12:
        raise gr.EvaluationError("coincident trap centers")
    with np.errstate(divide="ignore"):
        G0 = -INV2PI * np.log(dist)
    np.fill_diagonal(G0, 0.0)
    p = float(np.sum(G0))
    grad = np.zeros_like(pts)
    for j in range(n):
        sol = gr.solve(pan, "interior-bulk", pts[j])
        R, g, _ = gr.derivatives(sol, pts, check=False, with_hessian=False)
        p += float(np.sum(R))
        grad += 2.0 * (g + _grad_free_space(pts, j))
    return p, grad


def window_energy(pan, params):
    """Discrete energy of boundary windows at curve parameters ``params``."""
    gm = gr.build_greens_matrix(pan, params, "interior-surface")
    return float(np.sum(gm.matrix))


# ---------------------------------------------------------------------------
# MFPT and eigenvalue


def gmfpt_linear(gm, config):
    """Solve ``[I + 2 pi G V] A = tau0 e``, ``sum nu_j A_j = |Omega|/(2 pi D)`` jointly.

    Returns ``(A, tau0)``.
    """
    G = gm.matrix
    N = G.shape[0]
    nu = np.asarray(config.nu, dtype=float)
    area = gm.solutions[0].area
    M = np.zeros((N + 1, N + 1))
    M[:N, :N] = np.eye(N) + 2.0 * math.pi * G * nu[None, :]
    M[:N, N] = -1.0
    M[N, :N] = nu
    rhs = np.zeros(N + 1)
    rhs[N] = area / (2.0 * math.pi * config.D)
    try:
        sol = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise bie.SolverError("GMFPT system is singular") from exc
    if np.linalg.cond(M) > 1e14:
        raise bie.SolverError("GMFPT system is numerically singular")
    return sol[:N], float(sol[N])


def gmfpt_explicit(gm, config):
    """``tau~0`` from the asymptotic inverse of the linear system.

    General gauges: ``|Omega|/(2 pi D nubar N) [1 + 2 pi nu^T G nu / (N nubar)]``.
    """
    G = gm.matrix
    N = G.shape[0]
    nu = np.asarray(config.nu, dtype=float)
    area = gm.solutions[0].area
    nubar = float(np.mean(nu))
    return area / (2.0 * math.pi * config.D * nubar * N) * (1.0 + 2.0 * math.pi / (N * nubar) * (nu @ G @ nu))


def gmfpt_identical(p, N, nu, area, D=1.0):
    """Identical-trap form ``|Omega|/(2 pi D nu N) [1 + 2 pi nu p / N]``."""
    return area / (2.0 * math.pi * D * nu * N) * (1.0 + 2.0 * math.pi * nu * p / N)


def mfpt_field(gm, config, x, A=None, tau0=None):
    """``T0(x) = -2 pi sum_j A_j nu_j G(x; x_j) + tau0`` at interior points."""
    if A is None:
        A, tau0 = gmfpt_linear(gm, config)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.full(len(pts), tau0)
    for j, sol in enumerate(gm.solutions):
        out -= 2.0 * math.pi * A[j] * config.nu[j] * gr.greens_value(sol, pts)
    return out


def eigenvalue_asymptotic(gm, config):
    """``lambda0 ~ 2 pi N nu/|Omega| - 4 pi^2 nu^2 p/|Omega|`` for identical traps."""
    nu = np.asarray(config.nu, dtype=float)
    if not np.allclose(nu, nu[0]):
        raise ValueError("eigenvalue expansion needs identical traps")
    nu = float(nu[0])
    N = gm.n
    area = gm.solutions[0].area
    p = float(np.sum(gm.matrix))
    return 2.0 * math.pi * N * nu / area - 4.0 * math.pi**2 * nu**2 * p / area


# ---------------------------------------------------------------------------
# optimization


@dataclass
class OptimizeOptions:
    starts: int = 40
    seed: int = 0
    gtol: float = 1e-8
    maxiter: int = 400
    fd_step: float = 1e-5
    dedup_tol: float = 1e-4
    boundary_margin: float = 0.02
    nu: float = 0.1
    D: float = 1.0


@dataclass
class LocalMinimum:
    centers: np.ndarray
    p: float
    iterations: int
    converged: bool
    params: np.ndarray | None = None
    tau0: float | None = None
    count: int = 1


@dataclass
class OptimizationResult:
    best: LocalMinimum
    minima: list
    mode: str
    N: int
    options: OptimizeOptions
    evaluations: int = 0
    failures: list = field(default_factory=list)


def _symmetry_maps(curve):
    if curve.symmetry == "d2":
        return [np.array([[1, 0], [0, 1]]), np.array([[-1, 0], [0, 1]]),
                np.array([[1, 0], [0, -1]]), np.array([[-1, 0], [0, -1]])]
    return [np.eye(2)]


def configuration_distance(A, B, curve=None):
    """Largest matched displacement between two point sets, up to permutation and symmetry.

    Disks are compared through rotation invariants (sorted radii and sorted
    pairwise distances).
    """
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if curve is not None and curve.symmetry == "circle":
        c = np.asarray(curve.star_center)

        def inv(P):
            r = np.sort(np.hypot(*(P - c).T))
            d = P[:, None, :] - P[None, :, :]
            pd = np.sort(np.hypot(d[..., 0], d[..., 1])[np.triu_indices(len(P), 1)])
            return np.concatenate([r, pd])

        return float(np.max(np.abs(inv(A) - inv(B)))) if len(A) == len(B) else math.inf
    maps = _symmetry_maps(curve) if curve is not None else [np.eye(2)]
    best = math.inf
    for M in maps:
        BM = B @ M.T
        cost = np.hypot(A[:, None, 0] - BM[None, :, 0], A[:, None, 1] - BM[None, :, 1])
        r, c = linear_sum_assignment(cost)
        best = min(best, float(cost[r, c].max()))
    return best


def random_interior_points(curve, n, rng, margin=0.0):
    """Uniform samples of the domain (rejection in the bounding box)."""
    t = np.linspace(0, geo.TWO_PI, 512, endpoint=False)
    P = curve.position(t)
    lo, hi = P.min(axis=0), P.max(axis=0)
    out = []
    while len(out) < n:
        cand = lo + (hi - lo) * rng.random((4 * n, 2))
        ok = geo.contains(curve, cand, raise_on_boundary=False)
        if margin > 0:
            tc, dc = geo.closest_point(curve, cand)
            ok &= dc > margin
        out.extend(cand[ok].tolist())
    return np.array(out[:n])


def _penalized_energy(pan, flat, N, counter):
    x = flat.reshape(N, 2)
    inside = geo.contains(pan.curve, x, raise_on_boundary=False)
    tc, dc = geo.closest_point(pan.curve, x)
    counter[0] += 1
    # very close to the boundary counts as outside: the objective blows up there anyway
    bad = ~inside | (dc < 1e-6)
    if np.any(bad):
        foot = pan.curve.position(tc)
        g = np.zeros_like(x)
        g[bad] = 2.0 * (x[bad] - foot[bad])
        return PENALTY + float(np.sum(dc[bad] ** 2)), g.ravel()
    d = x[:, None, :] - x[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    np.fill_diagonal(r, np.inf)
    if r.min() < 1e-9:
        return PENALTY, np.zeros_like(flat)
    p, g = energy(pan, x, with_gradient=True)
    return p, g.ravel()


def _window_objective(pan, t, counter, h):
    counter[0] += 1
    p = window_energy(pan, t)
    g = np.empty_like(t)
    for i in range(len(t)):
        tp = t.copy()
        tm = t.copy()
        tp[i] += h
        tm[i] -= h
        g[i] = (window_energy(pan, tp) - window_energy(pan, tm)) / (2.0 * h)
    counter[0] += 2 * len(t)
    return p, g


def optimize_traps(pan, N, mode="interior", options=None):
    """Multistart quasi-Newton minimization of the discrete energy.

    ``mode="interior"`` optimizes ``2N`` coordinates of interior traps with
    the analytic gradient; trial points outside the domain score
    ``1e6 + dist^2``. ``mode="windows"`` optimizes ``N`` boundary parameters
    of the interior-surface energy with central differences.
    """
    opts = options or OptimizeOptions()
    if N < 1:
        raise ValueError("need at least one trap")
    rng = np.random.default_rng(opts.seed)
    curve = pan.curve
    counter = [0]
    found: list = []
    failures = []
    area = pan.area
    for s in range(opts.starts):
        try:
            if mode == "interior":
                x0 = random_interior_points(curve, N, rng, margin=opts.boundary_margin).ravel()
                res = minimize(lambda z: _penalized_energy(pan, z, N, counter), x0, jac=True,
                               method="BFGS", options={"gtol": opts.gtol, "maxiter": opts.maxiter})
                if res.fun >= PENALTY:
                    failures.append((s, "left the domain"))
                    continue
                centers = res.x.reshape(N, 2)
                params = None
            elif mode == "windows":
                t0 = np.sort(rng.uniform(0.0, geo.TWO_PI, N))
                res = minimize(lambda z: _window_objective(pan, z, counter, opts.fd_step), t0, jac=True,
                               method="BFGS", options={"gtol": max(opts.gtol, 1e-7), "maxiter": opts.maxiter})
                params = np.mod(res.x, geo.TWO_PI)
                centers = curve.position(params)
            else:
                raise ValueError(f"unknown mode {mode!r}")
        except (bie.SolverError, gr.EvaluationError, geo.BoundaryProximityError) as exc:
            failures.append((s, str(exc)))
            continue
        converged = bool(res.success) or float(np.max(np.abs(res.jac))) < 1e-5
        tau0 = gmfpt_identical(float(res.fun), N, opts.nu, area, opts.D)
        cand = LocalMinimum(centers, float(res.fun), int(res.nit), converged, params, tau0)
        for m in found:
            if abs(m.p - cand.p) < 1e-6 and configuration_distance(m.centers, cand.centers, curve) < opts.dedup_tol * 10:
                m.count += 1
                if cand.p < m.p:
                    m.centers, m.p, m.params, m.tau0 = cand.centers, cand.p, cand.params, cand.tau0
                break
        else:
            found.append(cand)
    if not found:
        raise OptimizationError(f"no start converged ({len(failures)} failures): {failures[:3]}")
    found.sort(key=lambda m: m.p)
    return OptimizationResult(found[0], found, mode, N, opts, counter[0], failures)


def is_collinear(points, tol=1e-3):
    """True if the points lie on one line to within ``tol`` (relative to their spread)."""
    P = np.atleast_2d(points) - np.mean(points, axis=0)
    s = np.linalg.svd(P, compute_uv=False)
    return bool(s[-1] <= tol * max(s[0], 1e-300))


# ---------------------------------------------------------------------------
# trap orientation


@dataclass
class OrientationResult:
    p: np.ndarray
    phi_star: float | None
    isotropic: bool
    bracket: float
    tau0: float
    tau: float
    nu: float
    R: float
    grad: np.ndarray
    hess: np.ndarray


def orientation_vector(grad, hess):
    """``p = [R11 - R22 - 2 pi (R1^2 - R2^2), 2 R12 - 4 pi R1 R2]``."""
    R1, R2 = grad
    return np.array([hess[0, 0] - hess[1, 1] - 2.0 * math.pi * (R1 * R1 - R2 * R2),
                     2.0 * hess[0, 1] - 4.0 * math.pi * R1 * R2])


def orientation(sol, a, b, eps, D=1.0, phi=None, iso_tol=1e-12):
    """Optimal axis angle of a small elliptical trap centered at the source of ``sol``.

    The two-term GMFPT is
    ``tau = tau0/D + eps^2/D [pi a b tau0/|Omega| + (a^2+b^2)/4
    - pi |Omega| (a+b)^2 |grad R|^2 / 2 + |Omega| (a^2-b^2)/4 p.(cos 2phi, sin 2phi)]``
    with ``tau0 = |Omega|/(2 pi) [1/nu + 2 pi R]`` and ``nu = -1/log(eps (a+b)/2)``.
    ``phi`` defaults to the minimizer ``phi*``.
    """
    if not a >= b > 0:
        raise ValueError("trap semi-axes need a >= b > 0")
    x1 = sol.problem.y
    R, g, H = gr.derivatives(sol, x1[None, :], check=False)
    R, g, H = float(R[0]), g[0], H[0]
    p = orientation_vector(g, H)
    pn = float(np.hypot(*p))
    iso = pn < iso_tol or a == b
    phi_star = None
    if not iso:
        phi_star = float(np.mod(0.5 * math.atan2(-p[1], -p[0]), math.pi))
        if math.pi - phi_star < 1e-12:
            phi_star = 0.0
    ang = phi if phi is not None else (phi_star if phi_star is not None else 0.0)
    area = sol.area
    nu = -1.0 / math.log(eps * (a + b) / 2.0)
    tau0 = area / (2.0 * math.pi) * (1.0 / nu + 2.0 * math.pi * R)
    bracket = (math.pi * a * b * tau0 / area + (a * a + b * b) / 4.0
               - math.pi * area * (a + b) ** 2 / 2.0 * float(g @ g)
               + area * (a * a - b * b) / 4.0 * float(p @ [math.cos(2 * ang), math.sin(2 * ang)]))
    tau = tau0 / D + eps * eps / D * bracket
    return OrientationResult(p, phi_star, iso, bracket, tau0, tau, nu, R, g, H)


def orientation_at(pan, x, a, b, eps, D=1.0):
    sol = gr.solve(pan, "interior-bulk", x)
    return orientation(sol, a, b, eps, D)
