"""Splitting probabilities for receptors on the boundary of an exterior domain.

A particle released outside the curve is absorbed by one of ``N`` small
receptors on the boundary. To leading order the probability of hitting
receptor ``k`` first is

    phi_k(x) = -pi sum_j A_jk nu_j G_s(x; x_j) + phibar_k,

with ``G_s`` the exterior surface Green's function and the coefficients fixed
by a bordered ``(N+1) x (N+1)`` system per receptor.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import bie
from . import geometry as geo
from . import greens as gr


@dataclass
class SplittingSolution:
    A: np.ndarray          # (N, N); column k holds A_{jk}
    phi_bar: np.ndarray    # (N,)
    params: np.ndarray     # receptor curve parameters
    points: np.ndarray     # receptor positions
    nu: np.ndarray
    gm: gr.GreensMatrix

    @property
    def N(self):
        return len(self.nu)

    def solvability_defect(self):
        return float(np.max(np.abs(self.nu @ self.A)))

    def conservation_defect(self):
        return abs(float(np.sum(self.phi_bar)) - 1.0)


def _gauges(nu, N):
    nu = np.broadcast_to(np.asarray(nu, dtype=float), (N,)).copy()
    if np.any(nu <= 0):
        raise ValueError("gauges must be positive")
    return nu


def solve_splitting(pan, receptor_params, nu):
    """Solve ``[[I + pi G_s V, -e], [nu^T, 0]] [A_k; phibar_k] = -[e_k; 0]`` for every ``k``."""
    params = np.mod(np.atleast_1d(np.asarray(receptor_params, dtype=float)), geo.TWO_PI)
    N = len(params)
    nu = _gauges(nu, N)
    gm = gr.build_greens_matrix(pan, params, "exterior-surface")
    M = np.zeros((N + 1, N + 1))
    M[:N, :N] = np.eye(N) + math.pi * gm.matrix * nu[None, :]
    M[:N, N] = -1.0
    M[N, :N] = nu
    rhs = np.zeros((N + 1, N))
    rhs[:N, :N] = -np.eye(N)
    if np.linalg.cond(M) > 1e14:
        raise bie.SolverError("splitting system is singular")
    X = np.linalg.solve(M, rhs)
    return SplittingSolution(X[:N], X[N].copy(), params, gm.points, nu, gm)


def splitting_field(sol, x):
    """``(phi_1(x), ..., phi_N(x))`` at exterior points; shape ``(n, N)``."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    G = np.empty((len(pts), sol.N))
    for j, s in enumerate(sol.gm.solutions):
        G[:, j] = gr.greens_value(s, pts)
    return -math.pi * G @ (sol.nu[:, None] * sol.A) + sol.phi_bar[None, :]


# ---------------------------------------------------------------------------
# Cassini study


def cassini_receptors(curve):
    """Parameters of the rightmost and leftmost points, ``(+-sqrt(a^2+b^2), 0)``."""
    return np.array([0.0, math.pi])


def default_cassini_panels(k):
    # the neck narrows like sqrt(1 - k^4); resolve it with extra panels
    return int(32 + 8 * math.ceil(-math.log2(max(1.0 - k, 1e-3))))


def cassini_xi(k, area=math.pi, eps=1e-4, R_source=5.0, n_panels=None, order=16, d=1.0):
    """Differential splitting ``Xi = phi_1 - phi_2`` for a source at ``(R_source, 0)``.

    Receptor 1 sits at the right end of the curve; the gauge uses a
    logarithmic capacitance ``d`` (unity by default).
    """
    if not 0.0 < eps * d < math.exp(-1.0):
        raise ValueError("need 0 < eps d < 1/e")
    curve = geo.cassini(k, area)
    right = curve.position(np.array([0.0]))[0]
    if R_source <= float(np.max(np.hypot(*curve.position(np.linspace(0, geo.TWO_PI, 721)).T))):
        raise ValueError("source must lie outside the curve")
    pan = geo.panelize(curve, n_panels or default_cassini_panels(k), order)
    nu = -1.0 / math.log(eps * d)
    sol = solve_splitting(pan, cassini_receptors(curve), nu)
    phi = splitting_field(sol, [[R_source, 0.0]])[0]
    return {"k": k, "eps": eps, "R": R_source, "xi": float(phi[0] - phi[1]),
            "phi_bar_1": float(sol.phi_bar[0]), "phi_bar_2": float(sol.phi_bar[1]),
            "n_nodes": pan.n_nodes, "receptor_x": float(right[0]), "solution": sol}


def default_k_grid(n=25):
    """``n`` values in ``[0.1, 0.99]`` clustered toward ``k = 1``."""
    return 1.0 - np.logspace(math.log10(0.9), math.log10(0.01), n)


CSV_COLUMNS = ("k", "eps", "R", "xi", "phi_bar_1", "phi_bar_2", "n_nodes")


def sweep(ks, eps_values, R_values, area=math.pi, n_panels=None, order=16):
    rows = []
    for k in ks:
        for eps in eps_values:
            for R in R_values:
                r = cassini_xi(float(k), area, float(eps), float(R), n_panels, order)
                rows.append({c: r[c] for c in CSV_COLUMNS})
    return rows


def rows_to_csv(rows):
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        buf.write(",".join(str(r[c]) if c == "n_nodes" else f"{r[c]:.17g}" for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()
