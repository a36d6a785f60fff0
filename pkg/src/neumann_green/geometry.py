"""Smooth closed planar curves, their panelization, and geometric queries.

Curves are parametrized counterclockwise over ``t in [0, 2*pi)``. Every curve
carries exact first and second derivatives so that normals, curvature and
arclength weights never come from differencing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ellipe

TWO_PI = 2.0 * np.pi


class GeometryError(ValueError):
    """Invalid curve parameters or a curve that violates its invariants."""


class BoundaryProximityError(ValueError):
    """A query point lies (numerically) on the boundary curve."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


CurveMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ParametricCurve:
    """Closed curve ``t -> gamma(t)`` with exact derivatives.

    ``position``, ``velocity`` and ``acceleration`` accept an array of
    parameters and return an ``(n, 2)`` array. ``radius`` is set for curves
    that are star-shaped about ``star_center`` and gives the polar radius as a
    function of the polar angle (used by mapped area quadrature).
    """

    position: CurveMap
    velocity: CurveMap
    acceleration: CurveMap
    descriptor: dict
    radius: Callable[[np.ndarray], np.ndarray] | None = None
    star_center: tuple = (0.0, 0.0)
    symmetry: str = "none"  # "circle", "d2" or "none"

    def __call__(self, t):
        return self.position(np.asarray(t, dtype=float))

    def speed(self, t):
        v = self.velocity(np.atleast_1d(np.asarray(t, dtype=float)))
        return np.hypot(v[:, 0], v[:, 1])

    def normal(self, t):
        v = self.velocity(np.atleast_1d(np.asarray(t, dtype=float)))
        s = np.hypot(v[:, 0], v[:, 1])
        return np.column_stack([v[:, 1] / s, -v[:, 0] / s])

    def curvature(self, t):
        return curvature(self, t)

    @property
    def kind(self):
        return self.descriptor["type"]


def _as_t(t):
    return np.atleast_1d(np.asarray(t, dtype=float))


# ---------------------------------------------------------------------------
# builders


def disk(r=1.0, center=(0.0, 0.0)):
    """Circle of radius ``r``."""
    if r <= 0:
        raise GeometryError(f"disk radius must be positive, got {r}")
    cx, cy = map(float, center)

    def pos(t):
        t = _as_t(t)
        return np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)])

    def vel(t):
        t = _as_t(t)
        return np.column_stack([-r * np.sin(t), r * np.cos(t)])

    def acc(t):
        t = _as_t(t)
        return np.column_stack([-r * np.cos(t), -r * np.sin(t)])

    return ParametricCurve(pos, vel, acc, {"type": "disk", "r": float(r), "center": [cx, cy]},
                           radius=lambda th: np.full_like(np.asarray(th, dtype=float), r),
                           star_center=(cx, cy), symmetry="circle")


def ellipse(a, b):
    """Axis-aligned ellipse ``(a cos t, b sin t)``."""
    if a <= 0 or b <= 0:
        raise GeometryError(f"ellipse semi-axes must be positive, got a={a}, b={b}")
    a = float(a)
    b = float(b)

    def pos(t):
        t = _as_t(t)
        return np.column_stack([a * np.cos(t), b * np.sin(t)])

    def vel(t):
        t = _as_t(t)
        return np.column_stack([-a * np.sin(t), b * np.cos(t)])

    def acc(t):
        t = _as_t(t)
        return np.column_stack([-a * np.cos(t), -b * np.sin(t)])

    def rad(th):
        th = np.asarray(th, dtype=float)
        return a * b / np.sqrt((b * np.cos(th)) ** 2 + (a * np.sin(th)) ** 2)

    return ParametricCurve(pos, vel, acc, {"type": "ellipse", "a": a, "b": b},
                           radius=rad, symmetry="circle" if a == b else "d2")


def polar_curve(r, dr, d2r, descriptor, symmetry="none"):
    """Curve ``r(t) (cos t, sin t)`` from a radial function and its derivatives."""

    def pos(t):
        t = _as_t(t)
        rr = r(t)
        return np.column_stack([rr * np.cos(t), rr * np.sin(t)])

    def vel(t):
        t = _as_t(t)
        rr, r1 = r(t), dr(t)
        c, s = np.cos(t), np.sin(t)
        return np.column_stack([r1 * c - rr * s, r1 * s + rr * c])

    def acc(t):
        t = _as_t(t)
        rr, r1, r2 = r(t), dr(t), d2r(t)
        c, s = np.cos(t), np.sin(t)
        return np.column_stack([(r2 - rr) * c - 2 * r1 * s, (r2 - rr) * s + 2 * r1 * c])

    return ParametricCurve(pos, vel, acc, descriptor, radius=r, symmetry=symmetry)


def _cassini_radial(a, b):
    a2, a4, b4 = a * a, a**4, b**4

    def parts(t):
        t = _as_t(t)
        s2, c2 = np.sin(2 * t), np.cos(2 * t)
        s4, c4 = np.sin(4 * t), np.cos(4 * t)
        root = np.sqrt(b4 - a4 * s2 * s2)
        root1 = -a4 * s4 / root
        root2 = -4 * a4 * c4 / root + a4 * s4 * root1 / root**2
        q = a2 * c2 + root
        q1 = -2 * a2 * s2 + root1
        q2 = -4 * a2 * c2 + root2
        return q, q1, q2

    def r(t):
        return np.sqrt(parts(t)[0])

    def dr(t):
        q, q1, _ = parts(t)
        return q1 / (2 * np.sqrt(q))

    def d2r(t):
        q, q1, q2 = parts(t)
        rr = np.sqrt(q)
        return q2 / (2 * rr) - q1**2 / (4 * rr**3)

    return r, dr, d2r


def cassini_unit_area(k, n=4096):
    """Area of the Cassini oval with ``b = 1`` and ``a = k``.

    Computed from the polar form by the periodic trapezoid rule, which is
    spectrally accurate for the analytic integrand.
    """
    t = np.arange(n) * (TWO_PI / n)
    root = np.sqrt(1.0 - k**4 * np.sin(2 * t) ** 2)
    return 0.5 * np.sum(root) * (TWO_PI / n)


def cassini(k, area=np.pi):
    """Cassini oval ``((x-a)^2+y^2)((x+a)^2+y^2) = b^4`` with ``a = k b``.

    ``b`` is chosen so that the enclosed area equals ``area``; the area scales
    as ``b^2`` at fixed ``k`` so a single numerical area evaluation fixes it.
    """
    if not 0 < k < 1:
        raise GeometryError(f"cassini requires 0 < k < 1 (k >= 1 pinches the neck), got {k}")
    if area <= 0:
        raise GeometryError(f"cassini area must be positive, got {area}")
    b = math.sqrt(area / cassini_unit_area(k))
    a = k * b
    r, dr, d2r = _cassini_radial(a, b)
    desc = {"type": "cassini", "k": float(k), "area": float(area), "a": a, "b": b}
    return polar_curve(r, dr, d2r, desc, symmetry="d2")


def cassini_area_closed_form(k, b):
    """Area ``2 b^2 E(k^4)`` of the Cassini oval (``E`` with parameter ``m``)."""
    return 2.0 * b * b * ellipe(k**4)


def fourier_random(seed, M=4, coefficients=None):
    """Random star-shaped domain ``r(t) = a0 + sum a_k cos kt + b_k sin kt``.

    ``a_k, b_k`` are standard normal draws from ``numpy.random.default_rng(seed)``
    (all ``a_k`` first, then all ``b_k``) unless given explicitly, and
    ``a0 = 1.1 * sum(|a_k| + |b_k|)`` which keeps ``r > 0``.
    """
    if M < 1:
        raise GeometryError(f"fourier domain needs M >= 1, got {M}")
    if coefficients is None:
        rng = np.random.default_rng(seed)
        ak = rng.standard_normal(M)
        bk = rng.standard_normal(M)
    else:
        ak, bk = (np.asarray(c, dtype=float) for c in coefficients)
        if ak.shape != (M,) or bk.shape != (M,):
            raise GeometryError("fourier coefficients must both have length M")
    a0 = 1.1 * float(np.sum(np.abs(ak) + np.abs(bk)))
    kk = np.arange(1, M + 1)

    def r(t):
        t = _as_t(t)
        ph = np.outer(t, kk)
        return a0 + np.cos(ph) @ ak + np.sin(ph) @ bk

    def dr(t):
        t = _as_t(t)
        ph = np.outer(t, kk)
        return -np.sin(ph) @ (kk * ak) + np.cos(ph) @ (kk * bk)

    def d2r(t):
        t = _as_t(t)
        ph = np.outer(t, kk)
        return -(np.cos(ph) @ (kk**2 * ak) + np.sin(ph) @ (kk**2 * bk))

    desc = {"type": "fourier", "seed": seed, "M": int(M), "a0": a0,
            "a": ak.tolist(), "b": bk.tolist()}
    curve = polar_curve(r, dr, d2r, desc)
    check_simple(curve)
    return curve


def star(amplitude=0.3, arms=5):
    """Star domain ``r(t) = 1 + amplitude * cos(arms * t)``."""
    if not 0 <= amplitude < 1:
        raise GeometryError("star amplitude must lie in [0, 1)")

    def r(t):
        return 1.0 + amplitude * np.cos(arms * _as_t(t))

    def dr(t):
        return -amplitude * arms * np.sin(arms * _as_t(t))

    def d2r(t):
        return -amplitude * arms**2 * np.cos(arms * _as_t(t))

    return polar_curve(r, dr, d2r, {"type": "star", "amplitude": amplitude, "arms": arms})


class _FourierSeries:
    """Complex trigonometric polynomial ``z(t) = sum c_n exp(i n t)``."""

    def __init__(self, coeffs, modes):
        self.c = np.asarray(coeffs, dtype=complex)
        self.n = np.asarray(modes, dtype=float)

    def _eval(self, t, order):
        t = _as_t(t)
        z = np.exp(1j * np.outer(t, self.n)) @ (self.c * (1j * self.n) ** order)
        return np.column_stack([z.real, z.imag])

    def pos(self, t):
        return self._eval(t, 0)

    def vel(self, t):
        return self._eval(t, 1)

    def acc(self, t):
        return self._eval(t, 2)


def fourier_curve(z_samples, descriptor, smoothing=0.0, tol=1e-17):
    """Trigonometric interpolant of equispaced complex samples.

    ``smoothing`` is the standard deviation (in the parameter) of a Gaussian
    mollifier applied in Fourier space; modes whose damped magnitude falls
    below ``tol`` relative to the largest are dropped.
    """
    z = np.asarray(z_samples, dtype=complex)
    n = z.size
    c = np.fft.fft(z) / n
    modes = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        # split the Nyquist mode symmetrically
        ny = n // 2
        c = np.append(c, c[ny] / 2)
        c[ny] /= 2
        modes = np.append(modes, ny)
        modes[ny] = -ny
    if smoothing > 0:
        c = c * np.exp(-0.5 * (modes * smoothing) ** 2)
    keep = np.abs(c) > tol * np.abs(c).max()
    fs = _FourierSeries(c[keep], modes[keep])
    return ParametricCurve(fs.pos, fs.vel, fs.acc, descriptor)


def from_samples(points, smoothing=0.0):
    """Curve through user-supplied equispaced samples (counterclockwise)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 8:
        raise GeometryError("samples must be an (n, 2) array with n >= 8")
    curve = fourier_curve(pts[:, 0] + 1j * pts[:, 1],
                          {"type": "samples", "n": len(pts), "smoothing": smoothing},
                          smoothing=smoothing)
    check_simple(curve)
    return curve


def _polygon_arclength_samples(vertices, n):
    v = np.asarray(vertices, dtype=float)
    edges = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = np.arange(n) * (cum[-1] / n)
    idx = np.searchsorted(cum, s, side="right") - 1
    frac = (s - cum[idx]) / lengths[idx]
    pts = v[idx] + frac[:, None] * edges[idx]
    return pts, cum[-1]


def barbell(neck_width=0.4, neck_length=0.6, side=1.0, rounding=0.06, n_samples=8192):
    """Two squares joined by a rectangular neck, smoothed to an analytic curve.

    The polygon is sampled uniformly in arclength and convolved with a
    Gaussian of width ``rounding`` (in arclength units); the result is a
    trigonometric polynomial, hence analytic.
    """
    h, L, w = side / 2, neck_length / 2, neck_width / 2
    x0 = L + side
    verts = [(L, -w), (L, -h), (x0, -h), (x0, h), (L, h), (L, w),
             (-L, w), (-L, h), (-x0, h), (-x0, -h), (-L, -h), (-L, -w)]
    pts, perim = _polygon_arclength_samples(verts, n_samples)
    sigma_t = rounding * TWO_PI / perim
    desc = {"type": "barbell", "neck_width": neck_width, "neck_length": neck_length,
            "side": side, "rounding": rounding}
    curve = fourier_curve(pts[:, 0] + 1j * pts[:, 1], desc, smoothing=sigma_t)
    object.__setattr__(curve, "symmetry", "d2")
    return curve


BUILDERS = {
    "disk": disk,
    "ellipse": ellipse,
    "cassini": cassini,
    "fourier": fourier_random,
    "star": star,
    "barbell": barbell,
}


def build_curve(descriptor):
    """Build a curve from a descriptor dict such as ``{"type": "ellipse", "a": 2, "b": 0.5}``."""
    desc = dict(descriptor)
    kind = desc.pop("type", None)
    if kind == "samples":
        return from_samples(desc["points"], desc.get("smoothing", 0.0))
    if kind not in BUILDERS:
        raise GeometryError(f"unknown curve type {kind!r}")
    # descriptors echo derived quantities; drop what the builder does not accept
    derived = {"cassini": ("a", "b"), "fourier": ("a0", "a", "b")}
    if kind == "fourier" and "a" in desc and "b" in desc and "coefficients" not in desc:
        desc["coefficients"] = (desc["a"], desc["b"])
    for key in derived.get(kind, ()):
        desc.pop(key, None)
    try:
        return BUILDERS[kind](**desc)
    except TypeError as exc:
        raise GeometryError(f"bad parameters for {kind}: {exc}") from None


# ---------------------------------------------------------------------------
# pointwise geometry


def curvature(curve, t):
    """Signed curvature ``(x' y'' - y' x'') / |gamma'|^3``."""
    t = _as_t(t)
    v = curve.velocity(t)
    a = curve.acceleration(t)
    sp = np.hypot(v[:, 0], v[:, 1])
    if np.any(sp <= 1e-14):
        raise GeometryError("curvature undefined at a zero-speed point")
    return (v[:, 0] * a[:, 1] - v[:, 1] * a[:, 0]) / sp**3


_GL12 = leggauss(12)


def chord(curve, s, t):
    """``gamma(t) - gamma(s)`` without cancellation for nearby parameters."""
    s = _as_t(s)
    t = _as_t(t)
    s, t = np.broadcast_arrays(s, t)
    out = curve.position(t) - curve.position(s)
    close = np.abs(t - s) < 0.05
    if np.any(close):
        ss, tt = s[close], t[close]
        x, w = _GL12
        mid = 0.5 * (ss + tt)
        half = 0.5 * (tt - ss)
        u = mid[:, None] + half[:, None] * x[None, :]
        vel = curve.velocity(u.ravel()).reshape(u.shape + (2,))
        out[close] = np.einsum("ij,j,ijk->ik", half[:, None] * np.ones_like(u), w, vel)
    return out


def normal_chord_gap(curve, s, t):
    """``(gamma(t) - gamma(s)) . n(t)`` accurate to relative precision as ``t -> s``.

    Uses ``gamma(t)-gamma(s) = (t-s) gamma'(t) - int_s^t (u-s) gamma''(u) du``;
    the first term is orthogonal to ``n(t)``.
    """
    s = _as_t(s)
    t = _as_t(t)
    s, t = np.broadcast_arrays(s, t)
    n = curve.normal(t)
    d = chord(curve, s, t)
    out = np.einsum("ij,ij->i", d, n)
    close = np.abs(t - s) < 0.05
    if np.any(close):
        ss, tt = s[close], t[close]
        x, w = _GL12
        half = 0.5 * (tt - ss)
        u = 0.5 * (ss + tt)[:, None] + half[:, None] * x[None, :]
        acc = curve.acceleration(u.ravel()).reshape(u.shape + (2,))
        proj = np.einsum("ijk,ik->ij", acc, n[close])
        out[close] = -half * np.einsum("ij,j->i", (u - ss[:, None]) * proj, w)
    return out


# ---------------------------------------------------------------------------
# panelization


@dataclass(eq=False)
class Panelization:
    """Boundary discretized into panels carrying a Gauss-Legendre rule each.

    Flat arrays run over all nodes panel by panel; ``panel_of[j]`` gives the
    panel holding node ``j``.
    """

    curve: ParametricCurve
    edges: np.ndarray  # (n_panels + 1,) parameter breakpoints, edges[-1] = edges[0] + 2 pi
    order: int
    t: np.ndarray = field(init=False)
    x: np.ndarray = field(init=False)
    normals: np.ndarray = field(init=False)
    speed: np.ndarray = field(init=False)
    kappa: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)
    panel_of: np.ndarray = field(init=False)
    panel_length: np.ndarray = field(init=False)

    def __post_init__(self):
        k = self.order
        u, w = leggauss(k)
        self.ref_nodes, self.ref_weights = u, w
        a, b = self.edges[:-1], self.edges[1:]
        half = 0.5 * (b - a)
        t = (0.5 * (a + b))[:, None] + half[:, None] * u[None, :]
        self.t = t.ravel()
        self.x = self.curve.position(self.t)
        v = self.curve.velocity(self.t)
        self.speed = np.hypot(v[:, 0], v[:, 1])
        if np.any(self.speed <= 0):
            raise GeometryError("curve has zero speed at a quadrature node")
        self.normals = np.column_stack([v[:, 1], -v[:, 0]]) / self.speed[:, None]
        self.kappa = curvature(self.curve, self.t)
        self.weights = (half[:, None] * w[None, :]).ravel() * self.speed
        self.panel_of = np.repeat(np.arange(len(a)), k)
        self.panel_length = self.weights.reshape(-1, k).sum(axis=1)
        self.half = half

    @property
    def n_panels(self):
        return len(self.edges) - 1

    @property
    def n_nodes(self):
        return len(self.t)

    def panel_slice(self, p):
        return slice(p * self.order, (p + 1) * self.order)

    def locate(self, t):
        """Panel index holding parameter ``t`` (wrapped into the panel range)."""
        t0 = self.edges[0]
        tw = t0 + np.mod(np.asarray(t, dtype=float) - t0, TWO_PI)
        return np.clip(np.searchsorted(self.edges, tw, side="right") - 1, 0, self.n_panels - 1)

    def wrap(self, t):
        t0 = self.edges[0]
        return t0 + np.mod(np.asarray(t, dtype=float) - t0, TWO_PI)

    @property
    def arclength(self):
        return float(self.weights.sum())

    @property
    def area(self):
        return float(0.5 * np.sum(np.einsum("ij,ij->i", self.x, self.normals) * self.weights))


ALLOWED_ORDERS = (4, 8, 16, 32)


def panelize(curve, n_panels, order=16, refine_at=None, refine_levels=0, start=0.0,
             strict=True):
    """Split ``[start, start + 2 pi)`` into ``n_panels`` equal parameter panels.

    ``refine_at`` (a parameter value or list of them) triggers dyadic grading:
    the panel containing each marked parameter, and its two neighbours, are
    bisected toward the mark ``refine_levels`` times.
    """
    if n_panels < 4:
        raise GeometryError("panelize needs at least 4 panels")
    if strict and order not in ALLOWED_ORDERS:
        raise GeometryError(f"order must be one of {ALLOWED_ORDERS}, got {order}")
    edges = start + np.linspace(0.0, TWO_PI, n_panels + 1)
    if refine_at is not None and refine_levels > 0:
        for tm in np.atleast_1d(refine_at):
            edges = grade_edges(edges, float(tm), refine_levels)
    return Panelization(curve, edges, order)


def grade_edges(edges, t_mark, levels):
    """Dyadically bisect the panels around ``t_mark`` ``levels`` times."""
    edges = np.asarray(edges, dtype=float)
    t0 = edges[0]
    tm = t0 + np.mod(t_mark - t0, TWO_PI)
    for _ in range(levels):
        p = int(np.clip(np.searchsorted(edges, tm, side="right") - 1, 0, len(edges) - 2))
        new = []
        for q in (p - 1, p, p + 1):
            qq = q % (len(edges) - 1)
            new.append(0.5 * (edges[qq] + edges[qq + 1]))
        edges = np.unique(np.concatenate([edges, new]))
    return edges


def refine_edges_near(curve, edges, point, factor=2.0, max_levels=30):
    """Bisect panels until each is shorter than ``dist(point, panel) / factor``."""
    edges = np.asarray(edges, dtype=float)
    p = np.asarray(point, dtype=float)
    x_gl, w_gl = leggauss(8)
    for _ in range(max_levels):
        a, b = edges[:-1], edges[1:]
        tt = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * x_gl[None, :]
        pts = curve.position(tt.ravel()).reshape(tt.shape + (2,))
        sp = curve.speed(tt.ravel()).reshape(tt.shape)
        length = 0.5 * (b - a) * (sp @ w_gl)
        ends = curve.position(edges)
        d_nodes = np.hypot(pts[..., 0] - p[0], pts[..., 1] - p[1]).min(axis=1)
        d_ends = np.hypot(ends[:, 0] - p[0], ends[:, 1] - p[1])
        dist = np.minimum(d_nodes, np.minimum(d_ends[:-1], d_ends[1:]))
        bad = dist < factor * length
        if not bad.any():
            return edges
        edges = np.unique(np.concatenate([edges, 0.5 * (a + b)[bad]]))
    return edges


# ---------------------------------------------------------------------------
# integrals over the boundary


def _boundary_integral(curve, integrand, tol=1e-15, n0=32, k=16, max_panels=1 << 15):
    """Adaptive (panel doubling) quadrature of ``integrand(x, v)`` dt."""
    prev = None
    n = n0
    u, w = leggauss(k)
    while n <= max_panels:
        edges = np.linspace(0.0, TWO_PI, n + 1)
        a, b = edges[:-1], edges[1:]
        t = (0.5 * (a + b))[:, None] + 0.5 * (b - a)[:, None] * u[None, :]
        t = t.ravel()
        val = float(np.sum(integrand(curve.position(t), curve.velocity(t)) * np.tile(w, n)) * np.pi / n)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    return prev


def arclength(curve):
    return _boundary_integral(curve, lambda x, v: np.hypot(v[:, 0], v[:, 1]))


def area(curve):
    """Enclosed area ``(1/2) int x . n dS``."""
    return _boundary_integral(curve, lambda x, v: 0.5 * (x[:, 0] * v[:, 1] - x[:, 1] * v[:, 0]))


def moment_v(curve):
    """``int_Omega (x1^2 + x2^2)/4 dx`` as ``(1/12) int n . (x1^3, x2^3) dS``."""
    return _boundary_integral(
        curve, lambda x, v: (x[:, 0] ** 3 * v[:, 1] - x[:, 1] ** 3 * v[:, 0]) / 12.0)


# ---------------------------------------------------------------------------
# point queries


def dense_polyline(curve, max_turn=0.1, n0=256, max_points=1 << 18):
    """Parameters of a polyline whose consecutive turning angles stay below ``max_turn``."""
    t = np.linspace(0.0, TWO_PI, n0, endpoint=False)
    while True:
        p = curve.position(t)
        d = np.roll(p, -1, axis=0) - p
        ang = np.arctan2(d[:, 1], d[:, 0])
        turn = np.abs(np.angle(np.exp(1j * (np.roll(ang, -1) - ang))))
        bad = turn >= max_turn
        if not bad.any() or len(t) >= max_points:
            return t
        # split the segments on both sides of each sharp vertex
        seg = np.unique(np.concatenate([np.nonzero(bad)[0], (np.nonzero(bad)[0] + 1) % len(t)]))
        t_next = np.append(t[1:], TWO_PI)
        t = np.sort(np.concatenate([t, 0.5 * (t[seg] + t_next[seg])]))


def closest_point(curve, points, t_guess=None, iters=30):
    """Closest parameter and distance on ``curve`` for each point.

    A polyline search seeds a safeguarded Newton iteration on
    ``(gamma(t) - x) . gamma'(t) = 0``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if t_guess is None:
        tp = _polyline_cache(curve)
        poly = curve.position(tp)
        t = np.empty(len(pts))
        for i0 in range(0, len(pts), 512):
            blk = pts[i0:i0 + 512]
            d2 = (blk[:, None, 0] - poly[None, :, 0]) ** 2 + (blk[:, None, 1] - poly[None, :, 1]) ** 2
            t[i0:i0 + 512] = tp[np.argmin(d2, axis=1)]
    else:
        t = np.array(t_guess, dtype=float, copy=True)
    for _ in range(iters):
        g = curve.position(t)
        v = curve.velocity(t)
        a = curve.acceleration(t)
        r = g - pts
        f1 = np.einsum("ij,ij->i", r, v)
        f2 = np.einsum("ij,ij->i", v, v) + np.einsum("ij,ij->i", r, a)
        step = np.where(f2 > 0, f1 / np.where(f2 > 0, f2, 1.0), 0.0)
        step = np.clip(step, -0.05, 0.05)
        t = t - step
        if np.all(np.abs(step) < 1e-15):
            break
    t = np.mod(t, TWO_PI)
    d = np.hypot(*(curve.position(t) - pts).T)
    return t, d


_POLY_CACHE: dict = {}


def _polyline_cache(curve):
    key = id(curve)
    hit = _POLY_CACHE.get(key)
    if hit is not None and hit[0] is curve:
        return hit[1]
    tp = dense_polyline(curve, max_turn=0.02, n0=1024)
    _POLY_CACHE[key] = (curve, tp)
    return tp


def contains(curve, points, boundary_tol=1e-13, raise_on_boundary=True):
    """Winding-number inclusion test.

    Points within ``boundary_tol`` of the curve raise ``BoundaryProximityError``
    (or return ``False`` when ``raise_on_boundary`` is off). Points closer to
    the curve than the polyline's chord error are classified by the side of
    the outward normal at the closest point.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tp = _polyline_cache(curve)
    poly = curve.position(tp)
    inside = np.empty(len(pts), dtype=bool)
    for i0 in range(0, len(pts), 256):
        blk = pts[i0:i0 + 256]
        dx = poly[None, :, 0] - blk[:, None, 0]
        dy = poly[None, :, 1] - blk[:, None, 1]
        ang = np.arctan2(dy, dx)
        dang = np.diff(np.concatenate([ang, ang[:, :1]], axis=1), axis=1)
        dang = (dang + np.pi) % TWO_PI - np.pi
        inside[i0:i0 + 256] = np.abs(dang.sum(axis=1)) > np.pi
    # chord error bound for the polyline
    seg = np.roll(poly, -1, axis=0) - poly
    sag = 0.25 * np.max(np.hypot(seg[:, 0], seg[:, 1])) * 0.02 + 1e-12
    dmin = np.empty(len(pts))
    for i0 in range(0, len(pts), 512):
        blk = pts[i0:i0 + 512]
        d2 = (blk[:, None, 0] - poly[None, :, 0]) ** 2 + (blk[:, None, 1] - poly[None, :, 1]) ** 2
        dmin[i0:i0 + 512] = np.sqrt(d2.min(axis=1))
    near = dmin < 4 * sag + 10 * boundary_tol
    if near.any():
        tc, dc = closest_point(curve, pts[near])
        n = curve.normal(tc)
        side = np.einsum("ij,ij->i", pts[near] - curve.position(tc), n)
        on = dc <= boundary_tol
        if on.any() and raise_on_boundary:
            raise BoundaryProximityError(
                f"{int(on.sum())} point(s) within {boundary_tol:g} of the boundary", pts[near][on])
        res = side < 0
        res[on] = False
        inside[near] = res
    return inside


def check_simple(curve, n=4096):
    """Raise ``GeometryError`` if the curve self-intersects, turns clockwise or stalls."""
    t = np.linspace(0.0, TWO_PI, n, endpoint=False)
    sp = curve.speed(t)
    if np.any(sp <= 1e-12):
        raise GeometryError("curve speed vanishes")
    p = curve.position(t)
    signed = 0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])
    if signed <= 0:
        raise GeometryError("curve must be oriented counterclockwise (positive signed area)")
    q = np.roll(p, -1, axis=0)
    if _segments_intersect(p, q):
        raise GeometryError("curve self-intersects")


def _segments_intersect(p, q):
    n = len(p)
    # bucket segments on a grid so the pairwise test stays local
    lo = np.minimum(p, q)
    hi = np.maximum(p, q)
    span = (hi - lo).max()
    box_lo = p.min(axis=0)
    cell = max(span, 1e-12) * 4
    ci = np.floor((lo - box_lo) / cell).astype(int)
    cj = np.floor((hi - box_lo) / cell).astype(int)
    buckets: dict = {}
    for s in range(n):
        for gx in range(ci[s, 0], cj[s, 0] + 1):
            for gy in range(ci[s, 1], cj[s, 1] + 1):
                buckets.setdefault((gx, gy), []).append(s)

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    for segs in buckets.values():
        if len(segs) < 2:
            continue
        for ii, s in enumerate(segs):
            for r in segs[ii + 1:]:
                if abs(s - r) <= 1 or abs(s - r) == n - 1:
                    continue
                a, b, c, d = p[s], q[s], p[r], q[r]
                if (orient(a, b, c) * orient(a, b, d) < 0) and (orient(c, d, a) * orient(c, d, b) < 0):
                    return True
    return False


# ---------------------------------------------------------------------------
# serialization


def descriptor_to_config(descriptor, n_panels=None, order=None):
    """Plain-text ``key = value`` block for a curve descriptor."""
    lines = [f"type = {descriptor['type']}"]
    for key, val in descriptor.items():
        if key == "type":
            continue
        if isinstance(val, (list, tuple)):
            val = ", ".join(repr(float(v)) for v in val)
        lines.append(f"{key} = {val}")
    if n_panels is not None:
        lines.append(f"n_panels = {n_panels}")
    if order is not None:
        lines.append(f"order = {order}")
    return "\n".join(lines) + "\n"


def _parse_value(text):
    text = text.strip()
    if "," in text:
        return [float(v) for v in text.split(",") if v.strip()]
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("none", ""):
        return None
    return text


def config_to_descriptor(text):
    """Inverse of :func:`descriptor_to_config`; returns ``(descriptor, n_panels, order)``."""
    desc: dict = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GeometryError(f"malformed config line: {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        desc[key] = _parse_value(val)
    n_panels = desc.pop("n_panels", None)
    order = desc.pop("order", None)
    if "type" not in desc:
        raise GeometryError("curve config needs a 'type' key")
    return desc, n_panels, order


def export_polyline_csv(panelization, path_or_file):
    """Write ``t, x1, x2, nx, ny, kappa`` rows for every node."""
    pan = panelization
    header = "t,x1,x2,nx,ny,kappa"
    rows = np.column_stack([pan.t, pan.x, pan.normals, pan.kappa])
    lines = [header] + [",".join(f"{v:.17g}" for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)
