"""Panel quadrature for smooth and logarithmically singular boundary integrals.

Three regimes are handled:

* far: the panel's own Gauss-Legendre rule;
* near (off-curve targets, or on-curve targets on a neighbouring panel):
  a composite rule graded dyadically toward the closest point, with the
  density interpolated from the panel nodes;
* self (on-curve target inside the panel): product integration against the
  exact Legendre moments of ``log|u - s|`` plus a regular remainder.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss, legvander

from . import geometry as geo


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class QuadratureRule:
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f, a=-1.0, b=1.0):
        h = 0.5 * (b - a)
        return h * np.dot(self.weights, f(0.5 * (a + b) + h * self.nodes))


@functools.lru_cache(maxsize=None)
def _gl(k):
    x, w = leggauss(k)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(k):
    """``k``-point Gauss-Legendre rule on ``(-1, 1)``."""
    if k < 1:
        raise ValueError("Gauss-Legendre order must be >= 1")
    x, w = _gl(int(k))
    return QuadratureRule(int(k), x, w)


# ---------------------------------------------------------------------------
# interpolation


@functools.lru_cache(maxsize=None)
def _bary_weights(k):
    x, w = _gl(k)
    lam = np.sqrt((1.0 - x * x) * w)
    lam[1::2] *= -1.0
    return lam


def lagrange_matrix(k, u):
    """Values ``l_j(u)`` of the Lagrange basis on the ``k`` Gauss-Legendre nodes.

    ``u`` may have any shape; the result has shape ``u.shape + (k,)``.
    """
    x, _ = _gl(k)
    lam = _bary_weights(k)
    u = np.asarray(u, dtype=float)
    diff = u[..., None] - x
    hit = diff == 0.0
    diff = np.where(hit, 1.0, diff)
    terms = lam / diff
    out = terms / terms.sum(axis=-1, keepdims=True)
    rows = hit.any(axis=-1)
    if np.any(rows):
        out[rows] = hit[rows].astype(float)
    return out


# ---------------------------------------------------------------------------
# product integration for log|u - s| on [-1, 1]


def legendre_log_moments(s, n_max):
    """``M_n(s) = int_{-1}^{1} log|u - s| P_n(u) du`` for ``n = 0..n_max``.

    Uses ``M_0 = (1-s)log(1-s) + (1+s)log(1+s) - 2`` and, for ``n >= 1``,
    ``M_n = 2 (Q_{n+1} - Q_{n-1}) / (2n + 1)`` with ``Q`` the Legendre
    functions of the second kind on the cut (upward recurrence is stable
    there). Endpoints ``s = +-1`` use closed-form moments.
    """
    s = float(s)
    if abs(s) == 1.0:
        # endpoint: int log(1 + u) P_n = (-1)^(n+1) 2 / (n (n + 1)), mirrored for s = 1
        n = np.arange(1, n_max + 1)
        M = np.empty(n_max + 1)
        M[0] = 2.0 * math.log(2.0) - 2.0
        M[1:] = (-1.0) ** (n + 1) * 2.0 / (n * (n + 1.0))
        if s == 1.0:
            M[1:] *= (-1.0) ** n
        return M
    if not -1.0 < s < 1.0:
        raise ValueError("log moments need |s| <= 1")
    Q = np.empty(n_max + 2)
    Q[0] = 0.5 * math.log((1.0 + s) / (1.0 - s))
    Q[1] = s * Q[0] - 1.0
    for n in range(1, n_max + 1):
        Q[n + 1] = ((2 * n + 1) * s * Q[n] - n * Q[n - 1]) / (n + 1)
    M = np.empty(n_max + 1)
    M[0] = (1.0 - s) * math.log(1.0 - s) + (1.0 + s) * math.log(1.0 + s) - 2.0
    n = np.arange(1, n_max + 1)
    M[1:] = 2.0 * (Q[2:] - Q[:-2]) / (2 * n + 1)
    return M


def log_product_weights(s, m):
    """Weights ``omega`` with ``int log|u-s| f(u) du ~= sum omega_q f(u_q)``.

    ``u_q`` are the ``m``-point Gauss-Legendre nodes; exact for polynomials of
    degree below ``m``.
    """
    x, w = _gl(m)
    M = legendre_log_moments(s, m - 1)
    V = legvander(x, m - 1)  # V[q, n] = P_n(x_q)
    coef = (2 * np.arange(m) + 1) / 2.0
    return w * (V @ (coef * M))


# ---------------------------------------------------------------------------
# graded composite rules


GRADED_ORDER = 16
MAX_DEPTH = 52


def graded_rule(s_c, depth_left, depth_right, order=GRADED_ORDER):
    """Composite rule on ``[-1, 1]`` graded dyadically toward ``s_c``.

    Each side ``[s_c, 1]`` (resp. ``[-1, s_c]``) is split at
    ``s_c + (1 - s_c) 2^-m`` for ``m = 1..depth``. Returns reference nodes and
    weights.
    """
    x, w = _gl(order)
    pieces_u = []
    pieces_w = []
    for side, depth in ((1.0, depth_right), (-1.0, depth_left)):
        span = side - s_c
        if abs(span) <= 0.0:
            continue
        br = s_c + span * 2.0 ** -np.arange(depth + 1)
        br = np.append(br, s_c)
        lo, hi = br[1:], br[:-1]
        h = 0.5 * (hi - lo)
        pieces_u.append((0.5 * (hi + lo))[:, None] + h[:, None] * x)
        pieces_w.append(np.abs(h)[:, None] * w)
    return np.concatenate([p.ravel() for p in pieces_u]), np.concatenate([p.ravel() for p in pieces_w])


def _depth_for(span_arclength, dist):
    if dist <= 0.0:
        return MAX_DEPTH
    if span_arclength <= dist:
        return 0
    return int(min(MAX_DEPTH, math.ceil(math.log2(span_arclength / dist))))


def integrate_log_singular(f, t_star, a=-1.0, b=1.0, curve=None, tol=1e-15, max_depth=40,
                           order=GRADED_ORDER):
    """``int_a^b f(t) log|gamma(t) - gamma(t*)| |gamma'(t)| dt``.

    With ``curve=None`` the panel is flat (``gamma(t) = t``). The interval is
    split at ``t*`` and each side is subdivided dyadically toward it; the
    innermost piece uses the endpoint log product rule and the others plain
    Gauss-Legendre. Depth grows until two successive estimates differ by less
    than ``tol``. A ``t*`` just outside ``[a, b]`` is handled by grading
    toward the nearer endpoint.
    """
    x, w = _gl(order)
    inside = a <= t_star <= b
    t_c = min(max(t_star, a), b)

    def geom(t):
        if curve is None:
            return np.abs(t - t_star), np.ones_like(t)
        ch = geo.chord(curve, np.full_like(t, t_star), t)
        return np.hypot(ch[:, 0], ch[:, 1]), curve.speed(t)

    def plain(lo, hi):
        h = 0.5 * (hi - lo)
        t = 0.5 * (hi + lo) + h * x
        d, sp = geom(t)
        return h * np.dot(w, f(t) * np.log(d) * sp)

    def inner(end, span):
        # log|gamma(t)-gamma(t*)| = log|t - t*| + log(|chord| / |t - t*|)
        lo, hi = sorted((t_c, end))
        h = 0.5 * (hi - lo)
        t = 0.5 * (hi + lo) + h * x
        d, sp = geom(t)
        dt = np.abs(t - t_star)
        g = f(t) * sp
        s_end = -1.0 if span > 0 else 1.0
        omega = log_product_weights(s_end, order)
        return h * (np.dot(omega, g) + np.dot(w, g * (math.log(h) + np.log(d / dt))))

    total = 0.0
    for side_end in (b, a):
        span = side_end - t_c
        if span == 0.0:
            continue
        prev = None
        for depth in range(max_depth + 1):
            br = t_c + span * 2.0 ** -np.arange(depth + 1)
            est = sum(plain(*sorted((br[m + 1], br[m]))) for m in range(depth))
            est += inner(br[-1], span) if inside else plain(*sorted((t_c, br[-1])))
            if prev is not None and abs(est - prev) < tol:
                break
            prev = est
        else:
            raise QuadratureError(
                f"log-singular integral did not converge within {max_depth} levels", total + est)
        total += est
    return total


# ---------------------------------------------------------------------------
# on-curve log weights


def _self_panel_log_weights(pan, p, t_target):
    """Weights on panel ``p``'s nodes for ``int_panel log|gamma(t) - gamma(t0)| sigma dS``."""
    k = pan.order
    a, b = pan.edges[p], pan.edges[p + 1]
    hh = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    s = min(max((t_target - mid) / hh, -1.0), 1.0)
    m = max(32, 2 * k)
    xq, wq = _gl(m)
    omega = log_product_weights(s, m)
    tq = mid + hh * xq
    ch = geo.chord(pan.curve, np.full(m, t_target), tq)
    dist = np.hypot(ch[:, 0], ch[:, 1])
    dt = np.abs(tq - t_target)
    sp = pan.curve.speed(tq)
    coincide = dt < 1e-14
    ratio = np.where(coincide, 1.0, dist / np.where(coincide, 1.0, dt))
    smooth = np.log(ratio)
    if np.any(coincide):
        smooth[coincide] = np.log(pan.curve.speed(np.array([t_target]))[0])
    vals = (omega + wq * (math.log(hh) + smooth)) * sp
    L = lagrange_matrix(k, xq)
    return hh * (vals @ L)


def _graded_panel_log_weights(pan, p, t_target, x_target):
    """Weights on panel ``p``'s nodes for a target close to (but not inside) the panel."""
    k = pan.order
    a, b = pan.edges[p], pan.edges[p + 1]
    hh = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    tc, dist = _closest_on_panel(pan, p, x_target[None, :], None)
    tc, dist = tc[0], dist[0]
    s_c = (tc - mid) / hh
    vmax = pan.speed[pan.panel_slice(p)].max()
    dl = _depth_for((tc - a) * vmax, dist)
    dr = _depth_for((b - tc) * vmax, dist)
    u, w = graded_rule(s_c, dl, dr)
    t = mid + hh * u
    if t_target is not None:
        ch = geo.chord(pan.curve, np.full(len(t), t_target), t)
    else:
        ch = pan.curve.position(t) - x_target
    lg = np.log(np.hypot(ch[:, 0], ch[:, 1]))
    vals = hh * w * lg * pan.curve.speed(t)
    return vals @ lagrange_matrix(k, u)


def on_curve_neighbours(pan, p):
    n = pan.n_panels
    return sorted({(p - 1) % n, p, (p + 1) % n})


def on_curve_log_weights(pan, t_target):
    """Sparse weights for ``int log|gamma(t0) - z| sigma(z) dS(z)`` at an on-curve target.

    Returns ``(panels, weights)`` where ``weights[i]`` applies to the nodes of
    ``panels[i]``; all other panels take the plain rule
    ``w_k log|x - x_k|``.
    """
    t0 = float(pan.wrap(t_target))
    p = int(pan.locate(t0))
    a, b = pan.edges[p], pan.edges[p + 1]
    # a target within rounding distance of a panel edge is moved onto it so
    # that both panels sharing the edge use endpoint product weights
    s_self = None
    if t0 - a < 1e-13 * (b - a):
        t0, s_self = a, -1.0
    elif b - t0 < 1e-13 * (b - a):
        p = (p + 1) % pan.n_panels
        a, b = pan.edges[p], pan.edges[p + 1]
        t0, s_self = a, -1.0
    x0 = pan.curve.position(np.array([t0]))[0]
    out = []
    for q in on_curve_neighbours(pan, p):
        if q == p:
            wq = _self_panel_log_weights(pan, q, t0)
        elif s_self is not None and q == (p - 1) % pan.n_panels:
            wq = _self_panel_log_weights(pan, q, pan.edges[q + 1])
        else:
            # parameter of the target expressed near panel q (periodic shift)
            mid_q = 0.5 * (pan.edges[q] + pan.edges[q + 1])
            tq = t0 + geo.TWO_PI * np.round((mid_q - t0) / geo.TWO_PI)
            wq = _graded_panel_log_weights(pan, q, tq, x0)
        out.append((q, wq))
    return out


@functools.lru_cache(maxsize=64)
def _self_block_operators(k, m):
    """Product weights at each of the ``k`` node positions and the k->m interpolation."""
    xk, _ = _gl(k)
    omega = np.array([log_product_weights(s, m) for s in xk])
    xq, _ = _gl(m)
    return omega, lagrange_matrix(k, xq)


@functools.lru_cache(maxsize=256)
def _graded_block_operators(k, s_c, depth):
    left, right = (0, depth) if s_c < 0 else (depth, 0)
    u, w = graded_rule(s_c, left, right)
    return u, w, lagrange_matrix(k, u)


def _panel_block(pan, p):
    """Correction blocks ``[(q, W)]`` for all node targets of panel ``p``.

    ``W[i, j]`` integrates the log kernel from node ``i`` of panel ``p``
    against the Lagrange basis function ``j`` of panel ``q``.
    """
    k = pan.order
    curve = pan.curve
    sl = pan.panel_slice(p)
    tt = pan.t[sl]
    a, b = pan.edges[p], pan.edges[p + 1]
    hh = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    m = max(32, 2 * k)
    omega, Lq = _self_block_operators(k, m)
    xq, wq = _gl(m)
    tq = mid + hh * xq
    T_i = np.repeat(tt, m)
    T_q = np.tile(tq, k)
    ch = geo.chord(curve, T_i, T_q).reshape(k, m, 2)
    dist = np.hypot(ch[..., 0], ch[..., 1])
    smooth = np.log(dist / np.abs(tq[None, :] - tt[:, None]))
    sp = curve.speed(tq)
    vals = (omega + wq[None, :] * (math.log(hh) + smooth)) * sp[None, :]
    blocks = [(p, hh * (vals @ Lq))]
    n = pan.n_panels
    for q, end_is_left in (((p + 1) % n, True), ((p - 1) % n, False)):
        if q == p:
            continue
        qa, qb = pan.edges[q], pan.edges[q + 1]
        qh = 0.5 * (qb - qa)
        qmid = 0.5 * (qa + qb)
        # express the targets' parameters near panel q
        tq_t = tt + geo.TWO_PI * np.round((qmid - tt) / geo.TWO_PI)
        end = qa if end_is_left else qb
        xt = pan.x[sl]
        tc, dc = _closest_on_panel(pan, q, xt)
        if np.any(np.abs(tc - end) > 1e-12 * (1 + abs(end))):
            W = np.vstack([_graded_panel_log_weights(pan, q, tq_t[i], xt[i]) for i in range(k)])
        else:
            vmax = pan.speed[pan.panel_slice(q)].max()
            depth = _depth_for(2 * qh * vmax, float(dc.min()))
            s_c = -1.0 if end_is_left else 1.0
            u, w, Lg = _graded_block_operators(k, s_c, depth)
            t = qmid + qh * u
            chq = geo.chord(curve, np.repeat(tq_t, len(t)), np.tile(t, k)).reshape(k, len(t), 2)
            lg = np.log(np.hypot(chq[..., 0], chq[..., 1]))
            W = (qh * lg * (w * curve.speed(t))[None, :]) @ Lg
        blocks.append((q, W))
    return blocks


@dataclass
class CorrectionTable:
    """Sparse replacement weights for the log kernel at on-curve node targets.

    ``index[j]`` lists the source nodes ``S_j`` whose plain weights
    ``w_k log|x_j - x_k|`` are replaced by ``weights[j]``.
    """

    panelization: object
    index: list
    weights: list

    def far_matrix(self):
        pan = self.panelization
        d = pan.x[:, None, :] - pan.x[None, :, :]
        r = np.hypot(d[..., 0], d[..., 1])
        np.fill_diagonal(r, 1.0)
        return np.log(r) * pan.weights[None, :]

    def dense(self):
        """Full matrix ``L`` with ``(L f)_j ~= int log|x_j - z| f(z) dS(z)``."""
        L = self.far_matrix()
        for j, (idx, wts) in enumerate(zip(self.index, self.weights)):
            L[j, idx] = wts
        return L

    def apply(self, f):
        f = np.asarray(f, dtype=float)
        pan = self.panelization
        out = np.empty(pan.n_nodes)
        blk = 512
        for i0 in range(0, pan.n_nodes, blk):
            xs = pan.x[i0:i0 + blk]
            d = xs[:, None, :] - pan.x[None, :, :]
            r = np.hypot(d[..., 0], d[..., 1])
            with np.errstate(divide="ignore"):
                lg = np.log(r)
            lg[~np.isfinite(lg)] = 0.0
            out[i0:i0 + blk] = lg @ (pan.weights * f)
        for j, (idx, wts) in enumerate(zip(self.index, self.weights)):
            d = pan.x[j] - pan.x[idx]
            r = np.hypot(d[:, 0], d[:, 1])
            with np.errstate(divide="ignore"):
                plain = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), 0.0)
            out[j] += np.dot(wts - plain * pan.weights[idx], f[idx])
        return out

    @property
    def max_stencil(self):
        return max(len(i) for i in self.index)

    def to_csv(self, path_or_file):
        lines = ["target,n_corrected,first_source,last_source"]
        for j, idx in enumerate(self.index):
            lines.append(f"{j},{len(idx)},{idx[0]},{idx[-1]}")
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w") as fh:
                fh.write(text)


_TABLE_CACHE: "dict[int, tuple]" = {}


def build_corrections(pan):
    """Correction table for the log kernel with every node as a target (cached)."""
    hit = _TABLE_CACHE.get(id(pan))
    if hit is not None and hit[0] is pan:
        return hit[1]
    k = pan.order
    index, weights = [], []
    for p in range(pan.n_panels):
        blocks = sorted(_panel_block(pan, p), key=lambda qb: qb[0])
        idx = np.concatenate([np.arange(q * k, (q + 1) * k) for q, _ in blocks])
        W = np.hstack([w for _, w in blocks])
        for i in range(k):
            index.append(idx)
            weights.append(W[i])
    table = CorrectionTable(pan, index, weights)
    if len(_TABLE_CACHE) > 16:
        _TABLE_CACHE.clear()
    _TABLE_CACHE[id(pan)] = (pan, table)
    return table


def single_layer_on_curve(pan, f, t_targets):
    """``int log|gamma(t) - z| f(z) dS(z)`` for arbitrary on-curve parameters ``t``."""
    f = np.asarray(f, dtype=float)
    t_targets = np.atleast_1d(np.asarray(t_targets, dtype=float))
    x = pan.curve.position(t_targets)
    d = x[:, None, :] - pan.x[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    k = pan.order
    out = np.empty(len(t_targets))
    for i, t0 in enumerate(t_targets):
        parts = on_curve_log_weights(pan, t0)
        mask = np.ones(pan.n_nodes, dtype=bool)
        acc = 0.0
        for q, w in parts:
            sl = slice(q * k, (q + 1) * k)
            mask[sl] = False
            acc += np.dot(w, f[sl])
        acc += np.dot(np.log(r[i, mask]), pan.weights[mask] * f[mask])
        out[i] = acc
    return out


# ---------------------------------------------------------------------------
# off-curve layer potentials


def _closest_on_panel(pan, p, pts, t0=None, iters=40):
    """Closest parameter on panel ``p`` (clipped) and the distance, per point."""
    a, b = pan.edges[p], pan.edges[p + 1]
    curve = pan.curve
    sl = pan.panel_slice(p)
    if t0 is None:
        cand = np.concatenate([[a], pan.t[sl], [b]])
        cx = curve.position(cand)
        d2 = (pts[:, None, 0] - cx[None, :, 0]) ** 2 + (pts[:, None, 1] - cx[None, :, 1]) ** 2
        t = cand[np.argmin(d2, axis=1)]
    else:
        t = np.array(t0, dtype=float)
    for _ in range(iters):
        g = curve.position(t)
        v = curve.velocity(t)
        acc = curve.acceleration(t)
        r = g - pts
        f1 = np.einsum("ij,ij->i", r, v)
        f2 = np.einsum("ij,ij->i", v, v) + np.einsum("ij,ij->i", r, acc)
        step = np.where(f2 > 0, f1 / np.where(f2 > 0, f2, 1.0), 0.0)
        step = np.clip(step, -0.25 * (b - a), 0.25 * (b - a))
        t_new = np.clip(t - step, a, b)
        done = np.all(np.abs(t_new - t) < 1e-15 * (1 + abs(b)))
        t = t_new
        if done:
            break
    d = np.hypot(*(curve.position(t) - pts).T)
    return t, d


KERNEL_COMPONENTS = {"log": 1, "grad": 2, "hess": 3}


def _kernel(kind, dx, dy):
    """Kernel values for ``r = x - z`` (components of ``dx, dy``)."""
    r2 = dx * dx + dy * dy
    if kind == "log":
        return (0.5 * np.log(r2))[..., None]
    if kind == "grad":
        return np.stack([dx / r2, dy / r2], axis=-1)
    if kind == "hess":
        r4 = r2 * r2
        return np.stack([1.0 / r2 - 2.0 * dx * dx / r4, -2.0 * dx * dy / r4,
                         1.0 / r2 - 2.0 * dy * dy / r4], axis=-1)
    raise ValueError(kind)


def panel_distances(pan, pts):
    """Lower-bound distance from each point to each panel (using nodes and endpoints)."""
    k = pan.order
    ends = pan.curve.position(pan.edges[:-1])
    ends2 = np.roll(ends, -1, axis=0)
    out = np.empty((len(pts), pan.n_panels))
    nodes = pan.x.reshape(pan.n_panels, k, 2)
    for i0 in range(0, len(pts), 256):
        blk = pts[i0:i0 + 256]
        d = np.hypot(blk[:, None, None, 0] - nodes[None, :, :, 0],
                     blk[:, None, None, 1] - nodes[None, :, :, 1]).min(axis=2)
        de = np.hypot(blk[:, None, 0] - ends[None, :, 0], blk[:, None, 1] - ends[None, :, 1])
        de2 = np.hypot(blk[:, None, 0] - ends2[None, :, 0], blk[:, None, 1] - ends2[None, :, 1])
        out[i0:i0 + 256] = np.minimum(d, np.minimum(de, de2))
    return out


NEAR_FACTOR = 2.0


def layer_potential(pan, sigma, targets, kinds=("log",), near_factor=NEAR_FACTOR,
                    boundary_tol=1e-13):
    """Integrals ``int K(x - z) sigma(z) dS(z)`` at off-curve targets.

    ``kinds`` selects among ``log`` (``log|x-z|``), ``grad``
    (``(x-z)/|x-z|^2``) and ``hess`` (``d/dx`` of ``grad``, components
    11, 12, 22). Returns a dict of arrays with shape ``(n_targets, m)``.
    Targets within ``near_factor`` panel lengths of a panel use a graded rule
    toward the closest point on that panel.
    """
    pts = np.atleast_2d(np.asarray(targets, dtype=float))
    sigma = np.asarray(sigma, dtype=float)
    k = pan.order
    ws = pan.weights * sigma
    res = {kind: np.zeros((len(pts), KERNEL_COMPONENTS[kind])) for kind in kinds}
    for i0 in range(0, len(pts), 512):
        blk = pts[i0:i0 + 512]
        dx = blk[:, None, 0] - pan.x[None, :, 0]
        dy = blk[:, None, 1] - pan.x[None, :, 1]
        for kind in kinds:
            res[kind][i0:i0 + 512] = np.einsum("ijm,j->im", _kernel(kind, dx, dy), ws)
    dist = panel_distances(pan, pts)
    near_i, near_p = np.nonzero(dist < near_factor * pan.panel_length[None, :])
    if near_i.size == 0:
        return res
    for p in np.unique(near_p):
        sel = near_i[near_p == p]
        sl = pan.panel_slice(p)
        sub = pts[sel]
        # remove the plain contribution of this panel
        dx = sub[:, None, 0] - pan.x[None, sl, 0]
        dy = sub[:, None, 1] - pan.x[None, sl, 1]
        for kind in kinds:
            res[kind][sel] -= np.einsum("ijm,j->im", _kernel(kind, dx, dy), ws[sl])
        tc, dc = _closest_on_panel(pan, p, sub)
        if np.any(dc < boundary_tol):
            raise geo.BoundaryProximityError("evaluation target lies on the boundary", sub[dc < boundary_tol])
        a, b = pan.edges[p], pan.edges[p + 1]
        hh, mid = 0.5 * (b - a), 0.5 * (a + b)
        vmax = pan.speed[sl].max()
        sig_p = sigma[sl]
        for j, i in enumerate(sel):
            dl = _depth_for((tc[j] - a) * vmax, dc[j])
            dr = _depth_for((b - tc[j]) * vmax, dc[j])
            u, w = graded_rule((tc[j] - mid) / hh, dl, dr)
            t = mid + hh * u
            z = pan.curve.position(t)
            sw = hh * w * pan.curve.speed(t) * (lagrange_matrix(k, u) @ sig_p)
            ddx = pts[i, 0] - z[:, 0]
            ddy = pts[i, 1] - z[:, 1]
            for kind in kinds:
                res[kind][i] += sw @ _kernel(kind, ddx, ddy)
    return res


def boundary_distance(pan, pts):
    """Distance from each point to the curve (exact closest point on the nearest panel)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    dist = panel_distances(pan, pts)
    out = np.empty(len(pts))
    best = np.argmin(dist, axis=1)
    for p in np.unique(best):
        sel = np.nonzero(best == p)[0]
        cand = []
        for q in on_curve_neighbours(pan, p):
            cand.append(_closest_on_panel(pan, q, pts[sel])[1])
        out[sel] = np.min(cand, axis=0)
    return out
