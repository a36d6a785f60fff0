"""Command-line driver: ``neumann-green <command> [--config FILE] [--seed N] [--out DIR]``.

Configs are INI files. The ``[domain]`` section is a curve descriptor plus
``n_panels`` and ``order``; every command reads its own section for the
remaining knobs. Everything written is plot-ready CSV or JSON, with floats
in ``%.17g`` so identical inputs give byte-identical files.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures. Errors are also reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bie
from . import capture as cap
from . import geometry as geo
from . import greens as gr
from . import oracles
from . import quadrature as quad
from . import signaling as sg

COMMANDS = ("convergence", "eval", "optimize", "splitting", "orientation")
UNITS_LINE = "# all quantities nondimensional; lengths in domain units\n"


class ConfigError(ValueError):
    pass


NUMERICAL_ERRORS = (bie.SolverError, quad.QuadratureError, cap.OptimizationError,
                    np.linalg.LinAlgError, FloatingPointError)


# ---------------------------------------------------------------------------
# config handling


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def read_config(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
    return cp


class Section(dict):
    """Option mapping with case-insensitive lookup (configparser lowercases keys)."""

    def __contains__(self, key):
        return super().__contains__(key.lower())

    def __getitem__(self, key):
        return super().__getitem__(key.lower())

    def get(self, key, default=None):
        return super().get(key.lower(), default)


def section(cp, name):
    return Section(cp[name]) if cp.has_section(name) else Section()


def get(sec, key, default, conv=float):
    if key not in sec:
        return default
    try:
        return conv(sec[key])
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {sec[key]!r}") from None


def floats(text):
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def ints(text):
    return [int(v) for v in floats(text)]


def points(text):
    v = floats(text)
    if len(v) % 2:
        raise ConfigError("point lists need an even number of coordinates")
    return np.array(v).reshape(-1, 2)


def domain_from(cp, default=None):
    sec = section(cp, "domain") or dict(default or {"type": "disk"})
    text = "\n".join(f"{k} = {v}" for k, v in sec.items())
    try:
        desc, n_panels, order = geo.config_to_descriptor(text)
        curve = geo.build_curve(desc)
    except geo.GeometryError as exc:
        raise ConfigError(str(exc)) from None
    return curve, int(n_panels or 64), int(order or 16)


def panelization_from(cp, default=None):
    curve, n, k = domain_from(cp, default)
    try:
        return geo.panelize(curve, n, k)
    except (ValueError, geo.GeometryError) as exc:
        raise ConfigError(str(exc)) from None


def write_text(out, name, text):
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def csv_text(header, rows):
    lines = [UNITS_LINE.rstrip("\n"), ",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def json_text(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def config_dict(cp):
    return {s: dict(cp[s]) for s in cp.sections()}


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# convergence


def _rel(num, ref):
    num = np.asarray(num, dtype=float)
    ref = np.asarray(ref, dtype=float)
    scale = float(np.max(np.abs(ref)))
    err = float(np.max(np.abs(num - ref)))
    return err / scale if scale > 1e-14 else err


def bulk_oracle(curve, y):
    desc = curve.descriptor
    if desc["type"] == "disk":
        r = float(desc.get("r", 1.0))
        if any(float(c) != 0.0 for c in desc.get("center", (0.0, 0.0))):
            raise ConfigError("the disk oracle needs a centered disk")
        R, g, H = oracles.disk_R_bulk(y / r, y / r)
        # G_r(x; y) = G_1(x/r; y/r), so R picks up log(r)/(2 pi)
        return R + math.log(r) / (2 * math.pi), g / r, H / r**2
    if desc["type"] == "ellipse":
        a, b = float(desc["a"]), float(desc["b"])
        return oracles.ellipse_R_derivatives(y, y, a, b)
    raise ConfigError("convergence studies need a disk or ellipse domain")


def surface_oracle(curve, t):
    desc = curve.descriptor
    y = curve.position(np.array([t]))[0]
    if desc["type"] == "disk" and float(desc.get("r", 1.0)) == 1.0:
        return oracles.disk_R_surface_int(y), oracles.disk_R_surface_ext(y)
    if desc["type"] == "ellipse":
        a, b = float(desc["a"]), float(desc["b"])
        return (oracles.ellipse_R_surface(y, a, b, "interior"),
                oracles.ellipse_R_surface(y, a, b, "exterior"))
    raise ConfigError("surface convergence needs the unit disk or an ellipse")


def cmd_convergence(cp, args):
    curve, _, _ = domain_from(cp)
    sec = section(cp, "convergence")
    kind = sec.get("kind", "bulk")
    panels = ints(sec.get("panels", "8, 16, 32, 64, 128"))
    orders = ints(sec.get("orders", "4, 8, 16, 32"))
    rows = []
    if kind == "bulk":
        if "source" in sec:
            y = np.array(floats(sec["source"]))
        elif curve.descriptor["type"] == "ellipse":
            y = np.array([curve.descriptor["a"] / 4.0, curve.descriptor["b"] / 3.0])
        else:
            y = np.array([0.25, 1.0 / 3.0])
        ref = bulk_oracle(curve, y)
        for k in orders:
            for n in panels:
                pan = geo.panelize(curve, n, k)
                sol = gr.solve(pan, "interior-bulk", y)
                R, g, H = gr.derivatives(sol, y[None, :])
                rows.append((n, k, _rel(R[0], ref[0]), _rel(g[0], ref[1]), _rel(H[0], ref[2])))
        header = ("panels", "order", "err_R", "err_grad", "err_hess")
    elif kind == "surface":
        t = get(sec, "source_t", 1.0)
        ref = surface_oracle(curve, t)
        for k in orders:
            for n in panels:
                pan = geo.panelize(curve, n, k)
                ri = gr.regular_part(gr.solve(pan, "interior-surface", t), t=[t])[0]
                re = gr.regular_part(gr.solve(pan, "exterior-surface", t), t=[t])[0]
                rows.append((n, k, _rel(ri, ref[0]), _rel(re, ref[1])))
        header = ("panels", "order", "err_Rs_int", "err_Rs_ext")
    else:
        raise ConfigError(f"unknown convergence kind {kind!r}")
    return {"convergence.csv": csv_text(header, rows)}


# ---------------------------------------------------------------------------
# eval


def cmd_eval(cp, args):
    pan = panelization_from(cp)
    sec = section(cp, "eval")
    variant = sec.get("variant", "interior-bulk")
    if variant not in gr.VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    _, kind = gr.VARIANTS[variant]
    if kind == bie.SURFACE:
        source = get(sec, "source_t", 0.0)
    else:
        source = np.array(floats(sec.get("source", "0.25, 0.3333333333333333")))
    form = sec.get("form", "augmented")
    sol = gr.solve(pan, variant, source, form=form)
    out = {}
    if "targets" in sec:
        pts = points(sec["targets"])
        R, g, H = gr.derivatives(sol, pts)
        d = pts - sol.problem.y
        with np.errstate(divide="ignore"):
            G = R + bie.free_space(pts, sol.problem.y, sol.problem.kind)
        G[np.hypot(d[:, 0], d[:, 1]) < 1e-14] = np.nan
        rows = [(*pts[i], R[i], G[i], *g[i], H[i, 0, 0], H[i, 0, 1], H[i, 1, 1]) for i in range(len(pts))]
        out["eval.csv"] = csv_text(("x1", "x2", "R", "G", "Rx1", "Rx2", "Rx1x1", "Rx1x2", "Rx2x2"), rows)
    if "target_t" in sec:
        t = np.array(floats(sec["target_t"]))
        R = gr.regular_part(sol, t=t)
        x = pan.curve.position(t)
        out["eval_boundary.csv"] = csv_text(("t", "x1", "x2", "R"),
                                            [(t[i], *x[i], R[i]) for i in range(len(t))])
    if not out:
        raise ConfigError("[eval] needs 'targets' (points) and/or 'target_t' (curve parameters)")
    out["eval.json"] = json_text({"config": config_dict(cp), "variant": variant,
                                  "alpha": sol.alpha, "mu": sol.mu, "residual": sol.residual,
                                  "condition": sol.condition, "n_nodes": sol.panelization.n_nodes})
    return out


# ---------------------------------------------------------------------------
# optimize


def boundary_profiles(pan, n):
    """``R_s^int(t; t)``, ``R_s^ext(t; t)`` and curvature on ``n`` equispaced parameters."""
    t = np.arange(n) * (geo.TWO_PI / n)
    rows = []
    for ti in t:
        ri = gr.regular_part(gr.solve(pan, "interior-surface", ti), t=[ti])[0]
        re = gr.regular_part(gr.solve(pan, "exterior-surface", ti), t=[ti])[0]
        x = pan.curve.position(np.array([ti]))[0]
        rows.append((ti, x[0], x[1], float(geo.curvature(pan.curve, np.array([ti]))[0]), ri, re))
    return rows


def cmd_optimize(cp, args):
    pan = panelization_from(cp)
    sec = section(cp, "optimize")
    N = get(sec, "N", 1, int)
    mode = sec.get("mode", "interior")
    if mode not in ("interior", "windows"):
        raise ConfigError(f"unknown mode {mode!r}")
    seed = args.seed if args.seed is not None else get(sec, "seed", 0, int)
    opts = cap.OptimizeOptions(starts=get(sec, "starts", 40, int), seed=seed,
                               gtol=get(sec, "gtol", 1e-8), maxiter=get(sec, "maxiter", 400, int),
                               nu=get(sec, "nu", 0.1), D=get(sec, "D", 1.0))
    if N < 1 or opts.starts < 1:
        raise ConfigError("N and starts must be positive")
    res = cap.optimize_traps(pan, N, mode, opts)
    minima = [{"centers": m.centers, "params": m.params, "p": m.p, "tau0": m.tau0,
               "converged": m.converged, "converged_iters": m.iterations, "hits": m.count,
               "collinear": cap.is_collinear(m.centers) if N > 2 else None}
              for m in res.minima]
    doc = {"domain": pan.curve.descriptor, "N": N, "mode": mode, "seed": seed,
           "config": config_dict(cp), "n_panels": pan.n_panels, "order": pan.order,
           "evaluations": res.evaluations, "failed_starts": len(res.failures), "minima": minima}
    b = res.best
    rows = [(i, *b.centers[i], b.params[i] if b.params is not None else math.nan)
            for i in range(N)]
    out = {"optimize.json": json_text(doc),
           "optimize.csv": csv_text(("index", "x1", "x2", "t"), rows)}
    n_prof = get(sec, "profile_points", 0, int)
    if n_prof > 0:
        out["profiles.csv"] = csv_text(("t", "x1", "x2", "kappa", "Rs_int", "Rs_ext"),
                                       boundary_profiles(pan, n_prof))
    return out


# ---------------------------------------------------------------------------
# splitting


def cmd_splitting(cp, args):
    sec = section(cp, "splitting")
    ks = sg.default_k_grid(get(sec, "n_k", 25, int)) if sec.get("k", "default") == "default" \
        else np.array(floats(sec["k"]))
    eps = floats(sec.get("eps", "1e-4"))
    Rs = floats(sec.get("R", "5"))
    area = get(sec, "area", math.pi)
    order = get(sec, "order", 16, int)
    n_panels = get(sec, "n_panels", None, int)
    if np.any((ks <= 0) | (ks >= 1)):
        raise ConfigError("Cassini parameters need 0 < k < 1")
    if any(not 0 < e < math.exp(-1) for e in eps):
        raise ConfigError("eps must lie in (0, 1/e)")
    jobs = [(float(k), e, R) for k in ks for e in eps for R in Rs]

    def run(job):
        k, e, R = job
        r = sg.cassini_xi(k, area, e, R, n_panels, order)
        return {c: r[c] for c in sg.CSV_COLUMNS}

    rows = _map(run, jobs, args.threads)
    manifest = {"config": config_dict(cp), "area": area, "order": order, "n_panels": n_panels,
                "k": ks, "eps": eps, "R": Rs, "seed": args.seed,
                "tolerances": {"condition_limit": bie.CONDITION_LIMIT}}
    return {"splitting.csv": UNITS_LINE + sg.rows_to_csv(rows),
            "splitting.json": json_text(manifest)}


# ---------------------------------------------------------------------------
# orientation


def orientation_grid(curve, n, margin):
    t = np.linspace(0, geo.TWO_PI, 1024, endpoint=False)
    P = curve.position(t)
    lo, hi = P.min(axis=0), P.max(axis=0)
    gx = np.linspace(lo[0], hi[0], n + 2)[1:-1]
    gy = np.linspace(lo[1], hi[1], n + 2)[1:-1]
    X, Y = np.meshgrid(gx, gy, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    inside = geo.contains(curve, pts, raise_on_boundary=False)
    _, d = geo.closest_point(curve, pts)
    return pts[inside & (d > margin)]


def cmd_orientation(cp, args):
    pan = panelization_from(cp)
    sec = section(cp, "orientation")
    a = get(sec, "a", 1.0)
    b = get(sec, "b", 0.5)
    eps = get(sec, "eps", 0.05)
    D = get(sec, "D", 1.0)
    if not a >= b > 0:
        raise ConfigError("trap semi-axes need a >= b > 0")
    if "centers" in sec:
        pts = points(sec["centers"])
    else:
        pts = orientation_grid(pan.curve, get(sec, "grid", 21, int), get(sec, "margin", 0.05))

    def run(x):
        o = cap.orientation_at(pan, x, a, b, eps, D)
        phi = o.phi_star if o.phi_star is not None else math.nan
        return (x[0], x[1], o.p[0], o.p[1], phi, int(o.isotropic), o.tau)

    rows = _map(run, list(pts), args.threads)
    return {"orientation.csv": csv_text(("x1", "x2", "px", "py", "phi_star", "isotropic_flag", "tau"),
                                        rows),
            "orientation.json": json_text({"config": config_dict(cp), "a": a, "b": b,
                                           "eps": eps, "D": D, "n_centers": len(rows)})}


HANDLERS = {"convergence": cmd_convergence, "eval": cmd_eval, "optimize": cmd_optimize,
            "splitting": cmd_splitting, "orientation": cmd_orientation}


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="neumann-green",
                                 description="Neumann Green's functions and narrow-capture studies")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", metavar="PATH", help="INI config file")
    ap.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    ap.add_argument("--out", metavar="DIR", default=".", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    return ap


def _fail(code, exc):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}, sort_keys=True) + "\n")
    return code


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.threads < 1:
        return _fail(2, ConfigError("--threads must be >= 1"))
    if args.seed is not None and not 0 <= args.seed < 2**64:
        return _fail(2, ConfigError("--seed must be an unsigned 64-bit integer"))
    try:
        cp = read_config(args.config)
        files = HANDLERS[args.command](cp, args)
        written = [write_text(args.out, name, text) for name, text in sorted(files.items())]
    except NUMERICAL_ERRORS as exc:
        return _fail(3, exc)
    except (ConfigError, geo.GeometryError, configparser.Error, KeyError, ValueError) as exc:
        return _fail(2, exc)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
