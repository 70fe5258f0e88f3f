"""Command line entry point: ``logconv verify | fuzz | render | report``.

Exit status is 0 when every check passes, 1 when some check fails and 2 on
usage errors (bad flags, bad config file, unwritable output).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict

import numpy as np

from . import __version__
from . import convbody as CB
from . import grid as G
from . import model as M
from . import polytope as P
from . import verify as V
from .polytope import Polytope

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
REPORT_VERSION = 1


class UsageError(Exception):
    pass


# -- config -------------------------------------------------------------------------


def read_config(path: str) -> dict:
    """Plain ``key = value`` lines; '#' starts a comment; dashes and underscores are equivalent."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}") from e
    for k, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{k}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value file of defaults; flags override it")
    p.add_argument("--dim", type=int, choices=(1, 2, 3))
    p.add_argument("--resolution", type=int, default=128, help="grid cells per axis (default 128)")
    p.add_argument("--t-samples", type=int, default=64, help="level samples in t (default 64)")
    p.add_argument("--theta-samples", type=int, default=64, help="samples in theta (default 64)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=0.02, help="grid-path tolerance, in (0, 0.2]")
    p.add_argument("--eps-tail", type=float, default=1e-6, help="mass left outside the grid box")
    p.add_argument("--out", help="output file (stdout if omitted)")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="logconv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("verify", help="run a verification suite and write a JSON report")
    _common(p)
    p.add_argument("--suite", default="default", choices=V.SUITES)
    p.add_argument("--instance", action="append", help="restrict to a fixture (repeatable)")
    subs["verify"] = p

    p = sub.add_parser("fuzz", help="ratios over seeded random instances, worst first (CSV)")
    _common(p)
    p.add_argument("--family", default="polygons", choices=V.FUZZ_FAMILIES)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--inequality", default="rs_diff")
    subs["fuzz"] = p

    p = sub.add_parser("render", help="SVG of a 2D fixture")
    _common(p)
    p.add_argument("--instance", default="simplex2d")
    p.add_argument("--what", default="convsets", choices=("levelsets", "convsets", "polytopes"))
    p.add_argument("--t", type=float, default=0.5)
    subs["render"] = p

    p = sub.add_parser("report", help="summarise a JSON report; exit status reflects its checks")
    p.add_argument("path")
    subs["report"] = p
    return parser, subs


def parse_args(argv) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            conf = read_config(args.config)
        except UsageError as e:
            parser.error(str(e))
        sp = subs[args.command]
        known = {a.dest for a in sp._actions}
        bad = sorted(set(conf) - known - {"config"})
        if bad:
            sp.error(f"unknown config key(s): {', '.join(bad)}")
        sp.set_defaults(**{k: v for k, v in conf.items() if k != "config"})
        args = parser.parse_args(argv)  # string defaults are converted by each option's type
    if args.command in ("verify", "fuzz", "render"):
        sp = subs[args.command]
        if args.resolution < 16:
            sp.error("--resolution must be at least 16")
        if not 0 < args.tolerance <= 0.2:
            sp.error("--tolerance must lie in (0, 0.2]")
        if args.t_samples < 2 or args.theta_samples < 1:
            sp.error("--t-samples must be >= 2 and --theta-samples >= 1")
        if not 0 < args.eps_tail < 1:
            sp.error("--eps-tail must lie in (0, 1)")
    if args.command == "fuzz" and args.count < 1:
        subs["fuzz"].error("--count must be at least 1")
    if args.command == "render" and not 0 < args.t <= 1:
        subs["render"].error("--t must lie in (0, 1]")
    return args


def check_config(args) -> V.CheckConfig:
    return V.CheckConfig(resolution=args.resolution, t_samples=args.t_samples,
                         theta_samples=args.theta_samples, seed=args.seed,
                         tolerance=args.tolerance, eps_tail=args.eps_tail)


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise UsageError(f"cannot write {out}: {e}") from e


def _workers() -> int:
    raw = os.environ.get("LOGCONV_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as e:
        raise UsageError(f"LOGCONV_THREADS must be an integer, got {raw!r}") from e
    return max(1, n)


# -- verify / report ------------------------------------------------------------------


def verify_report(suite: str, cfg: V.CheckConfig, dim=None, names=None, workers: int = 1) -> dict:
    """The report document; instances are evaluated in a pool, assembled in name order."""
    instances = V.suite_instances(suite, dim, names)

    def one(inst):
        return {"name": inst.name, "params": V._jsonable(inst.to_dict()),
                "checks": [r.to_dict() for r in V.run_instance(inst, suite, cfg)]}

    with ThreadPoolExecutor(max_workers=workers) as pool:
        entries = list(pool.map(one, instances))
    doc = {"version": REPORT_VERSION, "suite": suite, "config": asdict(cfg),
           "instances": sorted(entries, key=lambda e: e["name"])}
    if suite in ("structure", "all"):
        doc["identities"] = [r.to_dict() for r in V.theta_reports(cfg)]
    return doc


def report_checks(doc: dict):
    for inst in doc.get("instances", []):
        for c in inst["checks"]:
            yield inst["name"], c
    for c in doc.get("identities", []):
        yield "-", c


def summary(doc: dict) -> str:
    lines = []
    for name, c in report_checks(doc):
        mark = "PASS" if c["pass"] else "FAIL"
        lines.append(f"{mark} {name:<12} {c['inequality']:<15} ratio={c['ratio']:.6g} "
                     f"path={c['path']}")
    return "\n".join(lines) + "\n"


def all_passed(doc: dict) -> bool:
    return all(c["pass"] for _, c in report_checks(doc))


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# -- fuzz -----------------------------------------------------------------------------


def fuzz_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "instance", "inequality", "ratio", "resolution"])
    for r in rows:
        w.writerow([r.seed, r.instance, r.inequality, repr(float(r.ratio)), r.resolution])
    return buf.getvalue()


def fuzz_passed(rows, cfg: V.CheckConfig) -> bool:
    ok = True
    for r in rows:
        tol = V.EXACT_TOL if r.resolution == "exact" else cfg.tolerance
        ok &= V.passes(V.BOUNDS[r.inequality], r.ratio, tol)
    return bool(ok)


# -- render ---------------------------------------------------------------------------

PALETTE = ("#1b6ca8", "#d1495b", "#2e8b57", "#edae49", "#6a4c93", "#00798c", "#8d6e63", "#c0392b")


def _ccw(V_: np.ndarray) -> np.ndarray:
    c = V_.mean(axis=0)
    return V_[np.argsort(np.arctan2(V_[:, 1] - c[1], V_[:, 0] - c[0]), kind="stable")]


def _hull_points(X: np.ndarray) -> np.ndarray | None:
    if len(X) == 0:
        return None
    H = Polytope.from_vertices(X)
    return _ccw(H.vertices) if H.full_dim else H.vertices


def svg_document(layers, title: str, notes=()) -> str:
    """layers: (label, list of polygons as (k, 2) arrays).  Deterministic text output."""
    pts = np.vstack([p for _, polys in layers for p in polys if p is not None and len(p)])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    size, margin, panel = 600.0, 30.0, 240.0
    scale = (size - 2 * margin) / span

    def xy(p):
        x = margin + (p[0] - lo[0]) * scale
        y = size - margin - (p[1] - lo[1]) * scale
        return f"{x:.3f},{y:.3f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size + panel:.0f} {size:.0f}" '
           f'width="{size + panel:.0f}" height="{size:.0f}">',
           f"<title>{title}</title>",
           f'<desc>world box [{lo[0]:.6g}, {hi[0]:.6g}] x [{lo[1]:.6g}, {hi[1]:.6g}], '
           f"{scale:.6g} px per unit, y up</desc>",
           f'<rect x="0" y="0" width="{size + panel:.0f}" height="{size:.0f}" fill="white"/>']
    for i, (label, polys) in enumerate(layers):
        colour = PALETTE[i % len(PALETTE)]
        out.append(f'<g id="layer{i}" fill="none" stroke="{colour}" stroke-width="1.5">')
        for p in polys:
            if p is None or len(p) == 0:
                continue
            out.append(f'<polygon points="{" ".join(xy(q) for q in p)}"/>')
        out.append("</g>")
        y = 30 + 22 * i
        out.append(f'<rect x="{size + 10:.0f}" y="{y - 10}" width="14" height="14" fill="{colour}"/>')
        out.append(f'<text x="{size + 30:.0f}" y="{y + 2}" font-family="monospace" '
                   f'font-size="12">{label}</text>')
    for j, note in enumerate(notes):
        y = 40 + 22 * (len(layers) + j)
        out.append(f'<text x="{size + 10:.0f}" y="{y}" font-family="monospace" font-size="12">{note}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _lift(V_: np.ndarray) -> np.ndarray:
    return V_ if V_.shape[1] == 2 else np.c_[V_, np.zeros(len(V_))]


def render_levelsets(inst: V.Instance, cfg: V.CheckConfig):
    (F,) = M.rasterize_aligned([inst.f], cfg.resolution, cfg.eps_tail)
    layers = []
    for s in (0.1, 0.3, 0.5, 0.7, 0.9):
        mask = F.log_values >= F.log_max + np.log(s) - CB.TIE
        H = G.mask_hull(None, mask, F.origin, F.spacing)
        layers.append((f"f >= {s:g} |f|", [None if H is None else _ccw(H.vertices)]))
    return layers, []


def render_convsets(inst: V.Instance, cfg: V.CheckConfig, t: float):
    f, g = inst.f, inst.second
    thetas = (0.0, 0.25, 0.5, 0.75, 0.95)
    pair = CB.exact_pair(f, g)
    layers = []
    if pair is not None:
        Mt, x0 = pair.m_t(t)
        X, _ = V._box_lattice(*pair.level_box(t), cfg.resolution)
        v = pair.measure(X, t)
        for th in thetas:
            # the floor drops round-off areas on the boundary of the support
            sel = v >= max(th, 1e-9) * Mt * (1 - V.REL_TOL)
            layers.append((f"theta = {th:g}", [_hull_points(X[sel])]))
        note = f"t = {t:g}, M_t = {Mt:.6g} (exact)"
    else:
        F, Gg = M.rasterize_aligned([f, g], cfg.resolution, cfg.eps_tail)
        Mt, x0 = CB.m_t(F, Gg, t)
        origin = F.origin + Gg.origin
        for th in thetas:
            mask = CB.conv_set(F, Gg, th, t)
            H = G.mask_hull(None, mask, origin, F.spacing)
            layers.append((f"theta = {th:g}", [None if H is None else _ccw(H.vertices)]))
        note = f"t = {t:g}, M_t = {Mt:.6g} (grid)"
    return layers, [note, f"x0 = ({x0[0]:.4g}, {x0[1]:.4g})"]


def render_polytopes(inst: V.Instance):
    f, g = inst.f, inst.second
    if not (isinstance(f, M.IndicatorPolytope) and isinstance(g, M.IndicatorPolytope)):
        raise UsageError("--what polytopes needs an indicator instance")
    K, L = f.body, g.body
    D = P.difference_body(K)
    S = P.minkowski_sum(K, L)
    layers = [("K", [_ccw(K.vertices)]), ("L", [_ccw(L.vertices)]),
              ("K - K", [_ccw(D.vertices)]), ("K + L", [_ccw(S.vertices)])]
    notes = [f"|K - K| = {P.volume(D):.6g}", f"6 |K| = {6 * P.volume(K):.6g}",
             f"|K + L| = {P.volume(S):.6g}"]
    return layers, notes


def render(instance: str, what: str, t: float, cfg: V.CheckConfig) -> str:
    fx = V.fixtures()
    if instance not in fx:
        raise UsageError(f"unknown instance {instance!r}")
    inst = fx[instance]
    if inst.dim != 2:
        raise UsageError("render needs a 2D instance")
    if what == "levelsets":
        layers, notes = render_levelsets(inst, cfg)
    elif what == "convsets":
        layers, notes = render_convsets(inst, cfg, t)
    else:
        layers, notes = render_polytopes(inst)
    return svg_document(layers, f"{instance}: {what}", notes)


# -- main -----------------------------------------------------------------------------


def run(args) -> int:
    if args.command == "report":
        try:
            with open(args.path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read report {args.path}: {e}") from e
        sys.stdout.write(summary(doc))
        return EXIT_OK if all_passed(doc) else EXIT_FAIL
    cfg = check_config(args)
    if args.command == "verify":
        try:
            doc = verify_report(args.suite, cfg, args.dim, args.instance, _workers())
        except V.VerifyError as e:
            raise UsageError(str(e)) from e
        _emit(dumps(doc), args.out)
        if args.out is not None:
            sys.stdout.write(summary(doc))
        return EXIT_OK if all_passed(doc) else EXIT_FAIL
    if args.command == "fuzz":
        try:
            rows = V.fuzz(args.family, args.count, args.seed, args.inequality, cfg, args.dim or 2)
        except V.VerifyError as e:
            raise UsageError(str(e)) from e
        _emit(fuzz_csv(rows), args.out)
        return EXIT_OK if fuzz_passed(rows, cfg) else EXIT_FAIL
    _emit(render(args.instance, args.what, args.t, cfg), args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        return run(args)
    except UsageError as e:
        print(f"logconv: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
