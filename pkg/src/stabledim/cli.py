"""Command-line entry point.

Exit codes: 0 when every check passes, 1 when a mathematical check fails,
2 on input errors.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from . import affine_like as al
from . import dimension_calc as dc
from . import measure_cover as mc
from . import torus_dynamics as td
from .io import read_csv_rows, write_csv, write_pgm

RATIO_TARGET = 0.030136
RATIO_TOL = 5e-4
ENDPOINT_TOL = 1e-10
OUTPUT_FLAGS = {"out_csv", "out_pgm", "out_prefix", "func", "command"}


class InputError(Exception):
    pass


def _meta(args) -> dict:
    """Seed and non-output flags, sorted, for artifact headers."""
    items = {k: v for k, v in vars(args).items() if k not in OUTPUT_FLAGS}
    meta = {"command": args.command, "seed": items.pop("seed", "none")}
    meta["flags"] = " ".join(f"{k}={v}" for k, v in sorted(items.items()))
    return meta


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"cannot parse number list {text!r}") from None


# --------------------------------------------------------------------------
# region
# --------------------------------------------------------------------------


def cmd_region(args) -> int:
    if args.resolution < 256:
        raise InputError("resolution must be at least 256")
    t0 = time.perf_counter()
    area_d, area_py, ratio = dc.region_areas(args.resolution, args.domain)
    e_py, e_d = dc.diagonal_endpoints()
    elapsed = time.perf_counter() - t0
    print(f"areaD      {area_d:.9f}")
    print(f"areaPY     {area_py:.9f}")
    print(f"ratio      {ratio:.6f}  (target {RATIO_TARGET} +- {RATIO_TOL})")
    print(f"endpoints  {e_py:.12f} {e_d:.12f}")
    print(f"time       {elapsed:.2f} s")
    ratio_ok = abs(ratio - RATIO_TARGET) <= RATIO_TOL
    ends_ok = abs(e_py - 0.6) <= ENDPOINT_TOL and abs(e_d - 11 / 21) <= ENDPOINT_TOL
    print(f"ratio check     {'PASS' if ratio_ok else 'FAIL'}")
    print(f"endpoint check  {'PASS' if ends_ok else 'FAIL'}")
    if args.out_csv:
        rows = [("area_D", area_d), ("area_PY", area_py), ("ratio", ratio), ("ratio_target", RATIO_TARGET),
                ("endpoint_PY", e_py), ("endpoint_D", e_d), ("ratio_ok", ratio_ok), ("endpoints_ok", ends_ok)]
        write_csv(args.out_csv, "region", _meta(args), ("quantity", "value"), rows)
    if args.out_pgm:
        _, py, d, _ = dc.region_masks(args.resolution, args.domain)
        img = np.full(py.shape, 255, dtype=np.uint8)
        img[py] = 128
        img[d] = 0
        # rows: d_u0 decreasing downwards, columns: d_s0
        write_pgm(args.out_pgm, img.T[::-1])
    return 0 if ratio_ok and ends_ok else 1


# --------------------------------------------------------------------------
# cover
# --------------------------------------------------------------------------


def parse_map_spec(text: str):
    """Planar linear map from ``key=value`` tokens.

    kind=identity | diag (K, L: matrix diag(K, L/K)) | linear (matrix=a,b,c,d)
    | rotation (theta).
    """
    kv = {}
    for tok in text.replace(";", " ").replace("\n", " ").split():
        if "=" not in tok:
            raise InputError(f"malformed map token {tok!r}")
        k, v = tok.split("=", 1)
        kv[k.strip()] = v.strip()
    kind = kv.get("kind")
    try:
        if kind == "identity":
            M = np.eye(2)
        elif kind == "diag":
            K, L = float(kv["K"]), float(kv["L"])
            M = np.diag([K, L / K])
        elif kind == "linear":
            vals = _floats(kv["matrix"])
            if len(vals) != 4:
                raise InputError("matrix needs four entries")
            M = np.array(vals).reshape(2, 2)
        elif kind == "rotation":
            t = float(kv["theta"])
            M = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        else:
            raise InputError(f"unknown map kind {kind!r}")
    except (KeyError, ValueError) as exc:
        raise InputError(f"bad map spec: {exc}") from None
    if not np.all(np.isfinite(M)) or abs(np.linalg.det(M)) == 0.0:
        raise InputError("map must be finite and invertible")
    return M


def cmd_cover(args) -> int:
    text = args.map
    if args.map_file:
        text = open(args.map_file, encoding="utf-8").read()
    if not text:
        raise InputError("no map given")
    M = parse_map_spec(text)
    d_list = _floats(args.d)
    if not d_list or any(not 1.0 <= d <= 2.0 for d in d_list):
        raise InputError("d values must lie in [1, 2]")
    if args.r <= 0:
        raise InputError("r must be positive")
    K = max(float(np.linalg.norm(M, 2)), 1.0)
    L = max(abs(float(np.linalg.det(M))), 1.0)
    g = mc.GeometryBounds(K, L, args.r)
    region = mc.image_region(mc.PlaneMap.linear(M), args.r)
    try:
        cover = mc.build_cover(region, args.depth, samples_per_axis=args.samples_per_axis, seed=args.seed)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rows = []
    ok_all = True
    for d in d_list:
        s = mc.cover_sum(cover, d)
        b = mc.measure_bound(g, d)
        ok = s <= b
        ok_all &= ok
        rows.append((d, s, b, ok))
        print(f"d={d:<6g} cover_sum={s:.6f}  bound={b:.4f}  {'PASS' if ok else 'FAIL'}")
    print(f"squares={len(cover)} residual_squares={cover.residual_squares} K={K:.6g} L={L:.6g}")
    if args.out_csv:
        write_csv(args.out_csv, "cover", _meta(args), ("d", "cover_sum", "bound", "ok"), rows)
    return 0 if ok_all else 1


# --------------------------------------------------------------------------
# dims
# --------------------------------------------------------------------------


def cmd_dims(args) -> int:
    try:
        dp = dc.DimensionPair(args.ds, args.du)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        b = dc.beta_star(dp)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.eigen:
        vals = _floats(args.eigen)
        if len(vals) != 4:
            raise InputError("--eigen needs lambda_ps,mu_ps,lambda_pu,mu_pu")
        try:
            e = dc.EigenData(*vals, conservative=args.conservative)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    elif args.conservative:
        e = dc.EigenData.conservative_from(2.0, 2.0)
    else:
        raise InputError("give --conservative or --eigen")
    py, d_in, eig = dc.in_PY(dp), dc.in_D(dp), dc.eigen_condition(dp, e)
    print(f"beta*            {b:.12g}")
    print(f"in_PY            {py}")
    print(f"in_D             {d_in}")
    print(f"eigen condition  {eig}")
    if dp.total > 1.0 and py:
        print(f"branch           ({'a' if dc.branch_a(dp) else 'b'})")
        case, val = dc.solve_expected_dim(dp)
        print(f"case             ({case})")
        print(f"expected d - 1   {val:.12g}")
    else:
        print("expected d - 1   n/a (needs d_s0 + d_u0 > 1 inside PY)")
    verdict = py and d_in and eig
    if verdict:
        print("verdict          HD(W^s) = 1 + d_s expected")
    else:
        print("verdict          negative: conditions not all met")
    return 0 if verdict else 1


# --------------------------------------------------------------------------
# tower
# --------------------------------------------------------------------------


def cmd_tower(args) -> int:
    if not (0.0 < args.eps < 1.0):
        raise InputError("eps must lie in (0, 1)")
    if args.n_height < 1 or args.samples < 1:
        raise InputError("n-height and samples must be positive")
    if args.n_height < td.minimal_height(args.eps):
        raise InputError(f"n-height {args.n_height} too small for eps {args.eps}; "
                         f"minimal admissible N = {td.minimal_height(args.eps)}")
    try:
        params = td.StandardMapParams(args.lam)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    t0 = time.perf_counter()
    K = td.periodic_points(params, args.max_period)
    spec = td.tower_params(params, args.eps, args.n_height, K, seed=args.seed)
    spec = td.select_centers(spec, params, candidate_batch=args.candidate_batch, seed=args.seed,
                             cloud=args.cloud)
    V, diag = td.build_tower(spec, params, seed=args.seed)
    rep = td.verify_empty_intersection(V, spec.N, params, args.samples, args.seed)
    elapsed = time.perf_counter() - t0
    comp = rep.complement
    comp_se = math.sqrt(comp * (1 - comp) / args.samples)
    N = spec.N
    print(f"periodic points   {len(K)} (period <= {args.max_period})")
    print(f"radii             delta={spec.delta:.6g} mu={spec.mu:.6g} eta={spec.eta:.6g}")
    print(f"towers            m={spec.m}")
    print(f"Leb(V_delta)      {diag.leb_vdelta:.6f}  <= eps/2 = {args.eps / 2:.6f}")
    print(f"base balls        {diag.base_term:.6f}  <= 1/sqrt(N) = {1 / math.sqrt(N):.6f}")
    print(f"greedy residual   {diag.residual_term:.6g}  (exp(-sqrt N) = {math.exp(-math.sqrt(N)):.3g})")
    print(f"complement        {comp:.6f} +- {comp_se:.6f}  bound {diag.bound:.6f}  eps {args.eps}")
    print(f"counterexamples   {rep.counterexamples} / {args.samples}")
    print(f"time              {elapsed:.1f} s")
    budget_ok = all(diag.budget_ok.values())
    ok = rep.counterexamples == 0 and comp < args.eps and comp <= diag.bound and budget_ok
    field = None
    if args.grid:
        # cells whose orbit stays in V for |k| <= N; an empty N-window intersection leaves none
        field = td.max_invariant_escape(V, params, N, args.grid)
        print(f"surviving cells   {field.count} / {args.grid ** 2} at horizon {N}")
        ok = ok and field.count == 0
    print(f"tower check       {'PASS' if ok else 'FAIL'}")
    if args.out_prefix:
        meta = _meta(args)
        with open(args.out_prefix + ".spec.txt", "w", encoding="utf-8") as fh:
            fh.write(spec.to_kv())
        write_csv(args.out_prefix + ".escape.csv", "tower-escape", meta,
                  ("sample", "x", "y", "escape_time", "ok"), rep.rows())
        summary = [("N", N), ("delta", spec.delta), ("mu", spec.mu), ("eta", spec.eta), ("m", spec.m),
                   ("leb_vdelta", diag.leb_vdelta), ("base_term", diag.base_term),
                   ("residual_term", diag.residual_term), ("complement", comp), ("complement_se", comp_se),
                   ("bound", diag.bound), ("counterexamples", rep.counterexamples), ("ok", ok)]
        write_csv(args.out_prefix + ".summary.csv", "tower", meta, ("quantity", "value"), summary)
        if field is not None:
            with open(args.out_prefix + ".field.pgm", "wb") as fh:
                fh.write(field.to_pgm())
    return 0 if ok else 1


# --------------------------------------------------------------------------
# cascade
# --------------------------------------------------------------------------


def read_widths(path):
    """Rows ``j,P,Q`` (a header row and '#' lines are skipped)."""
    try:
        rows = read_csv_rows(path)
    except OSError as exc:
        raise InputError(str(exc)) from None
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]
    if not rows:
        raise InputError("widths file is empty")
    P, Q = [], []
    for i, r in enumerate(rows):
        if len(r) != 3 or int(r[0]) != i:
            raise InputError(f"widths row {i} must read '{i},P,Q'")
        P.append(float(r[1]))
        Q.append(float(r[2]))
    return P, Q


def cmd_cascade(args) -> int:
    try:
        params = dc.CascadeParams(args.eps0, args.tau, args.eta, args.beta, args.beta_hat, args.C)
        dp = dc.DimensionPair(args.ds, args.du)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.synthetic:
        w = dc.synthetic_cascade(params, args.synthetic)
    elif args.widths:
        try:
            P, Q = read_widths(args.widths)
            w = dc.WidthCascade(P, Q, params)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    else:
        raise InputError("give --widths FILE or --synthetic K")
    if not (1.0 <= args.d <= 1.0 + dp.d_s0):
        raise InputError("need 1 <= d <= 1 + d_s0")
    rep = dc.cascade_check(w)
    print(f"cascade  k={w.k}  {rep}")
    if not rep.admissible:
        return 1
    rows = []
    ok_all = True
    for k in range(2, w.k + 1):
        bc = dc.bound_constants(w, k)
        direct, product = dc.exceptional_measure_forms(w, k, args.d)
        rel = abs(direct - product) / abs(direct)
        cb = dc.lemma_case_bound(dp, w, k, args.d)
        ok = rel <= dc.REL_TOL and cb.dominates and bc.jacobian_chain_ok
        ok_all &= ok
        rows.append((k, bc.K_k, bc.L_k, bc.r_k, bc.s_k, bc.N_k, direct, product, rel, cb.case, cb.bound,
                     cb.dominates, ok))
        print(f"k={k:<3d} exceptional={direct:.6e} identity_rel_err={rel:.2e} "
              f"case=({cb.case}) bound={cb.bound:.6e} {'PASS' if ok else 'FAIL'}")
    if args.out_csv:
        cols = ("k", "K_k", "L_k", "r_k", "s_k", "N_k", "exceptional", "product_form", "rel_err", "case",
                "case_bound", "dominates", "ok")
        write_csv(args.out_csv, "cascade", _meta(args), cols, rows)
    return 0 if ok_all else 1


# --------------------------------------------------------------------------
# affine
# --------------------------------------------------------------------------


def affine_suite(pairs: int, seed: int, lam: float = 2.0, u0: float = 1.2, v0: float = 1.2):
    """Named pass/fail results of the affine-like property checks."""
    cp = al.ConeParams(lam, u0, v0)
    res = {}
    F3 = al.linear_map(3.0, 1.0 / 3.0)
    res["widths_linear"] = np.allclose(al.widths(F3), (1 / 3, 1 / 3), rtol=1e-12)
    F9 = al.simple_compose(F3, F3, cp)
    res["widths_composed"] = np.allclose(al.widths(F9), (1 / 9, 1 / 9), rtol=1e-12)
    res["cone_composed"] = al.check_cone(F9, cp.squared())
    jr = al.jacobian_width_check(al.linear_map(10.0, 0.1), 1.0)
    res["jacobian_linear"] = jr.ok
    rng = np.random.default_rng(seed)
    fails = 0
    for i in range(pairs):
        q = 0.0 if i % 2 == 0 else 0.05
        F = al.random_cone_map(rng, cp, q)
        G = al.random_cone_map(rng, cp, q)
        fails += not al.check_cone(al.simple_compose(F, G, cp), cp.squared())
    res["cone_closure"] = fails == 0
    F0, F1, G = fold_example()
    Fp, Fm = al.parabolic_compose(F0, F1, G, fold_cone())
    res["parabolic_residual"] = max(al.branch_residual(Fp, F0, F1, G), al.branch_residual(Fm, F0, F1, G)) <= 1e-9
    res["parabolic_injective"] = al.injective_on_samples(Fp) and al.injective_on_samples(Fm)
    res["parabolic_jacobian"] = al.jacobian_width_check(Fp, 2.0).ok and al.jacobian_width_check(Fm, 2.0).ok
    return res


def fold_cone():
    return al.ConeParams(2.0, 1.1, 1.1, D0=5.0, b=2.0)


def fold_example():
    """F0 = F1 = (10x, y/10) around the fold with t = 0.04, a = 0.1, delta = 0.15."""
    R0 = al.IntervalPair((0.0, 1.0), (0.0, 1.0))
    chart_u = al.IntervalPair((-0.5, 0.5), (0.0, 1.0))
    chart_s = al.IntervalPair((-0.5, 0.5), (-0.5, 0.5))
    R2 = al.IntervalPair((0.0, 1.0), (-0.5, 0.5))
    F0 = al.AffineLikeMap(R0, chart_u, al.QuadraticRep((0.05, 0.1, 0.0), (0.15, 0.0, 0.1)))
    F1 = al.AffineLikeMap(chart_s, R2, al.QuadraticRep((0.0, 0.1, 0.0), (0.0, 0.0, 0.1)))
    G = al.FoldingModel(0.04, 0.1, 2, chart_u, chart_s)
    return F0, F1, G


def cmd_affine(args) -> int:
    if args.map_file:
        try:
            F = al.map_from_kv(open(args.map_file, encoding="utf-8").read())
            cp = al.ConeParams(args.lam, args.u0, args.v0)
        except (OSError, ValueError) as exc:
            raise InputError(str(exc)) from None
        wp, wq = al.widths(F)
        cone = al.check_cone(F, cp)
        dist = al.check_distortion(F, args.distortion_bound)
        print(f"widths      |P|={wp:.12g} |Q|={wq:.12g}")
        print(f"cone        {'PASS' if cone else 'FAIL'}")
        print(f"distortion  {'PASS' if dist else 'FAIL'} (bound {args.distortion_bound})")
        return 0 if cone and dist else 1
    res = affine_suite(args.pairs, args.seed)
    for k, v in res.items():
        print(f"{k:22s} {'PASS' if v else 'FAIL'}")
    if args.out_csv:
        write_csv(args.out_csv, "affine", _meta(args), ("check", "ok"), res.items())
    return 0 if all(res.values()) else 1


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stabledim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("region", help="areas of the D and PY regions and diagonal endpoints")
    s.add_argument("--resolution", type=int, default=4096)
    s.add_argument("--domain", choices=("thick", "square"), default="thick")
    s.add_argument("--out-csv")
    s.add_argument("--out-pgm")
    s.set_defaults(func=cmd_region)

    s = sub.add_parser("cover", help="dyadic cover of a disk image against the measure bound")
    s.add_argument("--map", default="", help="e.g. 'kind=diag K=4 L=2'")
    s.add_argument("--map-file")
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("--d", default="1,1.25,1.5,2")
    s.add_argument("--depth", type=int, default=8)
    s.add_argument("--samples-per-axis", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-csv")
    s.set_defaults(func=cmd_cover)

    s = sub.add_parser("dims", help="dimension conditions and expected dimension")
    s.add_argument("ds", type=float)
    s.add_argument("du", type=float)
    s.add_argument("--conservative", action="store_true")
    s.add_argument("--eigen", help="lambda_ps,mu_ps,lambda_pu,mu_pu")
    s.set_defaults(func=cmd_dims)

    s = sub.add_parser("tower", help="build and verify a tower for the standard family")
    s.add_argument("--lambda", dest="lam", type=float, default=2.0)
    s.add_argument("--eps", type=float, default=0.25)
    s.add_argument("--n-height", type=int, default=100)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--max-period", type=int, default=1)
    s.add_argument("--candidate-batch", type=int, default=16)
    s.add_argument("--cloud", type=int, default=40_000)
    s.add_argument("--grid", type=int, default=0, help="also export the surviving-cell field of V on a grid")
    s.add_argument("--out-prefix")
    s.set_defaults(func=cmd_tower)

    s = sub.add_parser("cascade", help="width cascade bounds and case analysis")
    s.add_argument("--widths", help="CSV with rows j,P,Q")
    s.add_argument("--synthetic", type=int, help="use an admissible synthetic cascade of depth K")
    s.add_argument("--d", type=float, default=1.5)
    s.add_argument("--ds", type=float, default=0.51)
    s.add_argument("--du", type=float, default=0.51)
    s.add_argument("--eps0", type=float, default=1e-5)
    s.add_argument("--tau", type=float, default=0.05)
    s.add_argument("--eta", type=float, default=1e-3)
    s.add_argument("--beta", type=float, default=1.9)
    s.add_argument("--beta-hat", type=float, default=1.3)
    s.add_argument("--C", type=float, default=1.0)
    s.add_argument("--out-csv")
    s.set_defaults(func=cmd_cascade)

    s = sub.add_parser("affine", help="affine-like map property suite")
    s.add_argument("--pairs", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--map-file", help="check a single map in key=value format")
    s.add_argument("--lambda", dest="lam", type=float, default=2.0)
    s.add_argument("--u0", type=float, default=1.2)
    s.add_argument("--v0", type=float, default=1.2)
    s.add_argument("--distortion-bound", type=float, default=1.0)
    s.add_argument("--out-csv")
    s.set_defaults(func=cmd_affine)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
