"""Command-line front end.

Subcommands: norm, polar, schur-log, path, jiangsu (params|phi|verify),
uhf (demo), intertwine, encode, decode.  Every command prints one JSON
certificate to stdout with exact dyadic/rational strings only.

Exit codes: 0 success, 2 parse/usage error, 3 infeasible (explicit
budget/stage limits), 4 certification failure (a rejected candidate or a
failed certificate check).

Environment overrides: OPALG_DETERMINISTIC=1 omits wall-clock timings,
OPALG_SUP_BOX_BUDGET caps branch-and-bound boxes, OPALG_ENUM_BUDGET caps
enumeration searches.
"""

import argparse
import os
import sys
import time

from gmpy2 import mpq

from . import certificates
from .calculus import AlmostUnitary, omega_n, unitary_path
from .dyadic import Dyadic
from .errors import (
    BudgetExhaustedError,
    CertificationError,
    InfeasibleError,
    OpalgError,
)
from .expcert import schur_log
from .matrices import read_matrix, write_matrix
from .normcert import matrix_norm
from .words import AstError, decode_poly, encode_poly, parse_ast, poly_to_ast

EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_CERT = 4


def _env_int(name, default):
    val = os.environ.get(name)
    return default if not val else int(val)


def parse_descriptor(desc):
    """Presentation descriptors: matrix:n, fn:n, dimdrop:p,q, jiangsu,
    uhf:2^inf, tensor(D1,D2), limit(diagdouble:n)."""
    from .presentations import (
        dimdrop_presentation,
        function_presentation,
        matrix_doubling_limit,
        matrix_presentation,
        tensor_presentation,
    )

    desc = desc.strip()
    if desc.startswith("matrix:"):
        return matrix_presentation(int(desc.split(":")[1]))
    if desc.startswith("fn:"):
        return function_presentation(int(desc.split(":")[1]))
    if desc.startswith("dimdrop:"):
        p, q = desc.split(":")[1].split(",")
        return dimdrop_presentation(int(p), int(q))
    if desc == "jiangsu":
        from .jiangsu import jiangsu_presentation

        return jiangsu_presentation()
    if desc.startswith("uhf:"):
        label = desc.split(":", 1)[1]
        if label != "2^inf":
            raise OpalgError(
                f"only uhf:2^inf is wired for numerics (got {label!r}); general "
                "supernatural numbers are data-model only"
            )
        from .uhf import uhf_presentation

        return uhf_presentation()
    if desc.startswith("tensor(") and desc.endswith(")"):
        inner = desc[len("tensor("):-1]
        depth = 0
        for i, ch in enumerate(inner):
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            elif ch == "," and depth == 0:
                return tensor_presentation(
                    parse_descriptor(inner[:i]), parse_descriptor(inner[i + 1:])
                )
        raise OpalgError(f"malformed tensor descriptor {desc!r}")
    if desc.startswith("limit(diagdouble:") and desc.endswith(")"):
        return matrix_doubling_limit(int(desc[len("limit(diagdouble:"):-1]))
    raise OpalgError(f"unknown presentation descriptor {desc!r}")


def _emit(rec):
    sys.stdout.write(certificates.render(rec))


def cmd_norm(args):
    pres = parse_descriptor(args.presentation)
    if args.code is not None:
        poly = decode_poly(int(args.code))
    else:
        poly = parse_ast(args.point)
    t0 = time.monotonic()
    iv = pres.norm_of_poly(poly, args.prec)
    payload = {
        "presentation": pres.descriptor,
        "code": str(encode_poly(poly)),
        "k": args.prec,
        "lo": str(iv.lo),
        "hi": str(iv.hi),
        "method": "certified-norm-oracle",
        "budget": {"sup_boxes": _env_int("OPALG_SUP_BOX_BUDGET", 10 ** 5)},
    }
    _emit(
        certificates.make_certificate(
            "norm", payload, timings={"wall": round(time.monotonic() - t0, 6)}
        )
    )
    return 0


def cmd_polar(args):
    with open(args.matrix) as fh:
        a = read_matrix(fh.read())
    eps = mpq(args.eps) if args.eps else mpq(1, 4)
    t0 = time.monotonic()
    au = AlmostUnitary(a, eps)
    w = omega_n(au, args.n)
    payload = {
        "n": args.n,
        "eps": certificates_str(eps),
        "result_matrix": write_matrix(w),
        "statement": f"||omega(a) - result|| < 2^-{args.n} (certified Taylor tail)",
    }
    _emit(
        certificates.make_certificate(
            "polar", payload, timings={"wall": round(time.monotonic() - t0, 6)}
        )
    )
    return 0


def certificates_str(q):
    q = mpq(q)
    return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)


def cmd_schur_log(args):
    with open(args.matrix) as fh:
        u = read_matrix(fh.read())
    t0 = time.monotonic()
    sl = schur_log(u, args.prec)
    h_entries = []
    for row in sl.h.rows:
        out_row = []
        for x in row:
            out_row.append(
                [
                    str(Dyadic.from_mpfr(x.re.lo)),
                    str(Dyadic.from_mpfr(x.re.hi)),
                    str(Dyadic.from_mpfr(x.im.lo)),
                    str(Dyadic.from_mpfr(x.im.hi)),
                ]
            )
        h_entries.append(out_row)
    payload = {
        "k": args.prec,
        "theta_2pi_fraction": certificates_str(sl.theta_frac),
        "exp_defect_bound": str(sl.exp_defect),
        "h_norm_bound": str(sl.norm_bound),
        "h_enclosure": h_entries,
    }
    _emit(
        certificates.make_certificate(
            "schur-log", payload, timings={"wall": round(time.monotonic() - t0, 6)}
        )
    )
    return 0


def cmd_path(args):
    with open(args.u) as fh:
        u = read_matrix(fh.read())
    with open(args.v) as fh:
        v = read_matrix(fh.read())
    t = mpq(args.t)
    if t < 0 or t > 1:
        raise OpalgError("path parameter t must lie in [0,1]")
    t0 = time.monotonic()
    path = unitary_path(u, v, args.prec)
    enc = path.eval(t, args.prec)
    from .intervalmat import IntervalMatrix

    ident = IntervalMatrix.identity(enc.n, enc.prec)
    defect = (enc.adjoint() * enc - ident).norm_upper()
    payload = {
        "t": certificates_str(t),
        "k": args.prec,
        "unitarity_defect_bound": str(defect),
        "max_entry_width": str(Dyadic.from_mpfr(enc.max_width())),
    }
    _emit(
        certificates.make_certificate(
            "path", payload, timings={"wall": round(time.monotonic() - t0, 6)}
        )
    )
    return 0


def cmd_jiangsu(args):
    from . import jiangsu

    if args.sub == "params":
        st = jiangsu.stage_params(args.stage)
        payload = {"stage": args.stage, "record": st.as_record()}
        _emit(certificates.make_certificate("jiangsu params", payload))
        return 0
    if args.sub == "phi":
        poly = parse_ast(args.point)
        t = mpq(args.t)
        t0 = time.monotonic()
        cf = jiangsu.phi(0, poly, args.prec)
        from .rint import RealInterval

        enc = cf.eval_box(RealInterval.from_mpq(t, max(64, args.prec + 16)), args.prec)
        payload = {
            "stage": 0,
            "t": certificates_str(t),
            "k": args.prec,
            "image_norm_bound": str(enc.norm_upper()),
            "fiber_dim": enc.n,
        }
        _emit(
            certificates.make_certificate(
                "jiangsu phi", payload, timings={"wall": round(time.monotonic() - t0, 6)}
            )
        )
        return 0
    if args.sub == "verify":
        t0 = time.monotonic()
        report = jiangsu_verify_suite(
            args.stage, grid=args.grid, pairs=args.pairs, tol_exp=10
        )
        _emit(
            certificates.make_certificate(
                "jiangsu verify",
                report,
                timings={"wall": round(time.monotonic() - t0, 6)},
            )
        )
        return 0
    raise OpalgError(f"unknown jiangsu subcommand {args.sub!r}")


def jiangsu_verify_suite(stage, grid=3, pairs=2, tol_exp=10):
    """Homomorphism / isometry / boundary suite for the stage map."""
    from . import jiangsu
    from .funcalg import _midrad_boundary_distance, sup_norm
    from .words import StarPoly

    if stage != 0:
        raise InfeasibleError(
            f"jiangsu verify: stage {stage} matrix numerics are beyond the "
            f"desk-scale budget (fiber dimension "
            f"{jiangsu.stage_params(stage).p_next * jiangsu.stage_params(stage).q_next})"
        )
    st = jiangsu.stage_params(0)
    p, q = st.p, st.q
    gens = [StarPoly.gen(i) for i in range(p + q)]
    grid_pts = [mpq(i + 1, grid + 1) for i in range(grid)]
    worst_mult = Dyadic(0)
    worst_adj = Dyadic(0)
    worst_unital = Dyadic(0)
    for t in grid_pts:
        cert = jiangsu.PhiPointCertificates(0, t, tol_exp + 4)
        for x in gens[:pairs]:
            for y in gens[:pairs]:
                worst_mult = max(worst_mult, cert.mult_defect_bound(x, y))
            worst_adj = max(worst_adj, cert.adjoint_defect_bound(x))
        worst_unital = max(worst_unital, cert.unital_defect_bound())
    worst_boundary = Dyadic(0)
    for gi, g in enumerate(gens):
        for endpoint in (0, 1):
            val = jiangsu.phi_endpoint_exact(0, g, endpoint)
            d = _midrad_boundary_distance(val, endpoint, st.p_next, st.q_next)
            worst_boundary = max(worst_boundary, d)
    # isometry on one generator
    cf = jiangsu.phi(0, gens[0], tol_exp + 2)
    s_img = sup_norm(cf, 8)
    s_src = jiangsu.dd_norm(p, q, gens[0], 8)
    iso_gap = max(
        abs(s_img.lo - s_src.hi).as_mpq(), abs(s_img.hi - s_src.lo).as_mpq()
    )
    tol = mpq(1, 1 << tol_exp)
    return {
        "stage": stage,
        "grid": [certificates_str(t) for t in grid_pts],
        "mult_defect_bound": str(worst_mult),
        "adjoint_defect_bound": str(worst_adj),
        "unital_defect_bound": str(worst_unital),
        "boundary_distance_bound": str(worst_boundary),
        "isometry_gap_bound": certificates_str(iso_gap),
        "tolerance": f"2^-{tol_exp}",
        "pass": bool(
            worst_mult.as_mpq() <= tol
            and worst_adj.as_mpq() <= tol
            and worst_unital.as_mpq() <= tol
            and worst_boundary.as_mpq() <= tol
        ),
    }


def cmd_uhf(args):
    if args.sub != "demo":
        raise OpalgError("uhf subcommand must be 'demo'")
    from .intertwine import UhfSelfAbsorption, _norm_enc

    t0 = time.monotonic()
    system = UhfSelfAbsorption()
    system.set_common_stage(args.stages)
    from .uhf import SparseRational

    per_stage = []
    n_legs = 1
    for s in range(1, args.stages + 1):
        perm = system._flip_permutation_at_common(n_legs)
        w = SparseRational(
            1 << (system.common[0] + system.common[1]),
            {(pi, i): 1 for i, pi in enumerate(perm)},
        )
        wd = w.adjoint() * w - SparseRational.identity(w.n)
        unitary_defect = _norm_enc(wd, args.prec)
        # commutation with a stage-1 phi(a) and absorption of a 1 (x) y
        a = system.realize_b(system.phi_poly(system.a_point(1)))
        comm = _norm_enc(w * a - a * w, args.prec)
        b = system.realize_b(system.b_point(1))
        conj = w.adjoint() * b * w
        _poly, phi_el = system.pullback(conj, args.prec)
        absorb = _norm_enc(conj - phi_el, args.prec)
        per_stage.append(
            {
                "supplier_index": n_legs,
                "unitarity": {"lo": str(unitary_defect.lo), "hi": str(unitary_defect.hi)},
                "commutation": {"lo": str(comm.lo), "hi": str(comm.hi)},
                "absorption": {"lo": str(absorb.lo), "hi": str(absorb.hi)},
            }
        )
        n_legs *= 2
    payload = {
        "stages": args.stages,
        "k": args.prec,
        "common_stage_pair": list(system.common),
        "per_stage": per_stage,
    }
    _emit(
        certificates.make_certificate(
            "uhf demo", payload, timings={"wall": round(time.monotonic() - t0, 6)}
        )
    )
    return 0


def cmd_intertwine(args):
    import json

    with open(args.config) as fh:
        cfg = json.load(fh)
    stages = int(cfg.get("stages", 3))
    supplier_name = cfg.get("supplier", "uhf-legs")
    enum_budget = int(cfg.get("enum_budget", _env_int("OPALG_ENUM_BUDGET", 256)))
    if cfg.get("phi", "id-tensor-unit") != "id-tensor-unit":
        raise OpalgError("built-in maps: only 'id-tensor-unit'")
    from .intertwine import UhfSelfAbsorption, run_engine
    from .uhf import HalfFlipSupplier, IdentityOnlySupplier

    if supplier_name == "uhf-legs":
        supplier = HalfFlipSupplier()
    elif supplier_name == "identity-only":
        supplier = IdentityOnlySupplier()
    elif supplier_name == "enumerate":
        supplier = None
    else:
        raise OpalgError(f"unknown supplier {supplier_name!r}")
    t0 = time.monotonic()
    system = UhfSelfAbsorption(supplier=supplier) if supplier else UhfSelfAbsorption()
    if supplier is None:
        system.supplier_candidates = lambda state, entry: ()
    result = run_engine(system, stages, enum_budget=enum_budget)
    payload = {
        "A": cfg.get("A", "uhf:2^inf"),
        "B": cfg.get("B", "tensor(uhf:2^inf,uhf:2^inf)"),
        "phi": "id-tensor-unit",
        "supplier": supplier_name,
        "stages": stages,
        "transcript": result.transcript(
            include_timings=not certificates.deterministic_mode()
        ),
    }
    _emit(
        certificates.make_certificate(
            "intertwine", payload, timings={"wall": round(time.monotonic() - t0, 6)}
        )
    )
    return 0


def cmd_encode(args):
    poly = parse_ast(args.ast)
    _emit(
        certificates.make_certificate(
            "encode", {"code": str(encode_poly(poly)), "ast": poly_to_ast(poly)}
        )
    )
    return 0


def cmd_decode(args):
    poly = decode_poly(int(args.code))
    _emit(
        certificates.make_certificate(
            "decode", {"code": args.code, "ast": poly_to_ast(poly)}
        )
    )
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="opalg",
        description="certified operator-algebra computations with dyadic "
        "interval certificates",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("norm", help="certified norm of a rational point")
    p.add_argument("--presentation", required=True)
    p.add_argument("--point", help="StarPoly AST, e.g. '(gen 0)'")
    p.add_argument("--code", help="alternatively, a numeric code")
    p.add_argument("--prec", type=int, required=True)
    p.set_defaults(fn=cmd_norm)

    p = sub.add_parser("polar", help="Taylor polar approximant omega_n(a)")
    p.add_argument("--matrix", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", help="almost-unitarity witness (default 1/4)")
    p.set_defaults(fn=cmd_polar)

    p = sub.add_parser("schur-log", help="certified branch logarithm of a rational unitary")
    p.add_argument("--matrix", required=True)
    p.add_argument("--prec", type=int, required=True)
    p.set_defaults(fn=cmd_schur_log)

    p = sub.add_parser("path", help="evaluate the exponential path u ~> v")
    p.add_argument("--u", required=True)
    p.add_argument("--v", required=True)
    p.add_argument("--t", required=True)
    p.add_argument("--prec", type=int, required=True)
    p.set_defaults(fn=cmd_path)

    p = sub.add_parser("jiangsu", help="Jiang-Su stage data and maps")
    jp = p.add_subparsers(dest="sub", required=True)
    pp = jp.add_parser("params")
    pp.add_argument("--stage", type=int, required=True)
    pp.set_defaults(fn=cmd_jiangsu)
    pp = jp.add_parser("phi")
    pp.add_argument("--point", required=True)
    pp.add_argument("--t", required=True)
    pp.add_argument("--prec", type=int, required=True)
    pp.set_defaults(fn=cmd_jiangsu)
    pp = jp.add_parser("verify")
    pp.add_argument("--stage", type=int, required=True)
    pp.add_argument("--grid", type=int, default=3)
    pp.add_argument("--pairs", type=int, default=2)
    pp.set_defaults(fn=cmd_jiangsu)

    p = sub.add_parser("uhf", help="UHF supplier sanity suite")
    up = p.add_subparsers(dest="sub", required=True)
    pp = up.add_parser("demo")
    pp.add_argument("--stages", type=int, default=3)
    pp.add_argument("--prec", type=int, default=30)
    pp.set_defaults(fn=cmd_uhf)

    p = sub.add_parser("intertwine", help="run the staged intertwining engine")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_intertwine)

    p = sub.add_parser("encode", help="AST -> code")
    p.add_argument("--ast", required=True)
    p.set_defaults(fn=cmd_encode)

    p = sub.add_parser("decode", help="code -> AST")
    p.add_argument("--code", required=True)
    p.set_defaults(fn=cmd_decode)

    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code not in (0,) else 0
    try:
        return args.fn(args)
    except (AstError, OpalgError) as exc:
        if isinstance(exc, InfeasibleError):
            _emit({"error": "infeasible", "detail": str(exc)})
            return EXIT_INFEASIBLE
        if isinstance(exc, (CertificationError, BudgetExhaustedError)):
            rec = {"error": "certification-failure", "detail": str(exc)}
            if isinstance(exc, BudgetExhaustedError) and exc.best_margins:
                rec["best_margins"] = exc.best_margins
            _emit(rec)
            return EXIT_CERT
        _emit({"error": "usage", "detail": str(exc)})
        return EXIT_PARSE
    except FileNotFoundError as exc:
        _emit({"error": "usage", "detail": str(exc)})
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
