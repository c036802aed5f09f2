"""
rifscope CLI

    rifscope analyze rif.json                    # singularities, contact orders, Bézout audit
    rifscope analyze --fixture mbm -o report.json
    rifscope portrait --fixture faveform --levels 8 -o portrait.csv
    rifscope construct embed r.json -o rif.json
    rifscope construct glue --fixture faveform
    rifscope construct transfer A.json Y.json --cayley alpha
    rifscope construct interlace --fixture faveform --trials 2000
    rifscope verify --fixture exceptional --suite all
    rifscope fixtures

Every subcommand takes --config FILE (default: rifscope.yaml if present) and
--verbose.  Exit codes: 0 ok, 1 invalid input, 2 numerical failure,
3 invariant violation (verify).
"""
from __future__ import annotations

import argparse
import logging
import sys

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERIC = 2
EXIT_VIOLATION = 3


def _config(args):
    from rifscope.runner import load_config
    cfg = load_config(args.config)
    for key in ("grid", "probes", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "seed", None) is not None:
        cfg["_seed"] = args.seed
    return cfg


def _rif(args, cfg, validated: bool = True):
    from rifscope.runner import load_rif
    return load_rif(getattr(args, "rif", None), getattr(args, "fixture", None), cfg, validated)


def cmd_analyze(args):
    """Analyze one RIF and write the report."""
    from rifscope.runner import analyze, write_json

    cfg = _config(args)
    f = _rif(args, cfg)
    report = analyze(f, cfg, verbose=args.verbose)
    write_json(report, args.out or cfg["_report_path"])
    if not args.quiet:
        _print_analysis(report, file=sys.stderr)
    return EXIT_OK


def _exceptional_candidates(f, points, cfg, verbose: bool) -> list[complex]:
    """Probe values that only sit in disagreeing probe pairs, over every singular point."""
    from rifscope.contact import contact_order_at
    from rifscope.errors import NumericalFailure

    found = []
    for sp in points:
        try:
            info = contact_order_at(f, sp.tau, cfg["probes"], sp.lambda0,
                                    dps=cfg["contact"]["extended_dps"])
        except NumericalFailure as e:
            if verbose:
                print(f"[rifscope] no contact cross-check at τ = ({sp.tau[0]:.4g}, {sp.tau[1]:.4g}): {e}",
                      file=sys.stderr)
            continue
        found.extend(info["exceptional_candidate"])
    return found


def cmd_portrait(args):
    """Trace level curves and write CSV (default) or JSON."""
    from rifscope.levelcurves import level_values, portrait, portrait_to_csv, portrait_to_json
    from rifscope.rif import singularities
    from rifscope.runner import write_json

    cfg = _config(args)
    f = _rif(args, cfg)
    tol = cfg["tolerances"]
    points = singularities(f, tol=tol["unimodular"], dedup=tol["singular_dedup"])
    exceptional = [] if args.skip_exceptional else _exceptional_candidates(f, points, cfg, args.verbose)
    levels = level_values(args.levels)
    for e in exceptional:
        if all(abs(e - lam) > 1e-9 for lam in levels):
            levels.append(e)
    result = portrait(f, levels, grid=cfg["grid"], singular_points=points, exceptional=exceptional)
    if args.out and args.out.endswith(".json"):
        write_json(portrait_to_json(result), args.out)
    elif args.out:
        portrait_to_csv(result, args.out)
    else:
        sys.stdout.write(portrait_to_csv(result))
    if args.verbose:
        for c in result.curves:
            print(f"[rifscope] λ = {c.lam:.4g}: {len(c.branches)} branch(es), "
                  f"{len(c.verticals)} vertical, {c.kind}", file=sys.stderr)
    return EXIT_OK


def cmd_construct(args):
    from rifscope import construct
    from rifscope.runner import load_poly, read_json, write_json

    cfg = _config(args)
    v = cfg["validate"]
    sampling = {"quasi": v["quasi_random"], "seed": cfg["_seed"]}

    if args.kind == "embed":
        f = construct.embed(load_poly(args.r), v["samples"], **sampling)
    elif args.kind == "glue":
        f = construct.glue(_rif(args, cfg), v["samples"], **sampling)
    elif args.kind == "transfer":
        f = construct.rif_from_transfer(read_json(args.A), read_json(args.Y), args.cayley,
                                        v["samples"], seed=cfg["_seed"])
    else:
        R, Q = construct.half_plane_pair(_rif(args, cfg))
        trials = args.trials if args.trials is not None else cfg["interlace"]["trials"]
        verdict = construct.interlace_2d(R, Q, trials, cfg["_seed"])
        write_json({**verdict.to_dict(), "seed": cfg["_seed"]}, args.out)
        return EXIT_OK if verdict.is_pick else EXIT_VIOLATION

    write_json(f.to_json(), args.out)
    if args.verbose:
        print(f"[rifscope] built p of bidegree {f.bidegree}, η = {f.eta:.6g}, "
              f"monomial {f.monomial}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args):
    """Analyze, then evaluate the invariant suites; exit 3 on any violation."""
    from rifscope.judgement.engine import run_suites
    from rifscope.runner import analyze, write_json

    cfg = _config(args)
    f = _rif(args, cfg)
    report = analyze(f, cfg, verbose=args.verbose)
    results = run_suites(report, args.suite)
    write_json(results, args.out)
    if not args.quiet:
        _print_verify(results, file=sys.stderr)
    return EXIT_OK if results["summary"]["satisfied"] == results["summary"]["total"] else EXIT_VIOLATION


def cmd_fixtures(args):
    from rifscope.construct import catalog_names
    for name in catalog_names():
        print(name)
    return EXIT_OK


# ── Output helpers ─────────────────────────────────────────────────────────────

def _print_analysis(report: dict, file=sys.stderr) -> None:
    print(f"{report['rif_id']}: {len(report['singular_points'])} singular point(s)", file=file)
    for sp in report["singular_points"]:
        (a, b), (c, d) = sp["tau"]
        print(f"  τ = ({a:+.4g}{b:+.4g}i, {c:+.4g}{d:+.4g}i)  K = {sp['K_tau']}  "
              f"N = {sp['N_tau']}  branches {sp['branch_orders']}", file=file)
    if report["global_K"] is not None:
        print(f"  global K = {report['global_K']}, derivatives in Lᵖ for p < {report['p_star']:.4g}",
              file=file)
    failed = [c["name"] for c in report["identity_checks"] if not c["pass"]]
    if failed:
        print(f"  failed checks: {', '.join(failed)}", file=file)


def _print_verify(results: dict, file=sys.stderr) -> None:
    for r in results["results"]:
        mark = "✓" if r["satisfied"] else "✗"
        print(f"{mark} {r['suite']:<13} {r['score']:.0%} of {len(r['constraints'])} checks", file=file)
        for label in r["violations"]:
            print(f"    violated: {label}", file=file)


# ── Entry point ────────────────────────────────────────────────────────────────

def _add_source(p) -> None:
    p.add_argument("rif", nargs="?", metavar="RIF_JSON", help="Rif JSON file ('-' for stdin)")
    p.add_argument("--fixture", metavar="NAME", help="Use a catalog fixture instead of a file")


def _setup_logging(verbose: bool) -> None:
    if not verbose:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("[rifscope] %(message)s"))
    log = logging.getLogger("rifscope")
    log.addHandler(handler)
    log.setLevel(logging.DEBUG)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="Config file (default: rifscope.yaml in current directory)")
    common.add_argument("--verbose", action="store_true", help="Print progress and debug logs to stderr")

    parser = argparse.ArgumentParser(
        prog="rifscope",
        description="Rational inner functions on the bidisk: singularities, level curves, contact orders.",
        epilog=(
            "Quickstart:\n"
            "  rifscope fixtures                   list the shipped examples\n"
            "  rifscope analyze --fixture mbm      full analysis report"
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # ── analyze ───────────────────────────────────────────────────────────────
    p_an = sub.add_parser("analyze", parents=[common], help="Singularities, contact orders, Bézout audit")
    _add_source(p_an)
    p_an.add_argument("--grid", type=int, metavar="N", help="θ₂ samples per level curve")
    p_an.add_argument("--probes", type=int, metavar="K", help="Level values probed around λ₀")
    p_an.add_argument("--seed", type=int, metavar="S")
    p_an.add_argument("-o", "--out", metavar="FILE", help="Report JSON (default: stdout)")
    p_an.add_argument("--quiet", action="store_true", help="No summary on stderr")
    p_an.set_defaults(func=cmd_analyze)

    # ── portrait ──────────────────────────────────────────────────────────────
    p_po = sub.add_parser("portrait", parents=[common], help="Trace unimodular level curves")
    _add_source(p_po)
    p_po.add_argument("--levels", type=int, required=True, metavar="N",
                      help="Trace λ = e^{iπ(2k+1)/N}, k = 0..N-1")
    p_po.add_argument("--grid", type=int, metavar="M")
    p_po.add_argument("--probes", type=int, metavar="K", help="Level values probed for the exceptional curve")
    p_po.add_argument("--skip-exceptional", action="store_true",
                      help="Do not run the contact cross-check that flags the exceptional curve")
    p_po.add_argument("-o", "--out", metavar="FILE", help="portrait.csv or portrait.json (default: CSV on stdout)")
    p_po.set_defaults(func=cmd_portrait)

    # ── construct ─────────────────────────────────────────────────────────────
    p_co = sub.add_parser("construct", help="Build RIFs: embed, glue, transfer, interlace")
    kinds = p_co.add_subparsers(dest="kind", required=True)
    k_embed = kinds.add_parser("embed", parents=[common], help="φ with a level set equal to 𝒵_r")
    k_embed.add_argument("r", metavar="R_JSON", help="Essentially symmetric polynomial JSON")
    k_glue = kinds.add_parser("glue", parents=[common], help="Glue the ±i level curves of a RIF")
    _add_source(k_glue)
    k_tr = kinds.add_parser("transfer", parents=[common], help="RIF from a resolvent entry")
    k_tr.add_argument("A", metavar="A_JSON", help="Self-adjoint matrix (rows; entries number or [re, im])")
    k_tr.add_argument("Y", metavar="Y_JSON", help="0/1 diagonal (list or matrix)")
    k_tr.add_argument("--cayley", choices=["alpha", "beta"], default="alpha")
    k_in = kinds.add_parser("interlace", parents=[common], help="Pick test of the half-plane pair")
    _add_source(k_in)
    k_in.add_argument("--trials", type=int, metavar="N")
    for k in (k_embed, k_glue, k_tr, k_in):
        k.add_argument("-o", "--out", metavar="FILE", help="Output JSON (default: stdout)")
        k.set_defaults(func=cmd_construct)

    # ── verify ────────────────────────────────────────────────────────────────
    p_ve = sub.add_parser("verify", parents=[common], help="Check the structural invariants")
    _add_source(p_ve)
    p_ve.add_argument("--suite", nargs="+", default=["all"],
                      choices=["eco", "bezout", "sum-identity", "bijection", "all"])
    p_ve.add_argument("-o", "--out", metavar="FILE", help="Verify JSON (default: stdout)")
    p_ve.add_argument("--quiet", action="store_true")
    p_ve.set_defaults(func=cmd_verify)

    # ── fixtures ──────────────────────────────────────────────────────────────
    p_fx = sub.add_parser("fixtures", parents=[common], help="List catalog fixtures")
    p_fx.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    from rifscope.errors import NumericalFailure

    args = build_parser().parse_args(argv)
    _setup_logging(getattr(args, "verbose", False))
    try:
        return args.func(args)
    except NumericalFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
