"""
Configuration loading and the analysis pipeline.

Config file schema (rifscope.yaml, optional; every key has a default):

    grid: 4096                 # θ₂ samples per level curve
    probes: 8                  # level values probed around λ₀
    seed: 24301                # shears, quasi-random samples, interlacing slices
    tolerances:
      unimodular: 1.0e-8
      singular_dedup: 1.0e-7
    validate:
      samples: 200
      quasi_random: 100000
      witness_margin: 1.0e-9
    contact:
      extended_dps: 80
      identity_pairs: 2        # probe pairs fed to the sum identity per singularity
    intersect:
      radii: [1.0e-3, 1.0e-4, 1.0e-5]
      max_shears: 5
    interlace:
      trials: 10000
    output:
      report: report.json      # omitted → stdout

`analyze` runs singularities → contact orders → multiplicities → Bézout audit
→ identity checks, then traces one level curve per singular point on `grid`
for the closure and slice checks, and returns a "rifscope.report.v1" dict.
"""
from __future__ import annotations

import copy
import json
import sys
from pathlib import Path

from rifscope.rif import DEFAULT_SEED, max_workers

CONFIG_NAMES = ["rifscope.yaml", ".rifscope.yaml", "rifscope.yml"]

DEFAULTS: dict = {
    "grid": 4096,
    "probes": 8,
    "seed": DEFAULT_SEED,
    "tolerances": {"unimodular": 1e-8, "singular_dedup": 1e-7},
    "validate": {"samples": 200, "quasi_random": 100000, "witness_margin": 1e-9},
    "contact": {"extended_dps": 80, "identity_pairs": 2},
    "intersect": {"radii": [1e-3, 1e-4, 1e-5], "max_shears": 5},
    "interlace": {"trials": 10000},
    "output": {"report": None},
}

_POSITIVE_INTS = [
    ("grid",), ("probes",), ("validate", "samples"), ("contact", "extended_dps"),
    ("intersect", "max_shears"),
]
_NON_NEGATIVE_INTS = [("validate", "quasi_random"), ("contact", "identity_pairs"), ("interlace", "trials")]
_POSITIVE_FLOATS = [
    ("tolerances", "unimodular"), ("tolerances", "singular_dedup"), ("validate", "witness_margin"),
]


# ── Config loading ─────────────────────────────────────────────────────────────

def load_config(path: "str | Path | None" = None) -> dict:
    """
    Load and normalise a rifscope.yaml config.

    Without a path the current directory is searched and a missing file means
    plain defaults.  An explicit path that does not exist raises
    FileNotFoundError.
    """
    import yaml

    candidates = [path] if path else CONFIG_NAMES
    config_path = next((Path(c) for c in candidates if Path(c).exists()), None)

    if config_path is None:
        if path:
            raise FileNotFoundError(
                f"No rifscope config at {path}.\n"
                f"Omit --config to run with defaults, or create it (see rifscope.yaml in the repo)."
            )
        return _normalise_config({}, Path.cwd())

    with open(config_path) as f:
        raw = yaml.safe_load(f) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"{config_path}: top level must be a mapping, got {type(raw).__name__}.")
    cfg = _normalise_config(raw, config_path.parent)
    cfg["_config_path"] = str(config_path)
    return cfg


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        name = f"{where}{key}"
        if key not in base:
            raise ValueError(f"Unknown config key '{name}'.  Known keys: {', '.join(sorted(base))}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ValueError(f"Config key '{name}' must be a mapping.")
            out[key] = _merge(base[key], value, f"{name}.")
        else:
            out[key] = value
    return out


def _lookup(cfg: dict, keys: tuple):
    node = cfg
    for k in keys:
        node = node[k]
    return node


def _normalise_config(raw: dict, base_dir: Path) -> dict:
    """Merge over DEFAULTS, check types and ranges, add derived _ keys."""
    cfg = _merge(DEFAULTS, raw)

    for keys in _POSITIVE_INTS + _NON_NEGATIVE_INTS:
        v = _lookup(cfg, keys)
        low = 1 if keys in _POSITIVE_INTS else 0
        if isinstance(v, bool) or not isinstance(v, int) or v < low:
            raise ValueError(f"Config key '{'.'.join(keys)}' must be an integer ≥ {low}, got {v!r}.")
    for keys in _POSITIVE_FLOATS:
        v = _lookup(cfg, keys)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
            raise ValueError(f"Config key '{'.'.join(keys)}' must be a positive number, got {v!r}.")
    radii = cfg["intersect"]["radii"]
    if not (isinstance(radii, list) and radii and all(isinstance(r, (int, float)) and r > 0 for r in radii)):
        raise ValueError(f"Config key 'intersect.radii' must be a list of positive numbers, got {radii!r}.")
    if isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int):
        raise ValueError(f"Config key 'seed' must be an integer, got {cfg['seed']!r}.")

    cfg["_seed"] = cfg["seed"]
    cfg["_threads"] = max_workers()
    cfg["_base_dir"] = base_dir
    report = cfg["output"]["report"]
    cfg["_report_path"] = _resolve_output_path(report, base_dir)
    return cfg


def _resolve_output_path(path: "str | Path | None", base_dir: Path) -> "str | None":
    if not path:
        return None
    p = Path(path)
    return str(p if p.is_absolute() else base_dir / p)


def _log(verbose: bool, msg: str) -> None:
    if verbose:
        print(f"[rifscope] {msg}", file=sys.stderr)


# ── Inputs ─────────────────────────────────────────────────────────────────────

def read_json(path: "str | Path") -> dict:
    """Parse a JSON file; '-' reads stdin.  Malformed JSON is a ValueError."""
    try:
        if str(path) == "-":
            return json.load(sys.stdin)
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: not valid JSON ({e}).") from e


def load_rif(source: "str | Path | None" = None, fixture: str | None = None,
             cfg: dict | None = None, validated: bool = True):
    """A Rif from a JSON file or a catalog fixture, certified with the config's sampling."""
    from rifscope.construct import catalog
    from rifscope.rif import Rif, validate
    from rifscope.schema import validate_rif

    cfg = cfg or load_config()
    if fixture:
        f = catalog(fixture)
    elif source:
        doc = read_json(source)
        validate_rif(doc)
        f = Rif.from_json(doc)
        if not f.name:
            f.name = Path(str(source)).stem
    else:
        raise ValueError("Give a Rif JSON file or --fixture NAME.")
    if not validated:
        return f
    v = cfg["validate"]
    return validate(f.p, f.eta, f.monomial, v["samples"], quasi=v["quasi_random"],
                    seed=cfg["_seed"], margin=v["witness_margin"], name=f.name)


def load_poly(source: "str | Path"):
    from rifscope.poly2 import from_json
    from rifscope.schema import document_kind

    doc = read_json(source)
    if document_kind(doc) != "poly":
        raise ValueError(f"{source}: expected a polynomial document, got a Rif.")
    return from_json(doc)


def write_json(doc: dict, path: "str | Path | None" = None) -> None:
    text = json.dumps(doc, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# ── Analysis pipeline ──────────────────────────────────────────────────────────

CLOSURE_TOL = 1e-3
BLASCHKE_TOL = 1e-9
BLASCHKE_OFFSET = 0.05


def _pair(w) -> list[float]:
    w = complex(w)
    return [w.real, w.imag]


def _identity_checks(f, k: int, sp, info: dict, cfg: dict, verbose: bool, cache) -> list[dict]:
    from rifscope.contact import branch_bijection_check, default_probes
    from rifscope.errors import NumericalFailure, VerticalComponent
    from rifscope.intersect import co_vs_im_bound, contact_sum_identity

    checks = []
    bound = co_vs_im_bound(f, sp.tau, info["per_branch"])
    checks.append({
        "name": "bound",
        "pass": bound["holds"],
        "detail": {"tau_index": k, "N": bound["N"], "bound": bound["bound"], "orders": bound["orders"]},
    })

    probes = default_probes(sp.lambda0, cfg["probes"])
    pairs = [(probes[2 * j], probes[2 * j + 1]) for j in range(len(probes) // 2)]
    for mu, nu in pairs[: cfg["contact"]["identity_pairs"]]:
        detail = {"tau_index": k, "mu": _pair(mu), "nu": _pair(nu)}
        try:
            res = contact_sum_identity(f, sp.tau, mu, nu, cache=cache)
        except VerticalComponent as e:
            _log(verbose, f"  sum identity skipped: {e}")
            detail["skipped"] = str(e)
            checks.append({"name": "sum-identity", "pass": True, "detail": detail})
            continue
        detail.update(N=res["N"], sum_kappa=res["sum_kappa"], kappas=res["kappas"])
        checks.append({"name": "sum-identity", "pass": res["match"], "detail": detail})

        try:
            ok, diag = branch_bijection_check(f, sp.tau, mu, nu, cache=cache)
        except NumericalFailure as e:
            ok, diag = False, {"failing": [str(e)]}
        diag = {key: diag.get(key) for key in ("L0", "L_lambda", "L_mu", "matching", "failing")}
        diag.update(tau_index=k, **{"lambda": _pair(mu), "mu": _pair(nu)})
        checks.append({"name": "bijection", "pass": ok, "detail": diag})
    return checks


def _level_checks(f, k: int, sp, points: list, cfg: dict, verbose: bool) -> list[dict]:
    """Closure of a traced level curve at τ, on the configured grid, and the slice identity beside τ₂."""
    import numpy as np

    from rifscope.contact import default_probes
    from rifscope.errors import NumericalFailure
    from rifscope.levelcurves import blaschke_identity_check, closure_distance, trace_level

    lam = default_probes(sp.lambda0, cfg["probes"])[0]
    detail = {"tau_index": k, "lambda": _pair(lam), "grid": cfg["grid"]}
    try:
        curve = trace_level(f, lam, cfg["grid"], points)
        dist = closure_distance(curve, sp.tau)
        detail.update(distance=dist, strands=len(curve.branches))
        closure = {"name": "closure", "pass": dist <= CLOSURE_TOL, "detail": detail}
    except NumericalFailure as e:
        _log(verbose, f"  level curve λ = {lam:.4g} not traced: {e}")
        closure = {"name": "closure", "pass": False, "detail": {**detail, "error": str(e)}}

    zeta2 = complex(sp.tau[1] * np.exp(1j * BLASCHKE_OFFSET))
    deviation = blaschke_identity_check(f, zeta2)
    blaschke = {
        "name": "blaschke",
        "pass": deviation <= BLASCHKE_TOL,
        "detail": {"tau_index": k, "zeta2": _pair(zeta2), "deviation": deviation},
    }
    return [closure, blaschke]


def analyze(f, cfg: dict | None = None, verbose: bool = False) -> dict:
    """Full analysis of one validated Rif; returns the report dict."""
    from rifscope import __version__
    from rifscope.contact import StrandCache, contact_order_at, global_contact_order, lp_threshold
    from rifscope.errors import AuditMismatch
    from rifscope.intersect import bezout_audit, intersection_multiplicity
    from rifscope.rif import singularities
    from rifscope.schema import REPORT_SCHEMA

    cfg = cfg or load_config()
    seed = cfg["_seed"]
    tol = cfg["tolerances"]
    dps = cfg["contact"]["extended_dps"]
    _log(verbose, f"analyzing {f.label}: p of bidegree {f.bidegree}, η = {f.eta:.6g}")

    points = singularities(f, tol=tol["unimodular"], dedup=tol["singular_dedup"])
    _log(verbose, f"{len(points)} singular point(s) on the torus")

    rows, checks = [], []
    for k, sp in enumerate(points):
        _log(verbose, f"τ{k} = ({sp.tau[0]:.6g}, {sp.tau[1]:.6g}), λ₀ = {sp.lambda0:.6g}")
        cache = StrandCache(f, sp.tau, dps)
        info = contact_order_at(f, sp.tau, cfg["probes"], sp.lambda0, dps=dps, cache=cache)
        sp.contact_order = info["K_tau"]
        sp.branch_orders = info["per_branch"]
        sp.multiplicity = intersection_multiplicity(
            f.p, f.ptilde, sp.tau, radii=tuple(cfg["intersect"]["radii"]),
            max_shears=cfg["intersect"]["max_shears"], seed=seed,
        )
        _log(verbose, f"  K = {sp.contact_order} (branches {sp.branch_orders}), N = {sp.multiplicity}")
        rows.append({
            "tau": [_pair(w) for w in sp.tau],
            "lambda0": _pair(sp.lambda0),
            "K_tau": info["K_tau"],
            "K1": info["K1"],
            "K2": info["K2"],
            "N_tau": sp.multiplicity,
            "branch_orders": list(info["per_branch"]),
            "exceptional_candidate": [_pair(v) for v in info["exceptional_candidate"]],
        })
        checks.extend(_identity_checks(f, k, sp, info, cfg, verbose, cache))
        checks.extend(_level_checks(f, k, sp, points, cfg, verbose))

    try:
        audit = bezout_audit(f, seed=seed, max_shears=cfg["intersect"]["max_shears"],
                             singular_points=points)
        bezout = audit.to_dict()
        checks.append({"name": "bezout", "pass": True,
                       "detail": {"total": audit.total, "expected": audit.bezout_expected}})
    except AuditMismatch as e:
        _log(verbose, f"Bézout audit mismatch: {e.total} ≠ {e.expected}")
        bezout = {"total": e.total, "bezout_expected": e.expected,
                  "on_torus": sum(r["multiplicity"] for r in e.table if r["location"] == "torus"),
                  "error": str(e)}
        checks.append({"name": "bezout", "pass": False,
                       "detail": {"total": e.total, "expected": e.expected}})
    _log(verbose, f"Bézout: {bezout['total']} of {bezout['bezout_expected']}")

    global_k = global_contact_order(f, points)
    threshold = lp_threshold(global_k)
    return {
        "schema": REPORT_SCHEMA,
        "rif_id": f.label,
        "header": {
            "grid": cfg["grid"],
            "probes": cfg["probes"],
            "seed": seed,
            "version": __version__,
        },
        "rif": f.to_json(),
        "singular_points": rows,
        "global_K": global_k,
        "p_star": None if threshold.K is None else threshold.p_star,
        "bezout": bezout,
        "identity_checks": checks,
    }
