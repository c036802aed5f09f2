"""
Unimodular level curves  𝒞_λ = {ζ ∈ 𝕋² : φ(ζ) = λ}.

For fixed ζ₂ ∈ 𝕋 off the singular angles, z₁ ↦ φ(z₁, ζ₂) is a finite Blaschke
product, so the level points are the simple unimodular roots of the slice
Q_λ(·, ζ₂) with Q_λ = η z^M p̃ − λp, and they keep their cyclic order.  The θ₂
circle is cut at every singular angle and at π; strands are tracked on each
arc and joined across singular cuts by analytic continuation through |ζ₂| < 1.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.optimize import linear_sum_assignment

from rifscope.errors import (
    DegenerateLevel, InsufficientSamples, InvalidInput, NumericalFailure, TrackingAmbiguity,
)
from rifscope.poly2 import slice_at, slice_batch
from rifscope.rif import Rif, SingularPoint, max_workers, singularities
from rifscope.roots import Branch, continue_around, roots_batch, track_family

logger = logging.getLogger(__name__)

PORTRAIT_SCHEMA = "rifscope.portrait.v1"
DEFAULT_GRID = 4096
REFINE_TO = 1e-6
TRACE_TOL = 1e-6
VERTICAL_RATIO = 1e-10
JOIN_RADIUS = 0.05
ANCHOR_TOL = 1e-3
HORN_WINDOW = 0.05
HORN_MIN_SAMPLES = 12
VALUE_TOL = 1e-9


@dataclass
class LevelCurve:
    lam: complex
    branches: list[Branch] = field(default_factory=list)
    verticals: list[complex] = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    components: dict[int, list[int]] = field(default_factory=dict)

    @property
    def has_vertical(self) -> complex | None:
        return self.verticals[0] if self.verticals else None

    @property
    def kind(self) -> str:
        if self.flags.get("value_curve"):
            return "value_curve"
        if self.flags.get("exceptional"):
            return "exceptional"
        return "generic"


@dataclass
class Portrait:
    rif_id: str
    curves: list[LevelCurve]
    singular_points: list[SingularPoint]
    grid: int


# ── tracing ───────────────────────────────────────────────────────────────────

def _principal(a: float) -> float:
    a = math.atan2(math.sin(a), math.cos(a))
    return math.pi if a <= -math.pi + 1e-12 else a


@dataclass
class _Arc:
    lo: float
    hi: float
    lo_singular: bool
    hi_singular: bool
    thetas: np.ndarray = None
    strands: list[Branch] = field(default_factory=list)


def _refinement(step: float, refine_to: float) -> np.ndarray:
    k = max(1, int(math.ceil(math.log2(step / refine_to))))
    return step * 2.0 ** -np.arange(1, k + 1)


def _arc_grid(arc: _Arc, step: float, delta_lo: float, delta_hi: float, refine_to: float) -> np.ndarray:
    width = arc.hi - arc.lo
    count = max(int(width / step), 8)
    pts = [np.linspace(arc.lo, arc.hi, count + 1)[1:-1]]
    fine = _refinement(min(step, width / 4), refine_to)
    pts.append(arc.lo + (fine if arc.lo_singular else np.array([refine_to])))
    pts.append(arc.hi - (fine if arc.hi_singular else np.array([refine_to])))
    if arc.lo_singular:
        pts.append([arc.lo + delta_lo])
    if arc.hi_singular:
        pts.append([arc.hi - delta_hi])
    th = np.unique(np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)) for x in pts]))
    return th[(th > arc.lo) & (th < arc.hi)]


def _unimodular_table(Q, thetas: np.ndarray, tol: float) -> np.ndarray:
    table = roots_batch(slice_batch(Q, 2, np.exp(1j * thetas)), polish=2)
    mod = np.abs(table)
    ok = np.isfinite(table) & (np.abs(mod - 1.0) <= tol)
    return np.where(ok, table / np.where(ok, mod, 1.0), np.nan + 0j)


def _track_arc(arc: _Arc, table: np.ndarray, lam: complex, step: float) -> list[Branch]:
    """track_family on one arc, cutting back the refinement zone on ambiguity."""
    th = arc.thetas
    lo, hi = 0, len(th)
    while lo < hi:
        try:
            return track_family(table[lo:hi], th[lo:hi], kind="level", level=lam, unimodular=True)
        except TrackingAmbiguity as e:
            k = lo + e.index
            if arc.lo_singular and th[k] - arc.lo < step:
                lo = k + 1
            elif arc.hi_singular and arc.hi - th[k] < step:
                hi = k
            else:
                raise
            logger.debug("ambiguity at θ₂ = %.3e from a singular cut; refinement truncated",
                         min(th[k] - arc.lo, arc.hi - th[k]))
    return []


def _value_at(strand: Branch, theta: float) -> complex | None:
    hit = np.flatnonzero(np.abs(strand.thetas - theta) <= 1e-12)
    return complex(strand.values[hit[0]]) if hit.size else None


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _continue(Q, theta_l: float, theta_r: float, start: np.ndarray) -> np.ndarray:
    radius = 0.5 * (theta_r - theta_l)
    center = 0.5 * (theta_r + theta_l)
    for attempt in range(4):
        try:
            return continue_around(Q, center - radius, center + radius, start, steps=400 * (attempt + 1))
        except TrackingAmbiguity:
            logger.debug("continuation around θ₂ = %.6g ambiguous; shrinking radius", center)
            radius *= 0.5
    raise NumericalFailure(f"Could not continue level strands around θ₂ = {center:.6g}.")


def _join_singular(Q, left: _Arc, right: _Arc, theta_l: float, theta_r: float, uf: _UnionFind,
                   ids_left: list[int], ids_right: list[int]) -> None:
    start = roots_batch(slice_batch(Q, 2, [np.exp(1j * theta_l)]), polish=2)[0]
    if start.size == 0 or not np.all(np.isfinite(start)):
        return
    if theta_r < theta_l:
        theta_r += 2 * np.pi
    end = _continue(Q, theta_l, theta_r, start)
    theta_r_arc = _principal(theta_r) if right.lo == -math.pi else theta_r
    right_vals = [(_value_at(s, theta_r_arc), uid) for s, uid in zip(right.strands, ids_right)]
    right_vals = [(v, uid) for v, uid in right_vals if v is not None]
    for s, uid in zip(left.strands, ids_left):
        v = _value_at(s, theta_l)
        if v is None or not right_vals:
            continue
        i = int(np.argmin(np.abs(start - v)))
        w = end[i]
        j = int(np.argmin([abs(w - rv) for rv, _ in right_vals]))
        if abs(w - right_vals[j][0]) < 1e-4:
            uf.union(uid, right_vals[j][1])


def _join_seam(left: _Arc, right: _Arc, uf: _UnionFind, ids_left: list[int], ids_right: list[int]) -> None:
    ends = [(s.values[-1], uid) for s, uid in zip(left.strands, ids_left) if s.thetas[-1] == left.thetas[-1]]
    starts = [(s.values[0], uid) for s, uid in zip(right.strands, ids_right) if s.thetas[0] == right.thetas[0]]
    if not ends or not starts:
        return
    cost = np.abs(np.array([e for e, _ in ends])[:, None] - np.array([s for s, _ in starts])[None, :])
    for r, c in zip(*linear_sum_assignment(cost)):
        if cost[r, c] < 1e-3:
            uf.union(ends[r][1], starts[c][1])


def _slice_size(Q, theta: float) -> float:
    return float(np.max(np.abs(slice_batch(Q, 2, [np.exp(1j * theta)])[0])))


def trace_level(f: Rif, lam: complex, grid: int = DEFAULT_GRID,
                singular_points: list[SingularPoint] | None = None, *,
                refine_to: float = REFINE_TO, tol: float = TRACE_TOL) -> LevelCurve:
    """
    Trace 𝒞_λ over the whole θ₂ circle.

    Returns its strands (split at the cuts, each carrying a component id), the
    vertical lines {z₂ = τ₂} it contains, and the closure sets of its components.
    Raises DegenerateLevel when Q_λ vanishes identically.
    """
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-8:
        raise InvalidInput(f"Level values are unimodular; got |λ| = {abs(lam):.6g}.")
    Q = f.level_poly(lam)
    if Q.is_zero or Q.norm <= 1e-13 * max(f.p.norm, 1.0):
        raise DegenerateLevel(f"Q_λ vanishes identically for λ = {lam:.6g}: φ is constant.")
    if singular_points is None:
        singular_points = singularities(f)

    sing_angles = sorted({round(_principal(float(np.angle(sp.tau[1]))), 12) for sp in singular_points})
    cuts = sorted(set(sing_angles) | {math.pi})
    step = 2 * math.pi / grid
    arcs = []
    lo = -math.pi
    for c in cuts:
        arcs.append(_Arc(lo, c, lo_singular=_principal(lo) in sing_angles, hi_singular=c in sing_angles))
        lo = c

    # join radius per cut: cut k sits between arc k (left) and arc k+1 (right)
    widths = [a.hi - a.lo for a in arcs]
    deltas = [min(JOIN_RADIUS, widths[k] / 4, widths[(k + 1) % len(arcs)] / 4) for k in range(len(arcs))]

    for k, arc in enumerate(arcs):
        arc.thetas = _arc_grid(arc, step, deltas[k - 1], deltas[k], refine_to)
        table = _unimodular_table(Q, arc.thetas, tol)
        arc.strands = _track_arc(arc, table, lam, step)

    uid_of, flat = [], []
    for k, arc in enumerate(arcs):
        ids = []
        for s in arc.strands:
            ids.append(len(flat))
            flat.append((k, s))
        uid_of.append(ids)
    uf = _UnionFind(len(flat))
    for k, arc in enumerate(arcs):
        right = arcs[(k + 1) % len(arcs)]
        if arc.hi_singular:
            theta_l = arc.hi - deltas[k]
            theta_r = arc.hi + deltas[k]
            _join_singular(Q, arc, right, theta_l, theta_r, uf, uid_of[k], uid_of[(k + 1) % len(arcs)])
        else:
            _join_seam(arc, right, uf, uid_of[k], uid_of[(k + 1) % len(arcs)])

    # verticals
    verticals = []
    for k, c in enumerate(cuts):
        here = _slice_size(Q, c)
        around = [_slice_size(Q, c + s * deltas[k]) for s in (-1, 1)]
        around += [_slice_size(Q, c + s * 2 * deltas[k]) for s in (-1, 1)]
        if here < VERTICAL_RATIO * float(np.median(around)):
            verticals.append(complex(np.exp(1j * c)) if c != math.pi else -1 + 0j)

    # anchors and component closures
    roots_ids = {}
    branches = []
    closures: dict[int, set[int]] = {}
    for uid, (k, s) in enumerate(flat):
        root = uf.find(uid)
        cid = roots_ids.setdefault(root, len(roots_ids))
        s.component_id = cid
        hits = _anchors(s, arcs[k], singular_points)
        if hits:
            s.anchor = singular_points[hits[0]].tau
        closures.setdefault(cid, set()).update(hits)
        branches.append(s)
    for tau2 in verticals:
        cid = len(roots_ids) + len([c for c in closures if c >= len(roots_ids)])
        closures[cid] = {i for i, sp in enumerate(singular_points) if abs(sp.tau[1] - tau2) <= 1e-7}

    flags = {"value_curve": [i for i, sp in enumerate(singular_points)
                             if abs(sp.lambda0 - lam) <= VALUE_TOL]}
    flags["generic"] = not flags["value_curve"]
    logger.debug("λ = %s: %d strands, %d component(s), %d vertical(s)",
                 lam, len(branches), len(closures), len(verticals))
    return LevelCurve(
        lam=lam,
        branches=branches,
        verticals=verticals,
        flags=flags,
        components={cid: sorted(v) for cid, v in sorted(closures.items())},
    )


def _anchors(s: Branch, arc: _Arc, singular_points: list[SingularPoint]) -> list[int]:
    hits = []
    ends = []
    if arc.lo_singular:
        ends.append((s.thetas[0], s.values[0], arc.lo))
    if arc.hi_singular:
        ends.append((s.thetas[-1], s.values[-1], arc.hi))
    for theta, value, cut in ends:
        gap = abs(theta - cut)
        for i, sp in enumerate(singular_points):
            if abs(_principal(float(np.angle(sp.tau[1]))) - _principal(cut)) > 1e-9:
                continue
            if abs(value - sp.tau[0]) <= max(ANCHOR_TOL, 50 * gap) and i not in hits:
                hits.append(i)
    return hits


def components(curve: LevelCurve, singular_points: list[SingularPoint] | None = None) -> LevelCurve:
    """
    The curve with its component closure sets.  trace_level computes them
    already; with explicit singular_points they are recomputed from the strand
    ends by distance alone (ANCHOR_TOL).
    """
    if singular_points is None:
        return curve
    closures: dict[int, set[int]] = {}
    for b in curve.branches:
        hits = set()
        for i, sp in enumerate(singular_points):
            for end in (0, -1):
                if (abs(b.values[end] - sp.tau[0]) <= 10 * ANCHOR_TOL
                        and abs(np.exp(1j * b.thetas[end]) - sp.tau[1]) <= 10 * ANCHOR_TOL):
                    hits.add(i)
        closures.setdefault(b.component_id, set()).update(hits)
    next_id = max(closures, default=-1) + 1
    for k, tau2 in enumerate(curve.verticals):
        closures[next_id + k] = {i for i, sp in enumerate(singular_points) if abs(sp.tau[1] - tau2) <= 1e-7}
    curve.components = {cid: sorted(v) for cid, v in sorted(closures.items())}
    return curve


# ── local checks ──────────────────────────────────────────────────────────────

def horn_check(branch: Branch, tau: tuple, lambda0: complex | None = None) -> dict:
    """
    Fit x₁ = a₁x₂ + a₂x₂² near τ in the chart x = tan(Δθ/2).

    pinch_ok requires 1e-6 < |a₁| < 1e6 and the spread of x₁/x₂ over dyadic
    shells of |x₂| to shrink at least linearly (or to sit at round-off).
    Raises InsufficientSamples with fewer than 12 samples within |x₂| ≤ 0.05.
    """
    if branch.kind != "level":
        raise InvalidInput("horn_check applies to level-curve branches.")
    if lambda0 is not None and branch.level is not None and abs(branch.level - lambda0) <= VALUE_TOL:
        raise InvalidInput("horn_check does not apply to the value curve through τ.")
    t1, t2 = np.angle(tau[0]), np.angle(tau[1])
    d1 = np.angle(np.exp(1j * (np.angle(branch.values) - t1)))
    d2 = np.angle(np.exp(1j * (branch.thetas - t2)))
    x1, x2 = np.tan(d1 / 2), np.tan(d2 / 2)
    win = (np.abs(x2) <= HORN_WINDOW) & (x2 != 0) & (np.abs(x1) <= 10 * HORN_WINDOW)
    if np.count_nonzero(win) < HORN_MIN_SAMPLES:
        raise InsufficientSamples(
            f"horn_check needs {HORN_MIN_SAMPLES} samples with |x₂| ≤ {HORN_WINDOW}, "
            f"found {np.count_nonzero(win)}.  Trace with a finer grid."
        )
    x1, x2 = x1[win], x2[win]
    A = np.column_stack([x2, x2 ** 2])
    (a1, a2), *_ = np.linalg.lstsq(A, x1, rcond=None)
    ratio = x1 / x2
    ax = np.abs(x2)
    radii, spread = [], []
    outer = HORN_WINDOW
    while outer > 1e-12:
        shell = ratio[(ax <= outer) & (ax > outer / 2)]
        if shell.size >= 2:
            radii.append(outer)
            spread.append(float(np.ptp(shell)))
        outer /= 2
    radii, spread = np.asarray(radii), np.asarray(spread)
    decay = None
    live = spread > 1e-13
    if np.count_nonzero(live) >= 3:
        decay = float(stats.linregress(np.log(radii[live]), np.log(spread[live])).slope)
    resid = float(np.max(spread)) if spread.size else 0.0
    pinch = 1e-6 < abs(a1) < 1e6 and (resid <= 1e-8 or (decay is not None and decay >= 0.8))
    return {
        "linear_coeff": float(a1),
        "quadratic_coeff": float(a2),
        "residual": resid,
        "decay": decay,
        "samples": int(x2.size),
        "pinch_ok": bool(pinch),
    }


def blaschke_identity_check(f: Rif, zeta2: complex, probes: int = 100) -> float:
    """
    max over `probes` points ζ ∈ 𝕋 of | |b′(ζ)| − Σⱼ (1−|αⱼ|²)/|ζ−αⱼ|² | / |b′(ζ)|
    for the slice b = φ(·, ζ₂), αⱼ the zeros of its numerator (z₁ᴹ included).
    """
    num = slice_at(f.numerator(), 2, zeta2)
    den = slice_at(f.denominator(), 2, zeta2)
    num, den = num.trim(), den.trim()
    zeta = np.exp(1j * (2 * np.pi * np.arange(probes) / probes + 0.1))
    if num.degree() <= 0:
        return 0.0
    deriv = (num.deriv() * den - num * den.deriv())(zeta) / den(zeta) ** 2
    alphas = num.roots()
    expected = np.sum((1 - np.abs(alphas) ** 2)[None, :] / np.abs(zeta[:, None] - alphas[None, :]) ** 2, axis=1)
    size = np.abs(deriv)
    return float(np.max(np.abs(size - expected) / np.maximum(size, np.finfo(float).tiny)))


# ── portraits ─────────────────────────────────────────────────────────────────

def level_values(levels) -> list[complex]:
    """An int N gives e^{iπ(2k+1)/N}, k < N; anything else is taken as the values."""
    if isinstance(levels, int):
        return [complex(np.exp(1j * np.pi * (2 * k + 1) / levels)) for k in range(levels)]
    return [complex(v) for v in levels]


def portrait(f: Rif, lambdas, grid: int = DEFAULT_GRID,
             singular_points: list[SingularPoint] | None = None,
             exceptional=()) -> Portrait:
    if singular_points is None:
        singular_points = singularities(f)
    values = level_values(lambdas)
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        curves = list(pool.map(lambda lam: trace_level(f, lam, grid, singular_points), values))
    for c in curves:
        c.flags["exceptional"] = any(abs(c.lam - e) <= 1e-9 for e in exceptional)
        c.flags["generic"] = not (c.flags["value_curve"] or c.flags["exceptional"])
    curves.sort(key=lambda c: _principal(float(np.angle(c.lam))))
    return Portrait(rif_id=f.label, curves=curves, singular_points=list(singular_points), grid=grid)


def closure_distance(curve: LevelCurve, tau: tuple) -> float:
    """Smallest max-norm distance from a sample of the curve to τ."""
    best = math.inf
    for tau2 in curve.verticals:
        if abs(tau2 - tau[1]) <= 1e-7:
            return 0.0
    for b in curve.branches:
        d = np.maximum(np.abs(b.values - tau[0]), np.abs(np.exp(1j * b.thetas) - tau[1]))
        best = min(best, float(np.min(d)))
    return best


def smoothness_proxy(branch: Branch) -> float:
    """Largest second divided difference of θ₁ (unwrapped) in θ₂."""
    if len(branch) < 3:
        return 0.0
    x = np.asarray(branch.thetas)
    y = np.unwrap(np.angle(branch.values))
    first = np.diff(y) / np.diff(x)
    second = 2 * np.diff(first) / (x[2:] - x[:-2])
    return float(np.max(np.abs(second)))


def portrait_to_json(p: Portrait) -> dict:
    return {
        "schema": PORTRAIT_SCHEMA,
        "rif_id": p.rif_id,
        "grid": p.grid,
        "singular_points": [sp.to_dict() for sp in p.singular_points],
        "curves": [
            {
                "lambda": [c.lam.real, c.lam.imag],
                "flag": c.kind,
                "value_curve": c.flags.get("value_curve", []),
                "verticals": [[v.real, v.imag] for v in c.verticals],
                "components": {str(k): v for k, v in c.components.items()},
                "branches": [
                    {
                        "component_id": b.component_id,
                        "theta2": [round(float(t), 12) for t in b.thetas],
                        "theta1": [round(float(t), 12) for t in np.angle(b.values)],
                    }
                    for b in c.branches
                ],
            }
            for c in p.curves
        ],
    }


CSV_COLUMNS = ["lambda_re", "lambda_im", "flag", "theta1", "theta2", "branch_id", "component_id"]


def portrait_to_csv(p: Portrait, path=None) -> str | None:
    """Write one row per sample; vertical lines are sampled along θ₁ with branch_id −1."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    g = "{:.12g}".format
    for c in p.curves:
        head = [g(c.lam.real), g(c.lam.imag), c.kind]
        for bid, b in enumerate(c.branches):
            for t2, v in zip(b.thetas, b.values):
                w.writerow(head + [g(float(np.angle(v))), g(float(t2)), bid, b.component_id])
        first_vertical = max(c.components, default=-1) - len(c.verticals) + 1
        for k, tau2 in enumerate(c.verticals):
            for t1 in np.linspace(-math.pi, math.pi, 65)[1:]:
                w.writerow(head + [g(float(t1)), g(float(np.angle(tau2))), -1, first_vertical + k])
    text = buf.getvalue()
    if path is None:
        return text
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return None


