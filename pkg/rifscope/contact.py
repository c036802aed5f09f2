"""
Contact orders, orders of contact and Lᵖ thresholds at boundary singularities.

Every integer here comes from a log–log fit: a quantity v(h) that behaves like
C·hᵏ as the offset h from τ₂ shrinks has its exponent k read off by fit_order.

  branch contact order   v = 1 − |ψ(ζ₂)|  for a zero-set branch of p̃   (even)
  order of contact       v = |ψ_a − ψ_b|  for two level-curve branches

The contact order K_τ is the largest branch contact order.  It is computed in
both variable orders (K1, K2), and cross-checked against the largest order of
contact between level curves for a ring of probe values around λ₀.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy import stats
from scipy.optimize import linear_sum_assignment

from rifscope.errors import CrossCheckFailure, EcoViolation, InvalidInput, NoisyData
from rifscope.poly2 import evaluate, partial
from rifscope.rif import Rif, nontangential_value
from rifscope.roots import Branch, local_count, track_anchored

logger = logging.getLogger(__name__)

GUARD_BAND = 0.15
R_SQUARED = 0.999
MIN_SAMPLES = 12
MIN_DECADES = 2.0
CEILING = 1e-2
DOUBLE_FLOOR = 1e-12
EXTENDED_FLOOR = 1e-70
ESCALATE_BELOW = 1e-11
PROBE_PHASE = 0.37
DEEP_OFFSETS = np.logspace(-1.5, -10.0, 64)


@dataclass
class OrderFit:
    order: int
    slope_raw: float
    r_squared: float
    window: tuple[float, float]
    precision_mode: str = "double"
    n_samples: int = 0

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "slope_raw": round(self.slope_raw, 6),
            "r_squared": round(self.r_squared, 8),
            "window": list(self.window),
            "precision_mode": self.precision_mode,
            "n_samples": self.n_samples,
        }


# ── fitting ───────────────────────────────────────────────────────────────────

def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    out, start = [], None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            out.append((start, i))
            start = None
    if start is not None:
        out.append((start, len(mask)))
    return out


def _rounded(slope: float, parity: str | None) -> int:
    if parity == "even":
        return 2 * int(round(slope / 2))
    return int(round(slope))


def fit_order(h, v, parity: str | None = None, precision: str = "double", *,
              guard: float = GUARD_BAND, r2_min: float = R_SQUARED,
              min_samples: int = MIN_SAMPLES, min_decades: float = MIN_DECADES) -> OrderFit:
    """
    Integer exponent k in v ≈ C·hᵏ.

    Searches the contiguous windows of samples with v in [floor, 1e-2]
    (floor 1e-12 in double, 1e-70 in extended precision) holding at least
    `min_samples` points over `min_decades` decades of h, keeps those whose
    slope rounds (to an even integer with parity="even") within `guard` and
    whose r² ≥ r2_min, and reports the largest one, ties going to small h.
    """
    h = np.asarray(h, dtype=float)
    v = np.asarray(v, dtype=float)
    if h.shape != v.shape:
        raise InvalidInput(f"fit_order: {h.size} offsets against {v.size} values.")
    ok = np.isfinite(h) & np.isfinite(v) & (h > 0) & (v > 0)
    if not np.any(ok):
        raise NoisyData("fit_order: every sample is zero or non-finite; nothing to fit.")
    idx = np.argsort(h[ok])
    x = np.log10(h[ok][idx])
    y = np.log10(v[ok][idx])
    floor = EXTENDED_FLOOR if precision == "extended" else DOUBLE_FLOOR
    band = (y >= math.log10(floor)) & (y <= math.log10(CEILING))

    Sx = np.concatenate([[0.0], np.cumsum(x)])
    Sy = np.concatenate([[0.0], np.cumsum(y)])
    Sxx = np.concatenate([[0.0], np.cumsum(x * x)])
    Syy = np.concatenate([[0.0], np.cumsum(y * y)])
    Sxy = np.concatenate([[0.0], np.cumsum(x * y)])

    best = None
    for start, stop in _runs(band):
        for a in range(start, stop):
            for b in range(a + min_samples - 1, stop):
                if x[b] - x[a] < min_decades:
                    continue
                n = b - a + 1
                sx, sy = Sx[b + 1] - Sx[a], Sy[b + 1] - Sy[a]
                vxx = n * (Sxx[b + 1] - Sxx[a]) - sx * sx
                vyy = n * (Syy[b + 1] - Syy[a]) - sy * sy
                vxy = n * (Sxy[b + 1] - Sxy[a]) - sx * sy
                if vxx <= 0 or vyy <= 0:
                    continue
                slope = vxy / vxx
                r2 = vxy * vxy / (vxx * vyy)
                k = _rounded(slope, parity)
                if k < 1 or r2 < r2_min or abs(slope - k) > guard:
                    continue
                key = (n, -x[a])
                if best is None or key > best[0]:
                    best = (key, a, b)
    if best is None:
        raise NoisyData(
            f"No window of ≥{min_samples} samples over {min_decades:g} decades gives an "
            f"integer slope (guard {guard}, r² ≥ {r2_min}) in {precision} precision."
        )
    _, a, b = best
    fit = stats.linregress(x[a:b + 1], y[a:b + 1])
    slope = float(fit.slope)
    return OrderFit(
        order=_rounded(slope, parity),
        slope_raw=slope,
        r_squared=float(fit.rvalue ** 2),
        window=(float(10 ** x[a]), float(10 ** x[b])),
        precision_mode=precision,
        n_samples=b - a + 1,
    )


def _chord(branch: Branch) -> np.ndarray:
    return 2.0 * np.abs(np.sin(np.asarray(branch.offsets) / 2.0))


# ── zero-set branches ─────────────────────────────────────────────────────────

def zero_branches(f: Rif, tau: tuple, side: int = 1, precision: str = "double",
                  dps: int = 80) -> list[Branch]:
    """Branches of {p̃ = 0} through τ, sampled on one side of τ₂."""
    return track_anchored(f.ptilde, tau, side=side, kind="zero", precision=precision, dps=dps)


def _fit_zero(branch: Branch) -> OrderFit:
    depth = np.asarray(branch.depth, dtype=float)
    return fit_order(_chord(branch), depth, parity="even", precision=branch.precision)


def branch_fit(f: Rif, branch: Branch, tau: tuple, dps: int = 80) -> OrderFit:
    """
    OrderFit of 1 − |ψ| against |τ₂ − ζ₂| for one zero-set branch.

    A double-precision fit that fails, or whose depths drop below 1e-11, is
    redone on an extended-precision resample of the same branch.
    """
    if branch.kind != "zero" or branch.depth is None:
        raise InvalidInput("branch_contact_order needs an anchored zero-set branch.")
    if branch.precision == "double":
        try:
            fit = _fit_zero(branch)
            if np.nanmin(branch.depth) >= ESCALATE_BELOW:
                return fit
            logger.debug("depths below %.0e at rank %d; resampling in extended precision",
                         ESCALATE_BELOW, branch.rank)
        except NoisyData:
            logger.debug("double fit rejected at rank %d; resampling in extended precision",
                         branch.rank)
        hi = zero_branches(f, tau, side=branch.side or 1, precision="extended", dps=dps)
        matches = [b for b in hi if b.rank == branch.rank]
        if not matches:
            raise NoisyData(f"Extended resample lost the rank-{branch.rank} branch at τ.")
        branch = matches[0]
    return _fit_zero(branch)


def branch_contact_order(f: Rif, branch: Branch, tau: tuple) -> int:
    return branch_fit(f, branch, tau).order


def zero_branch_orders(f: Rif, tau: tuple, precision: str = "double") -> list[int]:
    """Contact orders of all zero-set branches at τ, in descending order."""
    branches = zero_branches(f, tau, precision=precision)
    return sorted((branch_fit(f, b, tau).order for b in branches), reverse=True)


# ── level-curve branches ──────────────────────────────────────────────────────

def level_strands(f: Rif, lam: complex, tau: tuple, side: int = 1,
                  precision: str = "double", dps: int = 80, offsets=None) -> list[Branch]:
    return track_anchored(f.level_poly(lam), tau, side=side, kind="level", level=lam,
                          precision=precision, dps=dps, offsets=offsets)


def _differences(a: Branch, b: Branch) -> tuple[np.ndarray, np.ndarray, str]:
    ha, hb = np.asarray(a.offsets), np.asarray(b.offsets)
    if a.hi is not None and b.hi is not None:
        import mpmath

        common, ia, ib = np.intersect1d(ha, hb, return_indices=True)
        ctx = mpmath.MPContext()
        ctx.dps = 80
        d = np.array([float(abs(ctx.convert(a.hi[i]) - ctx.convert(b.hi[j])))
                      for i, j in zip(ia, ib)])
        return 2.0 * np.abs(np.sin(common / 2.0)), d, "extended"
    if ha.shape == hb.shape and np.array_equal(ha, hb):
        return _chord(a), np.abs(a.values - b.values), "double"
    # only offsets both strands kept; interpolating in h would add an O(h) error
    common, ia, ib = np.intersect1d(ha, hb, return_indices=True)
    return 2.0 * np.abs(np.sin(common / 2.0)), np.abs(a.values[ia] - b.values[ib]), "double"


def order_of_contact(a: Branch, b: Branch, tau: tuple | None = None) -> int:
    """Integer κ with |ψ_a − ψ_b| ≈ C·|τ₂ − ζ₂|^κ."""
    return order_fit(a, b).order


def order_fit(a: Branch, b: Branch) -> OrderFit:
    if a.side != b.side:
        raise InvalidInput("order_of_contact needs two branches sampled on the same side of τ₂.")
    h, d, mode = _differences(a, b)
    return fit_order(h, d, parity=None, precision=mode)


class StrandCache:
    """
    Level strands through one singular point, per level value, resampled at
    growing cost on demand.

    Each side of τ₂ has three rungs: double precision, extended precision, and
    extended precision on DEEP_OFFSETS.  Branch ranks agree between rungs of
    one side, not across sides.
    """

    RUNGS = (("double", None), ("extended", None), ("extended", DEEP_OFFSETS))

    def __init__(self, f: Rif, tau: tuple, dps: int = 80):
        self.f = f
        self.tau = (complex(tau[0]), complex(tau[1]))
        self.dps = dps
        self._store: dict[tuple, list[Branch]] = {}
        self._pairs: dict[tuple, tuple[np.ndarray, int]] = {}

    def strands(self, lam: complex, side: int = 1, rung: int = 0) -> list[Branch]:
        key = (complex(lam), side, rung)
        if key not in self._store:
            precision, offsets = self.RUNGS[rung]
            self._store[key] = level_strands(self.f, lam, self.tau, side=side, precision=precision,
                                             dps=self.dps, offsets=offsets)
        return self._store[key]

    def pair_orders(self, lam: complex, mu: complex) -> tuple[np.ndarray, int]:
        """
        κ for every pair (λ-strand i, μ-strand j) and the side of τ₂ it was read on.

        Every pair climbs the rungs until its fit settles.  A side on which some
        pair never settles is dropped for the other one; NoisyData when both are.
        """
        key = (complex(lam), complex(mu))
        if key not in self._pairs:
            for side in (1, -1):
                kappa = self._settle(lam, mu, side)
                if kappa is not None:
                    self._pairs[key] = (kappa, side)
                    break
                logger.debug("λ = %s, μ = %s: pair fits unsettled on side %+d of τ₂", lam, mu, side)
            else:
                raise NoisyData(
                    f"Orders of contact between the λ = {complex(lam):.6g} and μ = {complex(mu):.6g} "
                    f"strands at τ = ({self.tau[0]:.6g}, {self.tau[1]:.6g}) do not settle on "
                    "either side of τ₂, even on the deep offset grid."
                )
        return self._pairs[key]

    def _settle(self, lam: complex, mu: complex, side: int) -> np.ndarray | None:
        kappa, pending = None, []
        for rung in range(len(self.RUNGS)):
            sa, sb = self.strands(lam, side, rung), self.strands(mu, side, rung)
            if kappa is None:
                kappa = np.zeros((len(sa), len(sb)), dtype=int)
                pending = [(i, j) for i in range(len(sa)) for j in range(len(sb))]
            elif (len(sa), len(sb)) != kappa.shape:
                logger.debug("rung %d resample changed the strand count; skipped", rung)
                continue
            unsettled = []
            for i, j in pending:
                try:
                    kappa[i, j] = order_of_contact(sa[i], sb[j])
                except NoisyData:
                    unsettled.append((i, j))
            pending = unsettled
            if not pending:
                return kappa
        return None


def default_probes(lambda0: complex, count: int = 8) -> list[complex]:
    """count values λ₀·e^{i(2πk/count + 0.37)}, never ±λ₀."""
    return [complex(lambda0 * np.exp(1j * (2 * np.pi * k / count + PROBE_PHASE)))
            for k in range(count)]


def _probe_orders(cache: StrandCache, probes: list[complex]) -> list[dict]:
    f, tau = cache.f, cache.tau
    usable = []
    for k, lam in enumerate(probes):
        if local_count(f.level_poly(lam), tau) is None:
            logger.warning("probe λ = %s has a vertical level component at τ; skipped", lam)
            continue
        usable.append(k)
    rows = []
    for i, k in enumerate(usable):
        for l in usable[i + 1:]:
            try:
                kappa, _ = cache.pair_orders(probes[k], probes[l])
                order = int(kappa.max()) if kappa.size else None
            except NoisyData as e:
                logger.warning("probe pair (%d, %d) left out of the vote: %s", k, l, e)
                order = None
            rows.append({"lambda": probes[k], "mu": probes[l], "i": k, "j": l, "order": order})
    return rows


def contact_order_at(f: Rif, tau: tuple, probes: int | list[complex] = 8,
                     lambda0: complex | None = None, dps: int = 80,
                     cache: StrandCache | None = None) -> dict:
    """
    Contact order K_τ with its cross-checks.

    K1 comes from the zero-set branches of p̃ through τ; K2 from the swapped
    function at (τ₂, τ₁).  A disagreement is refit in extended precision before
    raising EcoViolation.  The majority over probe pairs of the largest order of
    contact must equal K1, otherwise CrossCheckFailure.  Pairs whose fits never
    settle sit out the vote.  Probes that only sit in disagreeing or unsettled
    pairs are returned as exceptional_candidate.
    """
    tau = (complex(tau[0]), complex(tau[1]))
    if lambda0 is None:
        lambda0 = nontangential_value(f, tau)
    per_branch = zero_branch_orders(f, tau)
    swapped_orders = zero_branch_orders(f.swapped(), (tau[1], tau[0]))
    if not per_branch or not swapped_orders:
        raise InvalidInput(f"No zero-set branch passes through τ = {tau}; is it singular?")
    k1, k2 = per_branch[0], swapped_orders[0]
    if k1 != k2:
        logger.info("K1 = %d, K2 = %d at %s; refitting in extended precision", k1, k2, tau)
        per_branch = zero_branch_orders(f, tau, precision="extended")
        swapped_orders = zero_branch_orders(f.swapped(), (tau[1], tau[0]), precision="extended")
        k1, k2 = per_branch[0], swapped_orders[0]
        if k1 != k2:
            raise EcoViolation(tau, k1, k2)

    probe_values = default_probes(lambda0, probes) if isinstance(probes, int) else list(probes)
    rows = _probe_orders(cache or StrandCache(f, tau, dps), probe_values)
    settled = [r for r in rows if r["order"] is not None]
    majority = None
    if settled:
        value, votes = Counter(r["order"] for r in settled).most_common(1)[0]
        if votes * 2 > len(settled):
            majority = value
    if majority is None:
        raise CrossCheckFailure(
            f"Probe pairs at τ = {tau} give no majority order of contact: "
            f"{sorted(Counter(r['order'] for r in settled).items())} "
            f"({len(rows) - len(settled)} pair(s) unsettled)."
        )
    if majority != k1:
        raise CrossCheckFailure(
            f"Level curves at τ = {tau} touch to order {majority}, "
            f"but the zero-set branches give K = {k1}."
        )
    agreeing = {r[key] for r in settled if r["order"] == majority for key in ("i", "j")}
    involved = {r[key] for r in rows for key in ("i", "j")}
    exceptional = [probe_values[k] for k in sorted(involved - agreeing)]
    return {
        "tau": tau,
        "lambda0": lambda0,
        "K_tau": k1,
        "K1": k1,
        "K2": k2,
        "per_branch": per_branch,
        "swapped_branches": swapped_orders,
        "pair_orders": [{"lambda": r["lambda"], "mu": r["mu"], "order": r["order"]} for r in rows],
        "exceptional_candidate": exceptional,
    }


def global_contact_order(f: Rif, singular_points=None) -> int | None:
    """max K_τ over the singular set; None without singularities."""
    if singular_points is None:
        from rifscope.rif import singularities
        singular_points = singularities(f)
    orders = []
    for sp in singular_points:
        if sp.contact_order is None:
            sp.branch_orders = zero_branch_orders(f, sp.tau)
            sp.contact_order = sp.branch_orders[0]
        orders.append(sp.contact_order)
    return max(orders) if orders else None


# ── integrability ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class LpThreshold:
    K: int | None
    p_star: float

    def verdict(self, p: float) -> bool:
        """∂φ/∂z₁ and ∂φ/∂z₂ lie in Lᵖ(𝕋²) exactly when p < p*."""
        return p < self.p_star


def lp_threshold(K: int | None) -> LpThreshold:
    if K is None:
        return LpThreshold(None, math.inf)
    if K < 1:
        raise InvalidInput(f"Contact order must be positive, got {K}.")
    return LpThreshold(K, 1.0 + 1.0 / K)


def lp_quadrature_probe(f: Rif, p: float, n: int = 256, exclusion: float = 0.05,
                        singular_points=None) -> dict:
    """
    Riemann sum of |∂φ/∂z₁|ᵖ over an n×n torus grid, skipping points within
    `exclusion` (in both angles) of a singular point.  A sanity probe only.
    """
    if singular_points is None:
        from rifscope.rif import singularities
        singular_points = singularities(f)
    theta = 2 * np.pi * (np.arange(n) + 0.5) / n
    T1, T2 = np.meshgrid(theta, theta, indexing="ij")
    Z1, Z2 = np.exp(1j * T1), np.exp(1j * T2)
    num = f.numerator()
    den = f.denominator()
    with np.errstate(divide="ignore", invalid="ignore"):
        d = (evaluate(partial(num, 1), Z1, Z2) * evaluate(den, Z1, Z2)
             - evaluate(num, Z1, Z2) * evaluate(partial(den, 1), Z1, Z2)) / evaluate(den, Z1, Z2) ** 2
    mask = np.ones_like(T1, dtype=bool)
    for sp in singular_points:
        a1, a2 = np.angle(sp.tau[0]), np.angle(sp.tau[1])
        near1 = np.abs(np.angle(np.exp(1j * (T1 - a1)))) < exclusion
        near2 = np.abs(np.angle(np.exp(1j * (T2 - a2)))) < exclusion
        mask &= ~(near1 & near2)
    vals = np.abs(d[mask]) ** p
    return {
        "p": p,
        "integral": float(np.sum(vals[np.isfinite(vals)]) / n ** 2),
        "excluded_fraction": float(1.0 - mask.mean()),
    }


# ── bijection between zero and level branches ─────────────────────────────────

UNMATCHED = 1e6


def _slope_at(b: Branch, tau1: complex, h: float) -> float:
    """Angular slope arg(ψ/τ₁)/h of a strand at its offset nearest h."""
    offsets = np.asarray(b.offsets)
    k = int(np.argmin(np.abs(offsets - h)))
    return float(np.angle(b.values[k] / tau1)) / float(offsets[k])


def _reference_offset(branches: list[Branch]) -> float:
    common = reduce(np.intersect1d, [np.asarray(b.offsets) for b in branches])
    if common.size:
        return float(common.min())
    return max(float(np.min(b.offsets)) for b in branches)


def branch_bijection_check(f: Rif, tau: tuple, lam: complex, mu: complex,
                           cache: StrandCache | None = None) -> tuple[bool, dict]:
    """
    L_λ, L_μ ≥ L₀, and every zero-set branch matched to its own (λ-strand,
    μ-strand) pair touching to at least the branch's contact order.

    Zero-set branches sit in the horn between the level strands they are
    matched to, so pairs are assigned by angular slope at a shared offset
    (linear_sum_assignment), with pairs of too low an order of contact barred.
    """
    tau = (complex(tau[0]), complex(tau[1]))
    L0 = local_count(f.ptilde, tau)
    L_lam = local_count(f.level_poly(lam), tau)
    L_mu = local_count(f.level_poly(mu), tau)
    diag = {"L0": L0, "L_lambda": L_lam, "L_mu": L_mu, "orders": [], "matching": [], "failing": []}
    if L_lam is None or L_mu is None:
        diag["failing"].append("vertical level component at τ")
        return False, diag
    if L0 is None or L_lam < L0 or L_mu < L0:
        diag["failing"].append(f"branch counts L_λ={L_lam}, L_μ={L_mu} below L₀={L0}")
        return False, diag

    cache = cache or StrandCache(f, tau)
    kappa, side = cache.pair_orders(lam, mu)
    sa, sb = cache.strands(lam, side), cache.strands(mu, side)
    zs = zero_branches(f, tau, side=side)
    orders = [branch_fit(f, z, tau).order for z in zs]
    diag["orders"] = sorted(orders, reverse=True)
    if not zs:
        return True, diag
    if not sa or not sb:
        diag["failing"].append("no level strands sampled at τ")
        return False, diag

    h = _reference_offset(zs + sa + sb)
    tau1 = tau[0]
    zslope = np.array([_slope_at(z, tau1, h) for z in zs])
    aslope = np.array([_slope_at(a, tau1, h) for a in sa])
    bslope = np.array([_slope_at(b, tau1, h) for b in sb])
    pairs = [(i, j) for i in range(len(sa)) for j in range(len(sb))]
    cost = np.empty((len(zs), len(pairs)))
    for ell, K in enumerate(orders):
        for c, (i, j) in enumerate(pairs):
            cost[ell, c] = abs(zslope[ell] - aslope[i]) + abs(zslope[ell] - bslope[j])
            if kappa[i, j] < K:
                cost[ell, c] += UNMATCHED
    rows, cols = linear_sum_assignment(cost)

    used_a, used_b = set(), set()
    for ell, c in sorted(zip(rows, cols), key=lambda rc: -orders[rc[0]]):
        i, j = pairs[c]
        if cost[ell, c] >= UNMATCHED or i in used_a or j in used_b:
            diag["failing"].append(int(ell))
            continue
        used_a.add(i)
        used_b.add(j)
        diag["matching"].append({"branch": int(ell), "order": orders[ell], "pair": [i, j],
                                 "kappa": int(kappa[i, j]), "slope_gap": float(cost[ell, c])})
    diag["failing"].extend(int(ell) for ell in range(len(zs)) if ell not in set(rows.tolist()))
    return not diag["failing"], diag
