"""
Univariate root finding and root-family tracking.

Three tools live here:

  roots_univariate   Aberth–Ehrlich with a companion-matrix fallback
  track_family       continuation of all roots of θ ↦ poly_θ along a θ grid
  track_anchored     the roots of a slice family that converge to a point τ,
                     sampled on a geometric offset grid ζ₂ = τ₂·e^{±ih}

track_anchored replaces a symbolic Puiseux expansion: branches through τ are
analytic graphs over z₂, so sampling them at shrinking offsets is enough to fit
their integer vanishing orders (see rifscope.contact).  In extended precision the
samples are polished with mpmath.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import linear_sum_assignment

from rifscope.errors import DegenerateInput, InvalidInput, TrackingAmbiguity
from rifscope.poly2 import BiPoly, slice_batch

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-12
RESIDUAL_TOL = 1e-9
MAX_ITER = 200
UNDERFLOW = 1e-14
AMBIGUITY_RATIO = 1.2
AMBIGUITY_FLOOR = 1e-13
JUMP_FACTOR = 8.0
MIN_SPEED = 0.5
EXTENDED_DPS = 80

DOUBLE_OFFSETS = np.logspace(-1.0, -4.5, 36)
EXTENDED_OFFSETS = np.logspace(-1.0, -6.0, 44)


@dataclass
class RootSet:
    roots: np.ndarray
    residuals: np.ndarray
    degree_deficit: int = 0

    @property
    def declared_degree(self) -> int:
        return len(self.roots) + self.degree_deficit

    def __len__(self):
        return len(self.roots)


@dataclass
class Branch:
    """
    A sampled curve z₁ = ψ(z₂) with ζ₂ = e^{iθ}.

    kind is "zero" (zero set of a polynomial) or "level" (a level set of φ, with
    `level` = λ).  Anchored samples carry their offsets h = |θ − arg τ₂|, and in
    extended precision the mpmath values in `hi` and 1 − |z₁| in `depth`.
    """

    thetas: np.ndarray
    values: np.ndarray
    kind: str = "level"
    level: complex | None = None
    component_id: int = -1
    anchor: tuple | None = None
    precision: str = "double"
    side: int = 0
    offsets: np.ndarray | None = None
    depth: np.ndarray | None = None
    rank: int = -1
    hi: list | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.thetas)

    @property
    def theta1(self) -> np.ndarray:
        return np.angle(self.values)


# ── single polynomials ─────────────────────────────────────────────────────────

def _coefficients(c) -> np.ndarray:
    return np.atleast_1d(np.asarray(getattr(c, "coef", c), dtype=complex))


def residuals(c, roots) -> np.ndarray:
    """|poly(z)| / Σ|cᵢ||z|ⁱ for each root."""
    c = _coefficients(c)
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return np.zeros(0)
    num = np.abs(npoly.polyval(roots, c))
    den = npoly.polyval(np.abs(roots), np.abs(c))
    return num / np.where(den > 0, den, 1.0)


def _aberth(c: np.ndarray, z: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, bool]:
    dc = npoly.polyder(c)
    for _ in range(max_iter):
        pz = npoly.polyval(z, c)
        dpz = npoly.polyval(z, dc)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = pz / dpz
            w = ratio / (1.0 - ratio * np.sum(1.0 / diff, axis=1))
        w[~np.isfinite(w)] = 0.0
        z = z - w
        if np.all(np.abs(w) <= tol * np.maximum(1.0, np.abs(z))):
            return z, True
    return z, False


def roots_univariate(c, tol: float = ROOT_TOL, residual_tol: float = RESIDUAL_TOL,
                     max_iter: int = MAX_ITER, seed: int = 0) -> RootSet:
    """
    All roots of the polynomial with coefficients c (low degree first).

    Exact zero roots are split off first.  Leading coefficients below
    UNDERFLOW·‖c‖ count as roots at infinity (degree_deficit).  Aberth–Ehrlich
    runs with one perturbed restart; the companion matrix result replaces it when
    its residuals are smaller.  Multiple roots come back as clustered copies.
    """
    c = _coefficients(c)
    scale_c = np.max(np.abs(c)) if c.size else 0.0
    if scale_c == 0.0:
        raise DegenerateInput("roots_univariate: the polynomial is identically zero.")

    deficit = 0
    while len(c) > 1 and abs(c[-1]) <= UNDERFLOW * scale_c:
        c = c[:-1]
        deficit += 1
    n_zero = int(np.argmax(c != 0))
    core = c[n_zero:]
    d = len(core) - 1

    found = np.zeros(0, dtype=complex)
    if d > 0:
        radius = abs(core[0] / core[-1]) ** (1.0 / d)
        z0 = radius * np.exp(1j * (2 * np.pi * np.arange(d) / d + 0.4))
        z, ok = _aberth(core, z0, tol, max_iter)
        if not ok:
            rng = np.random.default_rng(seed)
            kick = 1e-3 * (1.0 + np.abs(z)) * np.exp(2j * np.pi * rng.random(d))
            z, ok = _aberth(core, z + kick, tol, max_iter)
            if not ok:
                logger.debug("Aberth stagnated on degree %d; comparing with companion roots", d)
        companion = npoly.polyroots(core).astype(complex)
        if np.max(residuals(core, companion)) < np.max(residuals(core, z)):
            z = companion
        found = z

    roots = np.concatenate([np.zeros(n_zero, dtype=complex), found])
    res = residuals(c, roots)
    if res.size and np.max(res) > residual_tol:
        logger.warning("root residual %.3g exceeds tolerance %.3g (degree %d)",
                       np.max(res), residual_tol, len(c) - 1)
    return RootSet(roots=roots, residuals=res, degree_deficit=deficit)


def _horner(C: np.ndarray, z: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(z)
    for k in range(C.shape[1] - 1, -1, -1):
        acc = acc * z + C[:, k, None]
    return acc


def roots_batch(C, polish: int = 1) -> np.ndarray:
    """
    Roots of many polynomials of the same formal degree, one per row of C.

    Returns a (K, d) array; roots lost to a vanishing leading coefficient are
    NaN.  Companion eigenvalues are refined by `polish` Newton steps.
    """
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    K, d = C.shape[0], C.shape[1] - 1
    out = np.full((K, max(d, 0)), np.nan + 0j)
    if d <= 0:
        return out
    scale_c = np.max(np.abs(C), axis=1)
    ok = np.abs(C[:, -1]) > UNDERFLOW * np.where(scale_c > 0, scale_c, 1.0)
    if np.any(ok):
        Ck = C[ok]
        comp = np.zeros((Ck.shape[0], d, d), dtype=complex)
        if d > 1:
            comp[:, 1:, :-1] = np.eye(d - 1)
        comp[:, :, -1] = -Ck[:, :-1] / Ck[:, -1:]
        z = np.linalg.eigvals(comp)
        dC = Ck[:, 1:] * np.arange(1, d + 1)
        for _ in range(polish):
            with np.errstate(divide="ignore", invalid="ignore"):
                step = _horner(Ck, z) / _horner(dC, z)
            take = np.isfinite(step) & (np.abs(step) <= 1e-6 * (1.0 + np.abs(z)))
            z = np.where(take, z - step, z)
        out[ok] = z
    for k in np.flatnonzero(~ok):
        if scale_c[k] == 0.0:
            continue
        rs = roots_univariate(C[k])
        out[k, : len(rs.roots)] = rs.roots
    return out


def unimodular_filter(rs, tol: float = 1e-8) -> np.ndarray:
    """Roots with ||z| − 1| ≤ tol, projected radially onto the circle."""
    roots = np.asarray(getattr(rs, "roots", rs), dtype=complex)
    roots = roots[np.isfinite(roots)]
    keep = roots[np.abs(np.abs(roots) - 1.0) <= tol]
    return keep / np.abs(keep) if keep.size else keep


# ── tracking along a grid ──────────────────────────────────────────────────────

class _Strand:
    __slots__ = ("thetas", "values")

    def __init__(self, theta: float, value: complex):
        self.thetas = [theta]
        self.values = [value]

    def predict(self, theta: float) -> complex:
        if len(self.values) < 2:
            return self.values[-1]
        t0, t1 = self.thetas[-2], self.thetas[-1]
        v0, v1 = self.values[-2], self.values[-1]
        return v1 + (v1 - v0) * (theta - t1) / (t1 - t0)

    def jump(self, dt: float, factor: float) -> float:
        if len(self.values) < 2:
            speed = MIN_SPEED
        else:
            v = np.asarray(self.values[-6:])
            t = np.asarray(self.thetas[-6:])
            speed = max(float(np.median(np.abs(np.diff(v)) / np.diff(t))), MIN_SPEED)
        return factor * dt * speed


def check_ambiguity(cost: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                    ratio: float = AMBIGUITY_RATIO) -> float | None:
    """Smallest alt/best ratio over single transpositions, if below `ratio`."""
    if len(rows) < 2:
        return None
    sub = cost[np.ix_(rows, cols)]
    best = np.diag(sub)
    pair_best = best[:, None] + best[None, :]
    pair_alt = sub + sub.T
    iu = np.triu_indices(len(rows), k=1)
    pb, pa = pair_best[iu], pair_alt[iu]
    live = pb > AMBIGUITY_FLOOR
    if not np.any(live):
        return None
    q = np.min(pa[live] / pb[live])
    return float(q) if q < ratio else None


def _family_roots(family, thetas: np.ndarray) -> list[np.ndarray]:
    if callable(family):
        out = []
        for t in thetas:
            rs = roots_univariate(family(t))
            out.append(rs.roots)
        return out
    arr = np.asarray(family, dtype=complex)
    if arr.shape[0] != len(thetas):
        raise InvalidInput(
            f"Root table has {arr.shape[0]} rows for {len(thetas)} grid angles."
        )
    return [row[np.isfinite(row)] for row in arr]


def cyclic_match(prev: np.ndarray, cur: np.ndarray) -> np.ndarray | None:
    """
    Order-preserving matching of two equally sized sets of unimodular points.

    Both sets are sorted by angle from the middle of the widest gap of `prev`.
    None when some point would move by half that gap or more, since the cyclic
    order can then no longer be trusted.
    """
    d = len(prev)
    if d == 1:
        return np.zeros(1, dtype=int)
    ap = np.angle(prev)
    srt = np.sort(ap)
    gaps = np.diff(np.append(srt, srt[0] + 2 * np.pi))
    g = int(np.argmax(gaps))
    ref = srt[g] + gaps[g] / 2
    ip = np.argsort(np.mod(ap - ref, 2 * np.pi))
    ic = np.argsort(np.mod(np.angle(cur) - ref, 2 * np.pi))
    order = np.empty(d, dtype=int)
    order[ip] = ic
    if np.max(np.abs(np.angle(cur[order] / prev))) >= gaps[g] / 2:
        return None
    return order


def track_family(family, thetas, match_jump: float | None = None, *,
                 kind: str = "zero", level: complex | None = None,
                 ratio: float = AMBIGUITY_RATIO, jump_factor: float = JUMP_FACTOR,
                 unimodular: bool = False) -> list[Branch]:
    """
    Continue the roots of θ ↦ family(θ) along a sorted grid.

    `family` is either a callable returning coefficients (low degree first) or
    a (len(thetas), d) table of precomputed roots, NaN for missing ones.
    Consecutive root sets are matched by linear_sum_assignment on distances to
    linearly predicted positions.  A match costing more than match_jump (default:
    jump_factor × spacing × median recent speed) starts a new branch; roots that
    disappear (degree drop) retire theirs.

    Raises TrackingAmbiguity when swapping two assignments costs less than
    `ratio` times the chosen pair.

    With unimodular=True the roots are level points of a finite Blaschke
    product: they stay simple and keep their cyclic order on 𝕋, so equal-size
    steps are matched by cyclic_match instead.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 1 or len(thetas) == 0:
        raise InvalidInput("track_family needs a non-empty 1-D grid.")
    if np.any(np.diff(thetas) <= 0):
        raise InvalidInput("track_family needs a strictly increasing grid.")
    table = _family_roots(family, thetas)

    active = [_Strand(thetas[0], z) for z in table[0]]
    done: list[_Strand] = []
    for k in range(1, len(thetas)):
        cur = table[k]
        t = thetas[k]
        if not active or cur.size == 0:
            done.extend(active)
            active = [_Strand(t, z) for z in cur]
            continue
        if unimodular and len(cur) == len(active):
            order = cyclic_match(np.array([s.values[-1] for s in active]), cur)
            if order is None:
                raise TrackingAmbiguity(float(t), 1.0, index=k)
            for s, c in zip(active, order):
                s.thetas.append(t)
                s.values.append(cur[c])
            continue
        pred = np.array([s.predict(t) for s in active])
        cost = np.abs(pred[:, None] - cur[None, :])
        rows, cols = linear_sum_assignment(cost)
        q = check_ambiguity(cost, rows, cols, ratio)
        if q is not None:
            raise TrackingAmbiguity(float(t), q, index=k)
        dt = t - thetas[k - 1]
        nxt = []
        for r, c in zip(rows, cols):
            s = active[r]
            limit = match_jump if match_jump is not None else s.jump(dt, jump_factor)
            if cost[r, c] > limit:
                done.append(s)
                nxt.append(_Strand(t, cur[c]))
            else:
                s.thetas.append(t)
                s.values.append(cur[c])
                nxt.append(s)
        retired = set(range(len(active))) - set(rows.tolist())
        done.extend(active[r] for r in sorted(retired))
        born = set(range(len(cur))) - set(cols.tolist())
        nxt.extend(_Strand(t, cur[c]) for c in sorted(born))
        active = nxt
    done.extend(active)

    branches = [
        Branch(thetas=np.asarray(s.thetas), values=np.asarray(s.values, dtype=complex),
               kind=kind, level=level)
        for s in done
    ]
    branches.sort(key=lambda b: (b.thetas[0], float(np.angle(b.values[0]))))
    return branches


# ── continuation off the torus ────────────────────────────────────────────────

def chordal(a, b) -> np.ndarray:
    """Chordal distance on the Riemann sphere; NaN/inf entries mean ∞."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    ia = ~np.isfinite(a)
    ib = ~np.isfinite(b)
    a0 = np.where(ia, 0, a)
    b0 = np.where(ib, 0, b)
    with np.errstate(over="ignore", invalid="ignore"):
        d = np.abs(a0 - b0) / np.sqrt((1 + np.abs(a0) ** 2) * (1 + np.abs(b0) ** 2))
    d = np.where(ia & ~ib, 1 / np.sqrt(1 + np.abs(b0) ** 2), d)
    d = np.where(~ia & ib, 1 / np.sqrt(1 + np.abs(a0) ** 2), d)
    d = np.where(ia & ib, 0.0, d)
    return np.nan_to_num(d, nan=1.0)


def continue_around(poly: BiPoly, theta_left: float, theta_right: float,
                    start: np.ndarray, steps: int = 400) -> np.ndarray:
    """
    Carry the z₁-roots at θ_left to θ_right along a half circle in the complex
    θ-plane through the upper half (|ζ₂| < 1), avoiding the real axis between.

    Returns the continued roots in the order of `start`.  Roots may pass
    through ∞ on the way; matching uses the chordal metric.
    """
    center = 0.5 * (theta_left + theta_right)
    radius = 0.5 * (theta_right - theta_left)
    phis = np.linspace(0.0, np.pi, steps + 1)
    path = center + radius * np.exp(1j * (np.pi - phis))
    table = roots_batch(slice_batch(poly, 2, np.exp(1j * path)))
    current = np.asarray(start, dtype=complex)
    if table.shape[1] != current.size:
        raise InvalidInput(
            f"continue_around: {current.size} starting roots for a degree-{table.shape[1]} family."
        )
    for k in range(1, steps + 1):
        cost = chordal(current[:, None], table[k][None, :])
        rows, cols = linear_sum_assignment(cost)
        q = check_ambiguity(cost, rows, cols)
        if q is not None:
            raise TrackingAmbiguity(float(path[k].real), q, index=k)
        current = table[k][cols[np.argsort(rows)]]
    return current


# ── anchored sampling near a singular point ───────────────────────────────────

def _ctx(dps: int):
    import mpmath
    ctx = mpmath.MPContext()
    ctx.dps = dps
    return ctx


def local_count(poly: BiPoly, tau: tuple, tol: float = 1e-9, dps: int = 30) -> int | None:
    """
    Multiplicity of z₁ = τ₁ as a root of poly(·, τ₂), i.e. the number of
    branches z₁ = ψ(z₂) through τ.  None when the slice vanishes identically.
    """
    ctx = _ctx(dps)
    tau1 = ctx.convert(complex(tau[0]))
    tau2 = ctx.convert(complex(tau[1]))
    coeffs = []
    for row in poly.coeffs:
        acc = ctx.mpc(0)
        for c in row[::-1]:
            acc = acc * tau2 + ctx.mpc(c.real, c.imag)
        coeffs.append(acc)
    scale_c = max((abs(c) for c in coeffs), default=0)
    if scale_c == 0 or scale_c <= 1e-14 * poly.norm:
        return None
    count = 0
    work = list(reversed(coeffs))
    while len(work) > 1:
        quotient, acc = [], ctx.mpc(0)
        for c in work:
            acc = acc * tau1 + c
            quotient.append(acc)
        remainder = quotient.pop()
        if abs(remainder) > tol * scale_c:
            break
        count += 1
        work = quotient
    return count


def _select(roots: np.ndarray, target: complex, count: int) -> tuple[np.ndarray, bool]:
    finite = roots[np.isfinite(roots)]
    dist = np.abs(finite - target)
    order = np.argsort(dist)
    chosen = finite[order[:count]]
    if len(finite) < count:
        return chosen, False
    if len(finite) == count:
        return chosen, True
    return chosen, bool(dist[order[count - 1]] < 0.5 * dist[order[count]])


def _polish(ctx, coeffs: list, starts: list, target, count: int) -> list:
    """Newton-polish `starts` in ctx; fall back to ctx.polyroots on collision."""
    dcoeffs = [c * i for i, c in enumerate(coeffs)][1:]

    def horner(cs, z):
        acc = ctx.mpc(0)
        for c in reversed(cs):
            acc = acc * z + c
        return acc

    eps = ctx.mpf(10) ** (-(ctx.dps - 8))
    polished, converged = [], True
    for z0 in starts:
        z = ctx.convert(complex(z0))
        for _ in range(80):
            step = horner(coeffs, z) / horner(dcoeffs, z)
            z -= step
            if abs(step) <= eps * max(1, abs(z)):
                break
        else:
            converged = False
        polished.append(z)
    sep = ctx.mpf(10) ** (-(ctx.dps // 2))
    distinct = all(abs(a - b) > sep for i, a in enumerate(polished) for b in polished[i + 1:])
    if converged and distinct:
        return polished
    try:
        all_roots = ctx.polyroots(list(reversed(coeffs)), maxsteps=400, extraprec=2 * ctx.dps)
    except ctx.NoConvergence:
        logger.warning("mpmath polyroots did not converge; keeping Newton-polished values")
        return polished
    return sorted(all_roots, key=lambda z: abs(z - target))[:count]


def track_anchored(poly: BiPoly, tau: tuple, *, side: int = 1, count: int | None = None,
                   kind: str = "zero", level: complex | None = None,
                   precision: str = "double", offsets=None,
                   dps: int = EXTENDED_DPS) -> list[Branch]:
    """
    Sample the `count` branches of {poly = 0} through τ on one side of τ₂.

    ζ₂ = τ₂·e^{i·side·h} over a geometric grid of h.  At each h the `count` roots
    closest to τ₁ are kept while they are clearly separated from the rest.
    Branch identity across h is by rank: level branches (unimodular) by their
    angle relative to τ₁, which never changes order, and zero-set branches by
    depth 1 − |z₁|.
    """
    if side not in (1, -1):
        raise InvalidInput(f"side must be +1 or -1, got {side!r}")
    if count is None:
        count = local_count(poly, tau)
        if count is None:
            raise InvalidInput("The slice through τ vanishes identically; no branches to sample.")
    if count == 0:
        return []
    if offsets is None:
        offsets = EXTENDED_OFFSETS if precision == "extended" else DOUBLE_OFFSETS
    h_all = np.sort(np.asarray(offsets, dtype=float))[::-1]
    tau1, tau2 = complex(tau[0]), complex(tau[1])
    tau2 /= abs(tau2)
    zetas = tau2 * np.exp(1j * side * h_all)
    table = roots_batch(slice_batch(poly, 2, zetas), polish=2)

    keep_h, vals = [], []
    for h, row in zip(h_all, table):
        chosen, clear = _select(row, tau1, count)
        if clear and len(chosen) == count:
            keep_h.append(h)
            vals.append(chosen)
    if len(keep_h) == 0:
        logger.warning("no clearly separated samples near τ = (%s, %s)", tau1, tau2)
        return []

    hi_vals = None
    depth = None
    if precision == "extended":
        ctx = _ctx(dps)
        t1 = ctx.convert(tau1)
        t2 = ctx.convert(tau2)
        t2 = t2 / abs(t2)
        hi_vals = []
        for h, chosen in zip(keep_h, vals):
            zeta = t2 * ctx.expj(side * ctx.mpf(h))
            coeffs = []
            for row in poly.coeffs:
                acc = ctx.mpc(0)
                for c in row[::-1]:
                    acc = acc * zeta + ctx.mpc(c.real, c.imag)
                coeffs.append(acc)
            hi_vals.append(_polish(ctx, coeffs, list(chosen), t1, count))
        if kind == "zero":
            depth_rows = [[float(1 - abs(z)) for z in row] for row in hi_vals]
        else:
            depth_rows = None
        vals = [np.array([complex(z) for z in row]) for row in hi_vals]
    else:
        depth_rows = [list(1.0 - np.abs(row)) for row in vals] if kind == "zero" else None

    # rank-based identity
    order_rows = []
    for i, row in enumerate(vals):
        if kind == "zero":
            key = -np.asarray(depth_rows[i])
        else:
            key = np.angle(np.asarray(row) / tau1)
        order_rows.append(np.argsort(key, kind="stable"))

    keep_h = np.asarray(keep_h)
    theta_raw = np.angle(tau2) + side * keep_h
    thetas = np.angle(np.exp(1j * theta_raw))
    sort_idx = np.argsort(thetas)
    branches = []
    for rank in range(count):
        values = np.array([vals[i][order_rows[i][rank]] for i in range(len(keep_h))])
        if depth_rows is not None:
            depth = np.array([depth_rows[i][order_rows[i][rank]] for i in range(len(keep_h))])
        hi = None
        if hi_vals is not None:
            hi = [hi_vals[i][order_rows[i][rank]] for i in range(len(keep_h))]
            hi = [hi[i] for i in sort_idx]
        branches.append(Branch(
            thetas=thetas[sort_idx],
            values=values[sort_idx],
            kind=kind,
            level=level,
            anchor=(tau1, tau2),
            precision=precision,
            side=side,
            offsets=keep_h[sort_idx],
            depth=None if depth_rows is None else depth[sort_idx],
            rank=rank,
            hi=hi,
        ))
    return branches
