"""
Resultants, intersection multiplicities and the Bézout audit.

The numeric resultant interpolates Sylvester determinants at roots of unity.
Local intersection multiplicities are exact: after a rational shear
z₁ = x + s·z₂ the resultant Res_{z₂} is a polynomial in x whose root at
x₀ = τ₁ − s·τ₂ has the multiplicity we want, provided no other intersection point
shares that x.  Counting the roots in shrinking discs around x₀ detects that.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from rifscope.errors import (
    AuditMismatch, IdenticallyZero, InvalidInput, ShearFailure, VerticalComponent,
)
from rifscope.poly2 import BiPoly, evaluate, exact_coefficient, reverse, slice_batch, to_sympy
from rifscope.rif import DEFAULT_SEED, Rif, singularities

logger = logging.getLogger(__name__)

RADII = (1e-3, 1e-4, 1e-5)
MAX_SHEARS = 5
TORUS_TOL = 1e-4
SNAP_RADIUS = 1e-3
ZERO_TOL = 1e-10


@dataclass
class MultiplicityReport:
    per_point: dict
    at_infinity: int
    total: int
    bezout_expected: int
    shear_used: str | None = None
    off_torus: int = 0
    points: list[dict] = field(default_factory=list)

    @property
    def on_torus(self) -> int:
        return sum(self.per_point.values())

    def to_dict(self) -> dict:
        return {
            "per_point": [
                {"tau": [[t.real, t.imag] for t in tau], "N": n} for tau, n in self.per_point.items()
            ],
            "on_torus": self.on_torus,
            "off_torus": self.off_torus,
            "at_infinity": self.at_infinity,
            "total": self.total,
            "bezout_expected": self.bezout_expected,
            "shear_used": self.shear_used,
            "points": [
                {
                    "location": row["location"],
                    "point": [None if w is None else [complex(w).real, complex(w).imag]
                              for w in row["point"]],
                    "multiplicity": row["multiplicity"],
                }
                for row in self.points
            ],
        }


# ── resultants ────────────────────────────────────────────────────────────────

def _sylvester(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched Sylvester matrices; a, b are (K, da+1), (K, db+1), low degree first."""
    K, da, db = a.shape[0], a.shape[1] - 1, b.shape[1] - 1
    size = da + db
    S = np.zeros((K, size, size), dtype=complex)
    ah, bh = a[:, ::-1], b[:, ::-1]
    for r in range(db):
        S[:, r, r:r + da + 1] = ah
    for r in range(da):
        S[:, db + r, r:r + db + 1] = bh
    return S


def resultant(p: BiPoly, q: BiPoly, eliminate: int, exact: bool = False,
              tol: float = ZERO_TOL) -> Polynomial:
    """
    Res_{z_eliminate}(p, q) as a polynomial in the other variable.

    The numeric path samples the D+1 roots of unity, D = m_p·n_q + m_q·n_p, takes
    Sylvester determinants there and interpolates with an FFT.  Raises
    IdenticallyZero when every determinant is below tol times its Hadamard bound.
    """
    if eliminate not in (1, 2):
        raise InvalidInput(f"eliminate must be 1 or 2, got {eliminate!r}")
    if exact:
        return exact_resultant(p, q, eliminate)
    keep = 2 if eliminate == 1 else 1
    (mp_, np_), (mq, nq) = p.bidegree, q.bidegree
    if eliminate == 1:
        D = mp_ * nq + mq * np_
    else:
        D = np_ * mq + nq * mp_
    N = D + 1
    nodes = np.exp(2j * np.pi * np.arange(N) / N)
    a = slice_batch(p, keep, nodes)
    b = slice_batch(q, keep, nodes)
    if a.shape[1] == 1 and b.shape[1] == 1:
        return Polynomial([1.0 + 0j])
    S = _sylvester(a, b)
    dets = np.linalg.det(S)
    hadamard = np.prod(np.linalg.norm(S, axis=2), axis=1)
    if np.all(np.abs(dets) <= tol * np.maximum(hadamard, np.finfo(float).tiny)):
        raise IdenticallyZero(
            f"Res_z{eliminate}(p, q) vanishes identically: the polynomials share a factor."
        )
    coef = np.fft.fft(dets) / N
    coef[np.abs(coef) <= 1e-12 * np.max(np.abs(coef))] = 0
    return Polynomial(np.trim_zeros(coef, "b") if np.any(coef) else coef[:1])


def exact_resultant(p: BiPoly, q: BiPoly, eliminate: int) -> Polynomial:
    import sympy

    z1, z2 = sympy.symbols("z1 z2")
    var, keep = (z1, z2) if eliminate == 1 else (z2, z1)
    res = sympy.expand(sympy.resultant(to_sympy(p, z1, z2), to_sympy(q, z1, z2), var))
    if res == 0:
        raise IdenticallyZero(
            f"Res_z{eliminate}(p, q) vanishes identically: the polynomials share a factor."
        )
    coeffs = sympy.Poly(res, keep).all_coeffs()[::-1]
    return Polynomial([complex(sympy.N(c, 30)) for c in coeffs])


# ── local multiplicities ──────────────────────────────────────────────────────

class _Shear:
    """Roots (with multiplicity) of the sheared resultant for one shear s."""

    def __init__(self, P, Q, s, symbols):
        import sympy

        z1, z2, x = symbols
        self.s = s
        Ps = sympy.expand(P.subs(z1, x + s * z2))
        Qs = sympy.expand(Q.subs(z1, x + s * z2))
        res = sympy.expand(sympy.resultant(Ps, Qs, z2))
        if res == 0:
            raise IdenticallyZero("The sheared resultant vanishes: p and q share a factor.")
        self.poly = sympy.Poly(res, x)
        self.Ps, self.Qs, self.symbols = Ps, Qs, symbols
        self.roots = self._roots()

    def _roots(self) -> list[tuple[complex, int]]:
        import sympy

        x = self.symbols[2]
        out = []
        try:
            _, factors = sympy.sqf_list(self.poly)
            for fac, k in factors:
                fac = sympy.Poly(fac, x)
                if fac.degree() <= 0:
                    continue
                out.extend((complex(r), k) for r in fac.nroots(n=30, maxsteps=200))
        except (sympy.polys.polyerrors.PolynomialError, NotImplementedError) as e:
            logger.debug("sqf_list failed (%s); counting clustered roots instead", e)
            out = [(complex(r), 1) for r in self.poly.nroots(n=30, maxsteps=300)]
        return out

    @property
    def degree(self) -> int:
        return self.poly.degree()

    def count(self, x0: complex, radius: float) -> int:
        return sum(k for r, k in self.roots if abs(r - x0) <= radius)


def _shears(seed: int):
    import sympy

    rng = np.random.default_rng(seed)
    while True:
        yield sympy.Rational(int(rng.integers(1, 89)), int(rng.integers(89, 197)))


def _vanishes(p: BiPoly, tau, tol: float = 1e-8) -> bool:
    return abs(evaluate(p, tau[0], tau[1])) <= tol * max(p.l1, 1.0)


def intersection_multiplicity(p: BiPoly, q: BiPoly, tau: tuple, *, radii=RADII,
                              max_shears: int = MAX_SHEARS, seed: int = DEFAULT_SEED,
                              return_shear: bool = False):
    """
    N_τ(p, q), exactly, by a rational shear and sympy.

    The count of sheared-resultant roots within each radius of x₀ must agree and
    be positive; otherwise a new shear is drawn, up to max_shears times, and then
    ShearFailure is raised.  Points where p or q does not vanish give 0.
    """
    import sympy

    tau = (complex(tau[0]), complex(tau[1]))
    if not (_vanishes(p, tau) and _vanishes(q, tau)):
        return (0, None) if return_shear else 0
    z1, z2, x = sympy.symbols("z1 z2 x")
    P, Q = to_sympy(p, z1, z2), to_sympy(q, z1, z2)
    seen = []
    for attempt, s in zip(range(max_shears), _shears(seed)):
        sh = _Shear(P, Q, s, (z1, z2, x))
        x0 = tau[0] - complex(s) * tau[1]
        counts = [sh.count(x0, r) for r in radii]
        seen.append((str(s), counts))
        if counts[0] > 0 and len(set(counts)) == 1:
            if attempt:
                logger.debug("multiplicity at %s settled after %d reshear(s)", tau, attempt)
            return (counts[0], str(s)) if return_shear else counts[0]
        logger.debug("shear %s unstable at %s: counts %s", s, tau, counts)
    raise ShearFailure(
        f"Intersection count at τ = ({tau[0]:.6g}, {tau[1]:.6g}) did not stabilise over "
        f"{max_shears} shears: {seen}"
    )


# ── Bézout audit ──────────────────────────────────────────────────────────────

def _on_torus(pt) -> bool:
    return all(w is not None and abs(abs(w) - 1.0) <= TORUS_TOL for w in pt)


def _common_roots(a: np.ndarray, b: np.ndarray) -> list[complex]:
    """Common roots of two coefficient vectors (low degree first), via an exact gcd."""
    import sympy

    w = sympy.Symbol("w")
    pa = sympy.Poly(sum(exact_coefficient(c) * w ** k for k, c in enumerate(a)), w)
    pb = sympy.Poly(sum(exact_coefficient(c) * w ** k for k, c in enumerate(b)), w)
    if pa.is_zero or pb.is_zero:
        return []
    g = sympy.gcd(pa, pb)
    if g.degree() <= 0:
        return []
    return [complex(r) for r in sympy.Poly(sympy.sqf_part(g.as_expr()), w).nroots(n=30)]


def _line_coeffs(p: BiPoly, x0: complex, s: complex) -> np.ndarray:
    """Coefficients (low first) of t ↦ p(x0 + s·t, t)."""
    m, n = p.bidegree
    coef = np.zeros(m + n + 1, dtype=complex)
    line = Polynomial([x0, s])
    for (i, j), c in np.ndenumerate(p.coeffs):
        if c != 0:
            term = (c * line ** i).coef
            coef[j: j + len(term)] += term
    return coef


def _finite_points(sh: _Shear, p: BiPoly, q: BiPoly, torus: list) -> list[dict]:
    """Recover (z₁, z₂) for each root of the sheared resultant."""
    rows = []
    s = complex(sh.s)
    for xr, k in sh.roots:
        a = _line_coeffs(p, xr, s)
        z2 = np.roots(a[::-1]).astype(complex)
        if z2.size == 0:
            continue
        z1 = xr + s * z2
        score = (np.abs(evaluate(p, z1, z2)) / max(p.l1, 1.0)
                 + np.abs(evaluate(q, z1, z2)) / max(q.l1, 1.0))
        best = int(np.argmin(score))
        pt = (complex(z1[best]), complex(z2[best]))
        for tau in torus:
            if abs(pt[0] - tau[0]) <= SNAP_RADIUS and abs(pt[1] - tau[1]) <= SNAP_RADIUS:
                pt = tau
                break
        rows.append({
            "location": "torus" if _on_torus(pt) else "off_torus",
            "point": pt,
            "multiplicity": int(k),
        })
    return rows


def bezout_audit(f: Rif, seed: int = DEFAULT_SEED, max_shears: int = MAX_SHEARS,
                 singular_points=None) -> MultiplicityReport:
    """
    All common zeros of p and p̃ in ℂ∞ × ℂ∞, with multiplicities.

    Four charts: ℂ² (sheared resultant), {z₁ = ∞} and {z₂ = ∞} (reversal in one
    variable; candidates are the common roots of the leading row or column), and
    (∞, ∞) (reversal in both).  The total must be 2mn; AuditMismatch carries the
    table otherwise.
    """
    import sympy

    p, pt = f.p, f.ptilde
    m, n = f.bidegree
    expected = 2 * m * n
    if singular_points is None:
        singular_points = singularities(f)
    torus = [sp.tau for sp in singular_points]
    z1, z2, x = sympy.symbols("z1 z2 x")
    P, Q = to_sympy(p, z1, z2), to_sympy(pt, z1, z2)

    rows: list[dict] = []
    shear_used = None
    if m and n:
        for _, s in zip(range(max_shears), _shears(seed)):
            sh = _Shear(P, Q, s, (z1, z2, x))
            xs = [r for r, _ in sh.roots]
            spread = min((abs(a - b) for i, a in enumerate(xs) for b in xs[i + 1:]), default=1.0)
            if spread > 1e-6:
                shear_used = str(s)
                rows.extend(_finite_points(sh, p, pt, torus))
                break
            logger.debug("audit shear %s brings two roots within %.2g; reshearing", s, spread)
        else:
            raise ShearFailure(f"No shear separated the finite intersections in {max_shears} tries.")

        for w in _common_roots(p.coeffs[m, :], pt.coeffs[m, :]):
            k = intersection_multiplicity(reverse(p, 1), reverse(pt, 1), (0, w), seed=seed)
            rows.append({"location": "infinity", "point": (None, w), "multiplicity": k})
        for w in _common_roots(p.coeffs[:, n], pt.coeffs[:, n]):
            k = intersection_multiplicity(reverse(p, 2), reverse(pt, 2), (w, 0), seed=seed)
            rows.append({"location": "infinity", "point": (w, None), "multiplicity": k})
        if p.coeffs[m, n] == 0 and pt.coeffs[m, n] == 0:
            k = intersection_multiplicity(reverse(reverse(p, 1), 2), reverse(reverse(pt, 1), 2),
                                          (0, 0), seed=seed)
            rows.append({"location": "infinity", "point": (None, None), "multiplicity": k})

    per_point: dict = {}
    for row in rows:
        if row["location"] == "torus":
            per_point[row["point"]] = per_point.get(row["point"], 0) + row["multiplicity"]
    total = sum(r["multiplicity"] for r in rows)
    if total != expected:
        raise AuditMismatch(rows, total, expected)
    return MultiplicityReport(
        per_point=per_point,
        at_infinity=sum(r["multiplicity"] for r in rows if r["location"] == "infinity"),
        total=total,
        bezout_expected=expected,
        shear_used=shear_used,
        off_torus=sum(r["multiplicity"] for r in rows if r["location"] == "off_torus"),
        points=rows,
    )



# ── identities at a singular point ────────────────────────────────────────────

def contact_sum_identity(f: Rif, tau: tuple, mu: complex, nu: complex, cache=None) -> dict:
    """
    N_τ(p, p̃) against Σᵢⱼ κ(ψᵢ^μ, ψⱼ^ν) over the level branches of μ and ν.

    Q_μ − Q_ν = (ν − μ)·p, so N_τ(Q_μ, Q_ν) = N_τ(p, p̃) and the exact count is
    taken on p and p̃.  Raises VerticalComponent if either level set contains the
    line {z₂ = τ₂}.  `cache` is a contact.StrandCache for τ to reuse strands.
    """
    from rifscope.contact import StrandCache
    from rifscope.roots import local_count

    tau = (complex(tau[0]), complex(tau[1]))
    if mu == nu:
        raise InvalidInput("contact_sum_identity needs two different level values.")
    for lam in (mu, nu):
        if local_count(f.level_poly(lam), tau) is None:
            raise VerticalComponent(lam, tau[1])
    N = intersection_multiplicity(f.p, f.ptilde, tau)
    kappa, side = (cache or StrandCache(f, tau)).pair_orders(mu, nu)
    total = int(kappa.sum())
    return {"N": N, "sum_kappa": total, "match": N == total, "kappas": kappa.tolist(), "side": side}


def co_vs_im_bound(f: Rif, tau: tuple, orders: list[int] | None = None) -> dict:
    """N_τ(p, p̃) ≤ Σᵢ Σⱼ min(𝒦ᵢ, 𝒦ⱼ) over the zero-set branches through τ."""
    from rifscope.contact import zero_branch_orders

    if orders is None:
        orders = zero_branch_orders(f, tau)
    N = intersection_multiplicity(f.p, f.ptilde, tau)
    bound = int(sum(min(a, b) for a in orders for b in orders))
    return {"N": N, "bound": bound, "holds": N <= bound, "orders": list(orders)}
