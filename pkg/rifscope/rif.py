"""
Rational inner functions on the bidisk.

    φ(z) = η · z₁ᴹ z₂ᴺ · p̃(z) / p(z)

with p a polynomial without zeros in 𝔻², p̃ its reflection at the bidegree of p,
and no common factor between p and p̃.  `validate` certifies the input (by
sampling), `singularities` finds the points of 𝕋² where p and p̃ both vanish, and
`nontangential_value` computes the unimodular limit λ₀ of φ there.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from rifscope.errors import (
    CommonFactor, IdenticallyZero, InvalidInput, NoLimit, NotSemiStable, ResultantDegenerate,
)
from rifscope.poly2 import (
    BiPoly, eval_mp, evaluate, from_json as poly_from_json, reflect, slice_batch, swap,
    to_json as poly_to_json, to_sympy,
)
from rifscope.roots import roots_batch

logger = logging.getLogger(__name__)

RIF_SCHEMA = "rifscope.rif.v1"
DEFAULT_SEED = 0x5EED
UNIMODULAR_TOL = 1e-8
DEDUP_TOL = 1e-7
SNAP_TOL = 1e-12


def max_workers() -> int:
    """Thread cap for every pool in the package (RIFSCOPE_THREADS)."""
    raw = os.environ.get("RIFSCOPE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("ignoring RIFSCOPE_THREADS=%r (not an integer)", raw)
    return min(8, os.cpu_count() or 1)


# ── types ─────────────────────────────────────────────────────────────────────

@dataclass
class SingularPoint:
    tau: tuple[complex, complex]
    lambda0: complex
    contact_order: int | None = None
    multiplicity: int | None = None
    branch_orders: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tau": [_pair(w) for w in self.tau],
            "lambda0": _pair(self.lambda0),
            "contact_order": self.contact_order,
            "multiplicity": self.multiplicity,
            "branch_orders": list(self.branch_orders),
        }


def _pair(w) -> list[float]:
    w = complex(w)
    return [w.real, w.imag]


@dataclass(eq=False)
class Rif:
    p: BiPoly
    eta: complex = -1
    monomial: tuple[int, int] = (0, 0)
    name: str = ""
    certificate: dict = field(default_factory=dict, repr=False)
    ptilde: BiPoly = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.p, BiPoly):
            self.p = BiPoly(self.p)
        self.p = self.p.tight()
        eta = complex(self.eta)
        if abs(abs(eta) - 1.0) > UNIMODULAR_TOL:
            raise InvalidInput(f"η must be unimodular, got |η| = {abs(eta):.6g}.")
        self.eta = eta / abs(eta)
        M, N = (int(k) for k in self.monomial)
        if M < 0 or N < 0:
            raise InvalidInput(f"Monomial exponents must be non-negative, got ({M}, {N}).")
        self.monomial = (M, N)
        self.ptilde = reflect(self.p)

    @property
    def bidegree(self) -> tuple[int, int]:
        """Bidegree of the denominator p."""
        return self.p.bidegree

    @property
    def full_bidegree(self) -> tuple[int, int]:
        m, n = self.p.bidegree
        return m + self.monomial[0], n + self.monomial[1]

    @property
    def label(self) -> str:
        return self.name or "rif"

    def numerator(self) -> BiPoly:
        """η z₁ᴹ z₂ᴺ p̃ at the full bidegree."""
        return BiPoly(self._numerator_coeffs(), padded=True)

    def _numerator_coeffs(self) -> np.ndarray:
        m, n = self.full_bidegree
        M, N = self.monomial
        c = np.zeros((m + 1, n + 1), dtype=complex)
        c[M:, N:] = self.eta * self.ptilde.coeffs
        return c

    def denominator(self) -> BiPoly:
        """p padded to the full bidegree."""
        m, n = self.full_bidegree
        return self.p.pad_to(m, n)

    def level_poly(self, lam: complex) -> BiPoly:
        """η z₁ᴹ z₂ᴺ p̃ − λ p, padded to the full bidegree."""
        m, n = self.full_bidegree
        den = np.zeros((m + 1, n + 1), dtype=complex)
        den[: self.p.coeffs.shape[0], : self.p.coeffs.shape[1]] = self.p.coeffs
        return BiPoly(self._numerator_coeffs() - complex(lam) * den, padded=True)

    def evaluate(self, z1, z2):
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        M, N = self.monomial
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.eta * z1 ** M * z2 ** N * evaluate(self.ptilde, z1, z2) / evaluate(self.p, z1, z2)
        return out

    __call__ = evaluate

    def evaluate_mp(self, z1, z2, ctx):
        M, N = self.monomial
        z1, z2 = ctx.convert(z1), ctx.convert(z2)
        return (ctx.convert(self.eta) * z1 ** M * z2 ** N
                * eval_mp(self.ptilde, z1, z2, ctx) / eval_mp(self.p, z1, z2, ctx))

    def swapped(self) -> "Rif":
        """φ(z₂, z₁)."""
        return Rif(swap(self.p), self.eta, (self.monomial[1], self.monomial[0]),
                   name=f"{self.name}~swap" if self.name else "")

    def to_json(self) -> dict:
        return {
            "schema": RIF_SCHEMA,
            "name": self.name,
            "p": poly_to_json(self.p),
            "eta": _pair(self.eta),
            "monomial": list(self.monomial),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Rif":
        if not isinstance(doc, dict) or "p" not in doc:
            raise InvalidInput(
                'Rif JSON needs at least {"p": {...}}; optional "eta": [re, im], '
                '"monomial": [M, N], "name".'
            )
        eta = doc.get("eta", [-1.0, 0.0])
        try:
            eta = complex(*eta) if isinstance(eta, (list, tuple)) else complex(eta)
            monomial = tuple(int(k) for k in doc.get("monomial", (0, 0)))
        except (TypeError, ValueError) as e:
            raise InvalidInput(f"Malformed Rif JSON: {e}") from e
        if len(monomial) != 2:
            raise InvalidInput(f"monomial must be [M, N], got {doc.get('monomial')!r}")
        return cls(poly_from_json(doc["p"]), eta, monomial, name=str(doc.get("name", "")))


# ── validation ────────────────────────────────────────────────────────────────

def _disk_samples(samples: int, quasi: int, seed: int, margin: float) -> np.ndarray:
    from scipy.stats import qmc

    radii = np.linspace(0.0, 1.0 - margin, samples)
    angles = 2 * np.pi * np.arange(samples) / samples
    grid = (radii[:, None] * np.exp(1j * angles[None, :])).ravel()
    if quasi <= 0:
        return grid
    u = qmc.Sobol(d=2, scramble=True, seed=seed).random_base2(m=max(1, math.ceil(math.log2(quasi))))
    pts = np.sqrt(u[:, 0]) * (1.0 - margin) * np.exp(2j * np.pi * u[:, 1])
    return np.concatenate([grid, pts])


def _exact_slice(ctx, p: BiPoly, var: int, fixed) -> list:
    """Slice coefficients (low degree first) evaluated in ctx from the stored coefficients of p."""
    w = ctx.convert(complex(fixed))
    rows = p.coeffs if var == 2 else p.coeffs.T
    out = []
    for row in rows:
        acc = ctx.mpc(0)
        for c in row[::-1]:
            acc = acc * w + ctx.mpc(c.real, c.imag)
        out.append(acc)
    return out


def _confirm_witness(p: BiPoly, var: int, fixed: complex, root: complex, margin: float):
    """
    Re-polish a candidate interior root at 40 digits; None if it moves out.

    The slice is rebuilt from p itself: near a boundary singularity the slice
    has a near-multiple root, and double-rounded slice coefficients move it
    by about the square root of their error.
    """
    import mpmath

    ctx = mpmath.MPContext()
    ctx.dps = 40
    coeffs = _exact_slice(ctx, p, var, fixed)
    dcoeffs = [c * k for k, c in enumerate(coeffs)][1:]
    z = ctx.convert(complex(root))
    for _ in range(200):
        num = ctx.polyval(coeffs[::-1], z)
        den = ctx.polyval(dcoeffs[::-1], z) if dcoeffs else 0
        if den == 0:
            break
        step = num / den
        z -= step
        if abs(step) < ctx.mpf(10) ** -35:
            break
    return complex(z) if abs(z) < 1 - ctx.mpf(margin) else None


def check_semi_stable(p: BiPoly, samples: int = 200, quasi: int = 100000,
                      seed: int = DEFAULT_SEED, margin: float = 1e-9,
                      chunk: int = 20000) -> float:
    """
    Sample for zeros of p inside 𝔻².  Both variables take a turn as the fixed
    one; returns the smallest root modulus seen.  Raises NotSemiStable.
    """
    pts = _disk_samples(samples, quasi, seed, margin)
    smallest = np.inf
    for var in (2, 1):
        deg = p.bidegree[0] if var == 2 else p.bidegree[1]
        if deg == 0:
            continue
        for start in range(0, len(pts), chunk):
            fixed = pts[start:start + chunk]
            table = roots_batch(slice_batch(p, var, fixed))
            mod = np.abs(table)
            mod = np.where(np.isfinite(mod), mod, np.inf)
            smallest = min(smallest, float(np.min(mod)))
            for k, j in zip(*np.nonzero(mod < 1.0 - margin)):
                root = _confirm_witness(p, var, fixed[k], table[k, j], margin)
                if root is None:
                    continue
                witness = (root, fixed[k]) if var == 2 else (fixed[k], root)
                raise NotSemiStable(witness)
    logger.debug("semi-stability sampling: %d points per variable, min root modulus %.6g",
                 len(pts), smallest)
    return smallest


def validate(p, eta: complex = -1, monomial: tuple[int, int] = (0, 0), samples: int = 200,
             *, quasi: int = 100000, seed: int = DEFAULT_SEED, margin: float = 1e-9,
             name: str = "") -> Rif:
    """
    Certify that η z^M p̃/p is a rational inner function and return it.

    (a) no zeros of p in 𝔻² (sampled, both directions); (b) p and p̃ share no
    factor (numeric resultants in both variables); (c) |p̃| = |p| on a 𝕋² grid.
    """
    from rifscope.intersect import resultant

    if not isinstance(p, BiPoly):
        p = BiPoly(p)
    if p.is_zero:
        raise InvalidInput("The denominator p is identically zero.")
    f = Rif(p, eta, monomial, name=name)
    smallest = check_semi_stable(f.p, samples, quasi, seed, margin)

    m, n = f.bidegree
    for var in (1, 2):
        if (m, n)[var - 1] == 0:
            continue
        try:
            resultant(f.p, f.ptilde, eliminate=var)
        except IdenticallyZero as e:
            raise CommonFactor(
                f"p and p̃ share a factor (Res in z{var} vanishes identically).\n"
                "Divide it out: φ is then a function of lower bidegree."
            ) from e

    theta = 2 * np.pi * np.arange(64) / 64
    Z1, Z2 = np.meshgrid(np.exp(1j * theta), np.exp(1j * theta), indexing="ij")
    gap = np.max(np.abs(np.abs(evaluate(f.ptilde, Z1, Z2)) - np.abs(evaluate(f.p, Z1, Z2))))
    if gap > 1e-8 * max(f.p.l1, 1.0):
        raise InvalidInput(f"|p̃| ≠ |p| on the torus (max gap {gap:.3g}); the reflection is broken.")

    f.certificate = {
        "samples": samples,
        "quasi_random": quasi,
        "seed": seed,
        "min_root_modulus": smallest,
        "torus_gap": float(gap),
    }
    return f


# ── singular points ───────────────────────────────────────────────────────────

_SNAP = (1 + 0j, -1 + 0j, 1j, -1j)


def _snap(w: complex) -> complex:
    w = w / abs(w)
    for s in _SNAP:
        if abs(w - s) <= SNAP_TOL:
            return s
    return w


def _unimodular_resultant_roots(P, PT, eliminate, keep, tol: float) -> list[complex]:
    import sympy

    res = sympy.resultant(P, PT, eliminate)
    res = sympy.expand(res)
    if res == 0:
        raise ResultantDegenerate(
            f"Res_{eliminate}(p, p̃) vanishes identically; p and p̃ share a factor."
        )
    poly = sympy.Poly(res, keep)
    if poly.degree() <= 0:
        return []
    sqf = sympy.Poly(sympy.sqf_part(poly.as_expr()), keep)
    found = []
    for r in sqf.nroots(n=30, maxsteps=200):
        w = complex(r)
        if abs(abs(w) - 1.0) <= tol:
            found.append(_snap(w))
    return found


def _principal(w: complex) -> float:
    a = float(np.angle(w))
    return math.pi if a <= -math.pi + 1e-12 else a


def singularities(f: Rif, tol: float = UNIMODULAR_TOL, dedup: float = DEDUP_TOL) -> list[SingularPoint]:
    """
    Points of 𝕋² where p and p̃ both vanish, each with its nontangential value.

    Candidates come from the unimodular roots of the square-free parts of
    Res_{z₁}(p, p̃) and Res_{z₂}(p, p̃) (exact, sympy); a pair (τ₁, τ₂) is kept when
    both p and p̃ vanish there.
    """
    import sympy

    z1, z2 = sympy.symbols("z1 z2")
    P, PT = to_sympy(f.p, z1, z2), to_sympy(f.ptilde, z1, z2)
    m, n = f.bidegree
    if m == 0 or n == 0:
        # a one-variable p has no common zeros with p̃ on the torus
        return []
    tau2s = _unimodular_resultant_roots(P, PT, z1, z2, tol)
    tau1s = _unimodular_resultant_roots(P, PT, z2, z1, tol)
    scale_p = f.p.l1

    def pairs_for(t2: complex) -> list[tuple[complex, complex]]:
        return [
            (t1, t2) for t1 in tau1s
            if abs(evaluate(f.p, t1, t2)) <= tol * scale_p
            and abs(evaluate(f.ptilde, t1, t2)) <= tol * scale_p
        ]

    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        found = [pt for chunk in pool.map(pairs_for, tau2s) for pt in chunk]

    unique: list[tuple[complex, complex]] = []
    for pt in found:
        if not any(abs(pt[0] - q[0]) <= dedup and abs(pt[1] - q[1]) <= dedup for q in unique):
            unique.append(pt)
    unique.sort(key=lambda t: (_principal(t[1]), _principal(t[0])))
    logger.debug("%s: %d singular point(s)", f.label, len(unique))
    return [SingularPoint(tau=t, lambda0=nontangential_value(f, t)) for t in unique]


def nontangential_value(f: Rif, tau: tuple, dps: int = 50, kmin: int = 8, kmax: int = 20) -> complex:
    """
    lim φ(rτ) as r → 1⁻, by two rounds of Richardson extrapolation on
    r = 1 − 2⁻ᵏ in extended precision.  Raises NoLimit.
    """
    import mpmath

    ctx = mpmath.MPContext()
    ctx.dps = dps
    t1, t2 = ctx.convert(complex(tau[0])), ctx.convert(complex(tau[1]))
    vals = []
    for k in range(kmin, kmax + 1):
        r = 1 - ctx.mpf(2) ** (-k)
        den = eval_mp(f.p, r * t1, r * t2, ctx)
        if den == 0:
            raise NoLimit(f"p vanishes on the radius to τ = ({tau[0]}, {tau[1]}) at r = 1 − 2^-{k}.")
        vals.append(f.evaluate_mp(r * t1, r * t2, ctx))
    once = [2 * b - a for a, b in zip(vals, vals[1:])]
    twice = [(4 * b - a) / 3 for a, b in zip(once, once[1:])]
    spread = abs(twice[-1] - twice[-2])
    lam = twice[-1]
    if spread >= 1e-6:
        raise NoLimit(
            f"Radial values at τ = ({complex(tau[0]):.6g}, {complex(tau[1]):.6g}) do not settle "
            f"(last extrapolants differ by {float(spread):.3g})."
        )
    if abs(abs(lam) - 1) > 1e-8:
        raise NoLimit(
            f"Radial limit at τ = ({complex(tau[0]):.6g}, {complex(tau[1]):.6g}) has modulus "
            f"{float(abs(lam)):.10g}, expected 1."
        )
    return complex(lam / abs(lam))
