"""
Building rational inner functions.

  embed(r)                 level-set embedding: 𝒞_λ(φ) ∩ 𝕋² = 𝒵_r ∩ 𝕋²
  glue(f)                  value curve of the result = 𝒞_i(f) ∪ 𝒞_{−i}(f)
  interlace_1d / _2d       Pick test for R/Q by zero interlacing
  half_plane_pair(f)       (R, Q) with R/Q = β⁻¹∘φ∘β on the upper half-plane
  rif_from_transfer(A, Y)  resolvent entry ⟨(A − z_Y)⁻¹e₀, e₀⟩ pulled back to 𝔻²
  catalog(name)            shipped fixtures
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rifscope.errors import (
    CommonRoot, DegenerateInput, DegenerateResolvent, InvalidInput, NotSelfAdjoint,
    NotSymmetric, UnknownFixture,
)
from rifscope.poly2 import (
    BiPoly, cayley_transfer, compose_line, essential_symmetry, euler, exact_coefficient,
    from_sympy, mul, reflect, scale,
)
from rifscope.rif import DEFAULT_SEED, Rif, check_semi_stable, max_workers, validate
from rifscope.roots import roots_univariate

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).parent / "fixtures"

IDENTITY_TOL = 1e-12
ROOT_SEPARATION = 1e-8
REAL_TOL = 1e-8
MAX_TRANSFER_SIZE = 8
X_RANGE = 5.0
Y_DECADES = (-2.0, 2.0)


# ── embedding and gluing ──────────────────────────────────────────────────────

def _identity_gap(lhs: np.ndarray, rhs: np.ndarray) -> float:
    scale_ = max(float(np.max(np.abs(rhs))), 1.0)
    return float(np.max(np.abs(lhs - rhs))) / scale_


def embed(r: BiPoly, samples: int = 200, *, quasi: int = 100000,
          seed: int = DEFAULT_SEED, name: str = "") -> Rif:
    """
    φ = −p̃/p with p̃ = z₁∂r/∂z₁ + z₂∂r/∂z₂ at the bidegree (m, n) of r.

    r must be essentially symmetric (r̃ = λr) and have no zeros in 𝔻².  The
    λ-level set of φ on the torus is then exactly the zero set of r there.
    Checks conj(λ)·p + p̃ = (m+n)·r coefficientwise before returning.
    """
    if not isinstance(r, BiPoly):
        r = BiPoly(r)
    r = r.tight()
    m, n = r.bidegree
    if m + n == 0:
        raise InvalidInput("embed needs a non-constant polynomial r.")
    lam = essential_symmetry(r)
    if lam is None:
        raise NotSymmetric(
            "r is not essentially symmetric: no unimodular λ with r̃ = λr.\n"
            "Symmetrise it first (e.g. r + w·r̃ for a unimodular w)."
        )
    check_semi_stable(r, samples, quasi, seed)

    pt = euler(r)
    p_full = reflect(pt)
    gap = _identity_gap(np.conj(lam) * p_full.coeffs + pt.coeffs, (m + n) * r.coeffs)
    if gap > IDENTITY_TOL:
        raise InvalidInput(f"Embedding identity fails (relative gap {gap:.3g}); r is malformed.")

    p = p_full.tight()
    mt, nt = p.bidegree
    logger.debug("embed: r of bidegree (%d, %d), λ = %s, p of bidegree (%d, %d)", m, n, lam, mt, nt)
    f = validate(p, -1, (m - mt, n - nt), samples, quasi=quasi, seed=seed, name=name)
    f.certificate["symmetry"] = [lam.real, lam.imag]
    f.certificate["identity_gap"] = gap
    return f


def glue(f: Rif, samples: int = 200, *, quasi: int = 100000, seed: int = DEFAULT_SEED) -> Rif:
    """embed(p² + num²) where num = ηz₁ᴹz₂ᴺp̃ and p sits at the same bidegree."""
    num, den = f.numerator(), f.denominator()
    r = den * den + num * num
    plus = BiPoly(num.coeffs + 1j * den.coeffs, padded=True)
    minus = BiPoly(num.coeffs - 1j * den.coeffs, padded=True)
    gap = (plus * minus - r).norm / max(r.norm, 1.0)
    if gap > IDENTITY_TOL:
        raise InvalidInput(f"Gluing identity fails (relative gap {gap:.3g}).")
    name = f"{f.name}~glued" if f.name else ""
    return embed(r, samples, quasi=quasi, seed=seed, name=name)


# ── interlacing ───────────────────────────────────────────────────────────────

@dataclass
class InterlaceVerdict:
    is_pick: bool
    case: str
    witness: tuple | None = None
    reason: str = ""
    vacuous: bool = False
    trials: int = 0

    def to_dict(self) -> dict:
        return {
            "is_pick": self.is_pick,
            "case": self.case,
            "witness": None if self.witness is None else [list(v) for v in self.witness],
            "reason": self.reason,
            "vacuous": self.vacuous,
            "trials": self.trials,
        }


def _zeros(c: np.ndarray) -> tuple[np.ndarray, complex]:
    """Roots and the effective leading coefficient."""
    rs = roots_univariate(c)
    lead = complex(c[len(c) - 1 - rs.degree_deficit])
    return rs.roots, lead


def _real(roots: np.ndarray, label: str) -> tuple[np.ndarray | None, str]:
    if roots.size == 0:
        return np.zeros(0), ""
    bad = np.abs(roots.imag) > REAL_TOL * np.maximum(1.0, np.abs(roots))
    if np.any(bad):
        z = roots[np.argmax(bad)]
        return None, f"{label} has a non-real zero at {z:.6g}"
    return np.sort(roots.real), ""


def _cancel_common(a: np.ndarray, b: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray, int]:
    keep_b = np.ones(len(b), dtype=bool)
    keep_a = np.ones(len(a), dtype=bool)
    for i, z in enumerate(a):
        d = np.where(keep_b, np.abs(b - z), np.inf)
        if d.size and d.min() <= tol * max(1.0, abs(z)):
            keep_b[int(np.argmin(d))] = False
            keep_a[i] = False
    return a[keep_a], b[keep_b], int((~keep_a).sum())


_PATTERNS = {
    # (deg R − deg Q, sign C): case, which zero set leads
    (-1, -1): ("(i)", "b"),
    (0, -1): ("(ii a)", "a"),
    (0, 1): ("(ii b)", "b"),
    (1, 1): ("(iii)", "a"),
}


def _interlace_verdict(a: np.ndarray, b: np.ndarray, C: complex) -> InterlaceVerdict:
    a, why = _real(a, "R")
    if a is None:
        return InterlaceVerdict(False, "fail", reason=why)
    b, why = _real(b, "Q")
    if b is None:
        return InterlaceVerdict(False, "fail", reason=why)
    if abs(C.imag) > REAL_TOL * abs(C):
        return InterlaceVerdict(False, "fail", reason=f"leading ratio C = {C:.6g} is not real")
    c = C.real
    m, n = len(a), len(b)
    key = (m - n, 1 if c > 0 else -1)
    if key not in _PATTERNS:
        if abs(m - n) > 1:
            reason = f"deg R = {m} and deg Q = {n} differ by more than one"
        else:
            reason = f"C = {c:.6g} has the wrong sign for deg R = {m}, deg Q = {n}"
        return InterlaceVerdict(False, "fail", reason=reason)
    case, lead = _PATTERNS[key]
    first, second = (a, b) if lead == "a" else (b, a)
    merged = np.empty(m + n)
    merged[0::2] = first
    merged[1::2] = second
    if merged.size > 1 and np.any(np.diff(merged) <= 0):
        k = int(np.argmax(np.diff(merged) <= 0))
        return InterlaceVerdict(
            False, "fail",
            reason=f"zeros of R and Q do not interlace as in case {case} "
                   f"(order breaks between {merged[k]:.6g} and {merged[k + 1]:.6g})",
        )
    return InterlaceVerdict(True, case)


def interlace_1d(R, Q) -> InterlaceVerdict:
    """
    Is R/Q a Pick function?  Both must have only real zeros that interlace,
    with the sign of C = lead(R)/lead(Q) fixed by the degree difference.
    """
    r = np.atleast_1d(np.asarray(getattr(R, "coef", R), dtype=complex))
    q = np.atleast_1d(np.asarray(getattr(Q, "coef", Q), dtype=complex))
    a, lead_r = _zeros(r)
    b, lead_q = _zeros(q)
    if a.size and b.size:
        d = np.abs(a[:, None] - b[None, :])
        if d.min() < ROOT_SEPARATION:
            i, j = np.unravel_index(np.argmin(d), d.shape)
            raise CommonRoot(complex(a[i]))
    return _interlace_verdict(a, b, lead_r / lead_q)


def _slice_verdict(R: BiPoly, Q: BiPoly, x, y) -> InterlaceVerdict | None:
    try:
        a, lead_r = _zeros(compose_line(R, x, y).coef)
        b, lead_q = _zeros(compose_line(Q, x, y).coef)
    except DegenerateInput:
        logger.debug("skipping a degenerate slice at x=%s y=%s", x, y)
        return None
    a, b, k = _cancel_common(a, b, ROOT_SEPARATION)
    if k:
        logger.debug("cancelled %d common zero(s) on the slice x=%s y=%s", k, x, y)
    return _interlace_verdict(a, b, lead_r / lead_q)


def interlace_2d(R: BiPoly, Q: BiPoly, trials: int = 10000, seed: int = DEFAULT_SEED) -> InterlaceVerdict:
    """
    Look for a line w ↦ x + y·w (x ∈ [−5, 5]², y log-uniform in [10⁻², 10²]²)
    along which R/Q fails the one-variable test.  The verdict is "no
    counterexample in `trials` slices"; the lowest failing trial index wins.
    """
    if trials <= 0:
        return InterlaceVerdict(True, "vacuous", reason="no slices sampled", vacuous=True)
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-X_RANGE, X_RANGE, size=(trials, 2))
    ys = 10.0 ** rng.uniform(*Y_DECADES, size=(trials, 2))

    def scan(bounds: tuple[int, int]):
        for k in range(*bounds):
            x, y = tuple(xs[k]), tuple(ys[k])
            verdict = _slice_verdict(R, Q, x, y)
            if verdict is not None and not verdict.is_pick:
                verdict.witness = (x, y)
                return k, verdict
        return None

    workers = max_workers()
    step = -(-trials // workers)
    chunks = [(s, min(s + step, trials)) for s in range(0, trials, step)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        found = [hit for hit in pool.map(scan, chunks) if hit is not None]
    if found:
        k, verdict = min(found, key=lambda hit: hit[0])
        verdict.trials = trials
        verdict.reason = f"slice {k}: {verdict.reason}"
        return verdict
    return InterlaceVerdict(True, "all-slices", trials=trials)


def half_plane_pair(f: Rif) -> tuple[BiPoly, BiPoly]:
    """
    R, Q with real coefficients and R/Q = β⁻¹∘φ∘β, β(w) = (1 + iw)/(1 − iw).

    From r = num − den and q = num + den: R/Q = −i·r_β/q_β, rescaled by the
    unimodular constant that makes Q real.
    """
    num, den = f.numerator(), f.denominator()
    bideg = f.full_bidegree
    rb = cayley_transfer(BiPoly(num.coeffs - den.coeffs, padded=True), bideg)
    qb = cayley_transfer(BiPoly(num.coeffs + den.coeffs, padded=True), bideg)
    k = np.unravel_index(np.argmax(np.abs(qb.coeffs)), qb.coeffs.shape)
    u = np.conj(qb.coeffs[k]) / abs(qb.coeffs[k])
    R = -1j * u * rb.coeffs
    Q = u * qb.coeffs
    scale_ = max(np.max(np.abs(Q)), np.max(np.abs(R)))
    residue = max(np.max(np.abs(R.imag)), np.max(np.abs(Q.imag))) / scale_
    if residue > 1e-9:
        logger.warning("half_plane_pair: imaginary residue %.3g after normalisation", residue)
    return BiPoly(R.real.astype(complex)), BiPoly(Q.real.astype(complex))


# ── transfer functions ────────────────────────────────────────────────────────

def _entry(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise InvalidInput(f"Complex matrix entries are [re, im] pairs, got {v!r}.")
        return complex(v[0], v[1])
    return complex(v)


def _matrix(A) -> np.ndarray:
    try:
        rows = [[_entry(v) for v in row] for row in A]
        a = np.array(rows, dtype=complex)
    except (TypeError, ValueError) as e:
        raise InvalidInput(f"Expected a square matrix (list of rows), got {A!r}.") from e
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidInput(f"Expected a non-empty square matrix, got shape {a.shape}.")
    if a.shape[0] > MAX_TRANSFER_SIZE:
        raise InvalidInput(
            f"Transfer matrices are limited to {MAX_TRANSFER_SIZE}×{MAX_TRANSFER_SIZE} "
            f"(symbolic cofactor expansion); got {a.shape[0]}×{a.shape[0]}."
        )
    return a


def _selector(Y, size: int) -> list[int]:
    y = np.asarray(Y, dtype=float)
    if y.ndim == 2:
        if y.shape != (size, size) or np.any(y - np.diag(np.diag(y))):
            raise InvalidInput(f"Y must be a diagonal {size}×{size} matrix.")
        y = np.diag(y)
    if y.shape != (size,) or not np.all(np.isin(y, (0.0, 1.0))):
        raise InvalidInput(f"Y must have {size} diagonal entries from {{0, 1}}, got {Y!r}.")
    return [int(v) for v in y]


def _symbols():
    import sympy
    return sympy.symbols("z1 z2")


def resolvent_entry(A, Y):
    """⟨(A − z_Y)⁻¹e₀, e₀⟩ as a sympy expression in z1, z2, z_Y = Yz₁ + (1−Y)z₂."""
    import sympy

    a = _matrix(A)
    if np.max(np.abs(a - a.conj().T)) > 1e-12 * max(1.0, float(np.max(np.abs(a)))):
        raise NotSelfAdjoint("A must be self-adjoint (A = A*).")
    sel = _selector(Y, a.shape[0])
    z1, z2 = _symbols()
    M = sympy.Matrix(a.shape[0], a.shape[1], lambda i, j: exact_coefficient(a[i, j]))
    M -= sympy.diag(*[z1 if s else z2 for s in sel])
    det = sympy.expand(M.det(method="berkowitz"))
    cof = sympy.expand(M[1:, 1:].det(method="berkowitz")) if a.shape[0] > 1 else sympy.Integer(1)
    if det == 0 or cof == 0:
        raise DegenerateResolvent(
            "The (0,0) cofactor or the determinant of A − z_Y vanishes identically; "
            "the resolvent entry is not a rational function of (z₁, z₂)."
        )
    return sympy.cancel(cof / det)


def _pullback(f, cayley: str):
    import sympy

    z1, z2 = _symbols()
    I = sympy.I
    if cayley == "alpha":
        g = f.subs({z1: I * (1 + z1) / (1 - z1), z2: I * (1 + z2) / (1 - z2)}, simultaneous=True)
        return (g - I) / (g + I)
    if cayley == "beta":
        g = f.subs({z1: I * (1 - z1) / (1 + z1), z2: I * (1 - z2) / (1 + z2)}, simultaneous=True)
        return (1 + I * g) / (1 - I * g)
    raise InvalidInput(f"Unknown Cayley map {cayley!r}; expected 'alpha' or 'beta'.")


def _strip_monomial(c: np.ndarray) -> tuple[np.ndarray, tuple[int, int]]:
    rows = np.flatnonzero(np.any(c != 0, axis=1))
    cols = np.flatnonzero(np.any(c != 0, axis=0))
    M, N = int(rows[0]), int(cols[0])
    return c[M:, N:], (M, N)


def rational_to_rif(num: BiPoly, den: BiPoly, samples: int = 200, *, seed: int = DEFAULT_SEED,
                    name: str = "") -> Rif:
    """Write num/den as η z^M p̃/p and validate it."""
    if num.is_zero or den.is_zero:
        raise DegenerateResolvent("The composed function is identically zero or has no denominator.")
    c0 = den.coeffs[0, 0]
    u = np.conj(c0) / abs(c0) if c0 != 0 else 1.0
    p = scale(den, u)
    core, monomial = _strip_monomial(scale(num, u).coeffs)
    pt = reflect(p).coeffs
    if core.shape != pt.shape:
        raise DegenerateResolvent(
            f"Numerator bidegree {tuple(d - 1 for d in core.shape)} does not match the "
            f"reflection of the denominator {p.bidegree}; the function is not inner."
        )
    k = np.unravel_index(np.argmax(np.abs(pt)), pt.shape)
    eta = complex(core[k] / pt[k])
    if np.max(np.abs(core - eta * pt)) > 1e-9 * np.max(np.abs(core)) or abs(abs(eta) - 1) > 1e-9:
        raise DegenerateResolvent("The composed function is not of the form η z^M p̃/p.")
    return validate(p, eta, monomial, samples, seed=seed, name=name)


def rif_from_transfer(A, Y, cayley: str = "alpha", samples: int = 200, *,
                      seed: int = DEFAULT_SEED, name: str = "") -> Rif:
    """
    Resolvent entry f of a self-adjoint A (at most 8×8) moved to the bidisk:
    "alpha" gives α⁻¹∘f∘α with α(z) = i(1+z)/(1−z), "beta" gives β∘f∘β⁻¹.
    """
    import sympy

    f = resolvent_entry(A, Y)
    z1, z2 = _symbols()
    num, den = sympy.fraction(sympy.cancel(sympy.together(_pullback(f, cayley))))
    logger.debug("transfer: f = %s, pulled back with %s", f, cayley)
    return rational_to_rif(from_sympy(num, z1, z2), from_sympy(den, z1, z2), samples,
                           seed=seed, name=name)


# ── fixtures and random inputs ────────────────────────────────────────────────

def catalog_names() -> list[str]:
    return sorted(path.stem for path in FIXTURE_DIR.glob("*.json"))


def catalog(name: str, validated: bool = False) -> Rif:
    path = FIXTURE_DIR / f"{name}.json"
    if not path.exists():
        raise UnknownFixture(name, catalog_names())
    doc = json.loads(path.read_text())
    f = Rif.from_json(doc)
    if validated:
        return validate(f.p, f.eta, f.monomial, name=f.name)
    return f


def _unimodular(rng) -> complex:
    return complex(np.exp(2j * np.pi * rng.random()))


def _symmetrised(rng) -> BiPoly:
    """p + w·p̃ for a bilinear p with no zeros on the closed bidisk."""
    a, b, d = rng.uniform(-1, 1, 3) + 1j * rng.uniform(-1, 1, 3)
    c = 1.0 + abs(a) + abs(b) + abs(d)
    p = BiPoly(np.array([[c, -b], [-a, -d]], dtype=complex))
    return BiPoly(p.coeffs + _unimodular(rng) * reflect(p).coeffs)


def random_symmetric(rng, max_bidegree: tuple[int, int] = (3, 3)) -> BiPoly:
    """
    Essentially symmetric r with no zeros in 𝔻², as a product of distinct
    factors 1 − w z₁z₂, 1 − w z₁, 1 − w z₂ and symmetrised bilinear ones
    (|w| = 1).  Always contains a factor in both variables.
    """
    mmax, nmax = max_bidegree
    if mmax < 1 or nmax < 1:
        raise InvalidInput("random_symmetric needs max_bidegree ≥ (1, 1).")
    makers = {
        "diagonal": lambda: BiPoly(np.array([[1, 0], [0, -_unimodular(rng)]], dtype=complex)),
        "line1": lambda: BiPoly(np.array([[1], [-_unimodular(rng)]], dtype=complex)),
        "line2": lambda: BiPoly(np.array([[1, -_unimodular(rng)]], dtype=complex)),
        "bilinear": lambda: _symmetrised(rng),
    }
    r = makers[rng.choice(["diagonal", "bilinear"])]()
    for _ in range(int(rng.integers(0, mmax + nmax))):
        factor = makers[rng.choice(list(makers))]()
        m, n = r.bidegree
        fm, fn = factor.bidegree
        if m + fm <= mmax and n + fn <= nmax:
            r = mul(r, factor)
    return r
