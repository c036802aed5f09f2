"""
Bivariate complex polynomials with a declared bidegree.

A BiPoly stores a dense coefficient matrix: coeffs[i][j] is the coefficient of
z₁ⁱz₂ʲ, and the bidegree (m, n) is read off its shape.  Reflection

    p̃(z₁, z₂) = z₁ᵐ z₂ⁿ · conj(p(1/z̄₁, 1/z̄₂))

depends on that declared bidegree, so zero rows or columns are trimmed unless
the caller asks for padding explicitly (the flag is kept on the value).

One-variable results are numpy.polynomial.Polynomial objects (low degree first)
and are referred to as UniPoly throughout the package.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as npoly
from scipy.signal import convolve2d

from rifscope.errors import AmbiguousSymmetry, InvalidInput

logger = logging.getLogger(__name__)

UniPoly = Polynomial

SYMMETRY_TOL = 1e-10

POLY_SCHEMA = "rifscope.poly.v1"


def _trim(c: np.ndarray) -> np.ndarray:
    rows = np.flatnonzero(np.any(c != 0, axis=1))
    cols = np.flatnonzero(np.any(c != 0, axis=0))
    if rows.size == 0:
        return np.zeros((1, 1), dtype=complex)
    return c[: rows[-1] + 1, : cols[-1] + 1]


def _pad(c: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if c.shape[0] > shape[0] or c.shape[1] > shape[1]:
        raise InvalidInput(
            f"Cannot pad a {c.shape[0] - 1}×{c.shape[1] - 1} coefficient matrix "
            f"down to bidegree ({shape[0] - 1}, {shape[1] - 1})."
        )
    out = np.zeros(shape, dtype=complex)
    out[: c.shape[0], : c.shape[1]] = c
    return out


@dataclass(frozen=True, eq=False)
class BiPoly:
    """Immutable bivariate polynomial.  See the module docstring."""

    coeffs: np.ndarray
    padded: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex, ndmin=2)
        if c.ndim != 2:
            raise InvalidInput(f"Coefficient array must be 2-D, got shape {c.shape}.")
        tight = _trim(c)
        if not self.padded or tight.shape == c.shape:
            c = tight
            object.__setattr__(self, "padded", False)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # ── constructors ──────────────────────────────────────────────────────────

    @classmethod
    def from_terms(cls, terms: dict, bidegree: tuple[int, int] | None = None) -> "BiPoly":
        """Build from {(i, j): coefficient}.  A bidegree larger than the terms pads."""
        if not terms:
            return cls(np.zeros((1, 1)))
        m = max(i for i, _ in terms)
        n = max(j for _, j in terms)
        if bidegree is not None:
            m, n = max(m, bidegree[0]), max(n, bidegree[1])
        c = np.zeros((m + 1, n + 1), dtype=complex)
        for (i, j), v in terms.items():
            c[i, j] += v
        return cls(c, padded=bidegree is not None)

    @classmethod
    def constant(cls, value: complex) -> "BiPoly":
        return cls(np.array([[value]], dtype=complex))

    # ── shape ─────────────────────────────────────────────────────────────────

    @property
    def bidegree(self) -> tuple[int, int]:
        return self.coeffs.shape[0] - 1, self.coeffs.shape[1] - 1

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    @property
    def norm(self) -> float:
        """Max-coefficient norm ‖p‖∞."""
        return float(np.max(np.abs(self.coeffs)))

    @property
    def l1(self) -> float:
        """Σ|c_ij|, an upper bound for |p| on the closed bidisk."""
        return float(np.sum(np.abs(self.coeffs)))

    def pad_to(self, m: int, n: int) -> "BiPoly":
        return BiPoly(_pad(self.coeffs, (m + 1, n + 1)), padded=True)

    def tight(self) -> "BiPoly":
        return BiPoly(self.coeffs) if self.padded else self

    # ── python protocol ───────────────────────────────────────────────────────

    def __call__(self, z1, z2):
        return evaluate(self, z1, z2)

    def __eq__(self, other):
        if not isinstance(other, BiPoly):
            return NotImplemented
        a, b = _trim(self.coeffs), _trim(other.coeffs)
        return a.shape == b.shape and bool(np.array_equal(a, b))

    __hash__ = None

    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        if isinstance(other, BiPoly):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1)

    def __repr__(self):
        flag = ", padded" if self.padded else ""
        return f"BiPoly({format_poly(self)}; bidegree={self.bidegree}{flag})"


def _coerce(x) -> BiPoly:
    return x if isinstance(x, BiPoly) else BiPoly.constant(x)


def format_poly(p: BiPoly, digits: int = 6) -> str:
    terms = []
    for (i, j), c in np.ndenumerate(p.coeffs):
        if c == 0:
            continue
        mono = "".join(
            f"{v}" + (f"^{e}" if e > 1 else "")
            for v, e in (("z1", i), ("z2", j)) if e
        )
        if c.imag == 0:
            coef = f"{c.real:.{digits}g}"
        else:
            coef = f"({c.real:.{digits}g}{c.imag:+.{digits}g}j)"
        if mono and coef in ("1", "-1"):
            coef = coef[:-1]
        terms.append(f"{coef}{'*' if mono and coef not in ('', '-') else ''}{mono}")
    return " + ".join(terms).replace("+ -", "- ") if terms else "0"


# ── evaluation ────────────────────────────────────────────────────────────────

def evaluate(p: BiPoly, z1, z2):
    """Horner evaluation, vectorised over broadcastable z₁, z₂."""
    x, y = np.broadcast_arrays(np.asarray(z1, dtype=complex), np.asarray(z2, dtype=complex))
    out = npoly.polyval2d(x, y, p.coeffs)
    return out[()] if out.ndim == 0 else out


def eval_mp(p: BiPoly, z1, z2, ctx=None):
    """Evaluate in mpmath; `ctx` defaults to the global mp context."""
    if ctx is None:
        import mpmath
        ctx = mpmath.mp
    z1, z2 = ctx.mpc(z1), ctx.mpc(z2)
    acc = ctx.mpc(0)
    for row in p.coeffs[::-1]:
        inner = ctx.mpc(0)
        for c in row[::-1]:
            inner = inner * z2 + ctx.mpc(c.real, c.imag)
        acc = acc * z1 + inner
    return acc


# ── structure ─────────────────────────────────────────────────────────────────

def reflect(p: BiPoly) -> BiPoly:
    """p̃ at the declared bidegree: c̃[i][j] = conj(c[m−i][n−j])."""
    return BiPoly(np.conj(p.coeffs[::-1, ::-1]), padded=True)


def shift(p: BiPoly, M: int, N: int) -> BiPoly:
    """Multiply by z₁ᴹz₂ᴺ."""
    m, n = p.bidegree
    c = np.zeros((m + M + 1, n + N + 1), dtype=complex)
    c[M:, N:] = p.coeffs
    return BiPoly(c, padded=p.padded)


def swap(p: BiPoly) -> BiPoly:
    return BiPoly(p.coeffs.T, padded=p.padded)


def reverse(p: BiPoly, var: int) -> BiPoly:
    """z^deg · p evaluated at 1/z in variable `var` (no conjugation)."""
    _check_var(var)
    c = p.coeffs[::-1, :] if var == 1 else p.coeffs[:, ::-1]
    return BiPoly(c, padded=True)


def _check_var(var: int) -> None:
    if var not in (1, 2):
        raise InvalidInput(f"Variable index must be 1 or 2, got {var!r}.")


# ── arithmetic ────────────────────────────────────────────────────────────────

def _aligned(p: BiPoly, q: BiPoly) -> tuple[np.ndarray, np.ndarray]:
    shape = (max(p.coeffs.shape[0], q.coeffs.shape[0]),
             max(p.coeffs.shape[1], q.coeffs.shape[1]))
    return _pad(p.coeffs, shape), _pad(q.coeffs, shape)


def add(p: BiPoly, q: BiPoly) -> BiPoly:
    a, b = _aligned(p, q)
    return BiPoly(a + b)


def sub(p: BiPoly, q: BiPoly) -> BiPoly:
    a, b = _aligned(p, q)
    return BiPoly(a - b)


def mul(p: BiPoly, q: BiPoly) -> BiPoly:
    return BiPoly(convolve2d(p.coeffs, q.coeffs))


def scale(p: BiPoly, c: complex) -> BiPoly:
    return BiPoly(p.coeffs * complex(c))


def arith(p: BiPoly, q: BiPoly | None, op: str, c: complex | None = None) -> BiPoly:
    """Dispatch on op ∈ {add, sub, mul, scale}; results are tightened."""
    if op == "scale":
        if c is None:
            raise InvalidInput("arith(..., op='scale') needs the constant c.")
        return scale(p, c)
    ops = {"add": add, "sub": sub, "mul": mul}
    if op not in ops:
        raise InvalidInput(f"Unknown op {op!r}; expected one of add, sub, mul, scale.")
    return ops[op](p, q)


def partial(p: BiPoly, var: int) -> BiPoly:
    _check_var(var)
    return BiPoly(npoly.polyder(p.coeffs, axis=var - 1))


def euler(p: BiPoly) -> BiPoly:
    """z₁∂p/∂z₁ + z₂∂p/∂z₂, kept at the bidegree of p."""
    i, j = np.indices(p.coeffs.shape)
    return BiPoly(p.coeffs * (i + j), padded=True)


# ── slices ────────────────────────────────────────────────────────────────────

def slice_at(p: BiPoly, var: int, value: complex) -> Polynomial:
    """Fix variable `var` at `value`; returns the polynomial in the other one."""
    _check_var(var)
    c = p.coeffs.T if var == 2 else p.coeffs
    return Polynomial(npoly.polyval(complex(value), c))


def slice_batch(p: BiPoly, var: int, values) -> np.ndarray:
    """Coefficient rows (low degree first) of many slices at once."""
    _check_var(var)
    c = p.coeffs.T if var == 2 else p.coeffs
    vals = np.asarray(values, dtype=complex)
    return np.atleast_2d(npoly.polyval(vals, c, tensor=True).T)


def compose_line(p: BiPoly, x: tuple[float, float], y: tuple[float, float]) -> Polynomial:
    """p(x₁ + y₁w, x₂ + y₂w) as a polynomial in w."""
    l1 = Polynomial([x[0], y[0]])
    l2 = Polynomial([x[1], y[1]])
    m, n = p.bidegree
    pow1 = [l1 ** i for i in range(m + 1)]
    pow2 = [l2 ** j for j in range(n + 1)]
    acc = Polynomial([0j])
    for (i, j), c in np.ndenumerate(p.coeffs):
        if c != 0:
            acc = acc + c * pow1[i] * pow2[j]
    return acc


def cayley_transfer(p: BiPoly, bidegree: tuple[int, int] | None = None) -> BiPoly:
    """(1−iw₁)ᵐ(1−iw₂)ⁿ · p(β(w₁), β(w₂)) with β(w) = (1+iw)/(1−iw)."""
    m, n = bidegree or p.bidegree
    c = _pad(p.coeffs, (m + 1, n + 1))

    def basis(d: int) -> np.ndarray:
        rows = np.zeros((d + 1, d + 1), dtype=complex)
        for k in range(d + 1):
            poly = Polynomial([1, 1j]) ** k * Polynomial([1, -1j]) ** (d - k)
            rows[k, : len(poly.coef)] = poly.coef
        return rows

    return BiPoly(basis(m).T @ c @ basis(n), padded=True)


# ── symmetry ──────────────────────────────────────────────────────────────────

def essential_symmetry(r: BiPoly, tol: float = SYMMETRY_TOL) -> complex | None:
    """
    Return λ with r̃ = λr (to tol·‖r‖∞), matched at the largest coefficient.

    None when no multiple works.  A fit with |λ| ≠ 1 means the bidegree was not
    tight and raises AmbiguousSymmetry.
    """
    if r.is_zero:
        raise InvalidInput("essential_symmetry needs a nonzero polynomial.")
    rt = reflect(r)
    k = np.unravel_index(np.argmax(np.abs(r.coeffs)), r.coeffs.shape)
    lam = complex(rt.coeffs[k] / r.coeffs[k])
    if np.max(np.abs(rt.coeffs - lam * r.coeffs)) > tol * r.norm:
        return None
    if abs(abs(lam) - 1.0) > tol:
        raise AmbiguousSymmetry(lam)
    return lam / abs(lam)


# ── exact conversion ──────────────────────────────────────────────────────────

def _rational(x: float):
    import sympy
    return sympy.Rational(float(x)).limit_denominator(10 ** 9)


def exact_coefficient(c: complex):
    import sympy
    c = complex(c)
    return _rational(c.real) + sympy.I * _rational(c.imag)


def to_sympy(p: BiPoly, z1, z2):
    """Gaussian-rational sympy expression for p."""
    import sympy
    return sympy.Add(*[
        exact_coefficient(c) * z1 ** i * z2 ** j
        for (i, j), c in np.ndenumerate(p.coeffs) if c != 0
    ])


def from_sympy(expr, z1, z2, bidegree: tuple[int, int] | None = None) -> BiPoly:
    import sympy
    poly = sympy.Poly(sympy.expand(expr), z1, z2)
    terms = {mono: complex(sympy.N(coef, 30)) for mono, coef in poly.terms()}
    if poly.is_zero:
        terms = {}
    return BiPoly.from_terms(terms, bidegree=bidegree)


# ── JSON ──────────────────────────────────────────────────────────────────────

def to_json(p: BiPoly) -> dict:
    doc = {
        "bidegree": list(p.bidegree),
        "coeffs": [[[float(c.real), float(c.imag)] for c in row] for row in p.coeffs],
    }
    if p.padded:
        doc["padded"] = True
    return doc


def from_json(doc: dict) -> BiPoly:
    try:
        m, n = (int(d) for d in doc["bidegree"])
        rows = doc["coeffs"]
        c = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInput(
            f"Malformed polynomial JSON ({e}).  Expected "
            '{"bidegree": [m, n], "coeffs": [[[re, im], ...], ...]}.'
        ) from e
    if c.shape != (m + 1, n + 1):
        raise InvalidInput(
            f"Polynomial JSON declares bidegree ({m}, {n}) but carries a "
            f"{c.shape[0]}×{c.shape[1] if c.ndim == 2 else '?'} coefficient table."
        )
    return BiPoly(c, padded=bool(doc.get("padded", False)))
