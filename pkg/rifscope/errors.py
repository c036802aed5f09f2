"""
Exception hierarchy.

Two families, matching the CLI exit codes:

  InvalidInput      (ValueError)    → exit 1   the input is not what the call accepts
  NumericalFailure  (RuntimeError)  → exit 2   the numerics could not certify an answer

Invariant violations found by `rifscope verify` are reported by the
judgement engine, not raised (exit 3).
"""
from __future__ import annotations


class InvalidInput(ValueError):
    """The caller handed over something the operation does not accept."""


class NumericalFailure(RuntimeError):
    """A computation ran but its result could not be certified."""


# ── invalid input ──────────────────────────────────────────────────────────────

class DegenerateInput(InvalidInput):
    pass


class AmbiguousSymmetry(InvalidInput):
    def __init__(self, lam: complex):
        self.lam = lam
        super().__init__(
            f"r̃ = λr holds with |λ| = {abs(lam):.6g} ≠ 1.  "
            "The declared bidegree is probably not tight; trim the coefficient matrix."
        )


class NotSemiStable(InvalidInput):
    def __init__(self, witness: tuple, message: str | None = None):
        self.witness = tuple(complex(w) for w in witness)
        z1, z2 = self.witness
        super().__init__(
            message or
            f"Polynomial vanishes inside the bidisk at ({z1:.6g}, {z2:.6g}).\n"
            "A rational inner function needs a denominator with no zeros in D²."
        )


class CommonFactor(InvalidInput):
    pass


class NotSymmetric(InvalidInput):
    pass


class CommonRoot(InvalidInput):
    def __init__(self, root: complex):
        self.root = root
        super().__init__(
            f"R and Q share the root {root:.6g}.  Cancel it before checking interlacing."
        )


class NotSelfAdjoint(InvalidInput):
    pass


class DegenerateResolvent(InvalidInput):
    pass


class UnknownFixture(InvalidInput):
    def __init__(self, name: str, available: list[str]):
        self.name = name
        super().__init__(
            f"No fixture named {name!r}.  Available fixtures: {', '.join(available)}"
        )


class DegenerateLevel(InvalidInput):
    pass


class VerticalComponent(InvalidInput):
    def __init__(self, lam: complex, tau2: complex):
        self.lam = lam
        self.tau2 = tau2
        super().__init__(
            f"Level set for λ = {lam:.6g} contains the line {{z₂ = {tau2:.6g}}}; "
            "branch sums are not defined for it.  Pick another level value."
        )


class IdenticallyZero(InvalidInput):
    pass


# ── numerical failure ──────────────────────────────────────────────────────────

class TrackingAmbiguity(NumericalFailure):
    def __init__(self, theta: float, ratio: float, index: int = -1):
        self.theta = theta
        self.ratio = ratio
        self.index = index
        super().__init__(
            f"Root matching is ambiguous at θ = {theta:.9g} "
            f"(second-best assignment within {ratio:.3f}× of the best).  Refine the grid."
        )


class ResultantDegenerate(NumericalFailure):
    pass


class NoLimit(NumericalFailure):
    pass


class InsufficientSamples(NumericalFailure):
    pass


class NoisyData(NumericalFailure):
    pass


class EcoViolation(NumericalFailure):
    def __init__(self, tau: tuple, k1: int, k2: int):
        self.tau = tau
        self.k1 = k1
        self.k2 = k2
        super().__init__(
            f"Contact orders disagree at τ = {_fmt_point(tau)}: K1 = {k1}, K2 = {k2} "
            "after the extended-precision refit.  This points at a tracing problem."
        )


class CrossCheckFailure(NumericalFailure):
    pass


class ShearFailure(NumericalFailure):
    pass


class AuditMismatch(NumericalFailure):
    def __init__(self, table: list[dict], total: int, expected: int):
        self.table = table
        self.total = total
        self.expected = expected
        rows = "\n".join(
            f"  {row['location']:<10} {_fmt_point(row['point'])}  N = {row['multiplicity']}"
            for row in table
        )
        super().__init__(
            f"Bézout audit found {total} intersections, expected {expected}:\n{rows}"
        )


def _fmt_point(pt) -> str:
    return "(" + ", ".join(
        "∞" if w is None else f"{complex(w):.6g}" for w in pt
    ) + ")"
