"""
z3 when it is installed, otherwise a small evaluator with the same surface.

Verification suites only state facts about numbers that are already known
(contact orders, multiplicities, branch counts), so the fallback never has to
search: every expression is a closed formula and `Solver.check` just evaluates
the conjunction of what was added.

Supported either way: BoolVal, Real, RealVal, And, Or, Not, Implies, named,
Solver, sat, unsat, and the comparison / arithmetic operators on reals.
"""
from __future__ import annotations

try:
    import z3 as _z3

    _z3.BoolVal(True)
    from z3 import And, BoolVal, Not, Or, Real, RealVal, Solver, sat, unsat

    def Implies(a, b):
        expr = _z3.Implies(a, b)
        expr._repr = f"If {a}, then {b}"
        expr._antecedent = a
        return expr

    def named(label: str, expr):
        expr._expr_repr = getattr(expr, "_repr", repr(expr))
        expr._repr = label
        return expr

    Z3_REAL = True

except Exception:
    Z3_REAL = False

    class _Expr:
        """A closed formula: `fn()` gives its value, `_repr` its text."""

        def __init__(self, fn, text: str = "<expr>"):
            self._fn = fn
            self._repr = text

        def __call__(self):
            return self._fn()

        def __repr__(self):
            return self._repr

        def __eq__(self, other):
            return _binop(self, other, lambda a, b: a == b, "==")

        def __ne__(self, other):
            return _binop(self, other, lambda a, b: a != b, "!=")

        def __lt__(self, other):
            return _binop(self, other, lambda a, b: a < b, "<")

        def __le__(self, other):
            return _binop(self, other, lambda a, b: a <= b, "≤")

        def __gt__(self, other):
            return _binop(self, other, lambda a, b: a > b, ">")

        def __ge__(self, other):
            return _binop(self, other, lambda a, b: a >= b, "≥")

        def __add__(self, other):
            return _binop(self, other, lambda a, b: a + b, "+")

        def __sub__(self, other):
            return _binop(self, other, lambda a, b: a - b, "-")

        def __mul__(self, other):
            return _binop(self, other, lambda a, b: a * b, "*")

        def __and__(self, other):
            return And(self, other)

        def __or__(self, other):
            return Or(self, other)

        def __invert__(self):
            return Not(self)

        __hash__ = object.__hash__

    def _lit(v) -> _Expr:
        return v if isinstance(v, _Expr) else _Expr(lambda _v=v: _v, repr(v))

    def _binop(a, b, op, sym: str) -> _Expr:
        a, b = _lit(a), _lit(b)
        return _Expr(lambda: op(a(), b()), f"({a} {sym} {b})")

    def _flatten(args) -> list[_Expr]:
        if len(args) == 1 and not isinstance(args[0], _Expr) and hasattr(args[0], "__iter__"):
            args = tuple(args[0])
        return [_lit(a) for a in args]

    def BoolVal(v) -> _Expr:
        return _Expr(lambda _v=bool(v): _v, str(bool(v)))

    def Real(name: str, value: float = 0.0) -> _Expr:
        return _Expr(lambda _v=float(value): _v, name)

    def RealVal(v) -> _Expr:
        return _Expr(lambda _v=float(v): _v, repr(float(v)))

    def And(*args) -> _Expr:
        parts = _flatten(args)
        return _Expr(lambda: all(bool(a()) for a in parts),
                     f"And({', '.join(map(repr, parts))})")

    def Or(*args) -> _Expr:
        parts = _flatten(args)
        return _Expr(lambda: any(bool(a()) for a in parts),
                     f"Or({', '.join(map(repr, parts))})")

    def Not(a) -> _Expr:
        a = _lit(a)
        return _Expr(lambda: not bool(a()), f"Not({a})")

    def Implies(a, b) -> _Expr:
        a, b = _lit(a), _lit(b)
        expr = _Expr(lambda: (not bool(a())) or bool(b()), f"If {a}, then {b}")
        expr._antecedent = a
        return expr

    def named(label: str, expr):
        expr = _lit(expr)
        expr._expr_repr = expr._repr
        expr._repr = label
        return expr

    class _Result:
        def __init__(self, ok: bool):
            self._ok = ok

        def __eq__(self, other):
            return self._ok == (other is sat)

        __hash__ = object.__hash__

    sat = _Result(True)
    unsat = _Result(False)

    class Solver:
        def __init__(self):
            self._exprs: list = []

        def add(self, *exprs):
            self._exprs.extend(exprs)

        def check(self):
            ok = all(bool(e()) if callable(e) else bool(e) for e in self._exprs)
            return sat if ok else unsat

        def __repr__(self):
            return f"Solver({len(self._exprs)} constraints)"
