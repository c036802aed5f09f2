"""
Suite base class.

A suite is a named group of invariants over the facts of one analysis report.
Subclasses implement `constraints(self, P)`; `P` exposes every fact as an
attribute (a z3 term) and the raw numbers through `P.value(name)`, which is
how a suite learns how many singular points or probe pairs it has to cover.

Example
-------
class Parity(Suite):
    name = "parity"

    def constraints(self, P):
        return [named(f"parity/even τ{k}", getattr(P, f"tau{k}_K1_even"))
                for k in range(int(P.value("singular_count")))]
"""
from __future__ import annotations


class FactNamespace:
    """Attribute access over {fact name → z3 term}, plus the raw values."""

    def __init__(self, fact_vars: dict, raw: dict | None = None):
        self._vars = fact_vars
        self._raw = raw or {}

    def __getattr__(self, name: str):
        try:
            return self._vars[name]
        except KeyError:
            raise AttributeError(
                f"Fact '{name}' not found.  Available facts: {sorted(self._vars)}"
            )

    def value(self, name: str, default=0):
        return self._raw.get(name, default)

    def has(self, name: str) -> bool:
        return name in self._vars

    def __repr__(self):
        return f"Facts({sorted(self._vars)})"


class Suite:
    name: str = ""
    description: str = ""

    def constraints(self, P: FactNamespace) -> list:
        raise NotImplementedError(
            f"{self.__class__.__name__} must implement constraints(self, P)."
        )

    def __repr__(self):
        return f"Suite(name={self.name!r})"
