"""
Judgement engine: evaluates verification suites against report facts.

Input:  an analysis report (dict), flattened by facts_from_report
Output: {schema, rif_id, results: [{suite, satisfied, score, constraints,
        violations}], summary: {total, satisfied, score}}

With real z3 every numeric fact is a symbolic Real pinned to its value in
each solver, so violation text shows the fact names rather than numbers.
"""
from __future__ import annotations

import math

from rifscope.judgement.suite import FactNamespace, Suite
from rifscope.judgement.suites import facts_from_report, load_suites
from rifscope.judgement.z3_compat import BoolVal, Real, Solver, Z3_REAL, sat

VERIFY_SCHEMA = "rifscope.verify.v1"


def _make_fact_vars(facts: dict) -> tuple[dict, dict]:
    """{name → term} and, for real z3, {name → value} to pin in the solver."""
    vars_, pinned = {}, {}
    for name, value in facts.items():
        safe = name.replace("-", "_").replace(".", "_")
        if isinstance(value, bool):
            vars_[safe] = BoolVal(value)
        elif isinstance(value, (int, float)):
            v = float(value)
            if math.isinf(v) or math.isnan(v):
                v = math.copysign(1e9, v) if math.isinf(v) else -1e9
            if Z3_REAL:
                vars_[safe] = Real(safe)
                pinned[safe] = v
            else:
                vars_[safe] = Real(safe, v)
    return vars_, pinned


def _solver(pinned: dict):
    s = Solver()
    for name, v in pinned.items():
        s.add(Real(name) == v)
    return s


def evaluate_suite(suite: Suite, facts: dict) -> dict:
    """One suite against one facts dict; never raises for a failed check."""
    fact_vars, pinned = _make_fact_vars(facts)
    namespace = FactNamespace(fact_vars, facts)
    try:
        constraints = suite.constraints(namespace)
    except AttributeError as e:
        return {
            "suite": suite.name,
            "satisfied": False,
            "score": 0.0,
            "constraints": [],
            "violations": [f"missing fact: {e}"],
            "error": str(e),
        }

    results, violations = [], []
    for i, c in enumerate(constraints):
        label = getattr(c, "_repr", None) or f"constraint[{i}]"
        solver = _solver(pinned)
        solver.add(c)
        ok = solver.check() == sat

        antecedent = getattr(c, "_antecedent", None)
        fired = None
        if antecedent is not None:
            probe = _solver(pinned)
            probe.add(antecedent)
            fired = probe.check() == sat

        results.append({
            "label": label,
            "expr": getattr(c, "_expr_repr", None) or label,
            "passed": ok,
            "antecedent_fired": fired,
        })
        if not ok:
            violations.append(label)

    score = (len(results) - len(violations)) / len(results) if results else 1.0
    return {
        "suite": suite.name,
        "satisfied": not violations,
        "score": round(score, 4),
        "constraints": results,
        "violations": violations,
    }


def run_suites(report: dict, suites="all") -> dict:
    facts = facts_from_report(report)
    results = [evaluate_suite(s, facts) for s in load_suites(suites)]
    return {
        "schema": VERIFY_SCHEMA,
        "rif_id": report.get("rif_id", ""),
        "facts": facts,
        "results": results,
        "summary": {
            "total": len(results),
            "satisfied": sum(1 for r in results if r["satisfied"]),
            "score": round(sum(r["score"] for r in results) / max(len(results), 1), 4),
        },
    }

