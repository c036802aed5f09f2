"""
The invariant groups checked by `rifscope verify`.

facts_from_report flattens an analysis report into numbers and booleans.
Per-singularity facts are prefixed tau<k>_, per-probe-pair facts
tau<k>_pair<j>_ (sum identity) and tau<k>_bij<j>_ (branch bijection).
"""
from __future__ import annotations

from rifscope.judgement.suite import FactNamespace, Suite
from rifscope.judgement.z3_compat import And, Implies, named


def _even(k) -> bool:
    return k is not None and int(k) % 2 == 0


def facts_from_report(report: dict) -> dict:
    facts: dict = {}
    points = report.get("singular_points", [])
    facts["singular_count"] = len(points)
    for k, sp in enumerate(points):
        pre = f"tau{k}_"
        for key in ("K1", "K2"):
            if sp.get(key) is not None:
                facts[pre + key] = int(sp[key])
                facts[pre + key + "_even"] = _even(sp[key])
        if sp.get("N_tau") is not None:
            facts[pre + "N"] = int(sp["N_tau"])
            facts[pre + "N_even"] = _even(sp["N_tau"])

    global_k = report.get("global_K")
    if global_k is not None:
        facts["global_K"] = int(global_k)
        facts["global_K_even"] = _even(global_k)

    bezout = report.get("bezout") or {}
    if "total" in bezout:
        facts["bezout_total"] = int(bezout["total"])
        facts["bezout_expected"] = int(bezout["bezout_expected"])
        facts["torus_total"] = int(bezout.get("on_torus", 0))

    pairs: dict[int, int] = {}
    bij: dict[int, int] = {}
    for check in report.get("identity_checks", []):
        detail = check.get("detail", {})
        k = detail.get("tau_index")
        if k is None:
            continue
        pre = f"tau{k}_"
        if check["name"] == "bound":
            facts[pre + "bound"] = int(detail["bound"])
            facts[pre + "bound_N"] = int(detail["N"])
        elif check["name"] == "sum-identity" and "N" in detail:
            j = pairs.get(k, 0)
            facts[f"{pre}pair{j}_N"] = int(detail["N"])
            facts[f"{pre}pair{j}_sum"] = int(detail["sum_kappa"])
            pairs[k] = j + 1
        elif check["name"] == "bijection":
            j = bij.get(k, 0)
            q = f"{pre}bij{j}_"
            for key in ("L0", "L_lambda", "L_mu"):
                facts[q + key] = -1 if detail.get(key) is None else int(detail[key])
            facts[q + "matched"] = bool(check["pass"])
            bij[k] = j + 1
    for k, n in pairs.items():
        facts[f"tau{k}_pairs"] = n
    for k, n in bij.items():
        facts[f"tau{k}_bijections"] = n
    return facts


def _taus(P: FactNamespace) -> range:
    return range(int(P.value("singular_count")))


class EcoSuite(Suite):
    name = "eco"
    description = "Contact order is the same in both variable orders, and even."

    def constraints(self, P):
        out = []
        for k in _taus(P):
            if not (P.has(f"tau{k}_K1") and P.has(f"tau{k}_K2")):
                continue
            k1, k2 = getattr(P, f"tau{k}_K1"), getattr(P, f"tau{k}_K2")
            out.append(named(f"eco/K1-equals-K2 τ{k}", k1 == k2))
            out.append(named(f"eco/even τ{k}", And(getattr(P, f"tau{k}_K1_even"),
                                                   getattr(P, f"tau{k}_K2_even"))))
        if P.has("global_K"):
            out.append(named("eco/global-even",
                             Implies(P.singular_count > 0, P.global_K_even)))
        return out


class BezoutSuite(Suite):
    name = "bezout"
    description = "p and p̃ meet 2mn times in total; torus multiplicities are even."

    def constraints(self, P):
        if not P.has("bezout_total"):
            return []
        out = [
            named("bezout/total", P.bezout_total == P.bezout_expected),
            named("bezout/torus-bound", P.torus_total <= P.bezout_expected),
        ]
        for k in _taus(P):
            if P.has(f"tau{k}_N_even"):
                out.append(named(f"bezout/even τ{k}", getattr(P, f"tau{k}_N_even")))
        return out


class SumIdentitySuite(Suite):
    name = "sum-identity"
    description = "N_τ(p, p̃) equals the summed orders of contact and respects the branch bound."

    def constraints(self, P):
        out = []
        for k in _taus(P):
            for j in range(int(P.value(f"tau{k}_pairs"))):
                N, total = getattr(P, f"tau{k}_pair{j}_N"), getattr(P, f"tau{k}_pair{j}_sum")
                out.append(named(f"sum-identity/N-equals-sum τ{k} pair{j}", N == total))
            if P.has(f"tau{k}_bound"):
                out.append(named(f"sum-identity/bound τ{k}",
                                 getattr(P, f"tau{k}_bound_N") <= getattr(P, f"tau{k}_bound")))
        return out


class BijectionSuite(Suite):
    name = "bijection"
    description = "Level sets have at least as many branches as the zero set, with a matching."

    def constraints(self, P):
        out = []
        for k in _taus(P):
            for j in range(int(P.value(f"tau{k}_bijections"))):
                q = f"tau{k}_bij{j}_"
                L0 = getattr(P, q + "L0")
                out.append(named(f"bijection/branch-counts τ{k} pair{j}",
                                 And(getattr(P, q + "L_lambda") >= L0, getattr(P, q + "L_mu") >= L0)))
                out.append(named(f"bijection/matching τ{k} pair{j}", getattr(P, q + "matched")))
        return out


SUITES: dict[str, type[Suite]] = {
    cls.name: cls for cls in (EcoSuite, BezoutSuite, SumIdentitySuite, BijectionSuite)
}


def load_suites(names) -> list[Suite]:
    if isinstance(names, str):
        names = [names]
    if "all" in names:
        names = list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(
            f"Unknown suite(s) {unknown}.  Choose from: {', '.join(SUITES)}, all."
        )
    return [SUITES[n]() for n in names]
