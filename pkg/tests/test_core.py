"""
Core unit tests: polynomials, root finding, schemas and the judgement engine.
"""
import numpy as np
import pytest

from rifscope.errors import AmbiguousSymmetry, DegenerateInput, InvalidInput, TrackingAmbiguity
from rifscope.judgement.engine import _make_fact_vars, evaluate_suite, run_suites
from rifscope.judgement.suite import FactNamespace, Suite
from rifscope.judgement.suites import facts_from_report, load_suites
from rifscope.judgement.z3_compat import And, BoolVal, Implies, Not, Or, RealVal, Solver, named, sat, unsat
from rifscope.poly2 import (
    BiPoly, arith, cayley_transfer, compose_line, essential_symmetry, euler, from_json, from_sympy,
    partial, reflect, shift, slice_at, swap, to_json, to_sympy,
)
from rifscope.roots import (
    check_ambiguity, chordal, cyclic_match, local_count, roots_batch, roots_univariate, track_family,
    unimodular_filter,
)
from rifscope.schema import document_kind, validate_poly, validate_report, validate_rif


FAVE = BiPoly([[2, -1], [-1, 0]])          # 2 − z₁ − z₂


# ── BiPoly ────────────────────────────────────────────────────────────────────

class TestBiPoly:
    def test_trailing_zeros_trimmed(self):
        p = BiPoly([[1, 0, 0], [2, 0, 0]])
        assert p.bidegree == (1, 0)

    def test_padded_keeps_declared_shape(self):
        p = FAVE.pad_to(2, 1)
        assert p.bidegree == (2, 1)
        assert p.padded
        assert p.tight().bidegree == (1, 1)

    def test_equality_ignores_padding(self):
        assert FAVE.pad_to(3, 3) == FAVE

    def test_evaluate_vectorised(self):
        z = np.array([0, 1, 1j])
        np.testing.assert_allclose(FAVE(z, z), 2 - 2 * z)

    def test_product(self):
        p = BiPoly([[1], [-1]]) * BiPoly([[1, -1]])
        np.testing.assert_allclose(p.coeffs, [[1, -1], [-1, 1]])

    def test_scalar_ops(self):
        p = 1 - BiPoly([[0, 0], [0, 1]])
        assert p(2, 3) == pytest.approx(-5)
        assert (2 * p)(1, 1) == 0

    def test_norms(self):
        assert FAVE.norm == 2
        assert FAVE.l1 == 4

    def test_arith_unknown_op(self):
        with pytest.raises(InvalidInput, match="Unknown op"):
            arith(FAVE, FAVE, "div")

    def test_arith_scale_needs_constant(self):
        with pytest.raises(InvalidInput, match="constant"):
            arith(FAVE, None, "scale")

    def test_three_dimensional_coeffs_rejected(self):
        with pytest.raises(InvalidInput, match="2-D"):
            BiPoly(np.zeros((2, 2, 2)))


# ── structure ─────────────────────────────────────────────────────────────────

class TestReflection:
    def test_faveform_reflection(self):
        # p̃ = 2z₁z₂ − z₁ − z₂
        np.testing.assert_allclose(reflect(FAVE).coeffs, [[0, -1], [-1, 2]])

    def test_reflection_conjugates(self):
        p = BiPoly([[1j, 0], [0, 0]]).pad_to(1, 1)
        assert reflect(p).coeffs[1, 1] == -1j

    def test_reflection_depends_on_declared_bidegree(self):
        # at bidegree (2, 1) the reflection picks up an extra z₁
        np.testing.assert_allclose(reflect(FAVE.pad_to(2, 1)).coeffs, [[0, 0], [0, -1], [-1, 2]])

    def test_reflection_is_an_involution(self):
        p = BiPoly([[3, 1j], [2 - 1j, 0.5]])
        assert reflect(reflect(p)) == p

    def test_shift_and_swap(self):
        p = shift(FAVE, 1, 0)
        assert p.bidegree == (2, 1)
        assert p(2, 0) == pytest.approx(2 * FAVE(2, 0))
        assert swap(BiPoly([[1, 2]])).bidegree == (1, 0)

    def test_euler_keeps_bidegree(self):
        r = BiPoly([[1, 0], [0, -1]])       # 1 − z₁z₂
        e = euler(r)
        assert e.bidegree == (1, 1)
        np.testing.assert_allclose(e.coeffs, [[0, 0], [0, -2]])

    def test_partials(self):
        p = BiPoly([[1, 0], [0, 2], [0, 3]])    # 1 + 2z₁z₂ + 3z₁²z₂
        np.testing.assert_allclose(partial(p, 1).coeffs, [[0, 2], [0, 6]])
        np.testing.assert_allclose(partial(p, 2).coeffs, [[0], [2], [3]])
        assert partial(FAVE, 1)(0.3, 0.7) == pytest.approx(-1)

    def test_partial_of_a_constant(self):
        assert partial(BiPoly([[5]]), 2).is_zero

    def test_partial_bad_variable(self):
        with pytest.raises(InvalidInput, match="must be 1 or 2"):
            partial(FAVE, 3)


class TestEssentialSymmetry:
    def test_antisymmetric_diagonal(self):
        assert essential_symmetry(BiPoly([[1, 0], [0, -1]])) == pytest.approx(-1)

    def test_symmetric_line(self):
        assert essential_symmetry(BiPoly([[1], [1]])) == pytest.approx(1)

    def test_not_symmetric(self):
        assert essential_symmetry(FAVE) is None

    def test_zero_rejected(self):
        with pytest.raises(InvalidInput):
            essential_symmetry(BiPoly([[0]]))

    def test_ambiguous_symmetry_message(self):
        err = AmbiguousSymmetry(2.0)
        assert "not tight" in str(err)


# ── slices and transforms ─────────────────────────────────────────────────────

class TestSlices:
    def test_slice_fixes_second_variable(self):
        s = slice_at(FAVE, 2, 1)            # 1 − z₁
        np.testing.assert_allclose(s.coef, [1, -1])

    def test_slice_fixes_first_variable(self):
        s = slice_at(FAVE, 1, 0)            # 2 − z₂
        np.testing.assert_allclose(s.coef, [2, -1])

    def test_bad_variable(self):
        with pytest.raises(InvalidInput, match="1 or 2"):
            slice_at(FAVE, 3, 0)

    def test_compose_line(self):
        # 2 − (0 + w) − (0 + w)
        np.testing.assert_allclose(compose_line(FAVE, (0, 0), (1, 1)).coef, [2, -2])

    def test_cayley_transfer_of_one_minus_z(self):
        # (1 − iw)(1 − β(w)) = −2iw
        q = cayley_transfer(BiPoly([[1], [-1]]), (1, 0))
        np.testing.assert_allclose(q.coeffs, [[0], [-2j]], atol=1e-14)


class TestConversions:
    def test_json_roundtrip_keeps_padding(self):
        p = FAVE.pad_to(2, 2)
        q = from_json(to_json(p))
        assert q.bidegree == (2, 2)
        assert q == p

    def test_json_malformed(self):
        with pytest.raises(InvalidInput, match="Malformed"):
            from_json({"bidegree": [1, 1]})

    def test_json_shape_mismatch(self):
        doc = {"bidegree": [1, 1], "coeffs": [[[1, 0], [2, 0]]]}
        with pytest.raises(InvalidInput, match="declares bidegree"):
            from_json(doc)

    def test_sympy_roundtrip(self):
        import sympy
        z1, z2 = sympy.symbols("z1 z2")
        expr = to_sympy(FAVE, z1, z2)
        assert sympy.expand(expr - (2 - z1 - z2)) == 0
        assert from_sympy(expr, z1, z2) == FAVE


# ── roots_univariate ──────────────────────────────────────────────────────────

class TestRootsUnivariate:
    def test_quadratic(self):
        rs = roots_univariate([-1, 0, 1])
        np.testing.assert_allclose(sorted(rs.roots.real), [-1, 1], atol=1e-12)
        assert rs.degree_deficit == 0

    def test_zero_polynomial(self):
        with pytest.raises(DegenerateInput, match="identically zero"):
            roots_univariate([0, 0, 0])

    def test_roots_at_infinity(self):
        rs = roots_univariate([1, 1, 1e-20])
        assert rs.degree_deficit == 1
        assert rs.declared_degree == 2
        np.testing.assert_allclose(rs.roots, [-1])

    def test_zero_roots_split_off(self):
        rs = roots_univariate([0, 0, 1])
        np.testing.assert_allclose(rs.roots, [0, 0])

    def test_residuals_small(self):
        rs = roots_univariate([6, -5, 1])
        assert np.max(rs.residuals) < 1e-12

    def test_constant_has_no_roots(self):
        rs = roots_univariate([3])
        assert len(rs) == 0


class TestRootsBatch:
    def test_rows(self):
        table = roots_batch([[-1, 0, 1], [-4, 0, 1]])
        np.testing.assert_allclose(np.sort(np.abs(table), axis=1), [[1, 1], [2, 2]], atol=1e-12)

    def test_lost_leading_coefficient_is_nan(self):
        table = roots_batch([[-1, 1, 0]])
        assert np.count_nonzero(np.isnan(table[0])) == 1
        assert np.nanmax(np.abs(table[0] - 1)) < 1e-12

    def test_unimodular_filter(self):
        kept = unimodular_filter(np.array([1j, 0.5, 2, -1 + 1e-10]))
        assert len(kept) == 2
        np.testing.assert_allclose(np.abs(kept), 1)


# ── tracking ──────────────────────────────────────────────────────────────────

class TestTracking:
    def test_square_roots_stay_continuous(self):
        thetas = np.linspace(0, np.pi, 200)
        branches = track_family(lambda t: [-np.exp(1j * t), 0, 1], thetas)
        assert len(branches) == 2
        for b in branches:
            assert len(b) == 200
            assert np.max(np.abs(np.diff(b.values))) < 0.02

    def test_grid_must_increase(self):
        with pytest.raises(InvalidInput, match="increasing"):
            track_family(lambda t: [1, 1], [0.0, 0.0])

    def test_table_rows_must_match_grid(self):
        with pytest.raises(InvalidInput, match="rows"):
            track_family(np.zeros((3, 2)), [0.0, 1.0])

    def test_degree_drop_retires_a_branch(self):
        thetas = np.linspace(0, 1, 20)
        table = np.full((20, 2), np.nan + 0j)
        table[:, 0] = np.exp(1j * thetas)
        table[:10, 1] = -np.exp(1j * thetas[:10])
        branches = track_family(table, thetas)
        assert sorted(len(b) for b in branches) == [10, 20]

    def test_cyclic_match_follows_rotation(self):
        prev = np.exp(1j * np.array([0.0, 2.0, 4.0]))
        cur = np.exp(1j * (np.array([4.0, 0.0, 2.0]) + 0.1))
        np.testing.assert_array_equal(cyclic_match(prev, cur), [1, 2, 0])

    def test_cyclic_match_refuses_large_moves(self):
        prev = np.exp(1j * np.array([0.0, 0.1, np.pi]))
        cur = np.exp(1j * np.array([0.0, 2.0, np.pi]))
        assert cyclic_match(prev, cur) is None

    def test_unimodular_tracking_raises_when_order_is_lost(self):
        thetas = np.array([0.0, 1.0])
        table = np.exp(1j * np.array([[0.0, 0.1, np.pi], [0.0, 2.0, np.pi]]))
        with pytest.raises(TrackingAmbiguity):
            track_family(table, thetas, unimodular=True)

    def test_check_ambiguity_flags_a_tie(self):
        cost = np.array([[1.0, 1.0], [1.0, 1.0]])
        assert check_ambiguity(cost, np.array([0, 1]), np.array([0, 1])) == pytest.approx(1.0)

    def test_check_ambiguity_clear_choice(self):
        cost = np.array([[0.01, 2.0], [2.0, 0.01]])
        assert check_ambiguity(cost, np.array([0, 1]), np.array([0, 1])) is None

    def test_chordal_infinity(self):
        d = chordal(np.array([np.inf, 0]), np.array([np.inf, np.nan]))
        np.testing.assert_allclose(d, [0, 1])


class TestLocalCount:
    def test_simple_branch(self):
        # p̃ of the faveform: one branch z₁ = z₂/(2z₂ − 1) through (1, 1)
        assert local_count(reflect(FAVE), (1, 1)) == 1

    def test_double_root(self):
        p = BiPoly([[1], [-2], [1]]) * BiPoly([[1, 1]])     # (1 − z₁)²(1 + z₂)
        assert local_count(p, (1, 0)) == 2

    def test_vanishing_slice(self):
        assert local_count(BiPoly([[1, 1]]), (0.3, -1)) is None

    def test_not_on_the_curve(self):
        assert local_count(FAVE, (-1, 1)) == 0


# ── Schema validation ─────────────────────────────────────────────────────────

class TestSchema:
    def _poly(self):
        return {"bidegree": [1, 1], "coeffs": [[[2, 0], [-1, 0]], [[-1, 0], [0, 0]]]}

    def test_valid_poly(self):
        validate_poly(self._poly())

    def test_poly_wrong_row_count(self):
        doc = self._poly()
        doc["coeffs"] = doc["coeffs"][:1]
        with pytest.raises(ValueError, match="rows"):
            validate_poly(doc)

    def test_poly_bad_entry(self):
        doc = self._poly()
        doc["coeffs"][0][0] = 2
        with pytest.raises(ValueError, match=r"\[re, im\]"):
            validate_poly(doc)

    def test_wrong_schema(self):
        with pytest.raises(ValueError, match="Expected schema"):
            validate_rif({"schema": "rifscope.poly.v1", "p": self._poly()})

    def test_rif_negative_monomial(self):
        with pytest.raises(ValueError, match="monomial"):
            validate_rif({"p": self._poly(), "monomial": [-1, 0]})

    def test_document_kind(self):
        assert document_kind({"p": self._poly()}) == "rif"
        assert document_kind(self._poly()) == "poly"
        with pytest.raises(ValueError, match="Unrecognised"):
            document_kind({"foo": 1})

    def test_report_needs_schema(self):
        with pytest.raises(ValueError, match="rifscope.report.v1"):
            validate_report({"rif_id": "x"})


# ── z3_compat ─────────────────────────────────────────────────────────────────

class TestZ3Compat:
    def test_bool_val_true(self):
        s = Solver(); s.add(BoolVal(True)); assert s.check() == sat

    def test_bool_val_false(self):
        s = Solver(); s.add(BoolVal(False)); assert s.check() == unsat

    def test_and_or_not(self):
        s = Solver()
        s.add(And(BoolVal(True), Or(BoolVal(False), Not(BoolVal(False)))))
        assert s.check() == sat

    def test_implies_false_anything(self):
        # False => X is vacuously true
        s = Solver(); s.add(Implies(BoolVal(False), BoolVal(False))); assert s.check() == sat

    def test_real_comparison(self):
        s = Solver(); s.add(RealVal(4) >= RealVal(2)); assert s.check() == sat

    def test_named_label(self):
        expr = named("bezout/total", RealVal(16) == RealVal(16))
        assert expr._repr == "bezout/total"


# ── FactNamespace ─────────────────────────────────────────────────────────────

class TestFactNamespace:
    def test_missing_fact(self):
        ns = FactNamespace({"a": BoolVal(True)})
        with pytest.raises(AttributeError, match="Available facts"):
            ns.tau0_K1

    def test_raw_values(self):
        ns = FactNamespace({}, {"singular_count": 2})
        assert ns.value("singular_count") == 2
        assert ns.value("missing", 7) == 7
        assert not ns.has("singular_count")


# ── judgement engine ──────────────────────────────────────────────────────────

def _report(K1=2, K2=2, N=2, total=2, bound=2):
    return {
        "schema": "rifscope.report.v1",
        "rif_id": "faveform",
        "singular_points": [{"K1": K1, "K2": K2, "N_tau": N}],
        "global_K": max(K1, K2),
        "bezout": {"total": total, "bezout_expected": 2, "on_torus": N},
        "identity_checks": [
            {"name": "bound", "pass": N <= bound,
             "detail": {"tau_index": 0, "N": N, "bound": bound}},
            {"name": "sum-identity", "pass": True,
             "detail": {"tau_index": 0, "N": N, "sum_kappa": 2}},
            {"name": "bijection", "pass": True,
             "detail": {"tau_index": 0, "L0": 1, "L_lambda": 1, "L_mu": 1}},
        ],
    }


class TestFacts:
    def test_flattened_keys(self):
        facts = facts_from_report(_report())
        assert facts["singular_count"] == 1
        assert facts["tau0_K1_even"] is True
        assert facts["bezout_total"] == 2
        assert facts["tau0_pair0_sum"] == 2
        assert facts["tau0_bij0_L_mu"] == 1
        assert facts["tau0_pairs"] == 1
        assert facts["tau0_bijections"] == 1

    def test_missing_level_count_becomes_minus_one(self):
        report = _report()
        report["identity_checks"][2]["detail"]["L_mu"] = None
        assert facts_from_report(report)["tau0_bij0_L_mu"] == -1

    def test_make_fact_vars_skips_strings(self):
        vars_, _ = _make_fact_vars({"a": 1, "b": True, "c": "text"})
        assert set(vars_) == {"a", "b"}


class TestSuites:
    def test_all_satisfied(self):
        out = run_suites(_report())
        assert out["schema"] == "rifscope.verify.v1"
        assert out["summary"]["satisfied"] == out["summary"]["total"] == 4

    def test_odd_contact_order_violates_eco(self):
        out = run_suites(_report(K1=3, K2=3), "eco")
        (eco,) = out["results"]
        assert not eco["satisfied"]
        assert "eco/even τ0" in eco["violations"]
        assert "eco/global-even" in eco["violations"]

    def test_bezout_total_mismatch(self):
        out = run_suites(_report(total=1), ["bezout"])
        assert out["results"][0]["violations"] == ["bezout/total"]

    def test_sum_identity_bound(self):
        out = run_suites(_report(N=4, total=4, bound=2), ["sum-identity"])
        assert "sum-identity/bound τ0" in out["results"][0]["violations"]

    def test_unknown_suite(self):
        with pytest.raises(ValueError, match="Unknown suite"):
            load_suites(["nope"])

    def test_missing_fact_reports_error(self):
        class Broken(Suite):
            name = "broken"

            def constraints(self, P):
                return [P.not_a_fact]

        result = evaluate_suite(Broken(), {"a": 1})
        assert not result["satisfied"]
        assert "error" in result

    def test_empty_report_is_vacuous(self):
        out = run_suites({"rif_id": "x"})
        assert all(r["satisfied"] for r in out["results"])
