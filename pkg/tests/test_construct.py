"""
Construction tests: embedding, gluing, interlacing, transfer functions and
the fixture catalog.
"""
import numpy as np
import pytest

from rifscope.construct import (
    catalog, catalog_names, embed, glue, half_plane_pair, interlace_1d, interlace_2d,
    random_symmetric, rational_to_rif, resolvent_entry, rif_from_transfer,
)
from rifscope.errors import (
    CommonRoot, DegenerateResolvent, InvalidInput, NotSelfAdjoint, NotSemiStable, NotSymmetric,
    UnknownFixture,
)
from rifscope.poly2 import BiPoly, essential_symmetry, euler, reflect


FAST = {"quasi": 1024}

# the 4×4 pencil whose resolvent entry gives the bickel-pascoe function
TRANSFER_A = [[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]]
TRANSFER_Y = [1, 1, 1, 0]


def _proportional(a: BiPoly, b: BiPoly) -> bool:
    if a.coeffs.shape != b.coeffs.shape:
        return False
    k = np.unravel_index(np.argmax(np.abs(b.coeffs)), b.coeffs.shape)
    c = a.coeffs[k] / b.coeffs[k]
    return bool(np.allclose(a.coeffs, c * b.coeffs, atol=1e-9 * np.abs(c)))


# ── embed ─────────────────────────────────────────────────────────────────────

class TestEmbed:
    def test_diagonal(self):
        # r = 1 − z₁z₂ gives φ = −z₁z₂
        f = embed(BiPoly([[1, 0], [0, -1]]), 40, **FAST)
        assert f.p.bidegree == (0, 0)
        assert f.monomial == (1, 1)
        z1, z2 = 0.3 + 0.2j, -0.5j
        assert f.evaluate(z1, z2) == pytest.approx(-z1 * z2)

    def test_level_set_is_the_zero_set(self):
        # r = (1 − z₁z₂)(1 − z₁), symmetric with λ = 1
        r = BiPoly([[1, 0], [0, -1]]) * BiPoly([[1], [-1]])
        f = embed(r, 40, **FAST)
        assert f.monomial == (1, 0)
        assert _proportional(f.p, BiPoly([[3, 0], [-2, -1]]))
        for t in (0.3, 1.7, -2.4):
            assert f.evaluate(1, np.exp(1j * t)) == pytest.approx(1, abs=1e-9)
            assert f.evaluate(np.exp(1j * t), np.exp(-1j * t)) == pytest.approx(1, abs=1e-9)

    def test_identity_recorded(self):
        f = embed(BiPoly([[1, 0], [0, -1]]), 40, **FAST)
        assert f.certificate["symmetry"] == pytest.approx([-1, 0])
        assert f.certificate["identity_gap"] < 1e-12

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetric, match="essentially symmetric"):
            embed(BiPoly([[2, -1], [-1, 0]]), 40, **FAST)

    def test_zeros_inside(self):
        # symmetric but vanishes at z₁z₂ = 1/4
        r = BiPoly([[1, 0], [0, -4]]) * BiPoly([[4, 0], [0, -1]])
        assert essential_symmetry(r) is not None
        with pytest.raises(NotSemiStable):
            embed(r, 40, **FAST)

    def test_constant_rejected(self):
        with pytest.raises(InvalidInput, match="non-constant"):
            embed(BiPoly([[1]]))


class TestGlue:
    def test_faveform_gives_the_glued_fixture(self):
        g = glue(catalog("faveform"), 40, **FAST)
        assert g.name == "faveform~glued"
        assert g.monomial == (0, 0)
        assert g.eta == pytest.approx(-1)
        assert _proportional(g.p, catalog("glued-fave").p)

    def test_value_curve_of_the_glued_function(self):
        # on the ±i level curves of the faveform, the glued function takes the value 1
        f, g = catalog("faveform"), glue(catalog("faveform"), 40, **FAST)
        for lam in (1j, -1j):
            # z₁ solving φ(z₁, ζ₂) = λ for ζ₂ on the torus
            z2 = np.exp(0.9j)
            num, den = -reflect(f.p), f.p
            a = num.coeffs[1, 0] + num.coeffs[1, 1] * z2 - lam * (den.coeffs[1, 0] + den.coeffs[1, 1] * z2)
            b = num.coeffs[0, 0] + num.coeffs[0, 1] * z2 - lam * (den.coeffs[0, 0] + den.coeffs[0, 1] * z2)
            z1 = -b / a
            assert abs(z1) == pytest.approx(1)
            assert g.evaluate(z1, z2) == pytest.approx(1, abs=1e-9)


# ── interlacing ───────────────────────────────────────────────────────────────

class TestInterlace1D:
    def test_minus_one_over_w_shape(self):
        # R = −w, Q = w² − 1: degrees differ by one, C < 0
        v = interlace_1d([0, -1], [-1, 0, 1])
        assert v.is_pick
        assert v.case == "(i)"

    def test_identity(self):
        v = interlace_1d([0, 1], [1])
        assert v.is_pick
        assert v.case == "(iii)"

    def test_equal_degrees(self):
        assert interlace_1d([0, -1], [-1, 1]).case == "(ii a)"
        assert interlace_1d([-1, 1], [0, 1]).case == "(ii b)"

    def test_wrong_sign(self):
        v = interlace_1d([0, 1], [-1, 0, 1])
        assert not v.is_pick
        assert "wrong sign" in v.reason

    def test_not_interlacing(self):
        # zeros of R at 2, 3 and of Q at 0, 1
        v = interlace_1d(np.polynomial.Polynomial.fromroots([2, 3]).coef,
                         np.polynomial.Polynomial.fromroots([0, 1]).coef)
        assert not v.is_pick
        assert "interlace" in v.reason

    def test_complex_zeros(self):
        v = interlace_1d([1, 0, 1], [0, 1])
        assert not v.is_pick
        assert "non-real" in v.reason

    def test_common_root(self):
        with pytest.raises(CommonRoot):
            interlace_1d([-1, 1], [-1, 0, 1])

    def test_to_dict(self):
        d = interlace_1d([0, 1], [1]).to_dict()
        assert d["is_pick"] is True
        assert d["witness"] is None


class TestInterlace2D:
    def test_half_plane_pair_of_the_faveform(self):
        R, Q = half_plane_pair(catalog("faveform"))
        # R/Q = 2w₁w₂/(w₁ + w₂)
        assert _proportional(R, BiPoly([[0, 0], [0, 2]]))
        assert _proportional(Q, BiPoly([[0, 1], [1, 0]]))
        k = R.coeffs[1, 1] / Q.coeffs[0, 1]
        assert k.real == pytest.approx(2)

    def test_faveform_is_pick(self):
        R, Q = half_plane_pair(catalog("faveform"))
        v = interlace_2d(R, Q, trials=300)
        assert v.is_pick
        assert v.case == "all-slices"
        assert v.trials == 300

    def test_counterexample(self):
        # 1/(w₁w₂ + 1) is not a Pick function
        v = interlace_2d(BiPoly([[1]]), BiPoly([[1, 0], [0, 1]]), trials=50)
        assert not v.is_pick
        assert v.witness is not None
        assert v.reason.startswith("slice 0:")

    def test_vacuous(self):
        v = interlace_2d(BiPoly([[1]]), BiPoly([[1, 0], [0, 1]]), trials=0)
        assert v.is_pick and v.vacuous

    def test_seeded(self):
        R, Q = BiPoly([[1]]), BiPoly([[1, 0], [0, 1]])
        a = interlace_2d(R, Q, trials=20, seed=7)
        b = interlace_2d(R, Q, trials=20, seed=7)
        assert a.witness == b.witness


# ── transfer functions ────────────────────────────────────────────────────────

class TestTransfer:
    def test_resolvent_entry(self):
        import sympy
        z1, z2 = sympy.symbols("z1 z2")
        f = resolvent_entry(TRANSFER_A, TRANSFER_Y)
        expected = (z1 + z2 - z1 ** 2 * z2) / (z1 * (z1 ** 2 * z2 - 2 * z1 - 2 * z2))
        assert sympy.simplify(f - expected) == 0

    def test_one_by_one(self):
        f = rif_from_transfer([[0]], [1], samples=20, seed=1)
        # −1/z₁ becomes −z₁
        assert f.p.bidegree == (0, 0)
        assert f.monomial == (1, 0)
        assert f.evaluate(0.4j, 0.7) == pytest.approx(-0.4j)

    def test_bickel_pascoe(self):
        f = rif_from_transfer(TRANSFER_A, TRANSFER_Y, samples=40)
        bp = catalog("bickel-pascoe")
        assert _proportional(f.p, bp.p)
        assert f.eta == pytest.approx(bp.eta)
        assert f.monomial == (0, 0)

    def test_beta_chart(self):
        f = rif_from_transfer([[0]], [1], cayley="beta", samples=20)
        z = 0.3 - 0.1j
        assert abs(f.evaluate(z, 0.5)) < 1

    def test_not_self_adjoint(self):
        with pytest.raises(NotSelfAdjoint):
            resolvent_entry([[0, 1], [2, 0]], [1, 0])

    def test_bad_selector(self):
        with pytest.raises(InvalidInput, match="diagonal entries"):
            resolvent_entry([[0, 1], [1, 0]], [1, 2])

    def test_not_square(self):
        with pytest.raises(InvalidInput, match="square"):
            resolvent_entry([[0, 1]], [1])

    def test_too_large(self):
        with pytest.raises(InvalidInput, match="limited to 8"):
            resolvent_entry(np.eye(9).tolist(), [1] * 9)

    def test_unknown_cayley(self):
        with pytest.raises(InvalidInput, match="Cayley"):
            rif_from_transfer([[0]], [1], cayley="gamma")

    def test_zero_block(self):
        # A = 0 with both coordinates on z₁: f = −1/z₁ again
        f = rif_from_transfer([[0, 0], [0, 0]], [1, 1], samples=20)
        assert f.monomial == (1, 0)

    def test_not_inner(self):
        # (1 + z₂)/2 has no p̃/p form
        with pytest.raises(DegenerateResolvent, match="not inner"):
            rational_to_rif(BiPoly([[1, 1]]), BiPoly([[2]]))


# ── catalog and random inputs ─────────────────────────────────────────────────

class TestCatalog:
    def test_names(self):
        names = catalog_names()
        for name in ("amy", "bickel-pascoe", "exceptional", "faveform", "glued-fave", "mbm",
                     "minimal-co", "smooth3"):
            assert name in names

    def test_unknown(self):
        with pytest.raises(UnknownFixture, match="faveform"):
            catalog("nope")

    def test_eta(self):
        assert catalog("mbm").eta == 1
        assert catalog("faveform").eta == -1

    def test_validated(self):
        f = catalog("faveform", validated=True)
        assert "min_root_modulus" in f.certificate


class TestRandomSymmetric:
    def test_symmetric_within_bounds(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            r = random_symmetric(rng, (3, 2))
            m, n = r.bidegree
            assert 1 <= m <= 3 and 1 <= n <= 2
            lam = essential_symmetry(r)
            assert lam is not None
            assert abs(lam) == pytest.approx(1)

    def test_embedding_identity(self):
        rng = np.random.default_rng(5)
        r = random_symmetric(rng, (2, 2))
        lam = essential_symmetry(r)
        m, n = r.bidegree
        pt = euler(r)
        lhs = np.conj(lam) * reflect(pt).coeffs + pt.coeffs
        np.testing.assert_allclose(lhs, (m + n) * r.coeffs, atol=1e-12)

    def test_needs_both_variables(self):
        with pytest.raises(InvalidInput):
            random_symmetric(np.random.default_rng(0), (0, 3))
