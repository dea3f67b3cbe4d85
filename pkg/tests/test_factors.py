"""Factor group models: payload algebra, homomorphisms, declared inverses."""

import itertools

import pytest
from hypothesis import given, strategies as st

from fpaut.errors import ParseError, ValidationError
from fpaut.factors import (CyclicFactor, FactorAutomorphism, FactorElement,
                           FreeFactor, TableFactor, apply_factor_aut,
                           elem_mul, verify_factor_aut)


@pytest.fixture(scope="module")
def z5():
    return CyclicFactor(1, "G1", 5, "a")


@pytest.fixture(scope="module")
def f2():
    return FreeFactor(1, "G1", 2, ["a1", "a2"])


def s3_table():
    """S3 as a multiplication table, elements named by permutation words."""
    perms = [(0, 1, 2), (1, 2, 0), (2, 0, 1), (1, 0, 2), (0, 2, 1), (2, 1, 0)]
    names = ["e", "r", "rr", "s", "rs", "rrs"]

    def compose(p, q):  # apply q first
        return tuple(p[q[i]] for i in range(3))

    table = [[perms.index(compose(p, q)) for q in perms] for p in perms]
    return TableFactor(1, "S3", names, table, generator_names=["r", "s"])


class TestElemMul:
    def test_cyclic_identity_marker(self, z5):
        assert elem_mul(z5, z5.element(2), z5.element(3)) is None

    def test_cyclic_exponent_addition(self, z5):
        assert elem_mul(z5, z5.element(2), z5.element(2)) == z5.element(4)

    def test_free_cancellation(self, f2):
        x = f2.element(((1, 1),))
        y = f2.element(((1, -1),))
        assert elem_mul(f2, x, y) is None

    def test_factor_mismatch_rejected(self, z5):
        with pytest.raises(ValidationError):
            elem_mul(z5, z5.element(1), FactorElement(2, 1))

    def test_associativity_exhaustive_small_groups(self, z5):
        for grp in (z5, s3_table()):
            elems = [grp.element(p) for p in grp.elements()]
            for x, y, z in itertools.product(elems, repeat=3):
                xy = elem_mul(grp, x, y)
                yz = elem_mul(grp, y, z)
                left = z if xy is None else elem_mul(grp, xy, z)
                right = x if yz is None else elem_mul(grp, x, yz)
                assert left == right


class TestApplyFactorAut:
    def test_identity(self, z5):
        ident = FactorAutomorphism.identity(z5)
        assert apply_factor_aut(ident, z5.element(3)) == z5.element(3)

    def test_squaring_on_cyclic5(self, z5):
        # a -> a^2 sends a^3 to a^6 = a
        alpha = FactorAutomorphism(z5, z5, (2,), (3,))
        assert apply_factor_aut(alpha, z5.element(3)) == z5.element(1)

    def test_free_generator_image(self, f2):
        # a1 -> a1, a2 -> a2 a1
        alpha = FactorAutomorphism(
            f2, f2, (((1, 1),), ((2, 1), (1, 1))),
            (((1, 1),), ((2, 1), (1, -1))))
        img = apply_factor_aut(alpha, f2.element(((2, 1),)))
        assert img == f2.element(((2, 1), (1, 1)))

    def test_bijection_on_finite_kinds(self, z5):
        alpha = FactorAutomorphism(z5, z5, (2,), (3,))
        images = {z5.hom_image(alpha.images, p) for p in z5.elements()}
        assert images == set(z5.elements())


class TestVerifyFactorAut:
    def test_identity_accepted(self, z5):
        ok, witness = verify_factor_aut(FactorAutomorphism.identity(z5))
        assert ok and witness is None

    def test_correct_inverse_accepted(self, z5):
        # 2 * 3 = 6 = 1 mod 5
        ok, _ = verify_factor_aut(FactorAutomorphism(z5, z5, (2,), (3,)))
        assert ok

    def test_wrong_inverse_rejected_with_witness(self, z5):
        # 2 * 2 = 4 != 1 mod 5
        ok, witness = verify_factor_aut(FactorAutomorphism(z5, z5, (2,), (2,)))
        assert not ok
        assert "a^4" in witness

    def test_free_kind_checked_on_generators(self, f2):
        shear = FactorAutomorphism(
            f2, f2, (((1, 1),), ((2, 1), (1, 1))),
            (((1, 1),), ((2, 1), (1, -1))))
        ok, _ = verify_factor_aut(shear)
        assert ok
        broken = FactorAutomorphism(
            f2, f2, (((1, 1),), ((2, 1), (1, 1))),
            (((1, 1),), ((2, 1), (1, 1))))
        ok, witness = verify_factor_aut(broken)
        assert not ok and witness

    def test_exactly_the_fixing_pairs_accepted(self, z5):
        for k, kinv in itertools.product(range(1, 5), repeat=2):
            alpha = FactorAutomorphism(z5, z5, (k,), (kinv,))
            ok, _ = verify_factor_aut(alpha)
            assert ok == ((k * kinv) % 5 == 1)


class TestTableFactor:
    def test_s3_axioms_and_inverses(self):
        s3 = s3_table()
        assert s3.size == 6
        r = s3.element_names.index("r")
        assert s3.table[r][s3.inv(r)] == 0

    def test_bad_table_rejected(self):
        with pytest.raises(ValidationError):
            TableFactor(1, "bad", ["e", "x"], [[0, 1], [1, 1]])

    def test_conjugation_automorphism_verifies(self):
        s3 = s3_table()
        r = s3.element_names.index("r")
        rinv = s3.inv(r)

        def conj(x):
            return s3.table[s3.table[r][x]][rinv]

        images = tuple(conj(g) for g in s3.generator_payloads())
        inv_images = tuple(s3.table[s3.table[rinv][g]][r]
                           for g in s3.generator_payloads())
        ok, _ = verify_factor_aut(FactorAutomorphism(s3, s3, images, inv_images))
        assert ok

    def test_parse_format_roundtrip(self):
        s3 = s3_table()
        for p in s3.elements():
            assert s3.parse_payload(s3.format_payload(p)) == p
        with pytest.raises(ParseError):
            s3.parse_payload("e")


class TestPayloadText:
    def test_cyclic_parse_and_format(self, z5):
        assert z5.parse_payload("a") == 1
        assert z5.parse_payload("a^3") == 3
        assert z5.parse_payload("a^-1") == 4
        assert z5.format_payload(4) == "a^4"
        with pytest.raises(ParseError):
            z5.parse_payload("a^5")

    def test_free_parse_and_format(self, f2):
        assert f2.parse_payload("a2*a1^-1") == ((2, 1), (1, -1))
        assert f2.format_payload(((1, 1), (1, 1), (2, -1))) == "a1^2*a2^-1"
        with pytest.raises(ParseError):
            f2.parse_payload("a1*a1^-1")

    @given(st.integers(min_value=1, max_value=4))
    def test_cyclic_roundtrip(self, k):
        z5 = CyclicFactor(1, "G1", 5, "a")
        assert z5.parse_payload(z5.format_payload(k)) == k


@given(st.lists(st.tuples(st.integers(1, 2),
                          st.sampled_from((1, -1))), max_size=12))
def test_free_payload_reduction_idempotent(letters):
    from fpaut.factors import _free_reduce
    r = _free_reduce(tuple(letters))
    assert _free_reduce(r) == r
