import pytest
from hypothesis import given
from hypothesis import strategies as st

from imgattest.errors import NonCanonicalEncoding, ZeroInverse
from imgattest.field import (
    BYTES, P, FieldElement, decode, encode, fe_add, fe_from_signed, fe_inv, fe_mul, fe_sub, to_signed,
)

F = FieldElement
elems = st.integers(min_value=0, max_value=P - 1)


def test_add_examples():
    assert fe_add(F(2), F(3)).value == 5
    assert fe_add(F(12345), F(0)).value == 12345
    assert fe_add(F(P - 1), F(1)).value == 0


def test_mul_examples():
    x = F(987654321987654321)
    assert fe_mul(x, F(1)) == x
    assert fe_mul(x, F(0)).value == 0
    assert fe_mul(F(P - 1), F(P - 1)).value == 1


def test_inv_examples():
    assert fe_inv(F(1)).value == 1
    assert fe_inv(F(2)).value == (P + 1) // 2
    with pytest.raises(ZeroInverse):
        fe_inv(F(0))
    with pytest.raises(ZeroInverse):
        fe_inv(F(P))


def test_from_signed_examples():
    assert fe_from_signed(5).value == 5
    assert fe_from_signed(-1).value == P - 1
    assert fe_from_signed(-43).value == P - 43
    assert to_signed(P - 43) == -43


def _egcd_inverse(a):
    r0, r1, s0, s1 = P, a, 0, 1
    while r1:
        q = r0 // r1
        r0, r1, s0, s1 = r1, r0 - q * r1, s1, s0 - q * s1
    return s0 % P


@given(elems, elems, elems)
def test_group_laws(a, b, c):
    ia, ib = a, b
    a, b, c = F(a), F(b), F(c)
    assert fe_add(a, b) == fe_add(b, a) == F((ia + ib) % P)
    assert fe_mul(a, b) == fe_mul(b, a) == F((ia * ib) % P)
    assert fe_add(fe_add(a, b), c) == fe_add(a, fe_add(b, c))
    assert fe_mul(fe_mul(a, b), c) == fe_mul(a, fe_mul(b, c))
    assert fe_mul(a, fe_add(b, c)) == fe_add(fe_mul(a, b), fe_mul(a, c))
    assert fe_sub(a, b).value == (ia - ib) % P


def test_inverse_thousand_random():
    import random

    r = random.Random(7)
    for _ in range(1000):
        a = r.randrange(1, P)
        inv = fe_inv(F(a))
        assert fe_mul(F(a), inv).value == 1
        assert inv.value == _egcd_inverse(a)


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_signed_round_trip(n):
    assert fe_add(fe_from_signed(-n), fe_from_signed(n)).value == 0


@given(elems)
def test_encoding_round_trip(v):
    raw = encode(v)
    assert len(raw) == BYTES
    assert raw == v.to_bytes(32, "little")
    assert decode(raw) == v


def test_decode_rejects_non_canonical():
    with pytest.raises(NonCanonicalEncoding):
        decode(P.to_bytes(32, "little"))
    with pytest.raises(NonCanonicalEncoding):
        decode(b"\x00" * 31)


def test_element_wrapper():
    a = FieldElement(P - 1)
    assert int(a + 1) == 0
    assert int(a * a) == 1
    assert int(FieldElement(3) / 3) == 1
    assert FieldElement.from_bytes(a.to_bytes()) == a
    assert FieldElement(P + 5).value == 5
    assert FieldElement(-1).value == P - 1
    with pytest.raises(ValueError):
        fe_from_signed(-P)
