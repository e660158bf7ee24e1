"""Arithmetic in the 254-bit scalar field of the BN254 curve.

Circuit internals pass raw Python ints around (canonical or signed
representatives, reduced lazily); :class:`FieldElement` is the typed,
always-canonical wrapper used at API boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NonCanonicalEncoding, ZeroInverse

P = 21888242871839275222246405745257275088548364400416034343698204186575808495617
BYTES = 32


def fe_add(a: FieldElement, b: FieldElement) -> FieldElement:
    return FieldElement((a.value + b.value) % P)


def fe_sub(a: FieldElement, b: FieldElement) -> FieldElement:
    return FieldElement((a.value - b.value) % P)


def fe_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return FieldElement((a.value * b.value) % P)


def fe_inv(a: FieldElement) -> FieldElement:
    if a.value == 0:
        raise ZeroInverse("0 has no multiplicative inverse")
    return FieldElement(pow(a.value, -1, P))


def fe_from_signed(n: int) -> FieldElement:
    """Map a signed integer with ``|n| < p`` to its field representative."""
    if not -P < n < P:
        raise ValueError("magnitude must be below the field modulus")
    return FieldElement(n % P)


def to_signed(v: int) -> int:
    """Inverse of :func:`fe_from_signed` for values in the lower/upper half."""
    v %= P
    return v - P if v > P // 2 else v


def encode(v: int) -> bytes:
    """32-byte little-endian canonical encoding."""
    return (v % P).to_bytes(BYTES, "little")


def decode(data: bytes) -> int:
    if len(data) != BYTES:
        raise NonCanonicalEncoding(f"expected {BYTES} bytes, got {len(data)}")
    v = int.from_bytes(data, "little")
    if v >= P:
        raise NonCanonicalEncoding("encoded value is not below the modulus")
    return v


@dataclass(frozen=True, slots=True)
class FieldElement:
    value: int

    def __post_init__(self):
        if not 0 <= self.value < P:
            object.__setattr__(self, "value", self.value % P)

    @classmethod
    def from_bytes(cls, data: bytes) -> FieldElement:
        return cls(decode(data))

    def to_bytes(self) -> bytes:
        return encode(self.value)

    def hex(self) -> str:
        return self.to_bytes()[::-1].hex()

    def inverse(self) -> FieldElement:
        return fe_inv(self)

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            return other.value
        if isinstance(other, int):
            return other
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else FieldElement((self.value + o) % P)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else FieldElement((self.value - o) % P)

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else FieldElement((o - self.value) % P)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else FieldElement((self.value * o) % P)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value % P)

    def __pow__(self, e: int):
        return FieldElement(pow(self.value, e, P))

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * fe_inv(FieldElement(o))

    def __int__(self):
        return self.value

    def __index__(self):
        return self.value

    def __repr__(self):
        return f"FieldElement({self.value})"
