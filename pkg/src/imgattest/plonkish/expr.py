"""Polynomial expressions over rotated cell queries.

Expressions are immutable trees (DAGs once subterms are shared).  They are
evaluated column-wise over numpy object arrays of Python ints; shared
subterms are evaluated once per batch via an ``id``-keyed cache.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..field import P, to_signed

Fetch = Callable[[int, int], np.ndarray]


def lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, np.integer)):
        return Constant(int(x))
    raise TypeError(f"cannot use {type(x).__name__} in a circuit expression")


_powmod = np.frompyfunc(lambda x, e: pow(int(x), e, P), 2, 1)


class Expr:
    __slots__ = ()

    def __add__(self, other):
        return Sum((self, lift(other)))

    def __radd__(self, other):
        return Sum((lift(other), self))

    def __sub__(self, other):
        return Sum((self, -lift(other)))

    def __rsub__(self, other):
        return Sum((lift(other), -self))

    def __mul__(self, other):
        return Product((self, lift(other)))

    def __rmul__(self, other):
        return Product((lift(other), self))

    def __neg__(self):
        return Product((Constant(-1), self))

    def __pow__(self, e: int):
        if not isinstance(e, int) or e < 1:
            raise ValueError("exponent must be a positive int")
        return Power(self, e)

    def degree(self) -> int:
        raise NotImplementedError

    def queries(self) -> set[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        self._collect(out, set())
        return out

    def _collect(self, out, seen):
        raise NotImplementedError

    def evaluate(self, fetch: Fetch, cache: dict | None = None):
        """Evaluate to an object array (or a plain int for constants)."""
        if cache is None:
            cache = {}
        key = id(self)
        if key in cache:
            return cache[key][1]
        val = self._eval(fetch, cache)
        cache[key] = (self, val)  # keep node alive so its id stays unique
        return val

    def _eval(self, fetch, cache):
        raise NotImplementedError


class Constant(Expr):
    __slots__ = ("value", "_signed")

    def __init__(self, value: int):
        self.value = int(value) % P
        self._signed = to_signed(self.value)

    def degree(self):
        return 0

    def _collect(self, out, seen):
        pass

    def _eval(self, fetch, cache):
        return self._signed

    def __repr__(self):
        return str(self._signed)


class Query(Expr):
    __slots__ = ("column", "rotation")

    def __init__(self, column: int, rotation: int = 0):
        self.column = int(column)
        self.rotation = int(rotation)

    def degree(self):
        return 1

    def _collect(self, out, seen):
        out.add((self.column, self.rotation))

    def _eval(self, fetch, cache):
        return fetch(self.column, self.rotation)

    def __repr__(self):
        return f"c[{self.rotation:+d}][{self.column}]" if self.rotation else f"c[{self.column}]"


class Sum(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        flat = []
        for t in terms:
            if isinstance(t, Sum):
                flat.extend(t.terms)
            else:
                flat.append(lift(t))
        self.terms = tuple(flat)

    def degree(self):
        return max(t.degree() for t in self.terms)

    def _collect(self, out, seen):
        if id(self) in seen:
            return
        seen.add(id(self))
        for t in self.terms:
            t._collect(out, seen)

    def _eval(self, fetch, cache):
        acc = 0
        for t in self.terms:
            acc = acc + t.evaluate(fetch, cache)
        return acc

    def __repr__(self):
        return "(" + " + ".join(map(repr, self.terms)) + ")"


class Product(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        flat = []
        for f in factors:
            if isinstance(f, Product):
                flat.extend(f.factors)
            else:
                flat.append(lift(f))
        self.factors = tuple(flat)

    def degree(self):
        return sum(f.degree() for f in self.factors)

    def _collect(self, out, seen):
        if id(self) in seen:
            return
        seen.add(id(self))
        for f in self.factors:
            f._collect(out, seen)

    def _eval(self, fetch, cache):
        acc = 1
        for f in self.factors:
            acc = acc * f.evaluate(fetch, cache)
            if isinstance(acc, np.ndarray):
                acc = acc % P
        return acc % P if not isinstance(acc, np.ndarray) else acc

    def __repr__(self):
        return "*".join(map(repr, self.factors))


class Power(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent: int):
        self.base = lift(base)
        self.exponent = int(exponent)

    def degree(self):
        return self.base.degree() * self.exponent

    def _collect(self, out, seen):
        if id(self) in seen:
            return
        seen.add(id(self))
        self.base._collect(out, seen)

    def _eval(self, fetch, cache):
        b = self.base.evaluate(fetch, cache)
        if isinstance(b, np.ndarray):
            return _powmod(b, self.exponent)
        return pow(int(b), self.exponent, P)

    def __repr__(self):
        return f"{self.base!r}^{self.exponent}"


def walk(roots) -> list[Expr]:
    """Distinct nodes reachable from ``roots`` in post-order (children first)."""
    order: list[Expr] = []
    seen: set[int] = set()

    def visit(node):
        if id(node) in seen:
            return
        seen.add(id(node))
        if isinstance(node, Sum):
            for t in node.terms:
                visit(t)
        elif isinstance(node, Product):
            for f in node.factors:
                visit(f)
        elif isinstance(node, Power):
            visit(node.base)
        order.append(node)

    for r in roots:
        visit(r)
    return order
