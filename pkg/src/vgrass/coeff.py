"""Coefficient rings behind one interface: exact backends and a tolerance float field.

A ring handle operates on raw payloads rather than wrapped scalar objects:

    Integers    -> int
    Rationals   -> fractions.Fraction (lowest terms, positive denominator)
    TrigQuot    -> TrigPoly, the quotient of rational polynomials in s, t by
                   s^2 + t^2 - 1, kept in the canonical form  c(s) + t * ct(s)
    FloatTol    -> float, equality meaning |x - y| <= tolerance
    MatrixRing  -> tuple of tuples of base payloads (square, noncommutative
                   for size > 1)

Handles are obtained from :func:`ring_make` applied to a
:class:`RingDescriptor`.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction

from .errors import RingError

VALID_KINDS = ("Integers", "Rationals", "TrigQuot", "FloatTol", "MatrixRing")

#: Default tolerance of the float ring.
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class RingDescriptor:
    """Value-level description of a coefficient ring."""

    kind: str
    tolerance: float = 0.0
    base: "RingDescriptor | None" = None
    size: int = 0

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise RingError(f"unknown ring kind {self.kind!r}")
        if self.tolerance < 0:
            raise RingError("tolerance must be nonnegative")
        if self.kind == "MatrixRing":
            if self.base is None or self.size < 1:
                raise RingError("MatrixRing needs a base ring and size >= 1")
            if self.matrix_depth() > 2:
                raise RingError("MatrixRing nesting depth > 2 is not supported")
        elif self.base is not None or self.size:
            raise RingError(f"{self.kind} takes no base ring or size")

    def matrix_depth(self) -> int:
        if self.kind != "MatrixRing":
            return 0
        return 1 + self.base.matrix_depth()

    @property
    def commutative(self) -> bool:
        if self.kind == "MatrixRing":
            return self.size == 1 and self.base.commutative
        return True


INTEGERS = RingDescriptor("Integers")
RATIONALS = RingDescriptor("Rationals")
TRIGQUOT = RingDescriptor("TrigQuot")


def float_tol(tolerance: float = DEFAULT_TOL) -> RingDescriptor:
    return RingDescriptor("FloatTol", tolerance=tolerance)


def matrix_ring(base: RingDescriptor, size: int) -> RingDescriptor:
    return RingDescriptor("MatrixRing", base=base, size=size)


def _trim(coeffs) -> tuple:
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def _poly_add(p, q):
    n = max(len(p), len(q))
    return _trim(
        (p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n)
    )


def _poly_neg(p):
    return tuple(-c for c in p)


def _poly_mul(p, q):
    if not p or not q:
        return ()
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if not a:
            continue
        for j, b in enumerate(q):
            out[i + j] += a * b
    return _trim(out)


@dataclass(frozen=True)
class TrigPoly:
    """Canonical residue modulo s^2 + t^2 - 1: polynomial c(s) plus t * ct(s)."""

    c: tuple = ()
    ct: tuple = ()

    def __add__(self, other):
        return TrigPoly(_poly_add(self.c, other.c), _poly_add(self.ct, other.ct))

    def __neg__(self):
        return TrigPoly(_poly_neg(self.c), _poly_neg(self.ct))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        # (c1 + t ct1)(c2 + t ct2) with t^2 = 1 - s^2
        c1, ct1, c2, ct2 = self.c, self.ct, other.c, other.ct
        tt = _poly_mul(ct1, ct2)
        c = _poly_add(_poly_mul(c1, c2), _poly_sub_s2(tt))
        ct = _poly_add(_poly_mul(c1, ct2), _poly_mul(ct1, c2))
        return TrigPoly(c, ct)

    def is_zero(self):
        return not self.c and not self.ct

    def __str__(self):
        parts = []
        for i, a in enumerate(self.c):
            if not a:
                continue
            mon = "" if i == 0 else ("s" if i == 1 else f"s^{i}")
            parts.append(mon if a == 1 and mon else (str(a) if not mon else f"{a}*{mon}"))
        for i, a in enumerate(self.ct):
            if not a:
                continue
            mon = "t" if i == 0 else ("t*s" if i == 1 else f"t*s^{i}")
            parts.append(mon if a == 1 else f"{a}*{mon}")
        return " + ".join(parts) if parts else "0"


def _poly_sub_s2(p):
    """Multiply the s-polynomial p by (1 - s^2)."""
    return _poly_add(p, _poly_neg((0, 0) + p))


def trig_const(q) -> TrigPoly:
    q = Fraction(q)
    return TrigPoly((q,) if q else (), ())


TRIG_S = TrigPoly((Fraction(0), Fraction(1)), ())
TRIG_T = TrigPoly((), (Fraction(1),))


def trig_from_terms(terms) -> TrigPoly:
    """Build the canonical form from a mapping {(s_deg, t_deg): coefficient}.

    Arbitrary t-degrees are reduced through t^2 = 1 - s^2.
    """
    out = trig_const(0)
    one_minus_s2 = TrigPoly((Fraction(1), Fraction(0), Fraction(-1)), ())
    for (i, j), a in terms.items():
        a = Fraction(a)
        if not a:
            continue
        term = TrigPoly((Fraction(0),) * i + (Fraction(1),), ())
        if j % 2:
            term = term * TRIG_T
        for _ in range(j // 2):  # (t^2)^(j//2) = (1 - s^2)^(j//2)
            term = term * one_minus_s2
        out = out + term * trig_const(a)
    return out


def trig_eval(x: TrigPoly, s: float, t: float) -> float:
    """Numeric evaluation at a concrete angle (s, t)."""
    tot = 0.0
    for i, a in enumerate(x.c):
        tot += float(a) * s**i
    for i, a in enumerate(x.ct):
        tot += float(a) * t * s**i
    return tot


class Ring:
    """Operations on raw payloads of one coefficient kind."""

    def __init__(self, descriptor: RingDescriptor):
        self.descriptor = descriptor

    @property
    def kind(self):
        return self.descriptor.kind

    @property
    def commutative(self):
        return self.descriptor.commutative

    # capability flags: every shipped ring is strong; only the float field
    # carries a usable norm.
    strong = True

    @property
    def norm_strong(self):
        return self.kind == "FloatTol"

    def sub(self, x, y):
        return self.add(x, self.neg(y))

    def eq(self, x, y):
        return self.is_zero(self.sub(x, y))

    def transpose(self, x):
        """Entry-level transpose; identity except for matrix payloads."""
        return x

    def scale(self, q, x):
        """Multiply by a rational number (used by numeric helpers)."""
        return self.mul(self.from_rational(Fraction(q)), x)

    def from_int(self, n):
        return self.from_rational(Fraction(n))

    def __repr__(self):
        return f"Ring({self.descriptor})"

    def __eq__(self, other):
        return isinstance(other, Ring) and self.descriptor == other.descriptor

    def __hash__(self):
        return hash(self.descriptor)


class IntegerRing(Ring):
    def zero(self):
        return 0

    def one(self):
        return 1

    def add(self, x, y):
        return x + y

    def neg(self, x):
        return -x

    def mul(self, x, y):
        return x * y

    def is_zero(self, x):
        return x == 0

    def from_rational(self, q):
        q = Fraction(q)
        if q.denominator != 1:
            raise RingError(f"{q} is not an integer")
        return q.numerator

    def to_json(self, x):
        return str(x)

    def from_json(self, v):
        return int(v)


class RationalRing(Ring):
    def zero(self):
        return Fraction(0)

    def one(self):
        return Fraction(1)

    def add(self, x, y):
        return x + y

    def neg(self, x):
        return -x

    def mul(self, x, y):
        return x * y

    def is_zero(self, x):
        return x == 0

    def from_rational(self, q):
        return Fraction(q)

    def to_json(self, x):
        return f"{x.numerator}/{x.denominator}"

    def from_json(self, v):
        num, _, den = v.partition("/")
        return Fraction(int(num), int(den or 1))


class TrigQuotRing(Ring):
    def zero(self):
        return TrigPoly()

    def one(self):
        return trig_const(1)

    def s(self):
        return TRIG_S

    def t(self):
        return TRIG_T

    def add(self, x, y):
        return x + y

    def neg(self, x):
        return -x

    def mul(self, x, y):
        return x * y

    def is_zero(self, x):
        return x.is_zero()

    def from_rational(self, q):
        return trig_const(q)

    def to_json(self, x):
        enc = lambda cs: [[i, f"{a.numerator}/{a.denominator}"] for i, a in enumerate(cs) if a]
        return {"c": enc(x.c), "ct": enc(x.ct)}

    def from_json(self, v):
        def dec(pairs):
            out = {}
            for i, txt in pairs:
                num, _, den = txt.partition("/")
                out[i] = Fraction(int(num), int(den or 1))
            n = max(out) + 1 if out else 0
            return _trim(out.get(i, Fraction(0)) for i in range(n))

        return TrigPoly(dec(v.get("c", [])), dec(v.get("ct", [])))


class FloatTolRing(Ring):
    @property
    def tolerance(self):
        return self.descriptor.tolerance

    def zero(self):
        return 0.0

    def one(self):
        return 1.0

    def add(self, x, y):
        return x + y

    def neg(self, x):
        return -x

    def mul(self, x, y):
        return x * y

    def is_zero(self, x):
        return abs(x) <= self.tolerance

    def from_rational(self, q):
        return float(Fraction(q))

    def to_json(self, x):
        return x

    def from_json(self, v):
        return float(v)


class MatrixRingHandle(Ring):
    def __init__(self, descriptor):
        super().__init__(descriptor)
        self.base = ring_make(descriptor.base)
        self.size = descriptor.size

    def _build(self, fn):
        n = self.size
        return tuple(tuple(fn(i, j) for j in range(n)) for i in range(n))

    def zero(self):
        z = self.base.zero()
        return self._build(lambda i, j: z)

    def one(self):
        z, o = self.base.zero(), self.base.one()
        return self._build(lambda i, j: o if i == j else z)

    def unit(self, i, j, value=None):
        """The matrix unit e_{ij}, optionally scaled."""
        v = self.base.one() if value is None else value
        z = self.base.zero()
        return self._build(lambda a, b: v if (a, b) == (i, j) else z)

    def add(self, x, y):
        return self._build(lambda i, j: self.base.add(x[i][j], y[i][j]))

    def neg(self, x):
        return self._build(lambda i, j: self.base.neg(x[i][j]))

    def mul(self, x, y):
        n = self.size

        def entry(i, j):
            acc = self.base.zero()
            for k in range(n):
                acc = self.base.add(acc, self.base.mul(x[i][k], y[k][j]))
            return acc

        return self._build(entry)

    def is_zero(self, x):
        return all(self.base.is_zero(v) for row in x for v in row)

    def transpose(self, x):
        return self._build(lambda i, j: self.base.transpose(x[j][i]))

    def from_rational(self, q):
        v = self.base.from_rational(q)
        z = self.base.zero()
        return self._build(lambda i, j: v if i == j else z)

    def to_json(self, x):
        return [[self.base.to_json(v) for v in row] for row in x]

    def from_json(self, v):
        return tuple(tuple(self.base.from_json(e) for e in row) for row in v)


@functools.lru_cache(maxsize=None)
def ring_make(descriptor: RingDescriptor) -> Ring:
    """Return the operation handle for a ring descriptor."""
    cls = {
        "Integers": IntegerRing,
        "Rationals": RationalRing,
        "TrigQuot": TrigQuotRing,
        "FloatTol": FloatTolRing,
        "MatrixRing": MatrixRingHandle,
    }[descriptor.kind]
    return cls(descriptor)


def normalize(x) -> TrigPoly:
    """Canonical form in the trig quotient ring.

    Accepts either an already-reduced :class:`TrigPoly` (returned unchanged,
    so the map is idempotent) or a raw mapping {(s_deg, t_deg): coefficient}
    with arbitrary t-degrees.
    """
    if isinstance(x, TrigPoly):
        return x
    return trig_from_terms(x)


def approx_eq(ring: Ring, x, y) -> bool:
    """Ring equality: exact structural equality of normal forms, or the
    tolerance test for the float ring."""
    return ring.eq(x, y)


def descriptor_to_json(d: RingDescriptor):
    out = {"kind": d.kind}
    if d.kind == "FloatTol":
        out["tolerance"] = d.tolerance
    if d.kind == "MatrixRing":
        out["base"] = descriptor_to_json(d.base)
        out["size"] = d.size
    return out


def descriptor_from_json(v) -> RingDescriptor:
    kind = v["kind"]
    if kind == "FloatTol":
        return RingDescriptor(kind, tolerance=v.get("tolerance", 0.0))
    if kind == "MatrixRing":
        return RingDescriptor(kind, base=descriptor_from_json(v["base"]), size=v["size"])
    return RingDescriptor(kind)
