"""Internal stabilization machinery over a trigonometric coefficient ring.

The column-finite operator C built from an angle (s, t) with s^2 + t^2 = 1
carries a multiplicative homotopy K -> C K C^T between the identity (s=1)
and conjugation by the coordinate shift (t=1); C^T C = 1 holds exactly as
finite column sums.  Its odd quantization acts on wedge monomials
e_{i1} ^ ... ^ e_{ik} (strictly increasing tuples), and the binary-sum
relabeling V carries wedges back to natural numbers, where the quarter-turn
endpoint becomes the doubling embedding n -> 2n.

Idempotents in single-space form are stabilized corner by corner, keeping
the 1 + b11 convention in the lower corner, and the make-room rotation
transports a unit across the interleaved copy.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import PreconditionError, RingError
from .grass import Morphism, bar, block_get, from_blocks
from .mat import ColumnFiniteOperator, StructuredMatrix
from .shape import Finite, Product, TailN, Union, tail_embed

SS_TAIL = TailN("n")


@dataclass(frozen=True)
class TrigAngle:
    ring: object
    s: object
    t: object

    def __post_init__(self):
        r = self.ring
        lhs = r.add(r.mul(self.s, self.s), r.mul(self.t, self.t))
        if not r.eq(lhs, r.one()):
            raise PreconditionError("angle must satisfy s^2 + t^2 = 1")

    @staticmethod
    def zero(ring):
        return TrigAngle(ring, ring.one(), ring.zero())

    @staticmethod
    def quarter(ring):
        return TrigAngle(ring, ring.zero(), ring.one())

    @staticmethod
    def symbolic(ring):
        """The generic angle over the trig quotient ring."""
        if ring.kind != "TrigQuot":
            raise RingError("symbolic angle needs the trig quotient ring")
        return TrigAngle(ring, ring.s(), ring.t())

    @staticmethod
    def of_float(ring, theta):
        import math

        return TrigAngle(ring, math.cos(theta), math.sin(theta))

    def reversed(self):
        return TrigAngle(self.ring, self.s, self.ring.neg(self.t))


def cstab(angle: TrigAngle, tail: TailN = SS_TAIL) -> ColumnFiniteOperator:
    """The stabilization operator: column j carries the t-powers-times-s
    pattern above the diagonal, s^2 on the diagonal (s for j = 0), and -t
    just below."""
    ring = angle.ring
    s, t = angle.s, angle.t

    def column(j):
        n = j[1]
        col = {}
        tp = ring.one()
        # row r for 1 <= r <= n carries t^(n-r) s^2; row 0 carries t^n s
        for r in range(n, 0, -1):
            col[("at", r)] = ring.mul(tp, ring.mul(s, s))
            tp = ring.mul(tp, t)
        col[("at", 0)] = ring.mul(tp, s)
        col[("at", n + 1)] = ring.neg(t)
        return col

    return ColumnFiniteOperator(tail, tail, ring, column)


# ---------------------------------------------------------------------------
# odd quantization


def _perm_sign_and_sort(seq):
    """Sort a tuple of distinct integers, returning (sign, sorted tuple)."""
    seq = list(seq)
    sign = 1
    for i in range(1, len(seq)):
        j = i
        while j > 0 and seq[j - 1] > seq[j]:
            seq[j - 1], seq[j] = seq[j], seq[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(seq)


def qu1_apply(c: ColumnFiniteOperator, w: dict) -> dict:
    """Apply the odd quantization of a column-finite operator to a wedge
    vector {increasing tuple: coefficient}."""
    ring = c.ring
    out = {}
    for tup, coeff in w.items():
        cols = []
        for i in tup:
            cols.append([(r[1], v) for r, v in c.column(("at", i)).items()])
        for choice in itertools.product(*cols):
            rows = tuple(r for r, _ in choice)
            if len(set(rows)) != len(rows):
                continue
            sign, sorted_rows = _perm_sign_and_sort(rows)
            v = coeff
            for _, f in choice:
                v = ring.mul(v, f)
            if sign < 0:
                v = ring.neg(v)
            cur = out.get(sorted_rows)
            out[sorted_rows] = v if cur is None else ring.add(cur, v)
    return {k: v for k, v in out.items() if not ring.is_zero(v) or v != ring.zero()}


def v_map(w: dict) -> dict:
    """Binary-sum relabeling of wedge monomials onto natural numbers."""
    return {sum(1 << i for i in tup): v for tup, v in w.items()}


def v_inverse_index(n: int) -> tuple:
    bits = []
    i = 0
    while n:
        if n & 1:
            bits.append(i)
        n >>= 1
        i += 1
    return tuple(bits)


def qu1_compose_check(c1, c2, wedges):
    """Qu1(c1) Qu1(c2) versus Qu1(c1 o c2) on the given wedges."""
    comp = c1.compose(c2)
    ring = c1.ring
    for tup in wedges:
        lhs = qu1_apply(c1, qu1_apply(c2, {tup: ring.one()}))
        rhs = qu1_apply(comp, {tup: ring.one()})
        keys = set(lhs) | set(rhs)
        for k in keys:
            if not ring.eq(lhs.get(k, ring.zero()), rhs.get(k, ring.zero())):
                return False
    return True


# ---------------------------------------------------------------------------
# stabilization of idempotents


def hv_relabeling(tail: TailN = SS_TAIL):
    return tail_embed(tail, 2, 0)


def hv_conjugation(a: StructuredMatrix) -> StructuredMatrix:
    """Transport a finitely supported matrix through n -> 2n, exactly."""
    return hv_relabeling(a.rows).transport(a)


def _quantized_transport(angle: TrigAngle, x: StructuredMatrix, tail: TailN):
    """One corner of the stabilization homotopy: transport x to the wedge
    picture, conjugate by the quantized operator, come back through the
    binary-sum relabeling.

    The rotation sense is reversed (t -> -t) so that the quarter-turn
    endpoint is exactly the doubling relabeling with no sign twist."""
    ring = angle.ring
    c = cstab(angle.reversed(), tail)
    ents = x.K_entries()
    out = {}
    basis_cache = {}

    def col_of(tup):
        if tup not in basis_cache:
            basis_cache[tup] = qu1_apply(c, {tup: ring.one()})
        return basis_cache[tup]

    for (i, j), v in ents.items():
        wi = v_inverse_index(i[1])
        wj = v_inverse_index(j[1])
        ci = col_of(wi)
        cj = col_of(wj)
        for ti, vi in ci.items():
            viv = ring.mul(vi, v)
            for tj, vj in cj.items():
                key = (sum(1 << b for b in ti), sum(1 << b for b in tj))
                cur = out.get(key)
                add = ring.mul(viv, vj)
                out[key] = add if cur is None else ring.add(cur, add)
    fin = {(("at", r), ("at", cc)): v for (r, cc), v in out.items()
           if v != ring.zero()}
    return StructuredMatrix.from_fin(tail, tail, ring, fin)


def stabilize_idempotent(b: StructuredMatrix):
    """Stabilize a single-space idempotent.

    Returns (endpoint, sampler): the endpoint interleaves b with the trivial
    pattern through n -> 2n, exactly; sampler(angle) evaluates the homotopy
    at any angle over the matching ring, giving b at angle zero and the
    endpoint at the quarter turn.
    """
    from .grass import r_zero_matrix, ss_space

    ring = b.ring
    space = b.rows
    if not isinstance(space, Product) or not isinstance(space.right, TailN):
        raise PreconditionError("expected a {0,1} x N single-space matrix")
    tail = space.right
    rz = r_zero_matrix(tail, ring)
    if not b.approx_equiv(rz):
        raise PreconditionError("corner convention violated: b must be a "
                                "finite perturbation of the trivial pattern")
    one_tail = StructuredMatrix.identity(tail, ring)
    corners = {
        (0, 0): block_get(b, tail, 0, 0),
        (0, 1): block_get(b, tail, 0, 1),
        (1, 0): block_get(b, tail, 1, 0),
        (1, 1): block_get(b, tail, 1, 1) - one_tail,
    }

    def assemble(tr):
        moved = {ij: tr(m) for ij, m in corners.items()}
        moved[(1, 1)] = one_tail + moved[(1, 1)]
        return from_blocks(2, ring, moved)

    endpoint = assemble(hv_conjugation)

    def sampler(angle: TrigAngle):
        return assemble(lambda m: _quantized_transport(angle, m, tail))

    return endpoint, sampler


# ---------------------------------------------------------------------------
# making room


def room_space(tail_room="room", tail_host="host") -> Union:
    return Union(TailN(tail_room), TailN(tail_host))


def room_rotation(angle: TrigAngle, space: Union = None) -> StructuredMatrix:
    """The rotation mixing a fresh copy of N into the even positions of the
    host copy; the odd positions stay inert.  Satisfies M(a) M(-a) = 1."""
    ring = angle.ring
    if space is None:
        space = room_space()
    s, t = angle.s, angle.t
    lk = f"L.~{space.left.tag}"
    rk = f"R.~{space.right.tag}"
    m = StructuredMatrix.zero(space, space, ring)
    m = m + StructuredMatrix.family(space, space, ring, lk, lk,
                                    (1, 0, 1, 0, None, None), s)
    m = m + StructuredMatrix.family(space, space, ring, lk, rk,
                                    (1, 0, 2, 0, None, None), ring.neg(t))
    m = m + StructuredMatrix.family(space, space, ring, rk, lk,
                                    (2, 0, 1, 0, None, None), t)
    m = m + StructuredMatrix.family(space, space, ring, rk, rk,
                                    (2, 0, 2, 0, None, None), s)
    m = m + StructuredMatrix.family(space, space, ring, rk, rk,
                                    (2, 1, 2, 1, None, None), ring.one())
    return m


def make_room(phi: StructuredMatrix, phi_inv: StructuredMatrix):
    """Sampler of conjugators transporting a unit (phi ~ 1 on the room copy)
    across the interleave: at angle zero it conjugates the room block by phi;
    at the quarter turn it fixes the room and acts on the even host positions."""
    ring = phi.ring
    space = room_space()
    one = StructuredMatrix.identity(space, ring)
    if not (phi @ phi_inv).equals(StructuredMatrix.identity(phi.rows, ring)):
        raise PreconditionError("phi must be a unit with the given inverse")
    if not phi.approx_equiv(StructuredMatrix.identity(phi.rows, ring)):
        raise PreconditionError("phi must differ from 1 by a finite matrix")

    from .grass import embed_union

    phi_big = (embed_union(phi, space, "L", "L")
               + embed_union(StructuredMatrix.identity(TailN(space.right.tag), ring),
                             space, "R", "R"))
    phi_big_inv = (embed_union(phi_inv, space, "L", "L")
                   + embed_union(StructuredMatrix.identity(TailN(space.right.tag), ring),
                                 space, "R", "R"))

    def sampler(angle: TrigAngle) -> Morphism:
        m_pos = room_rotation(angle, space)
        m_neg = room_rotation(angle.reversed(), space)
        g = m_pos @ phi_big @ m_neg
        g_inv = m_pos @ phi_big_inv @ m_neg
        return Morphism(space, space, g, one, g_inv, one)

    return sampler
