import math
from fractions import Fraction

import pytest

from vgrass import grass, stab
from vgrass.coeff import RATIONALS, TRIGQUOT, float_tol, ring_make, trig_from_terms
from vgrass.errors import PreconditionError
from vgrass.mat import StructuredMatrix
from vgrass.rand import Rand
from vgrass.shape import TailN, window
from vgrass.stab import (
    TrigAngle,
    cstab,
    hv_conjugation,
    make_room,
    qu1_apply,
    qu1_compose_check,
    room_rotation,
    stabilize_idempotent,
    v_map,
)

Q = ring_make(RATIONALS)
TQ = ring_make(TRIGQUOT)
NT = TailN("n")


def sym():
    return TrigAngle.symbolic(TQ)


def s_t():
    return TQ.s(), TQ.t()


def test_angle_validation():
    TrigAngle(Q, Fraction(3, 5), Fraction(4, 5))
    with pytest.raises(PreconditionError):
        TrigAngle(Q, Fraction(1, 2), Fraction(1, 2))


def test_cstab_identity_at_zero():
    rnd = Rand(80)
    c = cstab(TrigAngle.zero(Q), NT)
    idx = window(NT, 4)
    k = StructuredMatrix.from_fin(NT, NT, Q, {
        (i, j): rnd.fraction() for i in idx for j in idx})
    assert c.sandwich(k).equals(k)


def test_cstab_shift_at_quarter():
    c = cstab(TrigAngle.quarter(Q), NT)
    e12 = StructuredMatrix.unit(NT, NT, Q, ("at", 1), ("at", 2))
    got = c.sandwich(e12)
    want = StructuredMatrix.unit(NT, NT, Q, ("at", 2), ("at", 3))
    assert got.equals(want)
    e00 = StructuredMatrix.unit(NT, NT, Q, ("at", 0), ("at", 0))
    assert c.sandwich(e00).equals(
        StructuredMatrix.unit(NT, NT, Q, ("at", 1), ("at", 1)))


def test_gram_orthonormality_window():
    c = cstab(sym(), NT)
    for i in range(40):
        for j in range(i, min(i + 6, 40)):
            want = TQ.one() if i == j else TQ.zero()
            assert TQ.eq(c.gram(("at", i), ("at", j)), want)


def test_sandwich_multiplicative():
    rnd = Rand(81)
    c = cstab(sym(), NT)
    idx = window(NT, 3)
    for _ in range(100):
        k = StructuredMatrix.from_fin(NT, NT, TQ, {
            (idx[rnd.small_nat(3)], idx[rnd.small_nat(3)]):
                TQ.from_rational(rnd.fraction()) for _ in range(3)})
        l = StructuredMatrix.from_fin(NT, NT, TQ, {
            (idx[rnd.small_nat(3)], idx[rnd.small_nat(3)]):
                TQ.from_rational(rnd.fraction()) for _ in range(3)})
        assert c.sandwich(k @ l).equals(c.sandwich(k) @ c.sandwich(l))


def test_qu1_worked_example_wedge():
    s, t = s_t()
    c = cstab(sym(), NT)
    got = qu1_apply(c, {(0, 1): TQ.one()})
    st = TQ.mul(s, t)
    tt = TQ.mul(t, t)
    want = {(0, 1): s, (0, 2): TQ.neg(st), (1, 2): tt}
    assert set(got) == set(want)
    for k in want:
        assert TQ.eq(got[k], want[k])


def test_qu1_worked_example_on_naturals():
    # e3 corresponds to the wedge {0,1}; the image relabels to
    # s e3 - s t e5 + t^2 e6
    s, t = s_t()
    c = cstab(sym(), NT)
    got = v_map(qu1_apply(c, {stab.v_inverse_index(3): TQ.one()}))
    want = {3: s, 5: TQ.neg(TQ.mul(s, t)), 6: TQ.mul(t, t)}
    assert set(got) == set(want)
    for k in want:
        assert TQ.eq(got[k], want[k])


def test_qu1_identity_angle():
    c = cstab(TrigAngle.zero(Q), NT)
    w = {(0, 2, 5): Fraction(3, 2)}
    assert qu1_apply(c, w) == w


def test_qu1_functorial():
    a1 = TrigAngle(Q, Fraction(3, 5), Fraction(4, 5))
    a2 = TrigAngle(Q, Fraction(5, 13), Fraction(12, 13))
    c1 = cstab(a1, NT)
    c2 = cstab(a2, NT)
    wedges = [(0,), (1,), (0, 1), (2, 5), (0, 3, 6), (1, 2, 7)]
    assert qu1_compose_check(c1, c2, wedges)


def test_v_map_is_injective_on_tuples():
    seen = {}
    for k in range(3):
        for tup in [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]:
            n = sum(1 << i for i in tup)
            assert seen.setdefault(n, tup) == tup
    assert len(seen) == 7


def test_hv_conjugation():
    k = StructuredMatrix.unit(NT, NT, Q, ("at", 1), ("at", 3), Fraction(5))
    got = hv_conjugation(k)
    assert got.K_entries() == {(("at", 2), ("at", 6)): Fraction(5)}


def _random_ss_matrix(rnd, ring):
    base = grass.ss_base(ring)
    u, u_inv = rnd.unit_near_identity(grass.ss_space(), ring, width=2, steps=3)
    return u @ base @ u_inv


def test_stabilize_endpoints_exact():
    rnd = Rand(83)
    for _ in range(5):
        b = _random_ss_matrix(rnd, Q)
        endpoint, sampler = stabilize_idempotent(b)
        assert endpoint.is_idempotent()
        # angle zero gives back b
        assert sampler(TrigAngle.zero(Q)).equals(b)
        # the quarter turn matches the interleaved endpoint exactly
        assert sampler(TrigAngle.quarter(Q)).equals(endpoint)


def test_stabilize_trivial_pattern():
    ring = Q
    b = grass.ss_base(ring)
    endpoint, sampler = stabilize_idempotent(b)
    assert endpoint.equals(b)


def test_stabilize_endpoint_is_interleave():
    rnd = Rand(84)
    b = _random_ss_matrix(rnd, Q)
    endpoint, _ = stabilize_idempotent(b)
    # even tail positions carry b, odd ones the trivial pattern
    for bi in (0, 1):
        for bj in (0, 1):
            for n in range(4):
                for m in range(4):
                    lhs = endpoint.entry(("pair", ("at", bi), ("at", 2 * n)),
                                         ("pair", ("at", bj), ("at", 2 * m)))
                    rhs = b.entry(("pair", ("at", bi), ("at", n)),
                                  ("pair", ("at", bj), ("at", m)))
                    assert lhs == rhs
                    odd = endpoint.entry(("pair", ("at", bi), ("at", 2 * n + 1)),
                                         ("pair", ("at", bj), ("at", 2 * m + 1)))
                    want = (Q.one() if (bi == bj == 1 and n == m) else Q.zero())
                    assert odd == want


def test_stabilize_sampler_idempotent_sym():
    rnd = Rand(85)
    b = _random_ss_matrix(rnd, Q)
    # rebuild b over the symbolic ring: pattern plus rational perturbation;
    # idempotency then holds exactly at a generic angle
    base = grass.ss_base(TQ)
    pert = b - grass.ss_base(Q)
    bt = base + StructuredMatrix.from_fin(
        grass.ss_space(), grass.ss_space(), TQ,
        {ij: TQ.from_rational(v) for ij, v in pert.K_entries().items()})
    _, sampler = stabilize_idempotent(bt)
    val = sampler(TrigAngle.symbolic(TQ))
    assert val.is_idempotent()


def test_stabilize_sampler_idempotent_float():
    rnd = Rand(86)
    ring = ring_make(float_tol(1e-9))
    b_q = _random_ss_matrix(rnd, Q)
    pert = b_q - grass.ss_base(Q)
    b = grass.ss_base(ring) + StructuredMatrix.from_fin(
        grass.ss_space(), grass.ss_space(), ring,
        {ij: float(v) for ij, v in pert.K_entries().items()})
    _, sampler = stabilize_idempotent(b)
    for theta in (0.3, 0.7, 1.2):
        val = sampler(TrigAngle.of_float(ring, theta))
        assert (val @ val).equals(val)


def test_make_room_rotation_unitary():
    m_pos = room_rotation(sym())
    m_neg = room_rotation(sym().reversed())
    ident = StructuredMatrix.identity(m_pos.rows, TQ)
    assert (m_pos @ m_neg).equals(ident)
    assert (m_neg @ m_pos).equals(ident)


def test_make_room_identity_unit():
    space = stab.room_space()
    one_room = StructuredMatrix.identity(TailN("room"), TQ)
    sampler = make_room(one_room, one_room)
    g = sampler(sym())
    assert g.psi.equals(StructuredMatrix.identity(space, TQ))


def test_make_room_transports_across_interleave():
    from vgrass.grass import embed_union

    rnd = Rand(87)
    room = TailN("room")
    host = TailN("host")
    space = stab.room_space()
    u, u_inv = rnd.unit_near_identity(room, Q, width=3, steps=3)
    sampler = make_room(u, u_inv)
    idx = window(room, 5)
    k = StructuredMatrix.from_fin(room, room, Q, {
        (idx[rnd.small_nat(5)], idx[rnd.small_nat(5)]): rnd.fraction()
        for _ in range(4)})
    # angle zero: conjugation acts on the room block
    g0 = sampler(TrigAngle.zero(Q))
    got0 = g0.psi @ embed_union(k, space, "L", "L") @ g0.psi_inv
    want0 = embed_union(u @ k @ u_inv, space, "L", "L")
    assert got0.equals(want0)
    # quarter turn: the room is fixed and the unit acts on even host positions
    gq = sampler(TrigAngle.quarter(Q))
    host_k = embed_union(hv_conjugation(k), space, "R", "R")
    gotq = gq.psi @ host_k @ gq.psi_inv
    wantq = embed_union(hv_conjugation(u @ k @ u_inv), space, "R", "R")
    assert gotq.equals(wantq)
    assert (gq.psi @ embed_union(k, space, "L", "L") @ gq.psi_inv).equals(
        embed_union(k, space, "L", "L"))


def test_make_room_needs_unit():
    room = TailN("room")
    z = StructuredMatrix.zero(room, room, Q)
    with pytest.raises(PreconditionError):
        make_room(z, z)
