from fractions import Fraction

import pytest

from vgrass.coeff import RATIONALS, TRIGQUOT, float_tol, matrix_ring, ring_make
from vgrass.errors import RingError, ShapeError, SupportError
from vgrass.mat import ColumnFiniteOperator, StructuredMatrix, kronecker
from vgrass.rand import Rand, from_dense
from vgrass.shape import Finite, Product, TailN, TailZ, all_indices, union, window
from vgrass.shape import slots as shape_slots

Q = ring_make(RATIONALS)
NT = TailN("n")
ZT = TailZ("z")


def shift(shape=NT):
    key = f"~{shape.tag}"
    return StructuredMatrix.symbol(shape, shape, Q, key, key, {1: Q.one()})


def unit(i, j, shape=NT, v=None):
    return StructuredMatrix.unit(shape, shape, Q, ("at", i), ("at", j), v)


def dense_product_oracle(a, b, n):
    """Dense window product; exact in the interior of the window."""
    margin = max(a.reach(), b.reach()) * (n + 2) + 4
    rows = window(a.rows, n)
    mids = window(a.cols, margin)
    cols = window(b.cols, n)
    da = a.to_dense(rows, mids)
    db = b.to_dense(mids, cols)
    out = {}
    for i, ri in enumerate(rows):
        for j, cj in enumerate(cols):
            acc = Q.zero()
            for k in range(len(mids)):
                acc = Q.add(acc, Q.mul(da[i][k], db[k][j]))
            out[(ri, cj)] = acc
    return out


def test_unilateral_shift_product():
    s = shift()
    got = s @ s.transpose()
    want = StructuredMatrix.identity(NT, Q) - unit(0, 0)
    assert got.equals(want)
    assert (s.transpose() @ s).equals(StructuredMatrix.identity(NT, Q))


def test_bilateral_shift_is_unitary():
    s = shift(ZT)
    ident = StructuredMatrix.identity(ZT, Q)
    assert (s @ s.transpose()).equals(ident)
    assert (s.transpose() @ s).equals(ident)


def test_unital_extension_bilinearity():
    rnd = Rand(21)
    idx = window(NT, 3)
    k = from_dense(NT, NT, Q, idx, idx, rnd.idempotent_dense(Q, len(idx)))
    l = from_dense(NT, NT, Q, idx, idx, rnd.idempotent_dense(Q, len(idx)))
    lam, mu = Fraction(2, 3), Fraction(-3)
    a = StructuredMatrix.scalar_matrix(NT, Q, lam) + k
    b = StructuredMatrix.scalar_matrix(NT, Q, mu) + l
    want = (StructuredMatrix.scalar_matrix(NT, Q, lam * mu)
            + l.scale_left(lam) + k.scale_right(mu) + k @ l)
    assert (a @ b).equals(want)


def test_interior_window_oracle_on_random_structured():
    rnd = Rand(7)
    cases = 0
    for trial in range(60):
        mats = []
        for _ in range(2):
            m = StructuredMatrix.zero(NT, NT, Q)
            for _ in range(rnd.small_nat(3)):
                off = rnd.small_int(-2, 2)
                m = m + StructuredMatrix.symbol(NT, NT, Q, "~n", "~n",
                                                {off: rnd.fraction()})
            for _ in range(rnd.small_nat(4)):
                m = m + unit(rnd.small_nat(5), rnd.small_nat(5), v=rnd.fraction())
            if rnd.r.random() < 0.4:
                m = m + StructuredMatrix.scalar_matrix(NT, Q, rnd.fraction())
            mats.append(m)
        a, b = mats
        got = a @ b
        oracle = dense_product_oracle(a, b, 6)
        for (i, j), v in oracle.items():
            assert got.entry(i, j) == v
        cases += 1
    assert cases == 60


def test_stride_family_products_against_oracle():
    # interleaving embeddings: entries e_{2n,n} and periodic diagonals
    rnd = Rand(17)
    hv = StructuredMatrix.family(NT, NT, Q, "~n", "~n", (2, 0, 1, 0, None, None),
                                 Q.one())
    assert (hv.transpose() @ hv).equals(StructuredMatrix.identity(NT, Q))
    proj = hv @ hv.transpose()
    per = StructuredMatrix.family(NT, NT, Q, "~n", "~n", (2, 0, 2, 0, None, None),
                                  Q.one())
    assert proj.equals(per)
    odd = StructuredMatrix.family(NT, NT, Q, "~n", "~n", (2, 1, 2, 1, None, None),
                                  Q.one())
    assert (per + odd).equals(StructuredMatrix.identity(NT, Q))
    for trial in range(20):
        k = from_dense(NT, NT, Q, window(NT, 4), window(NT, 4),
                       rnd.idempotent_dense(Q, 4))
        got = hv @ k @ hv.transpose()
        oracle = dense_product_oracle(hv @ k, hv.transpose(), 8)
        for (i, j), v in oracle.items():
            assert got.entry(i, j) == v


def test_algebra_laws_randomized():
    rnd = Rand(5)
    shp = union(NT, Finite(("p", "q")))
    key = "L.~n"

    def rand_structured():
        m = StructuredMatrix.zero(shp, shp, Q)
        for _ in range(rnd.small_nat(3)):
            m = m + StructuredMatrix.symbol(shp, shp, Q, key, key,
                                            {rnd.small_int(-2, 2): rnd.fraction()})
        w = window(shp, 4)
        for _ in range(rnd.small_nat(5)):
            i, j = rnd.r.choice(w), rnd.r.choice(w)
            m = m + StructuredMatrix.unit(shp, shp, Q, i, j, rnd.fraction())
        if rnd.r.random() < 0.3:
            m = m + StructuredMatrix.scalar_matrix(shp, Q, rnd.fraction())
        return m

    for _ in range(500):
        a, b, c = rand_structured(), rand_structured(), rand_structured()
        assert ((a + b) @ c).equals(a @ c + b @ c)
        assert (a @ (b @ c)).equals((a @ b) @ c)


def test_transpose_antihomomorphism():
    rnd = Rand(9)
    for _ in range(50):
        a = StructuredMatrix.symbol(NT, NT, Q, "~n", "~n",
                                    {rnd.small_int(-2, 2): rnd.fraction()})
        a = a + unit(rnd.small_nat(4), rnd.small_nat(4), v=rnd.fraction())
        b = StructuredMatrix.symbol(NT, NT, Q, "~n", "~n",
                                    {rnd.small_int(-2, 2): rnd.fraction()})
        b = b + unit(rnd.small_nat(4), rnd.small_nat(4), v=rnd.fraction())
        assert (a @ b).transpose().equals(b.transpose() @ a.transpose())


def test_transpose_antihom_noncommutative():
    ring = ring_make(matrix_ring(RATIONALS, 2))
    rnd = Rand(31)
    shp = Finite((0, 1, 2))
    idx = all_indices(shp)
    for _ in range(30):
        a = from_dense(shp, shp, ring, idx, idx,
                       [[rnd.ring_element(ring) for _ in idx] for _ in idx])
        b = from_dense(shp, shp, ring, idx, idx,
                       [[rnd.ring_element(ring) for _ in idx] for _ in idx])
        assert (a @ b).transpose().equals(b.transpose() @ a.transpose())


def test_is_k_ideal_property():
    s = shift()
    k = unit(2, 5)
    full = StructuredMatrix.identity(NT, Q) + s  # not finitely supported
    assert not full.is_K()
    assert k.is_K()
    assert (full @ k).is_K()
    assert (k @ full).is_K()


def test_approx_equiv():
    ident = StructuredMatrix.identity(NT, Q)
    assert ident.approx_equiv(ident - unit(0, 0))
    assert not shift().approx_equiv(StructuredMatrix.zero(NT, NT, Q))


def test_scalar_vs_symbol_identity_equal():
    sym = StructuredMatrix.symbol(NT, NT, Q, "~n", "~n", {0: Q.one()})
    assert sym.equals(StructuredMatrix.identity(NT, Q))


def test_finite_trace():
    assert unit(0, 0).finite_trace() == 1
    assert StructuredMatrix.zero(NT, NT, Q).finite_trace() == 0
    with pytest.raises(SupportError):
        StructuredMatrix.identity(NT, Q).finite_trace()


def test_trace_cyclicity_under_conjugation():
    rnd = Rand(13)
    shp = Finite(tuple(range(6)))
    idx = all_indices(shp)
    for _ in range(25):
        k = from_dense(shp, shp, Q, idx, idx,
                       [[rnd.fraction() for _ in idx] for _ in idx])
        g, g_inv = rnd.unit_near_identity(shp, Q, width=0, steps=5)
        assert (g @ k @ g_inv).finite_trace() == k.finite_trace()


def test_kronecker_unit_and_traces():
    one2 = StructuredMatrix.identity(Finite((0, 1)), Q)
    onept = StructuredMatrix.identity(Finite(("pt",)), Q)
    assert kronecker(onept, one2).equals(
        StructuredMatrix.identity(Product(Finite(("pt",)), Finite((0, 1))), Q))
    rnd = Rand(2)
    f3 = Finite((0, 1, 2))
    idx = all_indices(f3)
    for _ in range(20):
        k = from_dense(f3, f3, Q, idx, idx, [[rnd.fraction() for _ in idx] for _ in idx])
        l = from_dense(f3, f3, Q, idx, idx, [[rnd.fraction() for _ in idx] for _ in idx])
        assert kronecker(k, l).finite_trace() == k.finite_trace() * l.finite_trace()


def test_kronecker_finite_times_symbol():
    e00 = StructuredMatrix.unit(Finite((0, 1)), Finite((0, 1)), Q, ("at", 0), ("at", 0))
    s = shift()
    ks = kronecker(e00, s)
    # entries sit on the {0} x tail slice
    assert ks.entry(("pair", ("at", 0), ("at", 3)), ("pair", ("at", 0), ("at", 2))) == 1
    assert ks.entry(("pair", ("at", 1), ("at", 3)), ("pair", ("at", 1), ("at", 2))) == 0
    prod_shape = ks.rows
    dense_win = [("pair", ("at", i), ("at", n)) for i in (0, 1) for n in range(5)]
    for i in dense_win:
        for j in dense_win:
            ip, ic = i[1][1], i[2][1]
            jp, jc = j[1][1], j[2][1]
            want = Q.one() if (ip == jp == 0 and ic == jc + 1) else Q.zero()
            assert ks.entry(i, j) == want


def test_kronecker_rejects_noncommutative():
    ring = ring_make(matrix_ring(RATIONALS, 2))
    one = StructuredMatrix.identity(Finite((0,)), ring)
    with pytest.raises(RingError):
        kronecker(one, one)


def test_kronecker_mixed_scalar_parts():
    f2 = Finite((0, 1))
    a = StructuredMatrix.scalar_matrix(f2, Q, Fraction(2)) + StructuredMatrix.unit(
        f2, f2, Q, ("at", 0), ("at", 1))
    s = shift() + StructuredMatrix.scalar_matrix(NT, Q, Fraction(1, 2))
    ks = kronecker(a, s)
    for (ip, ic) in ((0, 0), (0, 3), (1, 2)):
        for (jp, jc) in ((0, 0), (0, 2), (1, 2), (1, 1)):
            i = ("pair", ("at", ip), ("at", ic))
            j = ("pair", ("at", jp), ("at", jc))
            want = Q.mul(a.entry(("at", ip), ("at", jp)),
                         s.entry(("at", ic), ("at", jc)))
            assert ks.entry(i, j) == want


def test_column_finite_operator_basics():
    # toy operator: column j supported on rows {0, j+1}
    def rule(j):
        n = j[1]
        return {("at", 0): Fraction(1), ("at", n + 1): Fraction(-1)}

    c = ColumnFiniteOperator(NT, NT, Q, rule)
    k = unit(1, 2)
    ck = c.apply(k)
    assert ck.K_entries() == {(("at", 0), ("at", 2)): Fraction(1),
                              (("at", 2), ("at", 2)): Fraction(-1)}
    skk = c.sandwich(k)
    assert skk.entry(("at", 0), ("at", 0)) == Fraction(1)
    assert skk.entry(("at", 2), ("at", 3)) == Fraction(1)
    assert skk.entry(("at", 0), ("at", 3)) == Fraction(-1)
    assert skk.entry(("at", 2), ("at", 0)) == Fraction(-1)


def test_zero_sandwich():
    def rule(j):
        return {("at", j[1]): Fraction(1)}

    c = ColumnFiniteOperator(NT, NT, Q, rule)
    z = StructuredMatrix.zero(NT, NT, Q)
    assert c.sandwich(z).is_zero_matrix()


def test_float_tolerance_equality():
    ring = ring_make(float_tol(1e-9))
    a = StructuredMatrix.unit(NT, NT, ring, ("at", 0), ("at", 0), 0.3 + 0.3 + 0.3)
    b = StructuredMatrix.unit(NT, NT, ring, ("at", 0), ("at", 0), 0.9)
    assert a.equals(b)


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        shift() @ StructuredMatrix.identity(ZT, Q)
    with pytest.raises(RingError):
        shift() + StructuredMatrix.identity(NT, ring_make(float_tol()))
