import math

import pytest

from vgrass.coeff import RATIONALS, ring_make
from vgrass.errors import ShapeError
from vgrass.shape import (
    Finite,
    Product,
    TailN,
    TailZ,
    Union,
    all_indices,
    locate,
    point,
    prod_swap,
    product,
    slots,
    split_tail,
    tail_embed,
    union,
    union_assoc,
    union_swap,
    union_unit_right,
    window,
)

Q = ring_make(RATIONALS)


def test_union_cardinality():
    assert union(Finite(("x",)), Finite(("y",))).cardinality == 2
    assert union(TailN("a"), Finite(("p", "q"))).cardinality == math.inf


def test_union_of_regularization_shapes():
    half = Product(Finite((0, 1)), TailN("n"))
    two = union(half, half)
    assert two.cardinality == math.inf
    assert len([s for s in slots(two)]) == 4


def test_product_shapes():
    p = product(Finite((0, 1)), TailN("n"))
    assert p.cardinality == math.inf
    q = product(Finite((0, 1)), Finite(("a", "b")))
    assert q.cardinality == 4
    with pytest.raises(ShapeError):
        product(TailN("a"), TailN("b"))


def test_union_freshens_tags():
    u = union(TailN("n"), TailN("n"))
    ks = [s.key for s in slots(u)]
    assert len(set(ks)) == 2


def test_locate_roundtrip():
    shp = Union(Product(Finite((0, 1)), TailN("n")), Finite(("p",)))
    for idx in window(shp, 5):
        key, coord = locate(shp, idx)
        slot = {s.key: s for s in slots(shp)}[key]
        assert slot.embed(coord) == idx


def test_all_indices_finite_only():
    assert len(all_indices(Finite((0, 1, 2)))) == 3
    with pytest.raises(ShapeError):
        all_indices(TailN("n"))


def test_identity_treeiso_matrix():
    from vgrass.shape import Relabeling

    shp = Union(TailN("n"), Finite(("p",)))
    r = Relabeling.identity(shp)
    m = r.matrix(Q)
    from vgrass.mat import StructuredMatrix

    assert m.equals(StructuredMatrix.identity(shp, Q))


def test_tail_embed_isometry():
    t = TailN("n")
    for stride, offset in ((2, 0), (1, 1), (3, 2)):
        r = tail_embed(t, stride, offset)
        rh = r.matrix(Q)
        prod_ = rh.transpose() @ rh
        assert prod_.equals(rh.__class__.identity(t, Q))
        proj = rh @ rh.transpose()
        assert proj.is_idempotent()


def test_shift_embed_defect():
    # r(n) = n+1 has r^ r^T = 1 - e00
    from vgrass.mat import StructuredMatrix

    t = TailN("n")
    r = tail_embed(t, 1, 1)
    rh = r.matrix(Q)
    want = StructuredMatrix.identity(t, Q) - StructuredMatrix.unit(
        t, t, Q, ("at", 0), ("at", 0))
    assert (rh @ rh.transpose()).equals(want)


def test_split_tail_even_odd():
    t = TailN("n")
    parts, merge = split_tail(t, 2)
    assert merge.apply(("pair", ("at", 0), ("at", 3))) == ("at", 6)
    assert merge.apply(("pair", ("at", 1), ("at", 3))) == ("at", 7)
    assert merge.is_bijective()
    inv = merge.inverse()
    assert inv.apply(("at", 6)) == ("pair", ("at", 0), ("at", 3))
    assert inv.apply(("at", 7)) == ("pair", ("at", 1), ("at", 3))


def test_split_tail_twice_shape():
    t = TailN("n")
    parts, _ = split_tail(t, 2)
    inner, _ = split_tail(parts.right, 2)
    again = Product(parts.left, inner)
    assert len(slots(again)) == 4


def test_relabel_conjugation_multiplicative():
    from vgrass.mat import StructuredMatrix
    from vgrass.rand import Rand, from_dense

    rnd = Rand(3)
    t = TailN("n")
    parts, merge = split_tail(t, 2)
    idx = window(parts, 3)
    for case in range(100):
        a = rnd.idempotent_dense(Q, len(idx))
        b = rnd.idempotent_dense(Q, len(idx))
        A = from_dense(parts, parts, Q, idx, idx, a)
        B = from_dense(parts, parts, Q, idx, idx, b)
        lhs = merge.transport(A @ B)
        rhs = merge.transport(A) @ merge.transport(B)
        assert lhs.equals(rhs)


def test_transport_zero():
    from vgrass.mat import StructuredMatrix

    t = TailN("n")
    parts, merge = split_tail(t, 2)
    z = StructuredMatrix.zero(parts, parts, Q)
    assert merge.transport(z).is_zero_matrix()


def test_union_swap_and_assoc():
    a, b, c = Finite(("x",)), TailN("n"), Finite(("y", "z"))
    r = union_swap(a, b)
    assert r.is_bijective()
    assert r.apply(("L", ("at", 0))) == ("R", ("at", 0))
    r2 = union_assoc(a, b, c)
    assert r2.is_bijective()
    assert r2.apply(("L", ("L", ("at", 0)))) == ("L", ("at", 0))
    assert r2.apply(("R", ("at", 1))) == ("R", ("R", ("at", 1)))


def test_union_unit_and_prod_swap():
    a = TailN("n")
    r = union_unit_right(a)
    assert r.apply(("L", ("at", 5))) == ("at", 5)
    p = prod_swap(Finite((0, 1)), a)
    assert p.apply(("pair", ("at", 1), ("at", 3))) == ("pair", ("at", 3), ("at", 1))
    assert p.is_bijective()
