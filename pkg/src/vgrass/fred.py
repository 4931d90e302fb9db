"""Connectors and Fredholm pairs with their index calculus.

A connector [xi, a> is a unit xi carrying the complement of the idempotent a
back onto a up to finite support; its index is the pair <xi abar xi^-1, a>.
A Fredholm pair (psi, phi) is an operator with a parametrix, both products
equal to 1 up to finite support; its canonical connector F(psi, phi) is a
product of three exact involutions, hence itself an exact involution no
matter how sloppy the parametrix is.

Sign convention: this artifact orients the Fredholm index as
Ind_F(psi, phi) = Ind [F(psi, phi), 1 (+) 0>, the connector-inverse of the
base 0 (+) 1; with this orientation the forward unilateral shift n -> n+1
paired with its left inverse has class trace +1, and the trace negates under
pair inversion.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import PreconditionError, RingError, ShapeError
from .grass import (
    ChainStep,
    IdempotentPair,
    Morphism,
    bar,
    block_space,
    chi,
    diag_blocks,
    diff_decomposition,
    embed_union,
    pair_sum,
    regularize_matrix,
    sw,
    union_blocks,
)
from .mat import StructuredMatrix, kronecker
from .shape import Union, union


@dataclass
class Connector:
    xi: StructuredMatrix
    xi_inv: StructuredMatrix
    a: StructuredMatrix

    @property
    def ring(self):
        return self.xi.ring

    @property
    def space(self):
        return self.xi.rows

    def validate(self):
        one = StructuredMatrix.identity(self.space, self.ring)
        if not (self.xi @ self.xi_inv).equals(one) or not (
                self.xi_inv @ self.xi).equals(one):
            raise PreconditionError("connector term must be a unit")
        if not self.a.is_idempotent():
            raise PreconditionError("base term must be idempotent")
        moved = self.xi @ bar(self.a) @ self.xi_inv
        if not moved.approx_equiv(self.a):
            raise PreconditionError(
                "connector must carry the complement onto the base "
                "up to finite support")
        return self


def index_of(c: Connector) -> IdempotentPair:
    """The index pair <xi abar xi^-1, a>."""
    lead = c.xi @ bar(c.a) @ c.xi_inv
    return IdempotentPair(c.space, lead, c.a)


def connector_sum(c1: Connector, c2: Connector) -> Connector:
    space = union(c1.space, c2.space)

    def emb(x, y):
        return (embed_union(x, space, "L", "L")
                + embed_union(y, space, "R", "R"))

    return Connector(emb(c1.xi, c2.xi), emb(c1.xi_inv, c2.xi_inv),
                     emb(c1.a, c2.a))


def connector_inv(c: Connector) -> Connector:
    return Connector(c.xi, c.xi_inv, bar(c.a))


def connector_tensor_left(c1: Connector, c2: Connector) -> Connector:
    """Product connector [ (a x sigma + abar x 1)^-1 (xi a x 1 + xi abar x
    sigma), a x cbar + abar x c >."""
    a, xi, xi_inv = c1.a, c1.xi, c1.xi_inv
    cc, sg, sg_inv = c2.a, c2.xi, c2.xi_inv
    ring = a.ring
    one_xi = StructuredMatrix.identity(c2.space, ring)
    left = kronecker(a, sg) + kronecker(bar(a), one_xi)
    left_inv = kronecker(a, sg_inv) + kronecker(bar(a), one_xi)
    right = kronecker(xi @ a, one_xi) + kronecker(xi @ bar(a), sg)
    right_inv = kronecker(a, one_xi) @ kronecker(xi_inv, one_xi) + \
        kronecker(bar(a), sg_inv) @ kronecker(xi_inv, one_xi)
    base = kronecker(a, bar(cc)) + kronecker(bar(a), cc)
    return Connector(left_inv @ right, right_inv @ left, base)


def tensor_index_intertwiner(c1: Connector, c2: Connector) -> Morphism:
    """Conjugator carrying the index of the product connector onto the
    left-tensor of the two indices."""
    ring = c1.ring
    one_xi = StructuredMatrix.identity(c2.space, ring)
    g = kronecker(c1.a, c2.xi) + kronecker(bar(c1.a), one_xi)
    g_inv = kronecker(c1.a, c2.xi_inv) + kronecker(bar(c1.a), one_xi)
    return Morphism(g.rows, g.rows, g, g, g_inv, g_inv)


def tilde_correction(xi: StructuredMatrix, eta: StructuredMatrix,
                     a: StructuredMatrix) -> StructuredMatrix:
    """Involution substitute (a + a xi abar - abar)(a - a eta abar - abar)
    (a + a xi abar - abar) for a connector with a sloppy parametrix.

    Requires xi a = abar xi up to finite support; squares to 1 exactly when
    eta is an exact inverse and the anticommutation is exact, and to 1 plus
    a finitely supported error in general."""
    if not (xi @ a).approx_equiv(bar(a) @ xi):
        raise PreconditionError(
            "connector must anticommute with the base up to finite support")
    ab = bar(a)
    f1 = a + a @ xi @ ab - ab
    f2 = a - a @ eta @ ab - ab
    return f1 @ f2 @ f1


def swap_replacement_holds(psi: StructuredMatrix, a: StructuredMatrix) -> bool:
    """The two-block replacement display: diag(psi, 1) agrees with its
    sw(a)-conjugate up to finite support, given psi - abar psi abar ~ a."""
    ring = psi.ring
    if not (psi - bar(a) @ psi @ bar(a)).approx_equiv(a):
        return False
    two = diag_blocks(ring, [psi, StructuredMatrix.identity(a.rows, ring)])
    s = sw(2, 0, 1, a)
    return (s @ two @ s).approx_equiv(two)


# ---------------------------------------------------------------------------
# Fredholm pairs


@dataclass
class FredholmPair:
    psi: StructuredMatrix  # Omega1 x Omega0
    phi: StructuredMatrix  # Omega0 x Omega1

    @property
    def ring(self):
        return self.psi.ring

    @property
    def src(self):
        return self.psi.cols

    @property
    def dst(self):
        return self.psi.rows

    def validate(self):
        one0 = StructuredMatrix.identity(self.src, self.ring)
        one1 = StructuredMatrix.identity(self.dst, self.ring)
        if not (self.phi @ self.psi).approx_equiv(one0):
            raise PreconditionError("phi psi must be 1 up to finite support")
        if not (self.psi @ self.phi).approx_equiv(one1):
            raise PreconditionError("psi phi must be 1 up to finite support")
        return self


def connector_F(fp: FredholmPair) -> Connector:
    """The factored involution [[1, phi], [0, -1]] [[1, 0], [-psi, -1]]
    [[1, phi], [0, -1]]; exactly squares to 1 for every Fredholm pair."""
    ring = fp.ring
    space = union(fp.src, fp.dst)
    one0 = StructuredMatrix.identity(fp.src, ring)
    one1 = StructuredMatrix.identity(fp.dst, ring)
    f1 = union_blocks(space, ring, {"LL": one0, "LR": fp.phi, "RR": -one1})
    f2 = union_blocks(space, ring, {"LL": one0, "RL": -fp.psi, "RR": -one1})
    f = f1 @ f2 @ f1
    base = union_blocks(space, ring, {"RR": one1})  # 0 (+) 1
    return Connector(f, f, base)


def index_F(fp: FredholmPair) -> IdempotentPair:
    """Index pair of a Fredholm pair, in this artifact's orientation (over
    the base 1 (+) 0; see the module docstring)."""
    c = connector_F(fp)
    return index_of(Connector(c.xi, c.xi_inv, bar(c.a)))


def chi_F(fp: FredholmPair):
    return chi(index_F(fp))


def fred_sum(fp1: FredholmPair, fp2: FredholmPair) -> FredholmPair:
    src = union(fp1.src, fp2.src)
    dst = union(fp1.dst, fp2.dst)

    def emb(rows, cols, x, y):
        return (_embed_rect(x, rows, cols, "L", "L")
                + _embed_rect(y, rows, cols, "R", "R"))

    return FredholmPair(emb(dst, src, fp1.psi, fp2.psi),
                        emb(src, dst, fp1.phi, fp2.phi))


def _embed_rect(m, rows, cols, row_side, col_side):
    from .grass import _embed
    from .shape import slots

    rcomp = rows.left if row_side == "L" else rows.right
    ccomp = cols.left if col_side == "L" else cols.right
    rtr = {old.key: f"{row_side}.{new.key}"
           for old, new in zip(slots(m.rows), slots(rcomp))}
    ctr = {old.key: f"{col_side}.{new.key}"
           for old, new in zip(slots(m.cols), slots(ccomp))}
    return _embed(m, rows, cols, rtr.__getitem__, ctr.__getitem__,
                  lambda i: (row_side, i), lambda j: (col_side, j))


def fred_inv(fp: FredholmPair) -> FredholmPair:
    return FredholmPair(fp.phi, fp.psi)


def fred_compose(fp2: FredholmPair, fp1: FredholmPair) -> FredholmPair:
    """(psi', phi') o (psi, phi) = (psi' psi, phi phi')."""
    if fp2.src != fp1.dst:
        raise ShapeError("composition needs matching middle index sets")
    return FredholmPair(fp2.psi @ fp1.psi, fp1.phi @ fp2.phi)


def fred_tensor_left(fp1: FredholmPair, fp2: FredholmPair,
                     variant="reduced") -> FredholmPair:
    """Tensor of Fredholm pairs; 'raw' is the connector-term block display,
    'reduced' the variant with the invertible upper-left corner."""
    ring = fp1.ring
    psi, phi = fp1.psi, fp1.phi
    theta, chi_ = fp2.psi, fp2.phi
    one0 = StructuredMatrix.identity(fp1.src, ring)
    one1 = StructuredMatrix.identity(fp1.dst, ring)
    e1 = StructuredMatrix.identity(fp2.src, ring)  # on Xi0
    e2 = StructuredMatrix.identity(fp2.dst, ring)  # on Xi1
    if variant == "raw":
        blocks_psi = {
            "LL": kronecker(one0 - phi @ psi, theta),
            "LR": kronecker(phi.scale_left(ring.from_int(2)) - phi @ psi @ phi, e2),
            "RL": kronecker(psi, e1),
            "RR": kronecker(psi @ phi - one1, chi_),
        }
        blocks_phi = {
            "LL": kronecker(one0 - phi @ psi, chi_),
            "LR": kronecker(phi.scale_left(ring.from_int(2)) - phi @ psi @ phi, e1),
            "RL": kronecker(psi, e2),
            "RR": kronecker(psi @ phi - one1, theta),
        }
    elif variant == "reduced":
        blocks_psi = {
            "LL": kronecker(one0, theta),
            "LR": kronecker(phi, e2),
            "RL": -kronecker(psi, e1),
            "RR": kronecker(one1 - psi @ phi, chi_),
        }
        blocks_phi = {
            "LL": kronecker(one0 - phi @ psi, chi_),
            "LR": -kronecker(phi, e1),
            "RL": kronecker(psi, e2),
            "RR": kronecker(one1, theta),
        }
    else:
        raise PreconditionError(f"unknown tensor variant {variant!r}")

    rows_psi = union(blocks_psi["LL"].rows, blocks_psi["RL"].rows)
    cols_psi = union(blocks_psi["LL"].cols, blocks_psi["RR"].cols)

    def assemble(blocks, rows, cols):
        out = StructuredMatrix.zero(rows, cols, ring)
        for pos, m in blocks.items():
            out = out + _embed_rect(m, rows, cols, pos[0], pos[1])
        return out

    big_psi = assemble(blocks_psi, rows_psi, cols_psi)
    big_phi = assemble(blocks_phi, cols_psi, rows_psi)
    return FredholmPair(big_psi, big_phi)


# ---------------------------------------------------------------------------
# witness chains for the connector lemma


def lemma_a1_witness(c1: Connector, c2: Connector):
    """Perturbing the connector term by a finite amount leaves the index
    class unchanged: a one-step witness."""
    if not c1.xi.approx_equiv(c2.xi):
        raise PreconditionError("connector terms must agree up to finite support")
    if not c1.a.equals(c2.a):
        raise PreconditionError("the base idempotents must agree")
    ring = c1.ring
    one = StructuredMatrix.identity(c1.space, ring)
    g = c2.xi @ c1.xi_inv
    g_inv = c1.xi @ c2.xi_inv
    m = Morphism(c1.space, c1.space, g, one, g_inv, one)
    from .grass import HomotopyWitness

    return HomotopyWitness(index_of(c1), index_of(c2), [], [], m)


def lemma_a2_chain(xi, xi_inv, a1, a2):
    """Witness steps for replacing the base idempotent by a finitely
    different one: sum with the inverted base, switch into regularized form,
    trade the switched connector for the plain cross swap, and land on the
    regularized difference pair."""
    from .grass import from_blocks

    ring = xi.ring
    if not a1.approx_equiv(a2):
        raise PreconditionError("bases must agree up to finite support")
    omega = a1.rows
    two = block_space(2, omega)
    one2 = StructuredMatrix.identity(two, ring)
    d_xi = diag_blocks(ring, [xi, xi])
    d_xi_inv = diag_blocks(ring, [xi_inv, xi_inv])
    base0 = diag_blocks(ring, [a1, bar(a2)])
    start = IdempotentPair(two, d_xi @ (one2 - base0) @ d_xi_inv, base0)
    s = sw(2, 0, 1, a2)
    smor = Morphism(two, two, s, s, s, s)
    mid = smor.conjugate(start)
    steps = [ChainStep("conj", start, mid, smor)]
    # the switched connector agrees with the plain cross swap up to a
    # finitely supported unit factor
    big = s @ d_xi @ s
    big_inv = s @ d_xi_inv @ s
    cross = from_blocks(2, ring, {(0, 1): xi, (1, 0): xi})
    cross_inv = from_blocks(2, ring, {(0, 1): xi_inv, (1, 0): xi_inv})
    g = cross @ big_inv
    g_inv = big @ cross_inv
    gm = Morphism(two, two, g, one2, g_inv, one2)
    end = gm.conjugate(mid)
    steps.append(ChainStep("conj", mid, end, gm))
    # endpoint identification: the regularized difference pair of the
    # conjugated complements over the regularized base pair
    reg = IdempotentPair(
        two,
        regularize_matrix(xi @ bar(a1) @ xi_inv, xi @ bar(a2) @ xi_inv),
        regularize_matrix(a1, a2),
    )
    steps.append(ChainStep("eq", end, reg, None))
    return steps


def lemma_c_chain(xi, xi_inv, a):
    """Witness steps showing the double-conjugate pair has trivial class:
    <xi^2 a xi^-2, a> is the <xi, xi>-conjugate of <xi a xi^-1, xi^-1 a xi>,
    which decomposes through the difference corollary."""
    space = a.rows
    ring = a.ring
    b = xi @ a @ xi_inv
    b_prime = xi_inv @ a @ xi
    pre = IdempotentPair(space, b, b_prime)
    post = IdempotentPair(space, xi @ b @ xi_inv, a)
    m = Morphism(space, space, xi, xi, xi_inv, xi_inv)
    steps = [ChainStep("conj", pre, post, m)]
    steps.extend(diff_decomposition(b, b_prime, a))
    return steps


# ---------------------------------------------------------------------------
# report helpers


def index_report(fp: FredholmPair, ring_to_json=None) -> dict:
    """Machine-readable summary used by the command-line interface."""
    c = connector_F(fp)
    one = StructuredMatrix.identity(c.space, fp.ring)
    involution_ok = (c.xi @ c.xi).equals(one)
    ind = index_F(fp)
    diff = ind.b - ind.a
    support = sorted(str(ij) for ij in diff.K_entries())
    value = chi(ind)
    enc = ring_to_json or (lambda v: str(v))
    return {
        "chi": enc(value),
        "involution_check": involution_ok,
        "residual_support": len(support),
    }
