"""Regular idempotents: the core information surviving regularization.

A matrix H = [[h00, h01], [h10, 1 + h11]] on {0,1} x Omega is an idempotent
iff the four component identities hold

    h00 h00 + h01 h10 = h00        h00 h01 + h01 h11 = 0
    h10 h00 + h11 h10 = 0          h10 h01 + h11 h11 = -h11

and is *regular* when additionally the eight mutual annihilations

    h00 h10 = h01 h00 = 0          h00 h11 = h01 h01 = 0
    h10 h10 = h11 h00 = 0          h10 h11 = h11 h01 = 0

hold.  Regularizations of idempotent pairs are regular, and the pair
operations descend to closed-form maps on the cores; each map is kept
coherent with its pair-level counterpart (checked exactly in the tests).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import PreconditionError, SupportError
from .grass import (
    IdempotentPair,
    HomotopyWitness,
    Morphism,
    bar,
    block_space,
    core,
    core_tensor_blocks,
    core_tensor_blocks_right,
    from_blocks,
    pair_prime,
    r_zero_matrix,
    r_zero_pair,
    regularize_pair,
    verify_witness,
)
from .mat import StructuredMatrix
from .shape import FIN, Finite, IndexSet, Relabeling, TailN, locate, slot_map, slots


@dataclass
class CoreInfo:
    h00: StructuredMatrix
    h01: StructuredMatrix
    h10: StructuredMatrix
    h11: StructuredMatrix

    @property
    def ring(self):
        return self.h00.ring

    @property
    def omega(self):
        return self.h00.rows

    def parts(self):
        return (self.h00, self.h01, self.h10, self.h11)

    def idempotency_defects(self):
        h00, h01, h10, h11 = self.parts()
        return (
            h00 @ h00 + h01 @ h10 - h00,
            h00 @ h01 + h01 @ h11,
            h10 @ h00 + h11 @ h10,
            h10 @ h01 + h11 @ h11 + h11,
        )

    def regularity_defects(self):
        h00, h01, h10, h11 = self.parts()
        return (
            h00 @ h10, h01 @ h00, h00 @ h11, h01 @ h01,
            h10 @ h10, h11 @ h00, h10 @ h11, h11 @ h01,
        )

    def is_idempotent_core(self):
        return all(d.is_zero_matrix() for d in self.idempotency_defects())

    def is_regular_core(self):
        return (self.is_idempotent_core()
                and all(d.is_zero_matrix() for d in self.regularity_defects()))


@dataclass
class RegularIdempotent:
    space: IndexSet  # {0,1} x Omega
    H: StructuredMatrix

    @property
    def ring(self):
        return self.H.ring

    def validate(self):
        if not self.H.is_idempotent():
            raise PreconditionError("not an idempotent")
        omega = self.space.right
        if not self.core().is_regular_core():
            raise PreconditionError("regularity identities fail")
        return self

    def core(self) -> CoreInfo:
        from .grass import block_get

        omega = self.space.right
        ring = self.ring
        return CoreInfo(
            block_get(self.H, omega, 0, 0),
            block_get(self.H, omega, 0, 1),
            block_get(self.H, omega, 1, 0),
            block_get(self.H, omega, 1, 1) - StructuredMatrix.identity(omega, ring),
        )

    def as_pair(self) -> IdempotentPair:
        omega = self.space.right
        return IdempotentPair(self.space, self.H, r_zero_matrix(omega, self.ring))


def h_components(p: IdempotentPair) -> CoreInfo:
    """Extract the four core products of a pair."""
    return CoreInfo(*core(p))


def assemble(info: CoreInfo) -> RegularIdempotent:
    """Build the block idempotent from a core; rejects cores violating the
    idempotency identities."""
    if not info.is_idempotent_core():
        raise PreconditionError("core violates the idempotency identities")
    ring = info.ring
    omega = info.omega
    h = from_blocks(2, ring, {
        (0, 0): info.h00,
        (0, 1): info.h01,
        (1, 0): info.h10,
        (1, 1): StructuredMatrix.identity(omega, ring) + info.h11,
    })
    return RegularIdempotent(block_space(2, omega), h)


def regular_from_pair(p: IdempotentPair) -> RegularIdempotent:
    return RegularIdempotent(block_space(2, p.space), regularize_pair(p).b)


def _core_map_inv(info: CoreInfo) -> CoreInfo:
    h00, h01, h10, h11 = info.parts()
    return CoreInfo(-h11, -h10, -h01, -h00)


def _core_map_prime(info: CoreInfo) -> CoreInfo:
    h00, h01, h10, h11 = info.parts()
    s = h00 + h01 + h10 + h11
    d = s @ (h00 - h11)
    return CoreInfo(d - h11, h00 + h10 + h11 - d, h00 + h01 + h11 - d, d - h00)


def regular_inv(u: RegularIdempotent) -> RegularIdempotent:
    """Core map matching regularization of the inverse pair."""
    return assemble(_core_map_inv(u.core()))


def regular_prime(u: RegularIdempotent) -> RegularIdempotent:
    """Core map matching regularization of the classical switch."""
    return assemble(_core_map_prime(u.core()))


def _entries_to_matrix(ring, rows, cols, ents):
    m = StructuredMatrix.zero(rows, cols, ring)
    fin = {}
    for (i, j), v in ents.items():
        m._add_fin(fin, i, j, v)
    m.fin = fin
    return m


def _tensor_assemble(u, v, blocks_fn):
    from .mat import kronecker

    ring = u.ring
    omega, xi = u.space.right, v.space.right
    h = tuple(m.K_entries() for m in u.core().parts())
    k = tuple(m.K_entries() for m in v.core().parts())
    cu = CoreInfo(*[m for m in u.core().parts()])
    blocks = blocks_fn(ring, h, k, u, v)
    prod = kronecker(StructuredMatrix.identity(omega, ring),
                     StructuredMatrix.identity(xi, ring)).rows
    parts = []
    for key in ((0, 0), (0, 1), (1, 0), (1, 1)):
        parts.append(_entries_to_matrix(ring, prod, prod, blocks[key]))
    info = CoreInfo(*parts)
    return assemble(info)


def regular_tensor_left(u: RegularIdempotent, v: RegularIdempotent) -> RegularIdempotent:
    """Tensor of regular idempotents through the core display (left variant)."""

    def blocks_fn(ring, h, k, uu, vv):
        kp = tuple(m.K_entries() for m in _core_map_prime(vv.core()).parts())
        return core_tensor_blocks(ring, h, k, kp)

    return _tensor_assemble(u, v, blocks_fn)


def regular_tensor_right(u: RegularIdempotent, v: RegularIdempotent) -> RegularIdempotent:
    """Tensor through the core display with the factor roles exchanged."""

    def blocks_fn(ring, h, k, uu, vv):
        hp = tuple(m.K_entries() for m in _core_map_prime(uu.core()).parts())
        return core_tensor_blocks_right(ring, h, k, hp)

    return _tensor_assemble(u, v, blocks_fn)


# ---------------------------------------------------------------------------
# certified dimension upper bound


@dataclass
class DimCertificate:
    bound: int
    trimmed: IdempotentPair  # <U, trivial pattern> on {0,1} x (trimmed set)
    witness: HomotopyWitness

    def verifies(self) -> bool:
        return verify_witness(self.witness)


def _touched_base_indices(h_parts, omega):
    touched = []
    seen = set()
    for m in h_parts:
        for (i, j) in m.K_entries():
            for idx in (i, j):
                if idx not in seen:
                    seen.add(idx)
                    touched.append(idx)
    return touched


def dim_upper(p: IdempotentPair) -> DimCertificate:
    """Regularize, trim base indices whose rows and columns carry no core
    information, and certify the trimmed form by an exact witness.

    The bound is the number of surviving base indices; it is an upper bound
    for the stabilization-minimal size, not the minimum itself.
    """
    ring = p.ring
    omega = p.space
    info = h_components(p)
    touched = sorted(_touched_base_indices(info.parts(), omega),
                     key=lambda idx: str(idx))
    bound = len(touched)
    xi = Finite(tuple(f"w{i}" for i in range(bound)))
    pos = {idx: i for i, idx in enumerate(touched)}

    # trimmed core: transport entries through the index compression
    def squeeze(m):
        ents = {}
        for (i, j), v in m.K_entries().items():
            ents[(("at", pos[i]), ("at", pos[j]))] = v
        return _entries_to_matrix(ring, xi, xi, ents)

    trimmed_info = CoreInfo(*[squeeze(m) for m in info.parts()])
    trimmed = assemble(trimmed_info)
    trimmed_pair = trimmed.as_pair()

    witness = _dim_witness(p, trimmed_pair, touched, pos)
    return DimCertificate(bound, trimmed_pair, witness)


def _dim_witness(p, trimmed_pair, touched, pos) -> HomotopyWitness:
    """Witness: trimmed (+) trivial-on-complement is a relabeling transport of
    the regularization of p."""
    ring = p.ring
    omega = p.space
    reg = regularize_pair(p)
    # complement copies for the two pad halves need disjoint tags
    rest0 = _complement_shape(omega, set(touched), "0")
    rest1 = _complement_shape(omega, set(touched), "1")
    pads = [("zero", block_half(rest0, 0)), ("one", block_half(rest1, 1))]
    relab = _trim_relabeling(omega, touched, pos, rest0, rest1)
    moved = Morphism(
        relab.target, relab.source,
        relab.matrix(ring), relab.matrix(ring),
        relab.inverse().matrix(ring), relab.inverse().matrix(ring),
    )
    return HomotopyWitness(
        lhs=reg, rhs=trimmed_pair, pads_lhs=[], pads_rhs=pads, conjugator=moved)


def block_half(omega: IndexSet, which: int) -> IndexSet:
    from .shape import Product

    return Product(Finite((which,)), omega)


def _complement_shape(omega, touched, salt):
    """Index set congruent to omega minus a finite touched set."""
    card = omega.cardinality
    if card != float("inf"):
        from .shape import all_indices

        labels = tuple(f"c{salt}.{i}" for i, idx in enumerate(all_indices(omega))
                       if idx not in touched)
        return Finite(labels)
    comp = None
    from .shape import Union

    for s in slots(omega):
        if s.kind == FIN:
            if s.embed() in touched:
                continue
            piece = Finite((f"c{salt}.{s.key}",))
        else:
            piece = TailN(f"c{salt}.{s.key}")
        comp = piece if comp is None else Union(comp, piece)
    return comp if comp is not None else Finite(())


def _trim_relabeling(omega, touched, pos, rest0, rest1):
    """Bijection {0,1} x omega -> ({0,1} x Xi) u ({0} x rest0 u {1} x rest1)
    sending touched base indices to the trimmed copy."""
    from .shape import Product, Union

    xi = Finite(tuple(f"w{i}" for i in range(len(touched))))
    target = Union(Product(Finite((0, 1)), xi),
                   Union(block_half(rest0, 0), block_half(rest1, 1)))
    source = block_space(2, omega)
    touched_set = set(touched)

    if omega.cardinality != float("inf"):
        from .shape import all_indices

        comp_list = [idx for idx in all_indices(omega) if idx not in touched_set]
        comp_pos = {idx: i for i, idx in enumerate(comp_list)}

        def fn(index):
            _, blk, sub = index
            j = blk[1]
            if sub in touched_set:
                return ("L", ("pair", ("at", j), ("at", pos[sub])))
            side = "L" if j == 0 else "R"
            return ("R", (side, ("pair", ("at", 0), ("at", comp_pos[sub]))))

        return Relabeling.from_fn(source, target, fn)

    # infinite base: compress each tail slot around its touched coordinates
    smap = slot_map(omega)
    if any(s.kind == FIN for s in slots(omega)):
        raise SupportError("trimming mixed infinite index sets is not supported")
    per_slot_touched = {}
    for idx in touched:
        k, c = locate(omega, idx)
        per_slot_touched.setdefault(k, set()).add(c)
    tail_rules = {}
    tgt_slots = {s.key: s for s in slots(target)}

    def comp_slot_key(j, skey):
        want = f"~c{j}.{skey}"
        hits = [k for k in tgt_slots if want in k and k.startswith("R.")]
        assert len(hits) == 1, (want, sorted(tgt_slots))
        return hits[0]

    for s in slots(source):
        # source slot key looks like (f<j>*<inner omega slot key>)
        j = int(s.key[2])
        inner = s.key[4:-1]
        cut = sorted(per_slot_touched.get(inner, ()))
        table = []
        kept = 0
        window = (max(cut) + 1) if cut else 0
        tkey = comp_slot_key(j, inner)
        for c in range(window):
            if c in cut:
                idx0 = smap[inner].embed(c)
                table.append((c, ("L", ("pair", ("at", j), ("at", pos[idx0])))))
            else:
                table.append((c, tgt_slots[tkey].embed(kept)))
                kept += 1
        branch = _mk_branch(window, kept, tkey)
        tail_rules[s.key] = _mk_rule(table, [branch])
    return Relabeling(source, target, tail_rules, {})


def _mk_branch(window, kept, dst):
    from .shape import Branch

    # coordinates >= window map affinely onto the tail past `kept`
    return Branch(1, 0, dst, 1, kept - window, start=window)


def _mk_rule(table, branches):
    from .shape import TailRule

    return TailRule(branches=tuple(branches), table=tuple(table))
