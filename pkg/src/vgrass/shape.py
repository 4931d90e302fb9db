"""Index sets and relabeling maps.

An index set is a finite tree built from finite label lists, N-tails and
Z-tails, closed under disjoint union and product (with at least one finite
factor).  A point of an index set is a nested tuple:

    ('at', p)        position p of a finite leaf, or coordinate p of a tail
    ('L', i) / ('R', i)   component of a union
    ('pair', i, j)   point of a product

Every index set decomposes into finitely many *slots*: finite slots (one
point each) and tail slots (an N- or Z-indexed family of points).  Matrices
address their structured parts by slot keys.

A relabeling is a total injective map given slot by slot: finite points map
through an explicit table, tail coordinates map through residue-class
branches  n = modulus*u + residue  ->  stride*u + offset  on a destination
slot, with an optional exception table for small coordinates.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

from .errors import ShapeError
from .numutil import ceil_div

OMEGA = math.inf


# ---------------------------------------------------------------------------
# index sets


@dataclass(frozen=True)
class IndexSet:
    def __post_init__(self):
        _check_tags(self)

    @property
    def cardinality(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Finite(IndexSet):
    labels: tuple = ()

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ShapeError("finite labels must be pairwise distinct")

    @property
    def cardinality(self):
        return len(self.labels)


@dataclass(frozen=True)
class TailN(IndexSet):
    tag: str

    @property
    def cardinality(self):
        return OMEGA


@dataclass(frozen=True)
class TailZ(IndexSet):
    tag: str

    @property
    def cardinality(self):
        return OMEGA


@dataclass(frozen=True)
class Union(IndexSet):
    left: IndexSet
    right: IndexSet

    @property
    def cardinality(self):
        return self.left.cardinality + self.right.cardinality


@dataclass(frozen=True)
class Product(IndexSet):
    left: IndexSet
    right: IndexSet

    def __post_init__(self):
        if self.left.cardinality == OMEGA and self.right.cardinality == OMEGA:
            raise ShapeError(
                "product of two infinite index sets is not representable; "
                "relabel one factor explicitly (split_tail / tail_embed) first"
            )
        super().__post_init__()

    @property
    def cardinality(self):
        a, b = self.left.cardinality, self.right.cardinality
        if a == 0 or b == 0:
            return 0
        return a * b


def tags(shape: IndexSet) -> set:
    if isinstance(shape, (TailN, TailZ)):
        return {shape.tag}
    if isinstance(shape, (Union, Product)):
        return tags(shape.left) | tags(shape.right)
    return set()


def _check_tags(shape):
    if isinstance(shape, (Union, Product)):
        both = tags(shape.left) & tags(shape.right)
        if both:
            raise ShapeError(f"duplicate tail tags in one index set: {sorted(both)}")


def empty_set() -> Finite:
    return Finite(())


def point(label="pt") -> Finite:
    return Finite((label,))


def freshen(shape: IndexSet, taken) -> IndexSet:
    """Rename tail tags of ``shape`` away from the set ``taken``."""
    taken = set(taken)

    def rename(s):
        if isinstance(s, (TailN, TailZ)):
            tag = s.tag
            while tag in taken:
                tag = tag + "'"
            taken.add(tag)
            return type(s)(tag)
        if isinstance(s, Union):
            return Union(rename(s.left), rename(s.right))
        if isinstance(s, Product):
            return Product(rename(s.left), rename(s.right))
        return s

    return rename(shape)


def union(a: IndexSet, b: IndexSet) -> IndexSet:
    """Disjoint union; the right operand's tags are freshened on collision."""
    if tags(a) & tags(b):
        b = freshen(b, tags(a))
    return Union(a, b)


def product(a: IndexSet, b: IndexSet) -> IndexSet:
    """Product index set; at least one factor must be finite."""
    if tags(a) & tags(b):
        b = freshen(b, tags(a))
    return Product(a, b)


# ---------------------------------------------------------------------------
# slots

FIN, N, Z = "fin", "N", "Z"


class Slot:
    __slots__ = ("key", "kind", "_embed")

    def __init__(self, key, kind, embed):
        self.key = key
        self.kind = kind
        self._embed = embed

    def embed(self, coord=None):
        """The index of this slot, at tail coordinate ``coord`` for tails."""
        return self._embed(coord)

    def __repr__(self):
        return f"Slot({self.key}, {self.kind})"


@functools.lru_cache(maxsize=None)
def slots(shape: IndexSet) -> tuple:
    if isinstance(shape, Finite):
        return tuple(
            Slot(f"f{p}", FIN, (lambda c, p=p: ("at", p)))
            for p in range(len(shape.labels))
        )
    if isinstance(shape, TailN):
        return (Slot(f"~{shape.tag}", N, lambda c: ("at", c)),)
    if isinstance(shape, TailZ):
        return (Slot(f"~{shape.tag}", Z, lambda c: ("at", c)),)
    if isinstance(shape, Union):
        out = []
        for side, sub in (("L", shape.left), ("R", shape.right)):
            for s in slots(sub):
                out.append(
                    Slot(f"{side}.{s.key}", s.kind,
                         (lambda c, side=side, s=s: (side, s.embed(c))))
                )
        return tuple(out)
    if isinstance(shape, Product):
        out = []
        for sl in slots(shape.left):
            for sr in slots(shape.right):
                key = f"({sl.key}*{sr.key})"
                if sl.kind == FIN and sr.kind == FIN:
                    out.append(
                        Slot(key, FIN,
                             (lambda c, sl=sl, sr=sr: ("pair", sl.embed(), sr.embed())))
                    )
                elif sl.kind == FIN:
                    out.append(
                        Slot(key, sr.kind,
                             (lambda c, sl=sl, sr=sr: ("pair", sl.embed(), sr.embed(c))))
                    )
                else:
                    out.append(
                        Slot(key, sl.kind,
                             (lambda c, sl=sl, sr=sr: ("pair", sl.embed(c), sr.embed())))
                    )
        return tuple(out)
    raise ShapeError(f"not an index set: {shape!r}")


@functools.lru_cache(maxsize=None)
def slot_map(shape: IndexSet) -> dict:
    return {s.key: s for s in slots(shape)}


def locate(shape: IndexSet, index) -> tuple:
    """Resolve an index to (slot_key, coord); coord is None for finite slots."""
    if isinstance(shape, Finite):
        op, p = index
        if op != "at" or not (0 <= p < len(shape.labels)):
            raise ShapeError(f"index {index!r} not in {shape!r}")
        return f"f{p}", None
    if isinstance(shape, TailN):
        op, n = index
        if op != "at" or n < 0:
            raise ShapeError(f"index {index!r} not in N-tail")
        return f"~{shape.tag}", n
    if isinstance(shape, TailZ):
        op, n = index
        if op != "at":
            raise ShapeError(f"index {index!r} not in Z-tail")
        return f"~{shape.tag}", n
    if isinstance(shape, Union):
        side, sub = index
        if side == "L":
            key, c = locate(shape.left, sub)
        elif side == "R":
            key, c = locate(shape.right, sub)
        else:
            raise ShapeError(f"index {index!r} not in a union")
        return f"{side}.{key}", c
    if isinstance(shape, Product):
        op, i, j = index
        if op != "pair":
            raise ShapeError(f"index {index!r} not in a product")
        kl, cl = locate(shape.left, i)
        kr, cr = locate(shape.right, j)
        if cl is not None and cr is not None:
            raise ShapeError("product of two tails cannot be located")
        coord = cl if cl is not None else cr
        return f"({kl}*{kr})", coord
    raise ShapeError(f"not an index set: {shape!r}")


def window(shape: IndexSet, n: int) -> list:
    """A finite, deterministic window of indices: full finite slots, tail
    coordinates 0..n-1 (N) or -n..n-1 (Z)."""
    out = []
    for s in slots(shape):
        if s.kind == FIN:
            out.append(s.embed())
        elif s.kind == N:
            out.extend(s.embed(c) for c in range(n))
        else:
            out.extend(s.embed(c) for c in range(-n, n))
    return out


def all_indices(shape: IndexSet) -> list:
    """Every index of a finite index set."""
    if shape.cardinality == OMEGA:
        raise ShapeError("index set is infinite")
    return window(shape, 0)


# ---------------------------------------------------------------------------
# relabelings


@dataclass(frozen=True)
class Branch:
    """Coordinates n = modulus*u + residue (u >= start when start is set)
    map to stride*u + offset on the destination slot."""

    modulus: int
    residue: int
    dst: str
    stride: int
    offset: int
    start: "int | None" = None

    def __post_init__(self):
        if self.modulus < 1 or self.stride < 1 or not (0 <= self.residue < self.modulus):
            raise ShapeError(f"invalid branch {self}")

    def param(self, n):
        """The branch parameter u for coordinate n, or None."""
        if (n - self.residue) % self.modulus:
            return None
        u = (n - self.residue) // self.modulus
        if self.start is not None and u < self.start:
            return None
        return u


@dataclass(frozen=True)
class TailRule:
    branches: tuple = ()
    table: tuple = ()  # ((coord, target_index), ...) checked before branches

    def lookup(self, n):
        for c, idx in self.table:
            if c == n:
                return ("table", idx)
        for b in self.branches:
            u = b.param(n)
            if u is not None:
                return ("branch", (b, u))
        return None


class Relabeling:
    """Total injective map between index sets, slot by slot."""

    def __init__(self, source, target, tail_rules, fin_map, check=True):
        self.source = source
        self.target = target
        self.tail_rules = dict(tail_rules)
        self.fin_map = dict(fin_map)
        if check:
            self._validate()

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def from_fn(source, target, fn, check=True):
        """Derive slot rules from an index function that is slotwise affine."""
        tail_rules, fin_map = {}, {}
        for s in slots(source):
            if s.kind == FIN:
                fin_map[s.key] = fn(s.embed())
                continue
            probe = (0, 1, 2) if s.kind == N else (0, 1, -1)
            imgs = [locate(target, fn(s.embed(c))) for c in probe]
            keys = {k for k, _ in imgs}
            if len(keys) != 1:
                raise ShapeError(f"map is not slotwise affine on {s.key}")
            key = keys.pop()
            c0, c1 = imgs[0][1], imgs[1][1]
            stride = c1 - c0
            if stride < 1:
                raise ShapeError(f"map is not increasing on {s.key}")
            expect = c0 + stride * probe[2]
            if imgs[2][1] != expect:
                raise ShapeError(f"map is not affine on {s.key}")
            tail_rules[s.key] = TailRule(branches=(Branch(1, 0, key, stride, c0),))
        return Relabeling(source, target, tail_rules, fin_map, check=check)

    @staticmethod
    def identity(shape):
        return Relabeling.from_fn(shape, shape, lambda i: i, check=False)

    # -- evaluation ----------------------------------------------------------

    def apply(self, index):
        key, coord = locate(self.source, index)
        if coord is None:
            try:
                return self.fin_map[key]
            except KeyError:
                raise ShapeError(f"no rule for finite slot {key}") from None
        rule = self.tail_rules.get(key)
        hit = rule.lookup(coord) if rule else None
        if hit is None:
            raise ShapeError(f"no rule for coordinate {coord} of slot {key}")
        what, data = hit
        if what == "table":
            return data
        b, u = data
        dst = slot_map(self.target)[b.dst]
        c = b.stride * u + b.offset
        if dst.kind == N and c < 0:
            raise ShapeError(f"branch {b} escapes the N-tail at coordinate {coord}")
        return dst.embed(c)

    def image_cells(self):
        """All finite image points (from fin_map and exception tables)."""
        cells = list(self.fin_map.values())
        for rule in self.tail_rules.values():
            cells.extend(idx for _, idx in rule.table)
        return cells

    # -- structure -----------------------------------------------------------

    def _bound(self):
        b = 4
        for rule in self.tail_rules.values():
            for br in rule.branches:
                b = max(b, br.modulus + abs(br.residue), br.stride + abs(br.offset))
                if br.start is not None:
                    b = max(b, abs(br.start) + br.modulus)
            for c, _ in rule.table:
                b = max(b, abs(c) + 1)
        return 3 * b + 8

    def _validate(self):
        smap, tmap = slot_map(self.source), slot_map(self.target)
        for key in self.tail_rules:
            if key not in smap or smap[key].kind == FIN:
                raise ShapeError(f"unknown tail slot {key}")
            dsts = {b.dst for b in self.tail_rules[key].branches}
            for d in dsts:
                if d not in tmap or tmap[d].kind == FIN:
                    raise ShapeError(f"unknown destination slot {d}")
        for key in self.fin_map:
            if key not in smap or smap[key].kind != FIN:
                raise ShapeError(f"unknown finite slot {key}")
            locate(self.target, self.fin_map[key])
        missing = {s.key for s in slots(self.source)} - set(self.tail_rules) - set(self.fin_map)
        if missing:
            raise ShapeError(f"slots without rules: {sorted(missing)}")
        # bounded injectivity check
        B = self._bound()
        seen = {}
        for idx in window(self.source, B):
            img = self.apply(idx)
            if img in seen:
                raise ShapeError(f"relabeling not injective at {idx} / {seen[img]}")
            seen[img] = idx

    def is_bijective(self):
        B = self._bound()
        imgs = {self.apply(i) for i in window(self.source, B)}
        tgt = set(window(self.target, max(2, (B - 8) // 3)))
        return tgt <= imgs

    def inverse(self):
        """Invert a bijective relabeling."""
        inv_tails = {s.key: {"branches": [], "table": []}
                     for s in slots(self.target) if s.kind != FIN}
        inv_fins = {}
        smap = slot_map(self.source)

        def register_point(target_index, source_index):
            key, coord = locate(self.target, target_index)
            if coord is None:
                inv_fins[key] = source_index
            else:
                inv_tails[key]["table"].append((coord, source_index))

        for key, idx in self.fin_map.items():
            register_point(idx, smap[key].embed())
        for key, rule in self.tail_rules.items():
            for c, idx in rule.table:
                register_point(idx, smap[key].embed(c))
            for b in rule.branches:
                # image coords c = stride*u + offset; reparameterize by
                # u' = u + shift so that 0 <= c - stride*u' < stride
                shift = b.offset // b.stride
                inv_tails[b.dst]["branches"].append(Branch(
                    modulus=b.stride,
                    residue=b.offset - b.stride * shift,
                    dst=key,
                    stride=b.modulus,
                    offset=b.residue - b.modulus * shift,
                    start=None if b.start is None else b.start + shift,
                ))
        rules = {
            k: TailRule(branches=tuple(v["branches"]), table=tuple(v["table"]))
            for k, v in inv_tails.items()
        }
        inv = Relabeling(self.target, self.source, rules, inv_fins)
        if not inv.is_bijective():
            raise ShapeError("relabeling is not bijective; cannot invert")
        return inv

    def matrix(self, ring):
        """The 0/1 structured matrix of the relabeling (target x source)."""
        from . import mat  # local import to avoid a cycle

        return mat.relabel_matrix(self, ring)

    def transport(self, A):
        """Conjugation r^ A r^T, exact."""
        r = self.matrix(A.ring)
        return r @ A @ r.transpose()


# ---------------------------------------------------------------------------
# named relabelings


def tail_embed(src: IndexSet, stride: int, offset: int = 0) -> Relabeling:
    """Embed a tail onto the arithmetic progression stride*n + offset."""
    if not isinstance(src, (TailN, TailZ)):
        raise ShapeError("tail_embed needs a bare tail")
    if stride < 1 or (isinstance(src, TailN) and offset < 0):
        raise ShapeError("invalid stride/offset")
    return Relabeling.from_fn(src, src, lambda i: ("at", stride * i[1] + offset))


def split_tail(src: TailN, k: int):
    """Residue-class splitting of an N-tail: returns the index set
    {0..k-1} x N and the bijection (i, n) -> k*n + i onto the tail."""
    if not isinstance(src, TailN) or k < 2:
        raise ShapeError("split_tail needs an N-tail and k >= 2")
    parts = Product(Finite(tuple(range(k))), TailN(src.tag + "/"))
    merge = Relabeling.from_fn(
        parts, src, lambda idx: ("at", k * idx[2][1] + idx[1][1]))
    return parts, merge


def union_swap(a: IndexSet, b: IndexSet) -> Relabeling:
    src, dst = Union(a, b), Union(b, a)

    def fn(i):
        side, sub = i
        return ("R" if side == "L" else "L", sub)

    return Relabeling.from_fn(src, dst, fn)


def union_assoc(a, b, c) -> Relabeling:
    """(a u b) u c  ->  a u (b u c)."""
    src = Union(Union(a, b), c)
    dst = Union(a, Union(b, c))

    def fn(i):
        side, sub = i
        if side == "L":
            s2, sub2 = sub
            return ("L", sub2) if s2 == "L" else ("R", ("L", sub2))
        return ("R", ("R", sub))

    return Relabeling.from_fn(src, dst, fn)


def union_unit_right(a: IndexSet) -> Relabeling:
    """a u {} -> a."""
    return Relabeling.from_fn(Union(a, empty_set()), a, lambda i: i[1])


def union_unit_left(a: IndexSet) -> Relabeling:
    return Relabeling.from_fn(Union(empty_set(), a), a, lambda i: i[1])


def prod_swap(a: IndexSet, b: IndexSet) -> Relabeling:
    return Relabeling.from_fn(
        Product(a, b), Product(b, a), lambda i: ("pair", i[2], i[1]))


def prod_assoc(a, b, c) -> Relabeling:
    """(a x b) x c -> a x (b x c)."""
    return Relabeling.from_fn(
        Product(Product(a, b), c), Product(a, Product(b, c)),
        lambda i: ("pair", i[1][1], ("pair", i[1][2], i[2])))


def prod_unit_right(a: IndexSet, label="pt") -> Relabeling:
    """a x {pt} -> a."""
    return Relabeling.from_fn(Product(a, point(label)), a, lambda i: i[1])


def prod_unit_left(a: IndexSet, label="pt") -> Relabeling:
    return Relabeling.from_fn(Product(point(label), a), a, lambda i: i[2])


def prod_distrib_right(a, b, c) -> Relabeling:
    """a x (b u c) -> (a x b) u (a x c)."""
    src = Product(a, Union(b, c))
    dst = Union(Product(a, b), Product(a, c))

    def fn(i):
        _, x, (side, y) = i
        return (side, ("pair", x, y))

    return Relabeling.from_fn(src, dst, fn)
