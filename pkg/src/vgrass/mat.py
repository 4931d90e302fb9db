"""Structured matrices over index-set pairs.

A matrix is stored in three layers, summed entrywise:

    scalar   a ring element lambda, standing for lambda * identity
             (square matrices only);
    fams     per (row-slot, col-slot) bucket, *affine diagonal families*:
             a family (rs, ro, cs, co, lo, hi) with coefficient v holds the
             cells  v * e[rs*n + ro, cs*n + co]  for lo <= n < hi
             (None = unbounded).  Stride-1 families are the constant
             diagonals of a banded Toeplitz symbol; higher strides encode
             residue-class embeddings and periodic diagonals;
    fin      a finitely supported overlay of explicit entries.

The representation is closed under addition, multiplication and transpose,
all computed exactly.  Equality is the zero test of the difference, which is
decidable: the infinite content of each straight line of cells is analyzed
by residue class and the finitely many leftover cells are compared
entrywise (within tolerance for the float ring).
"""

from __future__ import annotations

import math

from .coeff import Ring
from .errors import RingError, ShapeError, SupportError
from .numutil import ceil_div, match_affine
from .shape import FIN, N, Z, IndexSet, Relabeling, locate, slot_map, slots

#: Families spanning at most this many cells are stored as plain entries.
MATERIALIZE_MAX = 8

#: Hard cap on cells materialized during zero tests.
CELL_CAP = 200_000


def _canon_fam(rkind, ckind, rs, ro, cs, co, lo, hi):
    """Canonical parameterization of a family; None when empty."""
    if rkind == N:
        want = ceil_div(-ro, rs)
        lo = want if lo is None else max(lo, want)
    if ckind == N:
        want = ceil_div(-co, cs)
        lo = want if lo is None else max(lo, want)
    if lo is not None:
        if hi is not None and hi <= lo:
            return None
        ro, co = ro + rs * lo, co + cs * lo
        hi = None if hi is None else hi - lo
        lo = 0
    elif hi is not None:
        ro, co = ro + rs * hi, co + cs * hi
        hi = 0
    else:
        d = -(co // cs)
        ro, co = ro + rs * -d, co + cs * -d
    return (rs, ro, cs, co, lo, hi)


def _fam_cells(key):
    """Iterate (n, row_coord, col_coord) of a finite family."""
    rs, ro, cs, co, lo, hi = key
    for n in range(lo, hi):
        yield n, rs * n + ro, cs * n + co


def _fam_len(key):
    rs, ro, cs, co, lo, hi = key
    if lo is None or hi is None:
        return None
    return max(0, hi - lo)


class ColumnFiniteOperator:
    """Operator with finitely supported columns, given by a column rule.

    Unlike a structured matrix its rows may have unbounded support, so only
    column-driven operations are available: application to finitely
    supported matrices, the sandwich C * K * C^T, composition, and Gram
    entries (C^T C)[i, j] as finite sums.
    """

    def __init__(self, rows, cols, ring, column_rule):
        self.rows = rows
        self.cols = cols
        self.ring = ring
        self._rule = column_rule
        self._cache = {}

    def column(self, j):
        if j not in self._cache:
            col = {i: v for i, v in self._rule(j).items()
                   if v != self.ring.zero()}
            self._cache[j] = col
        return self._cache[j]

    def entry(self, i, j):
        return self.column(j).get(i, self.ring.zero())

    def gram(self, j1, j2):
        """(C^T C)[j1, j2] as a finite sum over the two columns."""
        ring = self.ring
        c1, c2 = self.column(j1), self.column(j2)
        small, other = (c1, c2) if len(c1) <= len(c2) else (c2, c1)
        acc = ring.zero()
        for i, v in small.items():
            if i in other:
                a, b = c1[i], c2[i]
                acc = ring.add(acc, ring.mul(ring.transpose(a), b))
        return acc

    def compose(self, other):
        """self o other, again column finite."""
        if other.rows != self.cols:
            raise ShapeError("column-finite composition shape mismatch")
        ring = self.ring

        def rule(j):
            out = {}
            for k, v in other.column(j).items():
                for i, w in self.column(k).items():
                    out[i] = ring.add(out.get(i, ring.zero()), ring.mul(w, v))
            return out

        return ColumnFiniteOperator(self.rows, other.cols, ring, rule)

    def apply(self, K: "StructuredMatrix") -> "StructuredMatrix":
        """C * K for finitely supported K, exact."""
        if K.rows != self.cols:
            raise ShapeError("apply: shape mismatch")
        ring = self.ring
        out = {}
        for (i, j), v in K.K_entries().items():
            for r, w in self.column(i).items():
                key = (r, j)
                out[key] = ring.add(out.get(key, ring.zero()), ring.mul(w, v))
        return StructuredMatrix.from_fin(self.rows, K.cols, ring, out)

    def sandwich(self, K: "StructuredMatrix") -> "StructuredMatrix":
        """C * K * C^T for finitely supported K, exact."""
        if K.rows != self.cols or K.cols != self.cols:
            raise ShapeError("sandwich: shape mismatch")
        ring = self.ring
        out = {}
        for (i, j), v in K.K_entries().items():
            for r, w in self.column(i).items():
                wv = ring.mul(w, v)
                for c, u in self.column(j).items():
                    key = (r, c)
                    out[key] = ring.add(out.get(key, ring.zero()),
                                        ring.mul(wv, ring.transpose(u)))
        return StructuredMatrix.from_fin(self.rows, self.rows, ring, out)


class StructuredMatrix:
    __slots__ = ("rows", "cols", "ring", "scalar", "fams", "fin")

    def __init__(self, rows, cols, ring, scalar=None, fams=None, fin=None):
        self.rows = rows
        self.cols = cols
        self.ring = ring
        self.scalar = ring.zero() if scalar is None else scalar
        self.fams = fams or {}
        self.fin = fin or {}
        if not ring.is_zero(self.scalar) and rows != cols:
            raise ShapeError("scalar part requires a square shape")

    # -- constructors --------------------------------------------------------

    @staticmethod
    def zero(rows, cols, ring):
        return StructuredMatrix(rows, cols, ring)

    @staticmethod
    def identity(shape, ring):
        return StructuredMatrix(shape, shape, ring, scalar=ring.one())

    @staticmethod
    def scalar_matrix(shape, ring, value):
        return StructuredMatrix(shape, shape, ring, scalar=value)

    @staticmethod
    def from_fin(rows, cols, ring, entries):
        z = ring.zero()
        fin = {}
        for (i, j), v in entries.items():
            if v == z:
                continue
            locate(rows, i), locate(cols, j)
            fin[(i, j)] = v
        return StructuredMatrix(rows, cols, ring, fin=fin)

    @staticmethod
    def unit(rows, cols, ring, i, j, value=None):
        v = ring.one() if value is None else value
        return StructuredMatrix.from_fin(rows, cols, ring, {(i, j): v})

    @staticmethod
    def symbol(rows, cols, ring, rkey, ckey, diagonals):
        """Banded Toeplitz part: {offset: coeff} along a tail pair, clipped
        to valid coordinates (boundary-exact on N-tails)."""
        m = StructuredMatrix(rows, cols, ring)
        for off, v in diagonals.items():
            m = m + StructuredMatrix.family(rows, cols, ring, rkey, ckey,
                                            (1, off, 1, 0, None, None), v)
        return m

    @staticmethod
    def family(rows, cols, ring, rkey, ckey, key, coeff):
        rk = slot_map(rows)[rkey].kind
        ck = slot_map(cols)[ckey].kind
        if rk == FIN or ck == FIN:
            raise ShapeError("families connect tail slots")
        key = _canon_fam(rk, ck, *key)
        m = StructuredMatrix(rows, cols, ring)
        if key is None or coeff == ring.zero():
            return m
        if _fam_len(key) is not None and _fam_len(key) <= MATERIALIZE_MAX:
            rs_, cs_ = slot_map(rows)[rkey], slot_map(cols)[ckey]
            fin = {}
            for _, r, c in _fam_cells(key):
                fin[(rs_.embed(r), cs_.embed(c))] = coeff
            return StructuredMatrix(rows, cols, ring, fin=fin)
        m.fams = {(rkey, ckey): {key: coeff}}
        return m

    # -- bookkeeping -----------------------------------------------------

    def _copy_parts(self):
        fams = {b: dict(d) for b, d in self.fams.items()}
        return fams, dict(self.fin)

    def _same_frame(self, other):
        if self.ring != other.ring:
            raise RingError("mixed rings")
        if self.rows != other.rows or self.cols != other.cols:
            raise ShapeError("shape mismatch")

    def _add_fam(self, fams, bucket, key, coeff):
        ring = self.ring
        d = fams.setdefault(bucket, {})
        cur = d.get(key)
        new = coeff if cur is None else ring.add(cur, coeff)
        if new == ring.zero():
            d.pop(key, None)
            if not d:
                fams.pop(bucket, None)
        else:
            d[key] = new

    def _add_fin(self, fin, i, j, v):
        ring = self.ring
        cur = fin.get((i, j))
        new = v if cur is None else ring.add(cur, v)
        if new == ring.zero():
            fin.pop((i, j), None)
        else:
            fin[(i, j)] = new

    def _materialize_short(self, fams, fin):
        """Move finite families of length <= MATERIALIZE_MAX into fin."""
        rsm, csm = slot_map(self.rows), slot_map(self.cols)
        for bucket in list(fams):
            rk, ck = bucket
            for key in list(fams[bucket]):
                ln = _fam_len(key)
                if ln is not None and ln <= MATERIALIZE_MAX:
                    v = fams[bucket].pop(key)
                    for _, r, c in _fam_cells(key):
                        self._add_fin(fin, rsm[rk].embed(r), csm[ck].embed(c), v)
            if not fams[bucket]:
                fams.pop(bucket)

    # -- linear structure --------------------------------------------------

    def __add__(self, other):
        self._same_frame(other)
        ring = self.ring
        fams, fin = self._copy_parts()
        for bucket, d in other.fams.items():
            for key, v in d.items():
                self._add_fam(fams, bucket, key, v)
        for (i, j), v in other.fin.items():
            self._add_fin(fin, i, j, v)
        return StructuredMatrix(self.rows, self.cols, ring,
                                ring.add(self.scalar, other.scalar), fams, fin)

    def __neg__(self):
        ring = self.ring
        fams = {b: {k: ring.neg(v) for k, v in d.items()} for b, d in self.fams.items()}
        fin = {ij: ring.neg(v) for ij, v in self.fin.items()}
        return StructuredMatrix(self.rows, self.cols, ring, ring.neg(self.scalar),
                                fams, fin)

    def __sub__(self, other):
        return self + (-other)

    def scale_left(self, value):
        ring = self.ring
        if value == ring.zero():
            return StructuredMatrix.zero(self.rows, self.cols, ring)
        fams = {b: {k: ring.mul(value, v) for k, v in d.items()}
                for b, d in self.fams.items()}
        fams = {b: {k: v for k, v in d.items() if v != ring.zero()} for b, d in fams.items()}
        fin = {ij: ring.mul(value, v) for ij, v in self.fin.items()}
        fin = {ij: v for ij, v in fin.items() if v != ring.zero()}
        return StructuredMatrix(self.rows, self.cols, ring,
                                ring.mul(value, self.scalar), fams, fin)

    def scale_right(self, value):
        ring = self.ring
        if value == ring.zero():
            return StructuredMatrix.zero(self.rows, self.cols, ring)
        fams = {b: {k: ring.mul(v, value) for k, v in d.items()}
                for b, d in self.fams.items()}
        fams = {b: {k: v for k, v in d.items() if v != ring.zero()} for b, d in fams.items()}
        fin = {ij: ring.mul(v, value) for ij, v in self.fin.items()}
        fin = {ij: v for ij, v in fin.items() if v != ring.zero()}
        return StructuredMatrix(self.rows, self.cols, ring,
                                ring.mul(self.scalar, value), fams, fin)

    # -- multiplication ------------------------------------------------------

    def __matmul__(self, other):
        if self.ring != other.ring:
            raise RingError("mixed rings")
        if self.cols != other.rows:
            raise ShapeError("matmul: inner shapes differ")
        ring = self.ring
        out = StructuredMatrix(self.rows, other.cols, ring)
        fams, fin = {}, {}

        a_scal, b_scal = self.scalar, other.scalar
        scalar = ring.zero()
        if not ring.is_zero(a_scal) and not ring.is_zero(b_scal):
            scalar = ring.mul(a_scal, b_scal)
        if a_scal != ring.zero():
            part = other.scale_left(a_scal)
            for bucket, d in part.fams.items():
                for key, v in d.items():
                    self._add_fam(fams, bucket, key, v)
            for (i, j), v in part.fin.items():
                self._add_fin(fin, i, j, v)
        if b_scal != ring.zero():
            part = self.scale_right(b_scal)
            for bucket, d in part.fams.items():
                for key, v in d.items():
                    self._add_fam(fams, bucket, key, v)
            for (i, j), v in part.fin.items():
                self._add_fin(fin, i, j, v)

        mid_rows = slot_map(other.rows)
        out_rows, out_cols = slot_map(self.rows), slot_map(other.cols)

        # fam x fam
        for (rkA, ckA), dA in self.fams.items():
            for (rkB, ckB), dB in other.fams.items():
                if ckA != rkB:
                    continue
                mkind = mid_rows[rkB].kind
                rkind, ckind = out_rows[rkA].kind, out_cols[ckB].kind
                for kA, vA in dA.items():
                    rsA, roA, csA, coA, loA, hiA = kA
                    for kB, vB in dB.items():
                        rsB, roB, csB, coB, loB, hiB = kB
                        sol = match_affine(csA, coA, rsB, roB)
                        if sol is None:
                            continue
                        n0, m0, dn, dm = sol
                        tlo, thi = None, None
                        for lo_x, x0, dx in ((loA, n0, dn), (loB, m0, dm)):
                            if lo_x is not None:
                                b = ceil_div(lo_x - x0, dx)
                                tlo = b if tlo is None else max(tlo, b)
                        for hi_x, x0, dx in ((hiA, n0, dn), (hiB, m0, dm)):
                            if hi_x is not None:
                                b = ceil_div(hi_x - x0, dx)
                                thi = b if thi is None else min(thi, b)
                        key = _canon_fam(
                            rkind, ckind,
                            rsA * dn, rsA * n0 + roA,
                            csB * dm, csB * m0 + coB,
                            tlo, thi)
                        if key is None:
                            continue
                        self._add_fam(fams, (rkA, ckB), key, ring.mul(vA, vB))

        # index fin parts by slots
        def fin_by_row(m):
            by = {}
            for (i, j), v in m.fin.items():
                k, c = locate(m.rows, i)
                by.setdefault(k, []).append((c, i, j, v))
            return by

        def fin_by_col(m):
            by = {}
            for (i, j), v in m.fin.items():
                k, c = locate(m.cols, j)
                by.setdefault(k, []).append((c, i, j, v))
            return by

        b_fin_rows = fin_by_row(other)
        a_fin_cols = fin_by_col(self)

        # fam x fin
        for (rkA, ckA), dA in self.fams.items():
            hits = b_fin_rows.get(ckA)
            if not hits:
                continue
            for kA, vA in dA.items():
                rsA, roA, csA, coA, loA, hiA = kA
                for c, _, j, v in hits:
                    if c is None or (c - coA) % csA:
                        continue
                    n = (c - coA) // csA
                    if loA is not None and n < loA:
                        continue
                    if hiA is not None and n >= hiA:
                        continue
                    i_out = out_rows[rkA].embed(rsA * n + roA)
                    self._add_fin(fin, i_out, j, ring.mul(vA, v))

        # fin x fam
        for (rkB, ckB), dB in other.fams.items():
            hits = a_fin_cols.get(rkB)
            if not hits:
                continue
            for kB, vB in dB.items():
                rsB, roB, csB, coB, loB, hiB = kB
                for c, i, _, v in hits:
                    if c is None or (c - roB) % rsB:
                        continue
                    m = (c - roB) // rsB
                    if loB is not None and m < loB:
                        continue
                    if hiB is not None and m >= hiB:
                        continue
                    j_out = out_cols[ckB].embed(csB * m + coB)
                    self._add_fin(fin, i, j_out, ring.mul(v, vB))

        # fin x fin
        b_rows_direct = {}
        for (i, j), v in other.fin.items():
            b_rows_direct.setdefault(i, []).append((j, v))
        for (i, j), v in self.fin.items():
            for j2, w in b_rows_direct.get(j, ()):
                self._add_fin(fin, i, j2, ring.mul(v, w))

        out.scalar = scalar
        out.fams = fams
        out.fin = fin
        out._materialize_short(fams, fin)
        return out

    def transpose(self):
        ring = self.ring
        rsm, csm = slot_map(self.rows), slot_map(self.cols)
        fams = {}
        for (rk, ck), d in self.fams.items():
            for (rs, ro, cs, co, lo, hi), v in d.items():
                key = _canon_fam(csm[ck].kind, rsm[rk].kind, cs, co, rs, ro, lo, hi)
                tgt = fams.setdefault((ck, rk), {})
                tv = ring.transpose(v)
                tgt[key] = ring.add(tgt[key], tv) if key in tgt else tv
        fin = {(j, i): ring.transpose(v) for (i, j), v in self.fin.items()}
        return StructuredMatrix(self.cols, self.rows, ring,
                                ring.transpose(self.scalar), fams, fin)

    # -- entry access / analysis ---------------------------------------------

    def entry(self, i, j):
        ring = self.ring
        rk, rc = locate(self.rows, i)
        ck, cc = locate(self.cols, j)
        acc = ring.zero()
        if i == j and self.rows == self.cols and not ring.is_zero(self.scalar):
            # identical index only counts when both sides are the same slot
            acc = ring.add(acc, self.scalar)
        if rc is not None and cc is not None:
            for (rs, ro, cs, co, lo, hi), v in self.fams.get((rk, ck), {}).items():
                if (rc - ro) % rs:
                    continue
                n = (rc - ro) // rs
                if cs * n + co != cc:
                    continue
                if lo is not None and n < lo:
                    continue
                if hi is not None and n >= hi:
                    continue
                acc = ring.add(acc, v)
        v = self.fin.get((i, j))
        if v is not None:
            acc = ring.add(acc, v)
        return acc

    def _flatten(self):
        """Fold the scalar layer into families and entries."""
        fams, fin = self._copy_parts()
        if self.scalar != self.ring.zero():
            for s in slots(self.rows):
                if s.kind == FIN:
                    self._add_fin(fin, s.embed(), s.embed(), self.scalar)
                else:
                    key = _canon_fam(s.kind, s.kind, 1, 0, 1, 0, None, None)
                    self._add_fam(fams, (s.key, s.key), key, self.scalar)
        return fams, fin

    def _line_analysis(self):
        """Split the family content into asymptotic classes and leftover cells.

        Cells of one bucket lying on a common straight line interact; their
        union is analyzed as integer progressions in the line coordinate t.
        Returns (infinite_parts, cells): ``infinite_parts`` lists the nonzero
        asymptotic class sums (any entry means infinite support), ``cells``
        holds the finitely many remaining literal entries merged with fin.
        """
        ring = self.ring
        fams, fin = self._flatten()
        rsm, csm = slot_map(self.rows), slot_map(self.cols)
        infinite = []
        cells = dict(fin)

        for (rk, ck), d in fams.items():
            groups = {}
            for key, v in d.items():
                rs, ro, cs, co, lo, hi = key
                g = math.gcd(rs, cs)
                p, q = rs // g, cs // g
                r0 = ro % p
                t0 = (ro - r0) // p  # cell n sits at line coordinate t0 + g*n
                c_anchor = co - q * t0
                line = (p, q, r0, c_anchor)
                first = None if lo is None else t0 + g * lo
                last = None if hi is None else t0 + g * hi  # exclusive
                groups.setdefault(line, []).append((first, last, g, t0 % g, v))

            for (p, q, r0, c_anchor), progs in groups.items():
                L = math.lcm(*[g for _, _, g, _, _ in progs])
                plus, minus, bounds = {}, {}, []
                for first, last, g, rho, v in progs:
                    for t in range(rho, L, g):
                        if last is None:
                            plus[t] = ring.add(plus.get(t, ring.zero()), v)
                        if first is None:
                            minus[t] = ring.add(minus.get(t, ring.zero()), v)
                    if first is not None:
                        bounds.append(first)
                    if last is not None:
                        bounds.append(last)
                for v in list(plus.values()) + list(minus.values()):
                    if not ring.is_zero(v):
                        infinite.append(v)
                if not bounds:
                    continue
                t_min, t_max = min(bounds), max(bounds)
                if t_max - t_min > CELL_CAP:
                    raise SupportError("boundary region too large to analyze")
                rslot, cslot = rsm[rk], csm[ck]
                for t in range(t_min, t_max):
                    val = ring.zero()
                    for first, last, g, rho, v in progs:
                        if t % g != rho:
                            continue
                        if first is not None and t < first:
                            continue
                        if last is not None and t >= last:
                            continue
                        val = ring.add(val, v)
                    if val == ring.zero():
                        continue
                    i = rslot.embed(r0 + p * t)
                    j = cslot.embed(c_anchor + q * t)
                    cur = cells.get((i, j))
                    cells[(i, j)] = val if cur is None else ring.add(cur, val)
        return infinite, cells

    def is_K(self):
        """True when the matrix is finitely supported (zero scalar and no
        surviving infinite diagonal content)."""
        try:
            infinite, _ = self._line_analysis()
        except SupportError:
            return False
        return not infinite

    def K_entries(self):
        """The entries of a finitely supported matrix as a dict."""
        infinite, cells = self._line_analysis()
        if infinite:
            raise SupportError("matrix is not finitely supported")
        return {ij: v for ij, v in cells.items() if not self.ring.is_zero(v)}

    def is_zero_matrix(self):
        infinite, cells = self._line_analysis()
        if infinite:
            return False
        return all(self.ring.is_zero(v) for v in cells.values())

    def equals(self, other):
        self._same_frame(other)
        return (self - other).is_zero_matrix()

    def approx_equiv(self, other):
        """The relation "equal modulo a finitely supported matrix"."""
        self._same_frame(other)
        return (self - other).is_K()

    def finite_trace(self):
        ring = self.ring
        acc = ring.zero()
        for (i, j), v in self.K_entries().items():
            if i == j:
                acc = ring.add(acc, v)
        return acc

    def is_idempotent(self):
        return (self @ self).equals(self)

    def support_radius(self):
        """Max |coordinate| appearing in the finite support (0 if empty)."""
        r = 0
        for (i, j) in self.K_entries():
            for idx in (i, j):
                _, c = locate(self.rows if idx is i else self.cols, idx)
                if c is not None:
                    r = max(r, abs(c))
        return r

    # -- dense windows ---------------------------------------------------

    def to_dense(self, row_indices, col_indices):
        return [[self.entry(i, j) for j in col_indices] for i in row_indices]

    def reach(self):
        """Bound B such that no family maps window coordinates beyond
        stride*B + offset; used to size oracle windows."""
        b = 1
        for d in self.fams.values():
            for (rs, ro, cs, co, lo, hi) in d:
                b = max(b, rs + abs(ro), cs + abs(co))
        return b

    def __repr__(self):
        nf = sum(len(d) for d in self.fams.values())
        return (f"StructuredMatrix({len(self.fin)} entries, {nf} families, "
                f"scalar={'0' if self.ring.is_zero(self.scalar) else 'nonzero'})")


# ---------------------------------------------------------------------------
# free functions mirroring the matrix algebra


def add(a, b):
    return a + b


def mul(a, b):
    return a @ b


def transpose(a):
    return a.transpose()


def approx_equiv(a, b):
    return a.approx_equiv(b)


def finite_trace(a):
    return a.finite_trace()


def apply_column_finite(c: ColumnFiniteOperator, k: StructuredMatrix):
    return c.apply(k)


def sandwich(c: ColumnFiniteOperator, k: StructuredMatrix):
    return c.sandwich(k)


# ---------------------------------------------------------------------------
# Kronecker product


def _rename_map(shape_tags, taken):
    out = {}
    used = set(taken)
    for tag in sorted(shape_tags):
        new = tag
        while new in used:
            new += "'"
        out[tag] = new
        used.add(new)
    return out


def _apply_rename(shape, mapping):
    from . import shape as sh

    if isinstance(shape, (sh.TailN, sh.TailZ)):
        return type(shape)(mapping.get(shape.tag, shape.tag))
    if isinstance(shape, sh.Union):
        return sh.Union(_apply_rename(shape.left, mapping),
                        _apply_rename(shape.right, mapping))
    if isinstance(shape, sh.Product):
        return sh.Product(_apply_rename(shape.left, mapping),
                          _apply_rename(shape.right, mapping))
    return shape


def _pkey(lk, rk):
    return f"({lk}*{rk})"


def kronecker(a: StructuredMatrix, b: StructuredMatrix) -> StructuredMatrix:
    """Entrywise (a (x) b)[(i,p),(j,q)] = a[i,j] * b[p,q]; the scalar ring
    must be commutative."""
    from . import shape as sh

    if a.ring != b.ring:
        raise RingError("mixed rings")
    ring = a.ring
    if not ring.commutative:
        raise RingError(
            "kronecker over a noncommutative ring needs a declared "
            "commutative base ring; none is available here")

    taken = sh.tags(a.rows) | sh.tags(a.cols)
    ren = _rename_map(sh.tags(b.rows) | sh.tags(b.cols), taken)
    b_rows = _apply_rename(b.rows, ren)
    b_cols = _apply_rename(b.cols, ren)
    rows = sh.Product(a.rows, b_rows)
    cols = sh.Product(a.cols, b_cols)

    out = StructuredMatrix(rows, cols, ring)
    fams, fin = {}, {}

    a_sc, b_sc = a.scalar, b.scalar
    if not ring.is_zero(a_sc) and not ring.is_zero(b_sc):
        out.scalar = ring.mul(a_sc, b_sc)

    def a_components():
        """(kind, data) parts of a's non-scalar content."""
        for (rk, ck), d in a.fams.items():
            for key, v in d.items():
                yield "fam", (rk, ck, key, v)
        for (i, j), v in a.fin.items():
            yield "fin", (i, j, v)

    # renaming tags changes slot keys (indices are positional and unaffected)
    b_row_key = {old.key: new.key for old, new in zip(slots(b.rows), slots(b_rows))}
    b_col_key = {old.key: new.key for old, new in zip(slots(b.cols), slots(b_cols))}

    def b_components():
        for (rk, ck), d in b.fams.items():
            for key, v in d.items():
                yield "fam", (b_row_key[rk], b_col_key[ck], key, v)
        for (i, j), v in b.fin.items():
            yield "fin", (i, j, v)

    def a_identity_components():
        for s in slots(a.rows):
            if s.kind == FIN:
                yield "fin", (s.embed(), s.embed(), a_sc)
            else:
                key = _canon_fam(s.kind, s.kind, 1, 0, 1, 0, None, None)
                yield "fam", (s.key, s.key, key, a_sc)

    def b_identity_components():
        for s in slots(b_rows):
            if s.kind == FIN:
                yield "fin", (s.embed(), s.embed(), b_sc)
            else:
                key = _canon_fam(s.kind, s.kind, 1, 0, 1, 0, None, None)
                yield "fam", (s.key, s.key, key, b_sc)

    def emit(akind, adata, bkind, bdata):
        if akind == "fam" and bkind == "fam":
            raise ShapeError("tensor of two infinite tails is not representable")
        if akind == "fin" and bkind == "fin":
            i, j, v = adata
            p, q, w = bdata
            out._add_fin(fin, ("pair", i, p), ("pair", j, q), ring.mul(v, w))
            return
        if akind == "fin":
            i, j, v = adata
            rk, ck, key, w = bdata
            ik, _ = locate(a.rows, i)
            jk, _ = locate(a.cols, j)
            bucket = (_pkey(ik, rk), _pkey(jk, ck))
            out._add_fam(fams, bucket, key, ring.mul(v, w))
            return
        rk, ck, key, v = adata
        p, q, w = bdata
        pk, _ = locate(b_rows, p)
        qk, _ = locate(b_cols, q)
        bucket = (_pkey(rk, pk), _pkey(ck, qk))
        out._add_fam(fams, bucket, key, ring.mul(v, w))

    b_parts = list(b_components())
    for akind, adata in a_components():
        for bkind, bdata in b_parts:
            emit(akind, adata, bkind, bdata)
    if not ring.is_zero(a_sc):
        for akind, adata in a_identity_components():
            for bkind, bdata in b_parts:
                emit(akind, adata, bkind, bdata)
    if not ring.is_zero(b_sc):
        for bkind, bdata in b_identity_components():
            for akind, adata in a_components():
                emit(akind, adata, bkind, bdata)

    out.fams = fams
    out.fin = fin
    out._materialize_short(fams, fin)
    return out


# ---------------------------------------------------------------------------
# relabeling matrices


def relabel_matrix(r: Relabeling, ring: Ring) -> StructuredMatrix:
    """The 0/1 matrix of a relabeling, of shape target x source."""
    out = StructuredMatrix(r.target, r.source, ring)
    fams, fin = {}, {}
    one = ring.one()
    smap = slot_map(r.source)
    tsm = slot_map(r.target)
    for key, idx in r.fin_map.items():
        out._add_fin(fin, idx, smap[key].embed(), one)
    for key, rule in r.tail_rules.items():
        skind = smap[key].kind
        for c, idx in rule.table:
            out._add_fin(fin, idx, smap[key].embed(c), one)
        for b in rule.branches:
            fam = _canon_fam(tsm[b.dst].kind, skind,
                             b.stride, b.offset, b.modulus, b.residue,
                             b.start, None)
            if fam is None:
                continue
            out._add_fam(fams, (b.dst, key), fam, one)
    out.fams = fams
    out.fin = fin
    out._materialize_short(fams, fin)
    return out
