"""Seeded generators for randomized property suites.

Exact invertibility is arranged by construction: random idempotents are 0/1
diagonals conjugated by products of unit triangular matrices with small
integer entries, and random units near the identity are products of
elementary matrices 1 + c*e_ij whose inverses are written down directly.
"""

from __future__ import annotations

import random
from fractions import Fraction

from . import mat, shape
from .coeff import Ring, TrigPoly, trig_from_terms


def dense_mul(ring, a, b):
    n, m, k = len(a), len(b[0]), len(b)
    return [
        [
            _dot(ring, a[i], [b[t][j] for t in range(k)])
            for j in range(m)
        ]
        for i in range(n)
    ]


def _dot(ring, row, col):
    acc = ring.zero()
    for x, y in zip(row, col):
        acc = ring.add(acc, ring.mul(x, y))
    return acc


def dense_eye(ring, n):
    return [[ring.one() if i == j else ring.zero() for j in range(n)] for i in range(n)]


def dense_add(ring, a, b):
    return [[ring.add(x, y) for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def dense_neg(ring, a):
    return [[ring.neg(x) for x in row] for row in a]


class Rand:
    def __init__(self, seed: int):
        self.r = random.Random(seed)

    def spawn(self, salt: int) -> "Rand":
        return Rand((self.r.randrange(1 << 30) * 1000003 + salt) & 0x7FFFFFFF)

    # -- scalars -----------------------------------------------------------

    def small_int(self, lo=-2, hi=2) -> int:
        return self.r.randint(lo, hi)

    def small_nat(self, n: int) -> int:
        return self.r.randrange(n)

    def fraction(self) -> Fraction:
        return Fraction(self.r.randint(-4, 4), self.r.randint(1, 3))

    def nonzero_fraction(self) -> Fraction:
        while True:
            q = self.fraction()
            if q:
                return q

    def ring_element(self, ring: Ring):
        kind = ring.kind
        if kind == "Integers":
            return self.small_int(-6, 6)
        if kind == "Rationals":
            return self.fraction()
        if kind == "TrigQuot":
            terms = {(self.small_nat(3), self.small_nat(2)): self.fraction()
                     for _ in range(3)}
            return trig_from_terms(terms)
        if kind == "FloatTol":
            return self.r.uniform(-2.0, 2.0)
        if kind == "MatrixRing":
            return tuple(
                tuple(self.ring_element(ring.base) for _ in range(ring.size))
                for _ in range(ring.size)
            )
        raise AssertionError(kind)

    # -- dense exact blocks --------------------------------------------------

    def unit_triangular(self, ring, n, lower=True):
        """A unit triangular matrix and its exact inverse (dense lists)."""
        g = dense_eye(ring, n)
        for i in range(n):
            for j in range(n):
                if (i > j) if lower else (i < j):
                    g[i][j] = ring.from_int(self.small_int())
        # inverse via the nilpotent part: (1 + N)^-1 = sum (-N)^k
        nil = [[g[i][j] if i != j else ring.zero() for j in range(n)] for i in range(n)]
        inv = dense_eye(ring, n)
        term = dense_eye(ring, n)
        for _ in range(n - 1):
            term = dense_mul(ring, dense_neg(ring, nil), term)
            inv = dense_add(ring, inv, term)
        return g, inv

    def idempotent_dense(self, ring, n):
        """g * diag(0/1) * g^-1 with g a product of unit triangulars."""
        lo, lo_inv = self.unit_triangular(ring, n, lower=True)
        up, up_inv = self.unit_triangular(ring, n, lower=False)
        g = dense_mul(ring, lo, up)
        g_inv = dense_mul(ring, up_inv, lo_inv)
        d = [[ring.one() if i == j and self.r.random() < 0.5 else ring.zero()
              for j in range(n)] for i in range(n)]
        return dense_mul(ring, dense_mul(ring, g, d), g_inv)

    # -- structured matrices ---------------------------------------------

    def idempotent(self, space, ring) -> mat.StructuredMatrix:
        """Random exact idempotent on a finite index set."""
        idx = shape.all_indices(space)
        dense = self.idempotent_dense(ring, len(idx))
        return from_dense(space, space, ring, idx, idx, dense)

    def unit_near_identity(self, space, ring, width=4, steps=4):
        """A unit u with u - 1 finitely supported, with its exact inverse.

        Built from elementary matrices 1 + c*e_ij (i != j) and finitely
        supported diagonal rescalings, multiplied left to right.
        """
        idx = shape.window(space, width)
        u = mat.StructuredMatrix.identity(space, ring)
        u_inv = mat.StructuredMatrix.identity(space, ring)
        one = mat.StructuredMatrix.identity(space, ring)
        for _ in range(steps):
            if len(idx) < 2:
                # no off-diagonal positions: rescale the single diagonal cell
                c = self.nonzero_fraction()
                e = mat.StructuredMatrix.unit(
                    space, space, ring, idx[0], idx[0],
                    ring.from_rational(c - 1))
                e_inv = mat.StructuredMatrix.unit(
                    space, space, ring, idx[0], idx[0],
                    ring.from_rational(Fraction(1) / c - 1))
                u = u @ (one + e)
                u_inv = (one + e_inv) @ u_inv
                continue
            i, j = self.r.sample(range(len(idx)), 2)
            c = ring.from_rational(self.nonzero_fraction())
            e = mat.StructuredMatrix.unit(space, space, ring, idx[i], idx[j], c)
            u = u @ (one + e)
            u_inv = (one - e) @ u_inv
        return u, u_inv

    def pair(self, space, ring):
        """Random idempotent pair on a finite index set."""
        from . import grass

        b = self.idempotent(space, ring)
        a = self.idempotent(space, ring)
        return grass.IdempotentPair(space, b, a)

    def morphism_fixing(self, space, ring, a, extra_unit=True):
        """A morphism (psi, phi) whose base term phi = alpha + beta*a commutes
        with the idempotent a; psi = v*phi with v a unit near 1."""
        from . import grass

        alpha = self.nonzero_fraction()
        beta = self.fraction()
        while alpha + beta == 0:
            beta = self.fraction()
        a1 = ring.from_rational(alpha)
        one = mat.StructuredMatrix.identity(space, ring)
        phi = one.scale_left(a1) + a.scale_left(ring.from_rational(beta))
        y = -beta / (alpha * (alpha + beta))
        phi_inv = one.scale_left(ring.from_rational(1 / alpha)) + a.scale_left(
            ring.from_rational(y))
        if extra_unit:
            v, v_inv = self.unit_near_identity(space, ring)
        else:
            v = v_inv = one
        psi = v @ phi
        psi_inv = phi_inv @ v_inv
        return grass.Morphism(space, space, psi, phi, psi_inv, phi_inv)

    def morphism(self, space, ring, steps=4):
        """A morphism (psi, phi) with psi ~ phi, both units near 1."""
        from . import grass

        phi, phi_inv = self.unit_near_identity(space, ring, steps=steps)
        v, v_inv = self.unit_near_identity(space, ring, steps=steps)
        psi = v @ phi
        psi_inv = phi_inv @ v_inv
        return grass.Morphism(space, space, psi, phi, psi_inv, phi_inv)


def from_dense(rows, cols, ring, row_idx, col_idx, dense) -> mat.StructuredMatrix:
    entries = {}
    for i, ri in enumerate(row_idx):
        for j, cj in enumerate(col_idx):
            v = dense[i][j]
            if v != ring.zero():
                entries[(ri, cj)] = v
    return mat.StructuredMatrix.from_fin(rows, cols, ring, entries)
