"""Small integer helpers for affine index arithmetic."""

from __future__ import annotations

import math


def ceil_div(a: int, b: int) -> int:
    """Ceiling of a/b for b > 0."""
    return -((-a) // b)


def ext_gcd(a: int, b: int):
    """Return (g, x, y) with a*x + b*y = g = gcd(a, b)."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_x, x = x, old_x - q * x
        old_y, y = y, old_y - q * y
    return old_r, old_x, old_y


def match_affine(s1: int, o1: int, s2: int, o2: int):
    """Solve s1*n + o1 == s2*m + o2 over the integers.

    Returns None when no solution exists, otherwise (n0, m0, dn, dm) such
    that the full solution set is n = n0 + t*dn, m = m0 + t*dm for t in Z,
    with dn, dm > 0.
    """
    g = math.gcd(s1, s2)
    rhs = o2 - o1
    if rhs % g:
        return None
    _, x, _ = ext_gcd(s1, s2)
    # s1*x === g (mod s2)
    t = (rhs // g) * x
    dn = s2 // g
    n0 = t % dn
    m0 = (s1 * n0 + o1 - o2) // s2
    return n0, m0, dn, s1 // g
