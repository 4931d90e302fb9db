"""Numeric functional calculus over the tolerance float ring.

Transport integrates the commutator flow X' = (P' P - P P') X with a
classical fourth-order one-step scheme at a fixed step, so results are
reproducible.  The idem operator turns a near-idempotent into an exact one,
either by the cubic Newton iteration p <- 3p^2 - 2p^3 or by formal residue
extraction from the geometric resolvent series around a reference
idempotent; the two implementations cross-check each other.  Connectors
1 - P - Q (plain, corrected, and the sign form) conjugate close idempotents
onto each other, and the finite reduction truncates a tail perturbation and
repairs it back to an idempotent with a certified connector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, SupportError
from .grass import Morphism, bar
from .mat import StructuredMatrix
from .shape import all_indices, window


# ---------------------------------------------------------------------------
# dense views


def norm_window(shape, margin=4, radius=0):
    if shape.cardinality != float("inf"):
        return all_indices(shape)
    return window(shape, radius + margin)


def to_array(m: StructuredMatrix, idx=None) -> np.ndarray:
    if idx is None:
        idx = norm_window(m.rows, radius=_radius(m))
    return np.array([[float(m.entry(i, j)) for j in idx] for i in idx])


def _radius(m):
    try:
        return m.support_radius()
    except SupportError:
        return 8


def from_array(shape, ring, arr, idx) -> StructuredMatrix:
    ents = {}
    n = len(idx)
    for i in range(n):
        for j in range(n):
            v = float(arr[i, j])
            if v != 0.0:
                ents[(idx[i], idx[j])] = v
    return StructuredMatrix.from_fin(shape, shape, ring, ents)


def operator_norm(m: StructuredMatrix, margin=4) -> float:
    """Spectral norm of the window carrying the finite content plus margin."""
    idx = norm_window(m.rows, margin=margin, radius=_radius(m))
    return float(np.linalg.norm(to_array(m, idx), 2))


def defect_norm(m: StructuredMatrix) -> float:
    """Window norm of m^2 - m."""
    return operator_norm(m @ m - m)


# ---------------------------------------------------------------------------
# ordered-exponential transport


@dataclass
class IdempotentPath:
    sample: object            # t -> StructuredMatrix over a FloatTol ring
    t0: float
    t1: float
    step: float = 1e-3
    derivative: object = None  # optional t -> StructuredMatrix

    def dot(self, t):
        if self.derivative is not None:
            return self.derivative(t)
        # fourth-order stencil, so differentiation error does not mask the
        # integrator's order
        h = self.step
        s = self.sample
        return ((s(t - 2 * h) - s(t + 2 * h)).scale_left(1.0 / (12 * h))
                + (s(t + h) - s(t - h)).scale_left(8.0 / (12 * h)))


def transport(path: IdempotentPath, t1: float, t2: float) -> StructuredMatrix:
    """Solution at t2 of X' = (P' P - P P') X, X(t1) = 1, by fixed-step RK4.

    Conjugation by the result carries P(t1) to P(t2) up to an integration
    error of fourth order in the step.
    """
    if t2 < t1:
        raise PreconditionError("transport needs t1 <= t2")
    p_ref = path.sample(t1)
    ring = p_ref.ring
    shape = p_ref.rows
    idx = all_indices(shape)
    tol = ring.descriptor.tolerance or 1e-9
    for t_check in (t1, (t1 + t2) / 2, t2):
        m = path.sample(t_check)
        if operator_norm(m @ m - m) > max(100 * tol, 1e-6):
            raise PreconditionError(
                f"path sample at t={t_check} is not idempotent")

    def g_arr(t):
        p = to_array(path.sample(t), idx)
        dp = to_array(path.dot(t), idx)
        return dp @ p - p @ dp

    n_steps = max(1, round((t2 - t1) / path.step))
    h = (t2 - t1) / n_steps
    x = np.eye(len(idx))
    t = t1
    for _ in range(n_steps):
        k1 = g_arr(t) @ x
        k2 = g_arr(t + h / 2) @ (x + h / 2 * k1)
        k3 = g_arr(t + h / 2) @ (x + h / 2 * k2)
        k4 = g_arr(t + h) @ (x + h * k3)
        x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    if abs(np.linalg.det(x)) < 1e-12:
        raise PreconditionError("transport frame is numerically singular")
    return from_array(shape, ring, x, idx)


def transport_residual(path: IdempotentPath, t1, t2) -> float:
    """Conjugation error |X P(t1) X^-1 - P(t2)| for diagnostics."""
    x = transport(path, t1, t2)
    idx = all_indices(x.rows)
    xa = to_array(x, idx)
    p1 = to_array(path.sample(t1), idx)
    p2 = to_array(path.sample(t2), idx)
    return float(np.linalg.norm(xa @ p1 @ np.linalg.inv(xa) - p2, 2))


# ---------------------------------------------------------------------------
# the idem operator


@dataclass
class NearIdempotent:
    P_tilde: StructuredMatrix
    reference: StructuredMatrix = None  # exact idempotent, for the series
    defect: float = field(init=False)

    def __post_init__(self):
        self.defect = defect_norm(self.P_tilde)


MAX_DEFECT = 0.05


def idem(x, method="newton"):
    """Repair a near-idempotent: returns Q with Q^2 = Q within 1e-10.

    method: "newton" for the cubic iteration, or ("series", k) for the
    residue-series expansion of order k around x.reference.
    """
    if isinstance(x, StructuredMatrix):
        x = NearIdempotent(x)
    if x.defect > MAX_DEFECT:
        raise PreconditionError(
            f"defect {x.defect:.4g} exceeds the allowed {MAX_DEFECT}")
    if method == "newton":
        return _idem_newton(x.P_tilde)
    if isinstance(method, tuple) and method[0] == "series":
        k = method[1]
        if k > 8:
            raise PreconditionError("series order is capped at 8")
        if x.reference is None:
            raise PreconditionError("series method needs a reference idempotent")
        return _idem_series(x.P_tilde, x.reference, k)
    raise PreconditionError(f"unknown idem method {method!r}")


def idem_report(x, method="newton"):
    """idem plus measurements: the input defect, the repair distance
    |Q - P~|, and their ratio (the effective Lipschitz constant; close to 1
    for near-orthogonal frames, larger for skewed idempotents)."""
    if isinstance(x, StructuredMatrix):
        x = NearIdempotent(x)
    q = idem(x, method)
    dist = operator_norm(q - x.P_tilde)
    ratio = dist / x.defect if x.defect else 0.0
    return q, {"defect": x.defect, "distance": dist, "ratio": ratio}


def _idem_newton(p, tol=1e-12, max_iter=60):
    two, three = 2.0, 3.0
    for _ in range(max_iter):
        p2 = p @ p
        nxt = p2.scale_left(three) - (p2 @ p).scale_left(two)
        if operator_norm(nxt - p) <= tol:
            return nxt
        p = nxt
    if defect_norm(p) > 1e-10:
        raise PreconditionError("newton iteration did not converge")
    return p


class _Laurent:
    """Laurent polynomial in z with structured-matrix coefficients."""

    def __init__(self, coeffs):
        self.coeffs = {k: v for k, v in coeffs.items()}

    def __mul__(self, other):
        out = {}
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                k = i + j
                ab = a @ b
                out[k] = out[k] + ab if k in out else ab
        return _Laurent(out)

    def at_zero(self):
        return self.coeffs[0]


def _idem_series(p_tilde, p_ref, order):
    """Formal residue of the resolvent expansion around the reference:
    mean over the unit circle of  P~ z ((1-P~) + P~ z)^{-1}  expanded as a
    geometric series in the truncation eps = P_ref - P~."""
    p = p_ref
    eps = p_ref - p_tilde
    # R(z)^-1 = (1 - P) + P z^-1
    r_inv = _Laurent({0: bar(p), -1: p})
    # step = eps (z - 1) R(z)^-1; the front (P - eps) is split so that the
    # truncation is homogeneous in the truncation order of eps
    step = _Laurent({1: eps, 0: -eps}) * r_inv
    total = None

    def accumulate(front, count, total):
        term = front * r_inv
        for _ in range(count):
            z0 = term.coeffs.get(0)
            if z0 is not None:
                total = z0 if total is None else total + z0
            term = term * step
        return total

    total = accumulate(_Laurent({1: p}), order + 1, total)
    if order >= 1:
        total = accumulate(_Laurent({1: -eps}), order, total)
    return total


# ---------------------------------------------------------------------------
# connectors


def _invert_finite_perturbation(u: StructuredMatrix, reference: StructuredMatrix,
                                tol=1e-12, max_iter=200):
    """Inverse of u = reference + finite, where the reference involution is
    its own inverse; geometric series in the correction."""
    ring = u.ring
    e = u - reference
    one = StructuredMatrix.identity(u.rows, ring)
    # u = reference (1 + reference e);  (1 + x)^-1 = sum (-x)^m
    x = reference @ e
    term = one
    acc = one
    for _ in range(max_iter):
        term = term @ (-x)
        acc = acc + term
        if operator_norm(term) <= tol:
            break
    else:
        raise PreconditionError("connector inverse series did not converge")
    return acc @ reference


def _dense_inverse(u: StructuredMatrix):
    idx = all_indices(u.rows)
    arr = to_array(u, idx)
    det = np.linalg.det(arr)
    if abs(det) < 1e-12:
        raise PreconditionError(
            f"connector is singular on the window (det = {det:.3g})")
    return from_array(u.rows, u.ring, np.linalg.inv(arr), idx)


def _invert(u: StructuredMatrix, reference=None):
    if u.rows.cardinality != float("inf"):
        return _dense_inverse(u)
    if reference is None:
        raise PreconditionError("inverting an infinite connector needs a reference")
    return _invert_finite_perturbation(u, reference)


def connect(p: StructuredMatrix, q: StructuredMatrix, form="plain",
            pattern: StructuredMatrix = None) -> Morphism:
    """Connector between close idempotents: conjugates p onto q.

    plain:     1 - P - Q, inverse solved on the window;
    corrected: 1 - P - Q + 2QP with its factored inverse;
    sign:      the symmetrized geometric-mean connector, an involution.

    On infinite index sets a common pattern idempotent must be supplied so
    the inverse can be expanded around the involution 1 - 2*pattern.
    """
    ring = p.ring
    one = StructuredMatrix.identity(p.rows, ring)
    u = one - p - q
    ref = None
    if p.rows.cardinality == float("inf"):
        if pattern is None:
            raise PreconditionError(
                "connectors on infinite index sets need the common pattern")
        ref = one - pattern.scale_left(2.0)
    if form == "plain":
        u_inv = _invert(u, reference=ref)
        return Morphism(p.rows, p.rows, u, u, u_inv, u_inv)
    if form == "corrected":
        v = one - p - q + (q @ p).scale_left(2.0)
        # 1 - P - Q = (1 - 2Q)(1 - P - Q + 2QP), so v^-1 = u^-1 (1 - 2Q)
        u_inv = _invert(u, reference=ref)
        v_inv = u_inv @ (one - q.scale_left(2.0))
        return Morphism(p.rows, p.rows, v, v, v_inv, v_inv)
    if form == "sign":
        s = sign_connector(p, q)
        return Morphism(p.rows, p.rows, s, s, s, s)
    raise PreconditionError(f"unknown connector form {form!r}")


def sign_connector(p, q, tol=1e-12, max_terms=200) -> StructuredMatrix:
    """Residue series for the geometric mean of 1-P-Q and its inverse."""
    ring = p.ring
    delta = (q - p).scale_left(0.5)
    # A + Bz = R(z) + delta (z - 1), R(z) = (1-P) + P z; the geometric
    # expansion of the inverse alternates in sign
    r_inv = _Laurent({0: bar(p), -1: p})
    num = _Laurent({0: bar(p) - delta, 1: -(p + delta)})  # A - B z
    step = _Laurent({1: -delta, 0: delta}) * r_inv
    acc = None
    term = num * r_inv
    last = float("inf")
    for m in range(max_terms):
        z0 = term.coeffs.get(0)
        if z0 is not None:
            acc = z0 if acc is None else acc + z0
            nrm = operator_norm(z0)
            if nrm <= tol:
                break
            if m > 4 and nrm > last * 1.05:
                raise PreconditionError("sign-connector series diverges; "
                                        "idempotents are too far apart")
            last = nrm
        term = term * step
    else:
        raise PreconditionError("sign-connector series did not settle")
    return acc


# ---------------------------------------------------------------------------
# finite reduction


def finite_reduce(p: StructuredMatrix, pattern: StructuredMatrix, eps: float):
    """Truncate the sub-threshold tail of p - pattern, repair idempotency,
    and certify the move by a corrected connector.

    Returns (p_eps, morphism, report) with the conjugation residual in the
    report."""
    ring = p.ring
    diff = p - pattern
    if not diff.is_K():
        raise PreconditionError("p must be a finite perturbation of the pattern")
    ents = diff.K_entries()
    small = {ij: v for ij, v in ents.items() if abs(v) < eps}
    eps_mat = StructuredMatrix.from_fin(p.rows, p.cols, ring, small)
    if not small:
        one = StructuredMatrix.identity(p.rows, ring)
        return p, Morphism(p.rows, p.rows, one, one, one, one), {
            "residual": 0.0, "support_radius": diff.support_radius(), "kept": len(ents)}
    bound = (operator_norm(p @ eps_mat) + operator_norm((bar(p)) @ eps_mat))
    if bound >= 0.5:
        raise PreconditionError(
            f"truncation too large: |P eps| + |(1-P) eps| = {bound:.4g} >= 1/2")
    p_trunc = p - eps_mat
    p_eps = _idem_newton(p_trunc)
    one = StructuredMatrix.identity(p.rows, ring)
    v = one - p - p_eps + (p_eps @ p).scale_left(2.0)
    u = one - p - p_eps
    ref = one - pattern.scale_left(2.0)
    u_inv = _invert(u, reference=ref)
    v_inv = u_inv @ (one - p_eps.scale_left(2.0))
    morph = Morphism(p.rows, p.rows, v, v, v_inv, v_inv)
    residual = operator_norm(v @ p @ v_inv - p_eps)
    report = {"residual": residual,
              "support_radius": (p_eps - pattern).support_radius(),
              "kept": len(ents) - len(small)}
    if residual > 1e-8:
        raise PreconditionError(f"connector residual {residual:.3g} too large")
    return p_eps, morph, report
