"""Span utilities for finite matrix families.

Matrices are compared and orthonormalized in the Frobenius inner product
by flattening row-major.  Rank decisions use a relative singular-value
threshold (default ``1e-10``), which every shipped example clears by many
orders of magnitude.
"""

import numpy as np

RANK_RTOL = 1e-10


def frob(a, b):
    """Frobenius inner product ``<a, b> = sum(a * b)``."""
    return float(np.tensordot(a, b, axes=2))


def vec(mat):
    return np.asarray(mat, dtype=float).ravel()


def unvec(v, n, k=None):
    k = n if k is None else k
    return np.asarray(v, dtype=float).reshape(n, k)


def orthonormalize(mats, tol_rel=1e-9, prefix=()):
    """Gram-Schmidt an ordered matrix family, keeping leading spans.

    ``prefix`` matrices are orthonormalized first and are required to be
    independent; the remaining family is then swept in order, dropping
    elements that fall inside the accumulated span (relative tolerance).
    Returns a list of orthonormal matrices.
    """
    out = []
    scale = 1.0
    for group, required in ((prefix, True), (mats, False)):
        for m in group:
            v = np.array(m, dtype=float)
            nrm0 = np.linalg.norm(v)
            scale = max(scale, nrm0)
            for q in out:
                v = v - frob(q, v) * q
            # second sweep for numerical orthogonality
            for q in out:
                v = v - frob(q, v) * q
            nrm = np.linalg.norm(v)
            if nrm > tol_rel * max(scale, 1.0):
                out.append(v / nrm)
            elif required:
                raise ValueError("prefix family is linearly dependent")
    return out


def span_contains(basis, mat, tol=1e-9):
    """Residual distance from ``mat`` to the span of an orthonormal basis."""
    v = np.array(mat, dtype=float)
    for q in basis:
        v = v - frob(q, v) * q
    return float(np.linalg.norm(v))


def null_space(A, rtol=RANK_RTOL):
    """Orthonormal basis of the null space of ``A`` (rows of A as constraints)."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.eye(A.shape[1])
    u, s, vt = np.linalg.svd(A, full_matrices=True)
    cutoff = rtol * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    return vt[rank:].T


def matrix_rank(A, rtol=RANK_RTOL):
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > rtol * s[0]))


def rank_margin(A, rtol=RANK_RTOL):
    """How cleanly the singular values split at the rank cutoff.

    Returns the smaller of (smallest kept / cutoff) and (cutoff / largest
    dropped); infinite when one of the two sides is empty.
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return float("inf")
    s = np.linalg.svd(A, compute_uv=False)
    cutoff = rtol * s[0]
    kept = s[s > cutoff]
    dropped = s[s <= cutoff]
    lo = kept[-1] / cutoff if kept.size else float("inf")
    hi = cutoff / dropped[0] if dropped.size and dropped[0] > 0 else float("inf")
    return float(min(lo, hi))


def sym_basis(n):
    """Orthonormal basis of symmetric n x n matrices."""
    out = []
    for p in range(n):
        e = np.zeros((n, n))
        e[p, p] = 1.0
        out.append(e)
    r = 1.0 / np.sqrt(2.0)
    for p in range(n):
        for q in range(p + 1, n):
            e = np.zeros((n, n))
            e[p, q] = r
            e[q, p] = r
            out.append(e)
    return out


def skew_basis(n):
    """Orthonormal basis of antisymmetric n x n matrices."""
    out = []
    r = 1.0 / np.sqrt(2.0)
    for p in range(n):
        for q in range(p + 1, n):
            e = np.zeros((n, n))
            e[p, q] = r
            e[q, p] = -r
            out.append(e)
    return out


def signed_basis(n, sign):
    return sym_basis(n) if sign > 0 else skew_basis(n)


def polar_orthogonal(T):
    """Orthogonal factor of the polar decomposition of ``T``."""
    u, _, vt = np.linalg.svd(T)
    return u @ vt


def random_isometry(n, k, rng):
    """Random n x k matrix with orthonormal columns (n >= k)."""
    if k > n:
        raise ValueError("isometry needs n >= k")
    g = rng.standard_normal((n, k))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))
