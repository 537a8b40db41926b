"""Exact structure theory: commutants, generated algebras, and the
block decomposition of finite-dimensional real C*-algebras.

Everything here is plain dense linear algebra.  Irreducibility over the
reals is read off the commutant: a tuple is reducible exactly when the
symmetric part of its commutant has dimension above one, and otherwise
the commutant is a division algebra whose total dimension 1, 2, or 4
identifies it as R, C, or H.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import basis
from .errors import GenericityFailure, InconsistentDimension
from .systems import NcPoint, OperatorSystem

NULL_RTOL = 1e-10
CLOSURE_TOL = 1e-9

REDUCIBLE = "Reducible"
TYPE_R = "R"
TYPE_C = "C"
TYPE_H = "H"


@dataclass(frozen=True)
class CommutantBasis:
    level: int
    basis: Tuple[np.ndarray, ...]
    dim: int


@dataclass(frozen=True)
class CommutantType:
    kind: str
    sym_dim: int
    full_dim: int
    unit: Optional[np.ndarray] = None  # J with J^2 = -I when kind is C or H
    margin: float = float("inf")       # rank-gap cleanliness of the verdict


def _commutator_rows(images, param_basis):
    """Constraint matrix of S X - X S = 0, one column per parameter."""
    n2 = images[0].size if images else 0
    mat = np.zeros((len(images) * n2, len(param_basis)))
    for c, pb in enumerate(param_basis):
        mat[:, c] = np.concatenate([basis.vec(pb @ x - x @ pb) for x in images])
    return mat


def _solve_commutant(images, param_basis, rtol=NULL_RTOL):
    mat = _commutator_rows(images, param_basis)
    null = basis.null_space(mat, rtol=rtol)
    out = []
    for c in range(null.shape[1]):
        s = sum(w * pb for w, pb in zip(null[:, c], param_basis))
        out.append(s)
    return out


def commutant(images: Sequence[np.ndarray], rtol=NULL_RTOL) -> CommutantBasis:
    """Orthonormal basis of {S : S X_j = X_j S for all j}.

    Transposes of the images are included in the constraint list, so the
    computed space is closed under transposition regardless of the sign
    pattern of the input tuple.
    """
    images = [np.asarray(x, dtype=float) for x in images]
    if not images:
        raise ValueError("commutant of an empty tuple is ambiguous; "
                         "pass [np.eye(n)] for the full matrix algebra")
    n = images[0].shape[0]
    full = images + [x.T for x in images]
    elems = _solve_commutant(full, [basis.unvec(v, n) for v in np.eye(n * n)],
                             rtol=rtol)
    ortho = basis.orthonormalize(elems, tol_rel=1e-12)
    return CommutantBasis(n, tuple(ortho), len(ortho))


def _sym_commutant_dim(images, rtol=NULL_RTOL):
    n = images[0].shape[0]
    full = list(images) + [x.T for x in images]
    elems = _solve_commutant(full, basis.sym_basis(n), rtol=rtol)
    return len(basis.orthonormalize(elems, tol_rel=1e-12))


def _skew_commutant(images, rtol=NULL_RTOL):
    n = images[0].shape[0]
    full = list(images) + [x.T for x in images]
    elems = _solve_commutant(full, basis.skew_basis(n), rtol=rtol)
    return basis.orthonormalize(elems, tol_rel=1e-12)


def commutant_type(images: Sequence[np.ndarray],
                   rtol=NULL_RTOL) -> CommutantType:
    """Classify the commutant: Reducible, or division type R / C / H.

    For kinds C and H a normalized antisymmetric commutant element J with
    J^2 = -I is extracted as a certificate.  The recorded margin is the
    worse of the rank-gap cleanliness of the full and symmetric-part
    null-space decisions.
    """
    images = [np.asarray(x, dtype=float) for x in images]
    n = images[0].shape[0]
    full = images + [x.T for x in images]
    full_rows = _commutator_rows(full, [basis.unvec(v, n)
                                        for v in np.eye(n * n)])
    sym_rows = _commutator_rows(full, basis.sym_basis(n))
    margin = min(basis.rank_margin(full_rows, rtol),
                 basis.rank_margin(sym_rows, rtol))
    comm = commutant(images, rtol=rtol)
    sym_dim = _sym_commutant_dim(images, rtol=rtol)
    full_dim = comm.dim
    if sym_dim > 1:
        return CommutantType(REDUCIBLE, sym_dim, full_dim, margin=margin)
    if sym_dim != 1:
        raise InconsistentDimension(
            f"symmetric commutant dimension {sym_dim} (identity missing?)")
    if full_dim == 1:
        return CommutantType(TYPE_R, 1, 1, margin=margin)
    if full_dim not in (2, 4):
        raise InconsistentDimension(
            f"irreducible commutant of dimension {full_dim} not in (1, 2, 4)")
    skews = _skew_commutant(images, rtol=rtol)
    if not skews:
        raise InconsistentDimension("missing antisymmetric commutant part")
    j0 = skews[0]
    sq = j0 @ j0
    c = -np.trace(sq) / n
    if c <= 0:
        raise InconsistentDimension("antisymmetric commutant unit degenerate")
    unit = j0 / np.sqrt(c)
    resid = np.linalg.norm(unit @ unit + np.eye(n))
    if resid > 1e-6:
        raise InconsistentDimension(
            f"J^2 = -I certificate failed (residual {resid:.2e})")
    kind = TYPE_C if full_dim == 2 else TYPE_H
    return CommutantType(kind, 1, full_dim, unit=unit, margin=margin)


# ---------------------------------------------------------------------------
# Generated algebras


@dataclass(frozen=True)
class AlgebraBasis:
    """Orthonormal basis of the unital algebra generated by the system.

    The leading ``v_dim`` elements span {I, G_1..G_d}; the remaining
    elements are split into purely symmetric and purely antisymmetric
    ones, with the transpose type recorded in ``signs``.
    """

    ambient_dim: int
    basis: Tuple[np.ndarray, ...]
    signs: Tuple[int, ...]
    v_dim: int
    closed: bool
    closure_residual: float

    @property
    def dim(self) -> int:
        return len(self.basis)


def expand_in_basis(alg: AlgebraBasis, mat: np.ndarray):
    """Coefficients of ``mat`` over the (orthonormal) algebra basis."""
    coeffs = np.array([basis.frob(b, mat) for b in alg.basis])
    recon = sum(c * b for c, b in zip(coeffs, alg.basis))
    return coeffs, float(np.linalg.norm(recon - mat))


def product_table(alg: AlgebraBasis):
    """coeffs[i, j, :] of B_i @ B_j over the basis, with worst residual."""
    d = alg.dim
    table = np.zeros((d, d, d))
    worst = 0.0
    for i, bi in enumerate(alg.basis):
        for j, bj in enumerate(alg.basis):
            coeffs, resid = expand_in_basis(alg, bi @ bj)
            table[i, j] = coeffs
            worst = max(worst, resid)
    return table, worst


def generate_algebra(system: OperatorSystem, tol=CLOSURE_TOL) -> AlgebraBasis:
    """Span-closure of {I, G_j} under products.

    Iterates products and re-orthonormalizes until the dimension
    stabilizes; terminates within m^2 rounds.  The final basis keeps
    {I, G_j} as its leading block and sign-purifies the rest.
    """
    m = system.ambient_dim
    eye = np.eye(m)
    prefix = basis.orthonormalize([], prefix=[eye] + list(system.generator_matrices))
    current = list(prefix)
    for _ in range(m * m + 1):
        prods = [a @ b for a in current for b in current]
        nxt = basis.orthonormalize(prods, tol_rel=tol, prefix=current)
        if len(nxt) == len(current):
            current = nxt
            break
        current = nxt

    v_dim = len(prefix)
    tail = current[v_dim:]
    sym_parts = [0.5 * (b + b.T) for b in tail]
    skew_parts = [0.5 * (b - b.T) for b in tail]
    ordered = basis.orthonormalize(sym_parts + skew_parts, tol_rel=1e-12,
                                   prefix=current[:v_dim])
    signs = []
    for b in ordered:
        s = +1 if np.linalg.norm(b - b.T) <= np.linalg.norm(b + b.T) else -1
        signs.append(s)
    alg = AlgebraBasis(m, tuple(ordered), tuple(signs), v_dim, True, 0.0)
    _, worst = product_table(alg)
    return AlgebraBasis(m, alg.basis, alg.signs, v_dim, worst <= tol * 10, worst)


def concrete_algebra(mats: Sequence[np.ndarray], prefix: Sequence[np.ndarray],
                     tol=CLOSURE_TOL) -> AlgebraBasis:
    """Algebra basis generated by arbitrary matrices with a chosen prefix."""
    m = np.asarray(prefix[0]).shape[0]
    current = basis.orthonormalize(list(mats), tol_rel=tol, prefix=list(prefix))
    for _ in range(m * m + 1):
        prods = [a @ b for a in current for b in current]
        nxt = basis.orthonormalize(prods, tol_rel=tol, prefix=current)
        if len(nxt) == len(current):
            current = nxt
            break
        current = nxt
    v_dim = len(list(prefix))
    tail = current[v_dim:]
    ordered = basis.orthonormalize(
        [0.5 * (b + b.T) for b in tail] + [0.5 * (b - b.T) for b in tail],
        tol_rel=1e-12, prefix=current[:v_dim])
    signs = tuple(+1 if np.linalg.norm(b - b.T) <= np.linalg.norm(b + b.T)
                  else -1 for b in ordered)
    alg = AlgebraBasis(m, tuple(ordered), signs, v_dim, True, 0.0)
    _, worst = product_table(alg)
    return AlgebraBasis(m, alg.basis, signs, v_dim, worst <= tol * 10, worst)


# ---------------------------------------------------------------------------
# Wedderburn-style decomposition


@dataclass(frozen=True)
class Block:
    isometry: np.ndarray     # ambient_dim x size, orthonormal columns
    size: int
    division_type: str
    class_index: int
    multiplicity: int


@dataclass(frozen=True)
class AlgebraDecomposition:
    blocks: Tuple[Block, ...]
    num_classes: int
    completeness_residual: float

    def classes(self):
        out = {}
        for b in self.blocks:
            out.setdefault(b.class_index, []).append(b)
        return [out[k] for k in sorted(out)]

    def class_signature(self):
        """Sorted multiset of (size, division_type) over distinct classes."""
        sig = []
        for group in self.classes():
            sig.append((group[0].size, group[0].division_type))
        return tuple(sorted(sig))


def _split_eigenspaces(s_mat, gap_tol):
    lam, vecs = np.linalg.eigh(s_mat)
    scale = max(1.0, float(np.max(np.abs(lam))))
    groups = []
    start = 0
    for i in range(1, len(lam) + 1):
        if i == len(lam) or lam[i] - lam[i - 1] > gap_tol * scale:
            groups.append(vecs[:, start:i])
            start = i
    return groups


def _intertwiner(images_a, images_b, rtol=NULL_RTOL):
    """Orthogonal T with T A_i = B_i T, or None."""
    d = images_a[0].shape[0]
    if images_b[0].shape[0] != d:
        return None
    rows = []
    for a, b in zip(images_a, images_b):
        rows.append(np.kron(np.eye(d), a.T) - np.kron(b, np.eye(d)))
    null = basis.null_space(np.vstack(rows), rtol=rtol)
    if null.shape[1] == 0:
        return None
    t = basis.unvec(null[:, 0], d)
    t = basis.polar_orthogonal(t)
    resid = max(np.linalg.norm(t @ a - b @ t) for a, b in zip(images_a, images_b))
    if resid > 1e-7 * max(1.0, max(np.linalg.norm(a) for a in images_a)):
        return None
    return t


def decompose_algebra(alg: AlgebraBasis, rng: np.random.Generator,
                      retries: int = 8, gap_tol: float = 1e-7) -> AlgebraDecomposition:
    """Split the ambient space into irreducible invariant subspaces.

    A generic symmetric element of the commutant is drawn from the seeded
    generator; its eigenspaces are invariant, and genericity is verified
    by checking that every restricted tuple is irreducible (retry with a
    fresh draw otherwise).  Equivalent blocks are grouped by solving the
    real intertwiner equation and orthogonalizing via polar decomposition.
    """
    m = alg.ambient_dim
    full = list(alg.basis) + [b.T for b in alg.basis]
    sym_comm = _solve_commutant(full, basis.sym_basis(m))
    sym_comm = basis.orthonormalize(sym_comm, tol_rel=1e-12)
    if not sym_comm:
        raise GenericityFailure("commutant has no symmetric part")

    last_error = None
    for _ in range(retries):
        coeffs = rng.standard_normal(len(sym_comm))
        generic = sum(c * s for c, s in zip(coeffs, sym_comm))
        generic = 0.5 * (generic + generic.T)
        groups = _split_eigenspaces(generic, gap_tol)
        restricted = []
        ok = True
        for v in groups:
            images = [v.T @ b @ v for b in alg.basis]
            try:
                ctype = commutant_type(images)
            except InconsistentDimension as exc:
                ok = False
                last_error = exc
                break
            if ctype.kind == REDUCIBLE:
                ok = False
                last_error = GenericityFailure("eigenspace restriction reducible")
                break
            restricted.append((v, images, ctype))
        if not ok:
            continue

        class_of = [-1] * len(restricted)
        next_class = 0
        for i in range(len(restricted)):
            if class_of[i] >= 0:
                continue
            class_of[i] = next_class
            for j in range(i + 1, len(restricted)):
                if class_of[j] >= 0:
                    continue
                vi, imgs_i, ti = restricted[i]
                vj, imgs_j, tj = restricted[j]
                if imgs_i[0].shape != imgs_j[0].shape or ti.kind != tj.kind:
                    continue
                if _intertwiner(imgs_i, imgs_j) is not None:
                    class_of[j] = next_class
            next_class += 1
        counts = {}
        for c in class_of:
            counts[c] = counts.get(c, 0) + 1
        blocks = []
        for (v, images, ctype), cls in zip(restricted, class_of):
            blocks.append(Block(v, v.shape[1], ctype.kind, cls, counts[cls]))
        total = sum(blk.isometry @ blk.isometry.T for blk in blocks)
        resid = float(np.linalg.norm(total - np.eye(m)))
        if resid > 1e-9 * m:
            last_error = GenericityFailure(f"completeness residual {resid:.2e}")
            continue
        return AlgebraDecomposition(tuple(blocks), next_class, resid)

    raise GenericityFailure(
        f"no generic splitting after {retries} draws: {last_error}")


def block_point(system: OperatorSystem, block: Block) -> NcPoint:
    """Restriction of the tautological point to one invariant subspace."""
    v = block.isometry
    return NcPoint(block.size, [v.T @ g @ v for g in system.generator_matrices])


def complex_commutant_dim(images: Sequence[np.ndarray], rtol=NULL_RTOL,
                          with_margin: bool = False):
    """Real dimension of the complex commutant, computed in doubled size.

    The commutant of the realified tuple is intersected with the
    W-balanced matrices; balanced solutions are exactly realifications of
    complex matrices, so the returned count is twice the complex
    dimension of the commutant of the tuple over C.
    """
    images = [np.asarray(x, dtype=float) for x in images]
    n = images[0].shape[0]
    doubled = [np.block([[x, np.zeros_like(x)], [np.zeros_like(x), x]])
               for x in images]
    # parametrize over W-balanced matrices: [[a, -b], [b, a]]
    params = []
    for e in [basis.unvec(v, n) for v in np.eye(n * n)]:
        z = np.zeros((n, n))
        params.append(np.block([[e, z], [z, e]]))
        params.append(np.block([[z, -e], [e, z]]))
    full = doubled + [x.T for x in doubled]
    elems = _solve_commutant(full, params, rtol=rtol)
    dim = len(basis.orthonormalize(elems, tol_rel=1e-12))
    if not with_margin:
        return dim
    margin = basis.rank_margin(_commutator_rows(full, params), rtol)
    return dim, margin
