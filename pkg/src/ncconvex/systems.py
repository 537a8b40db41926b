"""Operator systems, nc points, and the elementary nc convexity operations.

A concrete real operator system is the span of the identity and finitely
many signed generators ``G_1..G_d`` inside ``M_m(R)``, each generator
exactly symmetric (sign ``+1``) or antisymmetric (sign ``-1``).  Points at
level ``n`` are tuples of ``n x n`` images, one per generator, carrying
the same sign pattern; they stand for the unital map ``I -> I_n``,
``G_j -> X_j``.  Everything here is immutable and pure.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from . import basis
from .errors import (
    DependentGenerators,
    DimensionMismatch,
    NotPartitionOfUnity,
    NotWBalanced,
    SignViolation,
    SystemMismatch,
)

STRUCT_TOL = 1e-9
ARITH_TOL = 1e-12
DEFAULT_MAX_LEVEL = 16


def _freeze(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _enforce_sign(mat, sign, tol, what):
    """Check the declared transpose symmetry, then make it exact."""
    mat = np.asarray(mat, dtype=float)
    resid = np.linalg.norm(mat.T - sign * mat)
    scale = max(1.0, np.linalg.norm(mat))
    if resid > tol * scale:
        raise SignViolation(
            f"{what}: transpose symmetry residual {resid:.3e} exceeds {tol:.1e}"
        )
    return 0.5 * (mat + sign * mat.T), resid


@dataclass(frozen=True)
class OperatorSystem:
    """Concrete system span{I, G_1..G_d} in M_m(R) with involution signs."""

    ambient_dim: int
    generators: Tuple[Tuple[np.ndarray, int], ...]
    label: Optional[str] = None
    correction_norm: float = 0.0

    @property
    def num_generators(self) -> int:
        return len(self.generators)

    @property
    def signs(self) -> Tuple[int, ...]:
        return tuple(s for _, s in self.generators)

    @property
    def generator_matrices(self) -> Tuple[np.ndarray, ...]:
        return tuple(g for g, _ in self.generators)

    def identity(self) -> np.ndarray:
        return np.eye(self.ambient_dim)

    def tautological_point(self) -> "NcPoint":
        """The inclusion of the system into its ambient algebra as a point."""
        return NcPoint(self.ambient_dim, self.generator_matrices)


def validate_system(raw, label=None, tol=STRUCT_TOL) -> OperatorSystem:
    """Build an :class:`OperatorSystem` from ``(matrix, sign)`` pairs.

    Matrices must be square of one common dimension; each is checked
    against its declared sign to ``tol`` and then symmetrized or
    antisymmetrized so the invariant holds exactly.  The family
    ``{I, G_1..G_d}`` must be linearly independent (Gram matrix of
    Frobenius inner products nonsingular above the tolerance).
    """
    pairs = list(raw)
    if not pairs:
        raise DimensionMismatch("a system needs an ambient dimension; "
                                "pass validate_trivial(m) for d = 0")
    mats = []
    signs = []
    m = None
    correction = 0.0
    for idx, (mat, sign) in enumerate(pairs):
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(f"generator {idx} is not square")
        if m is None:
            m = mat.shape[0]
        elif mat.shape[0] != m:
            raise DimensionMismatch(
                f"generator {idx} has dimension {mat.shape[0]}, expected {m}")
        if sign not in (+1, -1):
            raise SignViolation(f"generator {idx}: sign must be +1 or -1")
        fixed, resid = _enforce_sign(mat, sign, tol, f"generator {idx}")
        correction = max(correction, resid)
        mats.append(fixed)
        signs.append(int(sign))
    family = [np.eye(m)] + mats
    gram = np.array([[basis.frob(a, b) for b in family] for a in family])
    sings = np.linalg.svd(gram, compute_uv=False)
    if sings[-1] <= tol * sings[0]:
        raise DependentGenerators(
            f"I and generators are dependent (gram condition {sings[-1]:.3e})")
    gens = tuple((_freeze(g), s) for g, s in zip(mats, signs))
    return OperatorSystem(m, gens, label=label, correction_norm=correction)


def validate_trivial(m, label=None) -> OperatorSystem:
    """The trivial system R*I in M_m(R) (no generators)."""
    if m < 1:
        raise DimensionMismatch("ambient dimension must be positive")
    return OperatorSystem(int(m), (), label=label)


@dataclass(frozen=True)
class NcPoint:
    """Tuple of level-n images of the generators (one ucp-map candidate)."""

    level: int
    images: Tuple[np.ndarray, ...]

    def __init__(self, level, images):
        object.__setattr__(self, "level", int(level))
        object.__setattr__(self, "images", tuple(_freeze(x) for x in images))
        for idx, x in enumerate(self.images):
            if x.shape != (self.level, self.level):
                raise DimensionMismatch(
                    f"image {idx} has shape {x.shape}, expected "
                    f"({self.level}, {self.level})")

    @property
    def num_images(self) -> int:
        return len(self.images)

    def close_to(self, other, tol=1e-10) -> bool:
        if self.level != other.level or self.num_images != other.num_images:
            return False
        return all(np.allclose(a, b, atol=tol)
                   for a, b in zip(self.images, other.images))


def validate_point(system: OperatorSystem, level, images,
                   tol=STRUCT_TOL) -> NcPoint:
    """Canonicalize a point over ``system``: shape, sign check, exactness."""
    images = list(images)
    if len(images) != system.num_generators:
        raise SystemMismatch(
            f"point has {len(images)} images, system has "
            f"{system.num_generators} generators")
    fixed = []
    for j, (x, sign) in enumerate(zip(images, system.signs)):
        x = np.asarray(x, dtype=float)
        if x.shape != (level, level):
            raise DimensionMismatch(f"image {j} has shape {x.shape}")
        y, _ = _enforce_sign(x, sign, tol, f"image {j}")
        fixed.append(y)
    return NcPoint(level, fixed)


@dataclass(frozen=True)
class ComplexNcPoint:
    """Point x + iy of the complexified set, stored as real/imaginary parts."""

    level: int
    real_part: Tuple[np.ndarray, ...]
    imag_part: Tuple[np.ndarray, ...]

    def __init__(self, level, real_part, imag_part):
        object.__setattr__(self, "level", int(level))
        object.__setattr__(self, "real_part",
                           tuple(_freeze(x) for x in real_part))
        object.__setattr__(self, "imag_part",
                           tuple(_freeze(y) for y in imag_part))


@dataclass(frozen=True)
class Isometry:
    """Real n x k matrix with orthonormal columns (re-orthonormalized)."""

    matrix: np.ndarray = field()

    def __init__(self, matrix, tol=1e-9):
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] < a.shape[1]:
            raise DimensionMismatch("isometry must be tall (n >= k)")
        gram = a.T @ a
        resid = np.linalg.norm(gram - np.eye(a.shape[1]))
        if resid > tol:
            raise DimensionMismatch(
                f"columns not orthonormal (residual {resid:.3e})")
        # polar step makes alpha^T alpha = I exact to working precision
        u, _, vt = np.linalg.svd(a, full_matrices=False)
        object.__setattr__(self, "matrix", _freeze(u @ vt))

    @property
    def shape(self):
        return self.matrix.shape


def realify(x, y):
    """The doubled real matrix ``[[x, -y], [y, x]]`` representing x + iy."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionMismatch("realify needs two square matrices of one size")
    return np.block([[x, -y], [y, x]])


def w_matrix(n):
    """The doubling unitary ``W = [[0, -I], [I, 0]]`` at size 2n."""
    z = np.zeros((n, n))
    i = np.eye(n)
    return np.block([[z, -i], [i, z]])


def w_balance_residual(mat):
    """Frobenius norm of ``W^T M W - M`` (zero iff M = realify(x, y))."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % 2:
        raise DimensionMismatch("expected a square matrix of even size")
    n = mat.shape[0] // 2
    w = w_matrix(n)
    return float(np.linalg.norm(w.T @ mat @ w - mat))


def u_compress(mat, tol=STRUCT_TOL):
    """Invert :func:`realify`: recover ``(x, y)`` from a W-balanced matrix."""
    mat = np.asarray(mat, dtype=float)
    resid = w_balance_residual(mat)
    scale = max(1.0, np.linalg.norm(mat))
    if resid > tol * scale:
        raise NotWBalanced(f"W-balance residual {resid:.3e} exceeds {tol:.1e}")
    n = mat.shape[0] // 2
    x = 0.5 * (mat[:n, :n] + mat[n:, n:])
    y = 0.5 * (mat[n:, :n] - mat[:n, n:])
    return x, y


def compress_point(point: NcPoint, alpha: Isometry) -> NcPoint:
    """Compression ``alpha^T X_j alpha`` (sign pattern is preserved)."""
    a = alpha.matrix if isinstance(alpha, Isometry) else Isometry(alpha).matrix
    if a.shape[0] != point.level:
        raise DimensionMismatch(
            f"isometry rows {a.shape[0]} != point level {point.level}")
    return NcPoint(a.shape[1], [a.T @ x @ a for x in point.images])


def direct_sum(points: Sequence[NcPoint]) -> NcPoint:
    """Block-diagonal direct sum; level is the sum of levels."""
    points = list(points)
    if not points:
        raise SystemMismatch("direct_sum of an empty family")
    d = points[0].num_images
    if any(p.num_images != d for p in points):
        raise SystemMismatch("points have different numbers of images")
    total = sum(p.level for p in points)
    images = []
    for j in range(d):
        out = np.zeros((total, total))
        off = 0
        for p in points:
            n = p.level
            out[off:off + n, off:off + n] = p.images[j]
            off += n
        images.append(out)
    return NcPoint(total, images)


def nc_combination(points: Sequence[NcPoint], coeffs, tol=STRUCT_TOL) -> NcPoint:
    """Finite nc convex combination ``sum_i a_i^T X^(i) a_i``.

    ``coeffs[i]`` is an ``n_i x n`` matrix; the family must satisfy
    ``sum_i a_i^T a_i = I_n`` to within ``tol``.
    """
    points = list(points)
    coeffs = [np.asarray(a, dtype=float) for a in coeffs]
    if len(points) != len(coeffs) or not points:
        raise SystemMismatch("need matching nonempty points and coefficients")
    d = points[0].num_images
    if any(p.num_images != d for p in points):
        raise SystemMismatch("points have different numbers of images")
    n = coeffs[0].shape[1]
    acc = np.zeros((n, n))
    for p, a in zip(points, coeffs):
        if a.shape != (p.level, n):
            raise DimensionMismatch(
                f"coefficient shape {a.shape} does not match level {p.level}")
        acc += a.T @ a
    resid = np.linalg.norm(acc - np.eye(n))
    if resid > tol * max(1.0, float(n)):
        raise NotPartitionOfUnity(
            f"sum a_i^T a_i differs from identity by {resid:.3e}")
    images = []
    for j in range(d):
        out = np.zeros((n, n))
        for p, a in zip(points, coeffs):
            out += a.T @ p.images[j] @ a
        images.append(out)
    return NcPoint(n, images)


def complexify_point(system: OperatorSystem, real_images, imag_images,
                     tol=STRUCT_TOL):
    """Pair ``x + iy`` with its realification at level 2n.

    The real parts must carry the generator signs and the imaginary parts
    the opposite signs, so every block ``realify(X_j, Y_j)`` carries the
    sign of ``G_j``.  The returned :class:`NcPoint` at level ``2n`` is the
    membership carrier for the complexified set.
    """
    real_images = [np.asarray(x, dtype=float) for x in real_images]
    imag_images = [np.asarray(y, dtype=float) for y in imag_images]
    if len(real_images) != system.num_generators or \
            len(imag_images) != system.num_generators:
        raise SystemMismatch("image count does not match the system")
    if not real_images:
        raise SystemMismatch("complexify_point needs at least one generator")
    n = real_images[0].shape[0]
    fixed_r, fixed_i = [], []
    for j, (x, y, sign) in enumerate(
            zip(real_images, imag_images, system.signs)):
        xr, _ = _enforce_sign(x, sign, tol, f"real part {j}")
        yi, _ = _enforce_sign(y, -sign, tol, f"imaginary part {j}")
        fixed_r.append(xr)
        fixed_i.append(yi)
    z = ComplexNcPoint(n, fixed_r, fixed_i)
    carrier = NcPoint(2 * n, [realify(x, y) for x, y in zip(fixed_r, fixed_i)])
    return z, carrier


def realify_point(z: ComplexNcPoint) -> NcPoint:
    """Realification of a complex point as a level-2n real point."""
    return NcPoint(2 * z.level,
                   [realify(x, y) for x, y in zip(z.real_part, z.imag_part)])


def realification_shuffle(n):
    """Permutation P with ``realify(x, 0) = P^T (x ⊕ x) P``.

    With the block convention used here the realification of a real point
    is literally the direct sum, so P is the identity; it is recorded (and
    asserted in the tests) rather than silently assumed.
    """
    return np.eye(2 * n)


def random_member(system: OperatorSystem, level, rng, kraus_terms=None) -> NcPoint:
    """Random member of the nc state space at ``level``.

    Draws a random unital completely positive map on the ambient matrix
    algebra in Kraus form and evaluates it on the generators; the result
    is a member by construction.
    """
    m = system.ambient_dim
    r = kraus_terms if kraus_terms is not None else max(1, min(m, level) + 1)
    vs = [rng.standard_normal((m, level)) for _ in range(r)]
    s = sum(v.T @ v for v in vs)
    lam, q = np.linalg.eigh(s)
    root_inv = q @ np.diag(1.0 / np.sqrt(np.maximum(lam, 1e-300))) @ q.T
    vs = [v @ root_inv for v in vs]
    images = [sum(v.T @ g @ v for v in vs) for g in system.generator_matrices]
    return validate_point(system, level, images)
