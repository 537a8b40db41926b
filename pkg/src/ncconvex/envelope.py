"""Noncommutative polynomial functions and their convex envelopes.

Functions are symmetrized nc polynomials: words in the generators with
real coefficients, evaluated by matrix products and symmetrized.  This
guarantees gradedness, orthogonal equivariance, and respect for direct
sums by construction.  The convex envelope at a point is scalarized by a
PSD direction and evaluated by minimizing over representing maps on a
finite atom family, one PSD Choi block per atom.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import basis, extremal, sdp, structure
from .errors import IndexOutOfRange, MinorantViolated, NotAMember
from .sdp import DEFAULT_OPTIONS, SolverOptions
from .systems import (NcPoint, OperatorSystem, compress_point, random_member,
                      realify, realify_point, u_compress, validate_point,
                      w_balance_residual)

CONV_TOL = 1e-7
DEFAULT_TRIALS = 200


@dataclass(frozen=True)
class NcPolynomial:
    """Symmetrized nc polynomial sum_t c_t X_{w_1} ... X_{w_k}.

    Words are sequences of 0-based generator indices; the empty word is
    the identity.  Evaluation symmetrizes, so values are symmetric at
    every point.
    """

    terms: Tuple[Tuple[Tuple[int, ...], float], ...]
    label: Optional[str] = None

    def __init__(self, terms, label=None):
        canon = []
        for word, coeff in terms:
            canon.append((tuple(int(i) for i in word), float(coeff)))
        object.__setattr__(self, "terms", tuple(canon))
        object.__setattr__(self, "label", label)

    @property
    def max_index(self) -> int:
        return max((max(w) for w, _ in self.terms if w), default=-1)

    def __call__(self, point: NcPoint) -> np.ndarray:
        return eval_poly(self, point)


def affine_poly(coeffs: Sequence[float], label=None) -> NcPolynomial:
    """a_0 I + sum_j a_j X_j from plain coefficients."""
    terms = [((), float(coeffs[0]))]
    terms += [((j,), float(c)) for j, c in enumerate(coeffs[1:])]
    return NcPolynomial(terms, label=label)


def eval_poly(f: NcPolynomial, point: NcPoint) -> np.ndarray:
    """Evaluate by matrix products and symmetrize."""
    n = point.level
    if f.max_index >= point.num_images:
        raise IndexOutOfRange(
            f"word uses generator {f.max_index}, point has "
            f"{point.num_images} images")
    acc = np.zeros((n, n))
    for word, coeff in f.terms:
        cur = np.eye(n)
        for idx in word:
            cur = cur @ point.images[idx]
        acc += coeff * cur
    return 0.5 * (acc + acc.T)


class AtomSet:
    """Finite family of member points with cached function values."""

    def __init__(self, system: OperatorSystem, atoms: Sequence[NcPoint],
                 options: SolverOptions = DEFAULT_OPTIONS, verify: bool = True):
        self.system = system
        self.atoms = tuple(atoms)
        if verify:
            for i, a in enumerate(self.atoms):
                mem = sdp.ucp_membership(system, a, options)
                if mem.verdict.holds is False:
                    raise NotAMember(f"atom {i} is not a member")
        self._cache: Dict[NcPolynomial, Tuple[np.ndarray, ...]] = {}

    def values(self, f: NcPolynomial) -> Tuple[np.ndarray, ...]:
        if f not in self._cache:
            self._cache[f] = tuple(eval_poly(f, a) for a in self.atoms)
        return self._cache[f]

    def including(self, point: NcPoint) -> "AtomSet":
        if any(a.close_to(point) for a in self.atoms):
            return self
        out = AtomSet(self.system, self.atoms + (point,), verify=False)
        return out


# ---------------------------------------------------------------------------
# Sampled convexity


@dataclass(frozen=True)
class ConvexityReport:
    convex_on_samples: bool
    worst_residual: float
    witness_point: Optional[NcPoint]
    witness_isometry: Optional[np.ndarray]
    trials: int


def _sample_members(system, trials, rng, max_level=3, with_dilations=True):
    """Random members: Kraus-sampled maps, nc combinations, dilations."""
    out = []
    levels = rng.integers(1, max_level + 1, size=trials)
    dilate_every = max(5, trials // 10)
    for t in range(trials):
        n = int(levels[t])
        x = random_member(system, n, rng)
        if with_dilations and t % dilate_every == 0 and system.num_generators:
            try:
                y, _ = extremal._dilate_through(
                    system, x,
                    _all_blocks(system, rng), DEFAULT_OPTIONS)
                x = y
            except Exception:
                pass
        out.append(x)
    return out


def _all_blocks(system, rng):
    alg = structure.generate_algebra(system)
    dec = structure.decompose_algebra(alg, rng)
    return [g[0] for g in dec.classes()]


def is_convex_sampled(f: NcPolynomial, system: OperatorSystem,
                      trials: int = DEFAULT_TRIALS, seed: int = 0,
                      conv_tol: float = CONV_TOL,
                      max_level: int = 3) -> ConvexityReport:
    """Sampled test of the compression inequality
    ``f(a^T x a) <= a^T f(x) a`` over random members and isometries.

    Members are drawn as random Kraus-form ucp images plus occasional
    dilation outputs; the verdict is the sign of the worst eigenvalue
    residual against ``conv_tol``.
    """
    rng = np.random.default_rng(seed)
    worst = np.inf
    witness = (None, None)
    members = _sample_members(system, trials, rng, max_level=max_level)
    for x in members:
        n = x.level
        k = int(rng.integers(1, n + 1))
        alpha = basis.random_isometry(n, k, rng)
        fx = eval_poly(f, x)
        fcomp = eval_poly(f, compress_point(x, alpha))
        gap = alpha.T @ fx @ alpha - fcomp
        lo = float(np.linalg.eigvalsh(gap)[0])
        if lo < worst:
            worst = lo
            witness = (x, alpha)
    ok = worst >= -conv_tol
    return ConvexityReport(ok, worst,
                           None if ok else witness[0],
                           None if ok else witness[1], trials)


# ---------------------------------------------------------------------------
# Complexified evaluation and convexity


def complexify_function_eval(f: NcPolynomial, system: OperatorSystem,
                             z, tol=1e-9):
    """Evaluate the complexified function at x + iy via the realification.

    Word evaluation commutes with the doubling embedding, so the value at
    the realified point is W-balanced; it is compressed back to a
    (real, imaginary) pair.
    """
    carrier = realify_point(z)
    val = eval_poly(f, carrier)
    resid = w_balance_residual(val)
    if resid > tol * max(1.0, float(np.linalg.norm(val))):
        raise AssertionError(
            f"function value lost W-balance ({resid:.2e}); "
            "this contradicts word evaluation commuting with doubling")
    return u_compress(val, tol=tol)


def _complex_isometry(n, k, rng):
    """Realified random complex isometry as a 2n x 2k balanced matrix."""
    a = rng.standard_normal((n, k))
    b = rng.standard_normal((n, k))
    c = np.block([[a, -b], [b, a]])
    s = c.T @ c
    lam, q = np.linalg.eigh(s)
    root_inv = q @ np.diag(1.0 / np.sqrt(np.maximum(lam, 1e-300))) @ q.T
    return c @ root_inv  # balance is preserved by balanced right factors


def _random_balanced_member(system, level, rng, kraus_terms=3):
    """Member of the doubled level whose images are W-balanced."""
    m = system.ambient_dim
    vs = []
    for _ in range(kraus_terms):
        a = rng.standard_normal((m, level))
        b = rng.standard_normal((m, level))
        vs.append(np.block([[a, -b], [b, a]]))
    s = sum(v.T @ v for v in vs)
    lam, q = np.linalg.eigh(s)
    root_inv = q @ np.diag(1.0 / np.sqrt(np.maximum(lam, 1e-300))) @ q.T
    vs = [v @ root_inv for v in vs]
    images = []
    for g in system.generator_matrices:
        gd = np.block([[g, np.zeros_like(g)], [np.zeros_like(g), g]])
        images.append(sum(v.T @ gd @ v for v in vs))
    return validate_point(system, 2 * level, images)


def is_convex_complexified_sampled(f: NcPolynomial, system: OperatorSystem,
                                   trials: int = DEFAULT_TRIALS, seed: int = 0,
                                   conv_tol: float = CONV_TOL,
                                   max_level: int = 2) -> ConvexityReport:
    """Sampled convexity of the complexified function, in realified form.

    Complex points and complex isometries are drawn through their
    doubled real pictures; the compression inequality is checked on the
    balanced matrices, which is equivalent to the complex statement.
    """
    rng = np.random.default_rng(seed)
    worst = np.inf
    witness = (None, None)
    for _ in range(trials):
        n = int(rng.integers(1, max_level + 1))
        x = _random_balanced_member(system, n, rng)
        k = int(rng.integers(1, n + 1))
        beta = _complex_isometry(n, k, rng)
        fx = eval_poly(f, x)
        fcomp = eval_poly(f, compress_point(x, beta))
        gap = beta.T @ fx @ beta - fcomp
        lo = float(np.linalg.eigvalsh(gap)[0])
        if lo < worst:
            worst = lo
            witness = (x, beta)
    ok = worst >= -conv_tol
    return ConvexityReport(ok, worst,
                           None if ok else witness[0],
                           None if ok else witness[1], trials)


# ---------------------------------------------------------------------------
# Convex envelope by representing-map optimization


@dataclass(frozen=True)
class EnvelopeResult:
    value: float
    direction: np.ndarray
    witness_blocks: Tuple[np.ndarray, ...]
    atoms_used: Tuple[NcPoint, ...]
    gap_to_f: float
    bracket: Tuple[Tuple[float, bool, bool], ...] = field(compare=False,
                                                          default=())


def _check_direction(h, n):
    h = np.asarray(h, dtype=float)
    if h.shape != (n, n):
        raise ValueError(f"direction shape {h.shape}, expected ({n}, {n})")
    h = 0.5 * (h + h.T)
    if float(np.linalg.eigvalsh(h)[0]) < -1e-10:
        raise ValueError("direction must be PSD")
    return h


def convex_envelope_value(f: NcPolynomial, x: NcPoint, atoms: AtomSet,
                          h: Optional[np.ndarray] = None,
                          options: SolverOptions = DEFAULT_OPTIONS,
                          augment_dilation: bool = False,
                          rng: Optional[np.random.Generator] = None
                          ) -> EnvelopeResult:
    """Scalarized envelope value min <H, mu(f)> over representing maps.

    The minimization runs over ucp maps on the direct sum of the atom
    algebras with barycenter ``x``; the point itself is always appended
    to the atom family so the trivial representing map exists, and a
    maximal dilation of ``x`` can optionally be appended as well (it can
    only lower the value).
    """
    n = x.level
    h = _check_direction(np.eye(n) if h is None else h, n)
    atom_set = atoms.including(x)
    if augment_dilation:
        rng = rng if rng is not None else np.random.default_rng(0)
        dil = extremal.maximal_dilation(atom_set.system, x, options, rng,
                                        full_certificate=False)
        atom_set = atom_set.including(dil.dilated)
    members = atom_set.atoms
    fvals = atom_set.values(f)
    base = sdp.hull_problem(atom_set.system, members, x)
    objective = tuple(np.kron(fv, h) for fv in fvals)
    problem = sdp.SdpProblem(base.block_dims, base.constraints, objective)
    out = sdp.optimize_linear(problem, options)
    fx = eval_poly(f, x)
    gap = basis.frob(h, fx) - out.value
    return EnvelopeResult(out.value, h, out.witness.blocks, members, gap,
                          out.bracket)


def jensen_check(f: NcPolynomial, x: NcPoint,
                 result: EnvelopeResult) -> float:
    """Residual <H, f(x)> - value; must be <= opt_tol for convex f."""
    return float(result.gap_to_f)


@dataclass(frozen=True)
class MinorantReport:
    valid: bool
    worst_violation: float
    bound: float
    envelope_value: float
    slack: float


def affine_minorant_check(coeffs: Sequence[float], f: NcPolynomial,
                          x: NcPoint, atoms: AtomSet,
                          result: EnvelopeResult,
                          samples: Sequence[NcPoint] = (),
                          conv_tol: float = CONV_TOL,
                          opt_tol: float = 1e-6) -> MinorantReport:
    """One-sided weak-duality certificate from an affine minorant.

    The affine function a(z) = a_0 I + sum_j a_j Z_j is verified to sit
    below f on every atom and every extra sample; the certified bound
    <H, a(x)> can then not exceed the envelope value by more than
    ``opt_tol``.  Raises :class:`MinorantViolated` when the candidate
    exceeds f at a checked point.
    """
    a = affine_poly(coeffs)
    worst = 0.0
    for y in tuple(atoms.atoms) + tuple(samples):
        gap = eval_poly(f, y) - eval_poly(a, y)
        lo = float(np.linalg.eigvalsh(gap)[0])
        worst = min(worst, lo) if worst < 0 else min(0.0, lo)
        if lo < -conv_tol:
            raise MinorantViolated(
                f"candidate exceeds the function by {-lo:.3e} at a sample")
    bound = basis.frob(result.direction, eval_poly(a, x))
    slack = result.value - bound
    return MinorantReport(slack >= -opt_tol, worst, bound, result.value,
                          slack)


# ---------------------------------------------------------------------------
# Complexified envelope (desk form): complex Choi blocks encoded as
# W-balanced realified PSD blocks


def _complex_rows(a, e):
    """Realified coefficient matrices of Re and Im of <a (x) e, C_c>."""
    k = np.kron(a, e)
    z = np.zeros_like(k)
    re_mat = realify(k, z)
    im_mat = -realify(z, k)
    return (0.25 * (re_mat + re_mat.T), 0.25 * (im_mat + im_mat.T))


def _balance_rows(dim_half):
    """Rows forcing W C W^T = C on a 2*dim_half block."""
    w = np.block([[np.zeros((dim_half, dim_half)), -np.eye(dim_half)],
                  [np.eye(dim_half), np.zeros((dim_half, dim_half))]])
    rows = []
    for e in basis.sym_basis(2 * dim_half):
        rows.append(w.T @ e @ w - e)
    return rows


def convex_envelope_value_complexified(
        f: NcPolynomial, x: NcPoint, atoms: AtomSet,
        h: Optional[np.ndarray] = None,
        options: SolverOptions = DEFAULT_OPTIONS) -> float:
    """Envelope value at x + i0 over the complexified atom family.

    Representing maps are complex ucp maps on the direct sum of the
    complexified atom algebras; their Choi matrices are encoded as
    W-balanced realified PSD blocks with complex unitality and
    barycenter rows, and the real part of the scalarized value is
    minimized.  Agreement with the real envelope (within solver
    tolerances) is the desk form of envelope/complexification
    commutation.
    """
    n = x.level
    h = _check_direction(np.eye(n) if h is None else h, n)
    atom_set = atoms.including(x)
    members = atom_set.atoms
    fvals = atom_set.values(f)
    dims = tuple(2 * a.level * n for a in members)
    nblocks = len(members)

    def only(block_idx, mat):
        coeffs = [None] * nblocks
        coeffs[block_idx] = mat
        return tuple(coeffs)

    rows = []
    # per-block balance of the complex Choi encoding
    for bi, a in enumerate(members):
        for r in _balance_rows(a.level * n):
            rows.append((only(bi, r), 0.0))
    # complex unitality: sum_i phi_i(I) = I_n
    for p in range(n):
        for q in range(p, n):
            e = np.zeros((n, n))
            e[p, q] = 1.0
            target_re = 1.0 if p == q else 0.0
            re_coeffs, im_coeffs = [], []
            for a in members:
                re_c, im_c = _complex_rows(np.eye(a.level), e)
                re_coeffs.append(re_c)
                im_coeffs.append(im_c)
            rows.append((tuple(re_coeffs), target_re))
            rows.append((tuple(im_coeffs), 0.0))
    # complex barycenter: sum_i phi_i(Y_j + i0) = X_j + i0
    for j in range(x.num_images):
        for p in range(n):
            for q in range(n):
                e = np.zeros((n, n))
                e[p, q] = 1.0
                re_coeffs, im_coeffs = [], []
                for a in members:
                    re_c, im_c = _complex_rows(a.images[j], e)
                    re_coeffs.append(re_c)
                    im_coeffs.append(im_c)
                rows.append((tuple(re_coeffs), float(x.images[j][p, q])))
                rows.append((tuple(im_coeffs), 0.0))

    objective = []
    for fv in fvals:
        re_c, _ = _complex_rows(fv, h)
        objective.append(re_c)  # Re <f(y) (x) H, C_c>
    problem = sdp.SdpProblem(dims, tuple(rows), tuple(objective))
    out = sdp.optimize_linear(problem, options)
    return float(out.value)


# ---------------------------------------------------------------------------
# Representing maps as reusable objects (separation-property testing)


def representing_map(system: OperatorSystem, atoms: Sequence[NcPoint],
                     x: NcPoint, objective_blocks=None,
                     options: SolverOptions = DEFAULT_OPTIONS):
    """One representing map of ``x`` over the atoms, as Choi blocks.

    With an objective the returned map is an extremizer, which is how
    distinct representing maps of the same point are produced for the
    separation tests.
    """
    base = sdp.hull_problem(system, atoms, x)
    if objective_blocks is None:
        outcome = sdp.solve_feasibility(base, options)
        if not outcome.feasible:
            raise NotAMember("no representing map over these atoms")
        return outcome.witness.blocks
    problem = sdp.SdpProblem(base.block_dims, base.constraints,
                             tuple(objective_blocks))
    return sdp.optimize_linear(problem, options).witness.blocks


def apply_representing(blocks: Sequence[np.ndarray],
                       atoms: Sequence[NcPoint], x_level: int,
                       f: NcPolynomial) -> np.ndarray:
    """mu(f) = sum_i phi_i(f(y_i)) for Choi-block representing maps."""
    out = np.zeros((x_level, x_level))
    for c, a in zip(blocks, atoms):
        out += sdp.choi_apply(c, a.level, x_level, eval_poly(f, a))
    return out
