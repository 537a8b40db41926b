"""Classification of nc points and the boundary machinery built on it.

Maximality is decided through the unique-extension property: the convex
set of ucp extensions to the generated algebra is probed coordinate by
coordinate, and the unique extension (when it exists) is tested for
multiplicativity on all basis pairs.  Purity is decided by the
order-interval ray test, with an exact reducibility shortcut and, when
the system is itself an algebra, an independent minimal-dilation
cross-check.  Maximal dilations are built from a Stinespring
representation of an extension through the generated algebra, retrying
through smaller block sums until the result certifies as maximal.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import basis, sdp, structure
from .errors import CrossCheckMismatch, NotAMember, RankDecisionFailure
from .sdp import DEFAULT_OPTIONS, SolverOptions
from .systems import (ComplexNcPoint, Isometry, NcPoint, OperatorSystem,
                      compress_point, realify_point, validate_point)
from .verdict import Verdict, conjunction, from_measure


# ---------------------------------------------------------------------------
# Maximality via the unique-extension property


@dataclass(frozen=True)
class MaximalityResult:
    verdict: Verdict
    probe: sdp.ProbeResult
    mult_residual: Optional[float]

    @property
    def maximal(self) -> bool:
        return bool(self.verdict.leaning)


def multiplicativity_residual(alg: structure.AlgebraBasis,
                              values: Sequence[np.ndarray],
                              table=None) -> float:
    """Worst deviation of psi(B_i B_j) from psi(B_i) psi(B_j)."""
    if table is None:
        table, _ = structure.product_table(alg)
    worst = 0.0
    for i in range(alg.dim):
        for j in range(alg.dim):
            pred = np.tensordot(table[i, j], np.array(values), axes=(0, 0))
            worst = max(worst, float(np.linalg.norm(
                pred - values[i] @ values[j])))
    return worst


def _require_member(system, point, options):
    mem = sdp.ucp_membership(system, point, options)
    if mem.verdict.holds is False:
        raise NotAMember(
            f"point at level {point.level} is not in the nc state space "
            f"(gap {mem.verdict.measure:.2e})")
    return mem


def is_maximal(system: OperatorSystem, point: NcPoint,
               algebra: Optional[structure.AlgebraBasis] = None,
               options: SolverOptions = DEFAULT_OPTIONS,
               check_member: bool = True) -> MaximalityResult:
    """Unique-extension test for maximality of a member point.

    Non-unique extensions refute maximality outright (witness pair held
    by the probe).  A unique extension is accepted exactly when it is
    multiplicative on all basis pairs of the generated algebra.  The
    combined verdict measure is the worse of the two normalized residuals
    and is indeterminate within a factor ``band`` of 1.
    """
    if check_member:
        _require_member(system, point, options)
    alg = algebra if algebra is not None else structure.generate_algebra(system)
    probe = sdp.extension_set_probe(system, point, alg, options)
    if probe.verdict.holds is False:
        return MaximalityResult(probe.verdict, probe, None)
    res = multiplicativity_residual(alg, probe.witness.values)
    mult_verdict = from_measure(res, options.mult_tol, options.band)
    verdict = conjunction(probe.verdict, mult_verdict)
    return MaximalityResult(verdict, probe, res)


def complex_maximal(system: OperatorSystem, z: ComplexNcPoint,
                    options: SolverOptions = DEFAULT_OPTIONS,
                    check_member: bool = True) -> MaximalityResult:
    """Maximality of x + iy in the complexified set.

    Delegates to the realification: a complex point is maximal exactly
    when its doubled real carrier is maximal in the original set.
    """
    carrier = realify_point(z)
    return is_maximal(system, carrier, options=options,
                      check_member=check_member)


# ---------------------------------------------------------------------------
# Purity


@dataclass(frozen=True)
class PurityResult:
    verdict: Verdict
    deviation: float
    witness_blocks: Optional[Tuple[np.ndarray, ...]]

    @property
    def pure(self) -> bool:
        return bool(self.verdict.leaning)


def _coordinate_frames(system: OperatorSystem, level: int):
    """Sign-respecting coordinates of a map: (matrix in M_m, basis elt)."""
    frames = [(system.identity(), e) for e in basis.sym_basis(level)]
    for g, s in system.generators:
        frames.extend((g, e) for e in basis.signed_basis(level, s))
    return frames


def _map_coordinates(point: NcPoint, system: OperatorSystem):
    coords = [basis.frob(e, np.eye(point.level))
              for e in basis.sym_basis(point.level)]
    for x, s in zip(point.images, system.signs):
        coords.extend(basis.frob(e, x)
                      for e in basis.signed_basis(point.level, s))
    return np.array(coords)


def is_pure(system: OperatorSystem, point: NcPoint,
            options: SolverOptions = DEFAULT_OPTIONS,
            check_member: bool = True,
            cross_check: bool = True) -> PurityResult:
    """Order-interval ray test for purity.

    The interval [0, phi] is realized as pairs of PSD Choi blocks whose
    induced maps sum to phi on the system; every functional annihilating
    the ray {t phi} is extremized over the first block.  A point with a
    reducible image tuple is never pure (exact shortcut).  When the
    system is already an algebra, an independent minimal-dilation
    irreducibility test must agree or :class:`CrossCheckMismatch` is
    raised.
    """
    if check_member:
        _require_member(system, point, options)
    n = point.level
    images = list(point.images) if point.images else [np.eye(n)]
    ctype = structure.commutant_type(images)
    if ctype.kind == structure.REDUCIBLE:
        verdict = Verdict(False, float(ctype.sym_dim), 1.0, options.band,
                          {"reason": "reducible image tuple"})
        return PurityResult(verdict, float("inf"), None)

    frames = _coordinate_frames(system, n)
    ray = _map_coordinates(point, system)
    scale = float(np.linalg.norm(ray))
    ann = basis.null_space(ray.reshape(1, -1))
    threshold = options.pure_tol * max(scale, 1.0)
    verdict = Verdict(True, 0.0, threshold, options.band)
    deviation = 0.0
    witness = None
    if ann.shape[1]:
        m = system.ambient_dim
        dim = m * n
        base = sdp.solve_feasibility(sdp.ucp_extension_problem(system, point),
                                     options)
        if not base.feasible:
            raise NotAMember("purity test needs a member point")
        half = 0.5 * base.witness.blocks[0]
        warm = (half, half)
        rows = []
        for (a, e), r in zip(frames, ray):
            c = sdp.coordinate_matrix(a, e)
            rows.append(((c, c), float(r)))
        rows = tuple(rows)
        verdicts = []
        for k in range(ann.shape[1]):
            weights = ann[:, k]
            obj = sum(w * sdp.coordinate_matrix(a, e)
                      for w, (a, e) in zip(weights, frames))
            for sgn in (+1.0, -1.0):
                v, wit = sdp.banded_probe((dim, dim), rows, (sgn * obj, None),
                                          threshold, options, warm_blocks=warm)
                verdicts.append(v)
                if v.holds is False:
                    deviation = v.measure
                    witness = wit
                    break
            if witness is not None:
                break
        if witness is None:
            borderline = [v for v in verdicts if v.holds is None]
            if borderline:
                worst = max(borderline, key=lambda v: v.measure)
                verdict = Verdict(None, worst.measure, threshold, options.band)
                deviation = worst.measure
            else:
                verdict = Verdict(True, threshold / options.band, threshold,
                                  options.band)
                deviation = verdict.measure
        else:
            verdict = Verdict(False, deviation, threshold, options.band)
    result = PurityResult(verdict, deviation, witness)

    alg = structure.generate_algebra(system)
    if cross_check and alg.dim == alg.v_dim:
        stine = _pinned_stinespring(system, alg, point)
        irr = structure.commutant_type([v for v in stine.rep_values])
        stine_pure = irr.kind != structure.REDUCIBLE
        if verdict.holds is not None and stine_pure != verdict.holds:
            raise CrossCheckMismatch(
                "ray test and minimal-dilation irreducibility disagree",
                first=verdict, second=irr)
    return result


# ---------------------------------------------------------------------------
# Stinespring dilation from a map on an algebra


@dataclass(frozen=True)
class StinespringRep:
    algebra: structure.AlgebraBasis
    rep_values: Tuple[np.ndarray, ...]  # rep of each basis element
    isometry: np.ndarray                # dim x n, columns map input space
    dim: int
    residual: float

    def rep_of(self, mat: np.ndarray) -> np.ndarray:
        coeffs, resid = structure.expand_in_basis(self.algebra, mat)
        if resid > 1e-7 * max(1.0, float(np.linalg.norm(mat))):
            raise ValueError("matrix outside the represented algebra")
        return sum(c * v for c, v in zip(coeffs, self.rep_values))


def gram_stinespring(alg: structure.AlgebraBasis,
                     values: Sequence[np.ndarray], n: int,
                     rank_rtol: float = 1e-10) -> StinespringRep:
    """Minimal Stinespring representation of a cp map given on a basis.

    Builds the Gram matrix of the algebra tensored with the input space
    under the sesquilinear form induced by the map, quotients by its
    kernel, and reads the left-regular action off the product table.  The
    output representation is cyclic, hence minimal.
    """
    d = alg.dim
    table, _ = structure.product_table(alg)
    vals = np.array(values)
    gram = np.zeros((d * n, d * n))
    for i in range(d):
        for j in range(d):
            pij = alg.signs[i] * np.tensordot(table[i, j], vals, axes=(0, 0))
            gram[i * n:(i + 1) * n, j * n:(j + 1) * n] = pij
    gram = 0.5 * (gram + gram.T)
    lam, u = np.linalg.eigh(gram)
    top = float(lam[-1])
    if top <= 0:
        raise RankDecisionFailure("Gram matrix has no positive spectrum")
    keep = lam > rank_rtol * top
    if np.any((lam > 1e-3 * rank_rtol * top) & ~keep):
        raise RankDecisionFailure("Gram rank threshold has no clear gap")
    lam_r = lam[keep]
    u_r = u[:, keep]
    sq = np.sqrt(lam_r)
    t_mat = (u_r * sq).T          # q(v) = diag(sq) U^T v
    t_inv = u_r / sq              # right inverse on the range

    eye_coeffs, _ = structure.expand_in_basis(alg, np.eye(alg.ambient_dim))
    w = t_mat @ np.kron(eye_coeffs.reshape(-1, 1), np.eye(n))

    rep_values = []
    residual = float(np.linalg.norm(w.T @ w - np.eye(n)))
    for i in range(d):
        left = np.zeros((d, d))
        for col in range(d):
            left[:, col] = table[i, col]
        rep = t_mat @ np.kron(left, np.eye(n)) @ t_inv
        rep_values.append(rep)
        residual = max(residual,
                       float(np.linalg.norm(w.T @ rep @ w - values[i])))
    if residual > 1e-7:
        raise RankDecisionFailure(
            f"Stinespring reconstruction residual {residual:.2e}")
    return StinespringRep(alg, tuple(rep_values), w, int(np.sum(keep)),
                          residual)


def _pinned_stinespring(system, alg, point) -> StinespringRep:
    """Stinespring of the point's map when the system is an algebra."""
    vspan = [system.identity()] + list(system.generator_matrices)
    vmat = np.array([basis.vec(v) for v in vspan]).T
    vpinv = np.linalg.pinv(vmat, rcond=1e-12)
    point_vals = [np.eye(point.level)] + list(point.images)
    values = []
    for bmat in alg.basis:
        coeffs = vpinv @ basis.vec(bmat)
        values.append(sum(c * pv for c, pv in zip(coeffs, point_vals)))
    return gram_stinespring(alg, values, point.level)


# ---------------------------------------------------------------------------
# Classification


@dataclass(frozen=True)
class Classification:
    member: bool
    irreducible_real: bool
    irreducible_complex: bool
    pure: bool
    maximal: bool
    extreme: bool
    extreme_in_complexification: bool
    margins: Dict[str, float] = field(compare=False)
    indeterminate: Tuple[str, ...] = ()
    level: int = 0

    def as_dict(self):
        return {
            "member": self.member,
            "irreducible_real": self.irreducible_real,
            "irreducible_complex": self.irreducible_complex,
            "pure": self.pure,
            "maximal": self.maximal,
            "extreme": self.extreme,
            "extreme_in_complexification": self.extreme_in_complexification,
            "margins": dict(self.margins),
            "indeterminate": list(self.indeterminate),
            "level": self.level,
        }


def classify(system: OperatorSystem, point: NcPoint,
             options: SolverOptions = DEFAULT_OPTIONS) -> Classification:
    """Full flag set for a point: membership, irreducibility over R and C,
    purity, maximality, and the derived extreme flags.

    The structural identities extreme = pure and maximal, and extreme in
    the complexification = extreme and complex-irreducible, hold by
    construction.  Verdicts inside the indeterminate band around their
    thresholds are flagged by name instead of being silently booleanized.
    """
    mem = sdp.ucp_membership(system, point, options)
    margins = {"member": mem.verdict.margin}
    indeterminate = []
    if mem.verdict.indeterminate:
        indeterminate.append("member")

    n = point.level
    images = list(point.images) if point.images else [np.eye(n)]
    ctype = structure.commutant_type(images)
    irr_real = ctype.kind != structure.REDUCIBLE
    irr_real_verdict = Verdict(irr_real, 1.0 / max(ctype.margin, 1.0), 1.0,
                               options.band)
    cdim, cmargin = structure.complex_commutant_dim(images, with_margin=True)
    irr_complex = ctype.kind == structure.TYPE_R and cdim == 2
    irr_complex_verdict = Verdict(irr_complex, 1.0 / max(cmargin, 1.0), 1.0,
                                  options.band)
    margins["irreducible_real"] = ctype.margin
    margins["irreducible_complex"] = cmargin

    if mem.verdict.holds is False:
        return Classification(False, irr_real, irr_complex, False, False,
                              False, False, margins, tuple(indeterminate),
                              n)

    maximal = is_maximal(system, point, options=options, check_member=False)
    pure = is_pure(system, point, options=options, check_member=False)
    extreme = conjunction(pure.verdict, maximal.verdict)
    extreme_c = conjunction(extreme, irr_complex_verdict)

    margins["maximal"] = maximal.verdict.margin
    margins["pure"] = pure.verdict.margin
    margins["extreme"] = extreme.margin
    margins["extreme_in_complexification"] = extreme_c.margin
    for name, v in (("maximal", maximal.verdict), ("pure", pure.verdict),
                    ("extreme", extreme),
                    ("extreme_in_complexification", extreme_c)):
        if v.indeterminate:
            indeterminate.append(name)

    return Classification(
        member=bool(mem.verdict.leaning),
        irreducible_real=irr_real,
        irreducible_complex=irr_complex,
        pure=bool(pure.verdict.leaning),
        maximal=bool(maximal.verdict.leaning),
        extreme=bool(extreme.leaning),
        extreme_in_complexification=bool(extreme_c.leaning),
        margins=margins,
        indeterminate=tuple(indeterminate),
        level=n,
    )


# ---------------------------------------------------------------------------
# Maximal dilation


@dataclass(frozen=True)
class DilationResult:
    dilated: NcPoint
    isometry: Isometry
    maximal_certificate: Optional[Classification]
    minimality: bool
    compression_residual: float


def _dilate_through(system, point, blocks, options):
    """Stinespring dilation of the point through a sum of algebra blocks."""
    sizes = [b.size for b in blocks]
    total = sum(sizes)
    offs = np.cumsum([0] + sizes)

    def pi(mat):
        out = np.zeros((total, total))
        for b, o in zip(blocks, offs):
            out[o:o + b.size, o:o + b.size] = b.isometry.T @ mat @ b.isometry
        return out

    gens = [(pi(g), s) for (g, s) in system.generators]
    sub_system = OperatorSystem(total, tuple(
        (g, s) for g, s in gens), label="block-sum")
    problem = sdp.ucp_extension_problem(sub_system, point)
    outcome = sdp.solve_feasibility(problem, options)
    if not outcome.feasible:
        raise NotAMember("no extension through the selected blocks: "
                         + outcome.report)
    choi = outcome.witness.blocks[0]

    alg_mats = [pi(b) for b in
                structure.generate_algebra(system).basis]
    prefix = [np.eye(total)] + [g for g, _ in gens]
    sub_alg = structure.concrete_algebra(alg_mats, prefix)
    values = [sdp.choi_apply(choi, total, point.level, b)
              for b in sub_alg.basis]
    stine = gram_stinespring(sub_alg, values, point.level)
    y_images = [stine.rep_of(g) for g, _ in gens]
    y = validate_point(system, stine.dim, y_images, tol=1e-6)
    return y, stine.isometry


def maximal_dilation(system: OperatorSystem, point: NcPoint,
                     options: SolverOptions = DEFAULT_OPTIONS,
                     rng: Optional[np.random.Generator] = None,
                     full_certificate: bool = True) -> DilationResult:
    """Dilate a member point to a maximal point.

    An extension of the point's map is represented through the generated
    algebra (minimal Stinespring, cyclic by construction).  If the
    candidate fails the unique-extension certificate, the blocks whose
    restrictions are non-maximal are dropped and the dilation is redone
    through the remaining block sum, which always succeeds because the
    quotient by the non-boundary blocks is completely isometric on the
    system.  Already-maximal points return themselves with the identity.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    _require_member(system, point, options)
    alg = structure.generate_algebra(system)

    first = is_maximal(system, point, alg, options, check_member=False)
    if first.verdict.holds:
        cert = classify(system, point, options) if full_certificate else None
        return DilationResult(point, Isometry(np.eye(point.level)), cert,
                              True, 0.0)

    dec = structure.decompose_algebra(alg, rng)
    classes = dec.classes()
    boundary_cache: Dict[int, bool] = {}

    def class_is_boundary(k: int) -> bool:
        if k not in boundary_cache:
            bp = structure.block_point(system, classes[k][0])
            res = is_maximal(system, bp, alg, options, check_member=False)
            boundary_cache[k] = bool(res.verdict.leaning)
        return boundary_cache[k]

    allowed = list(range(len(classes)))
    for _ in range(len(classes) + 1):
        reps = [classes[k][0] for k in allowed]
        y, w = _dilate_through(system, point, reps, options)
        res = is_maximal(system, y, alg, options, check_member=False)
        if res.verdict.holds:
            resid = max(
                float(np.linalg.norm(w.T @ yi @ w - xi))
                for yi, xi in zip(y.images, point.images)) if point.images else 0.0
            cert = classify(system, y, options) if full_certificate else None
            stacked = _rep_col(system, y, w)
            minimal = basis.matrix_rank(stacked) == y.level
            return DilationResult(y, Isometry(w), cert, minimal, resid)
        bad = [k for k in allowed if not class_is_boundary(k)]
        if not bad:
            raise CrossCheckMismatch(
                "dilation candidate failed to certify although every "
                "remaining block is boundary", first=res, second=allowed)
        allowed = [k for k in allowed if k not in bad]
        if not allowed:
            raise CrossCheckMismatch("no boundary blocks remain",
                                     first=res, second=bad)
    raise CrossCheckMismatch("dilation refinement did not terminate")


def _rep_col(system, y, w):
    """Columns spanning the cyclic subspace of the dilated representation."""
    sys_y = OperatorSystem(y.level, tuple(
        (img, s) for img, s in zip(y.images, system.signs)), label=None)
    alg_y = structure.generate_algebra(sys_y)
    cols = [b @ w for b in alg_y.basis]
    return np.hstack(cols)


# ---------------------------------------------------------------------------
# Boundary representations, Shilov ideal, and the C*-envelope


@dataclass(frozen=True)
class BoundaryBlock:
    size: int
    division_type: str
    class_index: int
    multiplicity: int
    boundary: bool
    isometry: np.ndarray


@dataclass(frozen=True)
class EnvelopeReport:
    blocks: Tuple[BoundaryBlock, ...]
    envelope_generators: Tuple[np.ndarray, ...]
    envelope_dim: int
    shilov_ideal_blocks: Tuple[int, ...]
    dilation_signature: Tuple[Tuple[int, str], ...]

    def envelope_signature(self):
        return tuple(sorted((b.size, b.division_type)
                            for b in self.blocks if b.boundary))


def boundary_representations(system: OperatorSystem,
                             options: SolverOptions = DEFAULT_OPTIONS,
                             rng: Optional[np.random.Generator] = None
                             ) -> Tuple[BoundaryBlock, ...]:
    """Flag each irreducible block of the generated algebra as boundary
    (its restriction to the system is maximal) or not."""
    rng = rng if rng is not None else np.random.default_rng(0)
    alg = structure.generate_algebra(system)
    dec = structure.decompose_algebra(alg, rng)
    out = []
    flags: Dict[int, bool] = {}
    for group in dec.classes():
        rep = group[0]
        bp = structure.block_point(system, rep)
        res = is_maximal(system, bp, alg, options, check_member=False)
        flags[rep.class_index] = bool(res.verdict.leaning)
    for group in dec.classes():
        rep = group[0]
        out.append(BoundaryBlock(rep.size, rep.division_type,
                                 rep.class_index, rep.multiplicity,
                                 flags[rep.class_index], rep.isometry))
    return tuple(out)


def shilov_and_envelope(system: OperatorSystem,
                        options: SolverOptions = DEFAULT_OPTIONS,
                        rng: Optional[np.random.Generator] = None
                        ) -> EnvelopeReport:
    """Shilov ideal and C*-envelope, cross-checked by two routes.

    Route one sums the boundary blocks (the Shilov ideal is the sum of
    the non-boundary ones).  Route two takes a maximal dilation of the
    tautological point and decomposes the algebra its image generates;
    the two block multisets must agree or :class:`CrossCheckMismatch` is
    raised with both datasets attached.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    blocks = boundary_representations(system, options, rng)
    bdry = [b for b in blocks if b.boundary]
    if not bdry:
        raise CrossCheckMismatch("no boundary blocks found", first=blocks)
    total = sum(b.size for b in bdry)
    offs = np.cumsum([0] + [b.size for b in bdry])
    env_gens = []
    for g in system.generator_matrices:
        out = np.zeros((total, total))
        for b, o in zip(bdry, offs):
            out[o:o + b.size, o:o + b.size] = b.isometry.T @ g @ b.isometry
        env_gens.append(out)

    taut = system.tautological_point()
    dil = maximal_dilation(system, taut, options, rng, full_certificate=False)
    sys_y = OperatorSystem(dil.dilated.level, tuple(
        (img, s) for img, s in zip(dil.dilated.images, system.signs)))
    alg_y = structure.generate_algebra(sys_y)
    dec_y = structure.decompose_algebra(alg_y, rng)
    sig_dilation = dec_y.class_signature()
    sig_boundary = tuple(sorted((b.size, b.division_type) for b in bdry))
    if sig_dilation != sig_boundary:
        raise CrossCheckMismatch(
            "boundary-block route and dilation route disagree",
            first=sig_boundary, second=sig_dilation)

    shilov = tuple(b.class_index for b in blocks if not b.boundary)
    return EnvelopeReport(blocks, tuple(env_gens), total, shilov,
                          sig_dilation)
