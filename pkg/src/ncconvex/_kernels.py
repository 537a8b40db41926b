"""Hot inner loops of the semidefinite feasibility engine.

The only genuinely hot path in the package is the alternating projection
iteration between the positive-semidefinite cone (blockwise eigenvalue
clipping) and an affine subspace (cached pseudo-inverse projector).  The
loop is written once in plain numpy and jitted through
:func:`ncconvex._accel.maybe_jit`; ``dykstra_numpy`` keeps the un-jitted
version importable for the fallback path and for benchmarking.

Status codes returned by the kernel:

* ``0`` feasible: the affine-exact iterate is within ``feas_tol`` of the
  cone (in Frobenius norm);
* ``1`` stalled: the cone/affine gap improved by less than a relative
  ``stall_rel`` over a full window; the caller classifies the stall by
  the size of the remaining gap;
* ``2`` iteration cap reached with neither verdict.
"""

import numpy as np

from ._accel import NUMBA_ENABLED, maybe_jit

STATUS_FEASIBLE = 0
STATUS_STALLED = 1
STATUS_MAXITER = 2


def _psd_project(w, y, dims, offs):
    # Blockwise projection onto the PSD cone; symmetrizes first so the
    # eigendecomposition is well posed even after round-off drift.
    for bi in range(dims.shape[0]):
        d = dims[bi]
        o = offs[bi]
        block = w[o:o + d * d].copy().reshape(d, d)
        block = 0.5 * (block + block.T)
        lam, vec = np.linalg.eigh(block)
        for i in range(d):
            if lam[i] < 0.0:
                lam[i] = 0.0
        proj = (vec * lam) @ vec.T
        y[o:o + d * d] = proj.ravel()
    return y


def _dykstra_loop(v, p, dims, offs, A, Apinv, b, feas_tol, max_iter,
                  stall_window, stall_rel):
    # v must satisfy the affine constraints on entry (caller projects).
    # p is the Dykstra correction for the cone step; the affine step needs
    # no correction because the subspace projection is idempotent affine.
    y = np.empty_like(v)
    gap = 1.0e300
    status = STATUS_MAXITER
    iters = 0
    cur_min = 1.0e300
    prev_min = 1.0e300
    for it in range(max_iter):
        iters = it + 1
        w = v + p
        y = _psd_project(w, y, dims, offs)
        p = w - y
        r = A @ y - b
        v = y - Apinv @ r
        diff = y - v
        gap = np.sqrt(np.dot(diff, diff))
        if gap <= feas_tol:
            status = STATUS_FEASIBLE
            break
        if gap < cur_min:
            cur_min = gap
        if iters % stall_window == 0:
            if cur_min > (1.0 - stall_rel) * prev_min:
                status = STATUS_STALLED
                gap = cur_min
                break
            prev_min = cur_min
            cur_min = 1.0e300
    return status, v, p, gap, iters


dykstra_numpy = _dykstra_loop

if NUMBA_ENABLED:
    from numba import njit

    _psd_project_jit = njit(cache=True)(_psd_project)

    @njit(cache=True)
    def dykstra(v, p, dims, offs, A, Apinv, b, feas_tol, max_iter,
                stall_window, stall_rel):
        y = np.empty_like(v)
        gap = 1.0e300
        status = STATUS_MAXITER
        iters = 0
        cur_min = 1.0e300
        prev_min = 1.0e300
        for it in range(max_iter):
            iters = it + 1
            w = v + p
            y = _psd_project_jit(w, y, dims, offs)
            p = w - y
            r = A @ y - b
            v = y - Apinv @ r
            diff = y - v
            gap = np.sqrt(np.dot(diff, diff))
            if gap <= feas_tol:
                status = STATUS_FEASIBLE
                break
            if gap < cur_min:
                cur_min = gap
            if iters % stall_window == 0:
                if cur_min > (1.0 - stall_rel) * prev_min:
                    status = STATUS_STALLED
                    gap = cur_min
                    break
                prev_min = cur_min
                cur_min = 1.0e300
        return status, v, p, gap, iters
else:
    dykstra = _dykstra_loop
