"""Dense revised simplex for standard-form linear programs.

Solves min c'x subject to Ax = b, x >= 0 with an explicitly maintained basis
inverse.  Entering-variable selection is Dantzig pricing with lowest-index tie
breaking; a long run of degenerate pivots switches to Bland's lowest-index
rule (which cannot cycle) until the objective moves again, and
``pivot="bland"`` forces the pure Bland rule throughout.  The leaving row
takes the smallest basic-variable index among ratio-test ties.

Margin-type problems start at a fully degenerate vertex, so phase two can
optionally perturb the right-hand side along the starting basis (every basic
variable becomes slightly positive, which removes almost all degenerate
ties).  The perturbed run only chooses the basis: the result is re-verified
against the exact right-hand side, with a dual-simplex cleanup in the rare
case the chosen basis is not exactly feasible.  Optimality of the final basis
is always certified on exact data.

Problems at the scale used here (hundreds of rows, a few thousand columns)
need no sparse machinery, and the fixed tie-breaking makes runs deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-9
STALL_LIMIT = 400
REFACTOR_EVERY = 150
PERTURB_SCALE = 1e-7


class SimplexError(RuntimeError):
    """Iteration limit or numerical breakdown inside the simplex."""


@dataclass
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray
    objective: float
    duals: np.ndarray
    basis: list[int]
    iterations: int


def _pivot_update(binv: np.ndarray, d: np.ndarray, l: int) -> None:
    binv[l, :] /= d[l]
    mask = d.copy()
    mask[l] = 0.0
    binv -= np.outer(mask, binv[l, :])


def _primal_phase(A, b, c, basis, binv, pivot, max_iter, allowed):
    """Primal iterations until optimality/unboundedness.  Returns
    (status, binv, iterations).

    Pricing normalizes reduced costs by static column norms, which behaves
    like a cheap steepest-edge approximation on margin-type problems.
    """
    m, n = A.shape
    colnorm = np.sqrt(np.einsum("ij,ij->j", A, A)) + 1e-12
    stall = 0
    use_bland = pivot == "bland"
    for it in range(1, max_iter + 1):
        y = c[basis] @ binv
        r = c - y @ A
        r[basis] = 0.0
        cand = np.flatnonzero((r < -PIVOT_TOL) & allowed)
        if cand.size == 0:
            return "optimal", binv, it
        j = int(cand[0]) if use_bland else int(cand[np.argmin(r[cand] / colnorm[cand])])
        d = binv @ A[:, j]
        pos = np.flatnonzero(d > PIVOT_TOL)
        if pos.size == 0:
            return "unbounded", binv, it
        xb = binv @ b
        ratios = xb[pos] / d[pos]
        rmin = ratios.min()
        if use_bland:
            # Bland needs the smallest basic-variable index among exact ties
            ties = pos[ratios <= rmin + 1e-12]
            tie_vars = [basis[i] for i in ties]
            l = int(ties[int(np.argmin(tie_vars))])
        else:
            l = int(pos[int(np.argmin(ratios))])
        _pivot_update(binv, d, l)
        basis[l] = j
        if it % REFACTOR_EVERY == 0:
            binv = np.linalg.inv(A[:, basis])
        if pivot == "auto":
            if rmin > FEAS_TOL:  # the step moved the vertex
                stall = 0
                use_bland = False
            else:
                stall += 1
                if stall >= STALL_LIMIT:
                    use_bland = True
    raise SimplexError(f"simplex iteration limit {max_iter} exceeded (cycling guard)")


def _dual_cleanup(A, b, c, basis, binv, max_iter):
    """Dual simplex from a dual-feasible basis until the exact RHS is primal
    feasible.  Used after a perturbed run; typically performs zero pivots."""
    m, n = A.shape
    for it in range(max_iter):
        xb = binv @ b
        l = int(np.argmin(xb))
        if xb[l] >= -FEAS_TOL:
            return binv, it
        y = c[basis] @ binv
        r = c - y @ A
        w = binv[l, :] @ A
        candidates = np.flatnonzero(w < -PIVOT_TOL)
        candidates = candidates[np.isin(candidates, basis, invert=True)]
        if candidates.size == 0:
            raise SimplexError("dual cleanup found the exact problem infeasible")
        ratios = r[candidates] / (-w[candidates])
        j = int(candidates[int(np.argmin(ratios))])
        d = binv @ A[:, j]
        _pivot_update(binv, d, l)
        basis[l] = j
    raise SimplexError("dual cleanup iteration limit exceeded")


def solve_standard_form(
    A: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    basis: list[int] | None = None,
    pivot: str = "auto",
    max_iter: int | None = None,
    perturb: bool = True,
) -> SimplexResult:
    """Solve min c'x, Ax = b, x >= 0.

    ``basis`` may name a known feasible starting basis; otherwise phase one
    runs with artificial variables.  ``pivot`` is "auto" or "bland".
    """
    A = np.ascontiguousarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if max_iter is None:
        max_iter = 300 * (m + n) + 20000
    total = 0

    if basis is None:
        flip = b < 0
        A = A.copy()
        A[flip] *= -1.0
        b = np.abs(b)
        A_ext = np.hstack([A, np.eye(m)])
        c1 = np.zeros(n + m)
        c1[n:] = 1.0
        basis = list(range(n, n + m))
        binv = np.eye(m)
        allowed = np.ones(n + m, dtype=bool)
        allowed[n:] = False  # artificials may leave but never re-enter
        status, binv, it = _primal_phase(A_ext, b, c1, basis, binv, pivot, max_iter, allowed)
        total += it
        phase1_obj = float(c1[basis] @ (binv @ b))
        if status != "optimal" or phase1_obj > 1e-7:
            duals = c1[basis] @ binv
            return SimplexResult("infeasible", np.zeros(n), phase1_obj, duals, basis, total)
        keep = np.ones(m, dtype=bool)
        for row in range(m):
            if basis[row] >= n:  # drive leftover artificials out
                d_row = binv[row, :] @ A
                nz = np.flatnonzero(np.abs(d_row) > 1e-7)
                if nz.size == 0:
                    keep[row] = False
                    continue
                j = int(nz[0])
                d = binv @ A[:, j]
                _pivot_update(binv, d, row)
                basis[row] = j
        if not np.all(keep):
            rows = np.flatnonzero(keep)
            A = A[rows]
            b = b[rows]
            basis = [basis[i] for i in rows]
            m = A.shape[0]
        binv = np.linalg.inv(A[:, basis])
    else:
        basis = list(basis)
        binv = np.linalg.inv(A[:, basis])

    allowed = np.ones(n, dtype=bool)
    b_work = b
    if perturb:
        # deterministic pseudo-random perturbation along the starting basis:
        # every basic variable becomes strictly positive and generic, which
        # removes almost all degenerate ties on margin-type problems
        g = np.random.Generator(np.random.Philox(key=0x5EED_0F_51_47))
        eps = PERTURB_SCALE * (1.0 + g.random(m))
        b_work = b + A[:, basis] @ eps
    status, binv, it = _primal_phase(A, b_work, c, basis, binv, pivot, max_iter, allowed)
    total += it
    if status == "unbounded":
        return SimplexResult("unbounded", np.zeros(n), -np.inf, np.zeros(m), basis, total)
    if perturb:
        binv, it = _dual_cleanup(A, b, c, basis, binv, max_iter)
        total += it
        # a dual pivot can open new primal candidates; re-run (exact b) to be sure
        status, binv, it = _primal_phase(A, b, c, basis, binv, pivot, max_iter, allowed)
        total += it
        if status == "unbounded":
            return SimplexResult("unbounded", np.zeros(n), -np.inf, np.zeros(m), basis, total)

    xb = binv @ b
    x = np.zeros(n)
    x[basis] = np.maximum(xb, 0.0)
    duals = c[basis] @ binv
    return SimplexResult("optimal", x, float(c @ x), duals, basis, total)
