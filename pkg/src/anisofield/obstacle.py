"""Solvers for the box-constrained problems arising in every time step.

Two entry points:

* :func:`solve_obstacle` handles the symmetric obstacle problem
  (A x - b) . (chi - x) >= 0 for all chi in [-1, 1]^n with A SPD, via
  projected Gauss-Seidel sweeps.  Once the active set settles, the
  inactive equations are solved directly (one sparse factorization per
  active-set guess), which drives the KKT residual to solver precision
  regardless of the conditioning of A.

* :func:`solve_coupled_ch` handles the coupled saddle-point step of the
  conserved schemes: a lumped mass equation for (U, W) together with the
  box-constrained variational inequality for U, solved by a primal
  active-set loop with sparse direct subsolves.

Both are deterministic: fixed inputs and sweep order give bit-identical
results.  Convergence is measured by the componentwise KKT violation
(stationarity at inactive nodes, multiplier sign at active nodes).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "ViSolution",
    "CoupledStats",
    "kkt_violation",
    "pattern_coloring",
    "solve_obstacle",
    "solve_coupled_ch",
]


@dataclass
class ViSolution:
    """Result of a box-constrained solve.

    ``solution`` lies in [-1, 1]^n by construction, ``multiplier`` holds
    the complementarity witness (nonnegative at correctly active nodes),
    ``residual`` is the maximum KKT violation and ``iterations`` counts
    Gauss-Seidel sweeps plus direct polish solves.
    """

    solution: np.ndarray
    multiplier: np.ndarray
    iterations: int
    residual: float
    converged: bool


@dataclass
class CoupledStats:
    """Statistics of one coupled Cahn-Hilliard solve."""

    iterations: int
    residual: float
    converged: bool
    mobility_regularized: bool = False


def kkt_violation(residual, x):
    """Componentwise KKT violation of the box VI at a feasible point.

    At interior nodes the stationarity residual must vanish; at x_j = +1
    the residual must be <= 0 (multiplier -r_j >= 0), at x_j = -1 it must
    be >= 0.
    """
    viol = np.abs(residual)
    upper = x >= 1.0
    lower = x <= -1.0
    viol[upper] = np.maximum(residual[upper], 0.0)
    viol[lower] = np.maximum(-residual[lower], 0.0)
    return viol


def _multiplier(residual, x):
    mult = np.zeros_like(residual)
    upper = x >= 1.0
    lower = x <= -1.0
    mult[upper] = -residual[upper]
    mult[lower] = residual[lower]
    return mult


def pattern_coloring(matrix):
    """Greedy coloring of the sparsity pattern; groups are mutually
    non-adjacent index sets, so a Gauss-Seidel sweep can update each group
    with one vectorized operation while keeping the sequential semantics."""
    mat = matrix.tocsr()
    n = mat.shape[0]
    indptr, indices = mat.indptr, mat.indices
    colors = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        neighbor_colors = colors[indices[indptr[i]:indptr[i + 1]]]
        used = set(neighbor_colors[neighbor_colors >= 0].tolist())
        c = 0
        while c in used:
            c += 1
        colors[i] = c
    return [np.flatnonzero(colors == c) for c in range(colors.max() + 1)]


def _active_set_polish(a_mat, rhs, x, tol, max_rounds=50):
    """Direct active-set refinement starting from an iterate's bound pattern.

    Repeatedly solves the equations restricted to the inactive set and
    exchanges nodes violating primal feasibility or multiplier signs.  A
    node sitting exactly at a bound with zero multiplier is classified
    inactive, which keeps the active set minimal.
    """
    n = a_mat.shape[0]
    act = np.zeros(n, dtype=np.int8)
    act[x >= 1.0] = 1
    act[x <= -1.0] = -1
    seen = set()
    best_x, best_res = x, np.inf
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        key = act.tobytes()
        if key in seen:
            break
        seen.add(key)
        inactive = np.flatnonzero(act == 0)
        x_new = act.astype(float)
        if inactive.size:
            pinned = a_mat @ x_new
            sub = a_mat[inactive][:, inactive].tocsc()
            x_new[inactive] = spla.splu(sub).solve(
                rhs[inactive] - pinned[inactive])
        x_clip = np.clip(x_new, -1.0, 1.0)
        r = a_mat @ x_clip - rhs
        res = float(kkt_violation(r, x_clip).max())
        if res < best_res:
            best_x, best_res = x_clip, res
        if res <= tol:
            return x_clip, res, rounds, True
        new_act = np.zeros(n, dtype=np.int8)
        new_act[(act == 0) & (x_new > 1.0)] = 1
        new_act[(act == 0) & (x_new < -1.0)] = -1
        new_act[(act == 1) & (-r > 0.0)] = 1
        new_act[(act == -1) & (r > 0.0)] = -1
        act = new_act
    return best_x, best_res, rounds, False


def solve_obstacle(a_mat, rhs, x0=None, tol=1e-9, max_iter=10_000,
                   groups=None, polish=True):
    """Solve the obstacle problem (A x - rhs) . (chi - x) >= 0 on [-1, 1]^n.

    Parameters
    ----------
    a_mat : sparse matrix
        Symmetric positive definite system matrix.  Any nonpositive
        diagonal entry is rejected.
    rhs : array
    x0 : array, optional
        Warm start, projected onto the box.
    tol : float
        Absolute bound on the maximum KKT violation.
    max_iter : int
        Sweep budget for the projected Gauss-Seidel iteration.
    groups : list of index arrays, optional
        Precomputed :func:`pattern_coloring` of ``a_mat``; computed here
        when omitted.  The pattern of the phase-field matrices is fixed
        per mesh, so callers in the time loop pass a cached coloring.
    polish : bool
        Refine with direct active-set solves once the bound pattern stops
        changing between sweeps (default).  Set False for pure sweeps.

    Returns a :class:`ViSolution`; non-convergence within the budget is
    flagged on the result, with the best iterate returned.
    """
    a_mat = a_mat.tocsr()
    n = a_mat.shape[0]
    rhs = np.asarray(rhs, dtype=float)
    diag = a_mat.diagonal()
    if np.any(diag <= 0.0):
        raise ValueError("system matrix has a nonpositive diagonal entry")
    x = np.zeros(n) if x0 is None else np.clip(np.asarray(x0, dtype=float), -1.0, 1.0)
    if groups is None:
        groups = pattern_coloring(a_mat)
    subs = [(g, a_mat[g], diag[g]) for g in groups]

    iterations = 0
    last_pattern = None
    stable = 0
    residual = np.inf
    for _ in range(max_iter):
        for g, a_g, d_g in subs:
            x[g] = np.clip((rhs[g] - a_g @ x + d_g * x[g]) / d_g, -1.0, 1.0)
        iterations += 1
        r = a_mat @ x - rhs
        residual = float(kkt_violation(r, x).max())
        if residual <= tol:
            return ViSolution(x, _multiplier(r, x), iterations, residual, True)
        if polish:
            pattern = ((x >= 1.0).view(np.int8) - (x <= -1.0).view(np.int8)).tobytes()
            stable = stable + 1 if pattern == last_pattern else 0
            last_pattern = pattern
            if stable >= 1:
                x, residual, rounds, ok = _active_set_polish(a_mat, rhs, x, tol)
                iterations += rounds
                if ok:
                    r = a_mat @ x - rhs
                    return ViSolution(x, _multiplier(r, x), iterations,
                                      residual, True)
                stable, last_pattern = 0, None
    r = a_mat @ x - rhs
    return ViSolution(x, _multiplier(r, x), iterations,
                      float(kkt_violation(r, x).max()), False)


def _coupling_block(mass, rows, cols, n):
    """Sparse |rows| x |cols| block of diag(mass) restricted to index sets."""
    col_pos = np.full(n, -1, dtype=np.int64)
    col_pos[cols] = np.arange(cols.size)
    hit = col_pos[rows] >= 0
    return sp.coo_matrix(
        (mass[rows[hit]], (np.flatnonzero(hit), col_pos[rows[hit]])),
        shape=(rows.size, cols.size)).tocsr()


def solve_coupled_ch(mass, k_b, k_aniso, u_old, *, theta, tau, eps, alpha,
                     c_psi=np.pi / 2, w_bdry=None, boundary_mask=None,
                     tol=1e-9, max_iter=100, implicit=False):
    """Solve one coupled conserved step for (U, W) by a primal active-set loop.

    The discrete system is the lumped mass equation
    theta M (U - u_old)/tau + K_b W = 0, tested at every node (natural
    boundary conditions) or at interior nodes with W pinned to ``w_bdry``
    on the boundary, together with the variational inequality

        eps (K_aniso U) . (chi - U) >= sum_j M_j (c W_j + u_old_j / eps)(chi_j - U_j)

    for all chi in [-1, 1]^n, where c = c_psi / (2 alpha).  For each
    active-set guess the reduced equations form a symmetric saddle system
    solved by a sparse LU factorization; the sets are then updated from
    primal overshoots and multiplier signs until the KKT residual (VI
    violation and mass-equation defect) drops below ``tol``.

    With natural boundary conditions the nodal mass of U is conserved by
    construction and the solvability condition |(u_old, 1)^h| < |Omega| is
    required.  ``implicit`` switches the potential term to the current
    iterate (a diagnostic variant whose subproblems may be indefinite; its
    failures are reported through the returned stats, not raised).

    Returns ``(U, W, stats)`` with U in [-1, 1]^n.
    """
    n = mass.size
    u_old = np.asarray(u_old, dtype=float)
    c = 0.5 * c_psi / alpha
    dirichlet = w_bdry is not None
    if dirichlet:
        if boundary_mask is None:
            raise ValueError("dirichlet data requires a boundary mask")
        wdofs = np.flatnonzero(~boundary_mask)
        w_fixed = np.where(boundary_mask, float(w_bdry), 0.0)
    else:
        total = mass.sum()
        if abs(mass @ u_old) >= total:
            raise ValueError(
                "conserved step unsolvable: nodal mass of u_old fills the domain")
        wdofs = np.arange(n)
        w_fixed = np.zeros(n)

    k_b = k_b.tocsr()
    k_aniso = k_aniso.tocsr()
    scale = c * tau / theta
    kb_ww = -scale * k_b[wdofs][:, wdofs]
    rhs_mass = -c * mass[wdofs] * u_old[wdofs]
    if dirichlet:
        rhs_mass += scale * (k_b[wdofs] @ w_fixed)

    act = np.zeros(n, dtype=np.int8)
    act[u_old >= 1.0] = 1
    act[u_old <= -1.0] = -1

    u = u_old.copy()
    w = w_fixed.copy()
    seen = set()
    iterations = 0
    residual = np.inf
    converged = False
    for iterations in range(1, max_iter + 1):
        key = act.tobytes()
        if key in seen:
            break
        seen.add(key)
        inactive = np.flatnonzero(act == 0)
        u_pin = act.astype(float)
        try:
            if inactive.size == 0:
                u = u_pin
                w = _solve_w_only(kb_ww, rhs_mass + c * mass[wdofs] * u[wdofs],
                                  mass, wdofs, w_fixed, scale, dirichlet)
            else:
                s11 = eps * k_aniso[inactive][:, inactive]
                if implicit:
                    s11 = s11 - sp.diags(mass[inactive] / eps)
                s12 = -c * _coupling_block(mass, inactive, wdofs, n)
                saddle = sp.bmat([[s11, s12], [s12.T, kb_ww]], format="csc")
                rhs1 = mass[inactive] * ((0.0 if implicit else u_old[inactive] / eps)
                                         + c * w_fixed[inactive])
                rhs1 -= eps * (k_aniso[inactive] @ u_pin)
                rhs2 = rhs_mass + c * mass[wdofs] * u_pin[wdofs]
                z = spla.splu(saddle).solve(np.concatenate([rhs1, rhs2]))
                u = u_pin
                u[inactive] = z[:inactive.size]
                w = w_fixed.copy()
                w[wdofs] = z[inactive.size:]
        except (RuntimeError, np.linalg.LinAlgError):
            break  # singular subproblem (possible for the implicit variant)

        u_clip = np.clip(u, -1.0, 1.0)
        pot = u_clip if implicit else u_old
        r = eps * (k_aniso @ u_clip) - mass * (c * w + pot / eps)
        mass_defect = (theta / tau) * mass * (u_clip - u_old) + k_b @ w
        residual = float(max(kkt_violation(r, u_clip).max(),
                             np.abs(mass_defect[wdofs]).max()))
        if residual <= tol:
            u = u_clip
            converged = True
            break
        new_act = np.zeros(n, dtype=np.int8)
        new_act[(act == 0) & (u > 1.0)] = 1
        new_act[(act == 0) & (u < -1.0)] = -1
        new_act[(act == 1) & (-r > 0.0)] = 1
        new_act[(act == -1) & (r > 0.0)] = -1
        act = new_act
        u = u_clip

    return u, w, CoupledStats(iterations, residual, converged)


def _solve_w_only(kb_ww, rhs, mass, wdofs, w_fixed, scale, dirichlet):
    """W from the mass equations when every U node is pinned.

    With natural boundary conditions the mobility stiffness has the
    constants in its kernel, so the mean of W is pinned by a Lagrange
    multiplier; the additive constant is irrelevant here because the
    active-set loop continues until the VI fixes it.
    """
    w = w_fixed.copy()
    if dirichlet:
        w[wdofs] = spla.splu(kb_ww.tocsc()).solve(rhs)
        return w
    weights = -scale * mass[wdofs]
    aug = sp.bmat([[kb_ww, weights[:, None]], [weights[None, :], None]],
                  format="csc")
    sol = spla.splu(aug).solve(np.concatenate([rhs, [0.0]]))
    w[wdofs] = sol[:-1]
    return w
