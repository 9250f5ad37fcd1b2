"""Lumped mass vectors and P1 stiffness matrices for the phase-field schemes.

The discrete inner product is the vertex-quadrature (lumped) one,
(f, g)^h = sum_j M_j f_j g_j with M_j = integral of the j-th hat function,
which is exactly the inner product the stability results are stated for.
All stiffness matrices are assembled symmetrically element by element and
returned as CSR with sorted, deterministic index ordering.
"""

import numpy as np
import scipy.sparse as sp

__all__ = [
    "lumped_mass",
    "isotropic_stiffness",
    "assemble_anisotropic_stiffness",
    "assemble_mobility_stiffness",
]


def lumped_mass(mesh):
    """Lumped mass vector M_j = integral of hat function j = sum |sigma|/(d+1)."""
    share = mesh.element_volume / (mesh.dim + 1)
    m = np.zeros(mesh.n_vertices)
    np.add.at(m, mesh.elements, share[:, None])
    return m


def _scatter_symmetric(mesh, local):
    """Assemble exactly symmetric per-element blocks into a CSR matrix."""
    nloc = mesh.dim + 1
    rows = np.broadcast_to(mesh.elements[:, :, None],
                           (mesh.n_elements, nloc, nloc))
    cols = np.broadcast_to(mesh.elements[:, None, :],
                           (mesh.n_elements, nloc, nloc))
    n = mesh.n_vertices
    mat = sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                        shape=(n, n)).tocsr()
    mat.sort_indices()
    return mat


def isotropic_stiffness(mesh):
    """Standard P1 Laplacian stiffness, K_ij = sum |sigma| grad_j . grad_i."""
    g = mesh.basis_gradients
    local = np.einsum("eid,ejd->eij", g, g) * mesh.element_volume[:, None, None]
    return _scatter_symmetric(mesh, local)


def assemble_anisotropic_stiffness(mesh, aniso, u_prev):
    """Stiffness of the linearized anisotropic form with B frozen at grad(u_prev).

    K_ij = sum_sigma |sigma| grad_j . B(grad u_prev|_sigma) grad_i, with B
    evaluated once per element at the constant P1 gradient of ``u_prev``
    (elements where the gradient vanishes get the B(0) branch).  The result
    is symmetric positive semidefinite with kernel spanned by constants.
    """
    grads = mesh.element_gradients(u_prev)
    b_mats = aniso.b_matrix(grads)
    g = mesh.basis_gradients
    local = np.einsum("eid,edc,ejc->eij", g, b_mats, g)
    local = 0.5 * (local + local.transpose(0, 2, 1))
    local *= mesh.element_volume[:, None, None]
    return _scatter_symmetric(mesh, local)


def assemble_mobility_stiffness(mesh, u_prev, mobility):
    """Stiffness weighted by the interpolated mobility of the previous state.

    K_ij = sum_sigma w_sigma |sigma| grad_j . grad_i where w_sigma is the
    vertex mean of mobility(u_prev) over the element, i.e. the exact value
    of (1/|sigma|) * integral of the P1 interpolant of the mobility.
    Mobility values must be nonnegative at every vertex.
    """
    u_prev = np.asarray(u_prev, dtype=float)
    vals = np.asarray(mobility(u_prev), dtype=float)
    if vals.shape != (mesh.n_vertices,):
        raise ValueError("mobility must map nodal values to nodal values")
    if np.any(vals < 0.0):
        raise ValueError("mobility is negative at some vertex")
    factor = vals[mesh.elements].mean(axis=1)
    g = mesh.basis_gradients
    local = np.einsum("eid,ejd->eij", g, g)
    local = local * (factor * mesh.element_volume)[:, None, None]
    return _scatter_symmetric(mesh, local)
