"""Uniform simplicial meshes of the cube (-H, H)^d with P1 element data.

The grid cells are split by the Kuhn (Freudenthal) pattern: 2 triangles per
square in 2d, 6 tetrahedra per cube in 3d, all sharing the main diagonal of
their cell.  The pattern is conforming across cells and every element has
the same volume h^d / d!.
"""

import itertools

import numpy as np

__all__ = ["SimplicialMesh", "build_uniform_mesh"]


class SimplicialMesh:
    """Conforming simplicial mesh with per-element P1 basis gradients.

    Attributes
    ----------
    dim : int
    half_width : float
        Domain is (-half_width, half_width)^dim.
    subdivisions : int
        Grid cells per axis.
    vertices : (n_vertices, dim) float array
    elements : (n_elements, dim + 1) int array
    boundary_mask : (n_vertices,) bool array, True on the domain boundary
    element_volume : (n_elements,) float array
    basis_gradients : (n_elements, dim + 1, dim) float array
        Constant gradients of the local P1 basis functions.
    """

    def __init__(self, dim, half_width, subdivisions, vertices, elements,
                 boundary_mask):
        self.dim = dim
        self.half_width = float(half_width)
        self.subdivisions = int(subdivisions)
        self.vertices = vertices
        self.elements = elements
        self.boundary_mask = boundary_mask

        p0 = vertices[elements[:, 0]]
        edges = vertices[elements[:, 1:]] - p0[:, None, :]  # rows p_i - p_0
        det = np.linalg.det(edges)
        if np.any(det == 0.0):
            raise ValueError("degenerate element in mesh")
        self.element_volume = np.abs(det) / np.prod(range(1, dim + 1))
        grads = np.linalg.inv(edges).transpose(0, 2, 1)  # rows of T^(-T)
        self.basis_gradients = np.concatenate(
            [-grads.sum(axis=1, keepdims=True), grads], axis=1)

        for arr in (self.vertices, self.elements, self.boundary_mask,
                    self.element_volume, self.basis_gradients):
            arr.setflags(write=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def mesh_size(self):
        """Grid spacing h = 2 H / N (element diameters are h sqrt(dim))."""
        return 2.0 * self.half_width / self.subdivisions

    def __repr__(self):
        return (f"SimplicialMesh(dim={self.dim}, H={self.half_width}, "
                f"N={self.subdivisions}, {self.n_vertices} vertices, "
                f"{self.n_elements} elements)")

    def element_gradient(self, element_index, nodal_values):
        """Constant gradient of the P1 interpolant on one element."""
        if not 0 <= element_index < self.n_elements:
            raise IndexError(f"element index {element_index} out of range")
        values = np.asarray(nodal_values, dtype=float)
        idx = self.elements[element_index]
        return values[idx] @ self.basis_gradients[element_index]

    def element_gradients(self, nodal_values):
        """Gradients of the P1 interpolant on all elements, shape (ne, d)."""
        values = np.asarray(nodal_values, dtype=float)
        if values.shape != (self.n_vertices,):
            raise ValueError("nodal value array does not match vertex count")
        return np.einsum("eid,ei->ed", self.basis_gradients,
                         values[self.elements])


def _grid_vertices(half_width, n, dim):
    coords = np.linspace(-half_width, half_width, n + 1)
    axes = np.meshgrid(*([coords] * dim), indexing="ij")
    # vertex index = i + (n+1) j (+ (n+1)^2 k), x index fastest
    return np.column_stack([a.ravel(order="F") for a in axes])


def build_uniform_mesh(dim, half_width, subdivisions):
    """Kuhn triangulation of (-H, H)^dim with ``subdivisions`` cells per axis.

    Yields (N+1)^d vertices and 2 N^2 triangles (d = 2) or 6 N^3 tetrahedra
    (d = 3); the associated fine mesh size is h = 2 H / N.
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    if subdivisions < 1:
        raise ValueError("need at least one subdivision per axis")
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    n = int(subdivisions)
    vertices = _grid_vertices(half_width, n, dim)

    cell = np.arange(n)
    if dim == 2:
        ci = np.tile(cell, n)
        cj = np.repeat(cell, n)
        v00 = ci + (n + 1) * cj
        v10 = v00 + 1
        v01 = v00 + (n + 1)
        v11 = v01 + 1
        elements = np.vstack([
            np.column_stack([v00, v10, v11]),
            np.column_stack([v00, v11, v01]),
        ])
    else:
        ci = np.tile(cell, n * n)
        cj = np.tile(np.repeat(cell, n), n)
        ck = np.repeat(cell, n * n)
        base = ci + (n + 1) * cj + (n + 1) ** 2 * ck
        strides = np.array([1, n + 1, (n + 1) ** 2])
        parts = []
        for perm in itertools.permutations(range(3)):
            offs = np.cumsum([0] + [strides[axis] for axis in perm])
            parts.append(np.column_stack([base + o for o in offs]))
        elements = np.vstack(parts)

    on_face = np.abs(np.abs(vertices) - half_width) <= 1e-12 * half_width
    boundary_mask = np.any(on_face, axis=1)
    return SimplicialMesh(dim, half_width, n, vertices,
                          elements.astype(np.int64), boundary_mask)
