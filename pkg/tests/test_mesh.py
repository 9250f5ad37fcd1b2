"""Kuhn mesh construction, counts, conformity and P1 gradient data."""

from collections import Counter
from itertools import combinations

import numpy as np
import pytest

from anisofield import build_uniform_mesh


def test_smallest_2d_mesh_counts():
    mesh = build_uniform_mesh(2, 0.5, 1)
    assert mesh.n_vertices == 4
    assert mesh.n_elements == 2
    assert mesh.element_volume.sum() == pytest.approx(1.0, rel=1e-15)


def test_3d_mesh_counts():
    mesh = build_uniform_mesh(3, 0.5, 2)
    assert mesh.n_vertices == 27
    assert mesh.n_elements == 48
    assert mesh.element_volume.sum() == pytest.approx(1.0, rel=1e-12)


def test_default_fine_mesh_size():
    mesh = build_uniform_mesh(2, 0.5, 128)
    assert mesh.mesh_size == pytest.approx(1.0 / 128, rel=1e-15)
    assert mesh.n_vertices == 129**2
    assert mesh.n_elements == 2 * 128**2


@pytest.mark.parametrize("dim,n", [(2, 5), (3, 3)])
def test_mesh_is_conforming(dim, n):
    # every interior facet must be shared by exactly two elements
    mesh = build_uniform_mesh(dim, 0.7, n)
    assert mesh.element_volume.sum() == pytest.approx(1.4**dim, rel=1e-12)
    facets = Counter()
    for elem in mesh.elements:
        for facet in combinations(sorted(elem), dim):
            facets[facet] += 1
    counts = set(facets.values())
    assert counts <= {1, 2}
    n_boundary = sum(1 for c in facets.values() if c == 1)
    # boundary facet count: 2d -> 4n edges on 4 sides; 3d -> 12 n^2 triangles
    assert n_boundary == (4 * n if dim == 2 else 12 * n * n)


@pytest.mark.parametrize("dim,n", [(2, 4), (3, 2)])
def test_partition_of_unity_gradients(dim, n):
    mesh = build_uniform_mesh(dim, 0.5, n)
    sums = mesh.basis_gradients.sum(axis=1)
    assert np.abs(sums).max() <= 1e-12 * np.abs(mesh.basis_gradients).max()


def test_all_element_volumes_positive_and_equal():
    mesh = build_uniform_mesh(3, 0.5, 3)
    h = mesh.mesh_size
    np.testing.assert_allclose(mesh.element_volume, h**3 / 6, rtol=1e-12)


@pytest.mark.parametrize("dim", [2, 3])
def test_boundary_mask(dim):
    mesh = build_uniform_mesh(dim, 0.5, 4)
    expected = np.any(np.abs(np.abs(mesh.vertices) - 0.5) <= 1e-12 * 0.5, axis=1)
    np.testing.assert_array_equal(mesh.boundary_mask, expected)
    assert mesh.boundary_mask.sum() == (16 if dim == 2 else 5**3 - 3**3)


def test_element_gradient_of_coordinate():
    mesh = build_uniform_mesh(2, 0.5, 3)
    values = mesh.vertices[:, 0]
    for e in range(mesh.n_elements):
        np.testing.assert_allclose(mesh.element_gradient(e, values), [1.0, 0.0],
                                   atol=1e-13)


def test_element_gradient_of_constant_is_zero():
    mesh = build_uniform_mesh(3, 0.5, 2)
    grads = mesh.element_gradients(np.full(mesh.n_vertices, 3.7))
    assert np.abs(grads).max() <= 1e-12


@pytest.mark.parametrize("dim", [2, 3])
def test_element_gradient_reproduces_random_affine(dim):
    rng = np.random.default_rng(dim)
    mesh = build_uniform_mesh(dim, 0.5, 3)
    a = rng.standard_normal(dim)
    b = rng.standard_normal()
    values = mesh.vertices @ a + b
    e = int(rng.integers(mesh.n_elements))
    np.testing.assert_allclose(mesh.element_gradient(e, values), a,
                               rtol=1e-12, atol=1e-12)


def test_element_gradient_index_out_of_range():
    mesh = build_uniform_mesh(2, 0.5, 2)
    with pytest.raises(IndexError):
        mesh.element_gradient(mesh.n_elements, np.zeros(mesh.n_vertices))


def test_build_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_uniform_mesh(2, 0.5, 0)
    with pytest.raises(ValueError):
        build_uniform_mesh(4, 0.5, 2)
    with pytest.raises(ValueError):
        build_uniform_mesh(2, -1.0, 2)
