import io
import math
import tempfile
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from apps.core.exceptions import MeshError
from apps.fem.mesh import build_mesh, check_elementwise, check_nodal, dump_mesh, prolongate
from apps.fem.spaces import (
    divergence,
    gradient,
    inner_energy,
    inner_weighted,
    interpolate,
    lumped_weights,
    mass_matrix,
    norm_l2,
    norm_lumped,
    stiffness_matrix,
    zero_boundary,
)


class MeshTests(SimpleTestCase):

    def test_counts(self):
        for level in range(5):
            mesh = build_mesh(level)
            self.assertEqual(mesh.num_nodes, (2 ** level + 1) ** 2)
            self.assertEqual(mesh.num_elements, 2 * 4 ** level)
            self.assertEqual(mesh.boundary_nodes.size, 4 * 2 ** level)

    def test_mesh_size(self):
        for level in range(5):
            mesh = build_mesh(level)
            self.assertAlmostEqual(mesh.h, math.sqrt(2.0) * 2.0 ** -level, places=14)
            self.assertAlmostEqual(mesh.h_min, mesh.h, places=14)

    def test_areas_are_positive_and_cover_the_square(self):
        mesh = build_mesh(4)
        self.assertTrue(np.all(mesh.signed_areas > 0.0))
        self.assertAlmostEqual(float(mesh.areas.sum()), 1.0, places=14)

    def test_nodes_are_nested(self):
        coarse, fine = build_mesh(2), build_mesh(3)
        assert_allclose(fine.nodes[:coarse.num_nodes], coarse.nodes)

    def test_coarse_mesh(self):
        mesh = build_mesh(0)
        assert_allclose(mesh.nodes, [[0, 0], [1, 0], [1, 1], [0, 1]])
        self.assertEqual(mesh.elements.tolist(), [[0, 1, 2], [0, 2, 3]])

    def test_invalid_level(self):
        with self.assertRaises(ValidationError):
            build_mesh(13)
        with self.assertRaises(ValidationError):
            build_mesh(-1)

    def test_arrays_are_read_only(self):
        with self.assertRaises(ValueError):
            build_mesh(1).nodes[0, 0] = 0.5

    def test_check_nodal_and_elementwise(self):
        mesh = build_mesh(1)
        with self.assertRaises(MeshError):
            check_nodal(mesh, np.zeros(mesh.num_nodes + 1))
        with self.assertRaises(MeshError):
            check_elementwise(mesh, np.zeros((mesh.num_elements - 1, 2)))

    def test_prolongation_is_exact_for_affine_functions(self):
        def affine(x, y):
            return 1.0 + 2.0 * x - 3.0 * y

        coarse = interpolate(build_mesh(1), affine)
        assert_allclose(prolongate(coarse, 1, 4), interpolate(build_mesh(4), affine), atol=1e-14)

    def test_prolongation_keeps_coarse_values(self):
        values = np.random.default_rng(3).random(build_mesh(2).num_nodes)
        fine = prolongate(values, 2, 3)
        assert_allclose(fine[:values.size], values)

    def test_prolongation_to_coarser_level(self):
        with self.assertRaises(MeshError):
            prolongate(np.zeros(build_mesh(2).num_nodes), 2, 1)


class SpacesTests(SimpleTestCase):

    def setUp(self):
        self.mesh = build_mesh(3)
        self.rng = np.random.default_rng(7)

    def test_lumped_weights_sum_to_one(self):
        beta = lumped_weights(self.mesh)
        self.assertTrue(np.all(beta > 0.0))
        self.assertAlmostEqual(float(beta.sum()), 1.0, places=14)

    def test_lumped_and_l2_norms_are_equivalent(self):
        for level in (1, 2, 3):
            mesh = build_mesh(level)
            beta = lumped_weights(mesh)
            for _ in range(200):
                v = self.rng.standard_normal(mesh.num_nodes)
                l2, lumped = norm_l2(v, mesh), norm_lumped(v, beta)
                self.assertLessEqual(l2, lumped * (1 + 1e-12))
                self.assertLessEqual(lumped, 2.0 * l2 * (1 + 1e-12))

    def test_norms_agree_on_constants(self):
        beta = lumped_weights(self.mesh)
        v = np.ones(self.mesh.num_nodes)
        self.assertAlmostEqual(norm_l2(v, self.mesh), norm_lumped(v, beta), places=12)

    def test_stiffness_annihilates_constants(self):
        assert_allclose(stiffness_matrix(self.mesh) @ np.ones(self.mesh.num_nodes), 0.0, atol=1e-12)

    def test_stiffness_energy_of_linear_function(self):
        x = interpolate(self.mesh, lambda x, y: x)
        self.assertAlmostEqual(inner_energy(x, x, self.mesh), 1.0, places=12)

    def test_mass_of_one(self):
        ones = np.ones(self.mesh.num_nodes)
        self.assertAlmostEqual(float(ones @ mass_matrix(self.mesh) @ ones), 1.0, places=13)

    def test_dirichlet_stiffness_is_identity_on_the_boundary(self):
        matrix = stiffness_matrix(self.mesh, dirichlet=True).toarray()
        boundary = self.mesh.boundary_nodes
        assert_allclose(matrix[boundary][:, boundary], np.eye(boundary.size))
        interior = self.mesh.interior_mask
        assert_allclose(matrix[np.ix_(interior, boundary)], 0.0)
        assert_allclose(matrix, matrix.T)

    def test_gradient_of_affine_function(self):
        u = interpolate(self.mesh, lambda x, y: x + 2.0 * y)
        grad = gradient(self.mesh, u)
        self.assertEqual(grad.shape, (self.mesh.num_elements, 2))
        assert_allclose(grad, np.tile([1.0, 2.0], (self.mesh.num_elements, 1)), atol=1e-12)

    def test_divergence_is_adjoint_of_gradient(self):
        u = self.rng.standard_normal(self.mesh.num_nodes)
        q = self.rng.standard_normal((self.mesh.num_elements, 2))
        lhs = inner_weighted(gradient(self.mesh, u), q, self.mesh)
        rhs = -float(u @ divergence(self.mesh, q))
        self.assertAlmostEqual(lhs, rhs, delta=1e-12 * max(1.0, abs(lhs)))

    def test_weighted_product(self):
        ones = np.ones((self.mesh.num_elements, 2))
        self.assertAlmostEqual(inner_weighted(ones, ones, self.mesh), 2.0 * self.mesh.h ** 2, places=14)

    def test_zero_boundary(self):
        v = zero_boundary(self.mesh, np.ones(self.mesh.num_nodes))
        assert_allclose(v[self.mesh.boundary_nodes], 0.0)
        assert_allclose(v[self.mesh.interior_mask], 1.0)


class DumpMeshTests(SimpleTestCase):

    def test_format(self):
        stream = io.StringIO()
        dump_mesh(build_mesh(0), stream)
        self.assertEqual(
            stream.getvalue().splitlines(),
            ['0.0 0.0', '1.0 0.0', '1.0 1.0', '0.0 1.0', '0 1 2', '0 2 3'],
        )

    def test_command_writes_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            output = Path(tmp) / 'mesh.txt'
            call_command('dump_mesh', '--level', '1', '--output', str(output), stdout=io.StringIO())
            lines = output.read_text().splitlines()
        self.assertEqual(len(lines), 9 + 8)

    def test_command_writes_stdout(self):
        out = io.StringIO()
        call_command('dump_mesh', '--level', '0', stdout=out)
        self.assertIn('0 2 3', out.getvalue())
