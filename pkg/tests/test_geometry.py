import math
import unittest

import numpy as np

from mckgpy import stereographic as st
from mckgpy.geometry import \
    Curvature, \
    GeometryDomainError, \
    ShapeContractError, \
    make_point, \
    origin, \
    tangent, \
    tan_kappa, \
    atan_kappa, \
    conformal_factor, \
    mobius_add, \
    exp_map, \
    log_map, \
    dist, \
    mobius_matvec, \
    kappa_concat, \
    kappa_dot, \
    project_to_domain


class TestCurvatureFunctions(unittest.TestCase):
    def test_tan_kappa(self):
        self.assertAlmostEqual(tan_kappa(0.7, Curvature(0.0)), 0.7, places=12)
        self.assertAlmostEqual(tan_kappa(math.pi / 4, Curvature(1.0)), 1.0, places=12)
        self.assertAlmostEqual(tan_kappa(0.5, Curvature(-1.0)), math.tanh(0.5), places=12)

    def test_atan_kappa(self):
        self.assertAlmostEqual(atan_kappa(0.3, Curvature(0.0)), 0.3, places=12)
        k = Curvature(0.8)
        self.assertAlmostEqual(atan_kappa(tan_kappa(0.4, k), k), 0.4, places=12)
        self.assertAlmostEqual(atan_kappa(0.5, Curvature(-1.0)), 0.5493061443340549, places=12)

    def test_nan_argument_rejected(self):
        with self.assertRaises(GeometryDomainError):
            tan_kappa(float('nan'), Curvature(1.0))
        with self.assertRaises(GeometryDomainError):
            atan_kappa(float('inf'), Curvature(-1.0))

    def test_continuous_across_zero(self):
        # Taylor branch on one side, closed form on the other
        for t in (0.1, 0.5, 1.2):
            below = tan_kappa(t, Curvature(-2e-7))
            inside = tan_kappa(t, Curvature(1e-8))
            above = tan_kappa(t, Curvature(2e-7))
            self.assertLess(abs(below - inside), 1e-6)
            self.assertLess(abs(above - inside), 1e-6)

    def test_conformal_factor(self):
        self.assertAlmostEqual(conformal_factor(origin(3, -1.0)), 2.0)
        self.assertAlmostEqual(conformal_factor(make_point([0.3, 0.4], 0.0)), 2.0)
        self.assertAlmostEqual(conformal_factor(make_point([0.5, 0.0], -1.0)), 8.0 / 3.0, places=12)


class TestPoints(unittest.TestCase):
    def test_out_of_ball_rejected(self):
        with self.assertRaises(GeometryDomainError):
            make_point([1.0, 0.0], -1.0)
        with self.assertRaises(GeometryDomainError):
            make_point([float('nan'), 0.0], 0.0)

    def test_mixed_spaces_rejected(self):
        with self.assertRaises(ShapeContractError):
            dist(make_point([0.1], -1.0), make_point([0.1], 1.0))
        with self.assertRaises(ShapeContractError):
            mobius_add(make_point([0.1], 0.0), make_point([0.1, 0.2], 0.0))

    def test_mobius_add(self):
        x = make_point([0.2, -0.1], -1.0)
        np.testing.assert_allclose(mobius_add(x, origin(2, -1.0)).coords, x.coords, atol=1e-15)

        a = make_point([0.3, 0.1], 0.0)
        b = make_point([-0.2, 0.5], 0.0)
        np.testing.assert_allclose(mobius_add(a, b).coords, [0.1, 0.6], atol=1e-15)

        # closed form: (1 - 2k<x,y> - k|y|^2) x + (1 + k|x|^2) y over 1 - 2k<x,y> + k^2|x|^2|y|^2
        half = make_point([0.5, 0.0], -1.0)
        expected = (1.0 + 0.5 + 0.25) * 0.5 + (1.0 - 0.25) * 0.5
        expected /= 1.0 + 0.5 + 0.0625
        np.testing.assert_allclose(mobius_add(half, half).coords, [expected, 0.0], atol=1e-12)
        self.assertAlmostEqual(expected, 0.8, places=12)

    def test_exp_log(self):
        k = Curvature(-1.0)
        o = origin(2, k)
        np.testing.assert_allclose(exp_map(o, tangent([0.3, 0.0], o)).coords, [math.tanh(0.3), 0.0], atol=1e-12)

        e = origin(2, 0.0)
        np.testing.assert_allclose(exp_map(e, tangent([0.4, -0.7], e)).coords, [0.4, -0.7], atol=1e-12)

        x = make_point([0.1, 0.2], k)
        np.testing.assert_allclose(exp_map(x, tangent([0.0, 0.0], x)).coords, x.coords, atol=1e-12)
        np.testing.assert_allclose(log_map(x, x).coords, [0.0, 0.0], atol=1e-12)

        y = make_point([0.25, -0.6], 0.0)
        np.testing.assert_allclose(log_map(e, y).coords, y.coords, atol=1e-12)

    def test_exp_log_inverse(self):
        rng = np.random.default_rng(7)
        for kappa in (-1.0, -0.3, 0.0, 0.5, 1.0):
            for _ in range(20):
                x = make_point(rng.uniform(-0.3, 0.3, 3), kappa)
                v = tangent(rng.uniform(-0.4, 0.4, 3), x)
                y = exp_map(x, v)
                np.testing.assert_allclose(log_map(x, y).coords, v.coords, atol=1e-9)

    def test_distance(self):
        k = Curvature(-1.0)
        x = make_point([0.1, 0.3], k)
        self.assertAlmostEqual(dist(x, x), 0.0, places=12)
        self.assertAlmostEqual(dist(origin(2, k), make_point([0.5, 0.0], k)), math.log(3.0), places=12)

        a = make_point([0.3, 0.1], 0.0)
        b = make_point([-0.2, 0.5], 0.0)
        self.assertAlmostEqual(dist(a, b), 2.0 * np.linalg.norm(a.coords - b.coords), places=12)

    def test_distance_symmetric(self):
        rng = np.random.default_rng(3)
        for kappa in (-1.0, 0.0, 1.0):
            for _ in range(20):
                x = make_point(rng.uniform(-0.5, 0.5, 4), kappa)
                y = make_point(rng.uniform(-0.5, 0.5, 4), kappa)
                self.assertAlmostEqual(dist(x, y), dist(y, x), places=10)
                self.assertGreaterEqual(dist(x, y), 0.0)

    def test_mobius_matvec(self):
        k = Curvature(-1.0)
        y = make_point([0.4, 0.0], k)
        np.testing.assert_allclose(mobius_matvec(np.eye(2), y).coords, y.coords, atol=1e-12)
        np.testing.assert_allclose(mobius_matvec(2.0 * np.eye(2), y).coords,
                                   [math.tanh(2.0 * math.atanh(0.4)), 0.0], atol=1e-12)

        m = np.array([[1.0, 2.0], [0.5, -1.0], [0.0, 3.0]])
        e = make_point([0.2, -0.1], 0.0)
        np.testing.assert_allclose(mobius_matvec(m, e).coords, m.dot(e.coords), atol=1e-12)

        with self.assertRaises(ShapeContractError):
            mobius_matvec(np.ones((2, 3)), y)

    def test_kappa_concat(self):
        a = make_point([0.1, 0.2], 0.0)
        b = make_point([-0.3], 0.0)
        np.testing.assert_allclose(kappa_concat(a, b).coords, [0.1, 0.2, -0.3], atol=1e-12)

        c = kappa_concat(origin(2, -1.0), origin(2, -1.0))
        np.testing.assert_allclose(c.coords, np.zeros(4), atol=1e-15)

        k = Curvature(-1.0)
        tangent_pair = np.array([math.atanh(0.2), math.atanh(0.3)])
        n = np.linalg.norm(tangent_pair)
        expected = math.tanh(n) * tangent_pair / n
        np.testing.assert_allclose(kappa_concat(make_point([0.2], k), make_point([0.3], k)).coords,
                                   expected, atol=1e-12)

    def test_kappa_dot(self):
        self.assertAlmostEqual(kappa_dot(origin(2, -1.0), make_point([0.4, 0.1], -1.0)), 0.0, places=12)
        self.assertAlmostEqual(kappa_dot(make_point([0.3, 0.1], 0.0), make_point([0.2, -0.5], 0.0)),
                               0.06 - 0.05, places=12)
        x = make_point([0.3, 0.0], -1.0)
        self.assertAlmostEqual(kappa_dot(x, x), math.atanh(0.3) ** 2, places=12)

    def test_project_to_domain(self):
        np.testing.assert_allclose(project_to_domain([3.0, 4.0], 1.0).coords, [3.0, 4.0])
        np.testing.assert_allclose(project_to_domain([0.3, 0.4], -1.0).coords, [0.3, 0.4])
        p = project_to_domain([1.0, 0.0], -4.0)
        self.assertAlmostEqual(np.linalg.norm(p.coords), (1.0 - 1e-5) * 0.5, places=12)
        with self.assertRaises(GeometryDomainError):
            project_to_domain([float('inf'), 0.0], -1.0)


class TestBatchedMath(unittest.TestCase):
    def test_batched_matches_single(self):
        rng = np.random.default_rng(11)
        xs = rng.uniform(-0.4, 0.4, (5, 3))
        ys = rng.uniform(-0.4, 0.4, (5, 3))
        batched = st.dist(xs, ys, -1.0)
        self.assertEqual(batched.shape, (5,))
        for n in range(5):
            self.assertAlmostEqual(batched[n], dist(make_point(xs[n], -1.0), make_point(ys[n], -1.0)), places=12)

    def test_tangent_mean(self):
        points = np.array([[1.0, 0.0], [0.0, 2.0]])
        weights = np.array([0.3, 0.7])
        np.testing.assert_allclose(st.tangent_mean(points, weights, 0.0), [0.3, 1.4], atol=1e-12)

    def test_expmap0_stays_in_ball(self):
        v = np.array([[50.0, 0.0], [0.0, -80.0]])
        p = st.expmap0(v, -1.0)
        self.assertTrue(np.all(np.linalg.norm(p, axis=-1) < 1.0))

    def test_degenerate_denominator(self):
        # y = x / (k |x|^2) makes the denominator vanish
        x = np.array([1.0, 0.0])
        with self.assertRaises(st.NumericalDegeneracyError):
            st.mobius_add(x, x, 1.0)


class TestInvariants(unittest.TestCase):
    KAPPAS = (-1.0, -0.5, -1e-6, 0.0, 1e-6, 0.5, 1.0)

    def _operations(self, kappa, rng_seed=5):
        rng = np.random.default_rng(rng_seed)
        k = Curvature(kappa)
        x = make_point(rng.uniform(-0.4, 0.4, 3), k)
        y = make_point(rng.uniform(-0.4, 0.4, 3), k)
        m = rng.uniform(-1.0, 1.0, (2, 3))
        v = tangent(rng.uniform(-0.5, 0.5, 3), x)
        return [
            np.array([tan_kappa(0.9, k), atan_kappa(0.6, k), conformal_factor(x)]),
            mobius_add(x, y).coords,
            exp_map(x, v).coords,
            log_map(x, y).coords,
            np.array([dist(x, y), kappa_dot(x, y)]),
            mobius_matvec(m, y).coords,
            kappa_concat(x, y).coords,
        ]

    def test_every_operation_continuous_at_zero(self):
        flat = self._operations(0.0)
        for kappa in (-1e-6, 1e-6):
            for near, at_zero in zip(self._operations(kappa), flat):
                self.assertLess(np.max(np.abs(near - at_zero)), 1e-5)

    def test_mobius_inverse_and_left_cancellation(self):
        rng = np.random.default_rng(13)
        for kappa in self.KAPPAS:
            for _ in range(50):
                x = make_point(rng.uniform(-0.35, 0.35, 3), kappa)
                y = make_point(rng.uniform(-0.35, 0.35, 3), kappa)
                minus_x = make_point(-x.coords, kappa)
                np.testing.assert_allclose(mobius_add(x, origin(3, kappa)).coords, x.coords, atol=1e-12)
                np.testing.assert_allclose(mobius_add(minus_x, x).coords, np.zeros(3), atol=1e-9)
                np.testing.assert_allclose(mobius_add(minus_x, mobius_add(x, y)).coords, y.coords, atol=1e-9)

    def _radial_ratios(self, kappa, angle=0.8):
        ratios = []
        o = origin(2, kappa)
        for t in np.linspace(0.05, 0.95, 40):
            x = make_point([t, 0.0], kappa)
            y = make_point([t * math.cos(angle), t * math.sin(angle)], kappa)
            ratios.append(dist(x, y) / (dist(x, o) + dist(y, o)))
        return np.array(ratios)

    def test_ratio_grows_with_radius_when_hyperbolic(self):
        self.assertTrue(np.all(np.diff(self._radial_ratios(-1.0)) >= 0.0))

    def test_ratio_shrinks_with_radius_when_spherical(self):
        self.assertTrue(np.all(np.diff(self._radial_ratios(1.0)) <= 0.0))

    def test_radius(self):
        self.assertAlmostEqual(Curvature(-4.0).radius, 0.5)
        self.assertEqual(Curvature(0.0).radius, math.inf)
        self.assertEqual(Curvature(1.0).radius, math.inf)

    def test_exp_map_rejects_foreign_tangent(self):
        x = make_point([0.1, 0.2], -1.0)
        elsewhere = make_point([0.2, 0.1], -1.0)
        with self.assertRaises(ShapeContractError):
            exp_map(x, tangent([0.1, 0.0], elsewhere))
        with self.assertRaises(ShapeContractError):
            exp_map(x, tangent([0.1, 0.0], make_point([0.1, 0.2], -0.5)))


if __name__ == '__main__':
    unittest.main()
