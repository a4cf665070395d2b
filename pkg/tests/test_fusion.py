import unittest

import numpy as np

from mckgpy import fusion
from mckgpy import stereographic as st
from mckgpy.fusion import FusionParams
from mckgpy.stereographic import ShapeContractError


def _points(rng, kappas, batch=4, dim=3):
    return [st.expmap0(rng.normal(0.0, 0.3, (batch, dim)), k) for k in kappas]


def _select_half(dim):
    return np.hstack([np.eye(dim), np.zeros((dim, dim))])


class TestGlobalUpdate(unittest.TestCase):
    def test_select_half_is_identity(self):
        rng = np.random.default_rng(0)
        kappas = [0.0, 0.0, 0.0]
        points = _points(rng, kappas)
        fused = fusion.fuse_global(points, kappas, [_select_half(3)] * 3)
        for before, after in zip(points, fused):
            np.testing.assert_allclose(after, before, atol=1e-12)

    def test_single_subspace(self):
        rng = np.random.default_rng(1)
        points = _points(rng, [-1.0])
        p = rng.uniform(-0.5, 0.5, (3, 6))
        log = st.logmap0(points[0], -1.0)
        expected = st.expmap0(np.concatenate([log, log], axis=-1).dot(p.T), -1.0)
        np.testing.assert_allclose(fusion.fuse_global(points, [-1.0], [p])[0], expected, atol=1e-12)

    def test_mixed_curvature(self):
        rng = np.random.default_rng(2)
        kappas = [-1.0, 0.0]
        points = _points(rng, kappas)
        projections = [rng.uniform(-0.5, 0.5, (3, 6)) for _ in kappas]
        logs = [st.logmap0(p, k) for p, k in zip(points, kappas)]
        g = (logs[0] + logs[1]) / 2.0
        fused = fusion.fuse_global(points, kappas, projections)
        for m, k in enumerate(kappas):
            expected = st.expmap0(np.concatenate([logs[m], g], axis=-1).dot(projections[m].T), k)
            np.testing.assert_allclose(fused[m], expected, atol=1e-12)

    def test_projection_shape(self):
        points = _points(np.random.default_rng(3), [0.0])
        with self.assertRaises(ShapeContractError):
            fusion.fuse_global(points, [0.0], [np.eye(3)])
        with self.assertRaises(ShapeContractError):
            fusion.fuse_global(points, [0.0, 1.0], [_select_half(3)])


class TestSubspaceAttention(unittest.TestCase):
    def test_zero_matrix_uniform(self):
        kappas = [-1.0, 0.0, 1.0]
        points = _points(np.random.default_rng(4), kappas)
        weights = fusion.subspace_attention(points, kappas, np.zeros((3, 9)))
        np.testing.assert_allclose(weights, np.full((4, 3), 1.0 / 3.0), atol=1e-15)

    def test_single_subspace_weight_one(self):
        points = _points(np.random.default_rng(5), [1.0])
        weights = fusion.subspace_attention(points, [1.0], np.random.default_rng(5).normal(size=(1, 3)))
        np.testing.assert_array_equal(weights, np.ones((4, 1)))

    def test_softmax_oracle(self):
        kappas = [0.0, 0.0, 0.0]
        points = [np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.array([[0.0, 0.0]])]
        attention = np.zeros((3, 6))
        attention[0, 0] = 1.0
        attention[1, 3] = 2.0
        logits = np.array([1.0, 2.0, 0.0])
        expected = np.exp(logits) / np.exp(logits).sum()
        np.testing.assert_allclose(fusion.subspace_attention(points, kappas, attention)[0], expected, atol=1e-12)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(6)
        kappas = [-1.0, 0.0, 1.0]
        points = _points(rng, kappas, batch=10)
        weights = fusion.subspace_attention(points, kappas, rng.normal(size=(3, 9)))
        np.testing.assert_allclose(weights.sum(axis=-1), np.ones(10), atol=1e-12)

    def test_shift_invariant(self):
        # a logit shift of c comes from adding the same row offset to every subspace
        rng = np.random.default_rng(7)
        kappas = [-1.0, 1.0]
        points = _points(rng, kappas, batch=1)
        attention = rng.normal(size=(2, 6))
        base = fusion.subspace_attention(points, kappas, attention)
        logs = np.concatenate([st.logmap0(p, k) for p, k in zip(points, kappas)], axis=-1)[0]
        offset = np.outer(np.ones(2), logs) * (1.5 / logs.dot(logs))
        shifted = fusion.subspace_attention(points, kappas, attention + offset)
        np.testing.assert_allclose(shifted, base, atol=1e-12)

    def test_shape_mismatch(self):
        points = _points(np.random.default_rng(8), [0.0, 0.0])
        with self.assertRaises(ShapeContractError):
            fusion.subspace_attention(points, [0.0, 0.0], np.zeros((2, 3)))


class TestDistances(unittest.TestCase):
    def test_identical_embeddings(self):
        rng = np.random.default_rng(9)
        kappas = [-1.0, 0.0, 1.0]
        points = _points(rng, kappas)
        weights = fusion.subspace_attention(points, kappas, rng.normal(size=(3, 9)))
        d = fusion.global_distance(points, points, weights, weights, kappas)
        np.testing.assert_allclose(d, np.zeros(4), atol=1e-10)

    def test_single_subspace_doubles(self):
        rng = np.random.default_rng(10)
        u, v = _points(rng, [-1.0]), _points(rng, [-1.0])
        ones = np.ones((4, 1))
        np.testing.assert_allclose(fusion.global_distance(u, v, ones, ones, [-1.0]),
                                   2.0 * st.dist(u[0], v[0], -1.0), atol=1e-12)

    def test_uniform_euclidean(self):
        u = [np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]])]
        v = [np.array([[3.0, 4.0]]), np.array([[1.0, 2.0]])]
        half = np.full((1, 2), 0.5)
        # weights 0.5 + 0.5 per subspace; distances 2 * 5 and 2 * 1
        np.testing.assert_allclose(fusion.global_distance(u, v, half, half, [0.0, 0.0]), [12.0], atol=1e-12)

    def test_origin_distance(self):
        e = [np.array([[0.5, 0.0]]), np.array([[0.3, 0.4]])]
        w = np.array([[0.25, 0.75]])
        expected = 0.25 * np.log(3.0) + 0.75 * 2.0 * 0.5
        np.testing.assert_allclose(fusion.origin_distance(e, w, [-1.0, 0.0]), [expected], atol=1e-12)

    def test_fuse_pair_weights(self):
        rng = np.random.default_rng(11)
        kappas = [-1.0, 0.0, 1.0]
        params = FusionParams(tuple(_select_half(3) for _ in kappas), rng.normal(size=(3, 9)))
        pair = fusion.fuse(_points(rng, kappas), _points(rng, kappas), kappas, params)
        np.testing.assert_allclose((pair.user_weights + pair.item_weights).sum(axis=-1), np.full(4, 2.0),
                                   atol=1e-12)
        d = fusion.global_distance(pair.users, pair.items, pair.user_weights, pair.item_weights, kappas)
        self.assertTrue(np.all(d >= 0.0))

    def test_fuse_without_update(self):
        rng = np.random.default_rng(12)
        users = _points(rng, [0.5])
        items = _points(rng, [0.5])
        params = FusionParams((rng.normal(size=(3, 6)),), np.zeros((1, 3)))
        pair = fusion.fuse(users, items, [0.5], params, update=False)
        np.testing.assert_array_equal(pair.users[0], users[0])
        np.testing.assert_array_equal(pair.items[0], items[0])


if __name__ == '__main__':
    unittest.main()
