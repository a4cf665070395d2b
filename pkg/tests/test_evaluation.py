import math
import os
import shutil
import tempfile
import unittest

import numpy as np

from mckgpy import evaluation
from mckgpy import kgdata
from mckgpy.private import fileio
from mckgpy.private import synthetic


class _TableModel:
    """
    Scores (user, item) pairs from a fixed distance matrix.
    """

    def __init__(self, distances):
        self.distances = np.asarray(distances, dtype=np.float64)

    def distance(self, users, items, table, values=None):
        return self.distances[np.asarray(users), np.asarray(items)]


def _candidates(user, positive, negatives):
    return kgdata.TestCandidates(user, positive, np.asarray(negatives, dtype=np.int64), False)


class TestMetrics(unittest.TestCase):
    def test_hit_ratio(self):
        self.assertEqual(evaluation.hr_at_k(1, 10), 1)
        self.assertEqual(evaluation.hr_at_k(10, 10), 1)
        self.assertEqual(evaluation.hr_at_k(11, 10), 0)

    def test_ndcg(self):
        self.assertEqual(evaluation.ndcg_at_k(1, 10), 1.0)
        self.assertAlmostEqual(evaluation.ndcg_at_k(3, 10), 0.5)
        self.assertAlmostEqual(evaluation.ndcg_at_k(20, 20), 1.0 / math.log2(21))
        self.assertEqual(evaluation.ndcg_at_k(21, 20), 0.0)

    def test_invalid_cutoff(self):
        with self.assertRaises(ValueError):
            evaluation.hr_at_k(1, 0)
        with self.assertRaises(ValueError):
            evaluation.ndcg_at_k(1, -5)
        with self.assertRaises(ValueError):
            evaluation.hr_at_k(0, 10)

    def test_empty(self):
        with self.assertRaises(ValueError):
            evaluation.metrics_from_ranks([])


class TestRanking(unittest.TestCase):
    def test_first(self):
        self.assertEqual(evaluation.rank_candidates([0.1, 0.5, 0.9], [4, 2, 8]), 1)

    def test_ties_by_item_id(self):
        self.assertEqual(evaluation.rank_candidates([0.5, 0.5, 0.2], [5, 3, 7]), 3)
        self.assertEqual(evaluation.rank_candidates([0.5, 0.5, 0.2], [2, 3, 7]), 2)

    def test_random_scores(self):
        rng = np.random.default_rng(0)
        ranks = [evaluation.rank_candidates(rng.random(101), np.arange(101)) for _ in range(10000)]
        hr, ndcg = evaluation.metrics_from_ranks(ranks)
        self.assertLess(abs(hr[10] - 10.0 / 101.0), 0.01)
        self.assertLess(abs(hr[20] - 20.0 / 101.0), 0.015)
        self.assertLess(ndcg[10], hr[10])


class TestEvaluate(unittest.TestCase):
    def test_brute_force(self):
        rng = np.random.default_rng(3)
        distances = rng.random((5, 30))
        candidates = []
        expected = []
        for user in range(5):
            items = rng.choice(30, 25, replace=False)
            candidates.append(_candidates(user, int(items[0]), items[1:]))
            order = sorted(items, key=lambda item: (distances[user, item], item))
            expected.append(order.index(items[0]) + 1)

        store = kgdata.InteractionStore.from_pairs(5, 30, np.arange(5), [c.positive for c in candidates])
        result = evaluation.evaluate(_TableModel(distances), store, seed=0, table=object(),
                                     candidates=candidates, batch_size=2)
        self.assertEqual(list(result.ranks.values()), expected)
        self.assertAlmostEqual(result.hr[10], np.mean([r <= 10 for r in expected]))
        self.assertAlmostEqual(result.ndcg[20], np.mean([1.0 / math.log2(r + 1) if r <= 20 else 0.0
                                                         for r in expected]))

        threaded = evaluation.evaluate(_TableModel(distances), store, seed=0, table=object(),
                                       candidates=candidates, batch_size=2, workers=3)
        self.assertEqual(threaded.ranks, result.ranks)

    def test_empty_test_set(self):
        store = kgdata.InteractionStore.from_pairs(2, 4, [], [])
        with self.assertRaises(ValueError):
            evaluation.evaluate(_TableModel(np.zeros((2, 4))), store, seed=0, table=object())

    def test_needs_table_or_graph(self):
        dataset = synthetic.toy_dataset()
        with self.assertRaises(ValueError):
            evaluation.evaluate(_TableModel(np.zeros((12, 15))), dataset.test, seed=0)

    def test_build_candidates(self):
        dataset = synthetic.toy_dataset()
        candidates = evaluation.build_candidates(dataset.test, 0, train=dataset.train)
        self.assertEqual([c.user for c in candidates], list(dataset.test.users_with_positives()))
        self.assertTrue(all(len(c.items) == 101 for c in candidates))


class TestReport(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def test_write_report(self):
        result = evaluation.EvalResult({10: 0.5, 20: 0.75}, {10: 0.25, 20: 0.3}, {0: 1, 1: 15}, frozenset())
        path = os.path.join(self.directory, 'eval.csv')
        evaluation.write_report(path, result, [-1.0, 0.5], 'feedbeef0000')
        self.assertEqual(fileio.read_config_hash(path), 'feedbeef0000')
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[1], 'epoch,loss,hr@10,hr@20,ndcg@10,ndcg@20,kappa_1,kappa_2,best_hr@20')
        self.assertEqual(lines[2], '0,,0.500000,0.750000,0.250000,0.300000,-1.000000,0.500000,')

    def test_format_table(self):
        result = evaluation.EvalResult({10: 0.5, 20: 0.75}, {10: 0.25, 20: 0.3}, {0: 1, 1: 15}, frozenset())
        text = evaluation.format_table(result)
        self.assertIn('0.7500', text)
        self.assertIn('users: 2', text)


if __name__ == '__main__':
    unittest.main()
