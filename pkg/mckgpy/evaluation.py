# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Leave-one-out ranking evaluation.

Each test user contributes one held-out positive ranked against sampled
negatives by ascending global distance.  Equal distances are ordered by item
id.  HR@K is 1 when the positive ranks within the top K; NDCG@K is
``1 / log2(rank + 1)`` within the top K and 0 otherwise.
"""

import collections
import concurrent.futures
import logging
import math

import numpy as np

from . import kgdata
from .private import fileio

_LOG = logging.getLogger(__name__)

DEFAULT_CUTOFFS = (10, 20)

METRIC_COLUMNS = ('hr@10', 'hr@20', 'ndcg@10', 'ndcg@20')


class EvalResult(collections.namedtuple('EvalResult', ['hr', 'ndcg', 'ranks', 'flagged_users'])):
    """
    :var hr: dict of cutoff K to mean HR@K.
    :var ndcg: dict of cutoff K to mean NDCG@K.
    :var ranks: OrderedDict of user id to the 1-based rank of the held-out positive.
    :var flagged_users: frozenset of users whose negatives were drawn with replacement.
    """

    @property
    def user_count(self):
        return len(self.ranks)

    def metric_row(self):
        """
        Values in :py:data:`METRIC_COLUMNS` order; missing cutoffs give **None**.
        """
        return [self.hr.get(10, None), self.hr.get(20, None), self.ndcg.get(10, None), self.ndcg.get(20, None)]


def _check_cutoff(k):
    if k <= 0:
        raise ValueError('Cutoff K must be positive, got {k}'.format(k=k))


def _check_rank(rank):
    if rank < 1:
        raise ValueError('Rank must be at least 1, got {r}'.format(r=rank))


def hr_at_k(rank, k):
    """
    Hit ratio of one ranked positive.

    :return: 1 or 0
    """
    _check_cutoff(k)
    _check_rank(rank)
    return 1 if rank <= k else 0


def ndcg_at_k(rank, k):
    """
    NDCG of one ranked positive, the ideal DCG of a single relevant item being 1.

    :return: float
    """
    _check_cutoff(k)
    _check_rank(rank)
    return 1.0 / math.log2(rank + 1) if rank <= k else 0.0


def rank_candidates(distances, items):
    """
    Rank of the first candidate when all candidates are sorted by ascending
    distance, then by item id.

    :param distances: Distance of each candidate, positive first.
    :param items: Item id of each candidate, positive first.
    :return: 1-based rank
    """
    distances = np.asarray(distances, dtype=np.float64)
    items = np.asarray(items)
    target = distances[0]
    closer = np.count_nonzero(distances < target)
    tied = np.count_nonzero((distances == target) & (items < items[0]))
    return int(closer + tied + 1)


def metrics_from_ranks(ranks, cutoffs=DEFAULT_CUTOFFS):
    """
    Mean HR and NDCG over a collection of ranks.

    :return: tuple(hr dict, ndcg dict)
    """
    ranks = list(ranks)
    if not ranks:
        raise ValueError('No ranks to average')
    hr = {}
    ndcg = {}
    for k in cutoffs:
        hr[k] = sum(hr_at_k(r, k) for r in ranks) / float(len(ranks))
        ndcg[k] = sum(ndcg_at_k(r, k) for r in ranks) / float(len(ranks))
    return hr, ndcg


def build_candidates(test, seed, train=None, negative_count=kgdata.DEFAULT_NEGATIVE_CANDIDATES):
    """
    Sample the candidate list of every user with a test positive, in user order.

    :return: list of :py:class:`mckgpy.kgdata.TestCandidates`
    """
    users = test.users_with_positives()
    if not len(users):
        raise ValueError('The test set is empty')
    return [kgdata.sample_test_candidates(test, int(u), seed, train=train, negative_count=negative_count)
            for u in users]


def _rank_chunk(model, table, chunk):
    width = len(chunk[0].items)
    users = np.repeat(np.array([c.user for c in chunk], dtype=np.int64), width)
    items = np.concatenate([c.items for c in chunk])
    distances = np.asarray(model.distance(users, items, table)).reshape(len(chunk), width)
    return [rank_candidates(distances[n], chunk[n].items) for n in range(len(chunk))]


def evaluate(model, test, seed, table=None, kg=None, train=None, cutoffs=DEFAULT_CUTOFFS, batch_size=16,
             workers=1, candidates=None):
    """
    Evaluate **model** with the leave-one-out protocol.

    :param model: :py:class:`mckgpy.model.Model`
    :param test: Test :py:class:`mckgpy.kgdata.InteractionStore`.
    :param seed: Seed of the candidate and neighbor sampling.
    :param table: :py:class:`mckgpy.kgdata.ReceptiveTable`; sampled from **kg** at epoch 0 when omitted.
    :param kg: :py:class:`mckgpy.kgdata.KnowledgeGraph`, needed without **table**.
    :param train: Training store, its positives are excluded from the negatives.
    :param cutoffs: Cutoffs K.
    :param batch_size: Users scored per forward pass.
    :param workers: Threads scoring chunks concurrently.
    :param candidates: Precomputed :py:func:`build_candidates` output.
    :return: :py:class:`EvalResult`
    :raises ValueError: for an empty test set.
    """
    for k in cutoffs:
        _check_cutoff(k)
    if candidates is None:
        candidates = build_candidates(test, seed, train=train)
    if not candidates:
        raise ValueError('The test set is empty')
    if table is None:
        if kg is None:
            raise ValueError('evaluate() needs a receptive table or a knowledge graph')
        table = kgdata.sample_receptive_table(kg, model.spec.sample_size, seed, epoch=0)

    chunks = [candidates[start:start + batch_size] for start in range(0, len(candidates), batch_size)]
    if workers > 1 and len(chunks) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            chunk_ranks = list(pool.map(lambda chunk: _rank_chunk(model, table, chunk), chunks))
    else:
        chunk_ranks = [_rank_chunk(model, table, chunk) for chunk in chunks]

    ranks = collections.OrderedDict()
    for chunk, chunk_rank in zip(chunks, chunk_ranks):
        for c, rank in zip(chunk, chunk_rank):
            ranks[c.user] = rank

    hr, ndcg = metrics_from_ranks(ranks.values(), cutoffs)
    flagged = frozenset(c.user for c in candidates if c.flagged)
    return EvalResult(hr, ndcg, ranks, flagged)


def report_header(manifolds):
    """
    Columns shared by the metric log and evaluation reports.
    """
    return (['epoch', 'loss'] + list(METRIC_COLUMNS) +
            ['kappa_{m}'.format(m=m + 1) for m in range(manifolds)] + ['best_hr@20'])


def report_row(epoch, loss, result, kappas, best_hr=None):
    """
    One row in :py:func:`report_header` order.
    """
    metrics = result.metric_row() if result is not None else [None] * len(METRIC_COLUMNS)
    return ([str(epoch), fileio.format_float(loss)] + [fileio.format_float(v) for v in metrics] +
            [fileio.format_float(k) for k in kappas] + [fileio.format_float(best_hr)])


def write_report(path, result, kappas, config_hash, epoch=0):
    """
    Write a single row machine readable report.
    """
    fileio.write_rows(path, [report_row(epoch, None, result, kappas)], config_hash,
                      header=report_header(len(kappas)), separator=',')


def format_table(result):
    """
    Human readable table of a :py:class:`EvalResult`.

    :return: str
    """
    cutoffs = sorted(result.hr)
    lines = ['{:<8}'.format('K') + ''.join('{:>10}'.format(k) for k in cutoffs),
             '{:<8}'.format('HR') + ''.join('{:>10.4f}'.format(result.hr[k]) for k in cutoffs),
             '{:<8}'.format('NDCG') + ''.join('{:>10.4f}'.format(result.ndcg[k]) for k in cutoffs),
             'users: {n}'.format(n=result.user_count)]
    return '\n'.join(lines)
