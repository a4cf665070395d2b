# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Planted cluster data sets for smoke runs and tests.

Users, items and attribute entities each belong to one of ``clusters``
groups.  Items link to attribute entities of their own group, and users rate
mostly items of their own group highly, so the KG carries the signal a
recommender needs.
"""

import collections
import os

import numpy as np

from .. import kgdata
from . import fileio

INTERACTIONS_NAME = 'interactions.dat'

KG_NAME = 'kg.txt'

SyntheticData = collections.namedtuple('SyntheticData', ['interactions', 'triples'])
"""
:var interactions: list of (user token, item token, rating)
:var triples: list of (head token, relation token, tail token)
"""


def generate(users=200, items=300, entities=500, clusters=5, relations=4, positives_per_user=20,
             negatives_per_user=5, links_per_item=3, noise=0.1, seed=0):
    """
    Generate a planted cluster data set.

    Ratings of 5 are positives; ratings of 1 or 2 fall below the default
    threshold and only exercise filtering.

    :return: :py:class:`SyntheticData`
    """
    if entities <= items:
        raise ValueError('Need more entities than items for attribute nodes')
    rng = np.random.default_rng(seed)

    item_cluster = np.arange(items) % clusters
    attributes = np.arange(items, entities)
    attribute_cluster = attributes % clusters

    def entity_token(e):
        return 'i{n}'.format(n=e) if e < items else 'e{n}'.format(n=e)

    triples = []
    for item in range(items):
        own = attributes[attribute_cluster == item_cluster[item]]
        for attribute in rng.choice(own, min(links_per_item, len(own)), replace=False):
            relation = int(rng.integers(0, relations))
            triples.append((entity_token(item), 'r{n}'.format(n=relation), entity_token(int(attribute))))
        if rng.random() < noise:
            triples.append((entity_token(item), 'r{n}'.format(n=int(rng.integers(0, relations))),
                            entity_token(int(rng.choice(attributes)))))

    for attribute in attributes:
        own = attributes[attribute_cluster == attribute_cluster[attribute - items]]
        other = int(rng.choice(own))
        if other != attribute:
            triples.append((entity_token(int(attribute)), 'related', entity_token(other)))

    interactions = []
    for user in range(users):
        cluster = user % clusters
        own = np.flatnonzero(item_cluster == cluster)
        picks = set()
        while len(picks) < min(positives_per_user, items):
            pool = own if rng.random() >= noise else np.arange(items)
            picks.add(int(rng.choice(pool)))
        for item in sorted(picks):
            interactions.append(('u{n}'.format(n=user), entity_token(item), 5.0))
        for item in rng.choice(items, negatives_per_user, replace=False):
            if int(item) not in picks:
                interactions.append(('u{n}'.format(n=user), entity_token(int(item)), float(rng.integers(1, 3))))

    return SyntheticData(interactions, triples)


def write(out_dir, data, config_hash):
    """
    Write ``interactions.dat`` (``::`` separated) and ``kg.txt`` (tab separated).

    :return: tuple(interactions path, kg path)
    """
    fileio.ensure_dir(out_dir)
    interactions_path = os.path.join(out_dir, INTERACTIONS_NAME)
    kg_path = os.path.join(out_dir, KG_NAME)
    fileio.write_lines(interactions_path,
                       ('{u}::{i}::{r:g}'.format(u=u, i=i, r=r) for u, i, r in data.interactions), config_hash)
    fileio.write_rows(kg_path, data.triples, config_hash)
    return interactions_path, kg_path


def to_dataset(data, train_ratio=0.7, seed=0, rating_threshold=4.0):
    """
    Build a split :py:class:`mckgpy.kgdata.Dataset` in memory.
    """
    store = kgdata.interactions_from_records(data.interactions, rating_threshold)
    kg = kgdata.kg_from_records(data.triples, store.items.tokens)
    train, test = kgdata.split(store, train_ratio, seed)
    return kgdata.Dataset(train, test, kg)


def toy_dataset(seed=0, train_ratio=0.7):
    """
    A small data set (12 users, 15 items, 20 entities) for unit tests.
    """
    data = generate(users=12, items=15, entities=20, clusters=3, relations=2, positives_per_user=5,
                    negatives_per_user=2, links_per_item=2, noise=0.0, seed=seed)
    return to_dataset(data, train_ratio=train_ratio, seed=seed)
