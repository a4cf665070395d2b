# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Interaction and knowledge graph ingestion, splitting and sampling.

Items are entities: the entity vocabulary of a :py:class:`KnowledgeGraph` built
with :py:func:`load_kg` starts with the item tokens in item id order, so item
``v`` is entity ``v``.  Items that never occur in the KG file are entities of
degree zero.

Every sampler takes an integer seed and mixes it with the quantities it is
keyed on (epoch, entity, user), so draws are reproducible one at a time.
"""

import collections
import logging

import numpy as np

_LOG = logging.getLogger(__name__)

DEFAULT_NEGATIVE_CANDIDATES = 100


class InputError(Exception):
    """
    Raised for missing input files and for inputs that cannot train a model,
    such as a knowledge graph without triples.
    """

    def __init__(self, message):
        super(InputError, self).__init__(message)


class DataParseError(ValueError):
    """
    Raised for malformed lines in interaction, KG or mapping files.

    :var path: File being parsed.
    :var line_number: 1-based line number, or **None**.
    """

    def __init__(self, message, path=None, line_number=None):
        if path is not None:
            location = '{path}:{line}'.format(path=path, line=line_number) if line_number else str(path)
            message = '{location}: {message}'.format(location=location, message=message)
        super(DataParseError, self).__init__(message)
        self.path = path
        self.line_number = line_number


class Vocabulary:
    """
    Bijection between string tokens and dense ids in ``[0, len)``, in insertion order.
    """

    def __init__(self, tokens=()):
        self._tokens = []
        self._ids = {}
        for token in tokens:
            self.add(token)

    def add(self, token):
        """
        Get the id of **token**, assigning the next id if it is new.
        """
        token_id = self._ids.get(token, None)
        if token_id is None:
            token_id = len(self._tokens)
            self._ids[token] = token_id
            self._tokens.append(token)
        return token_id

    def index(self, token):
        return self._ids[token]

    def get(self, token, default=None):
        return self._ids.get(token, default)

    def __contains__(self, token):
        return token in self._ids

    def __len__(self):
        return len(self._tokens)

    def __getitem__(self, token_id):
        return self._tokens[token_id]

    @property
    def tokens(self):
        return list(self._tokens)


class InteractionStore(collections.namedtuple(
        'InteractionStore', ['user_count', 'item_count', 'positives', 'flagged_users', 'users', 'items'])):
    """
    Implicit user-item feedback.

    :var user_count: Number of users; ids are dense in ``[0, user_count)``.
    :var item_count: Number of items; ids are dense in ``[0, item_count)``.
    :var positives: Tuple with one sorted, duplicate free int64 array of item ids per user.
    :var flagged_users: frozenset of users flagged while building the store
                        (after :py:func:`split`: users with test positives only).
    :var users: :py:class:`Vocabulary` of raw user tokens, or **None**.
    :var items: :py:class:`Vocabulary` of raw item tokens, or **None**.
    """

    @classmethod
    def from_pairs(cls, user_count, item_count, users, items, flagged_users=frozenset(), user_vocab=None,
                   item_vocab=None):
        """
        Build a store from parallel user and item id arrays, dropping duplicates.
        """
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if users.size and (users.min() < 0 or users.max() >= user_count):
            raise ValueError('User id out of range')
        if items.size and (items.min() < 0 or items.max() >= item_count):
            raise ValueError('Item id out of range')

        codes = np.unique(users * item_count + items)
        owners = codes // item_count if item_count else codes
        bounds = np.searchsorted(owners, np.arange(user_count + 1))
        positives = tuple(codes[bounds[u]:bounds[u + 1]] - u * item_count for u in range(user_count))
        return cls(user_count, item_count, positives, frozenset(flagged_users), user_vocab, item_vocab)

    @property
    def interaction_count(self):
        return int(sum(len(p) for p in self.positives))

    def pairs(self):
        """
        Get every interaction as parallel arrays.

        :return: tuple(users, items), int64 arrays ordered by user then item.
        """
        lengths = np.array([len(p) for p in self.positives], dtype=np.int64)
        users = np.repeat(np.arange(self.user_count, dtype=np.int64), lengths)
        if len(self.positives):
            items = np.concatenate(self.positives) if lengths.sum() else np.zeros(0, dtype=np.int64)
        else:
            items = np.zeros(0, dtype=np.int64)
        return users, items.astype(np.int64)

    def has(self, user, item):
        p = self.positives[user]
        i = np.searchsorted(p, item)
        return bool(i < len(p) and p[i] == item)

    def users_with_positives(self):
        return np.array([u for u, p in enumerate(self.positives) if len(p)], dtype=np.int64)


class KnowledgeGraph(collections.namedtuple(
        'KnowledgeGraph', ['entity_count', 'relation_count', 'triples', 'offsets', 'adj_relations',
                           'adj_entities', 'entities', 'relations', 'item_count'])):
    """
    Entity/relation vocabularies and a CSR adjacency including inverse edges.

    :var entity_count: Number of entities; items occupy ids ``[0, item_count)``.
    :var relation_count: Number of relation ids including inverses: twice the
                         number of relation tokens.  Relation ``r`` has inverse
                         ``r + relation_count // 2``.
    :var triples: ``(T, 3)`` int64 array of (head, relation, tail) with forward relation ids.
    :var offsets: ``(entity_count + 1,)`` CSR row offsets into the adjacency arrays.
    :var adj_relations: Relation id of each adjacency entry.
    :var adj_entities: Neighbor entity of each adjacency entry.
    :var entities: :py:class:`Vocabulary` of entity tokens.
    :var relations: :py:class:`Vocabulary` of relation tokens (forward relations only).
    :var item_count: Number of leading entities that are items.
    """

    @property
    def self_loop_relation(self):
        """
        Reserved relation id used for the self-loops of entities without neighbors.
        """
        return self.relation_count

    @property
    def relation_table_size(self):
        """
        Rows needed in a relation embedding table, including the self-loop relation.
        """
        return self.relation_count + 1

    @property
    def triple_count(self):
        return int(self.triples.shape[0])

    def degree(self, entity):
        return int(self.offsets[entity + 1] - self.offsets[entity])

    def neighbors(self, entity):
        """
        Get the (relation, neighbor) pairs of **entity**.

        :return: tuple(relations, entities) int64 arrays
        """
        start, end = self.offsets[entity], self.offsets[entity + 1]
        return self.adj_relations[start:end], self.adj_entities[start:end]


class NeighborSample(collections.namedtuple('NeighborSample', ['entity', 'relations', 'neighbors'])):
    """
    Fixed size receptive field of one entity.

    :var entity: Entity id.
    :var relations: int64 array of relation ids, one per slot.
    :var neighbors: int64 array of neighbor ids, one per slot.
    """


class ReceptiveTable(collections.namedtuple('ReceptiveTable', ['relations', 'neighbors', 'size', 'epoch'])):
    """
    Neighbor samples of every entity for one epoch.

    :var relations: ``(entity_count, size)`` int64 array.
    :var neighbors: ``(entity_count, size)`` int64 array.
    """


class TestCandidates(collections.namedtuple('TestCandidates', ['user', 'positive', 'negatives', 'flagged'])):
    """
    One held-out positive and its sampled negatives.

    :var flagged: **True** if negatives had to be drawn with replacement.
    """

    __test__ = False

    @property
    def items(self):
        """
        Candidate items, positive first.
        """
        return np.concatenate([[self.positive], self.negatives]).astype(np.int64)


class TrainBatch(collections.namedtuple('TrainBatch', ['users', 'positives', 'negatives'])):
    """
    Parallel int64 arrays of (u, i, j) training triples.
    """

    def __len__(self):
        return len(self.users)


Dataset = collections.namedtuple('Dataset', ['train', 'test', 'kg'])


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        return np.random.default_rng([int(s) for s in seed])
    return np.random.default_rng(int(seed))


def _read_lines(path):
    with open(path, 'r', encoding='utf-8', errors='replace') as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            yield line_number, line


def interactions_from_records(records, rating_threshold=4.0):
    """
    Build an :py:class:`InteractionStore` from ``(user, item, rating)`` token records.

    With a **rating_threshold**, records whose rating is at least the threshold are
    positives; with **None** (or a record rating of **None**) every record is a
    positive.  Users and items only enter the vocabularies through positives, so
    users without any positive are dropped.

    :return: :py:class:`InteractionStore` with ``users`` and ``items`` vocabularies.
    """
    user_vocab = Vocabulary()
    item_vocab = Vocabulary()
    users = []
    items = []

    for user, item, rating in records:
        if rating_threshold is not None and rating is not None and rating < rating_threshold:
            continue
        users.append(user_vocab.add(user))
        items.append(item_vocab.add(item))

    return InteractionStore.from_pairs(len(user_vocab), len(item_vocab), users, items,
                                       user_vocab=user_vocab, item_vocab=item_vocab)


def _interaction_records(path, separator):
    for line_number, line in _read_lines(path):
        fields = [f.strip().strip('"') for f in line.split(separator)]
        if len(fields) < 2 or not fields[0] or not fields[1]:
            raise DataParseError('expected at least user and item fields', path, line_number)
        rating = None
        if len(fields) >= 3:
            try:
                rating = float(fields[2])
            except ValueError:
                raise DataParseError('invalid rating "{r}"'.format(r=fields[2]), path, line_number)
        yield fields[0], fields[1], rating


def load_interactions(path, rating_threshold=4.0, separator='::'):
    """
    Load implicit feedback from a text file with one ``user, item, [rating, [timestamp]]``
    record per line, see :py:func:`interactions_from_records`.

    :param path: Interaction file path.
    :param rating_threshold: float or **None**
    :param separator: Field separator, ``'::'`` for MovieLens, ``'\\t'`` otherwise.
    :return: :py:class:`InteractionStore` with ``users`` and ``items`` vocabularies.
    :raises DataParseError: on a malformed line.
    """
    store = interactions_from_records(_interaction_records(path, separator), rating_threshold)
    _LOG.info('Loaded %d interactions of %d users over %d items from %s',
              store.interaction_count, store.user_count, store.item_count, path)
    return store


def load_item_map(path):
    """
    Load a two-column ``item token <TAB> entity token`` mapping.

    :return: dict
    """
    mapping = {}
    for line_number, line in _read_lines(path):
        fields = line.split('\t')
        if len(fields) != 2:
            raise DataParseError('expected two tab separated columns', path, line_number)
        mapping[fields[0].strip()] = fields[1].strip()
    return mapping


def kg_from_records(records, item_tokens=()):
    """
    Build a :py:class:`KnowledgeGraph` from ``(head, relation, tail)`` token records.

    **item_tokens** seeds the entity vocabulary so that item ``v`` is entity ``v``.
    Each triple ``(a, r, b)`` puts ``(r, b)`` in the adjacency of ``a`` and
    ``(r_inv, a)`` in the adjacency of ``b``.

    :param item_tokens: Entity tokens of the items, in item id order.
    :return: :py:class:`KnowledgeGraph`
    """
    item_tokens = list(item_tokens)
    entities = Vocabulary(item_tokens)
    item_count = len(entities)
    if item_count != len(item_tokens):
        raise ValueError('Item tokens must map injectively into entities')

    relations = Vocabulary()
    triples = [(entities.add(head), relations.add(relation), entities.add(tail))
               for head, relation, tail in records]

    return build_kg(np.array(triples, dtype=np.int64).reshape(-1, 3), len(entities), len(relations),
                    entities=entities, relations=relations, item_count=item_count)


def _kg_records(path):
    for line_number, line in _read_lines(path):
        fields = [f.strip() for f in line.split('\t')]
        if len(fields) != 3 or not all(fields):
            raise DataParseError('expected head, relation and tail separated by tabs', path, line_number)
        yield tuple(fields)


def load_kg(path, item_tokens=()):
    """
    Load tab separated ``head, relation, tail`` triples, see :py:func:`kg_from_records`.

    :param path: KG file path.
    :param item_tokens: Entity tokens of the items, in item id order.
    :return: :py:class:`KnowledgeGraph`
    :raises DataParseError: on a malformed line.
    """
    kg = kg_from_records(_kg_records(path), item_tokens)
    _LOG.info('Loaded %d triples over %d entities and %d relations from %s',
              kg.triple_count, kg.entity_count, len(kg.relations), path)
    return kg


def build_kg(triples, entity_count, base_relation_count, entities=None, relations=None, item_count=0):
    """
    Build a :py:class:`KnowledgeGraph` from id triples.

    :param triples: ``(T, 3)`` array of (head, relation, tail) ids.
    :param entity_count: Number of entities.
    :param base_relation_count: Number of forward relations.
    :return: :py:class:`KnowledgeGraph`
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if triples.size:
        if triples[:, [0, 2]].min() < 0 or triples[:, [0, 2]].max() >= entity_count:
            raise ValueError('Entity id out of range')
        if triples[:, 1].min() < 0 or triples[:, 1].max() >= base_relation_count:
            raise ValueError('Relation id out of range')

    heads = np.concatenate([triples[:, 0], triples[:, 2]])
    rels = np.concatenate([triples[:, 1], triples[:, 1] + base_relation_count])
    tails = np.concatenate([triples[:, 2], triples[:, 0]])

    order = np.lexsort((tails, rels, heads))
    heads, rels, tails = heads[order], rels[order], tails[order]
    offsets = np.searchsorted(heads, np.arange(entity_count + 1)).astype(np.int64)

    return KnowledgeGraph(entity_count, 2 * base_relation_count, triples, offsets, rels, tails,
                          entities, relations, item_count)


def split(store, train_ratio, seed):
    """
    Split interactions uniformly at random into train and test stores.

    Users that end up with test positives but no train positive are kept in the
    test store and listed in its ``flagged_users``.

    :param store: :py:class:`InteractionStore`
    :param train_ratio: Fraction of interactions for training, ``0 < ratio < 1``.
    :param seed: int
    :return: tuple(train, test)
    """
    if not 0.0 < train_ratio < 1.0:
        raise ValueError('train_ratio must lie strictly between 0 and 1, got {r}'.format(r=train_ratio))

    users, items = store.pairs()
    count = len(users)
    permutation = _as_rng(seed).permutation(count)
    train_size = int(np.floor(train_ratio * count + 0.5))
    train_idx = np.sort(permutation[:train_size])
    test_idx = np.sort(permutation[train_size:])

    train = InteractionStore.from_pairs(store.user_count, store.item_count, users[train_idx], items[train_idx],
                                        user_vocab=store.users, item_vocab=store.items)

    test_users = np.unique(users[test_idx])
    flagged = frozenset(int(u) for u in test_users if len(train.positives[u]) == 0)
    if flagged:
        _LOG.warning('%d users have no training interaction and are evaluated from test data only', len(flagged))

    test = InteractionStore.from_pairs(store.user_count, store.item_count, users[test_idx], items[test_idx],
                                       flagged_users=flagged, user_vocab=store.users, item_vocab=store.items)
    return train, test


def sample_neighbors(kg, entity, size, seed, epoch=0):
    """
    Draw the fixed size receptive field of **entity**.

    With degree at least **size** the neighbors are drawn without replacement.
    With a smaller degree every neighbor is taken once and the remaining slots are
    filled uniformly with replacement, in shuffled order.  An entity without
    neighbors gets self-loops under :py:attr:`KnowledgeGraph.self_loop_relation`.

    :return: :py:class:`NeighborSample`
    """
    relations, neighbors = kg.neighbors(entity)
    degree = len(neighbors)

    if degree == 0:
        return NeighborSample(entity,
                              np.full(size, kg.self_loop_relation, dtype=np.int64),
                              np.full(size, entity, dtype=np.int64))

    rng = _as_rng((seed, epoch, entity))
    if degree >= size:
        picked = rng.choice(degree, size, replace=False)
    else:
        picked = np.concatenate([np.arange(degree), rng.integers(0, degree, size - degree)])
        rng.shuffle(picked)

    return NeighborSample(entity, relations[picked], neighbors[picked])


def sample_receptive_table(kg, size, seed, epoch=0):
    """
    Draw :py:func:`sample_neighbors` for every entity.

    :return: :py:class:`ReceptiveTable`
    """
    relations = np.empty((kg.entity_count, size), dtype=np.int64)
    neighbors = np.empty((kg.entity_count, size), dtype=np.int64)
    for entity in range(kg.entity_count):
        sample = sample_neighbors(kg, entity, size, seed, epoch)
        relations[entity] = sample.relations
        neighbors[entity] = sample.neighbors
    return ReceptiveTable(relations, neighbors, size, epoch)


def _sample_negative(rng, positives, item_count):
    if len(positives) >= item_count:
        return None
    if 2 * len(positives) > item_count:
        return int(rng.choice(np.setdiff1d(np.arange(item_count), positives)))
    while True:
        j = int(rng.integers(0, item_count))
        k = np.searchsorted(positives, j)
        if k >= len(positives) or positives[k] != j:
            return j


def sample_train_triple(train, seed, user=None):
    """
    Sample a training triple: a positive item **i** of user **u** and an item **j**
    that is not among u's positives.

    :param train: :py:class:`InteractionStore`
    :param seed: int seed or ``numpy.random.Generator``
    :param user: Fixed user, or **None** for a uniformly drawn user with positives.
    :return: tuple(u, i, j), or **None** when every item is a positive of the user.
    """
    rng = _as_rng(seed)
    if user is None:
        candidates = train.users_with_positives()
        if not len(candidates):
            raise ValueError('No user has a training interaction')
        user = int(rng.choice(candidates))

    positives = train.positives[user]
    if not len(positives):
        raise ValueError('User {u} has no training interaction'.format(u=user))

    i = int(rng.choice(positives))
    j = _sample_negative(rng, positives, train.item_count)
    if j is None:
        _LOG.debug('Skipping user %d, every item is a positive', user)
        return None
    return int(user), i, j


def iter_train_batches(train, batch_size, seed, epoch=0):
    """
    Iterate over one epoch of training triples: every training interaction once,
    in random order, each with a fresh negative.

    :return: generator of :py:class:`TrainBatch`
    """
    rng = _as_rng((seed, epoch, 0x7a11))
    users, items = train.pairs()
    full = np.array([len(p) >= train.item_count for p in train.positives], dtype=bool)
    keep = ~full[users] if len(users) else np.zeros(0, dtype=bool)
    users, items = users[keep], items[keep]

    order = rng.permutation(len(users))
    users, items = users[order], items[order]

    codes = np.unique(users * train.item_count + items)
    negatives = rng.integers(0, train.item_count, len(users))
    clash = np.isin(users * train.item_count + negatives, codes)
    while np.any(clash):
        negatives[clash] = rng.integers(0, train.item_count, int(clash.sum()))
        clash = np.isin(users * train.item_count + negatives, codes)

    for start in range(0, len(users), batch_size):
        end = start + batch_size
        yield TrainBatch(users[start:end], items[start:end], negatives[start:end])


def sample_test_candidates(test, user, seed, train=None, negative_count=DEFAULT_NEGATIVE_CANDIDATES):
    """
    Pick one held-out positive of **user** and **negative_count** items the user has
    no observed interaction with (neither in **test** nor in **train**).

    :return: :py:class:`TestCandidates`
    """
    positives = test.positives[user]
    if not len(positives):
        raise ValueError('User {u} has no test interaction'.format(u=user))

    rng = _as_rng((seed, user))
    positive = int(rng.choice(positives))

    observed = positives if train is None else np.union1d(positives, train.positives[user])
    eligible = np.setdiff1d(np.arange(test.item_count), observed)
    if not len(eligible):
        raise ValueError('User {u} has interacted with every item'.format(u=user))

    flagged = len(eligible) < negative_count
    if flagged:
        _LOG.warning('User %d has only %d eligible negatives, sampling with replacement', user, len(eligible))
    negatives = rng.choice(eligible, negative_count, replace=flagged).astype(np.int64)
    return TestCandidates(int(user), positive, negatives, flagged)


def item_popularity(store):
    """
    Count the interactions of every item.

    :return: int64 array of length ``item_count``
    """
    _, items = store.pairs()
    return np.bincount(items, minlength=store.item_count).astype(np.int64)


def popularity_tertiles(store):
    """
    Label every item 0, 1 or 2 by ascending popularity; the three groups differ in
    size by at most one.  Ties are broken by item id.

    :return: int64 array of length ``item_count``
    """
    popularity = item_popularity(store)
    order = np.lexsort((np.arange(store.item_count), popularity))
    labels = np.empty(store.item_count, dtype=np.int64)
    for label, group in enumerate(np.array_split(order, 3)):
        labels[group] = label
    return labels


def load_dataset(interactions_path, kg_path, train_ratio, seed, rating_threshold=4.0, separator='::',
                 item_map_path=None):
    """
    Load interactions and KG, align items with entities and split.

    :return: :py:class:`Dataset`
    """
    store = load_interactions(interactions_path, rating_threshold=rating_threshold, separator=separator)
    item_tokens = store.items.tokens
    if item_map_path:
        mapping = load_item_map(item_map_path)
        item_tokens = [mapping.get(token, token) for token in item_tokens]
        if len(set(item_tokens)) != len(item_tokens):
            raise DataParseError('item map sends two items to the same entity', item_map_path)
    kg = load_kg(kg_path, item_tokens=item_tokens)
    train, test = split(store, train_ratio, seed)
    return Dataset(train, test, kg)
