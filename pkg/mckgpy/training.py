# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Margin ranking loss, parameter updates and the epoch loop.

For a training triple ``(u, i, j)`` the loss is
``max(D(u, i)^2 - D(u, j)^2 + m, 0)`` where ``D`` is the fused global distance
and ``m`` comes from a :py:class:`MarginRule`.  Origin distances used by the
dynamic margins weight each subspace by the entity's own attention weight.

Gradients of a batch are computed over fixed size chunks, one tape per
chunk, and summed in chunk order; the number of worker threads therefore
never changes a result.
"""

import collections
import concurrent.futures
import logging
import math
import os

import numpy as np

from . import checkpoint
from . import diffengine as de
from . import evaluation
from . import fusion
from . import kgdata
from .model import KAPPA_BLOCK, MarginKind, Model, ModelSpec, as_leaves
from .private import fileio
from .stereographic import ShapeContractError

_LOG = logging.getLogger(__name__)

TRAIN_CHUNK = 128
"""
Triples per tape when computing batch gradients.
"""

CHECKPOINT_NAME = 'model.ckpt'

METRIC_LOG_NAME = 'metrics.csv'

ADAM_BETAS = (0.9, 0.999)

ADAM_EPS = 1e-8


class TrainingDivergedError(ArithmeticError):
    """
    Raised when a loss or gradient becomes NaN or infinite.
    """

    def __init__(self, message):
        super(TrainingDivergedError, self).__init__(message)


class MarginRule(collections.namedtuple('MarginRule', ['kind', 'c'])):
    """
    :var kind: :py:class:`mckgpy.model.MarginKind`
    :var c: Non-negative constant added to every margin.
    """

    def __new__(cls, kind, c=0.1):
        c = float(c)
        if not c >= 0.0:
            raise ValueError('Margin constant must not be negative, got {c}'.format(c=c))
        return super(MarginRule, cls).__new__(cls, MarginKind.parse(kind), c)

    @classmethod
    def from_spec(cls, spec):
        return cls(spec.margin, spec.margin_c)


def _check_distance(d, what):
    if np.any(de.value_of(d) < 0):
        raise ShapeContractError('{what} distance must not be negative'.format(what=what))


def margin(rule, dist_ui, dist_uo, dist_io):
    """
    Margin of a training pair.

    * Constant: ``c``
    * GeometryAware: ``sigmoid(d_ui / (d_uo + d_io)) + c``, the ratio being 0 when both origin distances are 0
    * Hicf: ``sigmoid(d_uo + d_io - d_ui) + c``

    :param rule: :py:class:`MarginRule`
    :param dist_ui: User to positive item distance.
    :param dist_uo: User to origin distance.
    :param dist_io: Item to origin distance.
    :raises ShapeContractError: for a negative distance.
    """
    _check_distance(dist_ui, 'User-item')
    _check_distance(dist_uo, 'User-origin')
    _check_distance(dist_io, 'Item-origin')

    if rule.kind is MarginKind.CONSTANT:
        return rule.c
    if rule.kind is MarginKind.GEOMETRY:
        denominator = dist_uo + dist_io
        positive = de.value_of(denominator) > 0
        safe = de.where(positive, denominator, 1.0)
        ratio = de.where(positive, dist_ui / safe, 0.0)
        return de.sigmoid(ratio) + rule.c
    return de.sigmoid(dist_uo + dist_io - dist_ui) + rule.c


def hinge_loss(dist_pos, dist_neg, m):
    """
    ``max(dist_pos^2 - dist_neg^2 + m, 0)``, element wise.
    """
    return de.relu(dist_pos * dist_pos - dist_neg * dist_neg + m)


def _triple_losses(model, users, positives, negatives, table, values):
    users = np.asarray(users, dtype=np.int64)
    count = len(users)
    pair = model.forward(np.concatenate([users, users]),
                         np.concatenate([np.asarray(positives, dtype=np.int64),
                                         np.asarray(negatives, dtype=np.int64)]),
                         table, values)
    kappas = [values[KAPPA_BLOCK][m] for m in range(model.spec.manifolds)]
    distances = fusion.global_distance(pair.users, pair.items, pair.user_weights, pair.item_weights, kappas,
                                       model.spec.taylor_eps)
    user_origin, item_origin = model.origin_distances(pair, values)

    dist_pos = distances[:count]
    dist_neg = distances[count:]
    m = margin(MarginRule.from_spec(model.spec), dist_pos, user_origin[:count], item_origin[:count])
    return hinge_loss(dist_pos, dist_neg, m)


def ranking_loss(model, users, positives, negatives, table, values=None):
    """
    Mean margin ranking loss over parallel arrays of training triples.

    :param model: :py:class:`mckgpy.model.Model`
    :param table: :py:class:`mckgpy.kgdata.ReceptiveTable`
    :param values: Optional parameter mapping (for example tape leaves).
    :return: scalar
    """
    values = model.params if values is None else values
    return de.mean(_triple_losses(model, users, positives, negatives, table, values))


class OptimState:
    """
    Optimizer settings, moment estimates and early stopping bookkeeping.
    """

    def __init__(self, lr=1e-3, kappa_lr=1e-4, batch_size=1024, optimizer='sgd', patience=20):
        if optimizer not in ('sgd', 'adam'):
            raise ValueError('Unknown optimizer "{name}"'.format(name=optimizer))
        self.lr = float(lr)
        self.kappa_lr = float(kappa_lr)
        self.batch_size = int(batch_size)
        self.optimizer = optimizer
        self.patience = int(patience)

        self.epoch = 0
        self.steps = 0
        self.best_hr = -math.inf
        self.best_ndcg = -math.inf
        self.best_key = None
        self.best_epoch = 0
        self.last_improved_epoch = 0

        self._first_moments = {}
        self._second_moments = {}

    @classmethod
    def from_config(cls, config):
        return cls(config.lr, config.kappa_lr, config.batch_size, config.optimizer, config.patience)

    def rate(self, name):
        return self.kappa_lr if name == KAPPA_BLOCK else self.lr

    def direction(self, name, grad):
        """
        Update direction of block **name** for gradient **grad**.
        """
        if self.optimizer == 'sgd':
            return grad
        beta1, beta2 = ADAM_BETAS
        m = self._first_moments.get(name, 0.0) * beta1 + (1.0 - beta1) * grad
        v = self._second_moments.get(name, 0.0) * beta2 + (1.0 - beta2) * grad * grad
        self._first_moments[name] = m
        self._second_moments[name] = v
        m_hat = m / (1.0 - beta1 ** self.steps)
        v_hat = v / (1.0 - beta2 ** self.steps)
        return m_hat / (np.sqrt(v_hat) + ADAM_EPS)

    def observe(self, epoch, result):
        """
        Track an evaluation at **epoch**.

        :return: tuple(improved, is_best); ``improved`` when HR@20 or NDCG@20 beats
                 its best so far, ``is_best`` when (HR@20, NDCG@20) beats the best
                 pair in lexicographic order.
        """
        cutoff = 20 if 20 in result.hr else max(result.hr)
        hr = result.hr[cutoff]
        ndcg = result.ndcg[cutoff]

        improved = hr > self.best_hr or ndcg > self.best_ndcg
        self.best_hr = max(self.best_hr, hr)
        self.best_ndcg = max(self.best_ndcg, ndcg)
        if improved:
            self.last_improved_epoch = epoch

        is_best = self.best_key is None or (hr, ndcg) > self.best_key
        if is_best:
            self.best_key = (hr, ndcg)
            self.best_epoch = epoch
        return improved, is_best

    def should_stop(self, epoch):
        return epoch - self.last_improved_epoch >= self.patience


def _chunk_gradients(model, users, positives, negatives, table):
    tape = de.Tape()
    leaves = as_leaves(tape, model.params)
    total = de.sum(_triple_losses(model, users, positives, negatives, table, leaves))
    try:
        grads = tape.backward(total)
    except de.NonFiniteAdjointError as e:
        raise TrainingDivergedError('Gradient diverged: {e}'.format(e=e))
    return float(de.value_of(total)), grads


def batch_gradients(model, batch, table, workers=1):
    """
    Mean loss and mean gradients of a :py:class:`mckgpy.kgdata.TrainBatch`.

    :return: tuple(loss, :py:class:`mckgpy.diffengine.GradientSet`)
    """
    count = len(batch)
    if not count:
        raise ValueError('Empty training batch')
    slices = [slice(start, start + TRAIN_CHUNK) for start in range(0, count, TRAIN_CHUNK)]

    def run(s):
        return _chunk_gradients(model, batch.users[s], batch.positives[s], batch.negatives[s], table)

    if workers > 1 and len(slices) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, slices))
    else:
        parts = [run(s) for s in slices]

    loss = 0.0
    grads = de.GradientSet()
    for part_loss, part_grads in parts:
        loss += part_loss
        for name, g in part_grads.items():
            grads[name] = g if name not in grads else grads[name] + g

    for name in grads:
        grads[name] = grads[name] / count
    return loss / count, grads


def apply_gradients(model, grads, opt):
    """
    Take one descent step on every block; the curvature block uses its own rate.

    :raises TrainingDivergedError: if a gradient is not finite.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError('Non-finite gradient for parameter block {name}'.format(name=name))

    opt.steps += 1
    updated = {}
    for name, g in grads.items():
        rate = opt.rate(name)
        direction = opt.direction(name, g)
        if rate == 0.0:
            continue
        updated[name] = model.params[name] - rate * direction
    model.update(updated)


def step(model, batch, table, opt, workers=1):
    """
    One optimization step over **batch**.

    :param model: :py:class:`mckgpy.model.Model`, updated in place.
    :param batch: :py:class:`mckgpy.kgdata.TrainBatch`
    :param table: :py:class:`mckgpy.kgdata.ReceptiveTable` of the current epoch.
    :param opt: :py:class:`OptimState`
    :return: Mean loss of the batch before the update.
    :raises TrainingDivergedError: on a non-finite loss or gradient.
    """
    loss, grads = batch_gradients(model, batch, table, workers)
    if not math.isfinite(loss):
        raise TrainingDivergedError('Loss is not finite')
    apply_gradients(model, grads, opt)
    return loss


EpochRecord = collections.namedtuple('EpochRecord', ['epoch', 'loss', 'result', 'kappas', 'best_hr'])
"""
One row of the metric log; ``result`` is **None** for epochs without evaluation.
"""

TrainResult = collections.namedtuple('TrainResult', ['model', 'best_epoch', 'history', 'stopped_early'])


def write_metric_log(path, history, manifolds, config_hash):
    """
    Write the metric log of every epoch so far.
    """
    rows = [evaluation.report_row(r.epoch, r.loss, r.result, r.kappas, None if r.best_hr == -math.inf else r.best_hr)
            for r in history]
    fileio.write_rows(path, rows, config_hash, header=evaluation.report_header(manifolds), separator=',')


def train(config, dataset, model=None, out_dir=None, config_hash='0' * 12):
    """
    Train with early stopping on HR@20 and NDCG@20.

    Every epoch resamples the receptive fields and iterates over all training
    interactions; evaluation uses a receptive table and candidate lists fixed
    for the whole run.  The model with the best (HR@20, NDCG@20) is kept and,
    with **out_dir**, written as a checkpoint next to the metric log.

    :param config: :py:class:`mckgpy.config.RunConfig`
    :param dataset: :py:class:`mckgpy.kgdata.Dataset`
    :param model: Initial :py:class:`mckgpy.model.Model`; initialized from **config** when omitted.
    :param out_dir: Output directory, or **None** to write nothing.
    :param config_hash: Hash written into the metric log header.
    :return: :py:class:`TrainResult`
    """
    train_store, test_store, kg = dataset.train, dataset.test, dataset.kg
    if model is None:
        spec = ModelSpec.from_dataset(config, dataset)
        model = Model.initialize(spec, config.seed, config.kappa_init)
    spec = model.spec
    opt = OptimState.from_config(config)

    candidates = evaluation.build_candidates(test_store, config.seed, train=train_store)
    eval_table = kgdata.sample_receptive_table(kg, spec.sample_size, config.seed, epoch=0)

    checkpoint_path = metric_path = None
    if out_dir is not None:
        fileio.ensure_dir(out_dir)
        checkpoint_path = os.path.join(out_dir, CHECKPOINT_NAME)
        metric_path = os.path.join(out_dir, METRIC_LOG_NAME)

    best_model = model.copy()
    history = []
    stopped_early = False

    for epoch in range(1, config.max_epochs + 1):
        opt.epoch = epoch
        table = kgdata.sample_receptive_table(kg, spec.sample_size, config.seed, epoch)

        total = 0.0
        count = 0
        for batch in kgdata.iter_train_batches(train_store, config.batch_size, config.seed, epoch):
            loss = step(model, batch, table, opt, config.workers)
            total += loss * len(batch)
            count += len(batch)
            _LOG.debug('epoch %d step %d loss %.6f', epoch, opt.steps, loss)
        epoch_loss = total / count if count else 0.0

        result = None
        if epoch % config.eval_every == 0 or epoch == config.max_epochs:
            result = evaluation.evaluate(model, test_store, config.seed, table=eval_table, candidates=candidates,
                                         batch_size=config.eval_batch_size, workers=config.workers)
            _, is_best = opt.observe(epoch, result)
            if is_best:
                best_model = model.copy()
                if checkpoint_path is not None:
                    checkpoint.write_file(checkpoint_path, best_model)

        history.append(EpochRecord(epoch, epoch_loss, result, model.kappas, opt.best_hr))
        if metric_path is not None:
            write_metric_log(metric_path, history, spec.manifolds, config_hash)

        if result is not None:
            _LOG.info('epoch %d loss %.6f HR@10 %.4f HR@20 %.4f NDCG@10 %.4f NDCG@20 %.4f kappa %s',
                      epoch, epoch_loss, result.hr.get(10, float('nan')), result.hr.get(20, float('nan')),
                      result.ndcg.get(10, float('nan')), result.ndcg.get(20, float('nan')),
                      ', '.join('{k:.4f}'.format(k=k) for k in model.kappas))
            if opt.should_stop(epoch):
                _LOG.info('Early stop at epoch %d, best epoch %d', epoch, opt.best_epoch)
                stopped_early = True
                break
        else:
            _LOG.info('epoch %d loss %.6f kappa %s', epoch, epoch_loss,
                      ', '.join('{k:.4f}'.format(k=k) for k in model.kappas))

    if opt.best_key is None and checkpoint_path is not None:
        checkpoint.write_file(checkpoint_path, best_model)

    return TrainResult(best_model, opt.best_epoch, history, stopped_early)
