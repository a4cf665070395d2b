# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Experiment driver.

.. code-block:: text

    python -m mckgpy synth --out data/synth
    python -m mckgpy train --preset synthetic --interactions data/synth/interactions.dat \\
        --kg data/synth/kg.txt --out runs/synth
    python -m mckgpy eval --config runs/synth/config.txt --checkpoint runs/synth/model.ckpt
    python -m mckgpy ablate grid --config lastfm.conf

Exit codes: 0 ok, 2 input error, 3 checkpoint error, 4 numerical failure.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from . import checkpoint
from . import config as config_module
from . import diffengine
from . import evaluation
from . import kgdata
from . import training
from .kgdata import InputError
from .model import MarginKind
from .private import fileio
from .private import synthetic
from .propagation import AggregatorKind
from .stereographic import NumericalDegeneracyError

_LOG = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_CHECKPOINT_ERROR = 3
EXIT_NUMERICAL_ERROR = 4

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

ABLATION_DEPTHS = (1, 2, 3)

ABLATION_MANIFOLDS = (1, 2, 3, 4)

ABLATION_DIMS = (2, 4, 8, 16, 32)

ABLATION_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

# flag name -> config key
_OVERRIDE_FLAGS = [
    ('preset', 'preset', str),
    ('interactions', 'interactions', str),
    ('kg', 'kg', str),
    ('item-map', 'item_map', str),
    ('seed', 'seed', int),
    ('workers', 'workers', int),
    ('out', 'out', str),
    ('dim', 'dim', int),
    ('manifolds', 'manifolds', int),
    ('depth', 'depth', int),
    ('sample-size', 'sample_size', int),
    ('aggregator', 'aggregator', str),
    ('margin', 'margin', str),
    ('margin-c', 'margin_c', float),
    ('train-ratio', 'train_ratio', float),
    ('optimizer', 'optimizer', str),
    ('lr', 'lr', float),
    ('kappa-lr', 'kappa_lr', float),
    ('batch-size', 'batch_size', int),
    ('max-epochs', 'max_epochs', int),
    ('log-level', 'log_level', str),
]


def _common_parser():
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--config', help='key = value configuration file')
    for flag, key, kind in _OVERRIDE_FLAGS:
        parser.add_argument('--' + flag, dest=key, type=kind, default=None)
    return parser


def build_parser():
    """
    Build the argument parser of every command.
    """
    common = _common_parser()
    parser = argparse.ArgumentParser(prog='mckgpy', description='Mixed curvature knowledge graph recommender.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest='command')
    commands.required = True

    commands.add_parser('prepare', parents=[common], help='load, split and materialize a data set')
    commands.add_parser('train', parents=[common], help='train and write checkpoint and metric log')

    ev = commands.add_parser('eval', parents=[common], help='evaluate a checkpoint')
    ev.add_argument('--checkpoint', required=True)

    ablate = commands.add_parser('ablate', parents=[common], help='run an ablation sweep')
    ablate.add_argument('sweep', nargs='?', default='grid', choices=['grid', 'depth', 'manifolds', 'dims', 'ratios'])

    export = commands.add_parser('export', parents=[common], help='export item embeddings')
    export.add_argument('--checkpoint', required=True)
    export.add_argument('--stage', default='final', choices=['base', 'final'])

    commands.add_parser('stats', parents=[common], help='print data set statistics')

    synth = commands.add_parser('synth', parents=[common], help='write a planted cluster data set')
    synth.add_argument('--users', type=int, default=200)
    synth.add_argument('--items', type=int, default=300)
    synth.add_argument('--entities', type=int, default=500)
    return parser


def resolve_config(args):
    """
    Read the configuration file named by ``--config`` and apply flag overrides.

    A ``--preset`` flag fills in defaults that keys of the file still override.

    :return: validated :py:class:`mckgpy.config.RunConfig`
    """
    overrides = {key: getattr(args, key) for _, key, _ in _OVERRIDE_FLAGS if getattr(args, key, None) is not None}
    preset = overrides.pop('preset', None)
    config = config_module.make_config(preset=preset) if preset else config_module.make_config()
    if args.config:
        _require_file(args.config, 'configuration')
        with open(args.config, 'r', encoding='utf-8') as f:
            config = config._replace(**config_module.parse_config_entries(f.read()))
    return config.replace(**overrides).validate()


def _require_file(path, what):
    if not path:
        raise InputError('No {what} file given'.format(what=what))
    if not os.path.isfile(path):
        raise InputError('{what} file not found: {path}'.format(what=what.capitalize(), path=path))


def _load_dataset(config):
    _require_file(config.interactions, 'interactions')
    _require_file(config.kg, 'knowledge graph')
    if config.item_map:
        _require_file(config.item_map, 'item map')
    return kgdata.load_dataset(config.interactions, config.kg, config.train_ratio, config.seed,
                               rating_threshold=config.rating_threshold, separator=config.separator,
                               item_map_path=config.item_map or None)


def _write_config(config, out_dir):
    fileio.ensure_dir(out_dir)
    path = os.path.join(out_dir, 'config.txt')
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(fileio.HASH_HEADER.format(hash=config_module.config_hash(config)))
        f.write(config_module.render_config(config))
    return path


def cmd_prepare(config):
    """
    Load, split and write remaps and splits under ``<out>/prepared``.
    """
    dataset = _load_dataset(config)
    digest = config_module.config_hash(config)
    out_dir = os.path.join(config.out, 'prepared')
    fileio.ensure_dir(out_dir)

    fileio.write_remap(os.path.join(out_dir, 'users.tsv'), dataset.train.users, digest)
    fileio.write_remap(os.path.join(out_dir, 'items.tsv'), dataset.train.items, digest)
    fileio.write_remap(os.path.join(out_dir, 'entities.tsv'), dataset.kg.entities, digest)
    fileio.write_remap(os.path.join(out_dir, 'relations.tsv'), dataset.kg.relations, digest)
    fileio.write_interactions(os.path.join(out_dir, 'train.tsv'), dataset.train, digest)
    fileio.write_interactions(os.path.join(out_dir, 'test.tsv'), dataset.test, digest)
    _write_config(config, out_dir)

    _LOG.info('Prepared %d train and %d test interactions in %s',
              dataset.train.interaction_count, dataset.test.interaction_count, out_dir)
    return dataset


def _print_result(result):
    print(evaluation.format_table(result))


def cmd_train(config):
    """
    Train, write ``model.ckpt``, ``metrics.csv`` and ``report.csv`` under ``<out>``.
    """
    dataset = _load_dataset(config)
    digest = config_module.config_hash(config)
    _write_config(config, config.out)

    trained = training.train(config, dataset, out_dir=config.out, config_hash=digest)
    result = evaluation.evaluate(trained.model, dataset.test, config.seed, kg=dataset.kg, train=dataset.train,
                                 batch_size=config.eval_batch_size, workers=config.workers)
    evaluation.write_report(os.path.join(config.out, 'report.csv'), result, trained.model.kappas, digest,
                            epoch=trained.best_epoch)
    _print_result(result)
    return result


def _load_checkpoint(path, dataset):
    if not os.path.isfile(path):
        raise InputError('Checkpoint file not found: {path}'.format(path=path))
    model = checkpoint.read_file(path)
    checkpoint.check_compatible(model.spec, dataset.train.user_count, dataset.kg.entity_count,
                                dataset.kg.relation_count)
    return model


def cmd_eval(config, checkpoint_path):
    """
    Evaluate a checkpoint and write ``<out>/eval.csv``.
    """
    dataset = _load_dataset(config)
    model = _load_checkpoint(checkpoint_path, dataset)
    result = evaluation.evaluate(model, dataset.test, config.seed, kg=dataset.kg, train=dataset.train,
                                 batch_size=config.eval_batch_size, workers=config.workers)
    evaluation.write_report(os.path.join(config.out, 'eval.csv'), result, model.kappas,
                            config_module.config_hash(config))
    _print_result(result)
    return result


def ablation_cells(sweep):
    """
    Get the ``(name, overrides)`` cells of a sweep.
    """
    if sweep == 'grid':
        return [('{a}{m}'.format(a=aggregator.name, m=margin.suffix),
                 {'aggregator': aggregator.value, 'margin': margin.value})
                for aggregator in AggregatorKind for margin in MarginKind]
    if sweep == 'depth':
        return [('depth={k}'.format(k=k), {'depth': k}) for k in ABLATION_DEPTHS]
    if sweep == 'manifolds':
        return [('manifolds={m}'.format(m=m), {'manifolds': m}) for m in ABLATION_MANIFOLDS]
    if sweep == 'dims':
        return [('dim={d}'.format(d=d), {'dim': d}) for d in ABLATION_DIMS]
    if sweep == 'ratios':
        return [('train_ratio={r}'.format(r=r), {'train_ratio': r}) for r in ABLATION_RATIOS]
    raise ValueError('Unknown sweep "{sweep}"'.format(sweep=sweep))


def cmd_ablate(config, sweep):
    """
    Train every cell of a sweep and write ``<out>/ablate_<sweep>.csv``.

    A failing cell is logged and recorded with its error; the sweep continues.

    :return: list of (cell name, HR@20 or None, NDCG@20 or None, error or '')
    """
    rows = []
    datasets = {}
    for name, overrides in ablation_cells(sweep):
        cell_config = config.replace(**overrides)
        cell_dir = os.path.join(config.out, 'ablate', sweep, name.replace('=', '_'))
        try:
            cell_config.validate()
            key = cell_config.train_ratio
            if key not in datasets:
                datasets[key] = _load_dataset(cell_config)
            dataset = datasets[key]
            trained = training.train(cell_config, dataset, out_dir=cell_dir,
                                     config_hash=config_module.config_hash(cell_config))
            result = evaluation.evaluate(trained.model, dataset.test, cell_config.seed, kg=dataset.kg,
                                         train=dataset.train, batch_size=cell_config.eval_batch_size,
                                         workers=cell_config.workers)
            rows.append((name, result.hr[20], result.ndcg[20], ''))
            _LOG.info('Ablation cell %s: HR@20 %.4f NDCG@20 %.4f', name, result.hr[20], result.ndcg[20])
        except (InputError, kgdata.DataParseError):
            raise
        except Exception as e:
            _LOG.warning('Ablation cell %s failed: %s', name, e)
            rows.append((name, None, None, '{kind}: {e}'.format(kind=type(e).__name__, e=e)))

    path = os.path.join(config.out, 'ablate_{sweep}.csv'.format(sweep=sweep))
    fileio.write_rows(path, [(n, fileio.format_float(h), fileio.format_float(g), err.replace(',', ';'))
                             for n, h, g, err in rows],
                      config_module.config_hash(config), header=('cell', 'hr@20', 'ndcg@20', 'error'),
                      separator=',')

    print('{:<24}{:>10}{:>10}'.format('cell', 'HR@20', 'NDCG@20'))
    for name, hr, ndcg, error in rows:
        if error:
            print('{:<24}{:>10}{:>10}  {e}'.format(name, '-', '-', e=error))
        else:
            print('{:<24}{:>10.4f}{:>10.4f}'.format(name, hr, ndcg))
    return rows


def cmd_export(config, checkpoint_path, stage='final'):
    """
    Write one row per item: id, token, popularity tertile, then the coordinates of
    every subspace, to ``<out>/embeddings_<stage>.tsv``.
    """
    dataset = _load_dataset(config)
    model = _load_checkpoint(checkpoint_path, dataset)
    items = np.arange(dataset.train.item_count, dtype=np.int64)
    table = kgdata.sample_receptive_table(dataset.kg, model.spec.sample_size, config.seed, epoch=0)
    points = model.item_points(items, table, stage=stage)
    tertiles = kgdata.popularity_tertiles(dataset.train)

    header = ['item', 'token', 'tertile'] + ['m{m}_{j}'.format(m=m + 1, j=j)
                                              for m in range(model.spec.manifolds) for j in range(model.spec.dim)]
    rows = []
    for item in items:
        coords = np.concatenate([p[item] for p in points])
        rows.append([str(item), dataset.train.items[item], str(tertiles[item])] +
                    ['{v:.10g}'.format(v=v) for v in coords])

    path = os.path.join(config.out, 'embeddings_{stage}.tsv'.format(stage=stage))
    fileio.write_rows(path, rows, config_module.config_hash(config), header=header)
    _LOG.info('Exported %d items to %s', len(rows), path)
    return path


def cmd_stats(config):
    """
    Print users, items, interactions, entities, relations and triples.
    """
    dataset = _load_dataset(config)
    stats = [
        ('users', dataset.train.user_count),
        ('items', dataset.train.item_count),
        ('interactions', dataset.train.interaction_count + dataset.test.interaction_count),
        ('train interactions', dataset.train.interaction_count),
        ('test interactions', dataset.test.interaction_count),
        ('entities', dataset.kg.entity_count),
        ('relations', len(dataset.kg.relations)),
        ('kg triples', dataset.kg.triple_count),
    ]
    for name, value in stats:
        print('{:<20}{:>12}'.format(name, value))
    return stats


def cmd_synth(config, users=200, items=300, entities=500):
    """
    Write a planted cluster data set into ``<out>``.
    """
    data = synthetic.generate(users=users, items=items, entities=entities, seed=config.seed)
    paths = synthetic.write(config.out, data, config_module.config_hash(config))
    _LOG.info('Wrote synthetic data set to %s and %s', *paths)
    return paths


def _run(args):
    config = resolve_config(args)
    logging.getLogger().setLevel(config.log_level.upper())

    if args.command == 'prepare':
        cmd_prepare(config)
    elif args.command == 'train':
        cmd_train(config)
    elif args.command == 'eval':
        cmd_eval(config, args.checkpoint)
    elif args.command == 'ablate':
        cmd_ablate(config, args.sweep)
    elif args.command == 'export':
        cmd_export(config, args.checkpoint, args.stage)
    elif args.command == 'stats':
        cmd_stats(config)
    elif args.command == 'synth':
        cmd_synth(config, args.users, args.items, args.entities)


def main(argv=None):
    """
    Command line entry point.

    :return: exit code
    """
    args = build_parser().parse_args(argv)
    level = (args.log_level or 'INFO').upper()
    logging.basicConfig(level=level if level in config_module.LOG_LEVELS else 'INFO', format=LOG_FORMAT)

    try:
        _run(args)
    except checkpoint.CheckpointFormatError as e:
        _LOG.error('Checkpoint error: %s', e)
        return EXIT_CHECKPOINT_ERROR
    except (training.TrainingDivergedError, diffengine.NonFiniteAdjointError, NumericalDegeneracyError) as e:
        _LOG.error('Numerical failure: %s', e)
        return EXIT_NUMERICAL_ERROR
    except (InputError, ValueError, OSError) as e:
        _LOG.error('Input error: %s', e)
        return EXIT_INPUT_ERROR
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
