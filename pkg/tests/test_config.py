import os
import shutil
import tempfile
import unittest

from mckgpy import config as config_module
from mckgpy.config import ConfigSyntaxError


class TestParse(unittest.TestCase):
    def test_defaults(self):
        config = config_module.make_config().validate()
        self.assertEqual(config.dim, 32)
        self.assertEqual(config.manifolds, 3)
        self.assertEqual(config.kappa_init, (-1.0, 0.0, 1.0))
        self.assertEqual(config.batch_size, 1024)
        self.assertEqual(config.lr, 1e-3)
        self.assertEqual(config.kappa_lr, 1e-4)
        self.assertEqual(config.margin_c, 0.1)
        self.assertEqual(config.patience, 20)
        self.assertEqual(config.optimizer, 'sgd')
        self.assertEqual(config.train_ratio, 0.7)

    def test_entries(self):
        text = ('# a comment\n'
                'dim = 16   # trailing comment\n'
                '\n'
                'kappa_init = -0.5, 0.5\n'
                'separator = \\t\n'
                'rating_threshold = none\n'
                'aggregator = GraphSage\n')
        config = config_module.parse_config_text(text).validate()
        self.assertEqual(config.dim, 16)
        self.assertEqual(config.kappa_init, (-0.5, 0.5))
        self.assertEqual(config.separator, '\t')
        self.assertIsNone(config.rating_threshold)
        self.assertEqual(config.aggregator, 'GraphSage')

    def test_overrides(self):
        config = config_module.parse_config_text('dim = 16\nseed = 3\n', dim='8')
        self.assertEqual(config.dim, 8)
        self.assertEqual(config.seed, 3)

    def test_line_numbers(self):
        with self.assertRaises(ConfigSyntaxError) as context:
            config_module.parse_config_text('dim = 16\n\nnot an entry\n')
        self.assertEqual(context.exception.line_number, 3)

        with self.assertRaises(ConfigSyntaxError) as context:
            config_module.parse_config_text('dim = 16\nunknown_key = 1\n')
        self.assertEqual(context.exception.line_number, 2)

        with self.assertRaises(ConfigSyntaxError) as context:
            config_module.parse_config_text('# x\nlr = fast\n')
        self.assertEqual(context.exception.line_number, 2)

    def test_presets(self):
        config = config_module.parse_config_text('preset = lastfm\ndepth = 2\n').validate()
        self.assertEqual(config.separator, '\t')
        self.assertEqual(config.sample_size, 4)
        self.assertEqual(config.depth, 2)
        self.assertIsNone(config.rating_threshold)

        config = config_module.make_config(preset='movielens').validate()
        self.assertEqual((config.sample_size, config.depth), (8, 3))
        self.assertEqual(config.rating_threshold, 4.0)

        with self.assertRaises(ConfigSyntaxError):
            config_module.parse_config_text('preset = netflix\n')

    def test_validate(self):
        for overrides in ({'depth': 4}, {'manifolds': 0}, {'dim': 1}, {'train_ratio': 1.0}, {'margin_c': -0.1},
                          {'aggregator': 'mean'}, {'margin': 'x'}, {'optimizer': 'rmsprop'}, {'patience': 0},
                          {'log_level': 'LOUD'}):
            with self.assertRaises(ConfigSyntaxError):
                config_module.make_config(**overrides).validate()

    def test_load_config(self):
        directory = tempfile.mkdtemp()
        try:
            path = os.path.join(directory, 'run.txt')
            with open(path, 'w', encoding='utf-8') as f:
                f.write('manifolds = 2\n')
            self.assertEqual(config_module.load_config(path, seed=5).manifolds, 2)
        finally:
            shutil.rmtree(directory)


class TestHash(unittest.TestCase):
    def test_render_round_trip(self):
        config = config_module.make_config(preset='lastfm', dim=8, kappa_init='-1, 1')
        parsed = config_module.parse_config_text(config_module.render_config(config))
        self.assertEqual(config_module.config_hash(parsed), config_module.config_hash(config))

    def test_stable(self):
        a = config_module.make_config(dim=8)
        b = config_module.make_config(dim=8)
        self.assertEqual(config_module.config_hash(a), config_module.config_hash(b))
        self.assertEqual(len(config_module.config_hash(a)), 12)

    def test_result_keys_only(self):
        base = config_module.make_config()
        same = base.replace(out='elsewhere', workers='4', log_level='DEBUG')
        self.assertEqual(config_module.config_hash(base), config_module.config_hash(same))
        self.assertNotEqual(config_module.config_hash(base), config_module.config_hash(base.replace(seed=1)))


if __name__ == '__main__':
    unittest.main()
