# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Text output helpers.  Every text file starts with a ``# config-hash:`` line.
"""

import os
import re

HASH_HEADER = '# config-hash: {hash}\n'

_HASH_REGEX = re.compile(r'^#\s*config-hash:\s*(?P<hash>[0-9a-f]+)\s*$')


def ensure_dir(path):
    if path:
        os.makedirs(path, exist_ok=True)
    return path


def write_lines(path, lines, config_hash):
    """
    Write **lines** after the config hash header, with ``\\n`` line endings.
    """
    ensure_dir(os.path.dirname(path))
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(HASH_HEADER.format(hash=config_hash))
        for line in lines:
            f.write(line)
            f.write('\n')


def write_rows(path, rows, config_hash, header=None, separator='\t'):
    """
    Write separated rows, with an optional column header row.
    """
    lines = []
    if header is not None:
        lines.append(separator.join(header))
    lines.extend(separator.join(str(field) for field in row) for row in rows)
    write_lines(path, lines, config_hash)


def read_config_hash(path):
    """
    Get the config hash recorded in the first line of **path**, or **None**.
    """
    with open(path, 'r', encoding='utf-8') as f:
        match = _HASH_REGEX.match(f.readline())
    return match.group('hash') if match else None


def write_remap(path, vocabulary, config_hash):
    """
    Write ``token <TAB> id`` rows of a :py:class:`mckgpy.kgdata.Vocabulary`.
    """
    write_rows(path, ((token, index) for index, token in enumerate(vocabulary.tokens)), config_hash,
               header=('token', 'id'))


def write_interactions(path, store, config_hash):
    """
    Write ``user <TAB> item`` id rows of a :py:class:`mckgpy.kgdata.InteractionStore`.
    """
    users, items = store.pairs()
    write_rows(path, zip(users.tolist(), items.tolist()), config_hash, header=('user', 'item'))


def format_float(value):
    """
    Fixed precision rendering used in every metric file.
    """
    if value is None:
        return ''
    return '{v:.6f}'.format(v=value)
