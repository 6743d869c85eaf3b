"""Deterministic JSON and CSV writers for reports and artifacts.

Sorted keys, full-precision floats, no timestamps: identical inputs give
byte-identical files, so seeded runs can be diffed.
"""

import json

import numpy as np


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(_plain(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def write_matrix_csv(path, entries, row_labels, col_labels):
    """Entries as (i, j, value) triples over the given 1-based labels."""
    entries = np.asarray(entries)
    rows = (
        (int(row_labels[i]), int(col_labels[j]), float(entries[i, j]))
        for i in range(entries.shape[0])
        for j in range(entries.shape[1])
    )
    write_table_csv(path, ("i", "j", "value"), rows)


def write_sequence_csv(path, labels, values, value_name="value"):
    rows = ((int(i), float(v)) for i, v in zip(labels, values))
    write_table_csv(path, ("index", value_name), rows)
