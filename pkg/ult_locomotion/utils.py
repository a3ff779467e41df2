#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.
"""

import csv
import json
import os
import re

import numpy as np

from . import log

logger = log.setup_custom_logger("ult_locomotion")


def wrap_angle(x):
    """
    Wrap angles (scalar or array) into (-pi, pi]
    """
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2.0 * np.pi)


def spawn_generators(seed, count):
    """
    Create `count` independent generators from one seed.

    Arguments:
        seed {int} -- root seed
        count {int} -- number of generators

    Returns:
        list -- numpy Generators, one per agent
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def generator_state(rng):
    """
    JSON-serializable state of a numpy Generator
    """
    return rng.bit_generator.state


def restore_generator(state):
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng


def read_json_without_comments(input_file):
    """
    Parses a JSON file, stripping C-style comments.
    Returns an object.
    """
    with open(input_file, "r") as in_f:
        data = in_f.read()
        data = re.sub(r"\\\n", "", data)
        data = re.sub(r"(^|\s)//.*$", "", data, flags=re.M)
    return json.loads(data)


def write_json(data, output_file):
    with open(output_file, "w") as out_f:
        json.dump(data, out_f, indent=2, sort_keys=True)
        out_f.write("\n")


def format_value(value):
    """
    Render a metric value for CSV output; repr keeps floats round-trippable so
    that identical runs produce byte-identical files.
    """
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def append_csv_row(output_file, columns, row):
    """
    Append one row to a CSV file, writing the header first if the file is new.

    Arguments:
        output_file {str} -- path of the CSV file
        columns {list} -- column names, in order
        row {dict} -- values keyed by column name
    """
    new_file = not os.path.isfile(output_file)
    with open(output_file, "a", newline="") as out_f:
        writer = csv.writer(out_f)
        if new_file:
            writer.writerow(columns)
        writer.writerow([format_value(row.get(c, "")) for c in columns])


def write_csv(output_file, columns, rows):
    with open(output_file, "w", newline="") as out_f:
        writer = csv.writer(out_f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c, "")) for c in columns])


def read_csv(input_file):
    """
    Read a CSV file into a list of dicts (values stay strings)
    """
    with open(input_file, "r", newline="") as in_f:
        return list(csv.DictReader(in_f))


if __name__ == "__main__":
    print("this is only a module")
