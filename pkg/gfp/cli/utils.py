# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import contextlib
import csv
import json
import sys

from gfp.config import settings
from gfp.exceptions import ConfigError, GfpError


def parse_floats(string, field):
    """ Parses a comma separated list of numbers such as '1e-1,1e-3' """
    try:
        return [float(item) for item in string.split(",") if item.strip()]
    except ValueError:
        raise ConfigError(field, "expected comma separated numbers, got %r" % string)


def parse_ints(string, field):
    try:
        return [int(item) for item in string.split(",") if item.strip()]
    except ValueError:
        raise ConfigError(field, "expected comma separated integers, got %r" % string)


def apply_log_level(args):
    if getattr(args, "log_level", None):
        settings.setup_logging(args.log_level.upper())


@contextlib.contextmanager
def exit_on_error(log):
    """ Logs gfp errors and exits with their exit code: 2 for usage and config errors, 1 for failed checks """
    try:
        yield
    except GfpError as e:
        log.error(str(e))
        sys.exit(e.exit_code)


def dump_json(stream, data):
    stream.write(json.dumps(data, sort_keys=True) + "\n")


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fd:
        writer = csv.writer(fd, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if value is None else value for value in row])
