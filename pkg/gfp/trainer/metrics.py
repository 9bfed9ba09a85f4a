# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import csv
import logging
import os

log = logging.getLogger(__name__)

BASE_COLUMNS = (
    "step",
    "critic_loss",
    "actor_loss",
    "actor_q_term",
    "actor_bc_term",
    "vabc_loss",
    "lambda",
    "mean_abs_q",
    "g_mean",
)
EVAL_COLUMNS = ("eval_score_actor", "eval_score_vabc")


def delta_column(delta):
    return "g_p_gt_%g" % delta


def metrics_columns(deltas):
    return list(BASE_COLUMNS) + [delta_column(d) for d in deltas] + list(EVAL_COLUMNS)


def format_value(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


class MetricsWriter(object):
    """ Streams one csv row per train step, LF line endings and minimal quoting """

    def __init__(self, path, columns, append=False):
        self.path = path
        self.columns = list(columns)
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        write_header = not append or not os.path.exists(path) or os.path.getsize(path) == 0
        self._fd = open(path, "a" if append else "w", newline="")
        self._writer = csv.writer(self._fd, lineterminator="\n")
        if write_header:
            self._writer.writerow(self.columns)

    def write(self, record):
        self._writer.writerow([format_value(record.get(column)) for column in self.columns])

    def flush(self):
        self._fd.flush()

    def close(self):
        if not self._fd.closed:
            self._fd.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path):
    with open(path, "r", newline="") as fd:
        return list(csv.DictReader(fd))


def truncate_metrics(path, step):
    """ Drops the rows written after `step`, the kept bytes are left untouched """
    if not os.path.exists(path):
        return 0
    with open(path, "r", newline="") as fd:
        lines = fd.readlines()
    kept = lines[:1] + [line for line in lines[1:] if int(line.split(",", 1)[0]) <= step]
    with open(path, "w", newline="") as fd:
        fd.writelines(kept)
    dropped = len(lines) - len(kept)
    if dropped:
        log.info("dropped %d metrics rows written after step %d" % (dropped, step))
    return dropped
