# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import csv
import logging
from collections import defaultdict

import numpy as np

from gfp.exceptions import ConfigError

log = logging.getLogger(__name__)

DEFAULT_TAUS = tuple(float(t) for t in range(0, 101, 5))
REQUIRED_COLUMNS = ("task", "algorithm", "score")


def read_scores(path):
    """ Reads (task, algorithm, score[, seed]) rows from a csv file """
    try:
        with open(path, "r", newline="") as fd:
            reader = csv.DictReader(fd)
            missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
            if missing:
                raise ConfigError("scores", "%s lacks the columns: %s" % (path, ", ".join(missing)))
            rows = list(reader)
    except FileNotFoundError:
        raise ConfigError("scores", "file not found: %s" % path)
    for row in rows:
        try:
            row["score"] = float(row["score"])
        except ValueError:
            raise ConfigError("scores", "score is not a number: %r" % row["score"])
    return rows


def average_seeds(rows):
    """ Mean score per (task, algorithm) over however many seeds are present """
    grouped = defaultdict(list)
    for row in rows:
        grouped[(row["algorithm"], row["task"])].append(float(row["score"]))
    return {key: float(np.mean(scores)) for key, scores in grouped.items()}


def performance_profile(rows, taus=DEFAULT_TAUS):
    """ Returns sorted (algorithm, tau, fraction of tasks scoring above tau) rows """
    if not rows:
        raise ConfigError("scores", "no score rows to profile")
    averaged = average_seeds(rows)
    by_algorithm = defaultdict(list)
    for (algorithm, _), score in averaged.items():
        by_algorithm[algorithm].append(score)
    profile = []
    for algorithm in sorted(by_algorithm):
        scores = np.array(by_algorithm[algorithm])
        for tau in sorted(taus):
            profile.append((algorithm, float(tau), float(np.mean(scores > tau))))
    log.debug("profiled %d algorithms over %d thresholds" % (len(by_algorithm), len(taus)))
    return profile
