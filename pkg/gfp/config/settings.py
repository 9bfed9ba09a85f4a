# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import logging.config
import os

from dynaconf import LazySettings

BASE_DIR = os.environ.get("GFP_BASE_DIR", os.path.expanduser("~/.gfp"))
DEFAULT_SETTINGS = os.path.join(BASE_DIR, "settings.yaml")

settings = LazySettings(
    environments=True,
    GLOBAL_ENV_FOR_DYNACONF="GFP",
    ENVVAR_FOR_DYNACONF="GFP_SETTINGS",
    SETTINGS_MODULE_FOR_DYNACONF=DEFAULT_SETTINGS,
)

# reread BASE_DIR since it might have gotten changed in the config file.
BASE_DIR = settings.get("BASE_DIR", BASE_DIR)

DEBUG = settings.get("DEBUG", False, "@bool")
LOG_LEVEL = settings.get("LOG_LEVEL", "DEBUG" if DEBUG else "INFO")

# Size of the process pool used by "gfp sweep"
THREADS = settings.get("THREADS", os.cpu_count() or 1, "@int")

# Monte-Carlo episodes used by the oracle to estimate the uniform-random return
ORACLE_EPISODES = settings.get("ORACLE_EPISODES", 100000, "@int")

# Long acceptance runs in the test suite are skipped unless this is enabled
SLOW_TESTS = settings.get("SLOW_TESTS", False, "@bool")

# stdout is reserved for json and csv documents, logs go to stderr.
# fmt: off
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {"normal": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"}},
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "normal",
            "level": LOG_LEVEL,
            "stream": "ext://sys.stderr",
        }
    },
    "loggers": {"gfp": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": 0}},
}
# fmt: on


def setup_logging(level=None):
    config = dict(LOGGING)
    if level is not None:
        config["handlers"] = {"console": dict(LOGGING["handlers"]["console"], level=level)}
        config["loggers"] = {"gfp": dict(LOGGING["loggers"]["gfp"], level=level)}
    logging.config.dictConfig(config)
