# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import logging
import sys

import pbr.version
from cliff.app import App
from cliff.commandmanager import CommandManager

from gfp.config import settings

CLIENT_VERSION = pbr.version.VersionInfo("gfp").release_string()
log = logging.getLogger(__name__)


def global_arguments(parser):
    # fmt: off
    parser.add_argument(
        "--log-level",
        metavar="<level>",
        default=settings.LOG_LEVEL,
        help=("Log level of the gfp loggers, defaults to GFP_LOG_LEVEL or 'INFO'"),
    )
    # fmt: on
    return parser


class GfpCli(App):
    def __init__(self):
        super(GfpCli, self).__init__(
            description="Train and evaluate guided flow policies on synthetic offline datasets",
            version=CLIENT_VERSION,
            command_manager=CommandManager("gfp.cli"),
            deferred_help=True,
        )

    def initialize_app(self, argv):
        settings.setup_logging()
        log.debug("initialize_app")

    def prepare_to_run_command(self, cmd):
        log.debug("prepare_to_run_command: %s", cmd.__class__.__name__)

    def clean_up(self, cmd, result, err):
        log.debug("clean_up %s", cmd.__class__.__name__)
        if err:
            log.debug("got an error: %s", err)


def main(argv=sys.argv[1:]):
    gfpcli = GfpCli()
    return gfpcli.run(argv)


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
