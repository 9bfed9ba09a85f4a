# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import logging

from cliff.lister import Lister

from gfp.cli.base import global_arguments
from gfp.cli.utils import apply_log_level, exit_on_error, parse_floats, write_csv
from gfp.trainer.profile import DEFAULT_TAUS, performance_profile, read_scores

PROFILE_COLUMNS = ("algorithm", "tau", "fraction")


class Profile(Lister):
    """ Fraction of tasks on which each algorithm's seed-averaged score exceeds a threshold """

    log = logging.getLogger(__name__)
    formatter_default = "csv"

    def get_parser(self, prog_name):
        parser = super(Profile, self).get_parser(prog_name)
        parser = global_arguments(parser)
        # fmt: off
        parser.add_argument(
            "--scores",
            metavar="<path>",
            required=True,
            help=("CSV file with task, algorithm and score columns, plus an optional seed column"),
        )
        parser.add_argument(
            "--taus",
            metavar="<values>",
            default=None,
            help=("Comma separated thresholds (default: 0 to 100 in steps of 5)"),
        )
        parser.add_argument(
            "--out",
            metavar="<path>",
            default=None,
            help=("Also write the profile to this CSV file"),
        )
        # fmt: on
        return parser

    def take_action(self, args):
        apply_log_level(args)
        with exit_on_error(self.log):
            taus = parse_floats(args.taus, "taus") if args.taus else DEFAULT_TAUS
            rows = performance_profile(read_scores(args.scores), taus)

        if args.out:
            write_csv(args.out, PROFILE_COLUMNS, rows)
        return PROFILE_COLUMNS, rows
