# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import logging

from cliff.lister import Lister

from gfp.agent.gradients import gradient_suite
from gfp.cli.base import global_arguments
from gfp.cli.utils import apply_log_level

GRADCHECK_COLUMNS = ("network", "layer", "max_error", "passed")


class GradCheck(Lister):
    """
    Compares the analytic gradients of the critic, the actor, the flow network and the
    actor objective against central finite differences. Exits with 1 when any layer fails.
    """

    log = logging.getLogger(__name__)
    formatter_default = "csv"

    def get_parser(self, prog_name):
        parser = super(GradCheck, self).get_parser(prog_name)
        parser = global_arguments(parser)
        # fmt: off
        parser.add_argument(
            "--tolerance",
            metavar="<tolerance>",
            type=float,
            default=1e-4,
            help=("Largest accepted relative error (default: 1e-4)"),
        )
        parser.add_argument(
            "--corrupt",
            action="store_true",
            help=("Perturb one analytic gradient entry on purpose, the check must then fail"),
        )
        parser.add_argument(
            "--seed",
            metavar="<seed>",
            type=int,
            default=0,
            help=("Seed of the random networks and inputs (default: 0)"),
        )
        # fmt: on
        return parser

    def take_action(self, args):
        apply_log_level(args)
        reports = gradient_suite(tolerance=args.tolerance, corrupt=args.corrupt, seed=args.seed)
        rows = []
        for report in reports:
            for layer, error in sorted(report.per_layer().items()):
                rows.append((report.name, layer, error, error < report.tolerance))
            if not report.passed:
                self.log.error(
                    "gradient check failed for %s: max relative error %.3e >= %.1e"
                    % (report.name, report.max_error, report.tolerance)
                )
        self.failed = not all(report.passed for report in reports)
        return GRADCHECK_COLUMNS, rows

    def run(self, parsed_args):
        self.failed = False
        result = super(GradCheck, self).run(parsed_args)
        return 1 if self.failed else result
