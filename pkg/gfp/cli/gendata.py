# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import logging
import os

from cliff.show import ShowOne

from gfp.cli.base import global_arguments
from gfp.cli.utils import apply_log_level, exit_on_error
from gfp.envs.dataset import generate_dataset, parse_mix, save_dataset
from gfp.envs.specs import ENVIRONMENTS, get_env_spec


class GenerateDataset(ShowOne):
    """ Generates an offline dataset by rolling out a mix of behavior policies """

    log = logging.getLogger(__name__)
    formatter_default = "json"

    def get_parser(self, prog_name):
        parser = super(GenerateDataset, self).get_parser(prog_name)
        parser = global_arguments(parser)
        # fmt: off
        parser.add_argument(
            "--env",
            metavar="<env>",
            required=True,
            help=("Environment to roll out, one of: %s" % ", ".join(sorted(ENVIRONMENTS))),
        )
        parser.add_argument(
            "--n",
            metavar="<transitions>",
            type=int,
            required=True,
            help=("Number of transitions to collect"),
        )
        parser.add_argument(
            "--mix",
            metavar="<name=weight,...>",
            required=True,
            help=("Behavior mix, weights over expert, noisy-expert, random and low-mode summing to 1"),
        )
        parser.add_argument(
            "--seed",
            metavar="<seed>",
            type=int,
            default=0,
            help=("Seed of the generator (default: 0)"),
        )
        parser.add_argument(
            "--out",
            metavar="<directory>",
            required=True,
            help=("Directory to write manifest.json and the column files to"),
        )
        # fmt: on
        return parser

    def take_action(self, args):
        apply_log_level(args)
        with exit_on_error(self.log):
            spec = get_env_spec(args.env)
            dataset = generate_dataset(spec, args.n, parse_mix(args.mix), args.seed)
            save_dataset(dataset, args.out)

        summary = dataset.summary()
        summary["path"] = os.path.abspath(args.out)
        columns = sorted(summary)
        return columns, [summary[column] for column in columns]
