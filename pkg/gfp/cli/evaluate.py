# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import logging
import os

from cliff.show import ShowOne

from gfp.cli.base import global_arguments
from gfp.cli.utils import apply_log_level, exit_on_error
from gfp.config.train import from_dict
from gfp.exceptions import CheckpointMissingError
from gfp.kernel.io import read_json
from gfp.trainer.checkpoint import checkpoint_load
from gfp.trainer.evaluation import POLICIES
from gfp.trainer.loop import CONFIG_FILE, build_trainer, output_paths


class Evaluate(ShowOne):
    """ Scores the actor or the flow policy of a trained run """

    log = logging.getLogger(__name__)
    formatter_default = "json"

    def get_parser(self, prog_name):
        parser = super(Evaluate, self).get_parser(prog_name)
        parser = global_arguments(parser)
        # fmt: off
        parser.add_argument(
            "--run",
            metavar="<directory>",
            required=True,
            help=("Run directory holding config.json and the checkpoint"),
        )
        parser.add_argument(
            "--policy",
            choices=POLICIES,
            default="actor",
            help=("Policy to evaluate: the one-step actor or the flow policy ('vabc'), defaults to actor"),
        )
        parser.add_argument(
            "--episodes",
            metavar="<episodes>",
            type=int,
            default=100,
            help=("Number of evaluation episodes (default: 100)"),
        )
        parser.add_argument(
            "--seed",
            metavar="<seed>",
            type=int,
            default=0,
            help=("Seed of the per-episode noise streams (default: 0)"),
        )
        # fmt: on
        return parser

    def take_action(self, args):
        apply_log_level(args)
        with exit_on_error(self.log):
            config_path = os.path.join(args.run, CONFIG_FILE)
            if not os.path.exists(config_path):
                raise CheckpointMissingError(args.run)
            cfg = from_dict(read_json(config_path, field=CONFIG_FILE))
            trainer = build_trainer(cfg)
            checkpoint_load(output_paths(cfg)[1], trainer)
            result = trainer.evaluate(args.policy, episodes=args.episodes, seed=args.seed)

        report = result.to_dict()
        columns = sorted(report)
        return columns, [report[column] for column in columns]
