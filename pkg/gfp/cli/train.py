# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import logging

from cliff.command import Command

from gfp.cli.base import global_arguments
from gfp.cli.utils import apply_log_level, dump_json, exit_on_error
from gfp.config.train import load_config
from gfp.trainer.loop import train_run


class Train(Command):
    """ Trains the critic, the one-step actor and the flow policy from a JSON run configuration """

    log = logging.getLogger(__name__)

    def get_parser(self, prog_name):
        parser = super(Train, self).get_parser(prog_name)
        parser = global_arguments(parser)
        # fmt: off
        parser.add_argument(
            "--config",
            metavar="<path>",
            required=True,
            help=("JSON run configuration"),
        )
        parser.add_argument(
            "--set",
            metavar="<key=value>",
            dest="overrides",
            action="append",
            default=[],
            help=("Overrides a configuration field, dotted keys reach nested fields: --set guidance.mode=none"),
        )
        parser.add_argument(
            "--resume",
            action="store_true",
            help=("Continue from the run's checkpoint when one exists"),
        )
        # fmt: on
        return parser

    def take_action(self, args):
        apply_log_level(args)
        with exit_on_error(self.log):
            cfg = load_config(args.config, args.overrides)
            result = train_run(cfg, resume=args.resume)

        dump_json(
            self.app.stdout,
            {
                "metrics": result.metrics,
                "checkpoint": result.checkpoint,
                "steps": result.steps,
                "actor_score": result.final_actor_score,
                "vabc_score": result.final_vabc_score,
            },
        )
