# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed

from cliff.lister import Lister

from gfp.cli.base import global_arguments
from gfp.cli.utils import apply_log_level, exit_on_error, parse_floats, parse_ints, write_csv
from gfp.config import settings
from gfp.config.train import load_config, to_dict
from gfp.trainer.sweep import (
    AXES,
    DEFAULT_FACTORS,
    SweepSpec,
    point_config,
    run_point,
    sort_rows,
    sweep_columns,
    sweep_points,
)


class Sweep(Lister):
    """ Trains one run per (eta, alpha, seed) point and tabulates final scores and guidance statistics """

    log = logging.getLogger(__name__)
    formatter_default = "csv"

    def get_parser(self, prog_name):
        parser = super(Sweep, self).get_parser(prog_name)
        parser = global_arguments(parser)
        # fmt: off
        parser.add_argument(
            "--config",
            metavar="<path>",
            required=True,
            help=("Base JSON run configuration"),
        )
        parser.add_argument(
            "--set",
            metavar="<key=value>",
            dest="overrides",
            action="append",
            default=[],
            help=("Overrides a field of the base configuration"),
        )
        parser.add_argument(
            "--axis",
            choices=AXES,
            required=True,
            help=(
                "eta, alpha, both (their cartesian product) or around: the base point scaled by every\n"
                "pair of --factors"
            ),
        )
        parser.add_argument(
            "--eta-values",
            metavar="<values>",
            default="",
            help=("Comma separated temperatures, log-spaced values such as 1e-1,1e-3,1e-5 work best"),
        )
        parser.add_argument(
            "--alpha-values",
            metavar="<values>",
            default="",
            help=("Comma separated distillation coefficients"),
        )
        parser.add_argument(
            "--factors",
            metavar="<values>",
            default=",".join("%g" % f for f in DEFAULT_FACTORS),
            help=("Multiplicative factors of the 'around' axis (default: 0.1,1,10)"),
        )
        parser.add_argument(
            "--seeds",
            metavar="<seeds>",
            default="0",
            help=("Comma separated seeds (default: 0)"),
        )
        parser.add_argument(
            "--out",
            metavar="<directory>",
            required=True,
            help=("Directory receiving one sub-directory per run and sweep.csv"),
        )
        parser.add_argument(
            "--threads",
            metavar="<count>",
            type=int,
            default=settings.THREADS,
            help=("Size of the process pool, defaults to GFP_THREADS or the CPU count"),
        )
        # fmt: on
        return parser

    def take_action(self, args):
        apply_log_level(args)
        with exit_on_error(self.log):
            base = to_dict(load_config(args.config, args.overrides))
            spec = SweepSpec(
                base_config=base,
                axis=args.axis,
                eta_values=parse_floats(args.eta_values, "eta-values"),
                alpha_values=parse_floats(args.alpha_values, "alpha-values"),
                seeds=parse_ints(args.seeds, "seeds"),
                factors=parse_floats(args.factors, "factors"),
            )
            points = sweep_points(spec)
            # every point must produce a valid config before any run starts
            for eta, alpha, seed in points:
                point_config(base, eta, alpha, seed, args.out)

        os.makedirs(args.out, exist_ok=True)
        deltas = base["guidance_deltas"]
        self.log.info("running %d sweep points on %d workers" % (len(points), args.threads))
        rows = []
        with ProcessPoolExecutor(max_workers=max(1, args.threads)) as pool:
            futures = {
                pool.submit(run_point, base, eta, alpha, seed, args.out, deltas): (eta, alpha, seed)
                for eta, alpha, seed in points
            }
            for future in as_completed(futures):
                try:
                    rows.append(future.result())
                except Exception as e:
                    eta, alpha, seed = futures[future]
                    self.log.error("sweep worker crashed on eta=%s alpha=%s seed=%s: %s" % (eta, alpha, seed, e))
                    rows.append(
                        {
                            "eta": eta if eta is not None else base["guidance"]["eta"],
                            "alpha": alpha if alpha is not None else base["alpha"],
                            "seed": seed,
                            "status": "failed: %s" % e,
                        }
                    )

        columns = sweep_columns(deltas)
        table = [[row.get(column) for column in columns] for row in sort_rows(rows)]
        write_csv(os.path.join(args.out, "sweep.csv"), columns, table)
        return columns, table
