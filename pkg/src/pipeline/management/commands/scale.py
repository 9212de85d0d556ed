from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from src.certification.serializers import render_scaling, scaling_csv
from src.pipeline.cli import (
    CERTIFICATION_FAILED,
    CliConfig,
    add_sampling_arguments,
    check_eps,
    input_error,
    parse_dims,
    parse_floats,
    parse_options,
    write_bytes,
)
from src.pipeline.families import get_family
from src.pipeline.scaling import run_scaling


class Command(BaseCommand):
    help = "Build and certify a built-in family over a grid of (d, eps); writes CSV plus JSON with fitted exponents."

    def add_arguments(self, parser):
        parser.add_argument("--family", required=True, help="Built-in family name (see `catalog`).")
        parser.add_argument("--dims", required=True, help='Dimensions, "lo:hi" or "2,4,8".')
        parser.add_argument("--eps", required=True, help='Accuracies, e.g. "0.1,0.05".')
        parser.add_argument("--out", required=True, help="CSV output path.")
        parser.add_argument("--json", default=None, help="JSON output path (default: <out> with .json suffix).")
        parser.add_argument("--option", action="append", default=[], metavar="KEY=VALUE", help="Family option.")
        add_sampling_arguments(parser)

    def handle(self, *args, **opts):
        config = CliConfig(
            subcommand="scale",
            output=opts["out"],
            dims=parse_dims(opts["dims"]),
            eps_values=[check_eps(eps) for eps in parse_floats(opts["eps"], "--eps")],
            samples=opts.get("samples"),
            seed=opts.get("seed"),
        )
        try:
            get_family(opts["family"])
        except ValueError as exc:
            raise input_error(str(exc)) from None
        if min(config.dims) < 2:
            raise input_error("family dimensions start at 2")

        try:
            report = run_scaling(
                opts["family"], config.dims, config.eps_values, config.sampler(), **parse_options(opts["option"])
            )
        except ValueError as exc:
            raise input_error(str(exc)) from None

        json_path = opts.get("json") or str(Path(config.output).with_suffix(".json"))
        write_bytes(config.output, scaling_csv(report).encode("utf-8"))
        write_bytes(json_path, render_scaling(report))

        failed = [cell for cell in report.cells if not cell.passed]
        if failed:
            raise CommandError(
                f"{len(failed)} of {len(report.cells)} cells failed; see {json_path}",
                returncode=CERTIFICATION_FAILED,
            )
        self.stdout.write(self.style.SUCCESS(f"{len(report.cells)} cells certified; wrote {config.output} and {json_path}"))
