from django.core.management.base import BaseCommand, CommandError

from src.certification.serializers import render_report
from src.networks.core import ShapeError
from src.pipeline.cli import (
    CERTIFICATION_FAILED,
    CliConfig,
    add_sampling_arguments,
    add_spec_arguments,
    check_eps,
    input_error,
    load_network,
    load_spec,
    write_bytes,
)
from src.pipeline.compiler import certify, stage_budgets


class Command(BaseCommand):
    help = "Certify an existing network file against a spec (sampled sup error and Lipschitz estimates)."

    def add_arguments(self, parser):
        add_spec_arguments(parser)
        parser.add_argument("--net", required=True, help="Network JSON path.")
        parser.add_argument("--eps", type=float, required=True, help="Accuracy claim to check, in (0, 1].")
        parser.add_argument("--out", default=None, help="Report JSON path (default: stdout).")
        add_sampling_arguments(parser)

    def handle(self, *args, **opts):
        config = CliConfig(
            subcommand="certify",
            inputs=[opts["net"]] + ([opts["spec"]] if opts.get("spec") else []),
            output=opts.get("out"),
            eps=check_eps(opts["eps"]),
            samples=opts.get("samples"),
            seed=opts.get("seed"),
        )
        spec = load_spec(opts)
        net = load_network(opts["net"])
        try:
            report = certify(net, spec, config.eps, config.sampler(), stage_budgets(spec, config.eps))
        except ShapeError as exc:
            raise input_error(str(exc)) from None

        rendered = render_report(report)
        if config.output:
            write_bytes(config.output, rendered)
        else:
            self.stdout.write(rendered.decode("utf-8"), ending="")
        if not report.passed:
            raise CommandError(
                f"certification failed: sup error {report.sup_error_estimate:.3g} (eps {config.eps:g})",
                returncode=CERTIFICATION_FAILED,
            )
