from django.core.management.base import BaseCommand, CommandError

from src.certification.serializers import render_report
from src.networks.serializers import serialize
from src.pipeline.cli import (
    CERTIFICATION_FAILED,
    CliConfig,
    add_sampling_arguments,
    add_spec_arguments,
    check_eps,
    input_error,
    load_spec,
    write_bytes,
)
from src.pipeline.compiler import StageBuildError, build


class Command(BaseCommand):
    help = "Compile a staged spec into one network, certify it and write network + report JSON."

    def add_arguments(self, parser):
        add_spec_arguments(parser)
        parser.add_argument("--eps", type=float, required=True, help="Target accuracy in (0, 1].")
        parser.add_argument("--out", required=True, help="Network JSON output path.")
        parser.add_argument("--report", default=None, help="Report JSON path (default: <out>.report.json).")
        add_sampling_arguments(parser)

    def handle(self, *args, **opts):
        config = CliConfig(
            subcommand="build",
            inputs=[opts["spec"]] if opts.get("spec") else [],
            output=opts["out"],
            eps=check_eps(opts["eps"]),
            samples=opts.get("samples"),
            seed=opts.get("seed"),
        )
        spec = load_spec(opts)

        try:
            result = build(spec, config.eps, config.sampler())
        except StageBuildError as exc:
            raise input_error(str(exc)) from None

        report_path = opts.get("report") or f"{config.output}.report.json"
        write_bytes(config.output, serialize(result.net))
        write_bytes(report_path, render_report(result.report))

        report = result.report
        summary = (
            f"{spec.name or 'spec'}: {report.param_count} params, depth {report.depth}, "
            f"sup error {report.sup_error_estimate:.3g} (eps {config.eps:g})"
        )
        if not report.passed:
            raise CommandError(f"certification failed: {summary}", returncode=CERTIFICATION_FAILED)
        self.stdout.write(self.style.SUCCESS(f"{summary}; wrote {config.output} and {report_path}"))
