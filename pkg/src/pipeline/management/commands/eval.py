from django.core.management.base import BaseCommand

from src.networks.core import evaluate
from src.pipeline.cli import CliConfig, input_error, load_network, parse_floats


class Command(BaseCommand):
    help = "Evaluate a network file at one point; prints comma-separated outputs (17 significant digits)."

    def add_arguments(self, parser):
        parser.add_argument("--net", required=True, help="Network JSON path.")
        parser.add_argument("--point", required=True, help='Input point, e.g. "1,-2,0.5" (use --point=-1,... for a leading minus).')

    def handle(self, *args, **opts):
        config = CliConfig(subcommand="eval", inputs=[opts["net"]])
        net = load_network(config.inputs[0])
        point = parse_floats(opts["point"], "--point")
        if len(point) != net.input_dim:
            raise input_error(f"network expects {net.input_dim} inputs, got a point of dimension {len(point)}")
        values = evaluate(net, point)
        self.stdout.write(",".join(f"{value:.17g}" for value in values))
