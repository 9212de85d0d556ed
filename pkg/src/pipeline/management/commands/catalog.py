from django.core.management.base import BaseCommand

from src.networks.serializers import render_json
from src.pipeline.cli import input_error, parse_options
from src.pipeline.families import FAMILIES, family_document


class Command(BaseCommand):
    help = "List the built-in families, or print one family's spec document with --export."

    def add_arguments(self, parser):
        parser.add_argument("--export", metavar="NAME", default=None, help="Print the spec document of this family.")
        parser.add_argument("--dim", type=int, default=None, help="Dimension d for --export.")
        parser.add_argument("--option", action="append", default=[], metavar="KEY=VALUE", help="Family option.")

    def handle(self, *args, **opts):
        if opts.get("export"):
            if opts.get("dim") is None:
                raise input_error("--export needs --dim")
            try:
                document = family_document(opts["export"], opts["dim"], **parse_options(opts["option"]))
            except ValueError as exc:
                raise input_error(str(exc)) from None
            self.stdout.write(render_json(document, indent=2).decode("utf-8"), ending="")
            return

        width = max(len(name) for name in FAMILIES)
        for family in FAMILIES.values():
            options = ", ".join(f"{k}={v}" for k, v in family.options.items()) or "-"
            self.stdout.write(
                f"{family.name:<{width}}  example {family.example}  {family.mode}  norm {family.norm}  "
                f"options {options}  {family.description}"
            )
