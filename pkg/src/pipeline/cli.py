"""
Shared plumbing of the management commands: argument parsing, input loading
and the mapping from failures to exit codes (1 input error, 2 certification
failure).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from django.core.management.base import CommandError
from rest_framework.exceptions import ValidationError

from src.certification.certifier import SamplerConfig
from src.networks.core import Network
from src.networks.serializers import deserialize, flatten_errors

from .families import builtin_family
from .serializers import parse_spec
from .specs import FunctionSpec

INPUT_ERROR = 1
CERTIFICATION_FAILED = 2


@dataclass
class CliConfig:
    subcommand: str
    inputs: list[str] = field(default_factory=list)
    output: str | None = None
    eps: float | None = None
    dims: list[int] = field(default_factory=list)
    eps_values: list[float] = field(default_factory=list)
    samples: int | None = None
    seed: int | None = None

    def sampler(self) -> SamplerConfig:
        return SamplerConfig.from_settings(seed=self.seed, samples=self.samples)


def input_error(message: str) -> CommandError:
    return CommandError(message, returncode=INPUT_ERROR)


def add_sampling_arguments(parser):
    parser.add_argument("--seed", type=int, default=None, help="Sampler seed (default: RELU_FORGE_SEED).")
    parser.add_argument("--samples", type=int, default=None, help="Interior sample count.")


def add_spec_arguments(parser):
    parser.add_argument("spec", nargs="?", help="Spec document (JSON).")
    parser.add_argument("--family", help="Built-in family instead of a spec file.")
    parser.add_argument("--dim", type=int, help="Family dimension d.")
    parser.add_argument(
        "--option", action="append", default=[], metavar="KEY=VALUE",
        help="Family option, e.g. a=2 or half_width=0.05 (repeatable).",
    )


# --- Value parsing ---
def check_eps(eps: float) -> float:
    if not (math.isfinite(eps) and 0 < eps <= 1):
        raise input_error(f"eps must lie in (0, 1], got {eps}")
    return eps


def parse_floats(text: str, what: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise input_error(f"{what} must be comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in values):
        raise input_error(f"{what} must be finite, got {text!r}")
    return values


def parse_dims(text: str) -> list[int]:
    """"lo:hi" (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            lo, hi = (int(part) for part in text.split(":"))
            dims = list(range(lo, hi + 1))
        else:
            dims = [int(part) for part in text.split(",")]
    except ValueError:
        raise input_error(f"--dims must look like 2:6 or 2,4,8, got {text!r}") from None
    if not dims:
        raise input_error(f"--dims {text!r} is empty")
    return dims


def parse_options(pairs: list[str]) -> dict[str, float]:
    options = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise input_error(f"--option needs KEY=VALUE, got {pair!r}")
        try:
            number = float(value)
        except ValueError:
            raise input_error(f"--option {key} needs a number, got {value!r}") from None
        options[key.strip()] = int(number) if key.strip() == "c" else number
    return options


# --- Loading ---
def read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise input_error(f"cannot read {path}: {exc.strerror or exc}") from None


def write_bytes(path: str, data: bytes):
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise input_error(f"cannot write {path}: {exc.strerror or exc}") from None


def _validation_message(exc: ValidationError) -> str:
    return "\n".join(flatten_errors(exc.detail))


def load_spec(opts: dict) -> FunctionSpec:
    """The spec named by a positional path or by --family/--dim."""
    try:
        if opts.get("family"):
            if opts.get("spec"):
                raise input_error("give either a spec file or --family, not both")
            if opts.get("dim") is None:
                raise input_error("--family needs --dim")
            return builtin_family(opts["family"], opts["dim"], **parse_options(opts.get("option") or []))
        if not opts.get("spec"):
            raise input_error("a spec file or --family/--dim is required")
        return parse_spec(read_bytes(opts["spec"]))
    except ValidationError as exc:
        raise input_error(_validation_message(exc)) from None
    except ValueError as exc:
        raise input_error(str(exc)) from None


def load_network(path: str) -> Network:
    try:
        return deserialize(read_bytes(path))
    except ValidationError as exc:
        raise input_error(f"{path}:\n{_validation_message(exc)}") from None
