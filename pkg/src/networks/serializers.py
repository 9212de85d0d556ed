import json
import math

import numpy as np
from rest_framework import serializers
from rest_framework.renderers import JSONRenderer

from .core import Hypercube, Layer, Network, ShapeError


# --- Small shared helpers for JSON documents ---
def _reject_constant(token):
    raise ValueError(f"non-finite number {token} is not allowed")


def parse_json(raw: bytes | str):
    """Decode a JSON document; NaN/Infinity tokens and syntax errors become ValidationErrors."""
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        return json.loads(raw, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise serializers.ValidationError(
            {"document": [f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"]}
        )
    except ValueError as exc:
        raise serializers.ValidationError({"document": [str(exc)]})


def render_json(data, indent: int | None = None) -> bytes:
    context = {"indent": indent} if indent else None
    out = JSONRenderer().render(data, renderer_context=context)
    return out if out.endswith(b"\n") else out + b"\n"


def flatten_errors(detail, prefix: str = "") -> list[str]:
    """
    Turn a nested DRF error detail into "path: message" lines, e.g.
    {"layers": [{}, {"weights": ["..."]}]} -> ["layers[1].weights: ..."].
    """
    lines = []
    if isinstance(detail, dict):
        for key, value in detail.items():
            if key == "non_field_errors":
                path = prefix
            else:
                path = f"{prefix}.{key}" if prefix else str(key)
            lines.extend(flatten_errors(value, path))
    elif isinstance(detail, list):
        if detail and all(isinstance(item, str) for item in detail):
            for message in detail:
                lines.append(f"{prefix}: {message}" if prefix else str(message))
        else:
            for index, item in enumerate(detail):
                if item:
                    lines.extend(flatten_errors(item, f"{prefix}[{index}]"))
    elif detail:
        lines.append(f"{prefix}: {detail}" if prefix else str(detail))
    return lines


# --- Norm and domain fields shared by specs and reports ---
NORM_CHOICES = {"1": 1.0, "2": 2.0, "inf": math.inf}


def norm_label(p: float) -> str:
    if math.isinf(p):
        return "inf"
    return str(int(p)) if float(p).is_integer() else repr(float(p))


class NormField(serializers.Field):
    """ℓ_p norm exponent written as "1", "2" or "inf"."""

    default_error_messages = {
        "invalid": 'Norm must be one of "1", "2", "inf".',
    }

    def to_internal_value(self, data):
        key = str(data).strip().lower()
        if key in {"1.0", "2.0"}:
            key = key[0]
        if key in {"infinity", "∞"}:
            key = "inf"
        if key not in NORM_CHOICES:
            self.fail("invalid")
        return NORM_CHOICES[key]

    def to_representation(self, value):
        return norm_label(value)


class HypercubeSerializer(serializers.Serializer):
    a = serializers.FloatField()
    b = serializers.FloatField()
    dim = serializers.IntegerField(min_value=1)

    def validate(self, attrs):
        if not math.isfinite(attrs["a"]) or not math.isfinite(attrs["b"]):
            raise serializers.ValidationError("Domain bounds must be finite.")
        if attrs["b"] <= attrs["a"]:
            raise serializers.ValidationError({"b": "Upper bound must exceed the lower bound."})
        return attrs

    def create(self, validated_data):
        return Hypercube(validated_data["a"], validated_data["b"], validated_data["dim"])

    def to_representation(self, instance):
        if isinstance(instance, Hypercube):
            return {"a": instance.lower, "b": instance.upper, "dim": instance.dim}
        return super().to_representation(instance)


# --- Network documents ---
class LayerSerializer(serializers.Serializer):
    """One affine layer; `weights` is row-major, row i = output unit i."""
    weights = serializers.JSONField()
    bias = serializers.JSONField()

    def validate_weights(self, value):
        try:
            arr = np.array(value, dtype=np.float64)
        except (TypeError, ValueError):
            raise serializers.ValidationError("Weights must be a rectangular matrix of numbers.")
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise serializers.ValidationError("Weights must be a non-empty matrix (list of rows).")
        if not np.isfinite(arr).all():
            raise serializers.ValidationError("Weights contain non-finite entries.")
        return arr

    def validate_bias(self, value):
        try:
            arr = np.array(value, dtype=np.float64)
        except (TypeError, ValueError):
            raise serializers.ValidationError("Bias must be a list of numbers.")
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise serializers.ValidationError("Bias must be a non-empty vector.")
        if not np.isfinite(arr).all():
            raise serializers.ValidationError("Bias contains non-finite entries.")
        return arr

    def validate(self, attrs):
        if attrs["bias"].shape[0] != attrs["weights"].shape[0]:
            raise serializers.ValidationError(
                {"bias": f"Length {attrs['bias'].shape[0]} does not match "
                         f"{attrs['weights'].shape[0]} weight rows."}
            )
        return attrs

    def to_representation(self, instance: Layer):
        return {"weights": instance.weights.tolist(), "bias": instance.bias.tolist()}


class NetworkDocumentSerializer(serializers.Serializer):
    layers = LayerSerializer(many=True, allow_empty=False)

    def validate_layers(self, layers):
        for k in range(1, len(layers)):
            cols = layers[k]["weights"].shape[1]
            rows = layers[k - 1]["weights"].shape[0]
            if cols != rows:
                raise serializers.ValidationError(
                    f"layers[{k}].weights: has {cols} columns but layers[{k - 1}] "
                    f"produces {rows} outputs."
                )
        return layers

    def create(self, validated_data):
        try:
            return Network(Layer(l["weights"], l["bias"]) for l in validated_data["layers"])
        except (ShapeError, ValueError) as exc:
            raise serializers.ValidationError({"layers": [str(exc)]})

    def to_representation(self, instance: Network):
        return {"layers": [LayerSerializer(layer).data for layer in instance.layers]}


def serialize(net: Network) -> bytes:
    """Network -> JSON bytes. Floats use the shortest round-trip repr, so reloading is bit-exact."""
    return render_json(NetworkDocumentSerializer(net).data)


def deserialize(raw: bytes | str) -> Network:
    serializer = NetworkDocumentSerializer(data=parse_json(raw))
    serializer.is_valid(raise_exception=True)
    return serializer.save()
