import math

from django.conf import settings
from rest_framework import serializers

from src.networks.blocks import PartitionSpec
from src.networks.serializers import HypercubeSerializer, NormField, parse_json

from .expressions import ExpressionError, parse_expression
from .specs import PARTITIONED_KINDS, ExpressionBlock, FunctionSpec, SpecMode, StageKind, StageSpec, validate_hypotheses


def _finite(value, what="Value"):
    if not math.isfinite(value):
        raise serializers.ValidationError(f"{what} must be finite.")
    return value


class BlockSerializer(serializers.Serializer):
    dim = serializers.IntegerField(min_value=1)
    expr = serializers.CharField(trim_whitespace=True)
    lipschitz = serializers.FloatField(min_value=0)

    def validate_dim(self, value):
        limit = int(getattr(settings, "RELU_FORGE_MAX_BLOCK_DIM", 3))
        if value > limit:
            raise serializers.ValidationError(f"Block dimension {value} exceeds the limit {limit}.")
        return value

    def validate_lipschitz(self, value):
        return _finite(value, "Lipschitz constant")

    def validate(self, attrs):
        try:
            attrs["expression"] = parse_expression(attrs["expr"], attrs["dim"])
        except ExpressionError as exc:
            raise serializers.ValidationError({"expr": [str(exc)]})
        return attrs

    def create(self, validated_data):
        return ExpressionBlock(validated_data["dim"], validated_data["expression"], validated_data["lipschitz"])


class StageSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=StageKind.choices)
    domain = HypercubeSerializer()
    blocks = BlockSerializer(many=True, required=False, allow_empty=False)
    partition = serializers.ListField(child=serializers.IntegerField(min_value=1), required=False, allow_empty=False)
    lipschitz = serializers.FloatField(required=False, allow_null=True, min_value=0)

    def validate(self, attrs):
        kind = attrs["kind"]
        if kind == StageKind.LIPSCHITZ_PARALLEL:
            if not attrs.get("blocks"):
                raise serializers.ValidationError({"blocks": ["Lipschitz stages need a list of blocks."]})
            if attrs.get("partition"):
                raise serializers.ValidationError({"partition": ["Lipschitz stages take blocks, not a partition."]})
        elif kind in PARTITIONED_KINDS:
            if not attrs.get("partition"):
                raise serializers.ValidationError({"partition": [f"{kind} stages need a partition."]})
            if attrs.get("blocks"):
                raise serializers.ValidationError({"blocks": [f"{kind} stages take a partition, not blocks."]})
        elif attrs.get("blocks") or attrs.get("partition"):
            raise serializers.ValidationError(f"{kind} stages act on the whole domain; drop blocks and partition.")
        if attrs.get("lipschitz") is not None:
            _finite(attrs["lipschitz"], "Lipschitz constant")
        return attrs

    def create(self, validated_data):
        blocks = tuple(BlockSerializer().create(block) for block in validated_data.get("blocks") or [])
        partition = validated_data.get("partition")
        return StageSpec(
            kind=StageKind(validated_data["kind"]),
            domain=HypercubeSerializer().create(validated_data["domain"]),
            blocks=blocks,
            partition=PartitionSpec(tuple(partition)) if partition else None,
            lipschitz=validated_data.get("lipschitz"),
        )


class FunctionSpecSerializer(serializers.Serializer):
    """
    Staged spec document:
    {"mode": "theorem1", "norm": "1", "stages": [{"kind": ..., "domain": {"a": ..., "b": ..., "dim": ...}, ...}]}
    """
    name = serializers.CharField(required=False, allow_blank=True, default="")
    mode = serializers.ChoiceField(choices=SpecMode.choices)
    norm = NormField()
    c = serializers.FloatField(required=False, allow_null=True, min_value=1)
    d = serializers.IntegerField(required=False, allow_null=True, min_value=1)
    stages = StageSerializer(many=True, allow_empty=False)

    def create(self, validated_data):
        return FunctionSpec(
            stages=tuple(StageSerializer().create(stage) for stage in validated_data["stages"]),
            norm=validated_data["norm"],
            mode=SpecMode(validated_data["mode"]),
            name=validated_data.get("name", ""),
            c=validated_data.get("c"),
            d=validated_data.get("d"),
        )


def parse_spec(document) -> FunctionSpec:
    """
    Spec document (JSON text, bytes or an already decoded dict) -> validated
    FunctionSpec. Field errors raise ValidationError keyed by path
    (stages[1].blocks[0].expr); hypothesis violations raise HypothesisError.
    """
    data = parse_json(document) if isinstance(document, (str, bytes)) else document
    serializer = FunctionSpecSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return validate_hypotheses(serializer.save())
