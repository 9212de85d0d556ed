import csv
import io

from rest_framework import serializers

from src.networks.serializers import HypercubeSerializer, NormField, render_json

from .reports import CertReport, ScalingReport

CSV_HEADER = ("d", "eps", "params", "sup_error")


# --- Certification reports ---
class CertReportSerializer(serializers.Serializer):
    label = serializers.CharField(allow_blank=True)
    domain = HypercubeSerializer()
    norm = NormField()
    eps = serializers.FloatField()
    sup_error_estimate = serializers.FloatField()
    lipschitz_estimate = serializers.DictField(child=serializers.FloatField())
    lipschitz_bound = serializers.FloatField(allow_null=True, required=False)
    param_count = serializers.IntegerField()
    depth = serializers.IntegerField()
    sample_count = serializers.IntegerField()
    pair_count = serializers.IntegerField()
    seed = serializers.IntegerField()
    passed = serializers.BooleanField()
    stage_budgets = serializers.ListField(child=serializers.FloatField(), required=False)


# --- Scaling studies ---
class ScalingCellSerializer(serializers.Serializer):
    d = serializers.IntegerField()
    eps = serializers.FloatField()
    params = serializers.IntegerField(allow_null=True)
    sup_error = serializers.FloatField(allow_null=True)
    passed = serializers.BooleanField()
    error = serializers.CharField(allow_null=True)


class ScalingFitSerializer(serializers.Serializer):
    axis = serializers.CharField()
    fixed = serializers.FloatField(allow_null=True)
    slope = serializers.FloatField()
    intercept = serializers.FloatField()
    residual = serializers.FloatField()
    points = serializers.IntegerField()


class ScalingReportSerializer(serializers.Serializer):
    family = serializers.CharField()
    norm = NormField()
    seed = serializers.IntegerField()
    passed = serializers.BooleanField()
    cells = ScalingCellSerializer(many=True)
    fits = ScalingFitSerializer(many=True)


def render_report(report: CertReport) -> bytes:
    return render_json(CertReportSerializer(report).data, indent=2)


def render_scaling(report: ScalingReport) -> bytes:
    return render_json(ScalingReportSerializer(report).data, indent=2)


def scaling_csv(report: ScalingReport) -> str:
    """Header d,eps,params,sup_error; LF endings; empty fields where a cell failed to build."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for cell in report.cells:
        writer.writerow([
            cell.d,
            repr(float(cell.eps)),
            "" if cell.params is None else cell.params,
            "" if cell.sup_error is None else repr(float(cell.sup_error)),
        ])
    return out.getvalue()
