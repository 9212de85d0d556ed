import json
import math

import numpy as np
from django.test import SimpleTestCase, override_settings
from rest_framework.exceptions import ValidationError

from src.networks.serializers import flatten_errors
from src.pipeline.serializers import parse_spec
from src.pipeline.specs import HypothesisError, SpecMode, StageKind

TOWER_BOX = {"a": math.exp(-1), "b": 1.0, "dim": 2}


def lipschitz_stage(domain, *blocks):
    return {
        "kind": "lipschitz_parallel",
        "domain": domain,
        "blocks": [{"dim": dim, "expr": expr, "lipschitz": lip} for dim, expr, lip in blocks],
    }


def document(*stages, mode="theorem1", norm="1", **extra):
    return {"mode": mode, "norm": norm, "stages": list(stages), **extra}


class SpecParsingTests(SimpleTestCase):
    def errors(self, doc) -> list[str]:
        with self.assertRaises(ValidationError) as ctx:
            parse_spec(doc)
        return flatten_errors(ctx.exception.detail)

    def test_power_block_accepted(self):
        spec = parse_spec(document(lipschitz_stage(TOWER_BOX, (2, "pow(x1,x2)", 1.0)), name="pow"))
        self.assertEqual((spec.input_dim, spec.output_dim, len(spec)), (2, 1, 1))
        self.assertEqual(spec.mode, SpecMode.THEOREM1)
        self.assertEqual(spec.norm, 1.0)
        self.assertEqual(spec.stages[0].kind, StageKind.LIPSCHITZ_PARALLEL)
        np.testing.assert_allclose(spec.stages[0].apply(np.array([[0.5, 0.5]])), [[0.5 ** 0.5]])

    def test_json_text_and_bytes(self):
        text = json.dumps(document(lipschitz_stage(TOWER_BOX, (2, "pow(x1,x2)", 1.0))))
        self.assertEqual(parse_spec(text).input_dim, 2)
        self.assertEqual(parse_spec(text.encode()).input_dim, 2)
        self.assertTrue(self.errors("{not json")[0].startswith("document: invalid JSON"))

    def test_expression_errors_carry_their_path(self):
        lines = self.errors(document(lipschitz_stage(TOWER_BOX, (2, "pow(x0,x1)", 1.0))))
        self.assertEqual(lines, ["stages[0].blocks[0].expr: unknown identifier 'x0' at column 5"])

    def test_field_errors(self):
        lines = self.errors(document(lipschitz_stage({"a": 0.0, "b": 1.0, "dim": 4}, (4, "x1", 1.0))))
        self.assertEqual(lines, ["stages[0].blocks[0].dim: Block dimension 4 exceeds the limit 3."])
        lines = self.errors(document({"kind": "lipschitz_parallel", "domain": TOWER_BOX, "partition": [2]}))
        self.assertIn("stages[0].blocks: Lipschitz stages need a list of blocks.", lines)
        lines = self.errors(document({"kind": "ext_max", "domain": TOWER_BOX, "partition": [2]}, mode="theorem2"))
        self.assertTrue(lines[0].startswith("stages[0]: ext_max stages act on the whole domain"))
        self.assertIn("norm", self.errors(document(lipschitz_stage(TOWER_BOX, (2, "x1", 1.0)), norm="3"))[0])
        self.assertIn("stages", self.errors({"mode": "theorem1", "norm": "1", "stages": []})[0])

    def test_theorem1_products_need_small_domain(self):
        doc = document({"kind": "product_parallel", "domain": {"a": -0.5, "b": 0.5, "dim": 2}, "partition": [2]})
        with self.assertRaises(HypothesisError) as ctx:
            parse_spec(doc)
        self.assertEqual(ctx.exception.path, "stages[0].domain")
        self.assertIn("[-1/8, 1/8]", flatten_errors(ctx.exception.detail)[0])
        doc["mode"] = "theorem2"
        self.assertEqual(parse_spec(doc).output_dim, 1)

    def test_running_stages_need_theorem2(self):
        doc = document({"kind": "ext_prod", "domain": {"a": -1.0, "b": 1.0, "dim": 3}})
        self.assertEqual(self.errors(doc), ["stages[0].kind: ext_prod stages are only allowed in theorem2 mode"])

    def test_understated_lipschitz_constant(self):
        doc = document(lipschitz_stage({"a": 0.0, "b": 1.0, "dim": 1}, (1, "pow(x1,2)", 1.0)), mode="theorem2")
        [line] = self.errors(doc)
        self.assertTrue(line.startswith("stages[0].blocks[0].lipschitz: declared Lipschitz constant 1 is below"))
        doc["stages"][0]["blocks"][0]["lipschitz"] = 2.0
        self.assertEqual(parse_spec(doc).stages[0].blocks[0].lipschitz, 2.0)
        doc["mode"] = "theorem1"
        self.assertEqual(self.errors(doc), ["stages[0].blocks[0].lipschitz: theorem1 mode needs Lipschitz constants <= 1"])

    def test_undefined_expression(self):
        doc = document(lipschitz_stage({"a": -1.0, "b": 1.0, "dim": 1}, (1, "ln(x1 + 2) - ln(x1)", 1.0)))
        [line] = self.errors(doc)
        self.assertTrue(line.startswith("stages[0].blocks[0].expr:"))
        self.assertIn("is not defined", line)

    def test_block_coverage(self):
        doc = document(lipschitz_stage(TOWER_BOX, (1, "x1", 1.0)))
        self.assertEqual(self.errors(doc), ["stages[0].domain: blocks cover 1 coordinates but the domain has dimension 2"])
        doc = document(lipschitz_stage({"a": 0.0, "b": 1.0, "dim": 2}, (2, "x1", 1.0)), mode="theorem2")
        self.assertEqual(parse_spec(doc).output_dim, 1)

    def test_chain_mismatch(self):
        unit = {"a": 0.0, "b": 1.0, "dim": 2}
        doc = document(
            lipschitz_stage(unit, (1, "x1", 1.0), (1, "x1", 1.0)),
            {"kind": "max_parallel", "domain": {"a": 0.0, "b": 1.0, "dim": 3}, "partition": [3]},
        )
        self.assertEqual(
            self.errors(doc),
            ["stages[1].domain: stage 1 produces 2 values but this domain has dimension 3"],
        )

    def test_range_must_fit_the_next_domain(self):
        unit = {"a": 0.0, "b": 1.0, "dim": 1}
        doc = document(
            lipschitz_stage(unit, (1, "2*x1", 2.0)),
            {"kind": "max_parallel", "domain": unit, "partition": [1]},
            mode="theorem2",
        )
        [line] = self.errors(doc)
        self.assertTrue(line.startswith("stages[0]: range ["))
        self.assertIn(", 2] is not provably inside the next domain [0, 1]", line)
        doc["stages"][1]["domain"] = {"a": 0.0, "b": 2.0, "dim": 1}
        self.assertEqual(len(parse_spec(doc)), 2)

    def test_zero_lipschitz_stage_after_the_first(self):
        unit = {"a": 0.0, "b": 1.0, "dim": 1}
        doc = document(lipschitz_stage(unit, (1, "x1", 1.0)), lipschitz_stage(unit, (1, "0*x1", 0.0)))
        self.assertEqual(
            self.errors(doc),
            ["stages[1]: stage Lipschitz bound is 0, which leaves the earlier budgets unbounded"],
        )

    def test_size_hypothesis(self):
        doc = document(
            lipschitz_stage({"a": -5.0, "b": 5.0, "dim": 1}, (1, "x1", 1.0)),
            mode="theorem2", norm="inf", c=1, d=2,
        )
        [line] = self.errors(doc)
        self.assertIn("leaves [-c d^c, c d^c] = [-2, 2]", line)
        doc["stages"][0]["domain"] = {"a": -2.0, "b": 2.0, "dim": 1}
        doc["stages"][0]["blocks"][0] = {"dim": 1, "expr": "3*x1", "lipschitz": 3.0}
        self.assertEqual(self.errors(doc), ["stages[0].blocks[0].lipschitz: Lipschitz constant 3 exceeds c d^c = 2"])

    @override_settings(RELU_FORGE_LIPSCHITZ_RTOL=0.5)
    def test_tolerance_comes_from_settings(self):
        doc = document(lipschitz_stage({"a": 0.0, "b": 1.0, "dim": 1}, (1, "pow(x1,2)", 1.5)), mode="theorem2")
        self.assertEqual(len(parse_spec(doc)), 1)


class StageTests(SimpleTestCase):
    def test_construction_lipschitz(self):
        box = {"a": 0.0, "b": 1.0, "dim": 3}
        stage = parse_spec(document(lipschitz_stage(box, (1, "x1", 1.0), (2, "x1*x2/2", 1.0)))).stages[0]
        self.assertEqual(stage.construction_lipschitz(1.0, SpecMode.THEOREM1), 1.0)
        self.assertAlmostEqual(stage.construction_lipschitz(2.0, SpecMode.THEOREM1), math.sqrt(2.0))
        self.assertEqual(stage.construction_lipschitz(math.inf, SpecMode.THEOREM1), 2.0)

        running = parse_spec(document({"kind": "ext_max", "domain": {"a": -1, "b": 1, "dim": 4}}, mode="theorem2"))
        self.assertAlmostEqual(running.stages[0].construction_lipschitz(2.0, SpecMode.THEOREM2), 2.0)
        products = parse_spec(document(
            {"kind": "product_parallel", "domain": {"a": -0.1, "b": 0.1, "dim": 3}, "partition": [1, 2]}
        ))
        self.assertEqual(products.stages[0].construction_lipschitz(1.0, SpecMode.THEOREM1), 1.0)
        self.assertEqual(products.stages[0].construction_lipschitz(1.0, SpecMode.THEOREM2), 2.0)

    def test_declared_stage_lipschitz_overrides_when_larger(self):
        doc = document({"kind": "max_parallel", "domain": {"a": 0, "b": 1, "dim": 2}, "partition": [2], "lipschitz": 3.0},
                       mode="theorem2")
        self.assertEqual(parse_spec(doc).stages[0].construction_lipschitz(1.0, SpecMode.THEOREM2), 3.0)

    def test_output_ranges(self):
        doc = document(
            {"kind": "ext_prod", "domain": {"a": -1.0, "b": 0.5, "dim": 3}},
            {"kind": "ext_max", "domain": {"a": -1.0, "b": 1.0, "dim": 3}},
            mode="theorem2",
        )
        spec = parse_spec(doc)
        lo, hi = spec.stages[0].output_range
        self.assertAlmostEqual(lo, -1.0)
        self.assertAlmostEqual(hi, 1.0)
        self.assertEqual(spec.stages[1].output_range, (-1.0, 1.0))
        np.testing.assert_allclose(spec.stages[0].apply(np.array([[0.5, 0.5, 0.5]])), [[0.5, 0.25, 0.125]])

    def test_passthrough_blocks_are_exact(self):
        spec = parse_spec(document(lipschitz_stage(TOWER_BOX, (1, "x1", 1.0), (1, "pow(x1,2)/2", 1.0))))
        first, second = spec.stages[0].blocks
        self.assertTrue(first.to_block_spec(1.0).exact)
        self.assertFalse(second.to_block_spec(1.0).exact)
