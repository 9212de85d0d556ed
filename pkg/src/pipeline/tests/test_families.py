import math

import numpy as np
from django.test import SimpleTestCase

from src.pipeline.compiler import reference_eval
from src.pipeline.families import (
    FAMILIES,
    builtin_family,
    family_document,
    get_family,
    nested_log_bounds,
)
from src.pipeline.specs import SpecMode, StageKind


class RegistryTests(SimpleTestCase):
    def test_catalog(self):
        self.assertEqual(
            list(FAMILIES), ["tower", "nested_log", "prodmax_tree", "powermax", "gauss_prod", "cos_max"]
        )
        self.assertEqual([f.example for f in FAMILIES.values()], [1, 2, 3, 4, 5, 6])
        self.assertEqual(get_family("powermax").p, math.inf)
        with self.assertRaisesMessage(ValueError, "unknown family 'spiral'"):
            get_family("spiral")

    def test_options_are_checked(self):
        with self.assertRaisesMessage(ValueError, "tower takes options none"):
            family_document("tower", 3, a=2.0)
        with self.assertRaisesMessage(ValueError, "needs d >= 2"):
            family_document("tower", 1)
        with self.assertRaisesMessage(ValueError, "a > 1"):
            family_document("nested_log", 3, a=1.0)
        with self.assertRaisesMessage(ValueError, "(0, 1/8]"):
            family_document("prodmax_tree", 2, a=0.5)

    def test_documents_are_plain_json(self):
        doc = family_document("gauss_prod", 3)
        self.assertEqual(doc["stages"][0]["blocks"][2]["expr"], "exp(-3*pow(x1,2))")
        self.assertEqual(doc["stages"][0]["domain"], {"a": -3.0, "b": 3.0, "dim": 3})


class TheoremOneFamilyTests(SimpleTestCase):
    def test_tower(self):
        spec = builtin_family("tower", 3)
        self.assertEqual(len(spec), 2)
        self.assertEqual(spec.mode, SpecMode.THEOREM1)
        self.assertEqual([s.input_dim for s in spec.stages], [3, 2])
        self.assertAlmostEqual(float(reference_eval(spec, [0.5, 0.5, 0.5])[0]), 0.5 ** (0.5 ** 0.5))
        self.assertAlmostEqual(float(reference_eval(spec, [0.5, 0.5, 0.5])[0]), 0.61255, places=5)
        self.assertEqual(len(builtin_family("tower", 5)), 4)

    def test_nested_log(self):
        bounds = nested_log_bounds(3, 2.0)
        self.assertAlmostEqual(bounds[1], 2.0 + math.log(2.0))
        self.assertAlmostEqual(bounds[2], bounds[1] + math.log(bounds[1]))
        spec = builtin_family("nested_log", 3)
        self.assertEqual(len(spec), 3)
        self.assertEqual(spec.output_dim, 1)
        x = np.array([1.5, 1.2, 1.9])
        expected = math.log(x[0] + math.log(x[1] + math.log(x[2])))
        self.assertAlmostEqual(float(reference_eval(spec, x)[0]), expected, places=12)

    def test_prodmax_tree(self):
        spec = builtin_family("prodmax_tree", 2)
        self.assertEqual(spec.input_dim, 4)
        self.assertEqual([s.kind for s in spec.stages], [StageKind.MAX_PARALLEL, StageKind.PRODUCT_PARALLEL])
        x = np.array([0.1, -0.05, 0.02, 0.125])
        self.assertAlmostEqual(float(reference_eval(spec, x)[0]), 0.1 * -0.05 * 0.125)
        spec = builtin_family("prodmax_tree", 4)
        self.assertEqual(spec.input_dim, 16)
        self.assertEqual(len(spec), 4)
        self.assertAlmostEqual(float(reference_eval(spec, np.full(16, 0.125))[0]), 8.0 ** -5, places=15)


class TheoremTwoFamilyTests(SimpleTestCase):
    def test_powermax(self):
        spec = builtin_family("powermax", 4)
        self.assertEqual(
            [s.kind for s in spec.stages],
            [StageKind.EXT_PROD, StageKind.LIPSCHITZ_PARALLEL, StageKind.MAX_PARALLEL],
        )
        self.assertEqual(len(builtin_family("powermax", 6)), 3)
        x = np.array([0.9, -0.8, 0.5, 0.7])
        running = np.cumprod(x)
        expected = max(running[i] ** (4 + i) for i in range(4))
        self.assertAlmostEqual(float(reference_eval(spec, x)[0]), expected)

    def test_gauss_prod(self):
        spec = builtin_family("gauss_prod", 3)
        self.assertEqual(spec.domain.upper, 3.0)
        self.assertEqual([b.lipschitz for b in spec.stages[0].blocks], [0.858, 1.214, 1.486])
        x = np.array([0.3, -0.2, 0.1])
        expected = math.exp(-sum((i + 1) * v * v for i, v in enumerate(x)))
        self.assertAlmostEqual(float(reference_eval(spec, x)[0]), expected)
        self.assertEqual(builtin_family("gauss_prod", 2, half_width=0.5).domain.upper, 0.5)

    def test_cos_max(self):
        spec = builtin_family("cos_max", 2, half_width=0.25)
        self.assertEqual(spec.c, 3)
        self.assertEqual(spec.input_dim, 6)
        self.assertEqual([b.lipschitz for b in spec.stages[0].blocks], [3.0, 14.0])
        x = np.array([0.1, 0.2, -0.1, 0.05, -0.02, 0.01])
        expected = max(math.cos(0.1 + 0.2 - 0.1), math.cos(2 * 0.05 - 4 * 0.02 + 8 * 0.01))
        self.assertAlmostEqual(float(reference_eval(spec, x)[0]), expected)

    def test_reference_rejects_points_outside_the_domain(self):
        spec = builtin_family("powermax", 2)
        with self.assertRaisesMessage(ValueError, "outside the input domain"):
            reference_eval(spec, [1.5, 0.0])
