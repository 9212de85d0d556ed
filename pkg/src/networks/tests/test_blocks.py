import math

import numpy as np
from django.test import SimpleTestCase, override_settings

from src.networks.blocks import BlockKind, LipschitzBlockSpec, PartitionSpec, block_budget, parallel_block_net
from src.networks.core import Hypercube, ShapeError, evaluate


def power(points):
    return points[:, 0] ** points[:, 1]


class PartitionSpecTests(SimpleTestCase):
    def test_validation(self):
        self.assertEqual(PartitionSpec((2, 1)).total, 3)
        with self.assertRaises(ValueError):
            PartitionSpec(())
        with self.assertRaises(ValueError):
            PartitionSpec((2, 0))

    def test_block_spec_validation(self):
        with self.assertRaises(ValueError):
            LipschitzBlockSpec(dim=0, function=power, lipschitz=1.0)
        with self.assertRaises(ValueError):
            LipschitzBlockSpec(dim=2, function=power, lipschitz=-1.0)


class ParallelBlockTests(SimpleTestCase):
    def setUp(self):
        self.tower_box = Hypercube(math.exp(-1), 1.0, 4)
        self.power = LipschitzBlockSpec(dim=2, function=power, lipschitz=1.0, norm=1.0, label="pow(x1,x2)")

    def test_budget_per_block(self):
        self.assertAlmostEqual(block_budget(2, 0.1, 1.0), 0.05)
        self.assertAlmostEqual(block_budget(2, 0.1, 2.0), 0.1 / math.sqrt(2))
        self.assertEqual(block_budget(5, 0.1, math.inf), 0.1)

    def test_max_blocks(self):
        net = parallel_block_net(BlockKind.MAX, PartitionSpec((2, 1)), Hypercube(0.0, 10.0, 3), 0.1)
        np.testing.assert_allclose(evaluate(net, [1.0, 2.0, 5.0]), [2.0, 5.0], atol=1e-12)
        net = parallel_block_net("max", [1, 3], Hypercube(-1.0, 1.0, 4), 0.1)
        np.testing.assert_allclose(evaluate(net, [0.3, -1.0, 0.5, 0.2]), [0.3, 0.5], atol=1e-12)

    def test_lip1_products_need_small_domain(self):
        with self.assertRaises(ValueError) as ctx:
            parallel_block_net(BlockKind.PRODUCT_LIP1, [2, 2], Hypercube(-1.0, 1.0, 4), 0.1)
        self.assertIn("1/8", str(ctx.exception))
        with self.assertRaises(ValueError):
            parallel_block_net(BlockKind.PRODUCT, [2], Hypercube(-2.0, 2.0, 2), 0.1)

    def test_product_blocks(self):
        Q = Hypercube(-0.125, 0.125, 5)
        net = parallel_block_net(BlockKind.PRODUCT_LIP1, [3, 2], Q, 0.01)
        x = np.random.default_rng(0).uniform(-0.125, 0.125, size=(2000, 5))
        exact = np.column_stack([x[:, :3].prod(axis=1), x[:, 3:].prod(axis=1)])
        self.assertLessEqual(np.abs(evaluate(net, x) - exact).sum(axis=1).max(), 0.01)

        Q = Hypercube(-1.0, 1.0, 4)
        net = parallel_block_net(BlockKind.PRODUCT, [2, 2], Q, 0.02, p=math.inf)
        x = np.random.default_rng(1).uniform(-1, 1, size=(2000, 4))
        exact = np.column_stack([x[:, :2].prod(axis=1), x[:, 2:].prod(axis=1)])
        self.assertLessEqual(np.abs(evaluate(net, x) - exact).max(), 0.02)

    def test_lipschitz_blocks(self):
        net = parallel_block_net(BlockKind.LIPSCHITZ, [self.power, self.power], self.tower_box, 0.4)
        x = np.random.default_rng(2).uniform(math.exp(-1), 1.0, size=(5000, 4))
        exact = np.column_stack([power(x[:, :2]), power(x[:, 2:])])
        self.assertLessEqual(np.abs(evaluate(net, x) - exact).sum(axis=1).max(), 0.4)

    def test_dimension_mismatch(self):
        with self.assertRaises(ShapeError):
            parallel_block_net(BlockKind.MAX, [2, 2], Hypercube(0.0, 1.0, 3), 0.1)
        with self.assertRaises(ShapeError):
            parallel_block_net(BlockKind.LIPSCHITZ, [self.power], self.tower_box, 0.1)

    def test_thread_count_does_not_change_result(self):
        with override_settings(RELU_FORGE_THREADS=1):
            serial = parallel_block_net(BlockKind.PRODUCT, [2, 3], Hypercube(-1.0, 1.0, 5), 0.05)
        with override_settings(RELU_FORGE_THREADS=4):
            threaded = parallel_block_net(BlockKind.PRODUCT, [2, 3], Hypercube(-1.0, 1.0, 5), 0.05)
        self.assertEqual(serial.architecture, threaded.architecture)
        for a, b in zip(serial.layers, threaded.layers):
            self.assertTrue(np.array_equal(a.weights, b.weights))

    def test_exact_blocks_take_no_budget_share(self):
        identity = LipschitzBlockSpec(dim=1, function=lambda x: x[:, 0], lipschitz=1.0, label="x1", exact=True)
        Q = Hypercube(math.exp(-1), 1.0, 3)
        net = parallel_block_net(BlockKind.LIPSCHITZ, [identity, self.power], Q, 0.2)
        x = np.random.default_rng(3).uniform(math.exp(-1), 1.0, size=(5000, 3))
        out = evaluate(net, x)
        np.testing.assert_allclose(out[:, 0], x[:, 0], atol=1e-9)
        self.assertLessEqual(np.abs(out[:, 1] - power(x[:, 1:])).max(), 0.2)
