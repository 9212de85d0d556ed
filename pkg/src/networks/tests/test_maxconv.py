import numpy as np
from django.test import SimpleTestCase, override_settings

from src.networks.blocks import LipschitzBlockSpec
from src.networks.core import Hypercube, ShapeError, evaluate
from src.networks.maxconv import GridBudgetError, constant_network, grid_points_per_axis, maxconv_net


def wave(points):
    return 0.5 * (np.sin(points[:, 0]) + np.cos(points[:, 1]))


def brute_force(values, grid_points, L, x):
    dist = np.abs(x[:, None, :] - grid_points[None, :, :]).sum(axis=2)
    return (values[None, :] - L * dist).max(axis=1)


class MaxConvolutionTests(SimpleTestCase):
    def setUp(self):
        self.abs_block = LipschitzBlockSpec(dim=1, function=lambda p: np.abs(p[:, 0]), lipschitz=1.0, label="abs")
        self.sin_block = LipschitzBlockSpec(dim=1, function=lambda p: np.sin(p[:, 0]), lipschitz=1.0, label="sin")
        self.wave_block = LipschitzBlockSpec(dim=2, function=wave, lipschitz=0.5, norm=1.0, label="wave")
        self.line = Hypercube(-1.0, 1.0, 1)
        self.square = Hypercube(0.0, 2.0, 2)

    # ---- small exact cases ----
    def test_abs_on_three_point_grid(self):
        net = maxconv_net(self.abs_block, self.line, 1.0, points_per_axis=3)
        self.assertEqual(net.architecture, (1, 7, 1))
        self.assertAlmostEqual(evaluate(net, [0.0])[0], 0.0, places=12)
        t = np.linspace(-3, 3, 601)
        expected = brute_force(np.array([1.0, 0.0, 1.0]), np.array([[-1.0], [0.0], [1.0]]), 1.0, t[:, None])
        np.testing.assert_allclose(evaluate(net, t[:, None])[:, 0], expected, atol=1e-12)

    def test_one_dimensional_kinks_match_the_cones(self):
        # uneven neighbours put every valley off the midpoint
        g = np.linspace(0.0, 3.0, 9)
        net = maxconv_net(self.sin_block, Hypercube(0.0, 3.0, 1), 1.0, points_per_axis=9)
        t = np.linspace(-1.0, 4.0, 5001)[:, None]
        expected = brute_force(np.sin(g), g[:, None], 1.0, t)
        np.testing.assert_allclose(evaluate(net, t)[:, 0], expected, atol=1e-12)
        np.testing.assert_allclose(evaluate(net, g[:, None])[:, 0], np.sin(g), atol=1e-12)

    def test_constant_expression(self):
        block = LipschitzBlockSpec(dim=2, function=lambda p: np.full(len(p), 3.5), lipschitz=0.0)
        net = maxconv_net(block, self.square, 0.1)
        x = np.random.default_rng(0).uniform(-5, 5, size=(100, 2))
        np.testing.assert_allclose(evaluate(net, x)[:, 0], 3.5)
        self.assertEqual(net.param_count, constant_network(2, 3.5).param_count)
        net = maxconv_net(block, self.square, 0.1, points_per_axis=7)
        np.testing.assert_allclose(evaluate(net, x)[:, 0], 3.5)

    # ---- accuracy ----
    def test_one_dimensional_error(self):
        Q = Hypercube(0.0, 3.0, 1)
        t = np.linspace(0.0, 3.0, 20001)[:, None]
        for eps in (0.1, 0.05):
            net = maxconv_net(self.sin_block, Q, eps)
            err = np.abs(evaluate(net, t)[:, 0] - np.sin(t[:, 0])).max()
            self.assertLessEqual(err, eps)

    def test_two_dimensional_error_and_grid_exactness(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0.0, 2.0, size=(20000, 2))
        for eps in (0.4, 0.2):
            net = maxconv_net(self.wave_block, self.square, eps)
            self.assertLessEqual(np.abs(evaluate(net, x)[:, 0] - wave(x)).max(), eps)
            m = grid_points_per_axis(self.square, 0.5, 1.0, eps)
            g = np.linspace(0.0, 2.0, m)
            grid = np.array([(a, b) for a in g for b in g])
            np.testing.assert_allclose(evaluate(net, grid)[:, 0], wave(grid), atol=1e-9)

    def test_network_is_the_maximum_convolution(self):
        net = maxconv_net(self.wave_block, self.square, 0.4)
        m = grid_points_per_axis(self.square, 0.5, 1.0, 0.4)
        g = np.linspace(0.0, 2.0, m)
        grid = np.array([(a, b) for a in g for b in g])
        x = np.random.default_rng(2).uniform(-0.5, 2.5, size=(2000, 2))
        np.testing.assert_allclose(evaluate(net, x)[:, 0], brute_force(wave(grid), grid, 0.5, x), atol=1e-9)

    def test_sampled_lipschitz(self):
        net = maxconv_net(self.wave_block, self.square, 0.2)
        rng = np.random.default_rng(3)
        x = rng.uniform(0.0, 2.0, size=(10000, 2))
        y = np.vstack([x[5000:], np.clip(x[:5000] + rng.normal(scale=2e-3, size=(5000, 2)), 0.0, 2.0)])
        x = np.vstack([x[:5000], x[:5000]])
        dy = np.abs(evaluate(net, x) - evaluate(net, y))[:, 0]
        for p, factor in ((1, 1.0), (2, np.sqrt(2.0)), (np.inf, 2.0)):
            ratio = dy / np.linalg.norm(x - y, ord=p, axis=1)
            self.assertLessEqual(ratio.max(), factor * 0.5 * (1 + 1e-9))

    def test_count_grows_with_accuracy(self):
        Q = Hypercube(0.0, 3.0, 1)
        eps = np.array([0.2, 0.1, 0.05, 0.025])
        counts = [maxconv_net(self.sin_block, Q, e).param_count for e in eps]
        self.assertEqual(counts, sorted(counts))
        slope = np.polyfit(np.log(1 / eps), np.log(counts), 1)[0]
        self.assertLessEqual(slope, 2.5)

        eps2 = np.array([0.4, 0.2, 0.1])
        counts2 = [maxconv_net(self.wave_block, self.square, e).param_count for e in eps2]
        self.assertEqual(counts2, sorted(counts2))
        self.assertLessEqual(np.polyfit(np.log(1 / eps2), np.log(counts2), 1)[0], 4.5)

    # ---- errors ----
    def test_non_finite_grid_value(self):
        block = LipschitzBlockSpec(dim=1, function=lambda p: np.where(p[:, 0] == 0.0, np.nan, 1.0), lipschitz=1.0)
        with self.assertRaises(ValueError) as ctx:
            maxconv_net(block, self.line, 1.0, points_per_axis=3)
        self.assertIn("grid point", str(ctx.exception))

    def test_zero_lipschitz_requires_constant(self):
        block = LipschitzBlockSpec(dim=1, function=lambda p: p[:, 0], lipschitz=0.0)
        with self.assertRaises(ValueError):
            maxconv_net(block, self.line, 0.5)

    def test_dimension_mismatch(self):
        with self.assertRaises(ShapeError):
            maxconv_net(self.abs_block, self.square, 0.5)

    @override_settings(RELU_FORGE_MAX_PARAMS=100)
    def test_grid_budget_guard(self):
        with self.assertRaises(GridBudgetError):
            maxconv_net(self.sin_block, Hypercube(0.0, 3.0, 1), 0.05)
