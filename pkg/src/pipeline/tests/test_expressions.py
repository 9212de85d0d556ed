import math

import numpy as np
from django.test import SimpleTestCase

from src.pipeline.expressions import ExpressionError, parse_expression
from src.pipeline.intervals import SingularityError


class ParseTests(SimpleTestCase):
    def test_arity_and_variables(self):
        self.assertEqual(parse_expression("pow(x1,x2)").arity, 2)
        self.assertEqual(parse_expression("x1 + ln(x3)").arity, 3)
        self.assertEqual(parse_expression("2.5e-1").arity, 0)
        self.assertTrue(parse_expression(" x1 ").is_variable)
        self.assertFalse(parse_expression("x1 + 0").is_variable)

    def test_unknown_identifier_reports_column(self):
        with self.assertRaises(ExpressionError) as ctx:
            parse_expression("pow(x0,x1)")
        self.assertEqual(ctx.exception.column, 5)
        self.assertEqual(str(ctx.exception), "unknown identifier 'x0' at column 5")
        with self.assertRaisesMessage(ExpressionError, "unknown identifier 'sin'"):
            parse_expression("sin(x1)")

    def test_syntax_errors(self):
        with self.assertRaisesMessage(ExpressionError, "exp takes 1 argument(s), got 2"):
            parse_expression("exp(x1, x2)")
        with self.assertRaisesMessage(ExpressionError, "unexpected end of expression"):
            parse_expression("x1 +")
        with self.assertRaisesMessage(ExpressionError, "unexpected character '$' at column 4"):
            parse_expression("x1 $ 2")
        with self.assertRaisesMessage(ExpressionError, "expected ')'"):
            parse_expression("(x1 + x2")
        with self.assertRaisesMessage(ExpressionError, "empty"):
            parse_expression("   ")

    def test_dimension_limit(self):
        with self.assertRaisesMessage(ExpressionError, "uses x3 but the block has dimension 2"):
            parse_expression("x1 * x3", dim=2)
        self.assertEqual(parse_expression("x1 * x2", dim=3).arity, 2)


class EvaluateTests(SimpleTestCase):
    def test_precedence_and_unary_minus(self):
        expr = parse_expression("1 + 2*x1 - x2/4")
        np.testing.assert_allclose(expr.evaluate([[1.0, 2.0], [0.0, 0.0]]), [2.5, 1.0])
        np.testing.assert_allclose(parse_expression("-x1*x1")([[3.0]]), [-9.0])
        np.testing.assert_allclose(parse_expression("2*(x1 + 1)")([[3.0]]), [8.0])

    def test_functions(self):
        points = np.array([[0.5, 0.5], [1.0, 2.0]])
        np.testing.assert_allclose(parse_expression("pow(x1,x2)").evaluate(points), [0.5 ** 0.5, 1.0])
        np.testing.assert_allclose(parse_expression("exp(-2*pow(x1,2))").evaluate(points), np.exp(-2 * points[:, 0] ** 2))
        np.testing.assert_allclose(parse_expression("x1 + ln(x2)").evaluate(points), [0.5 + math.log(0.5), 1 + math.log(2)])
        np.testing.assert_allclose(parse_expression("cos(x1 + 4*x2)").evaluate(points), np.cos(points @ [1.0, 4.0]))
        np.testing.assert_allclose(parse_expression("abs(x1 - x2)").evaluate(points), [0.0, 1.0])

    def test_integer_powers_accept_negative_bases(self):
        np.testing.assert_allclose(parse_expression("pow(x1,3)")([[-2.0], [0.5]]), [-8.0, 0.125])
        np.testing.assert_allclose(parse_expression("pow(x1,2+2)")([[-1.0]]), [1.0])

    def test_folded_constant_exponents(self):
        points = [[-2.0], [-0.5]]
        np.testing.assert_allclose(parse_expression("pow(x1,2*3)")(points), [64.0, 0.015625])
        np.testing.assert_allclose(parse_expression("pow(x1,-(1-3))")(points), [4.0, 0.25])
        np.testing.assert_allclose(parse_expression("pow(x1,4/2)")(points), [4.0, 0.25])
        hull = parse_expression("pow(x1,1+1)").enclose(np.array([[-2.0]]), np.array([[-1.0]]))
        self.assertLessEqual(float(hull.lo[0]), 1.0)
        self.assertGreaterEqual(float(hull.hi[0]), 4.0)
        with self.assertRaises(SingularityError):
            parse_expression("pow(x1,1/2)")([[-1.0]])

    def test_constants_broadcast(self):
        np.testing.assert_array_equal(parse_expression("3")(np.zeros((4, 1))), [3.0] * 4)

    def test_extra_columns_are_ignored(self):
        np.testing.assert_allclose(parse_expression("x1")([[1.0, 7.0, 9.0]]), [1.0])
        with self.assertRaises(ValueError):
            parse_expression("x2")([[1.0]])

    def test_singularities(self):
        with self.assertRaises(SingularityError):
            parse_expression("ln(x1)")([[1.0], [0.0]])
        with self.assertRaises(SingularityError):
            parse_expression("1/x1")([[0.0]])
        with self.assertRaises(SingularityError):
            parse_expression("pow(x1, 0.5)")([[-1.0]])
        with self.assertRaises(SingularityError):
            parse_expression("pow(x1, -1)")([[0.0]])
