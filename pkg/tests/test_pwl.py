import numpy as np
import pytest
from hypothesis import given, strategies as st

from urysohn import (Domain, PiecewiseLinear, SegmentLocation, UrysohnOperator, apply_nodal_increment,
                     evaluate_operator, evaluate_pwl, locate)

from oracles import interp_uniform

finite = st.floats(-1e3, 1e3, allow_nan=False)


@st.composite
def functions(draw, max_nodes=12):
    n = draw(st.integers(2, max_nodes))
    lo = draw(st.floats(-100, 100))
    width = draw(st.floats(1e-2, 100))
    values = draw(st.lists(finite, min_size=n, max_size=n))
    return PiecewiseLinear(lo, lo + width, values)


class TestLocate:
    def test_interior_point(self):
        f = PiecewiseLinear(0.0, 2.0, [0, 0, 0])
        # 1-based floor 2 is index 1 here
        assert locate(f, 1.5) == SegmentLocation(1, 2, 0.5)

    def test_lower_edge(self):
        f = PiecewiseLinear(0.0, 1.0, [0, 0])
        assert locate(f, 0.0) == SegmentLocation(0, 0, 0.0)

    def test_quantized_level(self):
        f = PiecewiseLinear.zeros(Domain.quantized(6), 6)
        assert locate(f, 4) == SegmentLocation(3, 3, 0.0)

    def test_upper_edge_is_last_node(self):
        f = PiecewiseLinear(0.0, 1.0, [0, 0, 0])
        assert locate(f, 1.0) == SegmentLocation(2, 2, 0.0)

    def test_out_of_range_is_clamped(self):
        f = PiecewiseLinear(0.0, 1.0, [0, 0, 0])
        assert locate(f, -5.0) == SegmentLocation(0, 0, 0.0)
        assert locate(f, 7.0) == SegmentLocation(2, 2, 0.0)

    @given(functions(), st.floats(0, 1))
    def test_fraction_in_unit_interval(self, f, t):
        loc = locate(f, f.domain_min + t * (f.domain_max - f.domain_min))
        assert 0.0 <= loc.fraction < 1.0
        assert loc.ceiling == (loc.floor + 1 if loc.fraction > 0 else loc.floor)

    @given(st.integers(2, 30), st.data())
    def test_quantized_degeneracy(self, levels, data):
        f = PiecewiseLinear.zeros(Domain.quantized(levels), levels)
        level = data.draw(st.integers(1, levels))
        loc = locate(f, level)
        assert loc.fraction == 0.0
        assert loc.floor == loc.ceiling == level - 1


class TestEvaluate:
    def test_midpoint(self):
        assert evaluate_pwl(PiecewiseLinear(0, 1, [0, 1]), 0.5) == 0.5

    def test_zero_function(self):
        f = PiecewiseLinear(-3, 4, np.zeros(7))
        assert all(evaluate_pwl(f, x) == 0.0 for x in np.linspace(-3, 4, 50))

    def test_second_segment(self):
        assert evaluate_pwl(PiecewiseLinear(0, 2, [2, 4, 8]), 1.5) == 6.0

    @given(functions())
    def test_interpolation_exactness(self, f):
        for k, x in enumerate(f.abscissae):
            assert evaluate_pwl(f, x) == f.node_values[k]

    @given(functions(), st.integers(0, 10), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_affine_within_segment(self, f, seg, a, b, lam):
        seg = seg % (f.n - 1)
        h = (f.domain_max - f.domain_min) / (f.n - 1)
        x1 = f.domain_min + (seg + a) * h
        x2 = f.domain_min + (seg + b) * h
        x1, x2 = min(x1, f.domain_max), min(x2, f.domain_max)
        lhs = evaluate_pwl(f, lam * x1 + (1 - lam) * x2)
        rhs = lam * evaluate_pwl(f, x1) + (1 - lam) * evaluate_pwl(f, x2)
        scale = max(1.0, float(np.abs(f.node_values).max()))
        assert abs(lhs - rhs) <= 1e-9 * scale

    @given(functions(), st.floats(-200, 300))
    def test_matches_interpolation_oracle(self, f, x):
        expected = interp_uniform(f.domain_min, f.domain_max, f.node_values, x)
        scale = max(1.0, float(np.abs(f.node_values).max()))
        assert evaluate_pwl(f, x) == pytest.approx(expected, abs=1e-9 * scale)


class TestOperator:
    def test_zero_operator(self):
        u = UrysohnOperator.zeros([Domain(0, 1), Domain(-1, 1)], 4)
        assert evaluate_operator(u, [0.3, -0.2]) == 0.0

    def test_single_input_reduces_to_function(self):
        f = PiecewiseLinear(0, 2, [2, 4, 8])
        assert evaluate_operator(UrysohnOperator([f]), [1.5]) == evaluate_pwl(f, 1.5)

    def test_sum_of_two(self):
        u = UrysohnOperator([PiecewiseLinear(0, 1, [0, 1]), PiecewiseLinear(0, 1, [0, 1])])
        assert evaluate_operator(u, [0.5, 0.5]) == 1.0

    def test_dimension_mismatch(self):
        u = UrysohnOperator.zeros([Domain(0, 1), Domain(0, 1)], 2)
        with pytest.raises(ValueError):
            evaluate_operator(u, [0.5])
        with pytest.raises(ValueError):
            u.predict(np.zeros((3, 3)))

    @given(st.lists(functions(max_nodes=5), min_size=1, max_size=4), st.data())
    def test_additivity_and_kernel_agreement(self, fs, data):
        u = UrysohnOperator(fs)
        X = np.array([[data.draw(st.floats(f.domain_min - 1, f.domain_max + 1)) for f in fs] for _ in range(5)])
        expected = [sum(evaluate_pwl(f, x) for f, x in zip(fs, row)) for row in X]
        scale = max(1.0, max(float(np.abs(f.node_values).max()) for f in fs))
        np.testing.assert_allclose([evaluate_operator(u, row) for row in X], expected, atol=1e-9 * scale)
        np.testing.assert_allclose(u.predict(X), expected, atol=1e-9 * scale)

    def test_layout_round_trip(self):
        u = UrysohnOperator([PiecewiseLinear(0, 1, [1, 2]), PiecewiseLinear.zeros(Domain.quantized(3), 3)])
        row = np.arange(5.0)
        u.load_values(row)
        np.testing.assert_array_equal(u.packed_values(), row)
        assert u.functions[1].node_values.tolist() == [2.0, 3.0, 4.0]


class TestNodalIncrement:
    def test_split_update(self):
        f = PiecewiseLinear(0, 1, [0, 0])
        apply_nodal_increment(f, SegmentLocation(0, 1, 0.5), 0.5, 0.5)
        assert f.node_values.tolist() == [0.5, 0.5]

    def test_zero_amounts(self):
        f = PiecewiseLinear(0, 1, [3, -1])
        apply_nodal_increment(f, locate(f, 0.2), 0.0, 0.0)
        assert f.node_values.tolist() == [3.0, -1.0]

    def test_quantized_single_node(self):
        f = PiecewiseLinear(1, 3, [1, 2, 3], levels=3)
        apply_nodal_increment(f, locate(f, 2), 0.7, 0.0)
        np.testing.assert_array_equal(f.node_values, [1, 2.7, 3])


class TestValidation:
    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            PiecewiseLinear(0, 1, [1.0])

    def test_degenerate_domain(self):
        with pytest.raises(ValueError):
            PiecewiseLinear(1, 1, [0, 0])

    def test_quantized_needs_matching_nodes(self):
        with pytest.raises(ValueError):
            PiecewiseLinear(1, 4, [0, 0, 0], levels=4)

    def test_empty_operator(self):
        with pytest.raises(ValueError):
            UrysohnOperator([])
