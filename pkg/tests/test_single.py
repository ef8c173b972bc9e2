import numpy as np
import pytest
from hypothesis import given, strategies as st

from urysohn import (Domain, PiecewiseLinear, SegmentLocation, TrainConfig, UrysohnOperator, chi_norm,
                     evaluate_operator, fit_urysohn, kaczmarz_step, locate, make_linear_baseline, train_single)
from urysohn.single import LinearRegression, train_linear

from oracles import min_norm_solution


@st.composite
def operator_and_record(draw):
    m = draw(st.integers(1, 5))
    fs, x = [], []
    for _ in range(m):
        if draw(st.booleans()):
            levels = draw(st.integers(2, 8))
            fs.append(PiecewiseLinear(1, levels, draw(st.lists(st.floats(-10, 10), min_size=levels,
                                                                max_size=levels)), levels))
            x.append(float(draw(st.integers(1, levels))))
        else:
            n = draw(st.integers(2, 10))
            lo = draw(st.floats(-5, 5))
            hi = lo + draw(st.floats(0.1, 10))
            fs.append(PiecewiseLinear(lo, hi, draw(st.lists(st.floats(-10, 10), min_size=n, max_size=n))))
            x.append(draw(st.floats(lo, hi)))
    z = draw(st.floats(-50, 50))
    alpha = draw(st.floats(0.01, 1.99))
    return UrysohnOperator(fs), x, z, alpha


class TestChiNorm:
    def test_mixed(self):
        assert chi_norm([SegmentLocation(0, 0, 0.0), SegmentLocation(0, 1, 0.5)]) == 1.5

    def test_all_on_nodes(self):
        assert chi_norm([SegmentLocation(2, 2, 0.0)] * 4) == 4.0

    def test_all_midpoints(self):
        assert chi_norm([SegmentLocation(0, 1, 0.5)] * 4) == 2.0

    @given(st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=20))
    def test_bounds(self, psis):
        chi = chi_norm([SegmentLocation(0, 1, p) for p in psis])
        assert len(psis) / 2 <= chi <= len(psis)


class TestKaczmarzStep:
    def test_two_node_midpoint(self):
        # chi = 0.5; each node gains 1 * 1 * 0.5 / 0.5 = 1
        u = UrysohnOperator([PiecewiseLinear(0, 1, [0, 0])])
        d = kaczmarz_step(u, [0.5], 1.0, 1.0)
        assert d == 1.0
        assert u.functions[0].node_values.tolist() == [1.0, 1.0]
        assert 1.0 - evaluate_operator(u, [0.5]) == 0.0

    def test_zero_step_leaves_operator(self):
        u = UrysohnOperator([PiecewiseLinear(0, 1, [0.2, -0.4, 1.0])])
        kaczmarz_step(u, [0.3], 5.0, 0.0)
        assert u.functions[0].node_values.tolist() == [0.2, -0.4, 1.0]

    def test_quantized_single_node(self):
        u = UrysohnOperator([PiecewiseLinear(1, 3, [0, 0, 0], levels=3)])
        kaczmarz_step(u, [2], 0.6, 1.0)
        assert chi_norm([locate(u.functions[0], 2)]) == 1.0
        np.testing.assert_array_equal(u.functions[0].node_values, [0, 0.6, 0])
        assert evaluate_operator(u, [2]) == pytest.approx(0.6, abs=1e-15)

    @given(operator_and_record())
    def test_residual_recurrence(self, case):
        u, x, z, alpha = case
        d = kaczmarz_step(u, x, z, alpha)
        after = z - evaluate_operator(u, x)
        scale = max(abs(d), abs(z), 1.0)
        assert abs(after - (1 - alpha) * d) <= 1e-10 * scale


def _random_operator(rng, domains, nodes):
    u = UrysohnOperator.zeros(domains, nodes)
    u.load_values(rng.normal(size=u.layout().total))
    return u


class TestTrainSingle:
    def test_zero_outputs_keep_zero_operator(self):
        rng = np.random.default_rng(0)
        X = rng.random((50, 3))
        u, trace = fit_urysohn(X, np.zeros(50), [Domain(0, 1)] * 3, TrainConfig(epochs=5))
        assert not np.any(u.packed_values())
        assert len(trace.residuals) == 5

    def test_repeated_record_fits_in_one_step(self):
        u = UrysohnOperator.zeros([Domain(0, 1), Domain(0, 2)], 4)
        train_single(u, np.array([[0.37, 1.21]]), np.array([2.5]), TrainConfig(alpha=1.0, epochs=1))
        assert u([0.37, 1.21]) == pytest.approx(2.5, abs=1e-12)

    def test_consistent_data_recovers_generator(self):
        # node values are identifiable only up to constant shifts between functions;
        # zero start lands on the minimum-norm member, which the oracle computes
        rng = np.random.default_rng(1)
        domains = [Domain(0, 1), Domain(-2, 2)]
        truth = _random_operator(rng, domains, 5)
        X = np.column_stack([rng.random(500), rng.uniform(-2, 2, 500)])
        z = truth.predict(X)
        u, _ = fit_urysohn(X, z, domains, TrainConfig(alpha=1.0, epochs=20, nodes_per_input=5))
        expected, _ = min_norm_solution([(0, 1, 5), (-2, 2, 5)], X, z)
        rmse = np.sqrt(np.mean((u.packed_values() - expected) ** 2))
        assert rmse < 1e-6
        np.testing.assert_allclose(u.predict(X), z, atol=1e-6)

    def test_underdetermined_min_norm(self):
        rng = np.random.default_rng(2)
        X = rng.random((3, 2))
        z = rng.normal(size=3)
        u, _ = fit_urysohn(X, z, [Domain(0, 1)] * 2, TrainConfig(alpha=1.0, epochs=2000, nodes_per_input=3))
        expected, _ = min_norm_solution([(0, 1, 3), (0, 1, 3)], X, z)
        np.testing.assert_allclose(u.packed_values(), expected, atol=1e-4)

    @pytest.mark.parametrize("seed", range(10))
    def test_kernel_matches_python_steps(self, seed):
        rng = np.random.default_rng(seed)
        domains = [Domain(0, 1), Domain.quantized(4), Domain(-1, 3)]
        X = np.column_stack([rng.random(40), rng.integers(1, 5, 40), rng.uniform(-1, 3, 40)])
        z = rng.normal(size=40)
        cfg = TrainConfig(alpha=0.7, epochs=3, nodes_per_input=[3, 4, 6], seed=seed)
        u, _ = fit_urysohn(X, z, domains, cfg)
        ref = UrysohnOperator.zeros(domains, [3, 4, 6])
        order_rng = np.random.default_rng(seed)
        for _ in range(cfg.epochs):
            for i in order_rng.permutation(40):
                kaczmarz_step(ref, X[i], z[i], cfg.alpha)
        np.testing.assert_allclose(u.packed_values(), ref.packed_values(), rtol=1e-12, atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fit_urysohn(np.empty((0, 2)), np.empty(0), [Domain(0, 1)] * 2, TrainConfig())

    @pytest.mark.parametrize("alpha", [0.0, 2.0, -0.1])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValueError):
            TrainConfig(alpha=alpha)

    def test_tolerance_stops_early(self):
        X = np.linspace(0, 1, 20).reshape(-1, 1)
        _, trace = fit_urysohn(X, 2 * X[:, 0], [Domain(0, 1)], TrainConfig(alpha=1.0, epochs=500,
                                                                             nodes_per_input=2, tolerance=1e-9))
        assert len(trace.residuals) < 500
        assert trace.final_residual < 1e-9


class TestLinearBaseline:
    def test_shape(self):
        u = make_linear_baseline(5, [(0, 1)] * 5)
        assert u.m == 5 and all(f.n == 2 for f in u.functions)

    def test_quantized_range_becomes_two_nodes(self):
        u = make_linear_baseline(1, [Domain.quantized(6)])
        assert u.functions[0].n == 2 and not u.functions[0].quantized

    def test_exact_linear_data(self):
        rng = np.random.default_rng(3)
        w = rng.normal(size=4)
        X = rng.random((300, 4))
        z = X @ w
        u = make_linear_baseline(4, [(0, 1)] * 4)
        train_single(u, X, z, TrainConfig(alpha=1.0, epochs=200))
        np.testing.assert_allclose(u.predict(X), z, atol=1e-6)

    def test_slope_recovered(self):
        X = np.linspace(0, 1, 50).reshape(-1, 1)
        u = make_linear_baseline(1, [(0, 1)])
        train_single(u, X, 3 * X[:, 0], TrainConfig(alpha=1.0, epochs=200))
        g = u.functions[0].node_values
        assert g[1] - g[0] == pytest.approx(3.0, abs=1e-4)

    def test_no_intercept_regression_matches_lstsq(self):
        rng = np.random.default_rng(4)
        X = rng.random((400, 3)) + 0.5
        z = X @ np.array([1.0, -2.0, 0.5]) + 0.01 * rng.normal(size=400)
        # small steps approach the least-squares point on inconsistent data
        model, _ = train_linear(X, z, TrainConfig(alpha=0.01, epochs=400))
        w, *_ = np.linalg.lstsq(X, z, rcond=None)
        np.testing.assert_allclose(model.weights, w, atol=5e-3)

    def test_linear_regression_shape_check(self):
        assert LinearRegression([1.0, 2.0]).predict(np.array([[1.0, 1.0]])).tolist() == [3.0]
