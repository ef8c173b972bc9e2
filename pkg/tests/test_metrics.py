import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from urysohn.metrics import EvalReport, ci95, classification_errors, evaluate, nrmse, pearson, to_keyvalue

from oracles import pearson_closed_form

series = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=40)


class TestPearson:
    def test_identity(self):
        assert pearson([1, 2, 5], [1, 2, 5]) == pytest.approx(1.0)

    def test_negated(self):
        assert pearson([1, 2, 5], [-1, -2, -5]) == pytest.approx(-1.0)

    def test_hand_computed(self):
        # r = 3 / sqrt(2 * 14/3) = 0.98198
        assert pearson_closed_form([1, 2, 3], [1, 2, 4]) == pytest.approx(0.98198, abs=5e-6)
        assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.98198, abs=5e-6)

    def test_constant_series_is_undefined(self):
        assert pearson([1, 1, 1], [1, 2, 3]) is None
        assert pearson([1, 2, 3], [0, 0, 0]) is None

    @given(series, st.floats(0.01, 100), st.floats(-100, 100), st.integers(0, 2**31))
    def test_positive_affine_invariance(self, z, a, b, seed):
        z = np.array(z)
        zh = z + np.random.default_rng(seed).normal(size=z.size) * (np.ptp(z) + 1)
        r = pearson(z, zh)
        if r is None or np.ptp(z) < 1e-3:
            return
        assert pearson(z, a * zh + b) == pytest.approx(r, abs=1e-10)
        assert pearson(a * z + b, zh) == pytest.approx(r, abs=1e-10)


class TestNrmse:
    def test_exact(self):
        assert nrmse([0, 1, 2], [0, 1, 2]) == 0.0

    def test_constant_error(self):
        assert nrmse([0, 1, 2], [0.2, 1.2, 2.2]) == pytest.approx(0.1)

    def test_two_points(self):
        assert nrmse([0, 1], [0.1, 0.9]) == pytest.approx(0.1, abs=1e-15)

    def test_constant_actuals_rejected(self):
        with pytest.raises(ValueError):
            nrmse([1, 1], [1, 2])

    @given(series, st.floats(-100, 100), st.floats(0.1, 10), st.integers(0, 2**31))
    def test_shift_and_scale(self, z, c, s, seed):
        z = np.array(z)
        if np.ptp(z) < 1e-3:
            return
        zh = z + np.random.default_rng(seed).normal(size=z.size)
        e = nrmse(z, zh)
        assert nrmse(z + c, zh + c) == pytest.approx(e, rel=1e-6, abs=1e-9)
        assert nrmse(s * z, s * zh) == pytest.approx(e, rel=1e-9)

    def test_explicit_span(self):
        assert nrmse([0, 1], [0.1, 0.9], span=2.0) == pytest.approx(0.05)


class TestClassification:
    def test_perfect(self):
        assert classification_errors([1, -1, 1], [1, -1, 1]) == 0

    def test_one_wrong(self):
        assert classification_errors([1, -1], [0.2, 0.3]) == 1

    def test_zero_is_an_error(self):
        assert classification_errors([1], [0.0]) == 1

    def test_labels_checked(self):
        with pytest.raises(ValueError):
            classification_errors([0, 1], [0.5, 0.5])

    @given(st.lists(st.tuples(st.sampled_from([-1, 1]), st.floats(-2, 2)), min_size=1, max_size=50),
           st.integers(0, 2**31))
    def test_permutation_invariance(self, pairs, seed):
        z, zh = map(np.array, zip(*pairs))
        perm = np.random.default_rng(seed).permutation(len(z))
        errors = classification_errors(z, zh)
        assert errors == classification_errors(z[perm], zh[perm])
        assert errors == len(z) - int(np.sum(np.sign(zh) == z))


class TestCi95:
    def test_identical_samples(self):
        assert ci95([0.5, 0.5, 0.5]).half_width == 0.0

    def test_two_samples(self):
        # t(0.975, 1) = 12.706; s = 0.7071; s / sqrt(2) = 0.5
        ci = ci95([0, 1])
        assert ci.mean == 0.5
        assert ci.half_width == pytest.approx(12.706 * 0.5, abs=1e-3)

    def test_more_samples_narrower(self):
        assert ci95([0, 1] * 5).half_width < ci95([0, 1]).half_width

    def test_needs_two(self):
        with pytest.raises(ValueError):
            ci95([1.0])


class TestReport:
    def test_evaluate_classification(self):
        rep = evaluate([1, -1, 1, -1], [0.5, -0.2, -0.1, -3], classify=True)
        assert rep.misclassified == 1 and rep.accuracy == 0.75 and rep.n == 4

    def test_serialisation(self):
        rep = EvalReport(n=3, pearson=None, nrmse=0.25)
        assert "pearson=none" in rep.to_keyvalue().splitlines()
        assert json.loads(rep.to_json())["nrmse"] == 0.25

    def test_keyvalue_sorted(self):
        assert to_keyvalue({"b": 1, "a": 0.5}) == "a=0.5\nb=1\n"
