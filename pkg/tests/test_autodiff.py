"""Reverse-mode gradients checked against central finite differences."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgeir import autodiff as ad


def _check_grad(fn, params, tol=1e-4):
    _, grads = ad.grad(fn, params)
    numeric = ad.finite_difference(lambda P: ad.value_of(fn(P)), params, step=1e-5)
    for name in params:
        assert ad.relative_error(grads[name], numeric[name]) < tol, name


class TestAnalyticValues:
    def test_square_at_three(self):
        loss, g = ad.grad(lambda P: (P["x"] * P["x"]).sum(), {"x": np.array([3.0])})
        assert loss == 9.0
        assert g["x"][0] == pytest.approx(6.0)

    def test_sigmoid_slope_at_zero(self):
        _, g = ad.grad(lambda P: ad.sigmoid(P["x"]).sum(), {"x": np.array([0.0])})
        assert g["x"][0] == pytest.approx(0.25)

    def test_plain_arrays_pass_through(self):
        out = ad.sigmoid(np.zeros(3))
        assert isinstance(out, np.ndarray)
        np.testing.assert_allclose(out, 0.5)

    def test_unused_parameter_gets_zero_gradient(self):
        _, g = ad.grad(lambda P: P["a"].sum(), {"a": np.ones(2), "b": np.ones(3)})
        np.testing.assert_array_equal(g["b"], np.zeros(3))


class TestPrimitives:
    rng = np.random.default_rng(0)

    @pytest.mark.parametrize(
        "name, fn",
        [
            ("add", lambda P: (P["x"] + P["y"]).sum()),
            ("sub", lambda P: ((P["x"] - P["y"]) * P["x"]).sum()),
            ("mul", lambda P: (P["x"] * P["y"]).sum()),
            ("div", lambda P: (P["x"] / (P["y"] * P["y"] + 1.0)).sum()),
            ("matmul", lambda P: (P["x"] @ P["w"]).sum()),
            ("sigmoid", lambda P: ad.sigmoid(P["x"] @ P["w"]).sum()),
            ("tanh", lambda P: ad.tanh(P["x"] * P["y"]).sum()),
            ("relu", lambda P: (ad.relu(P["x"] + 0.05) * P["y"]).sum()),
            ("softmax", lambda P: (ad.softmax(P["x"] @ P["w"], axis=-1) * np.arange(4.0)).sum()),
            ("softplus", lambda P: ad.softplus(P["x"]).sum()),
            ("exp_log", lambda P: ad.log(ad.exp(P["x"]) + 1.0).sum()),
            ("bce", lambda P: ad.bce_with_logits((P["x"] @ P["w"]).sum(axis=1), np.array([1.0, 0.0, 1.0]))),
            ("take", lambda P: (ad.take(P["w"], np.array([0, 2, 2, 1])) * 1.5).sum()),
            ("concat", lambda P: (ad.concat([P["x"], P["y"]], axis=1) @ np.ones(6)).sum()),
            ("transpose", lambda P: (ad.transpose(P["x"]) @ P["y"]).sum()),
            ("mean_reshape", lambda P: ad.reshape(P["x"], (9,)).mean() * P["y"].mean()),
        ],
    )
    def test_matches_finite_differences(self, name, fn):
        params = {
            "x": self.rng.normal(size=(3, 3)),
            "y": self.rng.normal(size=(3, 3)),
            "w": self.rng.normal(size=(3, 4)),
        }
        _check_grad(fn, params)

    def test_batched_matmul_broadcast(self):
        params = {"a": self.rng.normal(size=(2, 3, 4)), "b": self.rng.normal(size=(4, 2))}
        _check_grad(lambda P: ad.tanh(P["a"] @ P["b"]).sum(), params)

    def test_bias_broadcast(self):
        params = {"x": self.rng.normal(size=(5, 3)), "b": self.rng.normal(size=3)}
        _check_grad(lambda P: ad.sigmoid(P["x"] + P["b"]).sum(), params)


class TestErrors:
    def test_non_finite_intermediate_is_reported(self):
        with pytest.raises(ad.NonFiniteError, match="log"):
            ad.grad(lambda P: ad.log(P["x"]).sum(), {"x": np.array([-1.0])})

    def test_backward_needs_a_scalar(self):
        with pytest.raises(ValueError):
            ad.Var(np.ones(2)).backward()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=6))
def test_softmax_rows_sum_to_one(values):
    out = ad.softmax(np.array(values))
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
