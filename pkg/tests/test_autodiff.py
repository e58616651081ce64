"""Engine-level checks: every primitive's gradient against finite differences."""

import numpy as np
import pytest

from sanseg.autodiff import Parameter, Tensor, concat, stack


def fd_grad(loss_fn, param: Parameter, h: float = 1e-6) -> np.ndarray:
    flat = param.data.reshape(-1)
    out = np.zeros_like(flat)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + h
        up = float(loss_fn().data)
        flat[j] = orig - h
        down = float(loss_fn().data)
        flat[j] = orig
        out[j] = (up - down) / (2 * h)
    return out.reshape(param.data.shape)


def analytic_grad(loss_fn, param: Parameter) -> np.ndarray:
    param.grad = None
    loss_fn().backward()
    return param.grad.copy()


def assert_matches_fd(loss_fn, param, tol=1e-7):
    ana = analytic_grad(loss_fn, param)
    num = fd_grad(loss_fn, param)
    np.testing.assert_allclose(ana, num, rtol=1e-5, atol=tol)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(2024))


class TestBasicOps:
    def test_add_mul_broadcasting(self, rng):
        a = Parameter("a", rng.normal(size=(3, 4)))
        b = Parameter("b", rng.normal(size=(4,)))

        def loss():
            return ((a + b) * (a * 2.0 - 1.0)).sum()

        assert_matches_fd(loss, a)
        assert_matches_fd(loss, b)

    def test_matmul(self, rng):
        a = Parameter("a", rng.normal(size=(3, 5)))
        b = Parameter("b", rng.normal(size=(5, 2)))

        def loss():
            return (a @ b).sum()

        assert_matches_fd(loss, a)
        assert_matches_fd(loss, b)

    def test_matmul_requires_2d(self):
        a = Tensor(np.ones(3))
        with pytest.raises(ValueError):
            a @ Tensor(np.ones((3, 2)))

    def test_pow_div(self, rng):
        a = Parameter("a", np.abs(rng.normal(size=(4,))) + 0.5)

        def loss():
            return (a.pow(1.7) / (a + 1.0)).sum()

        assert_matches_fd(loss, a)

    def test_nonlinearities(self, rng):
        a = Parameter("a", rng.normal(size=(3, 3)))

        def loss():
            return (a.tanh() + a.sigmoid() + (a * a + 1.0).log() + (a * 0.1).exp()).sum()

        assert_matches_fd(loss, a)

    def test_relu_gradient_zero_on_negative(self):
        a = Parameter("a", np.array([-2.0, 3.0]))
        out = a.relu().sum()
        out.backward()
        np.testing.assert_array_equal(a.grad, [0.0, 1.0])


class TestReductionsAndShapes:
    def test_sum_axis_keepdims(self, rng):
        a = Parameter("a", rng.normal(size=(3, 4)))

        def loss():
            return (a.sum(axis=0) * a.sum(axis=1, keepdims=True).reshape(3, 1).sum(axis=1)).sum()

        assert_matches_fd(loss, a)

    def test_mean(self, rng):
        a = Parameter("a", rng.normal(size=(2, 6)))

        def loss():
            return (a.mean(axis=1, keepdims=True) * a).sum()

        assert_matches_fd(loss, a)

    def test_logsumexp_matches_log_sum_exp(self, rng):
        x = rng.normal(size=(3, 4))
        got = Tensor(x).logsumexp(axis=1).data
        expected = np.log(np.exp(x).sum(axis=1))
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_logsumexp_stable_at_large_magnitudes(self):
        x = Tensor(np.array([[1e4, 1e4 - 3.0], [-1e4, -1e4 + 1.0]]))
        out = x.logsumexp(axis=1)
        assert np.all(np.isfinite(out.data))

    def test_logsumexp_gradient(self, rng):
        a = Parameter("a", rng.normal(size=(4, 3)))

        def loss():
            return (a.logsumexp(axis=0) * np.arange(1.0, 4.0)).sum()

        assert_matches_fd(loss, a)

    def test_softmax_rows_sum_to_one(self, rng):
        a = Tensor(rng.normal(size=(5, 7)) * 10)
        s = a.softmax(axis=1).data
        np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(s >= 0)

    def test_softmax_neg_inf_gets_zero_weight(self):
        x = np.array([[1.0, -np.inf, 2.0]])
        s = Tensor(x).softmax(axis=1).data
        assert s[0, 1] == 0.0
        np.testing.assert_allclose(s.sum(), 1.0)

    def test_softmax_gradient(self, rng):
        a = Parameter("a", rng.normal(size=(3, 4)))
        w = rng.normal(size=(3, 4))

        def loss():
            return (a.softmax(axis=1) * w).sum()

        assert_matches_fd(loss, a)

    def test_getitem_fancy_scatter(self, rng):
        a = Parameter("a", rng.normal(size=(6, 3)))
        idx = np.array([0, 2, 2, 5])  # repeated index must accumulate

        def loss():
            return (a[idx] * np.arange(1.0, 13.0).reshape(4, 3)).sum()

        assert_matches_fd(loss, a)

    def test_getitem_slices(self, rng):
        a = Parameter("a", rng.normal(size=(5, 5)))

        def loss():
            return (a[1:4, 2:] * 3.0).sum() + a[0, 0] * 2.0

        assert_matches_fd(loss, a)

    def test_concat_and_stack(self, rng):
        a = Parameter("a", rng.normal(size=(2, 3)))
        b = Parameter("b", rng.normal(size=(2, 2)))

        def loss():
            c = concat([a, b], axis=1)
            s = stack([a.sum(axis=1), b.sum(axis=1)], axis=0)
            return (c * c).sum() + (s * s).sum()

        assert_matches_fd(loss, a)
        assert_matches_fd(loss, b)

    def test_transpose_reshape(self, rng):
        a = Parameter("a", rng.normal(size=(3, 4)))

        def loss():
            return (a.T @ a).reshape(16).sum()

        assert_matches_fd(loss, a)


class TestGraphMechanics:
    def test_grad_accumulates_across_uses(self):
        a = Parameter("a", np.array([2.0]))
        out = a * 3.0 + a * 4.0
        out.backward()
        np.testing.assert_allclose(a.grad, [7.0])

    def test_constants_get_no_grad(self):
        c = Tensor(np.ones(3))
        p = Parameter("p", np.ones(3))
        (c * p).sum().backward()
        assert c.grad is None
        assert p.grad is not None

    def test_backward_is_repeatable_after_zero(self, rng):
        a = Parameter("a", rng.normal(size=(3,)))
        (a * a).sum().backward()
        g1 = a.grad.copy()
        a.zero_grad()
        (a * a).sum().backward()
        np.testing.assert_array_equal(g1, a.grad)

    def test_diamond_graph(self, rng):
        a = Parameter("a", rng.normal(size=(2, 2)))

        def loss():
            shared = a.tanh()
            return (shared @ shared.T).sum()

        assert_matches_fd(loss, a)

    def test_float64_everywhere(self):
        t = Tensor([1, 2, 3]) + Tensor(np.float32([1, 2, 3]))
        assert t.data.dtype == np.float64
