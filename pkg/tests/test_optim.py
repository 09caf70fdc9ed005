import numpy as np
import pytest

from sofkit import autodiff as ad
from sofkit import optim


def quadratic_loss(params, _batch):
    d = ad.sub(params[0], 3.0)
    return ad.sum(ad.mul(d, d))


class TestSGD:
    def test_single_step(self):
        (out,) = optim.sgd_step([np.array(1.0)], [np.array(2.0)], 0.5)
        assert out == pytest.approx(0.0)

    def test_zero_gradient(self):
        (out,) = optim.sgd_step([np.array(1.5)], [np.array(0.0)], 0.1)
        assert out == pytest.approx(1.5)

    def test_quadratic_contraction(self):
        cfg = optim.OptimizerConfig(kind="sgd", learning_rate=0.1, steps=100)
        trace = optim.train([np.array(0.0)], quadratic_loss, cfg)
        assert abs(trace.final_params[0] - 3.0) < 1e-6

    def test_monotone_decrease_on_quadratic(self):
        cfg = optim.OptimizerConfig(kind="sgd", learning_rate=0.1, steps=50)
        trace = optim.train([np.array(10.0)], quadratic_loss, cfg)
        assert all(a > b for a, b in zip(trace.losses, trace.losses[1:]))


class TestAdam:
    def test_first_step_magnitude(self):
        cfg = optim.OptimizerConfig(kind="adam", learning_rate=0.05)
        state = optim.AdamState.zeros_like([np.array(1.0)])
        for grad in (1e-6, 1.0, 1e6):
            (out,), _ = optim.adam_step([np.array(1.0)], [np.array(grad)], state, cfg, 1)
            # step size ~ lr for any constant gradient scale (within the
            # eps/|g| correction in the denominator)
            assert abs(1.0 - out) == pytest.approx(0.05, rel=0.02)
            state = optim.AdamState.zeros_like([np.array(1.0)])

    def test_zero_gradient_fixed_point(self):
        cfg = optim.OptimizerConfig(kind="adam", learning_rate=0.05)
        params = [np.array(2.0)]
        state = optim.AdamState.zeros_like(params)
        for t in range(1, 10):
            params, state = optim.adam_step(params, [np.array(0.0)], state, cfg, t)
        assert params[0] == pytest.approx(2.0)

    def test_step_counter_validated(self):
        cfg = optim.OptimizerConfig(kind="adam", learning_rate=0.05)
        state = optim.AdamState.zeros_like([np.array(1.0)])
        with pytest.raises(ValueError):
            optim.adam_step([np.array(1.0)], [np.array(1.0)], state, cfg, 0)

    def test_quadratic_bowl(self):
        cfg = optim.OptimizerConfig(kind="adam", learning_rate=0.01, steps=500)
        trace = optim.train([np.array([2.0, 4.0])], quadratic_loss, cfg)
        assert np.all(np.abs(trace.final_params[0] - 3.0) < 1e-4)


class TestTrainLoop:
    def test_zero_steps_echoes_initial_loss(self):
        cfg = optim.OptimizerConfig(kind="sgd", learning_rate=0.1, steps=0)
        trace = optim.train([np.array(1.0)], quadratic_loss, cfg)
        assert trace.losses == [pytest.approx(4.0)]
        assert trace.final_params[0] == pytest.approx(1.0)

    def test_determinism(self):
        def noisy_loss(params, batch):
            return ad.sum(ad.mul(ad.sub(params[0], batch), ad.sub(params[0], batch)))

        def batches(seed):
            rng = np.random.default_rng(seed)
            return [rng.normal(size=3) for _ in range(20)]

        cfg = optim.OptimizerConfig(kind="adam", learning_rate=0.05, steps=20, seed=9)
        t1 = optim.train([np.zeros(3)], noisy_loss, cfg, batches=batches(9))
        t2 = optim.train([np.zeros(3)], noisy_loss, cfg, batches=batches(9))
        assert np.array_equal(t1.final_params[0], t2.final_params[0])
        assert t1.losses == t2.losses

    def test_nonfinite_loss_aborts(self):
        def bad_loss(params, _batch):
            return ad.div(1.0, ad.sub(params[0], params[0]))

        cfg = optim.OptimizerConfig(kind="sgd", learning_rate=0.1, steps=5)
        with pytest.raises(FloatingPointError):
            optim.train([np.array(1.0)], bad_loss, cfg)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            optim.OptimizerConfig(kind="lbfgs")
        with pytest.raises(ValueError):
            optim.OptimizerConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            optim.OptimizerConfig(batch_size=0)
