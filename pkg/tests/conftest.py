import numpy as np
import pytest

import hjbflow as hf


@pytest.fixture(scope="session")
def double_integrator():
    return hf.make_double_integrator()

@pytest.fixture(scope="session")
def nonlinear_benchmark():
    return hf.make_nonlinear_benchmark()

@pytest.fixture(scope="session")
def pendulum():
    return hf.make_pendulum()

@pytest.fixture(scope="session")
def detumbling():
    return hf.make_detumbling()


@pytest.fixture(scope="session")
def small_net():
    """A tiny untrained network for shape/identity tests."""
    elm = hf.init_elm(2, 20, seed=3, weight_scale=1.0)
    rng = np.random.default_rng(5)
    return hf.ValueNetwork(elm, rng.standard_normal(20))


@pytest.fixture(scope="session")
def trained_di(double_integrator):
    """A quick double-integrator training run shared by closed-loop tests."""
    config = hf.TrainConfig(hidden=100, num_points=2500, seed=0,
                            adam_epochs=300, lbfgs_iters=2000)
    net, report = hf.train(double_integrator, config)
    return net, report, config
