import math

import numpy as np
import torch
from pytest import raises

from multicat.training.optimizer import NonFiniteGradientError, RMSProp, RMSPropState, rmsprop_update


def test_single_unit_gradient_step():
    params = {"theta": torch.zeros(1, dtype=torch.float64)}
    grads = {"theta": torch.ones(1, dtype=torch.float64)}
    state = RMSPropState.zeros_like(params, decay=0.999, epsilon=1e-8)

    new_params, new_state = rmsprop_update(params, grads, state, lr=0.01)

    assert math.isclose(new_state.square_avg["theta"].item(), 0.001, rel_tol=1e-12)
    assert math.isclose(new_params["theta"].item(), -0.01 / (math.sqrt(0.001) + 1e-8), rel_tol=1e-12)
    assert round(new_params["theta"].item(), 6) == -0.316228
    assert new_state.step == 1
    # Inputs stay untouched
    assert params["theta"].item() == 0.0
    assert state.square_avg["theta"].item() == 0.0


def test_steps_match_scalar_reference():
    rng = np.random.default_rng(0)
    decay, epsilon, lr = 0.999, 1e-8, 0.003
    initial = rng.normal(size=5)
    gradients = rng.normal(size=(100, 5))

    params = {"w": torch.from_numpy(initial.copy())}
    state = RMSPropState.zeros_like(params, decay, epsilon)
    for gradient in gradients:
        params, state = rmsprop_update(params, {"w": torch.from_numpy(gradient)}, state, lr)

    reference = list(initial)
    averages = [0.0] * 5
    for gradient in gradients:
        for index in range(5):
            averages[index] = decay * averages[index] + (1.0 - decay) * gradient[index] ** 2
            reference[index] -= lr * gradient[index] / (math.sqrt(averages[index]) + epsilon)

    assert np.allclose(params["w"].numpy(), reference, rtol=0.0, atol=1e-12)
    assert np.allclose(state.square_avg["w"].numpy(), averages, rtol=0.0, atol=1e-12)
    assert state.step == 100


def test_optimizer_matches_functional_update():
    rng = np.random.default_rng(1)
    weight = torch.nn.Parameter(torch.from_numpy(rng.normal(size=(3, 2))))
    optimizer = RMSProp([("weight", weight)], lr=0.01)
    params = {"weight": weight.detach().clone()}
    state = RMSPropState.zeros_like(params)
    for _ in range(10):
        gradient = torch.from_numpy(rng.normal(size=(3, 2)))
        weight.grad = gradient.clone()
        optimizer.step()
        params, state = rmsprop_update(params, {"weight": gradient}, state, 0.01)
    assert torch.allclose(weight.detach(), params["weight"], rtol=0.0, atol=1e-12)


def test_non_finite_gradient_keeps_parameters():
    first = torch.nn.Parameter(torch.ones(2))
    second = torch.nn.Parameter(torch.ones(2))
    optimizer = RMSProp([("first", first), ("second", second)], lr=0.1)
    first.grad = torch.ones(2)
    second.grad = torch.tensor([1.0, float("nan")])
    with raises(NonFiniteGradientError, match="second"):
        optimizer.step()
    assert torch.equal(first.detach(), torch.ones(2))

    params = {"x": torch.zeros(1)}
    with raises(NonFiniteGradientError):
        rmsprop_update(params, {"x": torch.tensor([float("inf")])}, RMSPropState.zeros_like(params), 0.1)


def test_invalid_arguments():
    params = {"x": torch.zeros(2)}
    state = RMSPropState.zeros_like(params)
    with raises(ValueError):
        rmsprop_update(params, {"x": torch.zeros(2)}, state, lr=0.0)
    with raises(ValueError):
        rmsprop_update(params, {"y": torch.zeros(2)}, state, lr=0.1)
    with raises(ValueError):
        rmsprop_update(params, {"x": torch.zeros(3)}, state, lr=0.1)
