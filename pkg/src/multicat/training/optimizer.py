from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

import torch
from torch import Tensor
from torch.optim import Optimizer

DEFAULT_DECAY = 0.999
DEFAULT_EPSILON = 1e-8


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, parameter_name: str):
        super().__init__(f'Non-finite gradient for parameter "{parameter_name}"')
        self.parameter_name = parameter_name


@dataclass
class RMSPropState:
    """Running average of squared gradients per parameter name."""

    square_avg: Dict[str, Tensor] = field(default_factory=dict)
    decay: float = DEFAULT_DECAY
    epsilon: float = DEFAULT_EPSILON
    step: int = 0

    @classmethod
    def zeros_like(
        cls, params: Dict[str, Tensor], decay: float = DEFAULT_DECAY, epsilon: float = DEFAULT_EPSILON
    ) -> "RMSPropState":
        return cls({name: torch.zeros_like(value) for name, value in params.items()}, decay, epsilon, 0)


def _rmsprop_step_(param: Tensor, grad: Tensor, square_avg: Tensor, lr: float, decay: float, epsilon: float) -> None:
    # v <- decay * v + (1 - decay) * g^2, theta <- theta - lr * g / (sqrt(v) + epsilon)
    square_avg.mul_(decay).addcmul_(grad, grad, value=1.0 - decay)
    param.addcdiv_(grad, square_avg.sqrt().add_(epsilon), value=-lr)


def _check_finite(named_grads: Iterable[Tuple[str, Tensor]]) -> None:
    for name, grad in named_grads:
        if not bool(torch.isfinite(grad).all()):
            raise NonFiniteGradientError(name)


def rmsprop_update(
    params: Dict[str, Tensor], grads: Dict[str, Tensor], state: RMSPropState, lr: float
) -> Tuple[Dict[str, Tensor], RMSPropState]:
    """One plain (non-centered) RMSProp step. Inputs are left untouched; new tensors are returned."""
    if lr <= 0:
        raise ValueError(f"The learning rate must be positive, got {lr}")
    if params.keys() != grads.keys() or params.keys() != state.square_avg.keys():
        raise ValueError("Parameters, gradients and optimizer state must have the same names")
    for name, value in params.items():
        if grads[name].shape != value.shape or state.square_avg[name].shape != value.shape:
            raise ValueError(f'Shape mismatch for parameter "{name}"')
    _check_finite(grads.items())

    new_params = {}
    new_square_avg = {}
    with torch.no_grad():
        for name, value in params.items():
            param = value.detach().clone()
            square_avg = state.square_avg[name].clone()
            _rmsprop_step_(param, grads[name], square_avg, lr, state.decay, state.epsilon)
            new_params[name] = param
            new_square_avg[name] = square_avg
    return new_params, RMSPropState(new_square_avg, state.decay, state.epsilon, state.step + 1)


class RMSProp(Optimizer):
    """In-place RMSProp over named parameters, usable with the torch learning rate schedulers.

    All gradients are checked before any parameter changes, so a non-finite gradient leaves the
    parameters at their last finite values.
    """

    def __init__(
        self,
        named_parameters: Iterable[Tuple[str, Tensor]],
        lr: float,
        decay: float = DEFAULT_DECAY,
        epsilon: float = DEFAULT_EPSILON,
    ):
        if lr <= 0:
            raise ValueError(f"The learning rate must be positive, got {lr}")
        named = [(name, param) for name, param in named_parameters if param.requires_grad]
        defaults = dict(lr=lr, decay=decay, epsilon=epsilon)
        super().__init__([{"params": [param for _, param in named]}], defaults)
        self._names: Dict[int, str] = {id(param): name for name, param in named}

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()

        active: List[Tuple[dict, Tensor]] = [
            (group, param) for group in self.param_groups for param in group["params"] if param.grad is not None
        ]
        _check_finite((self._names.get(id(param), "?"), param.grad) for _, param in active)

        for group, param in active:
            state = self.state[param]
            if len(state) == 0:
                state["step"] = 0
                state["square_avg"] = torch.zeros_like(param, memory_format=torch.preserve_format)
            state["step"] += 1
            _rmsprop_step_(param, param.grad, state["square_avg"], group["lr"], group["decay"], group["epsilon"])
        return loss
