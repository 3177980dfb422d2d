"""
Differentiation and training primitives for every model component.

Everything runs in float64 on torch autograd: the recorded autograd tape is the
computation graph, `backward` walks it once in reverse, and every forward value
and gradient passes through a finiteness trap.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import torch
from torch import nn

from common.errors import DataError, NumericalError
from common.schemas import TrainerConfig

logger = logging.getLogger(__name__)

DTYPE = torch.float64

LSTMState = Tuple[torch.Tensor, torch.Tensor]

# The recurrent cell: input/forget/candidate/output gates, hidden size H, input size D.
RecurrentCell = nn.LSTMCell


def check_finite(value: torch.Tensor, name: str = "value") -> torch.Tensor:
    if not torch.isfinite(value).all():
        raise NumericalError(f"Non-finite entries detected in {name}")
    return value


def forward(fn: Callable[..., torch.Tensor], *inputs) -> torch.Tensor:
    """Evaluate `fn`, recording the autograd graph, and trap NaN/Inf."""
    return check_finite(fn(*inputs), getattr(fn, "__name__", "forward"))


def _require_scalar(loss: torch.Tensor):
    if loss.numel() != 1:
        raise ValueError(f"Loss must be a scalar, got shape {tuple(loss.shape)}")
    check_finite(loss, "loss")


def backward(loss: torch.Tensor, params: Sequence[torch.Tensor], retain_graph: bool = False) -> List[torch.Tensor]:
    """Gradients of a scalar loss with respect to each of `params`.

    Parameters the loss does not depend on get zero gradients.
    """
    _require_scalar(loss)
    grads = torch.autograd.grad(loss, list(params), allow_unused=True, retain_graph=retain_graph)
    result = []
    for param, grad in zip(params, grads):
        grad = torch.zeros_like(param) if grad is None else grad
        result.append(check_finite(grad, "gradient"))
    return result


def accumulate_gradients(loss: torch.Tensor, module: nn.Module):
    """loss.backward() into .grad slots, then trap non-finite gradients."""
    _require_scalar(loss)
    loss.backward()
    for name, param in module.named_parameters():
        if param.grad is not None:
            check_finite(param.grad, f"gradient of {name}")


def init_parameters(module: nn.Module, forget_bias: float = 1.0):
    """Glorot-uniform matrices, zero vectors, LSTM forget-gate bias = forget_bias."""
    for param in module.parameters():
        if param.dim() >= 2:
            nn.init.xavier_uniform_(param)
        else:
            nn.init.zeros_(param)
    for sub in module.modules():
        if isinstance(sub, nn.LSTMCell):
            hidden = sub.hidden_size
            with torch.no_grad():
                # torch gate order: input, forget, candidate, output
                sub.bias_ih[hidden:2 * hidden].fill_(forget_bias)


def initial_state(cell: nn.LSTMCell) -> LSTMState:
    zeros = torch.zeros(1, cell.hidden_size, dtype=cell.weight_ih.dtype)
    return zeros, zeros.clone()


def lstm_step(cell: nn.LSTMCell, x: torch.Tensor, state: LSTMState) -> LSTMState:
    if x.shape[-1] != cell.input_size:
        raise ValueError(f"LSTM input width {x.shape[-1]} does not match cell input size {cell.input_size}")
    return cell(x.reshape(1, -1), state)


def lstm_encode(
    cells,
    inputs: Sequence[torch.Tensor],
    direction: str = "forward",
) -> List[torch.Tensor]:
    """Hidden state at every position.

    `direction` is forward, backward (state at i has read inputs[n-1..i]) or
    bidirectional, in which case `cells` is a (forward, backward) pair and each
    position gets the concatenation of both states.
    """
    if len(inputs) == 0:
        raise DataError("lstm_encode needs a nonempty input sequence")
    if direction == "bidirectional":
        forward_cell, backward_cell = cells
        fwd = lstm_encode(forward_cell, inputs, "forward")
        bwd = lstm_encode(backward_cell, inputs, "backward")
        return [torch.cat([f, b]) for f, b in zip(fwd, bwd)]
    if direction not in ("forward", "backward"):
        raise ValueError(f"Unknown direction '{direction}'")

    order = range(len(inputs)) if direction == "forward" else range(len(inputs) - 1, -1, -1)
    state = initial_state(cells)
    outputs: List[Optional[torch.Tensor]] = [None] * len(inputs)
    for index in order:
        state = lstm_step(cells, inputs[index], state)
        outputs[index] = state[0].reshape(-1)
    return outputs


def make_optimizer(module: nn.Module, config: TrainerConfig) -> torch.optim.SGD:
    return torch.optim.SGD(module.parameters(), lr=config.learning_rate)


def sgd_step(optimizer: torch.optim.SGD, config: TrainerConfig, epoch: int) -> float:
    """p <- p - rate(epoch) * clip(g) for every parameter with a gradient; returns the rate."""
    rate = config.rate(epoch)
    for group in optimizer.param_groups:
        group["lr"] = rate
    params = [p for group in optimizer.param_groups for p in group["params"] if p.grad is not None]
    if config.clip_threshold is not None and params:
        nn.utils.clip_grad_norm_(params, config.clip_threshold)
    optimizer.step()
    return rate


@dataclass
class GradCheckReport:
    max_relative_error: float
    tolerance: float
    worst_parameter: int
    worst_element: int
    checked_elements: int

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


# Below this magnitude the error is judged on an absolute scale.
_RELATIVE_FLOOR = 1e-4


def grad_check(
    loss_fn: Callable[[], torch.Tensor],
    params: Sequence[torch.Tensor],
    eps: float = 1e-5,
    tolerance: float = 1e-4,
    analytic: Optional[Sequence[torch.Tensor]] = None,
) -> GradCheckReport:
    """Compare analytic gradients with central differences, element by element.

    `loss_fn` must rebuild the graph from the current parameter values on every call.
    Passing `analytic` checks externally supplied gradients instead of autograd's.
    """
    if analytic is None:
        analytic = backward(loss_fn(), params)
    worst = (0.0, 0, 0)
    count = 0
    with torch.no_grad():
        for p_index, (param, grad) in enumerate(zip(params, analytic)):
            flat = param.view(-1)
            flat_grad = grad.reshape(-1)
            for e_index in range(flat.numel()):
                original = flat[e_index].item()
                flat[e_index] = original + eps
                plus = loss_fn().item()
                flat[e_index] = original - eps
                minus = loss_fn().item()
                flat[e_index] = original
                numeric = (plus - minus) / (2 * eps)
                exact = flat_grad[e_index].item()
                scale = max(abs(numeric), abs(exact), _RELATIVE_FLOOR)
                error = abs(numeric - exact) / scale
                count += 1
                if error > worst[0]:
                    worst = (error, p_index, e_index)
    report = GradCheckReport(worst[0], tolerance, worst[1], worst[2], count)
    logger.debug(f"grad_check over {count} elements: max relative error {report.max_relative_error:.3e}")
    return report
