"""Tests for differentiation, recurrent encoding, SGD and gradient checking."""
import math

import pytest
import torch
from torch import nn

from common.errors import DataError, NumericalError
from common.schemas import TrainerConfig
from core.nncore import (
    DTYPE,
    backward,
    check_finite,
    forward,
    grad_check,
    init_parameters,
    lstm_encode,
    lstm_step,
    initial_state,
    make_optimizer,
    sgd_step,
)


def cell(input_size=3, hidden_size=4, seed=0):
    torch.manual_seed(seed)
    return nn.LSTMCell(input_size, hidden_size).double()


def test_backward_square():
    x = torch.tensor(3.0, dtype=DTYPE, requires_grad=True)
    [grad] = backward(forward(lambda v: v * v, x), [x])
    assert grad.item() == 6.0


def test_backward_constant_gives_zero_gradients():
    x = torch.tensor([1.0, 2.0], dtype=DTYPE, requires_grad=True)
    y = torch.tensor(0.5, dtype=DTYPE, requires_grad=True)
    loss = (x * 0).sum() + 4.0
    grads = backward(loss, [x, y])
    assert torch.equal(grads[0], torch.zeros(2, dtype=DTYPE))
    assert grads[1].item() == 0.0


def test_backward_rejects_non_scalar_loss():
    x = torch.ones(2, dtype=DTYPE, requires_grad=True)
    with pytest.raises(ValueError):
        backward(x * 2, [x])


def test_nan_is_trapped():
    with pytest.raises(NumericalError):
        check_finite(torch.tensor([1.0, math.nan], dtype=DTYPE))
    x = torch.tensor(-1.0, dtype=DTYPE, requires_grad=True)
    with pytest.raises(NumericalError):
        forward(torch.log, x)


def test_backward_leaves_forward_values_unchanged():
    x = torch.tensor([0.3, -0.2], dtype=DTYPE, requires_grad=True)
    y = torch.tanh(x)
    before = y.detach().clone()
    backward(y.sum(), [x])
    assert torch.equal(y.detach(), before)


def test_zero_weight_lstm_gives_zero_states():
    lstm = cell()
    with torch.no_grad():
        for param in lstm.parameters():
            param.zero_()
    inputs = [torch.randn(3, dtype=DTYPE) for _ in range(4)]
    for state in lstm_encode(lstm, inputs):
        assert torch.equal(state, torch.zeros(4, dtype=DTYPE))


def test_single_input_equals_one_step():
    lstm = cell()
    x = torch.randn(3, dtype=DTYPE)
    [state] = lstm_encode(lstm, [x])
    expected = lstm_step(lstm, x, initial_state(lstm))[0].reshape(-1)
    assert torch.equal(state, expected)


def _manual_lstm(lstm, inputs):
    """Independent recurrence with gate order input, forget, candidate, output."""
    H = lstm.hidden_size
    h = torch.zeros(H, dtype=DTYPE)
    c = torch.zeros(H, dtype=DTYPE)
    outputs = []
    for x in inputs:
        z = lstm.weight_ih @ x + lstm.bias_ih + lstm.weight_hh @ h + lstm.bias_hh
        i, f, g, o = z[:H], z[H:2 * H], z[2 * H:3 * H], z[3 * H:]
        c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h = torch.sigmoid(o) * torch.tanh(c)
        outputs.append(h)
    return outputs


def test_lstm_matches_manual_recurrence():
    lstm = cell(seed=3)
    inputs = [torch.randn(3, dtype=DTYPE) for _ in range(3)]
    with torch.no_grad():
        for got, expected in zip(lstm_encode(lstm, inputs), _manual_lstm(lstm, inputs)):
            assert torch.allclose(got, expected, atol=1e-12)


def test_backward_direction_reads_right_to_left():
    lstm = cell(seed=4)
    inputs = [torch.randn(3, dtype=DTYPE) for _ in range(3)]
    with torch.no_grad():
        backward_states = lstm_encode(lstm, inputs, "backward")
        manual = _manual_lstm(lstm, inputs[::-1])
    assert torch.allclose(backward_states[0], manual[-1], atol=1e-12)
    assert torch.allclose(backward_states[2], manual[0], atol=1e-12)


def test_bidirectional_concatenates():
    fwd, bwd = cell(seed=1), cell(seed=2)
    inputs = [torch.randn(3, dtype=DTYPE) for _ in range(2)]
    states = lstm_encode((fwd, bwd), inputs, "bidirectional")
    assert states[0].shape == (8,)
    assert torch.equal(states[1][:4], lstm_encode(fwd, inputs)[1])
    assert torch.equal(states[1][4:], lstm_encode(bwd, inputs, "backward")[1])


def test_lstm_encode_errors():
    lstm = cell()
    with pytest.raises(DataError):
        lstm_encode(lstm, [])
    with pytest.raises(ValueError):
        lstm_encode(lstm, [torch.zeros(5, dtype=DTYPE)])
    with pytest.raises(ValueError):
        lstm_encode(lstm, [torch.zeros(3, dtype=DTYPE)], "sideways")


def test_init_parameters():
    module = nn.Sequential(nn.Linear(6, 4), nn.LSTMCell(3, 5)).double()
    init_parameters(module, forget_bias=1.0)
    linear, lstm = module[0], module[1]
    bound = math.sqrt(6 / (6 + 4))
    assert linear.weight.abs().max().item() <= bound
    assert torch.equal(linear.bias, torch.zeros(4, dtype=DTYPE))
    assert torch.equal(lstm.bias_ih[5:10], torch.ones(5, dtype=DTYPE))
    assert torch.equal(lstm.bias_ih[:5], torch.zeros(5, dtype=DTYPE))
    assert torch.equal(lstm.bias_hh, torch.zeros(20, dtype=DTYPE))


def _sgd_setup(value, grad, **config):
    param = nn.Parameter(torch.tensor(value, dtype=DTYPE))
    param.grad = torch.tensor(grad, dtype=DTYPE)
    settings = TrainerConfig(**config)
    return param, torch.optim.SGD([param], lr=settings.learning_rate), settings


def test_sgd_step_reference_update():
    param, optimizer, settings = _sgd_setup([1.0], [1.0], learning_rate=0.1, decay=0.08, clip_threshold=None)
    rate = sgd_step(optimizer, settings, epoch=0)
    assert rate == 0.1
    assert param.item() == pytest.approx(0.9)


def test_sgd_step_decays_per_epoch():
    param, optimizer, settings = _sgd_setup([1.0], [1.0], learning_rate=0.1, decay=0.08, clip_threshold=None)
    rate = sgd_step(optimizer, settings, epoch=1)
    assert rate == pytest.approx(0.1 / 1.08)
    assert param.item() == pytest.approx(1.0 - 0.1 / 1.08)


def test_sgd_zero_gradient_leaves_params():
    param, optimizer, settings = _sgd_setup([1.0, -2.0], [0.0, 0.0])
    sgd_step(optimizer, settings, epoch=0)
    assert param.tolist() == [1.0, -2.0]


def test_sgd_clips_by_global_norm():
    param, optimizer, settings = _sgd_setup([0.0, 0.0], [3.0, 4.0], learning_rate=0.1, clip_threshold=1.0)
    sgd_step(optimizer, settings, epoch=0)
    assert param.tolist() == pytest.approx([-0.06, -0.08])


def test_make_optimizer_covers_module():
    module = nn.Linear(2, 2).double()
    optimizer = make_optimizer(module, TrainerConfig())
    assert len(optimizer.param_groups[0]["params"]) == 2


def test_grad_check_linear_function():
    w = torch.randn(3, dtype=DTYPE, requires_grad=True)
    x = torch.tensor([1.0, -2.0, 0.5], dtype=DTYPE)
    report = grad_check(lambda: (w * x).sum(), [w])
    assert report.passed
    assert report.max_relative_error < 1e-8
    assert report.checked_elements == 3


def test_grad_check_catches_corrupted_gradient():
    w = torch.randn(3, dtype=DTYPE, requires_grad=True)

    def loss():
        return (w * w).sum()

    corrupted = [2 * w.detach() + torch.tensor([0.0, 0.5, 0.0], dtype=DTYPE)]
    report = grad_check(loss, [w], analytic=corrupted)
    assert not report.passed
    assert report.worst_element == 1


def test_grad_check_three_layer_composite():
    torch.manual_seed(7)
    W1 = torch.randn(4, 3, dtype=DTYPE, requires_grad=True)
    W2 = torch.randn(4, 4, dtype=DTYPE, requires_grad=True)
    W3 = torch.randn(2, 4, dtype=DTYPE, requires_grad=True)
    x = torch.randn(3, dtype=DTYPE)

    def loss():
        h = torch.tanh(W1 @ x)
        h = torch.sigmoid(W2 @ h) * h
        return torch.log_softmax(W3 @ h, dim=0)[1]

    assert grad_check(loss, [W1, W2, W3]).passed
