"""
Минимальная полносвязная сеть с обратным распространением.

Слои: dense + {relu, softmax, sigmoid, identity}. Оптимизатор: SGD с моментом
Нестерова. Для тестов есть оракул конечных разностей.

Все функции чистые: параметры и состояние оптимизатора возвращаются новыми
объектами, входы не изменяются.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ordinal_qwk.config import FD_EPS
from ordinal_qwk.errors import ConfigError, InputError, OracleError, ShapeError
from ordinal_qwk.models import Layer, NetworkParams, OptimizerState, Tensor

ACTIVATIONS = ("relu", "softmax", "sigmoid", "identity")


class ForwardTrace(list):
    """Список активаций по слоям (последняя = выход сети) + исходный батч в .inputs."""

    def __init__(self, inputs: Tensor, activations: Sequence[Tensor]):
        super().__init__(activations)
        self.inputs = inputs


def softmax(z: Tensor) -> Tensor:
    z = z - np.max(z, axis=1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=1, keepdims=True)


def sigmoid(z: Union[Tensor, float]) -> Union[Tensor, float]:
    # exp(-log(1 + exp(-z))) без переполнения при больших |z|
    return np.exp(-np.logaddexp(0.0, -np.asarray(z, dtype=np.float64)))


def _activate(z: Tensor, activation: str) -> Tensor:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "softmax":
        return softmax(z)
    if activation == "sigmoid":
        return sigmoid(z)
    return z


def _activation_backward(out: Tensor, grad_out: Tensor, activation: str) -> Tensor:
    if activation == "relu":
        return grad_out * (out > 0.0)
    if activation == "softmax":
        inner = np.sum(grad_out * out, axis=1, keepdims=True)
        return out * (grad_out - inner)
    if activation == "sigmoid":
        return grad_out * out * (1.0 - out)
    return grad_out


def init_params(
    input_dim: int,
    hidden: Sequence[int],
    output_width: int,
    output_activation: str,
    rng: np.random.Generator,
    anchor: Optional[Tensor] = None,
    head: str = "",
) -> NetworkParams:
    """Равномерная инициализация в ±sqrt(6 / (fan_in + fan_out)), смещения нулевые."""
    if output_activation not in ACTIVATIONS:
        raise ConfigError(f"Неизвестная активация выхода '{output_activation}'")
    widths = [int(input_dim)] + [int(h) for h in hidden] + [int(output_width)]
    if any(w <= 0 for w in widths):
        raise ConfigError(f"Ширины слоёв должны быть положительными: {widths}")

    layers: List[Layer] = []
    for i in range(len(widths) - 1):
        fan_in, fan_out = widths[i], widths[i + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        act = output_activation if i == len(widths) - 2 else "relu"
        layers.append(Layer(weight=w, bias=np.zeros(fan_out), activation=act))

    params = NetworkParams(layers=layers, anchor=None if anchor is None else np.array(anchor, dtype=np.float64), head=head)
    validate_params(params)
    return params


def validate_params(params: NetworkParams) -> None:
    if not params.layers:
        raise ShapeError("Сеть без слоёв")
    for i, layer in enumerate(params.layers):
        if layer.activation not in ACTIVATIONS:
            raise ConfigError(f"Слой {i}: неизвестная активация '{layer.activation}'")
        if layer.weight.ndim != 2 or layer.bias.shape != (layer.fan_out,):
            raise ShapeError(f"Слой {i}: веса {layer.weight.shape}, смещение {layer.bias.shape}")
        if i > 0 and params.layers[i - 1].fan_out != layer.fan_in:
            raise ShapeError(
                f"Слой {i}: fan_in={layer.fan_in} не совпадает с fan_out={params.layers[i - 1].fan_out} предыдущего слоя"
            )


def forward(params: NetworkParams, batch: Tensor) -> ForwardTrace:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"Батч должен быть матрицей n×d, получена форма {x.shape}")
    if x.shape[1] != params.layers[0].fan_in:
        raise ShapeError(f"Ширина батча {x.shape[1]} не совпадает с fan_in={params.layers[0].fan_in}")
    if not np.all(np.isfinite(x)):
        raise InputError("Входной батч содержит NaN/Inf")

    acts: List[Tensor] = []
    h = x
    for layer in params.layers:
        h = _activate(h @ layer.weight + layer.bias, layer.activation)
        acts.append(h)
    return ForwardTrace(x, acts)


def backward(
    params: NetworkParams,
    activations: ForwardTrace,
    output_gradient: Tensor,
) -> Tuple[NetworkParams, Tensor]:
    """Градиенты скалярной потери по всем весам/смещениям и по входу.

    output_gradient: dL/d(выход сети после активации). Поле anchor в
    результате нулевое: градиент по a считают головы (heads).
    """
    if len(activations) != len(params.layers):
        raise ShapeError(f"Активаций {len(activations)}, слоёв {len(params.layers)}")
    grad = np.asarray(output_gradient, dtype=np.float64)
    if grad.shape != activations[-1].shape:
        raise ShapeError(f"Градиент выхода {grad.shape} не совпадает с выходом сети {activations[-1].shape}")

    grads: List[Tensor] = [None] * (2 * len(params.layers))  # type: ignore[list-item]
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        prev = activations[i - 1] if i > 0 else activations.inputs
        dz = _activation_backward(activations[i], grad, layer.activation)
        grads[2 * i] = prev.T @ dz
        grads[2 * i + 1] = dz.sum(axis=0)
        grad = dz @ layer.weight.T

    if params.anchor is not None:
        grads.append(np.zeros_like(params.anchor))
    return params.with_arrays(grads), grad


def sgd_nesterov_step(
    params: NetworkParams,
    grads: NetworkParams,
    state: OptimizerState,
) -> Tuple[NetworkParams, OptimizerState]:
    """v' = mu*v - alpha*g;  theta' = theta + mu*v' - alpha*g."""
    alpha, mu = state.learning_rate, state.momentum
    if not alpha > 0:
        raise ConfigError(f"Скорость обучения должна быть > 0, получено {alpha}")
    if not 0.0 <= mu < 1.0:
        raise ConfigError(f"Момент должен лежать в [0, 1), получено {mu}")

    thetas, gs, vs = params.arrays(), grads.arrays(), state.velocity.arrays()
    if len(thetas) != len(gs) or len(thetas) != len(vs):
        raise ShapeError("Структура градиентов/скоростей не совпадает с параметрами")

    new_thetas, new_vs = [], []
    for theta, g, v in zip(thetas, gs, vs):
        if theta.shape != g.shape or theta.shape != v.shape:
            raise ShapeError(f"Формы параметра {theta.shape}, градиента {g.shape}, скорости {v.shape} различаются")
        v_new = mu * v - alpha * g
        new_vs.append(v_new)
        new_thetas.append(theta + mu * v_new - alpha * g)

    return params.with_arrays(new_thetas), replace(state, velocity=state.velocity.with_arrays(new_vs))


Params = Union[NetworkParams, Tensor, float]


def finite_difference_gradient(
    loss_fn: Callable[[Params], float],
    params: Params,
    eps: float = FD_EPS,
) -> Params:
    """Центральные разности (L(θ+εe) − L(θ−εe)) / 2ε по каждой координате.

    params: NetworkParams, массив или скаляр; результат той же структуры.
    """
    if not eps > 0:
        raise ConfigError(f"eps должен быть > 0, получено {eps}")

    if isinstance(params, NetworkParams):
        flat = params.flatten()
        rebuild: Callable[[Tensor], Params] = params.unflatten
    else:
        arr = np.asarray(params, dtype=np.float64)
        flat = arr.ravel().copy()
        shape = arr.shape

        def rebuild(v: Tensor) -> Params:
            return v.reshape(shape).copy() if shape else float(v[0])

    def evaluate(v: Tensor) -> float:
        value = float(loss_fn(rebuild(v)))
        if not np.isfinite(value):
            raise OracleError(f"Функция потерь вернула нечисловое значение {value}")
        return value

    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = evaluate(flat)
        flat[i] = orig - eps
        down = evaluate(flat)
        flat[i] = orig
        grad[i] = (up - down) / (2.0 * eps)

    return rebuild(grad)
