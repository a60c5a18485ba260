"""Parameterized layers and the model base class.

Layers hold their parameters as :class:`Tensor` objects with
``requires_grad=True`` and expose them, in construction order, through
``named_parameters``. Batch-norm running statistics are plain numpy arrays
registered as buffers; they travel with checkpoints but never receive
gradients.

Weight init: convolution and linear weights are drawn from
uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); linear biases start at zero;
batch-norm starts at gamma=1, beta=0.
"""

from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from . import ops
from .errors import ShapeError
from .tensor import GradTape, Tensor

__all__ = ["Layer", "Conv1d", "Conv2d", "BatchNorm", "Linear", "Model",
           "ParamGroup"]


class Layer:
    """Base class: walks its attributes to find parameters and sublayers."""

    buffer_names: tuple[str, ...] = ()

    def _children(self) -> Iterator[tuple[str, "Layer"]]:
        for name, value in vars(self).items():
            if isinstance(value, Layer):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Layer):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
        for name, child in self._children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name in type(self).buffer_names:
            yield prefix + name, getattr(self, name)
        for name, child in self._children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]


def _uniform_fan_in(rng: np.random.Generator, shape: tuple, fan_in: int,
                    dtype) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    data = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return Tensor(data, requires_grad=True)


class Conv1d(Layer):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 bias: bool = False, *, rng: np.random.Generator, dtype=np.float32):
        self.weight = _uniform_fan_in(
            rng, (out_channels, in_channels, kernel_size),
            in_channels * kernel_size, dtype)
        self.bias = (Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)
                     if bias else None)

    def forward(self, x: Tensor, tape: Optional[GradTape] = None) -> Tensor:
        return ops.conv1d(x, self.weight, self.bias, tape=tape)


class Conv2d(Layer):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, bias: bool = False,
                 *, rng: np.random.Generator, dtype=np.float32):
        self.stride = stride
        self.weight = _uniform_fan_in(
            rng, (out_channels, in_channels, kernel_size, kernel_size),
            in_channels * kernel_size * kernel_size, dtype)
        self.bias = (Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)
                     if bias else None)

    def forward(self, x: Tensor, tape: Optional[GradTape] = None) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, self.stride, tape=tape)


class BatchNorm(Layer):
    buffer_names = ("running_mean", "running_var")

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1,
                 *, dtype=np.float32):
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def forward(self, x: Tensor, mode: str = "train",
                tape: Optional[GradTape] = None) -> Tensor:
        return ops.batch_norm(x, self.gamma, self.beta,
                              self.running_mean, self.running_var,
                              self.eps, self.momentum, mode, tape=tape)


class Linear(Layer):
    def __init__(self, in_features: int, out_features: int, bias: bool = True,
                 *, rng: np.random.Generator, dtype=np.float32):
        self.weight = _uniform_fan_in(
            rng, (out_features, in_features), in_features, dtype)
        self.bias = (Tensor(np.zeros(out_features, dtype=dtype), requires_grad=True)
                     if bias else None)

    def forward(self, x: Tensor, tape: Optional[GradTape] = None) -> Tensor:
        return ops.linear(x, self.weight, self.bias, tape=tape)


class ParamGroup:
    """A labeled slice of a model's parameters, ordered input to output."""

    def __init__(self, label: str, named: list[tuple[str, Tensor]]):
        self.label = label
        self.named = named

    @property
    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named]

    def count(self) -> int:
        return sum(t.size for t in self.tensors)

    def __repr__(self) -> str:
        return f"ParamGroup({self.label!r}, {self.count()} params)"


class Model(Layer):
    """A network with a checkpointable state and labeled parameter groups."""

    def forward(self, x: Tensor, mode: str = "train",
                tape: Optional[GradTape] = None) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Tensor, mode: str = "train",
                 tape: Optional[GradTape] = None) -> Tensor:
        return self.forward(x, mode, tape)

    def parameter_groups(self) -> list[ParamGroup]:
        raise NotImplementedError

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_parameters()}
        for name, buf in self.named_buffers():
            state[name] = buf
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        bufs = dict(self.named_buffers())
        expected = set(own) | set(bufs)
        got = set(state)
        if expected != got:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ShapeError(
                f"state mismatch: missing {missing[:4]}, unexpected {extra[:4]}")
        for name, p in own.items():
            if state[name].shape != p.data.shape:
                raise ShapeError(
                    f"parameter {name}: checkpoint shape {state[name].shape} "
                    f"vs model shape {p.data.shape}")
            p.data = state[name].astype(p.data.dtype, copy=True)
        for name, buf in bufs.items():
            if state[name].shape != buf.shape:
                raise ShapeError(
                    f"buffer {name}: checkpoint shape {state[name].shape} "
                    f"vs model shape {buf.shape}")
            buf[...] = state[name]

    def copy_state(self) -> dict[str, np.ndarray]:
        """Deep snapshot of parameters and buffers."""
        return {name: arr.copy() for name, arr in self.state_dict().items()}

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())
