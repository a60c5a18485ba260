"""Dense tensors and reverse-mode differentiation.

A :class:`Tensor` wraps a contiguous numpy array plus a ``requires_grad``
flag. Operations (see :mod:`infraclass.ops`) optionally record themselves on
a :class:`GradTape`; walking the tape in reverse replays the chain rule and
accumulates a gradient for every tensor that asked for one.

One training step builds and consumes one tape. Nothing here is shared
between tapes, so independent steps are safe to run on separate threads.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import ShapeError

__all__ = ["Tensor", "GradTape", "backward"]


class Tensor:
    """N-dimensional array with an optional gradient slot.

    ``data`` is always a numpy array (float32 or float64 for anything
    differentiable). ``grad`` is populated by :meth:`GradTape.backward` and
    holds an array of the same shape, or ``None`` before any backward pass.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return (f"Tensor(shape={tuple(self.data.shape)}, dtype={self.data.dtype}, "
                f"requires_grad={self.requires_grad})")


class _TapeNode:
    __slots__ = ("output", "inputs", "grad_fn")

    def __init__(self, output: Tensor, inputs: tuple, grad_fn: Callable):
        self.output = output
        self.inputs = inputs
        self.grad_fn = grad_fn


class GradTape:
    """Ordered record of executed ops, consumed once by :meth:`backward`.

    Ops call :meth:`record` as they execute; the record order is execution
    order, and backward visits it exactly reversed. A tensor feeding k
    recorded ops receives the sum of the k gradient contributions.
    """

    def __init__(self):
        self._nodes: list[_TapeNode] = []
        self._tracked: set[int] = set()

    def __len__(self) -> int:
        return len(self._nodes)

    def is_tracked(self, t: Tensor) -> bool:
        return t.requires_grad or id(t) in self._tracked

    def record(self, output: Tensor, inputs: Sequence[Optional[Tensor]],
               grad_fn: Callable) -> None:
        """Append one op.

        ``grad_fn(grad_out)`` must return one array (or ``None``) per entry
        of ``inputs``, holding d(loss)/d(input) given d(loss)/d(output).
        Recording is skipped when no input is tracked, so tapes stay small
        for pure data preprocessing.
        """
        if not any(inp is not None and self.is_tracked(inp) for inp in inputs):
            return
        self._nodes.append(_TapeNode(output, tuple(inputs), grad_fn))
        self._tracked.add(id(output))

    def backward(self, loss: Tensor, params: Iterable[Tensor] = ()) -> None:
        """Accumulate gradients of a scalar ``loss`` into ``.grad`` slots.

        Every ``requires_grad`` tensor reached from the loss gets a fresh
        ``.grad`` (previous contents are replaced, not accumulated across
        calls). Tensors in ``params`` that did not participate receive an
        all-zero gradient so optimizers can treat the list uniformly.
        """
        if loss.data.size != 1:
            raise ShapeError(
                f"backward requires a scalar loss, got shape {loss.data.shape}")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        if loss.requires_grad:
            leaves[id(loss)] = loss

        for node in reversed(self._nodes):
            gout = grads.pop(id(node.output), None)
            if gout is None:
                continue
            gins = node.grad_fn(gout)
            for inp, gin in zip(node.inputs, gins):
                if inp is None or gin is None or not self.is_tracked(inp):
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gin
                else:
                    grads[key] = gin
                if inp.requires_grad:
                    leaves[key] = inp

        for key, tensor in leaves.items():
            g = grads.get(key)
            if g is not None:
                tensor.grad = np.ascontiguousarray(g)

        for p in params:
            if p.requires_grad and (p.grad is None or id(p) not in leaves):
                p.grad = np.zeros_like(p.data)


def backward(loss: Tensor, tape: GradTape,
             params: Iterable[Tensor] = ()) -> None:
    """Functional alias for :meth:`GradTape.backward`."""
    tape.backward(loss, params)
