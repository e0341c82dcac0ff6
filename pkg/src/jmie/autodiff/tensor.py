"""Dense float64 tensors with reverse-mode gradient tracking.

Ops executed while a Tape is active append result nodes to it in execution
order, which is by construction a topological order of the graph. backward()
walks that list once in reverse, invoking each node's vector-Jacobian closure
and accumulating into parent ``grad`` buffers. Parameter gradients therefore
accumulate across repeated backward calls until explicitly zeroed.

A tape is single-threaded; concurrent tapes must operate on disjoint
parameter copies.
"""

from __future__ import annotations

import threading

import numpy as np


class ShapeMismatch(ValueError):
    pass


class NonFiniteValue(ArithmeticError):
    pass


class NonScalarLoss(ValueError):
    pass


_state = threading.local()

_debug_checks = False


def set_debug_checks(enabled: bool) -> None:
    """Enable NaN/Inf detection after every primitive forward."""
    global _debug_checks
    _debug_checks = enabled


def debug_checks_enabled() -> bool:
    return _debug_checks


def active_tape():
    return getattr(_state, "tape", None)


class Tape:
    """Recording of one forward computation, in topological (execution) order."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self._prev = None

    def __enter__(self) -> "Tape":
        self._prev = getattr(_state, "tape", None)
        _state.tape = self
        return self

    def __exit__(self, *exc):
        _state.tape = self._prev
        self._prev = None
        return False

    def record(self, node: "Tensor") -> None:
        node.node_id = len(self.nodes)
        node.tape = self
        self.nodes.append(node)


class Tensor:
    """A dense float64 array plus optional gradient buffer and graph linkage."""

    __slots__ = ("data", "grad", "requires_grad", "name", "node_id", "tape", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self.node_id: int | None = None
        self.tape: Tape | None = None
        self._backward = None
        self._parents: tuple = ()

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def record_op(out_data: np.ndarray, parents: tuple, backward_fn) -> Tensor:
    """Wrap an op result; registers it on the active tape when grads are needed."""
    if _debug_checks and not np.all(np.isfinite(out_data)):
        raise NonFiniteValue("non-finite value produced by a primitive op")
    tape = active_tape()
    needs_grad = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=needs_grad)
    if needs_grad:
        out._parents = parents
        out._backward = backward_fn
        tape.record(out)
    return out


def backward(loss: Tensor) -> None:
    """Populate ∂loss/∂t in ``t.grad`` for every tensor the loss depends on."""
    if loss.data.shape != ():
        raise NonScalarLoss(f"loss must be a scalar, got shape {loss.data.shape}")
    tape = loss.tape
    if tape is None:
        if loss.requires_grad:
            raise RuntimeError("loss was not recorded on a tape")
        return  # constant loss: nothing depends on parameters
    loss.accumulate_grad(np.ones((), dtype=np.float64))
    for node in reversed(tape.nodes[: loss.node_id + 1]):
        if node.grad is None or node._backward is None:
            continue
        node._backward(node.grad)
        # Intermediate grads are consumed here; only leaf (parameter) grads
        # persist, which is what makes repeated backward calls additive.
        node.grad = None
