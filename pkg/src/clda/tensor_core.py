"""Dense float64 tensors with a reverse-mode gradient tape.

The op set is the minimum a small pre-norm transformer classifier needs:
matmul (2-D, stacked-by-2-D, and batched), trailing-axes bias add,
elementwise mul, scalar scale, last-axis softmax, layer norm, exact GELU,
transpose, reshape, full-tensor mean, and elementwise log.

Ops record onto a per-thread tape in execution order, which is already a
topological order of the graph, so ``backward`` is a single reverse sweep.
Recording only happens when at least one input is tracked; forwards through
fully frozen models therefore leave the tape untouched.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

LAYER_NORM_EPS = 1e-5

_INV_SQRT_2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class ShapeError(ValueError):
    """Operand shapes are invalid for the requested op."""


class NumericError(ArithmeticError):
    """Input is outside an op's numeric domain (e.g. log of a non-positive)."""


class Tensor:
    """A dense n-dimensional float64 array, optionally tracked on the tape.

    ``grad`` is lazily allocated by ``backward`` and accumulated additively,
    so a tensor reused in several places receives the sum of its partials.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        # ascontiguousarray promotes 0-d to 1-d, so guard scalars explicitly
        if arr.ndim and not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """Copy of the values with no tape history and no grad tracking."""
        return Tensor(self.data.copy())

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class _TapeEntry:
    __slots__ = ("kind", "inputs", "output", "pull")

    def __init__(self, kind, inputs, output, pull):
        self.kind = kind
        self.inputs = inputs
        self.output = output
        # pull(grad_out, needs) -> per-input grads, None where not needed
        self.pull = pull


class GradTape:
    """Ordered record of tracked ops, consumed once by ``backward``."""

    def __init__(self):
        self.entries: list[_TapeEntry] = []
        self.enabled = True

    def __len__(self) -> int:
        return len(self.entries)

    def clear(self) -> None:
        self.entries.clear()


class _TapeState(threading.local):
    def __init__(self):
        self.tape = GradTape()


_STATE = _TapeState()


def active_tape() -> GradTape:
    """The calling thread's tape. Each thread records independently."""
    return _STATE.tape


@contextlib.contextmanager
def no_grad():
    """Disable tape recording on this thread (eval / analysis forwards)."""
    tape = _STATE.tape
    prev = tape.enabled
    tape.enabled = False
    try:
        yield
    finally:
        tape.enabled = prev


def _record(kind: str, inputs: tuple, out_data: np.ndarray, pull: Callable) -> Tensor:
    out = Tensor(out_data)
    tape = _STATE.tape
    if tape.enabled and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.entries.append(_TapeEntry(kind, inputs, out, pull))
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``grad`` of every tracked leaf.

    The tape was recorded in execution order, so the reversed tape visits
    each node after all of its consumers; one sweep suffices. Entries whose
    outputs never receive a gradient (dead branches) are skipped. The tape
    is cleared on completion.
    """
    if loss.data.ndim != 0:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    tape = _STATE.tape
    if not tape.entries:
        raise RuntimeError("backward: tape is empty (no tracked ops were recorded)")
    try:
        loss._accumulate(np.ones((), dtype=np.float64))
        for entry in reversed(tape.entries):
            g = entry.output.grad
            if g is None:
                continue
            needs = tuple(t.requires_grad for t in entry.inputs)
            grads = entry.pull(g, needs)
            for t, gi in zip(entry.inputs, grads):
                if gi is not None and t.requires_grad:
                    t._accumulate(gi)
    finally:
        tape.clear()


def sgd_step(params: Iterable[Tensor], lr: float) -> None:
    """In-place ``p -= lr * p.grad`` for every param; grads are consumed.

    A parameter with no accumulated gradient is an error: it means the
    caller's loss did not reach it, which is a wiring bug, not a no-op.
    """
    ps = list(params)
    for p in ps:
        if p.grad is None:
            raise ValueError("sgd_step: parameter has no accumulated gradient")
    for p in ps:
        p.data -= lr * p.grad
        p.grad = None


class SGD:
    """Plain SGD with the same step interface as ``Adam``."""

    def __init__(self, params: Iterable[Tensor], lr: float):
        self.params = list(params)
        self.lr = lr

    def step(self) -> None:
        sgd_step(self.params, self.lr)


class Adam:
    """Adam with bias correction. Grads are consumed by each step."""

    def __init__(self, params: Iterable[Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise ValueError("Adam.step: parameter has no accumulated gradient")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.grad = None


# ---------------------------------------------------------------------------
# Ops
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: 2-D @ 2-D, stacked [..., m, k] @ 2-D, or batched with
    identical leading dims. No other broadcasting."""
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise ShapeError(f"matmul: operands must have >= 2 dims, got {a.shape} @ {b.shape}")
    if ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul: inner dims disagree for {a.shape} @ {b.shape}")
    if bd.ndim != 2 and ad.shape[:-2] != bd.shape[:-2]:
        raise ShapeError(f"matmul: leading dims disagree for {a.shape} @ {b.shape}")
    out = ad @ bd

    def pull(g, needs):
        ga = gb = None
        if needs[0]:
            ga = g @ np.swapaxes(bd, -1, -2)
        if needs[1]:
            if bd.ndim == 2:
                k = ad.shape[-1]
                gb = ad.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = np.swapaxes(ad, -1, -2) @ g
        return ga, gb

    return _record("matmul", (a, b), out, pull)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add. ``b`` must have the same shape as ``a`` or a shape
    equal to a trailing suffix of it (bias add); nothing else broadcasts."""
    if a.shape != b.shape:
        lead = len(a.shape) - len(b.shape)
        if lead <= 0 or a.shape[lead:] != b.shape:
            raise ShapeError(
                f"add: shape {b.shape} is neither equal to nor a trailing "
                f"suffix of {a.shape}")
    out = a.data + b.data
    lead_axes = tuple(range(a.data.ndim - b.data.ndim))

    def pull(g, needs):
        ga = g if needs[0] else None
        gb = None
        if needs[1]:
            gb = g.sum(axis=lead_axes) if lead_axes else g
        return ga, gb

    return _record("add", (a, b), out, pull)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; shapes must match exactly."""
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    ad, bd = a.data, b.data
    out = ad * bd

    def pull(g, needs):
        return (g * bd if needs[0] else None,
                g * ad if needs[1] else None)

    return _record("mul", (a, b), out, pull)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a python float constant (not a tracked tensor)."""
    c = float(factor)
    out = a.data * c

    def pull(g, needs):
        return (g * c if needs[0] else None,)

    return _record("scale", (a,), out, pull)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max subtraction."""
    if x.data.ndim == 0:
        raise ShapeError("softmax: input must have at least one axis")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)

    def pull(g, needs):
        if not needs[0]:
            return (None,)
        inner = (g * p).sum(axis=-1, keepdims=True)
        return (p * (g - inner),)

    return _record("softmax", (x,), p, pull)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor,
               eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    if x.data.ndim < 1:
        raise ShapeError("layer_norm: input must have at least one axis")
    feat = x.shape[-1:]
    if gain.shape != feat or bias.shape != feat:
        raise ShapeError(
            f"layer_norm: gain {gain.shape} / bias {bias.shape} must match "
            f"last axis of input {x.shape}")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data
    lead_axes = tuple(range(xd.ndim - 1))
    gd = gain.data

    def pull(g, needs):
        gx = ggain = gbias = None
        if needs[0]:
            dxhat = g * gd
            gx = inv * (dxhat
                        - dxhat.mean(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        if needs[1]:
            ggain = (g * xhat).sum(axis=lead_axes) if lead_axes else g * xhat
        if needs[2]:
            gbias = g.sum(axis=lead_axes) if lead_axes else g.copy()
        return gx, ggain, gbias

    return _record("layer_norm", (x, gain, bias), out, pull)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU: x * Phi(x) with the standard normal CDF via erf."""
    xd = x.data
    phi = 0.5 * (1.0 + erf(xd * _INV_SQRT_2))
    out = xd * phi

    def pull(g, needs):
        if not needs[0]:
            return (None,)
        pdf = np.exp(-0.5 * xd * xd) * _INV_SQRT_2PI
        return (g * (phi + xd * pdf),)

    return _record("gelu", (x,), out, pull)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    """Permute axes; output is materialized contiguously."""
    perm = tuple(int(ax) for ax in axes)
    if sorted(perm) != list(range(x.data.ndim)):
        raise ShapeError(f"transpose: {perm} is not a permutation of axes of {x.shape}")
    out = np.ascontiguousarray(np.transpose(x.data, perm))
    inv = tuple(np.argsort(perm))

    def pull(g, needs):
        if not needs[0]:
            return (None,)
        return (np.ascontiguousarray(np.transpose(g, inv)),)

    return _record("transpose", (x,), out, pull)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Row-major reshape to an explicit shape (no -1 wildcards)."""
    target = tuple(int(s) for s in shape)
    if any(s < 0 for s in target):
        raise ShapeError(f"reshape: negative entry in target shape {target}")
    if int(np.prod(target, dtype=np.int64)) != x.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {target}")
    out = np.ascontiguousarray(x.data.reshape(target))
    src = x.data.shape

    def pull(g, needs):
        if not needs[0]:
            return (None,)
        return (g.reshape(src),)

    return _record("reshape", (x,), out, pull)


def mean(x: Tensor) -> Tensor:
    """Mean over all elements, producing a 0-d tensor."""
    n = x.data.size
    if n == 0:
        raise ShapeError("mean: input has no elements")
    out = x.data.mean()
    src = x.data.shape

    def pull(g, needs):
        if not needs[0]:
            return (None,)
        return (np.full(src, float(g) / n),)

    return _record("mean", (x,), out, pull)


def log(x: Tensor) -> Tensor:
    """Natural log; rejects non-positive inputs instead of emitting inf/nan."""
    xd = x.data
    if not np.all(xd > 0.0):
        raise NumericError("log: input must be strictly positive")
    out = np.log(xd)

    def pull(g, needs):
        if not needs[0]:
            return (None,)
        return (g / xd,)

    return _record("log", (x,), out, pull)


def tsum(x: Tensor) -> Tensor:
    """Sum over all elements, composed from mean and scale."""
    return scale(mean(x), float(x.size))


_OPS: dict[str, Callable[..., Tensor]] = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "softmax": softmax,
    "layer_norm": layer_norm,
    "gelu": gelu,
    "transpose": transpose,
    "reshape": reshape,
    "mean": mean,
    "log": log,
}


def op_kinds() -> tuple[str, ...]:
    return tuple(_OPS)


def op_forward(kind: str, *inputs: Tensor, **params) -> Tensor:
    """Dispatch an op by kind name; shape params go in ``params``."""
    try:
        fn = _OPS[kind]
    except KeyError:
        raise ValueError(f"op_forward: unknown op kind {kind!r}") from None
    return fn(*inputs, **params)
