"""Dense float64 tensors with reverse-mode automatic differentiation.

The graph is recorded implicitly: every op gives its output a monotonically
increasing creation index, so reverse insertion order is a valid topological
order for the backward sweep. Ops support only the broadcasting the loss code
actually needs (scalar-vs-tensor and equal shapes) to avoid silent shape bugs.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, GraphStateError

_COUNTER = 0

# When False, ops skip recording backward closures (inference mode).
_GRAD_ENABLED = True


class no_grad:
    """Context manager disabling graph recording for cheap inference."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def _next_index() -> int:
    global _COUNTER
    _COUNTER += 1
    return _COUNTER


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn",
                 "_index", "_backward_done")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None
        self._index = _next_index()
        self._backward_done = False

    # -- basic introspection ------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None
        self._backward_done = False

    # -- operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return mul(self, -1.0)

    # -- backward -----------------------------------------------------------
    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every requires_grad leaf."""
        if self.size != 1:
            raise DimensionError(
                f"backward root must be a scalar, got shape {self.shape}")
        if self._backward_done:
            raise GraphStateError(
                "backward already ran from this root; reset grads and rebuild "
                "the graph before calling it again")
        self._backward_done = True

        nodes = _reachable(self)
        nodes.sort(key=lambda t: t._index, reverse=True)
        self.grad = np.ones_like(self.data)
        for node in nodes:
            if node._backward_fn is None or node.grad is None:
                continue
            node._backward_fn(node.grad)


def _reachable(root: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    out: list[Tensor] = []
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        out.append(node)
        stack.extend(node._parents)
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED:
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _check_binary_shapes(a: Tensor, b: Tensor, opname: str) -> None:
    if a.shape == b.shape or a.size == 1 or b.size == 1:
        return
    raise DimensionError(
        f"{opname}: shapes {a.shape} and {b.shape} are neither equal nor "
        f"scalar-broadcastable")


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape) if shape else np.array(np.sum(g))


# -- elementwise binary ------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary_shapes(a, b, "add")

    def backward(g):
        _accumulate(a, _reduce_to(g, a.shape))
        _accumulate(b, _reduce_to(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary_shapes(a, b, "sub")

    def backward(g):
        _accumulate(a, _reduce_to(g, a.shape))
        _accumulate(b, _reduce_to(-g, b.shape))

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary_shapes(a, b, "mul")

    def backward(g):
        _accumulate(a, _reduce_to(g * b.data, a.shape))
        _accumulate(b, _reduce_to(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary_shapes(a, b, "div")
    if np.any(b.data == 0.0):
        raise DomainError("div: divisor contains zeros")

    def backward(g):
        _accumulate(a, _reduce_to(g / b.data, a.shape))
        _accumulate(b, _reduce_to(-g * a.data / (b.data ** 2), b.shape))

    return _make(a.data / b.data, (a, b), backward)


# -- elementwise unary -------------------------------------------------------

def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    y = np.where(x.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(x.data))),
                 np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))))

    def backward(g):
        _accumulate(x, g * y * (1.0 - y))

    return _make(y, (x,), backward)


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    y = np.tanh(x.data)

    def backward(g):
        _accumulate(x, g * (1.0 - y * y))

    return _make(y, (x,), backward)


def relu(x) -> Tensor:
    x = _as_tensor(x)
    mask = x.data > 0

    def backward(g):
        _accumulate(x, g * mask)

    return _make(np.where(mask, x.data, 0.0), (x,), backward)


def exp(x) -> Tensor:
    x = _as_tensor(x)
    y = np.exp(x.data)

    def backward(g):
        _accumulate(x, g * y)

    return _make(y, (x,), backward)


def log(x) -> Tensor:
    x = _as_tensor(x)
    if np.any(x.data <= 0.0):
        raise DomainError("log: argument must be strictly positive")

    def backward(g):
        _accumulate(x, g / x.data)

    return _make(np.log(x.data), (x,), backward)


def softplus(x) -> Tensor:
    x = _as_tensor(x)
    y = np.logaddexp(0.0, x.data)

    def backward(g):
        s = np.where(x.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(x.data))),
                     np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))))
        _accumulate(x, g * s)

    return _make(y, (x,), backward)


def square(x) -> Tensor:
    x = _as_tensor(x)

    def backward(g):
        _accumulate(x, g * 2.0 * x.data)

    return _make(x.data ** 2, (x,), backward)


def absval(x) -> Tensor:
    x = _as_tensor(x)

    def backward(g):
        _accumulate(x, g * np.sign(x.data))

    return _make(np.abs(x.data), (x,), backward)


# -- reductions and reshaping ------------------------------------------------

def tsum(x, axes: int | tuple[int, ...] | None = None) -> Tensor:
    x = _as_tensor(x)
    axes_t = _norm_axes(axes, x.data.ndim)
    y = np.sum(x.data, axis=axes_t)

    def backward(g):
        ge = np.asarray(g)
        if axes_t is not None:
            for ax in sorted(axes_t):
                ge = np.expand_dims(ge, ax)
        _accumulate(x, np.broadcast_to(ge, x.shape).copy())

    return _make(np.asarray(y), (x,), backward)


def tmean(x, axes: int | tuple[int, ...] | None = None) -> Tensor:
    x = _as_tensor(x)
    axes_t = _norm_axes(axes, x.data.ndim)
    if axes_t is None:
        count = x.size
    else:
        count = int(np.prod([x.shape[a] for a in axes_t]))
    return mul(tsum(x, axes), 1.0 / count)


def _norm_axes(axes, ndim) -> tuple[int, ...] | None:
    if axes is None:
        return None
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(a % ndim for a in axes)


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = _as_tensor(x)
    old_shape = x.shape

    def backward(g):
        _accumulate(x, np.asarray(g).reshape(old_shape))

    return _make(x.data.reshape(tuple(shape)), (x,), backward)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    parts = [_as_tensor(t) for t in tensors]
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * np.asarray(g).ndim
            sl[axis] = slice(lo, hi)
            _accumulate(part, np.asarray(g)[tuple(sl)])

    return _make(np.concatenate([p.data for p in parts], axis=axis),
                 parts, backward)


def stack(tensors: Iterable[Tensor]) -> Tensor:
    """Stack same-shape tensors along a new leading axis."""
    parts = [_as_tensor(t) for t in tensors]

    def backward(g):
        for i, part in enumerate(parts):
            _accumulate(part, np.asarray(g)[i])

    return _make(np.stack([p.data for p in parts], axis=0), parts, backward)


def take_index(x, index: int, axis: int = 0) -> Tensor:
    """Select one slice along an axis, dropping that axis."""
    x = _as_tensor(x)
    sl = [slice(None)] * x.data.ndim
    sl[axis] = index
    sl_t = tuple(sl)

    def backward(g):
        full = np.zeros_like(x.data)
        full[sl_t] = g
        _accumulate(x, full)

    return _make(x.data[sl_t].copy(), (x,), backward)


def take_channel(x, index: int) -> Tensor:
    """Select one channel from an (H, W, C) tensor, yielding (H, W)."""
    x = _as_tensor(x)

    def backward(g):
        full = np.zeros_like(x.data)
        full[..., index] = g
        _accumulate(x, full)

    return _make(x.data[..., index].copy(), (x,), backward)


# -- convolution -------------------------------------------------------------

def conv2d_same(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """Same-padded stride-1 convolution of (H, W, Cin) with (k, k, Cin, Cout)."""
    x, kernel, bias = _as_tensor(x), _as_tensor(kernel), _as_tensor(bias)
    if x.data.ndim != 3:
        raise DimensionError(f"conv2d_same: input must be (H, W, Cin), got {x.shape}")
    if kernel.data.ndim != 4:
        raise DimensionError(
            f"conv2d_same: kernel must be (k, k, Cin, Cout), got {kernel.shape}")
    kh, kw, cin, cout = kernel.shape
    if kh != kw or kh % 2 == 0:
        raise DimensionError(f"conv2d_same: kernel must be odd square, got {kh}x{kw}")
    if x.shape[2] != cin:
        raise DimensionError(
            f"conv2d_same: input channel axis is {x.shape[2]}, kernel expects {cin}")
    if bias.shape != (cout,):
        raise DimensionError(
            f"conv2d_same: bias axis must be ({cout},), got {bias.shape}")

    h, w, _ = x.shape
    pad = kh // 2
    xp = np.pad(x.data, ((pad, pad), (pad, pad), (0, 0)))
    # im2col: one (H*W, k*k*Cin) patch matrix and a single matmul
    def im2col(padded):
        win = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw),
                                                       axis=(0, 1))
        return np.ascontiguousarray(win.transpose(0, 1, 3, 4, 2)).reshape(
            h * w, kh * kw * cin)

    wmat = kernel.data.reshape(kh * kw * cin, cout)
    out = (im2col(xp) @ wmat + bias.data).reshape(h, w, cout)

    def backward(g):
        g = np.asarray(g)
        gflat = g.reshape(h * w, cout)
        # rebuild the patch matrix rather than retaining it across the whole
        # graph: keeping one per conv costs hundreds of MB on deep unrolls
        _accumulate(kernel, (im2col(xp).T @ gflat).reshape(kernel.shape))
        gpatch = (gflat @ wmat.T).reshape(h, w, kh, kw, cin)
        gxp = np.zeros_like(xp)
        for di in range(kh):
            for dj in range(kw):
                gxp[di:di + h, dj:dj + w, :] += gpatch[:, :, di, dj, :]
        _accumulate(x, gxp[pad:pad + h, pad:pad + w, :])
        _accumulate(bias, g.sum(axis=(0, 1)))

    return _make(out, (x, kernel, bias), backward)


# -- fused ConvLSTM gate ops -------------------------------------------------
#
# A naive per-gate composition of concat/conv/sigmoid nodes makes the
# unrolled recurrence graph large enough that allocation churn dominates the
# matmuls. These two composite ops keep the gate algebra in closed form: one
# produces the cell state from the input/forget gates and candidate, the
# other produces the hidden state from the output gate.

def _im2col3(padded: np.ndarray, k: int, h: int, w: int) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(0, 1))
    return np.ascontiguousarray(win.transpose(0, 1, 3, 4, 2)).reshape(
        h * w, k * k * padded.shape[2])


def _col2im3(gpatch: np.ndarray, k: int, h: int, w: int, c: int) -> np.ndarray:
    """Scatter-add (H*W, k*k*C) patch gradients back to the padded image."""
    pad = k // 2
    gxp = np.zeros((h + 2 * pad, w + 2 * pad, c))
    gp = gpatch.reshape(h, w, k, k, c)
    for di in range(k):
        for dj in range(k):
            gxp[di:di + h, dj:dj + w, :] += gp[:, :, di, dj, :]
    return gxp[pad:pad + h, pad:pad + w, :]


def _sigmoid_np(v: np.ndarray) -> np.ndarray:
    return np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                    np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))


def convlstm_gates(x: Tensor, h_prev: Tensor, c_prev: Tensor,
                   w_i: Tensor, w_f: Tensor, w_g: Tensor,
                   b_i: Tensor, b_f: Tensor, b_g: Tensor) -> Tensor:
    """c_t = sigmoid(W_i[x;h;c] + b_i) * tanh(W_g[x;h] + b_g)
           + sigmoid(W_f[x;h;c] + b_f) * c_prev, fused into one graph node.

    All three gate convolutions run as a single matmul against one im2col
    patch matrix; W_g is zero-extended over the cell-state channels it does
    not see, which keeps its gradient exactly zero there.
    """
    x, h_prev, c_prev = _as_tensor(x), _as_tensor(h_prev), _as_tensor(c_prev)
    w_i, w_f, w_g = _as_tensor(w_i), _as_tensor(w_f), _as_tensor(w_g)
    b_i, b_f, b_g = _as_tensor(b_i), _as_tensor(b_f), _as_tensor(b_g)

    h, w, cx = x.shape
    ch = h_prev.shape[2]
    if h_prev.shape[:2] != (h, w) or c_prev.shape != h_prev.shape:
        raise DimensionError(
            f"state dims {h_prev.shape}/{c_prev.shape} do not match input "
            f"spatial dims {(h, w)}")
    k = w_i.shape[0]
    cz = cx + 2 * ch
    if w_i.shape != (k, k, cz, ch) or w_f.shape != w_i.shape:
        raise DimensionError(
            f"input/forget kernels must be (k, k, {cz}, {ch}), "
            f"got {w_i.shape} and {w_f.shape}")
    if w_g.shape != (k, k, cx + ch, ch):
        raise DimensionError(
            f"candidate kernel must be (k, k, {cx + ch}, {ch}), got {w_g.shape}")

    pad = k // 2
    z = np.concatenate([x.data, h_prev.data, c_prev.data], axis=2)
    zp = np.pad(z, ((pad, pad), (pad, pad), (0, 0)))

    wg_pad = np.zeros((k, k, cz, ch))
    wg_pad[:, :, :cx + ch, :] = w_g.data
    wall = np.concatenate([w_i.data.reshape(-1, ch),
                           w_f.data.reshape(-1, ch),
                           wg_pad.reshape(-1, ch)], axis=1)
    pre = _im2col3(zp, k, h, w) @ wall + np.concatenate(
        [b_i.data, b_f.data, b_g.data])
    gate_i = _sigmoid_np(pre[:, :ch]).reshape(h, w, ch)
    gate_f = _sigmoid_np(pre[:, ch:2 * ch]).reshape(h, w, ch)
    gate_g = np.tanh(pre[:, 2 * ch:]).reshape(h, w, ch)
    c_t = gate_f * c_prev.data + gate_i * gate_g

    def backward(gc):
        gc = np.asarray(gc)
        gpre = np.concatenate(
            [(gc * gate_g * gate_i * (1.0 - gate_i)).reshape(h * w, ch),
             (gc * c_prev.data * gate_f * (1.0 - gate_f)).reshape(h * w, ch),
             (gc * gate_i * (1.0 - gate_g ** 2)).reshape(h * w, ch)], axis=1)

        # the patch matrix is rebuilt here: retaining one per unrolled step
        # costs hundreds of MB and the allocator churn dominates runtime
        patch = _im2col3(zp, k, h, w)
        gwall = patch.T @ gpre
        _accumulate(w_i, gwall[:, :ch].reshape(w_i.shape))
        _accumulate(w_f, gwall[:, ch:2 * ch].reshape(w_f.shape))
        _accumulate(w_g, gwall[:, 2 * ch:].reshape(
            k, k, cz, ch)[:, :, :cx + ch, :])
        _accumulate(b_i, gpre[:, :ch].sum(axis=0))
        _accumulate(b_f, gpre[:, ch:2 * ch].sum(axis=0))
        _accumulate(b_g, gpre[:, 2 * ch:].sum(axis=0))

        gz = _col2im3(gpre @ wall.T, k, h, w, cz)
        _accumulate(x, gz[:, :, :cx])
        _accumulate(h_prev, gz[:, :, cx:cx + ch])
        _accumulate(c_prev, gz[:, :, cx + ch:] + gc * gate_f)

    return _make(c_t, (x, h_prev, c_prev, w_i, w_f, w_g, b_i, b_f, b_g),
                 backward)


def convlstm_output(x: Tensor, h_prev: Tensor, c_t: Tensor,
                    w_o: Tensor, b_o: Tensor) -> Tensor:
    """h_t = sigmoid(W_o[x;h;c_t] + b_o) * tanh(c_t), fused."""
    x, h_prev, c_t = _as_tensor(x), _as_tensor(h_prev), _as_tensor(c_t)
    w_o, b_o = _as_tensor(w_o), _as_tensor(b_o)

    h, w, cx = x.shape
    ch = c_t.shape[2]
    if h_prev.shape != c_t.shape or c_t.shape[:2] != (h, w):
        raise DimensionError(
            f"state dims {h_prev.shape}/{c_t.shape} do not match input "
            f"spatial dims {(h, w)}")
    k = w_o.shape[0]
    if w_o.shape != (k, k, cx + 2 * ch, ch):
        raise DimensionError(
            f"output kernel must be (k, k, {cx + 2 * ch}, {ch}), got {w_o.shape}")

    pad = k // 2
    z = np.concatenate([x.data, h_prev.data, c_t.data], axis=2)
    zp = np.pad(z, ((pad, pad), (pad, pad), (0, 0)))
    wmat = w_o.data.reshape(-1, ch)
    gate_o = _sigmoid_np(_im2col3(zp, k, h, w) @ wmat
                         + b_o.data).reshape(h, w, ch)
    tc = np.tanh(c_t.data)
    h_t = gate_o * tc

    def backward(gh):
        gh = np.asarray(gh)
        go_pre = (gh * tc * gate_o * (1.0 - gate_o)).reshape(h * w, ch)
        patch = _im2col3(zp, k, h, w)
        _accumulate(w_o, (patch.T @ go_pre).reshape(w_o.shape))
        _accumulate(b_o, go_pre.sum(axis=0))
        gz = _col2im3(go_pre @ wmat.T, k, h, w, cx + 2 * ch)
        _accumulate(x, gz[:, :, :cx])
        _accumulate(h_prev, gz[:, :, cx:cx + ch])
        _accumulate(c_t, gz[:, :, cx + ch:] + gh * gate_o * (1.0 - tc ** 2))

    return _make(h_t, (x, h_prev, c_t, w_o, b_o), backward)


# -- channel-wise affine and batch norm --------------------------------------

def channel_affine(x: Tensor, a: Tensor, b: Tensor) -> Tensor:
    """y = x * a + b with (C,) factors broadcast over the last axis of x."""
    x, a, b = _as_tensor(x), _as_tensor(a), _as_tensor(b)
    c = x.shape[-1]
    if a.shape != (c,) or b.shape != (c,):
        raise DimensionError(
            f"channel_affine: expected (C,) = ({c},) factors, got {a.shape}, {b.shape}")

    def backward(g):
        g = np.asarray(g)
        red = tuple(range(g.ndim - 1))
        _accumulate(x, g * a.data)
        _accumulate(a, np.sum(g * x.data, axis=red))
        _accumulate(b, np.sum(g, axis=red))

    return _make(x.data * a.data + b.data, (x, a, b), backward)


def batch_norm_train(x: Tensor, gamma: Tensor, beta: Tensor,
                     eps: float = 1e-5) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Per-channel batch norm over all leading axes of an (..., C) tensor.

    Returns the normalized tensor plus the batch mean/var used, so the caller
    can fold them into running statistics.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    red = tuple(range(x.data.ndim - 1))
    n = int(np.prod([x.shape[a] for a in red])) if red else 1
    mean = x.data.mean(axis=red)
    var = x.data.var(axis=red)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    y = gamma.data * xhat + beta.data

    def backward(g):
        g = np.asarray(g)
        gxhat = g * gamma.data
        m1 = gxhat.mean(axis=red)
        m2 = (gxhat * xhat).mean(axis=red)
        _accumulate(x, inv * (gxhat - m1 - xhat * m2))
        _accumulate(gamma, np.sum(g * xhat, axis=red))
        _accumulate(beta, np.sum(g, axis=red))

    return _make(y, (x, gamma, beta), backward), mean, var


# -- optimizer ---------------------------------------------------------------

class Adam:
    """Adam with the canonical constants (0.9, 0.999, 1e-8)."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 lr_scales: Sequence[float | np.ndarray] | None = None):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params = list(params)
        if lr_scales is None:
            self.lr_scales = [1.0] * len(self.params)
        else:
            self.lr_scales = list(lr_scales)
            if len(self.lr_scales) != len(self.params):
                raise ValueError("one lr scale per parameter required")
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            if not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(
                    f"non-finite gradient in parameter {i} (shape {p.shape})")
            self.m[i] = b1 * self.m[i] + (1 - b1) * p.grad
            self.v[i] = b2 * self.v[i] + (1 - b2) * p.grad ** 2
            mhat = self.m[i] / (1 - b1 ** self.t)
            vhat = self.v[i] / (1 - b2 ** self.t)
            p.data -= self.lr * self.lr_scales[i] * mhat / (np.sqrt(vhat) + self.eps)
