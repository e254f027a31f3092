"""Dense tensors with reverse-mode automatic differentiation.

Define-by-run: every op records its parents and a closure that scatters the
output gradient back to them; backward() walks the graph in reverse
topological order. Arrays keep whatever float dtype they were built with
(float32 in training, float64 in gradient-check tests).
"""

from __future__ import annotations

import numpy as np


class ShapeMismatch(ValueError):
    pass


def _check(cond: bool, msg: str):
    if not cond:
        raise ShapeMismatch(msg)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    # -- basic protocol ----------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, seed: np.ndarray | None = None):
        """Populate .grad on every requires_grad ancestor of this tensor."""
        if not self.requires_grad:
            raise RuntimeError("backward() on a tensor that requires no grad")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        if seed is None:
            _check(self.size == 1, f"implicit backward needs a scalar, got {self.shape}")
            seed = np.ones_like(self.data)
        self._accumulate(np.asarray(seed, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(as_tensor(other), mul(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return narrow(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back down to a broadcast operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- arithmetic ---------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return Tensor(out_data, _parents=(a, b), _backward=bwd)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return Tensor(out_data, _parents=(a, b), _backward=bwd)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check(a.ndim == 2 and b.ndim == 2, f"matmul wants 2-d operands, got {a.shape} @ {b.shape}")
    _check(a.shape[1] == b.shape[0], f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return Tensor(out_data, _parents=(a, b), _backward=bwd)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    out_data = np.where(mask, x.data, 0.0).astype(x.data.dtype)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * mask)

    return Tensor(out_data, _parents=(x,), _backward=bwd)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * (1.0 - t * t))

    return Tensor(t, _parents=(x,), _backward=bwd)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = 1.0 / (1.0 + np.exp(-x.data))

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * s * (1.0 - s))

    return Tensor(s.astype(x.data.dtype), _parents=(x,), _backward=bwd)


def exp(x) -> Tensor:
    x = as_tensor(x)
    e = np.exp(x.data)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * e)

    return Tensor(e, _parents=(x,), _backward=bwd)


def log(x) -> Tensor:
    x = as_tensor(x)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g / x.data)

    return Tensor(np.log(x.data), _parents=(x,), _backward=bwd)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        if x.requires_grad:
            dot = (g * s).sum(axis=axis, keepdims=True)
            x._accumulate(s * (g - dot))

    return Tensor(s.astype(x.data.dtype), _parents=(x,), _backward=bwd)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    s = np.exp(out)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g - s * g.sum(axis=axis, keepdims=True))

    return Tensor(out.astype(x.data.dtype), _parents=(x,), _backward=bwd)


def sum_(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if not x.requires_grad:
            return
        if axis is None:
            x._accumulate(np.broadcast_to(g, x.shape).copy()
                          if np.ndim(g) else np.full(x.shape, g, dtype=x.data.dtype))
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            x._accumulate(np.broadcast_to(gg, x.shape).astype(x.data.dtype))

    return Tensor(np.asarray(out_data, dtype=x.data.dtype), _parents=(x,), _backward=bwd)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / float(count))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return Tensor(out_data, _parents=tuple(tensors), _backward=bwd)


def narrow(x, idx) -> Tensor:
    """Basic slicing with gradient scatter (used for gate splits etc.)."""
    x = as_tensor(x)
    out_data = x.data[idx]

    def bwd(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            np.add.at(full, idx, g)
            x._accumulate(full)

    return Tensor(out_data, _parents=(x,), _backward=bwd)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out_data = x.data.reshape(shape)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g.reshape(x.shape))

    return Tensor(out_data, _parents=(x,), _backward=bwd)


def transpose2d(x) -> Tensor:
    x = as_tensor(x)
    _check(x.ndim == 2, f"transpose2d wants a matrix, got {x.shape}")

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g.T)

    return Tensor(x.data.T.copy(), _parents=(x,), _backward=bwd)


def minimum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    out_data = np.where(take_a, a.data, b.data)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * take_a, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~take_a, b.shape))

    return Tensor(out_data, _parents=(a, b), _backward=bwd)


def clip(x, lo: float, hi: float) -> Tensor:
    x = as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    out_data = np.clip(x.data, lo, hi)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * inside)

    return Tensor(out_data, _parents=(x,), _backward=bwd)


def gather_last(x, index: np.ndarray) -> Tensor:
    """Pick one entry per row along the last axis (log-prob lookup)."""
    x = as_tensor(x)
    _check(x.ndim == 2, f"gather_last wants (N, K), got {x.shape}")
    idx = np.asarray(index, dtype=np.int64)
    rows = np.arange(x.shape[0])
    out_data = x.data[rows, idx]

    def bwd(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[rows, idx] = g
            x._accumulate(full)

    return Tensor(out_data, _parents=(x,), _backward=bwd)


def cosine_similarity(a, b, axis: int = -1, eps: float = 1e-8) -> Tensor:
    """cos(a, b) along an axis with epsilon-guarded norms."""
    a, b = as_tensor(a), as_tensor(b)
    dot = sum_(mul(a, b), axis=axis)
    na = sqrt(add(sum_(mul(a, a), axis=axis), eps * eps))
    nb = sqrt(add(sum_(mul(b, b), axis=axis), eps * eps))
    return mul(dot, reciprocal(mul(na, nb)))


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    s = np.sqrt(x.data)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * 0.5 / s)

    return Tensor(s, _parents=(x,), _backward=bwd)


def reciprocal(x) -> Tensor:
    x = as_tensor(x)
    r = 1.0 / x.data

    def bwd(g):
        if x.requires_grad:
            x._accumulate(-g * r * r)

    return Tensor(r, _parents=(x,), _backward=bwd)


# -- convolution --------------------------------------------------------------

_IM2COL_CHUNK = 24_000_000  # elements; caps scratch memory on large batches


def _im2col(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (x.shape[2] - k) // stride + 1
    ow = (x.shape[3] - k) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]             # (n, c, oh, ow, k, k)
    col = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * k * k)
    return np.ascontiguousarray(col), oh, ow


def conv2d(x, weight, bias=None, stride: int = 1, pad: int = 0) -> Tensor:
    """2-d convolution, NCHW layout, square kernel. im2col + GEMM forward;
    backward scatters through the same patch mapping chunk by chunk."""
    x, weight = as_tensor(x), as_tensor(weight)
    _check(x.ndim == 4, f"conv2d input must be NCHW, got {x.shape}")
    _check(weight.ndim == 4, f"conv2d weight must be OIKK, got {weight.shape}")
    n, c, h, w = x.shape
    co, ci, k, k2 = weight.shape
    _check(k == k2 and ci == c, f"conv2d weight {weight.shape} mismatches input {x.shape}")
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    wmat = weight.data.reshape(co, ci * k * k)

    chunk = max(1, _IM2COL_CHUNK // max(1, oh * ow * ci * k * k))
    out_data = np.empty((n, co, oh, ow), dtype=x.data.dtype)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        col, _, _ = _im2col(x.data[lo:hi], k, stride, pad)
        y = col @ wmat.T.astype(x.data.dtype)
        out_data[lo:hi] = y.reshape(hi - lo, oh, ow, co).transpose(0, 3, 1, 2)
    if bias is not None:
        bias = as_tensor(bias)
        _check(bias.shape == (co,), f"conv2d bias shape {bias.shape} != ({co},)")
        out_data += bias.data.reshape(1, co, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def bwd(g):
        gmat_dtype = x.data.dtype
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2, 3)))
        need_x = x.requires_grad
        need_w = weight.requires_grad
        if not (need_x or need_w):
            return
        gw = np.zeros((co, ci * k * k), dtype=gmat_dtype) if need_w else None
        gx = np.zeros_like(x.data) if need_x else None
        for lo in range(0, n, chunk):
            hi = min(n, lo + chunk)
            gcol_out = g[lo:hi].transpose(0, 2, 3, 1).reshape(-1, co)
            if need_w:
                col, _, _ = _im2col(x.data[lo:hi], k, stride, pad)
                gw += gcol_out.T @ col
            if need_x:
                gcol_in = gcol_out @ wmat.astype(gmat_dtype)   # ((hi-lo)*oh*ow, ci*k*k)
                gcol_in = gcol_in.reshape(hi - lo, oh, ow, ci, k, k)
                _col2im_add(gx[lo:hi], gcol_in, k, stride, pad)
        if need_w:
            weight._accumulate(gw.reshape(weight.shape))
        if need_x:
            x._accumulate(gx)

    return Tensor(out_data, _parents=parents, _backward=bwd)


def _col2im_add(gx: np.ndarray, gcol: np.ndarray, k: int, stride: int, pad: int):
    """Scatter patch gradients back onto the (unpadded) input gradient."""
    n, c, h, w = gx.shape
    oh, ow = gcol.shape[1], gcol.shape[2]
    buf = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=gx.dtype)
    for ki in range(k):
        for kj in range(k):
            buf[:, :, ki:ki + oh * stride:stride, kj:kj + ow * stride:stride] += \
                gcol[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
    if pad:
        gx += buf[:, :, pad:-pad, pad:-pad]
    else:
        gx += buf


# -- normalization -------------------------------------------------------------

def instance_norm2d(x, gain, shift, eps: float = 1e-5) -> Tensor:
    """Normalize each (sample, channel) plane by its own spatial statistics;
    no cross-batch state, so rollout and update behavior match exactly."""
    x, gain, shift = as_tensor(x), as_tensor(gain), as_tensor(shift)
    _check(x.ndim == 4, f"instance_norm2d wants NCHW, got {x.shape}")
    c = x.shape[1]
    _check(gain.shape == (c,) and shift.shape == (c,),
           f"norm params want shape ({c},), got {gain.shape}/{shift.shape}")
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=(2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data.reshape(1, c, 1, 1) + shift.data.reshape(1, c, 1, 1)

    def bwd(g):
        if shift.requires_grad:
            shift._accumulate(g.sum(axis=(0, 2, 3)))
        if gain.requires_grad:
            gain._accumulate((g * xhat).sum(axis=(0, 2, 3)))
        if x.requires_grad:
            m = x.shape[2] * x.shape[3]
            gy = g * gain.data.reshape(1, c, 1, 1)
            t1 = gy.sum(axis=(2, 3), keepdims=True)
            t2 = (gy * xhat).sum(axis=(2, 3), keepdims=True)
            x._accumulate(inv * (gy - t1 / m - xhat * t2 / m))

    return Tensor(out_data.astype(x.data.dtype), _parents=(x, gain, shift), _backward=bwd)


def layer_norm(x, gain, shift, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis with learned per-feature gain/shift."""
    x, gain, shift = as_tensor(x), as_tensor(gain), as_tensor(shift)
    d = x.shape[-1]
    _check(gain.shape == (d,) and shift.shape == (d,),
           f"norm params want shape ({d},), got {gain.shape}/{shift.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + shift.data

    def bwd(g):
        if shift.requires_grad:
            shift._accumulate(g.reshape(-1, d).sum(axis=0))
        if gain.requires_grad:
            gain._accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gy = g * gain.data
            t1 = gy.mean(axis=-1, keepdims=True)
            t2 = (gy * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (gy - t1 - xhat * t2))

    return Tensor(out_data.astype(x.data.dtype), _parents=(x, gain, shift), _backward=bwd)
