"""Dense f64 matrix algebra, differentiable layers, Adam, and a finite-difference harness.

All learnable state lives in Parameter objects (2-D float64 value plus an
accumulated gradient of the same shape). Layers keep explicit LIFO caches so a
sequence of forward calls is unwound by backward calls in exact reverse order;
there is no tape. Everything is float64 throughout.
"""

import math
import zlib

import numpy as np

from .errors import DimensionError, NumericError, StateError

Matrix = np.ndarray


def as_matrix(x, name: str = "matrix") -> Matrix:
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def require_finite(m, name: str = "value"):
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{name} contains non-finite entries")
    return m


def matmul(a, b) -> Matrix:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    with np.errstate(invalid="ignore", over="ignore"):
        out = a @ b
    return require_finite(out, "matmul result")


def softmax(v) -> np.ndarray:
    """Stable softmax of a non-empty 1-D vector (max-subtracted)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"softmax needs a non-empty 1-D vector, got shape {v.shape}")
    require_finite(v, "softmax input")
    e = np.exp(v - v.max())
    return e / e.sum()


def softmax_rows(w: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax over the last axis."""
    e = np.exp(w - w.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(x):
    # exp overflow at very negative x still yields the correct limit 0
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def relu(x):
    return np.maximum(x, 0.0)


class Parameter:
    """Named learnable matrix with an accumulated gradient of the same shape."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value):
        self.name = name
        self.value = as_matrix(value, name)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[:] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def init_rng(seed: int, name: str) -> np.random.Generator:
    # crc32 of the name keeps each parameter's stream stable across runs and
    # independent of construction order, so models sharing a parameter name
    # draw bitwise-identical values from the same seed.
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def glorot(name: str, rows: int, cols: int, seed: int) -> Parameter:
    limit = math.sqrt(6.0 / (rows + cols))
    value = init_rng(seed, name).uniform(-limit, limit, size=(rows, cols))
    return Parameter(name, value)


def zeros_param(name: str, rows: int, cols: int) -> Parameter:
    return Parameter(name, np.zeros((rows, cols)))


class AdamState:
    """First/second moment estimates and step counter for one parameter."""

    __slots__ = ("m", "v", "t")

    def __init__(self, shape):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0


def adam_step(params, states, lr=5e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update; grads are left intact for the caller to zero."""
    if len(params) != len(states):
        raise ValueError(f"{len(params)} parameters but {len(states)} optimizer states")
    for p, s in zip(params, states):
        if s.m.shape != p.value.shape:
            raise ValueError(f"optimizer state shape {s.m.shape} does not match {p.name} {p.value.shape}")
        s.t += 1
        g = p.grad
        s.m = beta1 * s.m + (1.0 - beta1) * g
        s.v = beta2 * s.v + (1.0 - beta2) * (g * g)
        m_hat = s.m / (1.0 - beta1 ** s.t)
        v_hat = s.v / (1.0 - beta2 ** s.t)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Linear:
    """Affine map y = x @ w + b with an explicit backward pass."""

    def __init__(self, name: str, n_in: int, n_out: int, seed: int):
        self.w = glorot(name + ".w", n_in, n_out, seed)
        self.b = zeros_param(name + ".b", 1, n_out)
        self._cache = []

    @property
    def params(self):
        return [self.w, self.b]

    def forward(self, x: Matrix, cache: bool = True) -> Matrix:
        if x.shape[1] != self.w.value.shape[0]:
            raise DimensionError(f"input {x.shape} does not match weight {self.w.value.shape}")
        if cache:
            self._cache.append(x)
        return x @ self.w.value + self.b.value

    def backward(self, upstream: Matrix) -> Matrix:
        if not self._cache:
            raise StateError(f"{self.w.name}: backward without a cached forward")
        x = self._cache.pop()
        self.w.grad += x.T @ upstream
        self.b.grad += upstream.sum(axis=0, keepdims=True)
        return upstream @ self.w.value.T


class GRUCell:
    """Gated recurrent cell, sigmoid gates and tanh candidate.

    r = sig(x Wxr + h Whr + br)
    z = sig(x Wxz + h Whz + bz)
    n = tanh(x Wxn + bxn + r * (h Whn + bhn))
    h' = (1 - z) * n + z * h
    """

    def __init__(self, name: str, n_in: int, n_hidden: int, seed: int):
        d = n_hidden
        self.wxr = glorot(name + ".wxr", n_in, d, seed)
        self.whr = glorot(name + ".whr", d, d, seed)
        self.br = zeros_param(name + ".br", 1, d)
        self.wxz = glorot(name + ".wxz", n_in, d, seed)
        self.whz = glorot(name + ".whz", d, d, seed)
        self.bz = zeros_param(name + ".bz", 1, d)
        self.wxn = glorot(name + ".wxn", n_in, d, seed)
        self.bxn = zeros_param(name + ".bxn", 1, d)
        self.whn = glorot(name + ".whn", d, d, seed)
        self.bhn = zeros_param(name + ".bhn", 1, d)
        self.n_in = n_in
        self.n_hidden = d
        self._cache = []

    @property
    def params(self):
        return [self.wxr, self.whr, self.br, self.wxz, self.whz, self.bz,
                self.wxn, self.bxn, self.whn, self.bhn]

    def forward(self, x: Matrix, h: Matrix, cache: bool = True) -> Matrix:
        if x.shape[1] != self.n_in or h.shape[1] != self.n_hidden:
            raise DimensionError(
                f"gru expects input (*, {self.n_in}) and hidden (*, {self.n_hidden}), "
                f"got {x.shape} and {h.shape}")
        r = sigmoid(x @ self.wxr.value + h @ self.whr.value + self.br.value)
        z = sigmoid(x @ self.wxz.value + h @ self.whz.value + self.bz.value)
        g = h @ self.whn.value + self.bhn.value
        n = np.tanh(x @ self.wxn.value + self.bxn.value + r * g)
        h_new = (1.0 - z) * n + z * h
        if cache:
            self._cache.append((x, h, r, z, n, g))
        return h_new

    def backward(self, dh_new: Matrix):
        """Returns (dx, dh_prev); accumulates parameter grads."""
        if not self._cache:
            raise StateError(f"{self.wxr.name}: backward without a cached forward")
        x, h, r, z, n, g = self._cache.pop()
        dn = dh_new * (1.0 - z)
        dz = dh_new * (h - n)
        da_n = dn * (1.0 - n * n)
        dg = da_n * r
        dr = da_n * g
        da_r = dr * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)

        self.wxr.grad += x.T @ da_r
        self.whr.grad += h.T @ da_r
        self.br.grad += da_r.sum(axis=0, keepdims=True)
        self.wxz.grad += x.T @ da_z
        self.whz.grad += h.T @ da_z
        self.bz.grad += da_z.sum(axis=0, keepdims=True)
        self.wxn.grad += x.T @ da_n
        self.bxn.grad += da_n.sum(axis=0, keepdims=True)
        self.whn.grad += h.T @ dg
        self.bhn.grad += dg.sum(axis=0, keepdims=True)

        dx = da_r @ self.wxr.value.T + da_z @ self.wxz.value.T + da_n @ self.wxn.value.T
        dh_prev = (da_r @ self.whr.value.T + da_z @ self.whz.value.T
                   + dg @ self.whn.value.T + dh_new * z)
        return dx, dh_prev


def finite_diff_check(loss_fn, params, h: float = 1e-5) -> float:
    """Max relative error between accumulated analytic grads and central differences.

    loss_fn() re-evaluates the scalar objective from the current parameter
    values; each p.grad must already hold the analytic gradient. Entries are
    perturbed in place by +-h and restored. Relative error per entry is
    |analytic - central| / max(1, |central|).
    """
    worst = 0.0
    for p in params:
        analytic = p.grad.reshape(-1)
        flat = p.value.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = float(loss_fn())
            flat[i] = keep - h
            down = float(loss_fn())
            flat[i] = keep
            if not (math.isfinite(up) and math.isfinite(down)):
                raise NumericError(f"loss not finite while perturbing {p.name}[{i}]")
            central = (up - down) / (2.0 * h)
            err = abs(analytic[i] - central) / max(1.0, abs(central))
            if err > worst:
                worst = err
    return worst


def zero_grads(params):
    for p in params:
        p.zero_grad()
