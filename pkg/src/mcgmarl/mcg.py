"""Meta coordination graph generator.

Soft-selects l typed adjacency layers per output channel, composes them into
channel matrices by chained multiplication (first hop applied first), extracts
the discrete edge set, and produces node representations by one row-normalized
graph convolution per channel:

    z = concat_c sigma(norm(A_M_c) X W)

The engine works on stacked arrays: an adjacency stack of shape (k, n, n)
(static, shared by every sample) or (S, k, n, n) (one per sample), features
(S, n, d). generate/generate_backward are the single-sample views used by the
reference contracts; both routes are property-tested against each other and
against the single-matrix functions in graphs.py.
"""

import numpy as np

from .errors import ConfigError, DimensionError, StateError
from .graphs import AdjacencyTensor, MetaPathConfig, SelectionWeights, extract_edges
from .numerics import Parameter, glorot, relu

ACTIVATIONS = ("relu", "tanh")


class McgOutput:
    """Channels (the per-channel composed A_M), discrete edge set, and features z."""

    __slots__ = ("channels", "edges", "z")

    def __init__(self, channels, edges, z):
        self.channels = channels
        self.edges = edges
        self.z = z


def _swap(m):
    return np.swapaxes(m, -1, -2)


class McgGenerator:
    """Generates o coordination channels and node features from typed adjacency input.

    With bypass set the module is an exact identity on features and the edge
    set is input layer 1 thresholded; no parameters exist in that mode, which
    makes the configuration byte-for-byte identical to a plain coordination
    graph over the static topology.
    """

    def __init__(self, cfg: MetaPathConfig, k: int, d: int, seed: int,
                 bypass: bool = False, activation: str = "relu", name: str = "mcg"):
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}, expected one of {ACTIVATIONS}",
                              key="mcg.activation")
        self.cfg = cfg
        self.k = k
        self.d = d
        self.bypass = bypass
        self.activation = activation
        if bypass:
            self.sel = None
            self.gcn_weight = None
        else:
            self.sel = SelectionWeights(cfg.length, cfg.channels, k, seed, name=name + ".w_phi")
            self.gcn_weight = glorot(name + ".w_gcn", d, d, seed)
        self._cache = []

    @property
    def params(self):
        return [] if self.bypass else [self.sel.w_phi, self.gcn_weight]

    @property
    def out_dim(self) -> int:
        return self.d if self.bypass else self.cfg.channels * self.d

    # ------------------------------------------------------------------ #
    # batched engine

    def forward_batch(self, layers: np.ndarray, x: np.ndarray, cache: bool = True):
        """Run the generator on S samples at once.

        layers: (k, n, n) shared or (S, k, n, n) per sample; x: (S, n, d).
        Returns (z, channels, cache_entry); z is (S, n, o*d), channels
        (o, n, n) when shared else (S, o, n, n). cache_entry is None unless
        requested.
        """
        static = layers.ndim == 3
        s_count, n, d = x.shape
        if layers.shape[-3] != self.k:
            raise DimensionError(f"adjacency stack has {layers.shape[-3]} layers, expected {self.k}")
        if layers.shape[-1] != n or layers.shape[-2] != n:
            raise DimensionError(f"adjacency {layers.shape} does not match features {x.shape}")
        if d != self.d:
            raise DimensionError(f"features have width {d}, expected {self.d}")

        if self.bypass:
            if self.k < 2:
                raise DimensionError("bypass needs at least an identity and one topology layer")
            channels = layers[..., 1:2, :, :]  # single channel = input layer 1
            entry = ("bypass",)
            if cache:
                self._cache.append(entry)
            return x, channels, (entry if cache else None)

        alpha = self.sel.alpha()  # (l, o, k)
        sel_stack = np.einsum("lok,...kij->...loij", alpha, layers)
        mats = np.moveaxis(sel_stack, -4, 0)  # slot-major: mats[i] is (., o, n, n)

        length = self.cfg.length
        suffix = [None] * length  # suffix[i] = M_{i-1} ... M_0, None meaning identity
        acc = None
        for i in range(length):
            suffix[i] = acc
            acc = mats[i] if acc is None else mats[i] @ acc
        p = acc  # composed channels, (., o, n, n)

        tilde = p + np.eye(n)
        deg = tilde.sum(axis=-1, keepdims=True)
        norm = tilde / deg

        b = x @ self.gcn_weight.value  # (S, n, d)
        if static:
            pre = np.einsum("oij,sjd->soid", norm, b)
        else:
            pre = np.einsum("soij,sjd->soid", norm, b)
        h = relu(pre) if self.activation == "relu" else np.tanh(pre)
        z = h.transpose(0, 2, 1, 3).reshape(s_count, n, self.cfg.channels * d)

        entry = None
        if cache:
            entry = {"static": static, "layers": layers, "alpha": alpha, "mats": mats,
                     "suffix": suffix, "norm": norm, "deg": deg, "x": x, "b": b, "h": h}
            self._cache.append(entry)
        return z, p, entry

    def backward_batch(self, entry, dz: np.ndarray) -> np.ndarray:
        """Accumulate grads into w_phi and the convolution weight; return dx."""
        if entry == ("bypass",):
            return dz
        static, layers = entry["static"], entry["layers"]
        norm, deg, x, b, h = entry["norm"], entry["deg"], entry["x"], entry["b"], entry["h"]
        s_count, n, d = x.shape
        o = self.cfg.channels

        dh = dz.reshape(s_count, n, o, d).transpose(0, 2, 1, 3)  # (S, o, n, d)
        if self.activation == "relu":
            dpre = dh * (h > 0.0)
        else:
            dpre = dh * (1.0 - h * h)

        if static:
            db = np.einsum("oij,soid->sjd", norm, dpre)
            dnorm = np.einsum("soid,sjd->oij", dpre, b)
        else:
            db = np.einsum("soij,soid->sjd", norm, dpre)
            dnorm = np.einsum("soid,sjd->soij", dpre, b)

        self.gcn_weight.grad += np.einsum("snd,sne->de", x, db)
        dx = db @ self.gcn_weight.value.T

        dp = (dnorm - (dnorm * norm).sum(axis=-1, keepdims=True)) / deg

        mats, suffix = entry["mats"], entry["suffix"]
        length = self.cfg.length
        dmats = [None] * length
        prefix = None  # M_{l-1} ... M_{i+1}, built from the left
        for i in reversed(range(length)):
            g = dp if prefix is None else _swap(prefix) @ dp
            if suffix[i] is not None:
                g = g @ _swap(suffix[i])
            dmats[i] = g
            prefix = mats[i] if prefix is None else prefix @ mats[i]

        dmats = np.stack(dmats)
        if static:
            dalpha = np.einsum("loij,kij->lok", dmats, layers)
        else:
            dalpha = np.einsum("lsoij,skij->lok", dmats, layers)

        alpha_rows = entry["alpha"].reshape(length * o, self.k)
        d_rows = dalpha.reshape(length * o, self.k)
        self.sel.w_phi.grad += alpha_rows * (d_rows - (alpha_rows * d_rows).sum(axis=1, keepdims=True))
        return dx

    def edges_from_channels(self, channels) -> list:
        """Discrete edge set of one sample's channel stack (o, n, n)."""
        return extract_edges(list(channels), self.cfg.edge_threshold)

    # ------------------------------------------------------------------ #
    # single-sample view

    def generate(self, a: AdjacencyTensor, x: np.ndarray) -> McgOutput:
        if not a.identity_appended:
            raise StateError("adjacency tensor must have the identity appended")
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != a.n:
            raise DimensionError(f"features {x.shape} do not match {a.n} agents")
        z, channels, _ = self.forward_batch(a.stack(), x[None], cache=True)
        if self.bypass:
            chans = [channels[0].copy()] if channels.ndim == 3 else [channels[0, 0].copy()]
            return McgOutput(chans, extract_edges(chans, self.cfg.edge_threshold), x)
        chans = [c.copy() for c in channels]
        return McgOutput(chans, self.edges_from_channels(channels), z[0])

    def generate_backward(self, upstream: np.ndarray) -> np.ndarray:
        if not self._cache:
            raise StateError("generate_backward without a cached generate")
        entry = self._cache.pop()
        return self.backward_batch(entry, np.asarray(upstream, dtype=np.float64)[None])[0]
