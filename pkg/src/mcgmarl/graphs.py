"""Typed interaction graphs over agents.

Adjacency layers follow the convention that entry [i][j] != 0 means an edge
from agent j to agent i. Soft selection and meta-path composition have
analytic backward companions; the batched equivalents used by the training
engine (mcg.py) are property-tested against these reference functions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, StateError
from .numerics import glorot, softmax_rows

TOPOLOGY_KINDS = ("full", "cycle", "line", "star", "identity")


@dataclass
class MetaPathConfig:
    """Meta-path sizes: composition length l, output channels o, edge threshold."""

    length: int = 2
    channels: int = 2
    edge_threshold: float = 1e-6

    def __post_init__(self):
        if self.length < 1 or self.channels < 1:
            raise ValueError(f"need length >= 1 and channels >= 1, got ({self.length}, {self.channels})")
        if self.edge_threshold < 0.0:
            raise ValueError(f"edge threshold must be >= 0, got {self.edge_threshold}")


def make_topology(kind: str, n: int) -> np.ndarray:
    """Binary n x n adjacency for a named topology; zero diagonal except identity."""
    if n < 1:
        raise ValueError(f"topology needs n >= 1, got {n}")
    if kind == "full":
        m = np.ones((n, n))
        np.fill_diagonal(m, 0.0)
        return m
    if kind == "identity":
        return np.eye(n)
    if kind in ("cycle", "line"):
        if n < 2:
            raise ValueError(f"{kind} topology needs n >= 2, got {n}")
        m = np.zeros((n, n))
        last = n if kind == "cycle" else n - 1
        for i in range(last):
            j = (i + 1) % n
            m[j, i] = 1.0
            m[i, j] = 1.0
        return m
    if kind == "star":
        if n < 2:
            raise ValueError(f"star topology needs n >= 2, got {n}")
        m = np.zeros((n, n))
        m[0, 1:] = 1.0
        m[1:, 0] = 1.0
        return m
    raise ValueError(f"unknown topology kind {kind!r}, expected one of {TOPOLOGY_KINDS}")


class AdjacencyTensor:
    """Stack of k nonnegative n x n layers; layer 0 is the identity once appended."""

    def __init__(self, layers, identity_appended: bool = False):
        layers = [np.asarray(layer, dtype=np.float64) for layer in layers]
        if not layers:
            raise ValueError("adjacency tensor needs at least one layer")
        n = layers[0].shape[0]
        for layer in layers:
            if layer.shape != (n, n):
                raise DimensionError(f"layer shape {layer.shape} does not match ({n}, {n})")
            if not np.all(np.isfinite(layer)) or np.any(layer < 0.0):
                raise ValueError("adjacency layers must be finite and nonnegative")
        self.layers = layers
        self.identity_appended = identity_appended

    @classmethod
    def from_topologies(cls, kinds, n: int) -> "AdjacencyTensor":
        return cls([make_topology(kind, n) for kind in kinds])

    @property
    def n(self) -> int:
        return self.layers[0].shape[0]

    @property
    def k(self) -> int:
        return len(self.layers)

    def stack(self) -> np.ndarray:
        """Layers as one (k, n, n) array."""
        return np.stack(self.layers)


def append_identity(a: AdjacencyTensor) -> AdjacencyTensor:
    """Prepend the identity as layer 0; guarded against being applied twice."""
    if a.identity_appended:
        raise StateError("identity layer already appended")
    return AdjacencyTensor([np.eye(a.n)] + a.layers, identity_appended=True)


class SelectionWeights:
    """Soft selection logits over k edge types, one row per (slot, channel).

    Rows of w_phi are slot-major: row (slot * channels + channel). The softmax
    rows alpha are recomputed from w_phi on every use, never cached across
    optimizer steps.
    """

    def __init__(self, length: int, channels: int, k: int, seed: int, name: str = "mcg.w_phi"):
        if length < 1 or channels < 1 or k < 1:
            raise ValueError(f"need length, channels, k >= 1, got ({length}, {channels}, {k})")
        self.l = length
        self.o = channels
        self.k = k
        self.w_phi = glorot(name, length * channels, k, seed)

    def alpha(self) -> np.ndarray:
        """Selection weights as an (l, o, k) stack of softmax rows."""
        return softmax_rows(self.w_phi.value).reshape(self.l, self.o, self.k)


def _check_slot_channel(sel: SelectionWeights, slot: int, channel: int):
    if not (0 <= slot < sel.l and 0 <= channel < sel.o):
        raise ValueError(f"slot {slot}, channel {channel} out of range for ({sel.l} slots, {sel.o} channels)")


def soft_select(a: AdjacencyTensor, sel: SelectionWeights, slot: int, channel: int) -> np.ndarray:
    """Convex combination sum_k alpha_k A_k for one (slot, channel)."""
    _check_slot_channel(sel, slot, channel)
    if a.k != sel.k:
        raise DimensionError(f"tensor has {a.k} layers but selection expects {sel.k}")
    alpha = sel.alpha()[slot, channel]
    return np.einsum("k,kij->ij", alpha, a.stack())


def soft_select_backward(a: AdjacencyTensor, sel: SelectionWeights, slot: int, channel: int,
                         upstream: np.ndarray):
    """Accumulate d loss / d w_phi for one (slot, channel) through the softmax Jacobian."""
    _check_slot_channel(sel, slot, channel)
    alpha = sel.alpha()[slot, channel]
    d_alpha = np.einsum("ij,kij->k", upstream, a.stack())
    d_row = alpha * (d_alpha - float(alpha @ d_alpha))
    sel.w_phi.grad[slot * sel.o + channel] += d_row


def compose_metapath(selected) -> np.ndarray:
    """Chain product with the first hop applied first (last matrix leftmost)."""
    if not selected:
        raise ValueError("compose_metapath needs at least one matrix")
    out = selected[0]
    for m in selected[1:]:
        out = m @ out
    return out


def compose_metapath_backward(selected, upstream):
    """Per-slot gradients of the chain product under the product rule."""
    if not selected:
        raise ValueError("compose_metapath needs at least one matrix")
    length = len(selected)
    n = selected[0].shape[0]
    suffix = [None] * length  # suffix[i] = M_{i-1} ... M_0
    acc = np.eye(n)
    for i in range(length):
        suffix[i] = acc
        acc = selected[i] @ acc
    grads = [None] * length
    prefix = np.eye(n)  # M_{l-1} ... M_{i+1}, built from the left
    for i in reversed(range(length)):
        grads[i] = prefix.T @ upstream @ suffix[i].T
        prefix = prefix @ selected[i]
    return grads


def normalize(a_m: np.ndarray) -> np.ndarray:
    """Row normalization of A + I by its row-sum degrees; rows sum to 1."""
    a_m = np.asarray(a_m, dtype=np.float64)
    if a_m.ndim != 2 or a_m.shape[0] != a_m.shape[1]:
        raise DimensionError(f"normalize needs a square matrix, got {a_m.shape}")
    if np.any(a_m < 0.0):
        raise ValueError("normalize needs nonnegative entries")
    tilde = a_m + np.eye(a_m.shape[0])
    deg = tilde.sum(axis=1, keepdims=True)  # >= 1 thanks to the self-loop
    return tilde / deg


def normalize_backward(a_m: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient of normalize with respect to its input."""
    tilde = a_m + np.eye(a_m.shape[0])
    deg = tilde.sum(axis=1, keepdims=True)
    normed = tilde / deg
    return (upstream - (upstream * normed).sum(axis=1, keepdims=True)) / deg


def extract_edges(channels, threshold: float = 1e-6):
    """Unordered agent pairs (i, j), i < j, with any channel entry above threshold.

    Ordering is lexicographic; the discrete edge set carries no gradient.
    """
    mask = None
    for c in channels:
        m = np.asarray(c) > threshold
        mask = m if mask is None else (mask | m)
    if mask is None:
        return []
    mask = mask | mask.T
    n = mask.shape[0]
    return [(i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j]]
