"""Self-attention over per-window embeddings: encoder stack plus output MLP.

The head consumes a W x d sequence (d = 2e barcode-embedding columns, or
d = n raw observations for the attention-only ablation), applies sinusoidal
positional encoding, E post-norm transformer encoder layers, and maps the
flattened result through a two-layer ReLU MLP to a length-T signal.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InvalidConfig, ShapeMismatch
from .vectorize import topvec
from .windowing import window_matrix


def xavier_uniform(rng, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape if shape is not None else (fan_in, fan_out))


def sinusoidal_table(count: int, width: int) -> np.ndarray:
    """Fixed positional-encoding table: sin on even columns, cos on odd."""
    table = np.zeros((count, width))
    pos = np.arange(count, dtype=np.float64)[:, None]
    pairs = np.arange(0, width, 2, dtype=np.float64)
    angles = pos / np.power(10000.0, pairs / width)
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)[:, : table[:, 1::2].shape[1]]
    return table


def positional_encode(a: Tensor) -> Tensor:
    """Add the sinusoidal table matching the input's (count, width)."""
    return ad.add(a, sinusoidal_table(a.shape[0], a.shape[1]))


def scaled_dot_attention(a: Tensor, wq: Tensor, wk: Tensor, wv: Tensor) -> Tensor:
    """softmax(Q K^T / sqrt(d_k)) V over the full, unmasked window axis."""
    q = ad.matmul(a, wq)
    k = ad.matmul(a, wk)
    v = ad.matmul(a, wv)
    scores = ad.mul(ad.matmul(q, ad.transpose(k)), 1.0 / np.sqrt(wk.shape[1]))
    return ad.matmul(ad.softmax(scores, axis=1), v)


class EncoderLayer:
    """One post-norm encoder layer: multi-head attention, then a 4x-wide FFN.

    Query/key/value and output projections are bias-free matrices; the
    feed-forward layers are affine; both residual branches end in an affine
    layer norm (eps 1e-5).
    """

    def __init__(self, width: int, heads: int, rng):
        if width % heads != 0:
            raise InvalidConfig(f"head count {heads} must divide model width {width}")
        self.width = width
        self.heads = heads
        head_dim = width // heads
        self.wq = [Tensor(xavier_uniform(rng, width, head_dim), requires_grad=True)
                   for _ in range(heads)]
        self.wk = [Tensor(xavier_uniform(rng, width, head_dim), requires_grad=True)
                   for _ in range(heads)]
        self.wv = [Tensor(xavier_uniform(rng, width, head_dim), requires_grad=True)
                   for _ in range(heads)]
        self.proj = Tensor(xavier_uniform(rng, width, width), requires_grad=True)
        inner = 4 * width
        self.ff1_w = Tensor(xavier_uniform(rng, width, inner), requires_grad=True)
        self.ff1_b = Tensor(np.zeros(inner), requires_grad=True)
        self.ff2_w = Tensor(xavier_uniform(rng, inner, width), requires_grad=True)
        self.ff2_b = Tensor(np.zeros(width), requires_grad=True)
        self.ln1_g = Tensor(np.ones(width), requires_grad=True)
        self.ln1_b = Tensor(np.zeros(width), requires_grad=True)
        self.ln2_g = Tensor(np.ones(width), requires_grad=True)
        self.ln2_b = Tensor(np.zeros(width), requires_grad=True)

    def __call__(self, a: Tensor) -> Tensor:
        if a.ndim != 2 or a.shape[1] != self.width:
            raise ShapeMismatch(f"encoder layer expects (*, {self.width}), got {a.shape}")
        heads = [scaled_dot_attention(a, q, k, v)
                 for q, k, v in zip(self.wq, self.wk, self.wv)]
        attended = ad.matmul(ad.concat(heads, axis=1), self.proj)
        b = ad.add(ad.mul(ad.layer_norm(ad.add(a, attended), axis=1), self.ln1_g), self.ln1_b)
        hidden = ad.relu(ad.add(ad.matmul(b, self.ff1_w), self.ff1_b))
        ffn = ad.add(ad.matmul(hidden, self.ff2_w), self.ff2_b)
        return ad.add(ad.mul(ad.layer_norm(ad.add(b, ffn), axis=1), self.ln2_g), self.ln2_b)

    def named_parameters(self, prefix: str):
        out = []
        for h in range(self.heads):
            out.append((f"{prefix}.head{h}.wq", self.wq[h]))
            out.append((f"{prefix}.head{h}.wk", self.wk[h]))
            out.append((f"{prefix}.head{h}.wv", self.wv[h]))
        out.extend([
            (f"{prefix}.proj", self.proj),
            (f"{prefix}.ff1_w", self.ff1_w), (f"{prefix}.ff1_b", self.ff1_b),
            (f"{prefix}.ff2_w", self.ff2_w), (f"{prefix}.ff2_b", self.ff2_b),
            (f"{prefix}.ln1_g", self.ln1_g), (f"{prefix}.ln1_b", self.ln1_b),
            (f"{prefix}.ln2_g", self.ln2_g), (f"{prefix}.ln2_b", self.ln2_b),
        ])
        return out


class OutputMlp:
    """Two affine layers with one ReLU: flattened encoder output to R^T."""

    def __init__(self, in_dim: int, hidden: int, out_dim: int, rng):
        self.w1 = Tensor(xavier_uniform(rng, in_dim, hidden), requires_grad=True)
        self.b1 = Tensor(np.zeros(hidden), requires_grad=True)
        self.w2 = Tensor(xavier_uniform(rng, hidden, out_dim), requires_grad=True)
        self.b2 = Tensor(np.zeros(out_dim), requires_grad=True)
        self.out_dim = out_dim

    def __call__(self, flat: Tensor) -> Tensor:
        hidden = ad.relu(ad.add(ad.matmul(flat, self.w1), self.b1))
        return ad.reshape(ad.add(ad.matmul(hidden, self.w2), self.b2), (self.out_dim,))

    def named_parameters(self, prefix: str):
        return [(f"{prefix}.w1", self.w1), (f"{prefix}.b1", self.b1),
                (f"{prefix}.w2", self.w2), (f"{prefix}.b2", self.b2)]


def encode_sequence(a: Tensor, layers) -> Tensor:
    """Positional encoding plus the encoder stack; identity when no layers."""
    if not layers:
        return a
    out = positional_encode(a)
    for layer in layers:
        out = layer(out)
    return out


class TopologicalAttentionHead:
    """Barcode pipeline: per-window embeddings, encoder stack, output MLP.

    With zero encoder layers the stack (including positional encoding) is a
    pass-through, leaving the plain embed-and-project ablation.
    """

    def __init__(self, plan, bank_sub, bank_sup, encoder_layers: int, heads: int,
                 hidden: int, lookback: int, rng):
        if bank_sub.size != bank_sup.size:
            raise InvalidConfig("sublevel and superlevel banks must share a size")
        self.plan = plan
        self.bank_sub = bank_sub
        self.bank_sup = bank_sup
        width = 2 * bank_sub.size
        self.width = width
        self.layers = [EncoderLayer(width, heads, rng) for _ in range(encoder_layers)]
        self.mlp = OutputMlp(plan.count * width, hidden, lookback, rng)

    def forward(self, wb) -> Tensor:
        a = topvec(wb, self.bank_sub, self.bank_sup)
        encoded = encode_sequence(a, self.layers)
        return self.mlp(ad.reshape(encoded, (1, self.plan.count * self.width)))

    def named_parameters(self, prefix: str = ""):
        out = []
        out.extend(self.bank_sub.named_parameters(f"{prefix}bank_sub"))
        out.extend(self.bank_sup.named_parameters(f"{prefix}bank_sup"))
        for i, layer in enumerate(self.layers):
            out.extend(layer.named_parameters(f"{prefix}encoder.{i}"))
        out.extend(self.mlp.named_parameters(f"{prefix}mlp"))
        return out

    def parameter_groups(self):
        groups = {
            "topvec": self.bank_sub.parameters() + self.bank_sup.parameters(),
            "encoder": [t for layer in self.layers
                        for _, t in layer.named_parameters("l")],
            "mlp": [t for _, t in self.mlp.named_parameters("m")],
        }
        return groups


class RawWindowAttentionHead:
    """Ablation head fed with raw window rows; encoder width equals n."""

    def __init__(self, plan, encoder_layers: int, heads: int, hidden: int,
                 lookback: int, rng):
        self.plan = plan
        self.width = plan.window
        self.layers = [EncoderLayer(self.width, heads, rng) for _ in range(encoder_layers)]
        self.mlp = OutputMlp(plan.count * self.width, hidden, lookback, rng)

    def forward(self, windows: np.ndarray) -> Tensor:
        if windows.shape != (self.plan.count, self.width):
            raise ShapeMismatch(
                f"expected windows of shape {(self.plan.count, self.width)}, got {windows.shape}"
            )
        encoded = encode_sequence(Tensor(windows), self.layers)
        return self.mlp(ad.reshape(encoded, (1, self.plan.count * self.width)))

    def named_parameters(self, prefix: str = ""):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend(layer.named_parameters(f"{prefix}encoder.{i}"))
        out.extend(self.mlp.named_parameters(f"{prefix}mlp"))
        return out

    def parameter_groups(self):
        return {
            "encoder": [t for layer in self.layers
                        for _, t in layer.named_parameters("l")],
            "mlp": [t for _, t in self.mlp.named_parameters("m")],
        }


def top_attn(wb, bank_sub, bank_sup, plan, encoder_layers, heads, hidden,
             lookback, rng) -> np.ndarray:
    """One-shot forward of the full topological-attention map to R^T."""
    head = TopologicalAttentionHead(plan, bank_sub, bank_sup, encoder_layers,
                                    heads, hidden, lookback, rng)
    return head.forward(wb).data


def top_only(wb, bank_sub, bank_sup, plan, hidden, lookback, rng) -> np.ndarray:
    """Embed-and-project ablation: no encoder stack."""
    return top_attn(wb, bank_sub, bank_sup, plan, 0, 1, hidden, lookback, rng)


def attn_only(x, plan, encoder_layers, heads, hidden, lookback, rng) -> np.ndarray:
    """Raw-window ablation: encoder over the W x n observation matrix."""
    head = RawWindowAttentionHead(plan, encoder_layers, heads, hidden, lookback, rng)
    return head.forward(window_matrix(x, plan)).data
