"""A small mixture-of-experts transformer.

Two pre-norm layers of causal multi-head attention followed by a routed
expert feed-forward block.  Weights are drawn once from the seeded SplitMix64
stream and never trained; the model exists to produce next-token logits and
the per-token gating and attention signals the controller reads.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError, NumericError
from .rng import SplitMix64
from .tokenizer import VOCAB

D_MODEL = 32
N_HEADS = 4
N_LAYERS = 2
HIDDEN = 64
CONTEXT_CAP = 256
INIT_SCALE = 0.1


def sinusoidal_positions(n_positions, d_model=D_MODEL):
    pos = np.arange(n_positions, dtype=np.float64)[:, None]
    i = np.arange(0, d_model, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, i / d_model)
    table = np.zeros((n_positions, d_model))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return table


@dataclass(frozen=True)
class LayerParams:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    router: np.ndarray  # (d_model, n_experts)
    w1: np.ndarray  # (n_experts, d_model, hidden)
    b1: np.ndarray
    w2: np.ndarray  # (n_experts, hidden, d_model)
    b2: np.ndarray


@dataclass(frozen=True)
class ModelParams:
    embedding: np.ndarray
    positional: np.ndarray
    layers: tuple
    n_experts: int
    top_k: int

    @classmethod
    def from_seed(cls, seed, n_experts=4, top_k=2, vocab_size=None):
        vocab_size = len(VOCAB) if vocab_size is None else vocab_size
        rng = SplitMix64(seed)

        def draw(*shape):
            return rng.uniform_array(-INIT_SCALE, INIT_SCALE, shape)

        embedding = draw(vocab_size, D_MODEL)
        layers = []
        for _ in range(N_LAYERS):
            layers.append(
                LayerParams(
                    wq=draw(D_MODEL, D_MODEL),
                    wk=draw(D_MODEL, D_MODEL),
                    wv=draw(D_MODEL, D_MODEL),
                    wo=draw(D_MODEL, D_MODEL),
                    router=draw(D_MODEL, n_experts),
                    w1=draw(n_experts, D_MODEL, HIDDEN),
                    b1=draw(n_experts, HIDDEN),
                    w2=draw(n_experts, HIDDEN, D_MODEL),
                    b2=draw(n_experts, D_MODEL),
                )
            )
        return cls(
            embedding=embedding,
            positional=sinusoidal_positions(CONTEXT_CAP),
            layers=tuple(layers),
            n_experts=n_experts,
            top_k=top_k,
        )


@dataclass(frozen=True)
class RouterOutput:
    scores: np.ndarray
    active: tuple


@dataclass(frozen=True)
class TokenRecord:
    token: int
    position: int
    gating_sum: float
    attention_received: float
    importance_signal: float


@dataclass(frozen=True)
class ForwardResult:
    logits: np.ndarray  # (L, vocab)
    attention: np.ndarray  # (layers, heads, L, L)
    router_scores: np.ndarray  # (layers, L, n_experts)
    active: np.ndarray  # (layers, L, top_k)
    gating_sums: np.ndarray  # (L,), averaged over layers


def embed(tokens, params):
    """``E(T) + P``: token embedding rows plus sinusoidal position rows."""
    tokens = np.asarray(tokens, dtype=np.int64).reshape(-1)
    if tokens.size and (tokens.min() < 0 or tokens.max() >= params.embedding.shape[0]):
        raise IndexError("token id outside vocabulary")
    if tokens.size > params.positional.shape[0]:
        raise CapacityError(f"{tokens.size} tokens exceed context cap {params.positional.shape[0]}")
    return params.embedding[tokens] + params.positional[: tokens.size]


def softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def top_k_indices(scores, k):
    """Indices of the ``k`` largest scores; ties go to the lower index."""
    order = np.argsort(-scores, axis=-1, kind="stable")
    return order[..., :k]


def route(u, router_weights, top_k):
    u = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(u)):
        raise NumericError("router input is not finite")
    scores = softmax(u @ router_weights)
    active = tuple(int(e) for e in top_k_indices(scores, top_k))
    return RouterOutput(scores=scores, active=active)


def moe_forward(u, router_output, experts):
    """Sum of ``a_e * f_e(u)`` over the active experts only."""
    out = None
    for e in router_output.active:
        term = router_output.scores[e] * np.asarray(experts[e](u), dtype=np.float64)
        out = term if out is None else out + term
    return out


def expert_fn(layer, e):
    def f(u):
        return np.tanh(u @ layer.w1[e] + layer.b1[e]) @ layer.w2[e] + layer.b2[e]

    return f


def attention_received(attention, t):
    """Mean weight paid to position ``t`` by later queries, over heads (and layers).

    ``attention`` has shape ``(..., L, L)`` indexed ``[query, key]``.
    """
    attention = np.asarray(attention)
    length = attention.shape[-1]
    if not 0 <= t < length:
        raise IndexError(f"position {t} out of range for length {length}")
    if t == length - 1:
        return 0.0
    column = attention[..., t + 1 :, t]
    return float(np.mean(column))


def token_importance_signal(gating_sum, beta, gamma_mix):
    return gamma_mix * gating_sum + (1.0 - gamma_mix) * beta


def _layer_norm(x, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


class TinyMoE:
    """Immutable model; each call allocates its own scratch arrays."""

    def __init__(self, params, gamma_mix=0.7):
        self.params = params
        self.gamma_mix = gamma_mix

    @classmethod
    def from_config(cls, config, seed=None):
        return _cached_model(
            config.seed if seed is None else seed, config.n_experts, config.top_k, config.gamma_mix
        )

    def forward(self, tokens):
        p = self.params
        x = embed(tokens, p)
        length = x.shape[0]
        if length == 0:
            raise ValueError("empty input")
        dh = D_MODEL // N_HEADS
        causal = np.triu(np.ones((length, length), dtype=bool), k=1)
        attn_all, scores_all, active_all = [], [], []
        gating = np.zeros(length)
        for layer in p.layers:
            h = _layer_norm(x)
            q = (h @ layer.wq).reshape(length, N_HEADS, dh).transpose(1, 0, 2)
            k = (h @ layer.wk).reshape(length, N_HEADS, dh).transpose(1, 0, 2)
            v = (h @ layer.wv).reshape(length, N_HEADS, dh).transpose(1, 0, 2)
            logits = q @ k.transpose(0, 2, 1) / np.sqrt(dh)
            logits = np.where(causal, -np.inf, logits)
            attn = softmax(logits)
            mixed = (attn @ v).transpose(1, 0, 2).reshape(length, D_MODEL)
            x = x + mixed @ layer.wo

            u = _layer_norm(x)
            scores = softmax(u @ layer.router)
            active = top_k_indices(scores, p.top_k)
            expert_out = np.stack(
                [np.tanh(u @ layer.w1[e] + layer.b1[e]) @ layer.w2[e] + layer.b2[e] for e in range(p.n_experts)],
                axis=1,
            )  # (L, E, d)
            weights = np.zeros_like(scores)
            np.put_along_axis(weights, active, np.take_along_axis(scores, active, axis=-1), axis=-1)
            x = x + np.einsum("le,led->ld", weights, expert_out)
            gating += weights.sum(axis=-1)
            attn_all.append(attn)
            scores_all.append(scores)
            active_all.append(active)
        out = _layer_norm(x) @ p.embedding.T
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite logits")
        return ForwardResult(
            logits=out,
            attention=np.stack(attn_all),
            router_scores=np.stack(scores_all),
            active=np.stack(active_all),
            gating_sums=gating / len(p.layers),
        )

    def records(self, tokens, result=None):
        result = self.forward(tokens) if result is None else result
        recs = []
        for t, tok in enumerate(tokens):
            beta = attention_received(result.attention, t)
            g = float(result.gating_sums[t])
            recs.append(TokenRecord(int(tok), t, g, beta, token_importance_signal(g, beta, self.gamma_mix)))
        return recs

    def next_token_logits(self, prefix):
        """Logits for the token after ``prefix`` plus a record per prefix token."""
        prefix = list(prefix)
        if len(prefix) > CONTEXT_CAP:
            raise CapacityError(f"prefix of {len(prefix)} tokens exceeds context cap {CONTEXT_CAP}")
        tokens = prefix or [VOCAB.bos]
        result = self.forward(tokens)
        return result.logits[-1], self.records(tokens, result)[: len(prefix)]

    def token_signals(self, tokens):
        """Per-token importance ``I_t`` for a token sequence (empty -> empty)."""
        tokens = list(tokens)[-CONTEXT_CAP:]
        if not tokens:
            return ()
        return tuple(r.importance_signal for r in self.records(tokens))


@lru_cache(maxsize=32)
def _cached_model(seed, n_experts, top_k, gamma_mix):
    return TinyMoE(ModelParams.from_seed(seed, n_experts, top_k), gamma_mix)
