"""Per-token importance signals from the tiny mixture-of-experts model.

Each token's signal mixes the router mass of its active experts with the
attention it receives from later tokens.
"""

import numpy as np

from dcot import DCoTConfig
from dcot.moe import TinyMoE, attention_received
from dcot.tokenizer import detokenize, tokenize

config = DCoTConfig(seed=11)
model = TinyMoE.from_config(config)

text = "det(A) = det(L) det(U) / det(L) det(U) = 1"
tokens = tokenize(text)
out = model.forward(tokens)
print(f"{len(tokens)} tokens, logits {out.logits.shape}, router scores {out.router_scores.shape}")

# router scores are a distribution over experts at every position
print("score sums:", np.round(out.router_scores.sum(axis=-1), 12).min(), "..", out.router_scores.sum(axis=-1).max())

signals = model.token_signals(tokens)
print()
print("token       gating   beta    signal")
for t, tok in enumerate(tokens):
    beta = attention_received(out.attention, t)
    print(f"{detokenize([tok])!r:<10} {out.gating_sums[t]:7.3f} {beta:7.3f} {signals[t]:8.3f}")

# greedy continuation, untrained weights so the text is noise
logits, _ = model.next_token_logits(tokens)
print()
print("next token id:", int(np.argmax(logits)))
