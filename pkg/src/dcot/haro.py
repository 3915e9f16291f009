"""Hierarchical adaptive reward optimization.

Step importance, the EMA retention threshold, margin-based step selection,
episode rewards, and a REINFORCE-with-baseline update of the three policy
weights whose step size is cut back until every recorded choice keeps its
probability ratio inside the PPO-style clip band.
"""

import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .tokenizer import content_tokens

BISECTION_ITERS = 20


def step_importance(advantage, gating, alpha):
    for name, v in (("advantage", advantage), ("gating", gating)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} {v} outside [0,1]")
    return alpha * advantage + (1.0 - alpha) * gating


def advantage_estimate(r_t, r_bar):
    return 0.5 + 0.5 * math.tanh(2.0 * (r_t - r_bar))


def ema_threshold_update(state, importances, gamma_ema, push=False):
    """One EMA step of the threshold from the indicator window.

    With ``push`` the importances are appended to the state's window first and
    the whole window is used; otherwise ``importances`` is the window.
    """
    if push:
        state.indicator_window.extend(importances)
        window = list(state.indicator_window)
    else:
        window = list(importances)
    if not window:
        raise ValueError("empty importance window")
    if len(window) > state.window_n:
        raise ValueError(f"window of {len(window)} exceeds window_n={state.window_n}")
    above = sum(1 for v in window if v > state.tau)
    tau = gamma_ema * state.tau + (1.0 - gamma_ema) * above / len(window)
    state.tau = min(1.0, max(0.0, tau))
    state.step += 1
    state.history.append(state.tau)
    return state.tau


def select_step(candidates, tau):
    """Candidate with the largest positive margin ``importance - tau``.

    Ties go to the lowest id; returns None when no margin is positive.
    """
    best = None
    for c in sorted(candidates, key=lambda c: c.id):
        margin = c.importance - tau
        if margin > 0 and (best is None or margin > best[0]):
            best = (margin, c)
    return None if best is None else best[1]


_LABEL = re.compile(r"^\s*[A-Za-z_][A-Za-z_ ]*=")


def _answer_tokens(text):
    """Content tokens of an answer, ignoring a leading ``label =`` prefix."""
    return content_tokens(_LABEL.sub("", text, count=1).strip().lower())


def semantic_reward(answer, oracle):
    """Token-level F1; ``det = 1`` and ``1`` count as the same answer."""
    a, o = _answer_tokens(answer), _answer_tokens(oracle)
    if not a and not o:
        return 1.0
    if not a or not o:
        return 0.0
    common = sum((Counter(a) & Counter(o)).values())
    if common == 0:
        return 0.0
    precision, recall = common / len(a), common / len(o)
    return 2 * precision * recall / (precision + recall)


def structural_reward(token_count, token_budget):
    return min(1.0, max(-1.0, 1.0 - 2.0 * token_count / token_budget))


def episode_reward(answer, token_count, oracle, config):
    return semantic_reward(answer, oracle) - config.mu_cost * token_count / config.token_budget


@dataclass(frozen=True)
class PolicyParams:
    w_adv: float = 1.0
    w_gate: float = 1.0
    bias: float = 0.0
    baseline: float = 0.0
    n_episodes: int = 0

    @property
    def theta(self):
        return np.array([self.w_adv, self.w_gate, self.bias])

    def with_theta(self, theta):
        return PolicyParams(float(theta[0]), float(theta[1]), float(theta[2]), self.baseline, self.n_episodes)

    def observe_return(self, r_total):
        n = self.n_episodes + 1
        return PolicyParams(
            self.w_adv, self.w_gate, self.bias, self.baseline + (r_total - self.baseline) / n, n
        )

    def to_text(self):
        return "".join(f"{k} = {getattr(self, k)!r}\n" for k in ("w_adv", "w_gate", "bias", "baseline", "n_episodes"))

    @classmethod
    def from_text(cls, text):
        raw = {}
        for line in text.splitlines():
            if line.strip():
                k, v = (p.strip() for p in line.split("=", 1))
                raw[k] = int(v) if k == "n_episodes" else float(v)
        return cls(**raw)


@dataclass(frozen=True)
class Choice:
    """Candidate features ``(A, G)`` per row and the index that was picked."""

    features: tuple
    chosen: int
    logprob: float = 0.0


@dataclass
class EpisodeRecord:
    choices: list = field(default_factory=list)
    r_sem: float = 0.0
    r_struct: float = 0.0
    r_episode: float = 0.0
    lambda_struct: float = 0.5
    gradient: np.ndarray = None

    @property
    def r_total(self):
        return self.r_sem + self.lambda_struct * self.r_struct


def _logits(theta, features):
    f = np.asarray(features, dtype=np.float64)
    return theta[0] * f[:, 0] + theta[1] * f[:, 1] + theta[2]


def choice_probs(params, features):
    theta = params.theta if isinstance(params, PolicyParams) else np.asarray(params, dtype=np.float64)
    z = _logits(theta, features)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def choice_logprob(params, features, chosen=0):
    """``log pi`` of the chosen candidate under a softmax over candidates."""
    if len(features) == 0:
        raise ValueError("empty candidate set")
    theta = params.theta if isinstance(params, PolicyParams) else np.asarray(params, dtype=np.float64)
    z = _logits(theta, features)
    m = z.max()
    return float(z[chosen] - m - math.log(np.exp(z - m).sum()))


def grad_logprob(params, features, chosen):
    """Analytic gradient of ``log pi(chosen)`` w.r.t. (w_adv, w_gate, bias)."""
    f = np.asarray(features, dtype=np.float64)
    p = choice_probs(params, f)
    expected = p @ f
    g = np.zeros(3)
    g[:2] = f[chosen] - expected
    # bias shifts every candidate's logit equally, so it never moves log pi
    g[2] = 0.0
    return g


def policy_gradient(episode, params):
    """REINFORCE estimate ``(R_total - baseline) * sum grad log pi``."""
    advantage = episode.r_total - params.baseline
    total = np.zeros(3)
    for c in episode.choices:
        total += grad_logprob(params, c.features, c.chosen)
    return advantage * total


def surrogate_objective(theta, episode, baseline):
    """The scalar whose gradient :func:`policy_gradient` returns."""
    advantage = episode.r_total - baseline
    return advantage * sum(choice_logprob(theta, c.features, c.chosen) for c in episode.choices)


def probability_ratios(new, old, choices):
    return np.array(
        [math.exp(choice_logprob(new, c.features, c.chosen) - choice_logprob(old, c.features, c.chosen)) for c in choices]
    )


def _within(ratios, clip):
    return bool(np.all((ratios >= 1.0 - clip) & (ratios <= 1.0 + clip)))


def clipped_update(params, gradient, old_params, choices, eta_lr, clip):
    """``theta + eta * g``, shortened by bisection if any ratio leaves the clip band."""
    gradient = np.asarray(gradient, dtype=np.float64)
    if not np.all(np.isfinite(gradient)):
        raise NumericError("non-finite gradient")
    base = params.theta
    step = eta_lr * gradient
    if not np.any(step):
        return params

    def at(scale):
        return params.with_theta(base + scale * step)

    if _within(probability_ratios(at(1.0), old_params, choices), clip):
        return at(1.0)
    lo, hi = 0.0, 1.0
    if not _within(probability_ratios(at(0.0), old_params, choices), clip):
        return params
    for _ in range(BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        if _within(probability_ratios(at(mid), old_params, choices), clip):
            lo = mid
        else:
            hi = mid
    return at(lo)
