"""Dynamic CoT controller: thresholds, verdicts, summaries, and the buffer."""

import math
from dataclasses import dataclass, field

from . import haro
from .errors import IntegrityError, SessionStop
from .tokenizer import content_tokens, detokenize
from .types import CoTSegment, Mode, ThresholdState, Verdict

NEG_INF = float("-inf")


class RewardState:
    """Partial rewards seen so far in one session."""

    def __init__(self, history=()):
        self.history = list(history)

    def observe(self, r):
        self.history.append(float(r))

    @property
    def r_t(self):
        return self.history[-1]

    @property
    def r_bar(self):
        return math.fsum(self.history) / len(self.history)

    def __len__(self):
        return len(self.history)


@dataclass(frozen=True)
class ReasoningBuffer:
    """Append-only progressive buffer of retained segments."""

    retained: tuple = ()
    coherence_exceptions: tuple = ()  # (segment id, reason)
    thresholds: tuple = ()  # tau_dyn in force when each retained segment was judged

    @property
    def ids(self):
        return [s.id for s in self.retained]

    def __len__(self):
        return len(self.retained)

    def tokens(self):
        out = []
        for s in self.retained:
            out.extend(s.tokens)
        return out

    @property
    def exception_ids(self):
        return {sid for sid, _ in self.coherence_exceptions}


def dynamic_threshold(reward_state, config):
    if not len(reward_state):
        raise ValueError("dynamic threshold needs at least one observed reward")
    tau = config.tau_0 + config.eta_thr * (reward_state.r_t - reward_state.r_bar)
    return min(1.0, max(0.0, tau))


def classify_segment(importance, tau_dyn, delta_sum):
    if importance < tau_dyn:
        return Verdict.PRUNE
    if importance < tau_dyn + delta_sum:
        return Verdict.SUMMARIZE
    return Verdict.KEEP


def summarize_segment(segment, token_signals=None):
    """Keep the ceil(n/2) tokens with the highest ``I_t``, in original order."""
    tokens = segment.tokens
    n = len(tokens)
    if n == 0:
        return segment
    signals = token_signals if token_signals is not None else segment.token_signals
    if not signals:
        signals = (0.0,) * n
    if len(signals) != n:
        raise ValueError(f"{len(signals)} token signals for {n} tokens")
    keep = (n + 1) // 2
    ranked = sorted(range(n), key=lambda i: (-signals[i], i))[:keep]
    kept = sorted(ranked)
    new_tokens = tuple(tokens[i] for i in kept)
    return segment.with_(
        tokens=new_tokens,
        text=detokenize(new_tokens),
        token_signals=tuple(signals[i] for i in kept),
        summarized=True,
    )


def buffer_update(buffer, segment, verdict, exception="", tau_dyn=NEG_INF, token_signals=None):
    """Return the buffer after applying ``verdict`` to ``segment``."""
    if segment.id in buffer.ids:
        raise IntegrityError(f"segment {segment.id} already in buffer")
    if verdict is Verdict.PRUNE and not exception:
        return buffer
    if verdict is Verdict.SUMMARIZE:
        segment = summarize_segment(segment, token_signals)
    exceptions = buffer.coherence_exceptions
    if verdict is Verdict.PRUNE:
        exceptions = exceptions + ((segment.id, exception),)
    return ReasoningBuffer(
        retained=buffer.retained + (segment.with_(verdict=verdict),),
        coherence_exceptions=exceptions,
        thresholds=buffer.thresholds + (tau_dyn,),
    )


def coherence_check(segment, remaining):
    """Answers, and steps whose identifiers at least two later steps use."""
    if segment.is_answer:
        return True
    if not segment.introduces:
        return False
    users = sum(1 for later in remaining if later.references & segment.introduces)
    return users >= 2


def coherence_reason(segment, remaining):
    if segment.is_answer:
        return "answer"
    users = sum(1 for later in remaining if later.references & segment.introduces)
    return f"referenced by {users} later steps"


def partial_reward(segment, oracle_answer=None, scripted=True):
    """Scripted reward as given; otherwise overlap with the oracle answer tokens."""
    if scripted:
        return segment.partial_reward
    target = set(content_tokens(oracle_answer or ""))
    if not target:
        return 0.0
    return len(set(segment.tokens) & target) / len(target)


def select_tokens(buffer, query_tokens):
    """Conditioning prefix: the query followed by every retained token."""
    return list(query_tokens) + buffer.tokens()


@dataclass
class Decision:
    segment: CoTSegment
    verdict: Verdict
    tau_dyn: float
    tau_ema: float
    exception: str = ""
    budget_stop: bool = False
    features: tuple = field(default=(0.0, 0.0))


class DynamicCoTController:
    """Per-session controller state; not shared between sessions."""

    def __init__(self, config, mode=Mode.DCOT, scripted=True, oracle_answer=None):
        self.config = config
        self.mode = mode
        self.scripted = scripted
        self.oracle_answer = oracle_answer
        self.reward_state = RewardState()
        self.buffer = ReasoningBuffer()
        self.threshold = ThresholdState(tau=config.tau_0, window_n=config.window_n)

    def adjust(self, segment, remaining=()):
        """Score a freshly generated segment and pick its verdict."""
        cfg = self.config
        r = partial_reward(segment, self.oracle_answer, self.scripted)
        self.reward_state.observe(r)
        advantage = haro.advantage_estimate(r, self.reward_state.r_bar)
        segment = segment.with_(partial_reward=r).scored(advantage, cfg.alpha)
        if self.mode is Mode.BASELINE:
            tau = NEG_INF
        else:
            tau = dynamic_threshold(self.reward_state, cfg)
        verdict = classify_segment(segment.importance, tau, cfg.delta_sum)
        exception = ""
        if verdict is Verdict.PRUNE and coherence_check(segment, remaining):
            exception = coherence_reason(segment, remaining)
        if segment.is_answer and verdict is Verdict.SUMMARIZE:
            verdict = Verdict.KEEP
        tau_prev = self.threshold.tau
        haro.ema_threshold_update(self.threshold, [segment.importance], cfg.gamma_ema, push=True)
        return Decision(segment, verdict, tau, tau_prev, exception)

    def commit(self, decision, token_signals=None, drop=False):
        """Apply the decision to the buffer; return the appended segment or None."""
        verdict = Verdict.PRUNE if drop else decision.verdict
        exception = "" if drop else decision.exception
        before = len(self.buffer)
        self.buffer = buffer_update(
            self.buffer, decision.segment, verdict, exception, decision.tau_dyn, token_signals
        )
        return self.buffer.retained[-1] if len(self.buffer) > before else None


def adapt_tokens(controller, backend, query_tokens, t, tokens_used, remaining_specs=()):
    """SelectTokens -> Generate -> Adjust for one block.

    Raises :class:`SessionStop` when the budget is already spent or the
    backend has nothing left to say.
    """
    cfg = controller.config
    budget_left = cfg.token_budget - tokens_used
    if budget_left <= 0:
        raise SessionStop("budget")
    prefix = select_tokens(controller.buffer, query_tokens)
    block = backend.generate(prefix, t, budget_left)
    if block is None:
        raise SessionStop("exhausted")
    decision = controller.adjust(block.segment, remaining_specs)
    decision.budget_stop = block.truncated
    return decision
