"""Block decoding with the controller in the loop, and whole sessions.

A session runs the discriminator (D-CoT mode only), then repeats
decode -> adjust -> expand -> refine until the answer segment, the step cap,
or the token budget ends it, and finally assembles the retained segments.
"""

import json
import time
from dataclasses import dataclass

import numpy as np

from . import haro
from .assembly import assemble, assemble_split, reward_map
from .controller import DynamicCoTController, adapt_tokens
from .discriminator import discriminate
from .errors import NoAnswerError, SessionStop
from .moe import CONTEXT_CAP, TinyMoE
from .scripted import scripted_step
from .tokenizer import VOCAB, detokenize, tokenize
from .types import CoTSegment, Level, Mode, SessionTrace, StepRecord, Verdict


@dataclass(frozen=True)
class Block:
    segment: CoTSegment
    truncated: bool = False


class ScriptedBackend:
    """Replays a :class:`ScriptedTrace`; one segment per block."""

    scripted = True

    def __init__(self, trace, alpha=0.5):
        self.trace = trace
        self.alpha = alpha

    def generate(self, prefix, t, max_tokens):
        if t >= len(self.trace):
            return None
        seg = scripted_step(self.trace, t, self.alpha)
        if len(seg.tokens) > max_tokens:
            cut = seg.tokens[:max_tokens]
            return Block(seg.with_(tokens=cut, text=detokenize(cut)), truncated=True)
        return Block(seg)

    def remaining(self, t):
        return self.trace.segments[t + 1 :]


class MoEBackend:
    """Greedy decoding from :class:`TinyMoE`; a block ends at a boundary token."""

    scripted = False

    def __init__(self, model, block_size, alpha=0.5):
        self.model = model
        self.block_size = block_size
        self.alpha = alpha
        self._banned = [VOCAB.pad, VOCAB.bos, VOCAB.byte]

    def generate(self, prefix, t, max_tokens):
        limit = min(self.block_size, max_tokens)
        context = list(prefix)
        out = []
        ended = False
        for _ in range(limit):
            window = (context + out)[-CONTEXT_CAP:]
            logits, _ = self.model.next_token_logits(window)
            logits = logits.copy()
            logits[self._banned] = -np.inf
            tok = int(np.argmax(logits))
            if tok == VOCAB.eos:
                ended = True
                break
            out.append(tok)
            if VOCAB.is_boundary(tok):
                break
        if not out:
            return None
        full = (context + out)[-CONTEXT_CAP:]
        signals = self.model.token_signals(full)[-len(out) :]
        seg = CoTSegment(
            id=t,
            tokens=tuple(out),
            text=detokenize(out),
            gating_score=float(np.mean(signals)),
            level=Level.ANSWER if ended else Level.MICRO,
            token_signals=tuple(signals),
        ).scored(0.5, self.alpha)
        return Block(seg, truncated=limit < self.block_size and len(out) == limit)

    def remaining(self, t):
        return ()


def decode_block(chain, backend, config, query_tokens=()):
    """Raw next block from the backend; stops the session at cap or budget."""
    if chain.t >= config.step_cap:
        raise SessionStop("step_cap")
    if chain.budget_remaining <= 0:
        raise SessionStop("budget")
    prefix = list(query_tokens) + [tok for block in chain.blocks for tok in block]
    block = backend.generate(prefix, chain.t, chain.budget_remaining)
    if block is None:
        raise SessionStop("exhausted")
    return block


@dataclass(frozen=True)
class ChainState:
    blocks: tuple = ()
    t: int = 0
    budget_remaining: int = 0
    step_cap: int = 8

    @classmethod
    def start(cls, config):
        return cls((), 0, config.token_budget, config.step_cap)

    @property
    def token_count(self):
        return sum(len(b) for b in self.blocks)


def expand_chain(chain, accepted_tokens):
    """``C_{t+1} = C_t + T_{t+1}``; ``None`` means the block was pruned away."""
    if chain.t >= chain.step_cap:
        raise SessionStop("step_cap")
    if accepted_tokens is None:
        return ChainState(chain.blocks, chain.t + 1, chain.budget_remaining, chain.step_cap)
    accepted_tokens = tuple(accepted_tokens)
    if len(accepted_tokens) > chain.budget_remaining:
        raise SessionStop("budget")
    return ChainState(
        chain.blocks + (accepted_tokens,),
        chain.t + 1,
        chain.budget_remaining - len(accepted_tokens),
        chain.step_cap,
    )


@dataclass(frozen=True)
class StepRefinement:
    macro: tuple
    micro: tuple
    rewards: dict


def refine_step(block_segments, retained=()):
    """Tag a block's segments macro/micro against what is already retained,
    then order the macro ones by reward (best first)."""
    block_segments = list(block_segments)
    pool = list(retained) + block_segments
    macro, micro = assemble_split(pool)
    ids = {s.id for s in block_segments}
    macro = [m for m in macro if m.id in ids]
    micro = [u for u in micro if u.id in ids]
    ranking = reward_map(macro, ())
    ordered = sorted(macro, key=lambda m: ranking[m.id])
    return StepRefinement(tuple(ordered), tuple(micro), {s.id: s.partial_reward for s in block_segments})


def _signals_for(segment, model):
    if segment.token_signals or model is None:
        return segment.token_signals or None
    return model.token_signals(segment.tokens)


def run_session(task_id, query, oracle, mode, backend, config, store=None, policy=None, rng=None, signal_model=None):
    """Run one task and return its :class:`SessionTrace`.

    ``policy`` (with ``rng`` for sampling, greedy otherwise) lets the learned
    selection policy drop segments the threshold rule would retain.
    """
    mode = Mode(mode)
    trace = SessionTrace(task_id=task_id, mode=mode)
    start = time.perf_counter()
    try:
        if mode is Mode.DCOT and store is not None:
            verdict = discriminate(query, store, config)
            if verdict.direct:
                trace.direct = True
                trace.final_answer = verdict.answer
                trace.token_count = len(tokenize(verdict.answer))
                trace.stop_reason = "direct"
                return trace
        _loop(trace, query, oracle, mode, backend, config, policy, rng, signal_model)
    except Exception as exc:  # backend failure: keep partial metrics
        trace.aborted = True
        trace.error = f"{type(exc).__name__}: {exc}"
    finally:
        trace.wall_time_ms = (time.perf_counter() - start) * 1000.0
        if oracle is not None and not trace.aborted:
            trace.episode_reward = haro.episode_reward(trace.final_answer, trace.token_count, oracle, config)
    return trace


def _loop(trace, query, oracle, mode, backend, config, policy, rng, signal_model):
    controller = DynamicCoTController(config, mode, scripted=backend.scripted, oracle_answer=oracle)
    query_tokens = tokenize(query)
    chain = ChainState.start(config)
    while True:
        if chain.t >= config.step_cap:
            trace.stop_reason = "step_cap"
            break
        try:
            decision = adapt_tokens(
                controller, backend, query_tokens, chain.t, chain.token_count, backend.remaining(chain.t)
            )
        except SessionStop as stop:
            trace.stop_reason = stop.reason
            break
        seg = decision.segment
        drop = False
        note = ""
        if (
            policy is not None
            and mode is Mode.DCOT
            and decision.verdict is not Verdict.PRUNE
            and not seg.is_answer
        ):
            features = ((seg.advantage, seg.gating_score), (decision.tau_ema, decision.tau_ema))
            if rng is not None:
                probs = haro.choice_probs(policy, features)
                chosen = 0 if rng.random() < probs[0] else 1
            else:
                chosen = 0 if haro.choice_logprob(policy, features, 0) >= haro.choice_logprob(policy, features, 1) else 1
            trace.choices.append(haro.Choice(features, chosen, haro.choice_logprob(policy, features, chosen)))
            if chosen == 1:
                drop, note = True, "policy skip"
        signals = None
        if decision.verdict is Verdict.SUMMARIZE and not drop and not seg.is_answer:
            model = signal_model if signal_model is not None else TinyMoE.from_config(config)
            signals = _signals_for(seg, model)
        appended = controller.commit(decision, signals, drop=drop)
        chain = expand_chain(chain, appended.tokens if appended is not None else None)
        refined = refine_step([appended], controller.buffer.retained[:-1]) if appended is not None else None
        level = ""
        if refined is not None:
            level = "answer" if appended.is_answer else ("macro" if refined.macro else "micro")
        trace.decisions.append(
            StepRecord(
                segment_id=seg.id,
                importance=seg.importance,
                tau_dyn=decision.tau_dyn,
                tau_ema=decision.tau_ema,
                partial_reward=seg.partial_reward,
                verdict=Verdict.PRUNE if drop else decision.verdict,
                retained=appended is not None,
                tokens_in=len(seg.tokens),
                tokens_out=len(appended.tokens) if appended is not None else 0,
                exception=decision.exception or note,
                level=level,
            )
        )
        trace.steps = list(controller.buffer.retained)
        trace.step_count = len(controller.buffer)
        trace.token_count = chain.token_count
        if seg.is_answer:
            trace.stop_reason = "answer"
            break
        if decision.budget_stop:
            trace.stop_reason = "budget"
            break
    trace.tau_history = list(controller.threshold.history)
    try:
        trace.assembled = assemble(controller.buffer.retained)
        trace.final_answer = trace.assembled.y_out
        trace.low_confidence = trace.assembled.low_confidence
    except NoAnswerError:
        trace.final_answer = ""
        trace.low_confidence = True


TRACE_FIELDS = (
    "task_id",
    "mode",
    "step_count",
    "token_count",
    "wall_time_ms",
    "final_answer",
    "low_confidence",
    "episode_reward",
    "direct",
    "stop_reason",
    "aborted",
    "error",
    "decisions",
    "steps",
)


def trace_record(trace, include_time=True):
    """Ordered dict form of a trace (field order as in ``TRACE_FIELDS``)."""
    rec = {}
    for name in TRACE_FIELDS:
        if name == "wall_time_ms" and not include_time:
            continue
        value = getattr(trace, name)
        if name == "mode":
            value = trace.mode.value
        elif name == "decisions":
            value = [d.as_dict() for d in trace.decisions]
        elif name == "steps":
            value = [
                {"id": s.id, "verdict": s.verdict.value if s.verdict else None, "level": s.level.value, "text": s.text}
                for s in trace.steps
            ]
        rec[name] = value
    return rec


def trace_line(trace, include_time=True):
    return json.dumps(trace_record(trace, include_time), ensure_ascii=False)
