"""Macro/micro split, reward ranking, contextual merge, and answer extraction."""

import math
from dataclasses import dataclass

from .errors import NoAnswerError
from .types import Level

MACRO_QUANTILE = 0.75


def nearest_rank(values, q=MACRO_QUANTILE):
    """Value at 1-based rank ``floor(q * n) + 1`` of the ascending sort.

    For q = 0.75 and four values this is the largest one: three quarters of
    the sample lie strictly below the cut.
    """
    ordered = sorted(values)
    rank = min(len(ordered), math.floor(q * len(ordered)) + 1)
    return ordered[rank - 1]


def assemble_split(segments):
    """Split retained segments into (macro, micro), both in generation order."""
    segments = list(segments)
    if not segments:
        return [], []
    cut = nearest_rank([s.importance for s in segments])
    macro, micro = [], []
    for s in segments:
        if s.is_answer:
            macro.append(s)
        elif s.importance >= cut:
            macro.append(s.with_(level=Level.MACRO))
        else:
            micro.append(s.with_(level=Level.MICRO))
    return macro, micro


def attach_parents(c_macro, c_micro):
    """Micro id -> id of the nearest preceding non-answer macro (or the first one)."""
    anchors = sorted((m for m in c_macro if not m.is_answer), key=lambda m: m.id)
    parents = {}
    for u in c_micro:
        before = [m.id for m in anchors if m.id < u.id]
        parents[u.id] = before[-1] if before else (anchors[0].id if anchors else None)
    return parents


def reward_map(c_macro, c_micro=(), parents=None):
    """Macro id -> rank (1 = best) by descending cumulative partial reward.

    A macro's cumulative reward is its own plus that of its attached micro
    segments.  Ties keep generation order.
    """
    parents = attach_parents(c_macro, c_micro) if parents is None else parents
    totals = {m.id: m.partial_reward for m in c_macro}
    for u in c_micro:
        p = parents.get(u.id)
        if p in totals:
            totals[p] += u.partial_reward
    order = sorted(c_macro, key=lambda m: (-totals[m.id], m.id))
    return {m.id: rank for rank, m in enumerate(order, 1)}


def refine(c_macro, c_micro, ranking, parents=None):
    """Macros by rank, each followed by its micro segments; answers last."""
    parents = attach_parents(c_macro, c_micro) if parents is None else parents
    body = sorted((m for m in c_macro if not m.is_answer), key=lambda m: (ranking.get(m.id, math.inf), m.id))
    answers = sorted((m for m in c_macro if m.is_answer), key=lambda m: m.id)
    children = {}
    orphans = []
    for u in sorted(c_micro, key=lambda u: u.id):
        p = parents.get(u.id)
        if p is None:
            orphans.append(u)
        else:
            children.setdefault(p, []).append(u)
    out = []
    for m in body:
        out.append(m)
        out.extend(children.get(m.id, ()))
    return out + orphans + answers


@dataclass(frozen=True)
class Answer:
    text: str
    low_confidence: bool = False


def output_answer(c_final):
    if not c_final:
        raise NoAnswerError("assembled chain is empty")
    for s in reversed(c_final):
        if s.is_answer:
            return Answer(s.text)
    macros = [s for s in c_final if s.level is Level.MACRO]
    last = macros[-1] if macros else c_final[-1]
    return Answer(last.text, low_confidence=True)


@dataclass(frozen=True)
class AssembledChain:
    c_macro: tuple
    c_micro: tuple
    reward_map: dict
    parents: dict
    c_final: tuple
    y_out: str
    low_confidence: bool = False

    def render(self):
        """Human-readable outline: macro headers, indented micro lines, answer."""
        lines = []
        for s in self.c_final:
            flat = " ".join(s.text.split())
            if s.is_answer:
                continue
            if s.level is Level.MACRO:
                lines.append(f"[{self.reward_map.get(s.id, '-')}] {flat}")
            else:
                lines.append(f"    - {flat}")
        suffix = " (low confidence)" if self.low_confidence else ""
        lines.append(f"=> {self.y_out}{suffix}")
        return "\n".join(lines)


def assemble(segments):
    c_macro, c_micro = assemble_split(segments)
    parents = attach_parents(c_macro, c_micro)
    ranking = reward_map(c_macro, c_micro, parents)
    c_final = refine(c_macro, c_micro, ranking, parents)
    answer = output_answer(c_final)
    return AssembledChain(
        tuple(c_macro), tuple(c_micro), ranking, parents, tuple(c_final), answer.text, answer.low_confidence
    )
