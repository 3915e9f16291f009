"""Domain records passed between the controller, decoder, and assembly."""

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum


class Level(str, Enum):
    MACRO = "macro"
    MICRO = "micro"
    ANSWER = "answer"


class Verdict(str, Enum):
    KEEP = "keep"
    SUMMARIZE = "summarize"
    PRUNE = "prune"


class Mode(str, Enum):
    DCOT = "dcot"
    BASELINE = "long_cot_baseline"


def mix_importance(alpha, advantage, gating_score):
    return alpha * advantage + (1.0 - alpha) * gating_score


@dataclass(frozen=True)
class CoTSegment:
    """One reasoning step.

    ``importance`` is always ``alpha * advantage + (1 - alpha) * gating_score``;
    use :meth:`scored` rather than setting it by hand.
    """

    id: int
    tokens: tuple
    text: str
    importance: float = 0.0
    advantage: float = 0.5
    gating_score: float = 0.0
    partial_reward: float = 0.0
    level: Level = Level.MICRO
    verdict: Verdict | None = None
    introduces: frozenset = frozenset()
    references: frozenset = frozenset()
    token_signals: tuple = ()
    summarized: bool = False
    alpha: float = 0.5

    def scored(self, advantage, alpha=None):
        alpha = self.alpha if alpha is None else alpha
        return replace(
            self,
            advantage=advantage,
            alpha=alpha,
            importance=mix_importance(alpha, advantage, self.gating_score),
        )

    def recomputed_importance(self):
        return mix_importance(self.alpha, self.advantage, self.gating_score)

    @property
    def is_answer(self):
        return self.level is Level.ANSWER

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class ThresholdState:
    """EMA threshold history; owned by one session."""

    tau: float
    window_n: int
    indicator_window: deque = None
    r_bar: float = 0.0
    step: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.indicator_window is None:
            self.indicator_window = deque(maxlen=self.window_n)
        if not self.history:
            self.history = [self.tau]


@dataclass(frozen=True)
class StepRecord:
    """Per-segment decision log entry."""

    segment_id: int
    importance: float
    tau_dyn: float
    tau_ema: float
    partial_reward: float
    verdict: Verdict
    retained: bool
    tokens_in: int
    tokens_out: int
    exception: str = ""
    level: str = ""

    def as_dict(self):
        return {
            "id": self.segment_id,
            "importance": self.importance,
            "tau_dyn": self.tau_dyn,
            "tau_ema": self.tau_ema,
            "reward": self.partial_reward,
            "verdict": self.verdict.value,
            "retained": self.retained,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
            "exception": self.exception,
            "level": self.level,
        }


@dataclass
class SessionTrace:
    task_id: str
    mode: Mode
    steps: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    token_count: int = 0
    step_count: int = 0
    wall_time_ms: float = 0.0
    final_answer: str = ""
    low_confidence: bool = False
    episode_reward: float = 0.0
    direct: bool = False
    stop_reason: str = ""
    aborted: bool = False
    error: str = ""
    assembled: object = None
    choices: list = field(default_factory=list)
    tau_history: list = field(default_factory=list)
