"""Scripted reasoning traces: the deterministic backend used as a test oracle.

File format, one record per line, tab separated::

    segment<TAB>text=...<TAB>importance=0.9<TAB>reward=0.8<TAB>flags=redundant<TAB>introduces=a,b<TAB>references=c
    answer<TAB>text=det = 1<TAB>importance=0.95<TAB>reward=1.0

Fields must appear in the order ``text, importance, reward, flags,
introduces, references``; the last three may be left out.  The only flag is
``redundant``.  Blank lines and lines starting with ``#`` are skipped.  The
final record must be the single ``answer`` record.
"""

from dataclasses import dataclass
from pathlib import Path

from .errors import TraceFormatError
from .tokenizer import tokenize
from .types import CoTSegment, Level

FIELD_ORDER = ("text", "importance", "reward", "flags", "introduces", "references")
REQUIRED = 3
KNOWN_FLAGS = {"redundant"}


@dataclass(frozen=True)
class SegmentSpec:
    text: str
    true_importance: float
    reward: float
    redundant: bool = False
    introduces: frozenset = frozenset()
    references: frozenset = frozenset()
    is_answer: bool = False


@dataclass(frozen=True)
class ScriptedTrace:
    segments: tuple
    name: str = ""

    def __post_init__(self):
        answers = [i for i, s in enumerate(self.segments) if s.is_answer]
        if len(answers) != 1:
            raise TraceFormatError(f"expected exactly one answer segment, found {len(answers)}")
        seen = set()
        for i, seg in enumerate(self.segments):
            missing = seg.references - seen
            if missing:
                raise TraceFormatError(f"segment {i} references undeclared {sorted(missing)}")
            seen |= seg.introduces
            for value, label in ((seg.true_importance, "importance"), (seg.reward, "reward")):
                if not 0.0 <= value <= 1.0:
                    raise TraceFormatError(f"segment {i}: {label} {value} outside [0,1]")

    def __len__(self):
        return len(self.segments)

    @property
    def answer(self):
        return next(s.text for s in self.segments if s.is_answer)

    def to_text(self):
        lines = []
        for s in self.segments:
            fields = [
                "answer" if s.is_answer else "segment",
                f"text={s.text}",
                f"importance={s.true_importance!r}",
                f"reward={s.reward!r}",
                f"flags={'redundant' if s.redundant else ''}",
                f"introduces={','.join(sorted(s.introduces))}",
                f"references={','.join(sorted(s.references))}",
            ]
            lines.append("\t".join(fields))
        return "\n".join(lines) + "\n"


def _idset(value):
    return frozenset(v.strip() for v in value.split(",") if v.strip())


def parse_trace(text, name=""):
    segments = []
    records = [
        (n, line) for n, line in enumerate(text.splitlines(), 1) if line.strip() and not line.lstrip().startswith("#")
    ]
    for lineno, line in records:
        kind, *parts = line.rstrip("\n").split("\t")
        if kind not in ("segment", "answer"):
            raise TraceFormatError(f"line {lineno}: unknown record kind {kind!r}")
        if len(parts) < REQUIRED or len(parts) > len(FIELD_ORDER):
            raise TraceFormatError(f"line {lineno}: expected {REQUIRED}-{len(FIELD_ORDER)} fields")
        values = {}
        for expected, part in zip(FIELD_ORDER, parts):
            key, sep, value = part.partition("=")
            if not sep or key not in FIELD_ORDER:
                raise TraceFormatError(f"line {lineno}: unknown field {key!r}")
            if key != expected:
                raise TraceFormatError(f"line {lineno}: field {key!r} out of order (expected {expected!r})")
            values[key] = value
        flags = _idset(values.get("flags", ""))
        if flags - KNOWN_FLAGS:
            raise TraceFormatError(f"line {lineno}: unknown flag(s) {sorted(flags - KNOWN_FLAGS)}")
        try:
            importance = float(values["importance"])
            reward = float(values["reward"])
        except ValueError:
            raise TraceFormatError(f"line {lineno}: importance and reward must be numbers") from None
        segments.append(
            SegmentSpec(
                text=values["text"],
                true_importance=importance,
                reward=reward,
                redundant="redundant" in flags,
                introduces=_idset(values.get("introduces", "")),
                references=_idset(values.get("references", "")),
                is_answer=kind == "answer",
            )
        )
    if segments and not segments[-1].is_answer:
        raise TraceFormatError("final record must be the answer")
    return ScriptedTrace(tuple(segments), name=name)


def load_trace(path):
    path = Path(path)
    return parse_trace(path.read_text(encoding="utf-8"), name=path.stem)


def scripted_step(trace, t, alpha=0.5):
    """Segment candidate ``t``: gating score is the scripted true importance."""
    if not 0 <= t < len(trace):
        raise IndexError(f"step {t} outside trace of length {len(trace)}")
    spec = trace.segments[t]
    seg = CoTSegment(
        id=t,
        tokens=tuple(tokenize(spec.text)),
        text=spec.text,
        gating_score=spec.true_importance,
        partial_reward=spec.reward,
        level=Level.ANSWER if spec.is_answer else Level.MICRO,
        introduces=spec.introduces,
        references=spec.references,
    )
    return seg.scored(0.5, alpha)
