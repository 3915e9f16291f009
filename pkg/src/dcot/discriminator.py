"""Entry gate: answer directly from a fact store or enter chain-of-thought.

Fact confidence is lexical BM25 (k1=1.2, b=0.75) squashed by
``s / (s + K_SAT)``.  Each fact is scored with the collection statistics as
they stood when the fact was added, so growing the store can only add
evidence and confidence never drops.
"""

import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

K1 = 1.2
B = 0.75
K_SAT = 2.0

DIRECT = "direct"
NEEDS_COT = "needs_cot"

_TERM = re.compile(r"[a-z0-9]+")
_STOPWORDS = frozenset(
    "what is the of a an and to by so we it then with for in on at as be this that which are "
    "find compute give evaluate".split()
)


def terms(text):
    return _TERM.findall(text.lower())


def normalize_question(text):
    return " ".join(text.lower().split()).rstrip("?.! ")


def bm25_idf(n_docs, df):
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def bm25_term(tf, idf, doc_len, avg_len, k1=K1, b=B):
    return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc_len / avg_len))


@dataclass(frozen=True)
class _Snapshot:
    n_docs: int
    avg_len: float
    idf: dict


class FactStore:
    """Append-only (question, answer) store with a BM25 index."""

    def __init__(self, facts=()):
        self.facts = []
        self.df = Counter()
        self.total_len = 0
        self._tf = []
        self._snapshots = []
        self._exact = {}
        for question, answer in facts:
            self._add(question, answer)

    def _add(self, question, answer):
        tf = Counter(terms(question))
        self.facts.append((question, answer))
        self._tf.append(tf)
        self.df.update(tf.keys())
        self.total_len += sum(tf.values())
        n = len(self.facts)
        self._snapshots.append(
            _Snapshot(n, self.total_len / n, {t: bm25_idf(n, self.df[t]) for t in tf})
        )
        self._exact.setdefault(normalize_question(question), len(self.facts) - 1)

    def added(self, question, answer):
        """A new store with one more fact."""
        return FactStore(self.facts + [(question, answer)])

    def __len__(self):
        return len(self.facts)

    @property
    def avg_len(self):
        return self.total_len / len(self.facts) if self.facts else 0.0

    def score(self, index, query):
        tf = self._tf[index]
        snap = self._snapshots[index]
        doc_len = sum(tf.values())
        if snap.avg_len == 0:
            return 0.0
        return sum(
            bm25_term(tf[t], snap.idf[t], doc_len, snap.avg_len) for t in set(terms(query)) if t in tf
        )

    def best(self, query):
        """(index, confidence) of the best-supported fact; (None, 0.0) if empty."""
        if not self.facts:
            return None, 0.0
        exact = self._exact.get(normalize_question(query))
        if exact is not None:
            return exact, 1.0
        scores = [self.score(i, query) for i in range(len(self.facts))]
        i = max(range(len(scores)), key=lambda j: (scores[j], -j))
        s = scores[i]
        return i, s / (s + K_SAT)


def load_facts(path):
    facts = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise ValueError(f"{path}:{lineno}: expected question<TAB>answer")
        question, answer = line.split("\t", 1)
        facts.append((question.strip(), answer.strip()))
    return FactStore(facts)


def fact_confidence(query, store):
    return store.best(query)[1]


def _is_operand(tok):
    return tok in (")", "]") or tok[0].isdigit() or (tok[0].isalpha() and tok.lower() not in _STOPWORDS)


def complexity_score(query):
    """Binary operators + max parenthesis depth + bracketed literals.

    Text with no numbers, operators, or brackets scores ``ceil(words / 10)``.
    """
    toks = re.findall(r"\d+(?:\.\d+)?(?:/\d+)?|[A-Za-z_]+|\S", query)
    if not any(t[0].isdigit() or t in "+-*/^()[]" for t in toks):
        return math.ceil(len(toks) / 10)
    ops = depth = max_depth = literals = bracket = 0
    prev = None
    for tok in toks:
        if tok in "+-*/^" and prev is not None and _is_operand(prev):
            ops += 1
        elif tok == "(":
            depth += 1
            max_depth = max(max_depth, depth)
        elif tok == ")":
            depth = max(depth - 1, 0)
        elif tok == "[":
            if bracket == 0:
                literals += 1
            bracket += 1
        elif tok == "]":
            bracket = max(bracket - 1, 0)
        prev = tok
    return ops + max_depth + literals


@dataclass(frozen=True)
class DiscriminatorVerdict:
    p_fact: float
    c_comp: int
    decision: str
    answer: str | None = None

    @property
    def direct(self):
        return self.decision == DIRECT


def decide(p_fact, c_comp, p_fact_min=0.85, c_comp_max=3):
    return DIRECT if p_fact >= p_fact_min and c_comp <= c_comp_max else NEEDS_COT


def discriminate(query, store, config):
    index, p_fact = store.best(query)
    c_comp = complexity_score(query)
    decision = decide(p_fact, c_comp, config.p_fact_min, config.c_comp_max)
    answer = store.facts[index][1] if decision == DIRECT else None
    return DiscriminatorVerdict(p_fact, c_comp, decision, answer)
