"""Benchmark tasks, the suite file format, and worked-solution traces.

Suite files hold one task per line as tab-separated ``key=value`` fields::

    id=det-p1<TAB>kind=determinant<TAB>matrix=1 0;0 1
    id=scr-01<TAB>kind=scripted<TAB>trace=traces/scr01.trace<TAB>prompt=...

Keys: ``id`` and ``kind`` are required; ``prompt``, ``matrix``, ``vector``,
``vectors``, ``target``, ``expr`` and ``trace`` are optional.  Matrices are
rows separated by ``;`` with entries as rational literals ``p/q``.  Kinds:
arith_eval, determinant, rank, trace_identity, linear_combination, scripted.
Payloads are checked when a task runs, so one bad task does not stop a suite.
"""

import ast
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import oracles
from .errors import ShapeError, SuiteError
from .scripted import ScriptedTrace, SegmentSpec, load_trace

KINDS = ("arith_eval", "determinant", "rank", "trace_identity", "linear_combination", "scripted")
KEYS = ("id", "kind", "prompt", "matrix", "vector", "vectors", "target", "expr", "trace")
MAX_DIM = 4


def parse_matrix(text):
    rows = [r.split() for r in text.split(";") if r.strip()]
    m = [[oracles.parse_rational(x) for x in row] for row in rows]
    if m and any(len(r) != len(m[0]) for r in m):
        raise ShapeError("ragged matrix")
    if len(m) > MAX_DIM or (m and len(m[0]) > MAX_DIM):
        raise ShapeError(f"matrices are limited to {MAX_DIM}x{MAX_DIM}")
    return m


def parse_vector(text):
    return [oracles.parse_rational(x) for x in text.split()]


def format_matrix(m):
    return "[" + "; ".join(" ".join(oracles.format_rational(x) for x in row) for row in m) + "]"


@dataclass(frozen=True)
class Task:
    id: str
    kind: str
    prompt: str = ""
    payload: dict = field(default_factory=dict)
    base_dir: Path = None
    index: int = 0

    def matrix(self):
        return parse_matrix(self.payload["matrix"])

    def trace(self):
        if self.kind == "scripted":
            path = Path(self.payload["trace"])
            if not path.is_absolute() and self.base_dir is not None:
                path = self.base_dir / path
            return load_trace(path)
        return derive_trace(self)

    @property
    def query(self):
        return self.prompt or default_prompt(self)


def default_prompt(task):
    p = task.payload
    if task.kind == "arith_eval":
        return f"what is {p['expr']}"
    if task.kind == "determinant":
        return f"what is the determinant of {format_matrix(task.matrix())}"
    if task.kind == "rank":
        return f"what is the rank of {format_matrix(task.matrix())}"
    if task.kind == "trace_identity":
        return f"trace(A*x*x^T) for A = {p['matrix']} and x = {p['vector']}"
    if task.kind == "linear_combination":
        return f"combinations of {p['vectors']} giving {p['target']}"
    return task.id


def parse_suite(text, base_dir=None):
    tasks = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = {}
        for part in line.split("\t"):
            if not part.strip():
                continue
            key, sep, value = part.partition("=")
            key = key.strip()
            if not sep:
                raise SuiteError(f"expected key=value, got {part!r}", lineno)
            if key not in KEYS:
                raise SuiteError(f"unknown field {key!r}", lineno)
            if key in fields:
                raise SuiteError(f"duplicate field {key!r}", lineno)
            fields[key] = value.strip()
        for key in ("id", "kind"):
            if not fields.get(key):
                raise SuiteError(f"missing {key}", lineno)
        if fields["kind"] not in KINDS:
            raise SuiteError(f"unknown kind {fields['kind']!r}", lineno)
        if fields["id"] in seen:
            raise SuiteError(f"duplicate task id {fields['id']!r}", lineno)
        seen.add(fields["id"])
        payload = {k: v for k, v in fields.items() if k not in ("id", "kind", "prompt")}
        tasks.append(
            Task(fields["id"], fields["kind"], fields.get("prompt", ""), payload, base_dir, len(tasks))
        )
    return tasks


def load_suite(path):
    path = Path(path)
    return parse_suite(path.read_text(encoding="utf-8"), base_dir=path.parent)


def default_suite_path():
    return Path(str(resources.files("dcot") / "data" / "default_suite.txt"))


def scripted_suite_path():
    return Path(str(resources.files("dcot") / "data" / "scripted_suite.txt"))


def default_facts_path():
    return Path(str(resources.files("dcot") / "data" / "facts.tsv"))


_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}


def eval_exact(expr):
    """Evaluate + - * / ^ and parentheses over rationals."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
            return Fraction(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
            base, exp = ev(node.left), ev(node.right)
            if exp.denominator != 1 or abs(exp) > 64:
                raise ValueError("exponent must be a small integer")
            return base ** int(exp)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ValueError(f"unsupported expression element {ast.dump(node)[:40]}")

    try:
        tree = ast.parse(expr.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {expr!r}") from exc
    return ev(tree)


def oracle_answer(task):
    """Canonical answer string computed by the exact oracles."""
    p = task.payload
    if task.kind == "arith_eval":
        return oracles.format_rational(eval_exact(p["expr"]))
    if task.kind == "determinant":
        return oracles.format_rational(oracles.det(task.matrix()))
    if task.kind == "rank":
        return str(oracles.rank(task.matrix()))
    if task.kind == "trace_identity":
        check = oracles.trace_identity_check(task.matrix(), parse_vector(p["vector"]))
        if not check.equal:
            raise ArithmeticError("trace identity failed")
        return oracles.format_rational(check.value)
    if task.kind == "linear_combination":
        vectors = parse_matrix(p["vectors"])
        return oracles.format_combination(oracles.solve_combination(vectors, parse_vector(p["target"])))
    if task.kind == "scripted":
        return task.trace().answer
    raise ValueError(f"unknown task kind {task.kind!r}")


# Worked-solution traces for computed kinds.  Restatements and re-checks are
# the redundant steps; they carry low importance and reward by construction.

_KEY = (0.9, 0.8)
_ANS = (0.95, 1.0)


def _seg(text, kind="key", introduces=(), references=()):
    imp, rew = {"key": _KEY, "weak": (0.15, 0.1), "ans": _ANS}[kind]
    return SegmentSpec(
        text=text,
        true_importance=imp,
        reward=rew,
        redundant=kind == "weak",
        introduces=frozenset(introduces),
        references=frozenset(references),
        is_answer=kind == "ans",
    )


def _elimination_pivots(m):
    a = [row[:] for row in m]
    n = len(a)
    sign, pivots = 1, []
    for k in range(n):
        p = next((i for i in range(k, n) if a[i][k] != 0), None)
        if p is None:
            return sign, pivots, False
        if p != k:
            a[k], a[p] = a[p], a[k]
            sign = -sign
        pivots.append(a[k][k])
        for i in range(k + 1, n):
            f = a[i][k] / a[k][k]
            a[i] = [x - f * y for x, y in zip(a[i], a[k])]
    return sign, pivots, True


def _fmt(q):
    return oracles.format_rational(q)


def derive_trace(task):
    p = task.payload
    answer = oracle_answer(task)
    if task.kind == "arith_eval":
        expr = p["expr"]
        segs = [
            _seg(f"restate: we must evaluate the expression {expr} here", "weak"),
            _seg(f"evaluate {expr} in order", introduces=["v"]),
            _seg(f"check again: {expr} gives the same value", "weak"),
            _seg(f"answer = {answer}", "ans", references=["v"]),
        ]
    elif task.kind == "determinant":
        m = task.matrix()
        sign, pivots, full = _elimination_pivots(m)
        segs = [
            _seg(f"restate: the problem gives the matrix {format_matrix(m)} and we must find the det", "weak"),
            _seg("eliminate below each pivot with row operations", introduces=["u"]),
        ]
        if full:
            segs.append(_seg(f"pivots = ({', '.join(_fmt(x) for x in pivots)}), row swap sign {sign}", references=["u"]))
            segs.append(_seg("note: det of a triangular matrix is the product of the diagonal entries", "weak"))
            segs.append(_seg(f"det = {sign} * product of pivots", references=["u"]))
        else:
            segs.append(_seg("a column has no pivot, so the matrix is singular", references=["u"]))
            segs.append(_seg("recall: a singular matrix has zero det", "weak"))
        segs.append(_seg(f"det = {answer}", "ans"))
    elif task.kind == "rank":
        m = task.matrix()
        red, pivots = oracles.rref(m)
        segs = [
            _seg(f"restate: we must find the rank of the given matrix {format_matrix(m)}", "weak"),
            _seg("reduce to row echelon form", introduces=["r"]),
            _seg(f"pivot columns: {', '.join(str(c + 1) for c in pivots) or 'none'}", references=["r"]),
            _seg("recall: the rank is the number of pivots in the echelon form", "weak"),
            _seg(f"rank = {answer}", "ans"),
        ]
    elif task.kind == "trace_identity":
        segs = [
            _seg("restate: we must compare trace(A*x*x^T), trace(x*x^T*A) and x^T*A*x here", "weak"),
            _seg("cyclic property: trace(A*x*x^T) = trace(x^T*A*x) = x^T*A*x", introduces=["c"]),
            _seg("cost order n^2: y = A^T*x then x.y", references=["c"]),
            _seg("check again: the three values are the same scalar", "weak"),
            _seg(f"trace = {answer}", "ans"),
        ]
    elif task.kind == "linear_combination":
        vectors = parse_matrix(p["vectors"])
        sol = oracles.solve_combination(vectors, parse_vector(p["target"]))
        segs = [
            _seg(f"restate: we must write {p['target']} as a linear combination of the given vectors", "weak"),
            _seg("form the matrix with the vectors as columns and reduce", introduces=["e"]),
        ]
        if sol.consistent:
            segs.append(_seg(f"particular solution {oracles.format_vector(sol.particular)}", references=["e"]))
            segs.append(_seg(f"nullspace basis count {len(sol.nullspace)}", references=["e"]))
        else:
            segs.append(_seg("a pivot lands in the target column", references=["e"]))
        segs.append(_seg("recall: the general solution is particular plus nullspace", "weak"))
        segs.append(_seg(f"x = {answer}", "ans"))
    else:
        raise ValueError(f"no derived trace for kind {task.kind!r}")
    return ScriptedTrace(tuple(segs), name=task.id)
