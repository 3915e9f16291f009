"""Exact rational linear algebra for task oracles.

Matrices are lists of rows of :class:`fractions.Fraction`.  Nothing here
touches floating point.
"""

from dataclasses import dataclass
from fractions import Fraction

from .errors import ShapeError

Rational = Fraction


def parse_rational(text):
    """``"p/q"``, ``"-3"`` or ``"0.5"`` to a reduced Fraction."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a rational literal: {text!r}") from None


def format_rational(q):
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def as_matrix(rows):
    m = [[Fraction(x) for x in row] for row in rows]
    if m and any(len(r) != len(m[0]) for r in m):
        raise ShapeError("ragged matrix")
    return m


def shape(m):
    return (len(m), len(m[0]) if m else 0)


def matmul(a, b):
    if shape(a)[1] != shape(b)[0]:
        raise ShapeError(f"cannot multiply {shape(a)} by {shape(b)}")
    cols = list(zip(*b))
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in cols] for row in a]


def transpose(m):
    return [list(col) for col in zip(*m)]


def identity(n):
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def det(m):
    """Fraction-free Bareiss elimination."""
    m = as_matrix(m)
    n, c = shape(m)
    if n != c:
        raise ShapeError(f"determinant of non-square {n}x{c} matrix")
    if n == 0:
        return Fraction(1)
    a = [row[:] for row in m]
    sign = 1
    prev = Fraction(1)
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return Fraction(0)
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev
            a[i][k] = Fraction(0)
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def rref(m):
    """Reduced row echelon form and pivot columns."""
    a = [row[:] for row in as_matrix(m)]
    rows, cols = shape(a)
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        lead = a[r][c]
        a[r] = [x / lead for x in a[r]]
        for i in range(rows):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(m):
    return len(rref(m)[1]) if m else 0


def inverse(m):
    n, c = shape(m)
    if n != c:
        raise ShapeError("inverse of non-square matrix")
    aug = [list(row) + id_row for row, id_row in zip(as_matrix(m), identity(n))]
    red, pivots = rref(aug)
    if pivots[:n] != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in red]


@dataclass(frozen=True)
class TraceIdentity:
    equal: bool
    value: Fraction
    trace_axxt: Fraction
    trace_xxta: Fraction
    quadratic: Fraction
    two_pass: Fraction


def trace_identity_check(a, x):
    """trace(A x x^T), trace(x x^T A) and x^T A x, plus a two-pass x^T A x."""
    a = as_matrix(a)
    x = [Fraction(v) for v in x]
    n = len(x)
    if shape(a) != (n, n):
        raise ShapeError(f"A is {shape(a)} but x has {n} entries")
    col = [[v] for v in x]
    outer = matmul(col, [x])
    t1 = sum((r[i] for i, r in enumerate(matmul(a, outer))), Fraction(0))
    t2 = sum((r[i] for i, r in enumerate(matmul(outer, a))), Fraction(0))
    quad = matmul(matmul([x], a), col)[0][0]
    # O(n^2): y = A^T x, then x . y
    y = [sum((a[i][j] * x[i] for i in range(n)), Fraction(0)) for j in range(n)]
    two_pass = sum((xi * yi for xi, yi in zip(x, y)), Fraction(0))
    equal = t1 == t2 == quad == two_pass
    return TraceIdentity(equal, quad, t1, t2, quad, two_pass)


@dataclass(frozen=True)
class CombinationSolution:
    consistent: bool
    particular: tuple = ()
    nullspace: tuple = ()

    def evaluate(self, params):
        """Coefficient vector for a choice of free parameters."""
        coeffs = list(self.particular)
        for t, basis in zip(params, self.nullspace):
            coeffs = [c + Fraction(t) * b for c, b in zip(coeffs, basis)]
        return coeffs


def solve_combination(vectors, target):
    """All coefficient vectors c with sum c_i a_i = target."""
    vectors = [[Fraction(v) for v in vec] for vec in vectors]
    target = [Fraction(v) for v in target]
    if not vectors:
        return CombinationSolution(all(t == 0 for t in target))
    dim = len(target)
    if any(len(v) != dim for v in vectors):
        raise ShapeError("vectors and target differ in length")
    k = len(vectors)
    aug = [[vectors[j][i] for j in range(k)] + [target[i]] for i in range(dim)]
    red, pivots = rref(aug)
    if k in pivots:
        return CombinationSolution(False)
    particular = [Fraction(0)] * k
    for row, c in enumerate(pivots):
        particular[c] = red[row][k]
    free = [c for c in range(k) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * k
        v[f] = Fraction(1)
        for row, c in enumerate(pivots):
            v[c] = -red[row][f]
        basis.append(tuple(v))
    return CombinationSolution(True, tuple(particular), tuple(basis))


def format_vector(v):
    return "(" + ", ".join(format_rational(x) for x in v) + ")"


def format_combination(sol):
    if not sol.consistent:
        return "inconsistent"
    parts = [format_vector(sol.particular)]
    for i, b in enumerate(sol.nullspace, 1):
        parts.append(f"t{i}*{format_vector(b)}")
    return " + ".join(parts)


# Worked problems from a linear algebra exam
PROBLEM1_L = as_matrix([[1, 0, 0, 0], [-1, 1, 0, 0], [0, 3, 1, 0], [1, 0, 0, 1]])
PROBLEM1_U = as_matrix([[2, 0, 1, 1], [0, -1, 0, -1], [0, 0, -2, 1], [0, 0, 0, 1]])


def problem1_matrix():
    """A = L U L^-1 U^-1."""
    l, u = PROBLEM1_L, PROBLEM1_U
    return matmul(matmul(matmul(l, u), inverse(l)), inverse(u))


_H = Fraction(1, 2)
PROBLEM3_Q1 = [_H, _H, -_H, -_H]
PROBLEM3_Q2 = [_H, -_H, -_H, _H]


def problem3_matrix():
    """4x3 matrix with columns (q1, 2 q2, 3 q1 + 4 q2)."""
    q1, q2 = PROBLEM3_Q1, PROBLEM3_Q2
    cols = [q1, [2 * v for v in q2], [3 * a + 4 * b for a, b in zip(q1, q2)]]
    return transpose(cols)


PROBLEM5_VECTORS = [[1, 0, 2], [1, 2, 4], [1, -1, 3], [1, 1, 1]]
PROBLEM5_TARGET = [4, -1, 5]
