"""Exact answers for the linear algebra exam problems used as tasks."""

from fractions import Fraction

from dcot import oracles

a = oracles.problem1_matrix()
print("A = L U L^-1 U^-1")
for row in a:
    print("   ", [oracles.format_rational(x) for x in row])
print("det(A) =", oracles.det(a), "  det(U) =", oracles.det(oracles.PROBLEM1_U))

q = oracles.problem3_matrix()
print("rank of [q1, 2 q2, 3 q1 + 4 q2] =", oracles.rank(q))

check = oracles.trace_identity_check([[1, 2], [3, 4]], [Fraction(1, 2), -1])
print("trace(A x x^T) = trace(x x^T A) = x^T A x =", check.value, check.equal)

sol = oracles.solve_combination(oracles.PROBLEM5_VECTORS, oracles.PROBLEM5_TARGET)
print("coefficients:", oracles.format_combination(sol))
for t in (0, 1, 2):
    c = sol.evaluate([t])
    combo = [sum(ci * v[k] for ci, v in zip(c, oracles.PROBLEM5_VECTORS)) for k in range(3)]
    print(f"  t1={t}: {oracles.format_vector(c)} -> {oracles.format_vector(combo)}")
