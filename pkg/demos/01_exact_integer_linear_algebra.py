"""Exact integer matrix forms: Smith, Hermite, and solving.

Everything is computed over Python's arbitrary-precision integers; there is
no floating point anywhere, so the factorizations below are exact witnesses,
not approximations.
"""

from efgroups.zlinalg import IntMatrix, hnf, snf, solve_linear

m = IntMatrix([[4, 6, 2], [6, 12, 6], [2, 6, 12]])
print("M =", m)

dec = snf(m)
print("Smith form D =", dec.D)
print("U M V == D:", dec.U @ m @ dec.V == dec.D)
print("det U, det V:", dec.U.det(), dec.V.det())
print("diagonal:", dec.diagonal(), "(each entry divides the next)")

h, u = hnf(m)
print("\nHermite form H =", h)
print("U M == H:", u @ m == h)

# Integer linear systems: an exact solution or a definite refusal.
print("\nsolve 2x = 4, 3y = 9:", solve_linear(IntMatrix([[2, 0], [0, 3]]), (4, 9)))
print("solve 2x = 3:", solve_linear(IntMatrix([[2]]), (3,)))

# Divisibility chains survive huge entries: powers of two stack up exactly.
big = IntMatrix([[2 ** 40, 1], [0, 2 ** 40]])
print("\nlarge-entry Smith diagonal:", snf(big).diagonal())
