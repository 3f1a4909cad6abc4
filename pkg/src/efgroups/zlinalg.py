"""Exact linear algebra over the integers.

Everything here works with arbitrary-precision Python ints; there is no
floating point and no overflow anywhere.  The three workhorses are

* ``snf``   -- Smith normal form U*M*V = D with unimodular U, V,
* ``hnf``   -- row Hermite normal form U*M = H with unimodular U,
* ``solve_linear`` -- integer solutions of M*x = b, or None.

Matrices are immutable ``IntMatrix`` values (tuples of tuples), so they can
be hashed, shared between threads and used as dict keys.  Pivot selection is
deterministic (smallest absolute value, ties by lowest index), which keeps
every downstream computation reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence


class DimensionError(ValueError):
    """Raised when matrix/vector dimensions are incompatible."""


def _as_int(x) -> int:
    if isinstance(x, bool):
        raise TypeError("booleans are not matrix entries")
    if isinstance(x, int):
        return x
    # Accept numpy integer scalars and similar exact integral types.
    if hasattr(x, "__index__"):
        return x.__index__()
    raise TypeError(f"matrix entries must be integers, got {x!r}")


class IntMatrix:
    """A dense integer matrix with exact entries, stored row-major."""

    __slots__ = ("data",)

    def __init__(self, rows: Iterable[Iterable[int]]):
        data = tuple(tuple(_as_int(x) for x in row) for row in rows)
        if data:
            width = len(data[0])
            for row in data:
                if len(row) != width:
                    raise DimensionError("ragged rows")
        self.data = data

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "IntMatrix":
        return cls([[0] * cols for _ in range(rows)])

    @classmethod
    def diagonal(cls, entries: Sequence[int], rows: int = None, cols: int = None) -> "IntMatrix":
        n = len(entries)
        r = n if rows is None else rows
        c = n if cols is None else cols
        m = [[0] * c for _ in range(r)]
        for i, e in enumerate(entries):
            m[i][i] = _as_int(e)
        return cls(m)

    @classmethod
    def row_vector(cls, entries: Sequence[int]) -> "IntMatrix":
        return cls([list(entries)])

    # -- basic queries -----------------------------------------------------

    @property
    def rows(self) -> int:
        return len(self.data)

    @property
    def cols(self) -> int:
        return len(self.data[0]) if self.data else 0

    def __getitem__(self, idx):
        i, j = idx
        return self.data[i][j]

    def row(self, i: int) -> tuple:
        return self.data[i]

    def column(self, j: int) -> tuple:
        return tuple(r[j] for r in self.data)

    def __eq__(self, other):
        if not isinstance(other, IntMatrix):
            return NotImplemented
        return self.data == other.data and self.cols == other.cols

    def __hash__(self):
        return hash((self.data, self.cols))

    def __repr__(self):
        return f"IntMatrix({[list(r) for r in self.data]!r})"

    def is_zero(self) -> bool:
        return all(x == 0 for row in self.data for x in row)

    # -- arithmetic --------------------------------------------------------

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        ocols = other.cols
        odata = other.data
        out = []
        for arow in self.data:
            row = [0] * ocols
            for k, a in enumerate(arow):
                if a:
                    brow = odata[k]
                    for j in range(ocols):
                        if brow[j]:
                            row[j] += a * brow[j]
            out.append(row)
        return IntMatrix(out)

    def __neg__(self) -> "IntMatrix":
        return IntMatrix([[-x for x in row] for row in self.data])

    def transpose(self) -> "IntMatrix":
        return IntMatrix(zip(*self.data)) if self.data else IntMatrix([])

    def apply(self, vec: Sequence[int]) -> tuple:
        """Matrix times column vector."""
        if len(vec) != self.cols:
            raise DimensionError("vector length does not match column count")
        return tuple(sum(a * v for a, v in zip(row, vec)) for row in self.data)

    def left_apply(self, vec: Sequence[int]) -> tuple:
        """Row vector times matrix."""
        if len(vec) != self.rows:
            raise DimensionError("vector length does not match row count")
        out = [0] * self.cols
        for c, row in zip(vec, self.data):
            if c:
                for j, x in enumerate(row):
                    if x:
                        out[j] += c * x
        return tuple(out)

    def vstack(self, other: "IntMatrix") -> "IntMatrix":
        if self.rows and other.rows and self.cols != other.cols:
            raise DimensionError("column counts differ")
        return IntMatrix(list(self.data) + list(other.data))

    def det(self) -> int:
        """Determinant by fraction-free (Bareiss) elimination."""
        if self.rows != self.cols:
            raise DimensionError("determinant of a non-square matrix")
        n = self.rows
        if n == 0:
            return 1
        m = [list(r) for r in self.data]
        sign = 1
        prev = 1
        for k in range(n - 1):
            if m[k][k] == 0:
                for i in range(k + 1, n):
                    if m[i][k] != 0:
                        m[k], m[i] = m[i], m[k]
                        sign = -sign
                        break
                else:
                    return 0
            for i in range(k + 1, n):
                for j in range(k + 1, n):
                    m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
                m[i][k] = 0
            prev = m[k][k]
        return sign * m[n - 1][n - 1]

    def is_unimodular(self) -> bool:
        return self.rows == self.cols and self.det() in (1, -1)


@dataclass(frozen=True)
class SNFDecomposition:
    """Smith normal form: U @ M @ V == D with U, V unimodular.

    The diagonal of D is nonnegative, divisibility-ordered (d1 | d2 | ...)
    and has its zeros last.
    """

    U: IntMatrix
    D: IntMatrix
    V: IntMatrix

    def diagonal(self) -> tuple:
        n = min(self.D.rows, self.D.cols)
        return tuple(self.D[i, i] for i in range(n))


def _pivot(m, t, rows, cols):
    """Position of the smallest nonzero |entry| in the trailing block, ties by index."""
    best = None
    best_abs = None
    for i in range(t, rows):
        row = m[i]
        for j in range(t, cols):
            x = row[j]
            if x:
                a = -x if x < 0 else x
                if best is None or a < best_abs:
                    best, best_abs = (i, j), a
                    if a == 1:
                        return best
    return best


def snf(m: IntMatrix) -> SNFDecomposition:
    """Smith normal form with transform matrices.

    Deterministic: the pivot is always the smallest nonzero absolute value in
    the remaining block, with ties broken by lowest (row, column) index.
    """
    rows, cols = m.rows, m.cols
    d = [list(r) for r in m.data]
    u = [[1 if i == j else 0 for j in range(rows)] for i in range(rows)]
    v = [[1 if i == j else 0 for j in range(cols)] for i in range(cols)]

    t = 0
    limit = min(rows, cols)
    while t < limit:
        piv = _pivot(d, t, rows, cols)
        if piv is None:
            break
        pi, pj = piv
        if pi != t:
            d[t], d[pi] = d[pi], d[t]
            u[t], u[pi] = u[pi], u[t]
        if pj != t:
            for r in d:
                r[t], r[pj] = r[pj], r[t]
            for r in v:
                r[t], r[pj] = r[pj], r[t]

        while True:
            # Clear column t with row operations.
            dirty = False
            for i in range(rows):
                if i != t and d[i][t]:
                    q = d[i][t] // d[t][t]
                    if q:
                        di, dt, ui, ut = d[i], d[t], u[i], u[t]
                        for j in range(cols):
                            di[j] -= q * dt[j]
                        for j in range(rows):
                            ui[j] -= q * ut[j]
                    if d[i][t]:
                        dirty = True
            if dirty:
                # Some remainder survived; move the smallest one up as pivot.
                best = None
                for i in range(rows):
                    if i != t and d[i][t]:
                        if best is None or abs(d[i][t]) < abs(d[best][t]):
                            best = i
                d[t], d[best] = d[best], d[t]
                u[t], u[best] = u[best], u[t]
                continue
            # Clear row t with column operations.
            dirty = False
            for j in range(cols):
                if j != t and d[t][j]:
                    q = d[t][j] // d[t][t]
                    if q:
                        for r in d:
                            r[j] -= q * r[t]
                        for r in v:
                            r[j] -= q * r[t]
                    if d[t][j]:
                        dirty = True
            if dirty:
                best = None
                for j in range(cols):
                    if j != t and d[t][j]:
                        if best is None or abs(d[t][j]) < abs(d[t][best]):
                            best = j
                for r in d:
                    r[t], r[best] = r[best], r[t]
                for r in v:
                    r[t], r[best] = r[best], r[t]
                continue
            break

        # Divisibility sweep: the pivot must divide the whole trailing block.
        p = d[t][t]
        offender = None
        for i in range(t + 1, rows):
            row = d[i]
            for j in range(t + 1, cols):
                if row[j] % p:
                    offender = i
                    break
            if offender is not None:
                break
        if offender is not None:
            di, ui = d[offender], u[offender]
            dt, ut = d[t], u[t]
            for j in range(cols):
                dt[j] += di[j]
            for j in range(rows):
                ut[j] += ui[j]
            continue  # re-reduce at the same t; |pivot| strictly shrinks
        t += 1

    for i in range(limit):
        if d[i][i] < 0:
            d[i] = [-x for x in d[i]]
            u[i] = [-x for x in u[i]]

    return SNFDecomposition(IntMatrix(u), IntMatrix(d), IntMatrix(v))


def hnf(m: IntMatrix) -> tuple:
    """Row Hermite normal form.

    Returns (H, U) with U unimodular, U @ M = H, H in row-echelon form with
    positive pivots and entries above each pivot reduced into [0, pivot).
    """
    rows, cols = m.rows, m.cols
    h = [list(r) for r in m.data]
    u = [[1 if i == j else 0 for j in range(rows)] for i in range(rows)]

    r = 0
    for c in range(cols):
        if r >= rows:
            break
        # Reduce the entries of column c in rows >= r down to a single one.
        while True:
            nz = [i for i in range(r, rows) if h[i][c]]
            if len(nz) <= 1:
                break
            best = min(nz, key=lambda i: (abs(h[i][c]), i))
            if best != r:
                h[r], h[best] = h[best], h[r]
                u[r], u[best] = u[best], u[r]
            for i in range(r + 1, rows):
                if not h[i][c]:
                    continue
                q = h[i][c] // h[r][c]
                if q:
                    hi, hr, ui, ur = h[i], h[r], u[i], u[r]
                    for j in range(cols):
                        hi[j] -= q * hr[j]
                    for j in range(rows):
                        ui[j] -= q * ur[j]
        nz = [i for i in range(r, rows) if h[i][c]]
        if not nz:
            continue
        if nz[0] != r:
            h[r], h[nz[0]] = h[nz[0]], h[r]
            u[r], u[nz[0]] = u[nz[0]], u[r]
        if h[r][c] < 0:
            h[r] = [-x for x in h[r]]
            u[r] = [-x for x in u[r]]
        for i in range(r):
            q = h[i][c] // h[r][c]
            if q:
                hi, hr, ui, ur = h[i], h[r], u[i], u[r]
                for j in range(cols):
                    hi[j] -= q * hr[j]
                for j in range(rows):
                    ui[j] -= q * ur[j]
        r += 1

    return IntMatrix(h), IntMatrix(u)


def solve_linear(m: IntMatrix, b: Sequence[int]) -> Optional[tuple]:
    """One integer solution of M @ x = b, or None when none exists."""
    if len(b) != m.rows:
        raise DimensionError(f"right-hand side has length {len(b)}, expected {m.rows}")
    dec = snf(m)
    c = dec.U.apply([_as_int(x) for x in b])
    y = [0] * m.cols
    k = min(m.rows, m.cols)
    for i in range(m.rows):
        di = dec.D[i, i] if i < k else 0
        if di:
            if c[i] % di:
                return None
            y[i] = c[i] // di
        elif c[i]:
            return None
    return dec.V.apply(y)


def left_kernel(m: IntMatrix) -> IntMatrix:
    """Basis (as rows, in HNF) of {v : v @ M = 0}."""
    h, u = hnf(m)
    zero_rows = [u.row(i) for i in range(m.rows) if all(x == 0 for x in h.row(i))]
    if not zero_rows:
        return IntMatrix.zeros(0, m.rows)
    canon, _ = hnf(IntMatrix(zero_rows))
    keep = [r for r in canon.data if any(r)]
    return IntMatrix(keep) if keep else IntMatrix.zeros(0, m.rows)


def row_span_contains(m: IntMatrix, vec: Sequence[int]) -> bool:
    """Whether vec lies in the integer row span of m."""
    if m.rows == 0:
        return all(x == 0 for x in vec)
    return solve_linear(m.transpose(), vec) is not None


def express_in_rows(m: IntMatrix, vec: Sequence[int]) -> Optional[tuple]:
    """Coefficients c with c @ M = vec, or None."""
    if m.rows == 0:
        return () if all(x == 0 for x in vec) else None
    return solve_linear(m.transpose(), vec)


def unimodular_inverse(m: IntMatrix) -> IntMatrix:
    """Exact inverse of a unimodular matrix."""
    if m.rows != m.cols:
        raise DimensionError("not square")
    h, u = hnf(m)
    if h != IntMatrix.identity(m.rows):
        raise ValueError("matrix is not unimodular")
    return u


# -- incremental echelon lattices (plain tuples; hot-path friendly) -----------
#
# These maintain a canonical fully-reduced echelon basis of an integer row
# lattice as vectors are added one at a time.  They are used where the same
# lattice is extended many times (game states, divisibility tests) and an
# IntMatrix round-trip per step would dominate.


def _canonical_echelon(rows):
    rows = [list(r) for r in rows]
    pivots = [next(i for i, x in enumerate(r) if x) for r in rows]
    order = sorted(range(len(rows)), key=lambda i: pivots[i])
    rows = [rows[i] for i in order]
    pivots = [pivots[i] for i in order]
    for i, r in enumerate(rows):
        if r[pivots[i]] < 0:
            rows[i] = [-x for x in r]
    for i in range(len(rows) - 1, -1, -1):
        p = pivots[i]
        piv = rows[i][p]
        for k in range(i):
            q = rows[k][p] // piv
            if q:
                rk, ri = rows[k], rows[i]
                for j in range(p, len(rk)):
                    rk[j] -= q * ri[j]
    return tuple(tuple(r) for r in rows)


def _xgcd(a, b):
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q = a // b
        a, b = b, a - q * b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return x0, y0


def echelon_add(rows: tuple, vec) -> tuple:
    """Canonical echelon basis of the lattice spanned by `rows` plus `vec`."""
    from math import gcd

    work = [list(r) for r in rows]
    v = list(vec)
    width = len(v)
    touched = False
    while True:
        j = next((i for i, x in enumerate(v) if x), None)
        if j is None:
            return _canonical_echelon(work) if touched else rows
        hit = None
        for idx, r in enumerate(work):
            pj = next(i for i, x in enumerate(r) if x)
            if pj == j:
                hit = idx
                break
            if pj > j:
                break
        if hit is None:
            work.append(v)
            return _canonical_echelon(work)
        r = work[hit]
        a, b = r[j], v[j]
        if b % a == 0:
            q = b // a
            for i in range(j, width):
                v[i] -= q * r[i]
        else:
            g = gcd(a, b)
            x, y = _xgcd(a, b)
            new_r = [x * r[i] + y * v[i] for i in range(width)]
            ag, bg = a // g, b // g
            v = [ag * v[i] - bg * r[i] for i in range(width)]
            work[hit] = new_r
            touched = True


def echelon_add_fast(rows: tuple, vec) -> tuple:
    """Like echelon_add but without full canonicalization.

    The result is an echelon basis of the same lattice (pivot columns
    strictly increasing), which is all that membership and zero-prefix tests
    need; it is NOT a canonical form and must not be used as a memo key.
    """
    from math import gcd

    work = None
    v = list(vec)
    width = len(v)
    while True:
        j = next((i for i, x in enumerate(v) if x), None)
        if j is None:
            return rows if work is None else tuple(tuple(r) for r in work)
        source = rows if work is None else work
        hit = None
        pos = len(source)
        for idx, r in enumerate(source):
            pj = next(i for i, x in enumerate(r) if x)
            if pj == j:
                hit = idx
                break
            if pj > j:
                pos = idx
                break
        if hit is None:
            out = [list(r) for r in source] if work is None else work
            out.insert(pos, v)
            return tuple(tuple(r) for r in out)
        r = source[hit]
        a, b = r[j], v[j]
        if b % a == 0:
            q = b // a
            for i in range(j, width):
                v[i] -= q * r[i]
        else:
            g = gcd(a, b)
            x, y = _xgcd(a, b)
            new_r = [x * r[i] + y * v[i] for i in range(width)]
            ag, bg = a // g, b // g
            v = [ag * v[i] - bg * r[i] for i in range(width)]
            if work is None:
                work = [list(rr) for rr in rows]
            work[hit] = new_r


def echelon_reduce(rows: tuple, vec) -> tuple:
    """Residue of vec after reduction by an echelon basis (zero iff member)."""
    v = list(vec)
    for r in rows:
        p = next(i for i, x in enumerate(r) if x)
        if v[p] and v[p] % r[p] == 0:
            q = v[p] // r[p]
            for i in range(p, len(v)):
                v[i] -= q * r[i]
    return tuple(v)


def echelon_of(rows_iterable) -> tuple:
    rows = ()
    for r in rows_iterable:
        if any(r):
            rows = echelon_add(rows, list(r))
    return rows
