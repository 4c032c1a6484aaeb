"""Polynomials in the differential operator and Smith normal form over them.

Coefficients are kept as :class:`fractions.Fraction` so that the Smith
reduction is exact; conversion to floating point happens only when a kernel
is built from a parametrization.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations
from numbers import Rational
from typing import Iterable, NamedTuple, Sequence

import numpy as np

FLOAT_TOL = 1e-12


def as_fraction(value) -> Fraction:
    """Convert ints, floats, strings like ``"5/2"`` or Fractions exactly.

    Floats go through ``repr`` so that ``0.1`` becomes ``1/10`` and not the
    binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise ValueError(f"non-finite coefficient {value!r}")
        return Fraction(repr(float(value)))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {type(value).__name__} to Fraction")


class Polynomial:
    """Univariate polynomial ``sum_i c_i * d^i`` with exact rational coefficients.

    ``coeffs`` is stored lowest degree first with trailing zeros stripped, so
    the zero polynomial has an empty coefficient tuple and degree -1.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        c = [as_fraction(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs: tuple[Fraction, ...] = tuple(c)

    @classmethod
    def constant(cls, value) -> "Polynomial":
        return cls([value])

    @classmethod
    def monomial(cls, degree: int, coeff=1) -> "Polynomial":
        return cls([0] * degree + [coeff])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def lead(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def is_constant(self) -> bool:
        return self.degree <= 0

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        return Polynomial.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return Polynomial(x + y for x, y in zip(a, b))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-c for c in self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if self.is_zero or other.is_zero:
            return Polynomial()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(out)

    __rmul__ = __mul__

    def __divmod__(self, other: "Polynomial"):
        other = self._coerce(other)
        if other.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dd = other.degree
        quot = [Fraction(0)] * max(len(rem) - dd, 0)
        lc = other.lead
        for k in range(len(rem) - 1 - dd, -1, -1):
            q = rem[k + dd] / lc
            quot[k] = q
            if q:
                for j, b in enumerate(other.coeffs):
                    rem[k + j] -= q * b
        return Polynomial(quot), Polynomial(rem[:dd] if dd > 0 else [])

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.coeffs == other.coeffs
        if isinstance(other, (int, float, Fraction)):
            return self.coeffs == Polynomial.constant(other).coeffs
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def derivative(self) -> "Polynomial":
        return Polynomial(i * c for i, c in enumerate(self.coeffs) if i > 0)

    def monic(self) -> "Polynomial":
        if self.is_zero:
            return self
        return self * (1 / self.lead)

    def divides(self, other: "Polynomial") -> bool:
        if self.is_zero:
            return other.is_zero
        return (other % self).is_zero

    def to_floats(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs], dtype=float)

    def allclose(self, other: "Polynomial", atol: float = FLOAT_TOL) -> bool:
        a, b = self.to_floats(), other.to_floats()
        n = max(a.size, b.size)
        a = np.pad(a, (0, n - a.size))
        b = np.pad(b, (0, n - b.size))
        return bool(np.all(np.abs(a - b) <= atol))

    def max_bits(self) -> int:
        return max(
            (max(c.numerator.bit_length(), c.denominator.bit_length()) for c in self.coeffs),
            default=0,
        )

    def __repr__(self):
        if self.is_zero:
            return "0"
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            mono = "" if i == 0 else ("∂" if i == 1 else f"∂^{i}")
            if mono and c == 1:
                terms.append(mono)
            elif mono and c == -1:
                terms.append("-" + mono)
            else:
                terms.append(f"{c}{'*' + mono if mono else ''}")
        return " + ".join(terms).replace("+ -", "- ")


ZERO = Polynomial()
ONE = Polynomial.constant(1)
DEL = Polynomial.monomial(1)


def _poly(x) -> Polynomial:
    return x if isinstance(x, Polynomial) else Polynomial.constant(x)


class PolyMatrix:
    """Immutable rectangular matrix of :class:`Polynomial` entries."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries: Sequence[Sequence]):
        grid = tuple(tuple(_poly(x) for x in row) for row in entries)
        if not grid:
            raise ValueError("PolyMatrix needs at least one row")
        cols = len(grid[0])
        if any(len(r) != cols for r in grid):
            raise ValueError("ragged PolyMatrix rows")
        self.rows = len(grid)
        self.cols = cols
        self.entries = grid

    @classmethod
    def identity(cls, n: int) -> "PolyMatrix":
        return cls([[ONE if i == j else ZERO for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "PolyMatrix":
        return cls([[ZERO] * cols for _ in range(rows)])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, idx):
        i, j = idx
        return self.entries[i][j]

    def column(self, j: int) -> list[Polynomial]:
        return [row[j] for row in self.entries]

    def select_columns(self, cols: Sequence[int]) -> "PolyMatrix":
        return PolyMatrix([[row[j] for j in cols] for row in self.entries])

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix([self.column(j) for j in range(self.cols)])

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = ZERO
                for k in range(self.cols):
                    a, b = self.entries[i][k], other.entries[k][j]
                    if not a.is_zero and not b.is_zero:
                        acc = acc + a * b
                row.append(acc)
            out.append(row)
        return PolyMatrix(out)

    def __eq__(self, other):
        return isinstance(other, PolyMatrix) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def is_zero(self) -> bool:
        return all(p.is_zero for row in self.entries for p in row)

    def is_diagonal(self) -> bool:
        return all(
            p.is_zero for i, row in enumerate(self.entries) for j, p in enumerate(row) if i != j
        )

    def diagonal(self) -> list[Polynomial]:
        return [self.entries[i][i] for i in range(min(self.rows, self.cols))]

    def max_degree(self) -> int:
        return max(p.degree for row in self.entries for p in row)

    def det(self) -> Polynomial:
        """Leibniz expansion; only meant for the small matrices used here."""
        if self.rows != self.cols:
            raise ValueError("determinant of a non-square matrix")
        n = self.rows
        total = ZERO
        for perm in permutations(range(n)):
            sign = 1
            seen = list(perm)
            for i in range(n):
                for j in range(i + 1, n):
                    if seen[i] > seen[j]:
                        sign = -sign
            term = ONE
            for i, j in enumerate(perm):
                term = term * self.entries[i][j]
                if term.is_zero:
                    break
            if not term.is_zero:
                total = total + term * sign
        return total

    def allclose(self, other: "PolyMatrix", atol: float = FLOAT_TOL) -> bool:
        if self.shape != other.shape:
            return False
        return all(
            a.allclose(b, atol)
            for ra, rb in zip(self.entries, other.entries)
            for a, b in zip(ra, rb)
        )

    def __repr__(self):
        body = "; ".join(", ".join(repr(p) for p in row) for row in self.entries)
        return f"PolyMatrix[{body}]"


class SNFResult(NamedTuple):
    Q: PolyMatrix
    D: PolyMatrix
    V: PolyMatrix


class SNFOverflowError(ArithmeticError):
    pass


class NoFreeParametersError(ValueError):
    pass


def system_to_operator_matrix(A, B) -> PolyMatrix:
    """Operator matrix ``(A - ∂ I | B)`` annihilating ``z = (x, u)``."""
    A = [[as_fraction(v) for v in row] for row in A]
    B = [[as_fraction(v) for v in row] for row in B]
    nx = len(A)
    if nx < 1 or any(len(row) != nx for row in A):
        raise ValueError("A must be a non-empty square matrix")
    if len(B) != nx:
        raise ValueError(f"B has {len(B)} rows, expected {nx}")
    nu = len(B[0]) if B else 0
    if nu < 1 or any(len(row) != nu for row in B):
        raise ValueError("B must have at least one column and equal row lengths")
    rows = []
    for i in range(nx):
        row = []
        for j in range(nx):
            p = Polynomial.constant(A[i][j])
            if i == j:
                p = p - DEL
            row.append(p)
        row.extend(Polynomial.constant(b) for b in B[i])
        rows.append(row)
    return PolyMatrix(rows)


def _pivot_key(p: Polynomial):
    return (p.degree, abs(p.lead))


def smith_normal_form(H: PolyMatrix, max_bits: int = 4096) -> SNFResult:
    """Unimodular ``Q``, ``V`` and diagonal ``D`` with ``Q @ H @ V == D``.

    Nonzero diagonal entries are monic and each divides the next. Raises
    :class:`SNFOverflowError` when a coefficient numerator or denominator
    grows beyond ``max_bits`` bits.
    """
    m, n = H.shape
    M = [list(row) for row in H.entries]
    Q = [[ONE if i == j else ZERO for j in range(m)] for i in range(m)]
    V = [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]

    def check(*polys):
        for p in polys:
            if p.max_bits() > max_bits:
                raise SNFOverflowError(f"coefficient exceeded {max_bits} bits: {p!r}")

    def swap_rows(i, j):
        M[i], M[j] = M[j], M[i]
        Q[i], Q[j] = Q[j], Q[i]

    def swap_cols(i, j):
        for row in M:
            row[i], row[j] = row[j], row[i]
        for row in V:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, factor):
        # row_dst += factor * row_src
        for c in range(n):
            if not M[src][c].is_zero:
                M[dst][c] = M[dst][c] + factor * M[src][c]
        for c in range(m):
            if not Q[src][c].is_zero:
                Q[dst][c] = Q[dst][c] + factor * Q[src][c]
        check(*M[dst], *Q[dst])

    def add_col(dst, src, factor):
        for r in range(m):
            if not M[r][src].is_zero:
                M[r][dst] = M[r][dst] + M[r][src] * factor
        for r in range(n):
            if not V[r][src].is_zero:
                V[r][dst] = V[r][dst] + V[r][src] * factor
        check(*(M[r][dst] for r in range(m)), *(V[r][dst] for r in range(n)))

    for k in range(min(m, n)):
        while True:
            candidates = [
                (_pivot_key(M[i][j]), i, j)
                for i in range(k, m)
                for j in range(k, n)
                if not M[i][j].is_zero
            ]
            if not candidates:
                break
            _, pi, pj = min(candidates)
            swap_rows(k, pi)
            swap_cols(k, pj)
            pivot = M[k][k]

            for i in range(k + 1, m):
                if not M[i][k].is_zero:
                    q = M[i][k] // pivot
                    add_row(i, k, -q)
            for j in range(k + 1, n):
                if not M[k][j].is_zero:
                    q = M[k][j] // pivot
                    add_col(j, k, -q)

            if any(not M[i][k].is_zero for i in range(k + 1, m)) or any(
                not M[k][j].is_zero for j in range(k + 1, n)
            ):
                # nonzero remainders have lower degree than the pivot
                continue

            bad = next(
                (
                    i
                    for i in range(k + 1, m)
                    for j in range(k + 1, n)
                    if not pivot.divides(M[i][j])
                ),
                None,
            )
            if bad is None:
                break
            add_row(k, bad, ONE)

        if M[k][k].is_zero:
            break
        scale = 1 / M[k][k].lead
        if scale != 1:
            M[k] = [p * scale for p in M[k]]
            Q[k] = [p * scale for p in Q[k]]

    return SNFResult(PolyMatrix(Q), PolyMatrix(M), PolyMatrix(V))


def parametrization(snf: SNFResult) -> PolyMatrix:
    """Columns of ``V`` whose ``D`` column vanishes, so that ``H @ P == 0``.

    Each column is scaled so its first nonzero entry has leading coefficient 1.
    """
    D, V = snf.D, snf.V
    free = [j for j in range(D.cols) if all(D[i, j].is_zero for i in range(D.rows))]
    if not free:
        raise NoFreeParametersError(
            "operator matrix has full column rank: no free parameters to parametrize"
        )
    cols = []
    for j in free:
        col = V.column(j)
        head = next(p for p in col if not p.is_zero)
        cols.append([p * (1 / head.lead) for p in col])
    return PolyMatrix([[cols[c][r] for c in range(len(cols))] for r in range(V.rows)])


def operator_parametrization(A, B) -> tuple[PolyMatrix, PolyMatrix]:
    """Convenience: ``(H, P)`` for the system ``x' = A x + B u``."""
    H = system_to_operator_matrix(A, B)
    return H, parametrization(smith_normal_form(H))
