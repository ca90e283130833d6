"""Exact arithmetic over a prime field GF(q).

Matrices are plain numpy integer arrays holding canonical representatives
in ``[0, q)``.  :class:`PrimeField` owns the modular linear algebra
(multiply, Gauss-Jordan elimination, inverse, rank, solve) and
:class:`FieldMatrix` is a thin typed wrapper for callers that want a
matrix object carrying its own modulus.

Arrays passed as the right-hand operand of :meth:`PrimeField.matmul` may
carry trailing axes.  Those axes ride along untouched, which lets one call
evaluate a linear map on many inputs at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from sympy import isprime, nextprime

from .errors import DegeneratePoints, InvalidParams, Inconsistent, Singular, ZeroInverse

# Above this modulus a product of two residues no longer fits in int64.
_INT64_MODULUS_LIMIT = 2**31


def smallest_prime_at_least(n: int) -> int:
    return 2 if n <= 2 else int(nextprime(n - 1))


class PrimeField:
    """The field of integers modulo a prime ``q``."""

    def __init__(self, q: int):
        q = int(q)
        if not isprime(q):
            raise InvalidParams(f"field modulus {q} is not prime")
        self.q = q
        self.dtype = np.int64 if q < _INT64_MODULUS_LIMIT else object
        # inner-product terms that can be summed before an int64 overflow
        self._chunk = max(1, (2**63 - 1) // max(1, (q - 1) ** 2))

    def __repr__(self) -> str:
        return f"PrimeField({self.q})"

    def __eq__(self, other) -> bool:
        return isinstance(other, PrimeField) and other.q == self.q

    def __hash__(self) -> int:
        return hash(("PrimeField", self.q))

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(int(value) % self.q, self.q)

    # -- construction -------------------------------------------------

    def array(self, values) -> np.ndarray:
        if self.dtype is object:
            a = np.array(values, dtype=object)
            return np.vectorize(lambda v: int(v) % self.q, otypes=[object])(a) if a.size else a
        return np.mod(np.asarray(values, dtype=np.int64), self.q)

    def zeros(self, shape) -> np.ndarray:
        if self.dtype is object:
            z = np.empty(shape, dtype=object)
            z.fill(0)
            return z
        return np.zeros(shape, dtype=np.int64)

    def identity(self, n: int) -> np.ndarray:
        eye = self.zeros((n, n))
        for i in range(n):
            eye[i, i] = 1
        return eye

    def random(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.dtype is object:
            flat = [int(rng.integers(0, self.q)) for _ in range(int(np.prod(shape, dtype=np.int64)))]
            return np.array(flat, dtype=object).reshape(shape) if flat else self.zeros(shape)
        return rng.integers(0, self.q, size=shape, dtype=np.int64)

    # -- scalar ops ---------------------------------------------------

    def inv(self, a: int) -> int:
        a = int(a) % self.q
        if a == 0:
            raise ZeroInverse(f"0 has no inverse modulo {self.q}")
        # pow(a, -1, q) runs the extended Euclidean algorithm
        return pow(a, -1, self.q)

    # -- matrix ops ---------------------------------------------------

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Contract the columns of 2-D ``a`` with the leading axis of ``b``."""
        k = a.shape[1]
        if b.shape[0] != k:
            raise ValueError(f"inner dimensions differ: {a.shape} @ {b.shape}")
        if k == 0:
            return self.zeros((a.shape[0],) + b.shape[1:])
        if self.dtype is object or k <= self._chunk:
            return np.tensordot(a, b, axes=(1, 0)) % self.q
        out = self.zeros((a.shape[0],) + b.shape[1:])
        for s in range(0, k, self._chunk):
            out = (out + np.tensordot(a[:, s : s + self._chunk], b[s : s + self._chunk], axes=(1, 0))) % self.q
        return out

    def rref(self, m: np.ndarray, ncols: int | None = None) -> tuple[np.ndarray, list[int]]:
        """Reduced row echelon form; pivots are searched in the first ``ncols`` columns."""
        a = np.array(m, dtype=self.dtype, copy=True)
        rows, cols = a.shape
        ncols = cols if ncols is None else ncols
        q = self.q
        pivots: list[int] = []
        r = 0
        for c in range(ncols):
            if r == rows:
                break
            nz = np.flatnonzero(a[r:, c])
            if nz.size == 0:
                continue
            p = r + int(nz[0])
            if p != r:
                a[[r, p]] = a[[p, r]]
            a[r] = a[r] * self.inv(a[r, c]) % q
            col = a[:, c].copy()
            col[r] = 0
            hit = np.flatnonzero(col)
            if hit.size:
                a[hit] = (a[hit] - np.multiply.outer(col[hit], a[r])) % q
            pivots.append(c)
            r += 1
        return a, pivots

    def rank(self, m: np.ndarray) -> int:
        m = np.asarray(m)
        if m.size == 0:
            return 0
        return len(self.rref(m)[1])

    def inverse(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m)
        n = m.shape[0]
        if m.ndim != 2 or m.shape[1] != n:
            raise ValueError(f"cannot invert non-square shape {m.shape}")
        reduced, pivots = self.rref(np.concatenate([m.astype(self.dtype), self.identity(n)], axis=1), ncols=n)
        if len(pivots) < n:
            raise Singular(f"matrix has rank {len(pivots)} < {n}")
        return reduced[:, n:]

    def solve(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """One solution ``x`` of ``a @ x = b`` (free variables set to zero)."""
        a = np.asarray(a)
        b = np.asarray(b)
        vector = b.ndim == 1
        rhs = b.reshape(b.shape[0], -1)
        rows, cols = a.shape
        reduced, pivots = self.rref(np.concatenate([a.astype(self.dtype), rhs.astype(self.dtype)], axis=1), ncols=cols)
        rank = len(pivots)
        if np.any(reduced[rank:, cols:] != 0):
            raise Inconsistent("linear system has no solution")
        x = self.zeros((cols, rhs.shape[1]))
        for r, c in enumerate(pivots):
            x[c] = reduced[r, cols:]
        return x[:, 0] if vector else x


@dataclass(frozen=True)
class FieldElement:
    value: int
    q: int

    def __post_init__(self):
        if not 0 <= self.value < self.q:
            raise ValueError(f"{self.value} is not a residue modulo {self.q}")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.q != self.q:
                raise ValueError("elements from different fields")
            return other.value
        return int(other) % self.q

    def __add__(self, other):
        return FieldElement((self.value + self._coerce(other)) % self.q, self.q)

    __radd__ = __add__

    def __sub__(self, other):
        return FieldElement((self.value - self._coerce(other)) % self.q, self.q)

    def __rsub__(self, other):
        return FieldElement((self._coerce(other) - self.value) % self.q, self.q)

    def __mul__(self, other):
        return FieldElement(self.value * self._coerce(other) % self.q, self.q)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value % self.q, self.q)

    def __truediv__(self, other):
        return self * fe_inv(FieldElement(self._coerce(other), self.q))

    def __int__(self) -> int:
        return self.value

    def inverse(self) -> FieldElement:
        return fe_inv(self)


def fe_inv(a: FieldElement) -> FieldElement:
    if a.value == 0:
        raise ZeroInverse(f"0 has no inverse modulo {a.q}")
    return FieldElement(pow(a.value, -1, a.q), a.q)


class FieldMatrix:
    """Dense matrix over a prime field."""

    def __init__(self, field: PrimeField, entries):
        data = field.array(entries)
        if data.ndim != 2:
            raise ValueError(f"FieldMatrix needs 2-D entries, got shape {data.shape}")
        self.field = field
        self.data = data

    @classmethod
    def identity(cls, field: PrimeField, n: int) -> FieldMatrix:
        return cls(field, field.identity(n))

    @classmethod
    def zeros(cls, field: PrimeField, rows: int, cols: int) -> FieldMatrix:
        return cls(field, field.zeros((rows, cols)))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"FieldMatrix(q={self.field.q}, {self.data.tolist()})"

    def __getitem__(self, key):
        out = self.data[key]
        if np.ndim(out) == 0:
            return FieldElement(int(out), self.field.q)
        if np.ndim(out) == 1:
            # keep 2-D: a single row stays a row, a single column stays a column
            if isinstance(key, tuple) and len(key) == 2 and np.ndim(key[1]) == 0 and not isinstance(key[1], slice):
                out = out.reshape(-1, 1)
            else:
                out = out.reshape(1, -1)
        return FieldMatrix(self.field, out)

    def _check(self, other: FieldMatrix):
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        if other.field != self.field:
            raise ValueError("matrices over different fields")
        return other

    def __eq__(self, other) -> bool:
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        return self.field == other.field and self.shape == other.shape and bool(np.all(self.data == other.data))

    def __add__(self, other: FieldMatrix) -> FieldMatrix:
        self._check(other)
        return FieldMatrix(self.field, (self.data + other.data) % self.field.q)

    def __sub__(self, other: FieldMatrix) -> FieldMatrix:
        self._check(other)
        return FieldMatrix(self.field, (self.data - other.data) % self.field.q)

    def __neg__(self) -> FieldMatrix:
        return FieldMatrix(self.field, (-self.data) % self.field.q)

    def __matmul__(self, other: FieldMatrix) -> FieldMatrix:
        self._check(other)
        return FieldMatrix(self.field, self.field.matmul(self.data, other.data))

    def scale(self, c: int) -> FieldMatrix:
        return FieldMatrix(self.field, self.data * (int(c) % self.field.q) % self.field.q)

    def inverse(self) -> FieldMatrix:
        return mat_inverse(self)

    def rank(self) -> int:
        return mat_rank(self)

    def tolist(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.data]


def mat_inverse(m: FieldMatrix) -> FieldMatrix:
    return FieldMatrix(m.field, m.field.inverse(m.data))


def mat_rank(m: FieldMatrix) -> int:
    return m.field.rank(m.data)


@dataclass(frozen=True)
class EvalPoints:
    """Cauchy evaluation points ``x_1..x_N`` and ``f_1..f_N`` in GF(q)."""

    xs: tuple[int, ...]
    fs: tuple[int, ...]
    q: int

    def __post_init__(self):
        if len(self.xs) != len(self.fs):
            raise DegeneratePoints(f"{len(self.xs)} x-points but {len(self.fs)} f-points")
        values = [v % self.q for v in self.xs + self.fs]
        if len(set(values)) != len(values):
            raise DegeneratePoints(f"evaluation points are not pairwise distinct modulo {self.q}: {values}")

    @classmethod
    def canonical(cls, n: int, q: int) -> EvalPoints:
        """x_n = n and f_n = N + n."""
        return cls(tuple(range(1, n + 1)), tuple(range(n + 1, 2 * n + 1)), q)

    @property
    def n(self) -> int:
        return len(self.xs)

    @cached_property
    def field(self) -> PrimeField:
        return PrimeField(self.q)


def cauchy_matrix(pts: EvalPoints) -> FieldMatrix:
    """N x N matrix with entry (i, j) = 1 / (x_i - f_j)."""
    field = pts.field
    c = field.zeros((pts.n, pts.n))
    for i, x in enumerate(pts.xs):
        for j, f in enumerate(pts.fs):
            c[i, j] = field.inv(x - f)
    return FieldMatrix(field, c)
