"""Scheme constants for an (K_c, R_r, N) coded store.

Every derived quantity is computed once by :func:`derive_params`.  Lists
indexed by block follow the usual 1-based block numbering through
``block - 1``; ``lam`` carries a leading ``0`` so that block ``i`` owns
columns ``lam[i-1]:lam[i]`` of the assembled staircase matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .algebra import EvalPoints, FieldMatrix, PrimeField, cauchy_matrix, smallest_prime_at_least
from .errors import DegeneratePoints, InvalidParams


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class SystemParams:
    n: int
    r_r: int
    k_c_raw: Fraction
    k_c: int
    g: int
    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    gamma: tuple[int, ...]
    lam: tuple[int, ...]
    L: int
    q: int
    pts: EvalPoints = field(repr=False)

    @property
    def noise_rows(self) -> int:
        """Rows of noise per staircase block (R_r - K_c)."""
        return self.r_r - self.k_c

    @property
    def storage_len(self) -> int:
        return self.lam[self.g]

    @cached_property
    def field(self) -> PrimeField:
        return PrimeField(self.q)

    @cached_property
    def cauchy(self) -> FieldMatrix:
        return cauchy_matrix(self.pts)

    @property
    def C(self) -> np.ndarray:
        return self.cauchy.data


def derive_params(n: int, r_r: int, k_c, q: int | None = None, pts: EvalPoints | None = None) -> SystemParams:
    """Validate ``0 < K_c <= R_r <= N`` and derive every scheme constant.

    A fractional storage factor is rounded up; the scheme for ``ceil(K_c)``
    stores ``L / ceil(K_c) <= L / K_c`` symbols per server.
    """
    k_c_raw = _as_fraction(k_c)
    n, r_r = int(n), int(r_r)
    if not (0 < k_c_raw <= r_r <= n):
        if r_r > n:
            raise InvalidParams(f"R_r exceeds N (R_r={r_r}, N={n})")
        raise InvalidParams(f"need 0 < K_c <= R_r <= N, got N={n}, R_r={r_r}, K_c={k_c_raw}")
    kc = math.ceil(k_c_raw)

    g = n - r_r + 1
    alpha = tuple(n - r_r + kc + 1 - i for i in range(1, g + 1))
    beta = tuple(n + 1 - i for i in range(1, g + 1))
    L = math.lcm(*alpha)
    gamma = (L // alpha[0],) + tuple(L // (alpha[i - 1] * alpha[i]) for i in range(1, g))
    lam = (0,) + tuple(L // a for a in alpha)

    if q is None:
        q = smallest_prime_at_least(2 * n)
    q = int(q)
    PrimeField(q)  # primality check
    if q < 2 * n:
        raise InvalidParams(f"field modulus q={q} cannot hold {2 * n} distinct evaluation points (need q >= 2N)")
    if pts is None:
        try:
            pts = EvalPoints.canonical(n, q)
        except DegeneratePoints as exc:
            raise InvalidParams(f"q={q} is too small for {2 * n} distinct evaluation points") from exc
    elif pts.n != n or pts.q != q:
        raise InvalidParams("evaluation points do not match N and q")

    return SystemParams(
        n=n, r_r=r_r, k_c_raw=k_c_raw, k_c=kc, g=g, alpha=alpha, beta=beta,
        gamma=gamma, lam=lam, L=L, q=q, pts=pts,
    )


def read_threshold(p: SystemParams) -> int:
    return p.r_r


def update_threshold(p: SystemParams, x: int) -> int:
    """Fewest available servers for which an X-secure update is feasible."""
    if x < 0:
        raise InvalidParams(f"security level must be non-negative, got {x}")
    return p.n - p.r_r + p.k_c + x


def check_invariants(p: SystemParams) -> list[str]:
    """Return descriptions of every violated structural identity (empty when sound)."""
    bad = []
    g = p.g
    if not 0 < p.k_c <= p.r_r <= p.n:
        bad.append("ordering 0 < K_c <= R_r <= N")
    if g != p.n - p.r_r + 1:
        bad.append("G = N - R_r + 1")
    for i in range(1, g + 1):
        a, b = p.alpha[i - 1], p.beta[i - 1]
        if a != p.n - p.r_r + p.k_c + 1 - i or b != p.n + 1 - i:
            bad.append(f"alpha/beta definition at block {i}")
        if b - a != p.r_r - p.k_c:
            bad.append(f"beta_{i} - alpha_{i} != R_r - K_c")
        if sum(p.gamma[:i]) != p.lam[i]:
            bad.append(f"gamma prefix sum != lambda_{i}")
        if i >= 2 and a * p.gamma[i - 1] != p.lam[i - 1]:
            bad.append(f"alpha_{i} * gamma_{i} != lambda_{i - 1}")
    if p.lam[0] != 0 or p.alpha[-1] != p.k_c or p.lam[g] * p.k_c != p.L:
        bad.append("lambda_0 = 0 and lambda_G = L / K_c")
    if p.beta[0] != p.n or p.beta[-1] != p.r_r:
        bad.append("beta_1 = N and beta_G = R_r")
    return bad
