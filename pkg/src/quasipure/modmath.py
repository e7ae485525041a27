"""Exact modular arithmetic: gcd splitting, index decompositions, and the
branch permutation underlying the flag-group structure."""

from __future__ import annotations

import math
from dataclasses import dataclass

# d and k are capped so that every quantity handled symbolically stays an
# exact machine integer; d^(k-1)-sized values are carried as prime-exponent
# maps, never as plain integers.
DIMENSION_CAP = 2**16


def _check_positive(name: str, value: int, cap: int = DIMENSION_CAP) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    if value > cap:
        raise ValueError(f"{name} must be <= {cap}, got {value}")


@dataclass(frozen=True)
class GcdSplit:
    """Factorisation d = g*d_tilde, k = g*k_tilde with g = gcd(d, k).

    gcd(k_tilde, d_tilde) = 1 always holds.
    """

    d: int
    k: int
    g: int
    d_tilde: int
    k_tilde: int


def gcd(a: int, b: int) -> int:
    """Greatest common divisor of two positive integers."""
    _check_positive("a", a)
    _check_positive("b", b)
    return math.gcd(a, b)


def split_gcd(d: int, k: int) -> GcdSplit:
    """Split (d, k) as d = g*d_tilde, k = g*k_tilde with g = gcd(d, k)."""
    _check_positive("d", d)
    _check_positive("k", k)
    g = math.gcd(d, k)
    return GcdSplit(d=d, k=k, g=g, d_tilde=d // g, k_tilde=k // g)


def decompose_m(m: int, split: GcdSplit) -> tuple[int, int]:
    """Write m in [0, d) as m = s*d_tilde + t with s < g and t < d_tilde."""
    if not 0 <= m < split.d:
        raise ValueError(f"m must be in [0, {split.d}), got {m}")
    return divmod(m, split.d_tilde)


def t_permutation(split: GcdSplit, t: int) -> int:
    """Tag value T(t) = g * ((k_tilde * t) mod d_tilde); injective in t."""
    if not 0 <= t < split.d_tilde:
        raise ValueError(f"t must be in [0, {split.d_tilde}), got {t}")
    return split.g * ((split.k_tilde * t) % split.d_tilde)


def split_index(j: int, d: int, d_tilde: int) -> tuple[int, int]:
    """Map j in [0, d) to (a, b) with j = a*d_tilde + b, a < d/d_tilde.

    Together with join_index this is the index isomorphism identifying a
    dimension-d space with the product of a dimension-g and a
    dimension-d_tilde space (g = d/d_tilde).
    """
    _check_positive("d", d)
    _check_positive("d_tilde", d_tilde)
    if d % d_tilde != 0:
        raise ValueError(f"d_tilde={d_tilde} does not divide d={d}")
    if not 0 <= j < d:
        raise ValueError(f"j must be in [0, {d}), got {j}")
    return divmod(j, d_tilde)


def join_index(a: int, b: int, d: int, d_tilde: int) -> int:
    """Inverse of split_index: (a, b) -> a*d_tilde + b."""
    _check_positive("d", d)
    _check_positive("d_tilde", d_tilde)
    if d % d_tilde != 0:
        raise ValueError(f"d_tilde={d_tilde} does not divide d={d}")
    g = d // d_tilde
    if not 0 <= a < g:
        raise ValueError(f"a must be in [0, {g}), got {a}")
    if not 0 <= b < d_tilde:
        raise ValueError(f"b must be in [0, {d_tilde}), got {b}")
    return a * d_tilde + b


def factorize(n: int) -> dict[int, int]:
    """Prime factorisation of n >= 1 as {prime: exponent}; 1 -> {}."""
    _check_positive("n", n, cap=DIMENSION_CAP**2)
    factors: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            factors[p] = factors.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        factors[n] = factors.get(n, 0) + 1
    return factors
