"""Quasi-pure decomposition certificates for the uniform mixture of k copies
of the d x d maximally entangled basis, and the exact distillable value.

The construction works in two phases.  Phase A collapses the k copies with a
round of bilateral control-nots and reads the last pair out as a separable,
locally distinguishable tag; the tag value is T(t) = g*((k_tilde*t) mod
d_tilde) for the branch class t = m mod d_tilde.  Phase B (only needed when
g = gcd(d, k) > 1) normalizes t to 0 by a local basis permutation, factors
each remaining pair into a dim-g and a dim-d_tilde part, turns the dim-g
mixture into a phase mixture via the dual basis, and collapses it with one
more control-not round, leaving pure copies plus one separable residue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .ensemble import FlagKind
from .modmath import GcdSplit, factorize, split_gcd, t_permutation, _check_positive


# ---------------------------------------------------------------------------
# steps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BxorRound:
    """Bilateral control-nots from each source slot onto the target slot."""

    sources: tuple[int, ...]
    target: int
    scope: int | None = None


@dataclass(frozen=True)
class FlagMeasurement:
    """Non-demolition readout of the flag family at a slot; the only
    branching step."""

    slot: int
    kind: FlagKind
    scope: int | None = None


@dataclass(frozen=True)
class LocalShiftM:
    """One-sided basis permutation adding `amount` to a slot's shift index."""

    slot: int
    amount: int
    scope: int | None = None


@dataclass(frozen=True)
class DimensionSplit:
    """Reinterpret a slot of dimension g*d_tilde as a dim-g slot (in place)
    followed by a new dim-d_tilde slot."""

    slot: int
    d_tilde: int
    scope: int | None = None


@dataclass(frozen=True)
class DualBasis:
    """Fourier-conjugate local basis change on the listed slots."""

    slots: tuple[int, ...]
    scope: int | None = None


OperationStep = Union[BxorRound, FlagMeasurement, LocalShiftM, DimensionSplit, DualBasis]


# ---------------------------------------------------------------------------
# leaves and the certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TagRecord:
    """Flag readout outcome: which family, at which slot, which value."""

    slot: int
    kind: FlagKind
    value: int


@dataclass(frozen=True)
class SeparableFactor:
    """Separable residue left in a leaf: a flag family sum over one index,
    or a maximally mixed pair (the k = 1 case)."""

    dim: int
    kind: str  # "sum_over_n" | "sum_over_m" | "maximally_mixed"
    value: int | None = None


@dataclass(frozen=True)
class Leaf:
    t: int
    tag: TagRecord | None
    probability: Fraction
    pure_part: tuple[tuple[int, int], ...]  # (dimension, copies)
    separable_part: tuple[SeparableFactor, ...]


@dataclass(frozen=True)
class DecompositionTree:
    d: int
    k: int
    split: GcdSplit
    steps: tuple[OperationStep, ...]
    leaves: tuple[Leaf, ...]


@dataclass(frozen=True)
class ExactEntanglement:
    """log(prod p^a_p), carried as the exact exponent map {p: a_p}."""

    prime_powers: tuple[tuple[int, int], ...]  # sorted (prime, exponent>0)

    @staticmethod
    def from_exponents(exponents: dict[int, int]) -> "ExactEntanglement":
        for p, a in exponents.items():
            if a < 0:
                raise ValueError(f"negative exponent {a} for prime {p}")
        return ExactEntanglement(
            tuple(sorted((p, a) for p, a in exponents.items() if a > 0))
        )

    @property
    def exponents(self) -> dict[int, int]:
        return dict(self.prime_powers)

    @property
    def bits(self) -> float:
        return sum(a * math.log2(p) for p, a in self.prime_powers)

    @property
    def is_zero(self) -> bool:
        return not self.prime_powers

    def symbolic(self) -> str:
        """Canonical rendering, largest prime first: e.g. '3 log 3 + 2 log 2'."""
        if not self.prime_powers:
            return "0"
        terms = []
        for p, a in sorted(self.prime_powers, reverse=True):
            terms.append(f"log {p}" if a == 1 else f"{a} log {p}")
        return " + ".join(terms)


# ---------------------------------------------------------------------------
# the decomposition
# ---------------------------------------------------------------------------

def decompose(d: int, k: int) -> DecompositionTree:
    """Build the full decomposition certificate for the (d, k) mixture.

    Identity operations are omitted from the step log: the t = 0 group needs
    no shift, a d_tilde = 1 split changes nothing, and a control-not round
    over a single slot is trivial.
    """
    _check_positive("d", d)
    _check_positive("k", k)
    split = split_gcd(d, k)

    if k == 1:
        leaf = Leaf(
            t=0,
            tag=None,
            probability=Fraction(1),
            pure_part=(),
            separable_part=(SeparableFactor(d, "maximally_mixed"),),
        )
        return DecompositionTree(d, k, split, steps=(), leaves=(leaf,))

    g, d_tilde = split.g, split.d_tilde
    steps: list[OperationStep] = [
        BxorRound(sources=tuple(range(1, k)), target=k),
        FlagMeasurement(slot=k, kind=FlagKind.SUM_OVER_N),
    ]
    leaves: list[Leaf] = []
    for t in range(d_tilde):
        tag = TagRecord(slot=k, kind=FlagKind.SUM_OVER_N, value=t_permutation(split, t))
        probability = Fraction(1, d_tilde)

        if g == 1:
            pure = (((d, k - 1),) if d > 1 else ())
            leaves.append(Leaf(t, tag, probability, pure, ()))
            continue

        if t != 0:
            for slot in range(1, k):
                steps.append(LocalShiftM(slot=slot, amount=d - t, scope=t))
        g_slots = tuple(range(1, k))
        if d_tilde > 1:
            # Descending order keeps each split's slot index meaningful at
            # the time it is applied; the dim-g parts land on odd positions.
            for slot in range(k - 1, 0, -1):
                steps.append(DimensionSplit(slot=slot, d_tilde=d_tilde, scope=t))
            g_slots = tuple(2 * i - 1 for i in range(1, k))
        steps.append(DualBasis(slots=g_slots, scope=t))
        if len(g_slots) >= 2:
            steps.append(BxorRound(sources=g_slots[:-1], target=g_slots[-1], scope=t))

        pure = []
        if d_tilde > 1:
            pure.append((d_tilde, k - 1))
        if k >= 3:
            pure.append((g, k - 2))
        leaves.append(
            Leaf(
                t,
                tag,
                probability,
                tuple(pure),
                (SeparableFactor(g, FlagKind.SUM_OVER_N.value, 0),),
            )
        )
    return DecompositionTree(d, k, split, tuple(steps), tuple(leaves))


def entanglement(d: int, k: int) -> ExactEntanglement:
    """Exact distillable value log(d^(k-1) / gcd(d, k)) as a prime-exponent map."""
    _check_positive("d", d)
    _check_positive("k", k)
    g = math.gcd(d, k)
    exponents = {p: a * (k - 1) for p, a in factorize(d).items()}
    for p, a in factorize(g).items():
        exponents[p] = exponents.get(p, 0) - a
    return ExactEntanglement.from_exponents(exponents)


def entanglement_of_tree(tree: DecompositionTree) -> ExactEntanglement:
    """Leaf-weighted pure-part entanglement, combined exactly."""
    weighted: dict[int, Fraction] = {}
    for leaf in tree.leaves:
        for dim, copies in leaf.pure_part:
            for p, a in factorize(dim).items():
                weighted[p] = weighted.get(p, Fraction(0)) + leaf.probability * a * copies
    exponents: dict[int, int] = {}
    for p, value in weighted.items():
        if value.denominator != 1:
            raise ValueError(f"non-integral combined exponent {value} for prime {p}")
        exponents[p] = int(value)
    return ExactEntanglement.from_exponents(exponents)


def is_separable_point(d: int, k: int) -> bool:
    """True iff the mixture carries no distillable entanglement at all,
    i.e. k = 1, d = 1, or (d, k) = (2, 2)."""
    return entanglement(d, k).is_zero
