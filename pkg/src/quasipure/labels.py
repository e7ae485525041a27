"""Symbolic algebra on canonical maximally-entangled-state labels.

A label (m, n) at local dimension d stands for the state
(1/sqrt(d)) * sum_j exp(2*pi*i*j*n/d) |j>|j+m mod d>.  All operations here
act on labels up to global phase; the numeric layer (quasipure.oracle)
independently verifies each closed-form rule against explicit unitaries.
"""

from __future__ import annotations

from dataclasses import dataclass

from .modmath import split_index


@dataclass(frozen=True)
class MesLabel:
    """Identity (m, n) of a canonical maximally entangled state in d x d."""

    d: int
    m: int
    n: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if not 0 <= self.m < self.d:
            raise ValueError(f"m must be in [0, {self.d}), got {self.m}")
        if not 0 <= self.n < self.d:
            raise ValueError(f"n must be in [0, {self.d}), got {self.n}")


@dataclass(frozen=True)
class LabelWord:
    """Ordered tensor product of labels, one per pair; slot i = pair i.

    Slots may have different dimensions (after a dimension split).  An empty
    word represents a fully consumed product (every slot read out as a tag).
    """

    pairs: tuple[MesLabel, ...]

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(label.d for label in self.pairs)

    @staticmethod
    def uniform(d: int, m: int, n: int, k: int) -> "LabelWord":
        return LabelWord((MesLabel(d, m, n),) * k)


def bxor_labels(source: MesLabel, target: MesLabel) -> tuple[MesLabel, MesLabel]:
    """Bilateral control-not on a pair of labels (source controls target).

    Returns (source', target') = ((m1, n1-n2), (m1+m2, n2)) mod d.  The map
    is induced by a basis permutation, hence bijective and phase-free.
    """
    if source.d != target.d:
        raise ValueError(f"dimension mismatch: {source.d} vs {target.d}")
    d = source.d
    return (
        MesLabel(d, source.m, (source.n - target.n) % d),
        MesLabel(d, (source.m + target.m) % d, target.n),
    )


def script_b(word: LabelWord) -> LabelWord:
    """Collapse round: bilateral control-nots from slots 1..k-1 onto slot k.

    On a uniform word (m, n)^k the result is (m, 0)^(k-1) followed by
    (k*m mod d, n).  A single-slot word is returned unchanged.
    """
    if len(word) == 0:
        raise ValueError("empty word")
    dims = set(word.dims)
    if len(dims) != 1:
        raise ValueError(f"mixed dimensions {sorted(dims)}")
    slots = list(word.pairs)
    for i in range(len(slots) - 1):
        slots[i], slots[-1] = bxor_labels(slots[i], slots[-1])
    return LabelWord(tuple(slots))


def dual_label(label: MesLabel) -> MesLabel:
    """Relabeling induced by the Fourier-conjugate local bases: (m,n) -> (n,-m)."""
    return MesLabel(label.d, label.n, (label.d - label.m) % label.d)


def shift_m(label: MesLabel, a: int) -> MesLabel:
    """Add a to the shift index; realized by a one-sided basis permutation."""
    if not 0 <= a < label.d:
        raise ValueError(f"a must be in [0, {label.d}), got {a}")
    return MesLabel(label.d, (label.m + a) % label.d, label.n)


def shift_n(label: MesLabel, b: int) -> MesLabel:
    """Add b to the phase index; realized by a one-sided diagonal phase."""
    if not 0 <= b < label.d:
        raise ValueError(f"b must be in [0, {label.d}), got {b}")
    return MesLabel(label.d, label.m, (label.n + b) % label.d)


def factor_label(label: MesLabel, d_tilde: int) -> tuple[MesLabel, MesLabel]:
    """Factor a (m, 0) label with d_tilde | m into dim-g and dim-d_tilde parts.

    Under the split_index isomorphism, (s*d_tilde, 0) in dimension d equals
    (s, 0) in dimension g = d/d_tilde tensored with (0, 0) in dimension
    d_tilde.  Only defined for this shape.
    """
    if label.d % d_tilde != 0:
        raise ValueError(f"d_tilde={d_tilde} does not divide d={label.d}")
    if label.n != 0:
        raise ValueError(f"phase index must be 0, got {label.n}")
    s, rem = split_index(label.m, label.d, d_tilde)
    if rem != 0:
        raise ValueError(f"shift index {label.m} is not a multiple of {d_tilde}")
    g = label.d // d_tilde
    return MesLabel(g, s, 0), MesLabel(d_tilde, 0, 0)
