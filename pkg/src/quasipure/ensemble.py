"""Mixtures of maximally-entangled-state products with exact probabilities,
and the separable flag subspaces used as locally readable tags."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

from .labels import LabelWord, MesLabel
from .modmath import _check_positive


class MalformedEnsembleError(ValueError):
    """Raised when an ensemble lacks the structure a flag readout requires."""


class FlagKind(enum.Enum):
    # SUM_OVER_N fixes the shift index m: the projector sum_n P_mn, which is
    # product-diagonal in the computational basis.  SUM_OVER_M fixes the
    # phase index n: sum_m P_mn, product-diagonal in the dual basis.
    SUM_OVER_N = "sum_over_n"
    SUM_OVER_M = "sum_over_m"


@dataclass(frozen=True)
class FlagSubspace:
    """Separable projector family sum_n P_{mn} (or sum_m P_{mn}) in d x d."""

    d: int
    kind: FlagKind
    value: int

    def __post_init__(self) -> None:
        if not 0 <= self.value < self.d:
            raise ValueError(f"flag value must be in [0, {self.d}), got {self.value}")

    def contains(self, label: MesLabel) -> bool:
        if label.d != self.d:
            return False
        index = label.m if self.kind is FlagKind.SUM_OVER_N else label.n
        return index == self.value


@dataclass(frozen=True)
class LocalDiscriminationProtocol:
    """One-way-free local measurement scheme that reads a flag's parameter.

    For SUM_OVER_N both sides measure the computational basis and infer
    m = (j_B - j_A) mod d; for SUM_OVER_M both sides measure the dual basis
    and infer n the same way.  Applied to any state inside a flag subspace it
    outputs that flag's parameter with probability 1.
    """

    kind: FlagKind

    @property
    def description(self) -> str:
        if self.kind is FlagKind.SUM_OVER_N:
            return (
                "both sides measure the computational basis; "
                "infer m = (j_B - j_A) mod d"
            )
        return (
            "both sides measure the dual (Fourier-conjugate) basis; "
            "infer n = (b_B - b_A) mod d"
        )

    def infer(self, outcome_a: int, outcome_b: int, d: int) -> int:
        return (outcome_b - outcome_a) % d


@dataclass(frozen=True)
class BranchEnsemble:
    """Probabilistic mixture of label words with exact rational weights."""

    branches: tuple[tuple[Fraction, LabelWord], ...]

    def __post_init__(self) -> None:
        if not self.branches:
            raise ValueError("ensemble must have at least one branch")
        dims = self.branches[0][1].dims
        total = Fraction(0)
        for prob, word in self.branches:
            if prob <= 0:
                raise ValueError(f"branch probability must be positive, got {prob}")
            if word.dims != dims:
                raise ValueError(
                    f"branch words disagree on slot dimensions: {word.dims} vs {dims}"
                )
            total += prob
        if total != 1:
            raise ValueError(f"branch probabilities sum to {total}, expected 1")

    @property
    def num_slots(self) -> int:
        return len(self.branches[0][1])

    @property
    def dims(self) -> tuple[int, ...]:
        return self.branches[0][1].dims


def canonical_mixture(d: int, k: int) -> BranchEnsemble:
    """Uniform mixture of (m, n)^k over all d^2 labels, each weight 1/d^2."""
    _check_positive("d", d)
    _check_positive("k", k)
    weight = Fraction(1, d * d)
    branches = tuple(
        (weight, LabelWord.uniform(d, m, n, k))
        for m in range(d)
        for n in range(d)
    )
    return BranchEnsemble(branches)


def apply_to_ensemble(
    ensemble: BranchEnsemble, op: Callable[[LabelWord], LabelWord]
) -> BranchEnsemble:
    """Apply a deterministic label-word operation branchwise."""
    return BranchEnsemble(
        tuple((prob, op(word)) for prob, word in ensemble.branches)
    )


def _slot_flag_value(word: LabelWord, slot: int, kind: FlagKind) -> int:
    label = word.pairs[slot - 1]
    return label.m if kind is FlagKind.SUM_OVER_N else label.n


def _slot_free_value(word: LabelWord, slot: int, kind: FlagKind) -> int:
    label = word.pairs[slot - 1]
    return label.n if kind is FlagKind.SUM_OVER_N else label.m


def _drop_slot(word: LabelWord, slot: int) -> LabelWord:
    pairs = word.pairs[: slot - 1] + word.pairs[slot:]
    return LabelWord(pairs)


def group_by_flag(
    ensemble: BranchEnsemble, slot: int, kind: FlagKind
) -> list[tuple[FlagSubspace, BranchEnsemble, Fraction]]:
    """Partition an ensemble by the flag parameter at a slot (1-based).

    The slot is consumed as the tag: conditional words drop it and are
    renormalized exactly.  Within each group the tag state must factor from
    the residual, i.e. the free index of the tagged slot must be distributed
    identically (and uniformly over its support) for every residual word;
    otherwise the readout would not leave a product of tag and residual and
    a MalformedEnsembleError is raised.
    """
    if not 1 <= slot <= ensemble.num_slots:
        raise ValueError(f"slot must be in [1, {ensemble.num_slots}], got {slot}")

    groups: dict[int, dict[LabelWord, dict[int, Fraction]]] = {}
    residual_order: dict[int, list[LabelWord]] = {}
    for prob, word in ensemble.branches:
        value = _slot_flag_value(word, slot, kind)
        free = _slot_free_value(word, slot, kind)
        residual = _drop_slot(word, slot)
        per_residual = groups.setdefault(value, {})
        if residual not in per_residual:
            per_residual[residual] = {}
            residual_order.setdefault(value, []).append(residual)
        dist = per_residual[residual]
        dist[free] = dist.get(free, Fraction(0)) + prob

    d = ensemble.dims[slot - 1]
    result = []
    for value in sorted(groups):
        per_residual = groups[value]
        normalized: list[dict[int, Fraction]] = []
        for residual, dist in per_residual.items():
            total = sum(dist.values())
            norm = {free: p / total for free, p in dist.items()}
            if len(set(norm.values())) != 1:
                raise MalformedEnsembleError(
                    f"tag slot {slot}: free index non-uniform for residual {residual}"
                )
            normalized.append(norm)
        if any(norm != normalized[0] for norm in normalized[1:]):
            raise MalformedEnsembleError(
                f"tag slot {slot}: free-index distribution varies across residuals"
            )

        group_prob = sum(sum(dist.values()) for dist in per_residual.values())
        conditional = BranchEnsemble(
            tuple(
                (sum(per_residual[residual].values()) / group_prob, residual)
                for residual in residual_order[value]
            )
        )
        result.append((FlagSubspace(d, kind, value), conditional, group_prob))
    return result
