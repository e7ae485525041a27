"""Numeric verification layer: explicit sparse state vectors and dense
operators for small (d, k).

Conventions, pinned once and relied on everywhere:

- Qudits are interleaved A1, B1, A2, B2, ..., Ak, Bk and flattened row-major:
  index = sum_q x_q * prod_{q' > q} dims[q'].
- The dual-basis change applies the inverse discrete Fourier matrix
  omega^(+a*j)/sqrt(d) on an A qudit and the forward matrix
  omega^(-l*b)/sqrt(d) on the matching B qudit, so that a state labeled
  (m, n) is relabeled (n, -m mod d) up to a global phase.
- A B-side basis permutation j -> j + a realizes a shift of the first label
  index; an A-side phase omega^(j*b) realizes a shift of the second.

All state comparisons are fidelity-based (global phases are irrelevant);
operator comparisons are entrywise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .decompose import (
    BxorRound,
    DecompositionTree,
    DimensionSplit,
    DualBasis,
    FlagMeasurement,
    LocalShiftM,
)
from .ensemble import (
    BranchEnsemble,
    FlagKind,
    FlagSubspace,
    LocalDiscriminationProtocol,
)
from .labels import LabelWord, MesLabel, bxor_labels, dual_label, factor_label, script_b
from .labels import shift_m as label_shift_m
from .labels import shift_n as label_shift_n

DEFAULT_SPARSE_CAP = 10**6  # amplitudes per branch state
DEFAULT_DENSE_CAP = 4096    # side length of dense operators
PRUNE_TOL = 1e-14           # drop amplitudes below this after dense transforms


class ResourceLimitError(RuntimeError):
    """Raised when a computation would exceed a configured size cap."""


def _weights(dims: tuple[int, ...]) -> np.ndarray:
    w = np.ones(len(dims), dtype=np.int64)
    for q in range(len(dims) - 2, -1, -1):
        w[q] = w[q + 1] * dims[q + 1]
    return w


@dataclass(frozen=True, eq=False)
class SparseState:
    """Pure state over qudits `dims`, stored as flattened basis indices
    (unique int64 keys) with their complex amplitudes."""

    dims: tuple[int, ...]
    keys: np.ndarray
    amps: np.ndarray

    def __post_init__(self) -> None:
        if self.keys.shape != self.amps.shape:
            raise ValueError("keys and amplitudes must align")

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.dims else 1

    def qudit_values(self, qudit: int) -> np.ndarray:
        w = _weights(self.dims)
        return (self.keys // w[qudit]) % self.dims[qudit]

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def amplitude_map(self) -> dict[int, complex]:
        return {int(k): complex(a) for k, a in zip(self.keys, self.amps)}

    def inner(self, other: "SparseState") -> complex:
        """<self|other>; both states must share the same qudit dimensions."""
        if self.dims != other.dims:
            raise ValueError(f"dimension mismatch: {self.dims} vs {other.dims}")
        common, ia, ib = np.intersect1d(
            self.keys, other.keys, assume_unique=True, return_indices=True
        )
        if len(common) == 0:
            return 0.0 + 0.0j
        return complex(np.sum(np.conj(self.amps[ia]) * other.amps[ib]))

    def fidelity(self, other: "SparseState") -> float:
        na, nb = self.norm(), other.norm()
        return abs(self.inner(other)) ** 2 / (na * na * nb * nb)

    def tensor(self, other: "SparseState") -> "SparseState":
        keys = (self.keys[:, None] * other.total_dim + other.keys[None, :]).ravel()
        amps = (self.amps[:, None] * other.amps[None, :]).ravel()
        return SparseState(self.dims + other.dims, keys, amps)

    def dense(self, dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
        if self.total_dim > dense_cap:
            raise ResourceLimitError(
                f"total dimension {self.total_dim} exceeds dense cap {dense_cap}"
            )
        vec = np.zeros(self.total_dim, dtype=complex)
        vec[self.keys] = self.amps
        return vec


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Explicit matrix over qudits `dims` (side length = prod(dims))."""

    dims: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        side = int(np.prod(self.dims, dtype=np.int64)) if self.dims else 1
        if self.matrix.shape != (side, side):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match dims {self.dims}"
            )


# ---------------------------------------------------------------------------
# state construction
# ---------------------------------------------------------------------------

def build_mes(d: int, m: int, n: int) -> SparseState:
    """Canonical maximally entangled state (1/sqrt(d)) sum_j w^(jn) |j>|j+m>."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not 0 <= m < d or not 0 <= n < d:
        raise ValueError(f"(m, n) = ({m}, {n}) out of range for d = {d}")
    j = np.arange(d, dtype=np.int64)
    keys = j * d + (j + m) % d
    amps = np.exp(2j * np.pi * j * n / d) / math.sqrt(d)
    return SparseState((d, d), keys, amps.astype(complex))


def mes_word_state(word: LabelWord) -> SparseState:
    """Tensor product of canonical states, one per slot of the word."""
    state = SparseState((), np.zeros(1, dtype=np.int64), np.ones(1, dtype=complex))
    for label in word.pairs:
        state = state.tensor(build_mes(label.d, label.m, label.n))
    return state


# ---------------------------------------------------------------------------
# local operations
# ---------------------------------------------------------------------------

def _pair_qudits(state: SparseState, pair: int) -> tuple[int, int]:
    num_pairs = len(state.dims) // 2
    if len(state.dims) % 2 != 0:
        raise ValueError("state does not have an even number of qudits")
    if not 1 <= pair <= num_pairs:
        raise ValueError(f"pair must be in [1, {num_pairs}], got {pair}")
    return 2 * pair - 2, 2 * pair - 1


def apply_bxor(state: SparseState, source_pair: int, target_pair: int) -> SparseState:
    """Bilateral control-not: both sides add the source value onto the target.

    A pure basis permutation; amplitude values are untouched.
    """
    if source_pair == target_pair:
        raise ValueError("source and target pair must differ")
    qa_s, qb_s = _pair_qudits(state, source_pair)
    qa_t, qb_t = _pair_qudits(state, target_pair)
    d = state.dims[qa_s]
    if {state.dims[qb_s], state.dims[qa_t], state.dims[qb_t]} != {d}:
        raise ValueError("source and target pairs must share one dimension")
    w = _weights(state.dims)
    a_s, b_s = state.qudit_values(qa_s), state.qudit_values(qb_s)
    a_t, b_t = state.qudit_values(qa_t), state.qudit_values(qb_t)
    keys = (
        state.keys
        + ((a_t + a_s) % d - a_t) * w[qa_t]
        + ((b_t + b_s) % d - b_t) * w[qb_t]
    )
    return SparseState(state.dims, keys, state.amps.copy())


def apply_local_permutation(
    state: SparseState, qudit: int, permutation
) -> SparseState:
    """Relabel one qudit's basis by a bijection on [0, d)."""
    d = state.dims[qudit]
    perm = np.asarray(permutation, dtype=np.int64)
    if perm.shape != (d,) or sorted(perm.tolist()) != list(range(d)):
        raise ValueError(f"permutation must be a bijection on [0, {d})")
    w = _weights(state.dims)
    x = state.qudit_values(qudit)
    keys = state.keys + (perm[x] - x) * w[qudit]
    return SparseState(state.dims, keys, state.amps.copy())


def apply_local_phase(state: SparseState, qudit: int, exponents) -> SparseState:
    """Multiply amplitudes by omega^exponents[x] on one qudit (omega = d-th root)."""
    d = state.dims[qudit]
    exp = np.asarray(exponents, dtype=np.int64)
    if exp.shape != (d,):
        raise ValueError(f"need {d} phase exponents, got shape {exp.shape}")
    x = state.qudit_values(qudit)
    amps = state.amps * np.exp(2j * np.pi * exp[x] / d)
    return SparseState(state.dims, state.keys.copy(), amps)


def pair_shift_m(state: SparseState, pair: int, amount: int) -> SparseState:
    """Shift the first label index of a pair: B-side permutation j -> j + amount."""
    _, qb = _pair_qudits(state, pair)
    d = state.dims[qb]
    perm = (np.arange(d) + amount) % d
    return apply_local_permutation(state, qb, perm)


def pair_shift_n(state: SparseState, pair: int, amount: int) -> SparseState:
    """Shift the second label index of a pair: A-side phase omega^(j*amount)."""
    qa, _ = _pair_qudits(state, pair)
    d = state.dims[qa]
    return apply_local_phase(state, qa, (np.arange(d) * amount) % d)


def dual_unitaries(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Single-qudit matrices of the dual-basis change: (A-side, B-side)."""
    j = np.arange(d)
    u_a = np.exp(2j * np.pi * np.outer(j, j) / d) / math.sqrt(d)
    return u_a, np.conj(u_a)


def _coalesce(
    dims: tuple[int, ...], keys: np.ndarray, amps: np.ndarray
) -> SparseState:
    uniq, inv = np.unique(keys, return_inverse=True)
    re = np.bincount(inv, weights=amps.real, minlength=len(uniq))
    im = np.bincount(inv, weights=amps.imag, minlength=len(uniq))
    summed = re + 1j * im
    keep = np.abs(summed) > PRUNE_TOL
    return SparseState(dims, uniq[keep], summed[keep])


def apply_dual_basis(state: SparseState, pair: int) -> SparseState:
    """Dual-basis change on one pair: inverse Fourier on A, forward on B."""
    qa, qb = _pair_qudits(state, pair)
    d = state.dims[qa]
    if state.dims[qb] != d:
        raise ValueError("pair qudits must share one dimension")
    if d == 1:
        return state
    u_a, u_b = dual_unitaries(d)
    u_pair = np.kron(u_a, u_b)  # (out a*d+b, in j*d+l)
    w = _weights(state.dims)
    ja, jb = state.qudit_values(qa), state.qudit_values(qb)
    base = state.keys - ja * w[qa] - jb * w[qb]
    code = np.arange(d * d, dtype=np.int64)
    offsets = (code // d) * w[qa] + (code % d) * w[qb]
    keys = (base[:, None] + offsets[None, :]).ravel()
    amps = (state.amps[:, None] * u_pair[:, ja * d + jb].T).ravel()
    return _coalesce(state.dims, keys, amps)


def split_pair(state: SparseState, pair: int, d_tilde: int) -> SparseState:
    """Reinterpret pair `pair` (dimension g*d_tilde) as a dim-g pair followed
    by a dim-d_tilde pair, via j = a*d_tilde + b on both sides.

    A pure relabeling of basis indices; amplitudes are untouched.
    """
    qa, qb = _pair_qudits(state, pair)
    d = state.dims[qa]
    if state.dims[qb] != d:
        raise ValueError("pair qudits must share one dimension")
    if d % d_tilde != 0:
        raise ValueError(f"d_tilde={d_tilde} does not divide pair dimension {d}")
    g = d // d_tilde
    w = _weights(state.dims)
    ja, jb = state.qudit_values(qa), state.qudit_values(qb)
    tail = w[qb]  # weight of everything after the pair
    aa, ba = divmod(ja, d_tilde)
    ab, bb = divmod(jb, d_tilde)
    keys = (
        state.keys
        - (ja * d + jb) * tail
        + ((aa * g + ab) * d_tilde * d_tilde + ba * d_tilde + bb) * tail
    )
    dims = state.dims[:qa] + (g, g, d_tilde, d_tilde) + state.dims[qb + 1 :]
    return SparseState(dims, keys, state.amps.copy())


# ---------------------------------------------------------------------------
# flags and measurements
# ---------------------------------------------------------------------------

def flag_mass(state: SparseState, pair: int, flag: FlagSubspace) -> float:
    """Squared norm of the state's component inside the flag subspace."""
    if flag.kind is FlagKind.SUM_OVER_M:
        state = apply_dual_basis(state, pair)
    qa, qb = _pair_qudits(state, pair)
    d = state.dims[qa]
    if d != flag.d:
        raise ValueError(f"flag dimension {flag.d} does not match pair ({d})")
    diff = (state.qudit_values(qb) - state.qudit_values(qa)) % d
    inside = diff == flag.value
    return float(np.sum(np.abs(state.amps[inside]) ** 2))


def flag_projector(flag: FlagSubspace) -> DenseOperator:
    """Projector sum over the flag family, built from the defining states."""
    d = flag.d
    total = np.zeros((d * d, d * d), dtype=complex)
    for free in range(d):
        if flag.kind is FlagKind.SUM_OVER_N:
            vec = build_mes(d, flag.value, free).dense(dense_cap=d * d)
        else:
            vec = build_mes(d, free, flag.value).dense(dense_cap=d * d)
        total += np.outer(vec, np.conj(vec))
    return DenseOperator((d, d), total)


def product_diagonal_projector(d: int, m: int) -> DenseOperator:
    """The separability witness sum_j |j, j+m><j, j+m| (computational basis)."""
    diag = np.zeros(d * d)
    j = np.arange(d)
    diag[j * d + (j + m) % d] = 1.0
    return DenseOperator((d, d), np.diag(diag).astype(complex))


def dual_product_diagonal_projector(d: int, n: int) -> DenseOperator:
    """sum_m P_mn expressed as a product-diagonal projector in the dual basis."""
    u_a, u_b = dual_unitaries(d)
    u_pair = np.kron(u_a, u_b)
    inner = product_diagonal_projector(d, n).matrix
    return DenseOperator((d, d), np.conj(u_pair).T @ inner @ u_pair)


def simulate_discrimination(
    protocol: LocalDiscriminationProtocol, state: SparseState, pair: int = 1
) -> dict[int, float]:
    """Outcome distribution of the inferred flag parameter on one pair.

    Statistics come straight from the amplitudes: both sides 'measure' the
    relevant local basis and the classical rule maps outcome pairs to the
    inferred index.
    """
    if protocol.kind is FlagKind.SUM_OVER_M:
        state = apply_dual_basis(state, pair)
    qa, qb = _pair_qudits(state, pair)
    d = state.dims[qa]
    inferred = (state.qudit_values(qb) - state.qudit_values(qa)) % d
    probs = np.abs(state.amps) ** 2
    dist: dict[int, float] = {}
    for value in np.unique(inferred):
        dist[int(value)] = float(np.sum(probs[inferred == value]))
    return dist


# ---------------------------------------------------------------------------
# dense operators
# ---------------------------------------------------------------------------

def reduced_density(
    state: SparseState, side: str, dense_cap: int = DEFAULT_DENSE_CAP
) -> DenseOperator:
    """Partial trace onto one side ("A" = even qudits, "B" = odd qudits)."""
    if side not in ("A", "B"):
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    keep = [q for q in range(len(state.dims)) if q % 2 == (0 if side == "A" else 1)]
    other = [q for q in range(len(state.dims)) if q not in keep]
    keep_dims = tuple(state.dims[q] for q in keep)
    dim_keep = int(np.prod(keep_dims, dtype=np.int64)) if keep_dims else 1
    if dim_keep > dense_cap:
        raise ResourceLimitError(
            f"reduced dimension {dim_keep} exceeds dense cap {dense_cap}"
        )

    def side_key(qudits: list[int]) -> np.ndarray:
        key = np.zeros(len(state.keys), dtype=np.int64)
        for q in qudits:
            key = key * state.dims[q] + state.qudit_values(q)
        return key

    kept = side_key(keep)
    traced = side_key(other)
    rho = np.zeros((dim_keep, dim_keep), dtype=complex)
    order = np.argsort(traced, kind="stable")
    kept, traced, amps = kept[order], traced[order], state.amps[order]
    boundaries = np.flatnonzero(np.diff(traced)) + 1
    for chunk_k, chunk_a in zip(
        np.split(kept, boundaries), np.split(amps, boundaries)
    ):
        rho[np.ix_(chunk_k, chunk_k)] += np.outer(chunk_a, np.conj(chunk_a))
    return DenseOperator(keep_dims, rho)


def density_from_ensemble(
    ensemble: BranchEnsemble, dense_cap: int = DEFAULT_DENSE_CAP
) -> DenseOperator:
    """Explicit matrix sum p_i |branch_i><branch_i|."""
    pair_dims = ensemble.dims
    qudit_dims: tuple[int, ...] = ()
    for d in pair_dims:
        qudit_dims += (d, d)
    side = int(np.prod(qudit_dims, dtype=np.int64)) if qudit_dims else 1
    if side > dense_cap:
        raise ResourceLimitError(
            f"total dimension {side} exceeds dense cap {dense_cap}"
        )
    rho = np.zeros((side, side), dtype=complex)
    for prob, word in ensemble.branches:
        vec = mes_word_state(word).dense(dense_cap)
        rho += float(prob) * np.outer(vec, np.conj(vec))
    return DenseOperator(qudit_dims, rho)


def dense_bxor_matrix(
    dims: tuple[int, ...], source_pair: int, target_pair: int
) -> np.ndarray:
    """Permutation matrix of the bilateral control-not on the given pairs."""
    side = int(np.prod(dims, dtype=np.int64))
    basis = SparseState(
        dims, np.arange(side, dtype=np.int64), np.ones(side, dtype=complex)
    )
    moved = apply_bxor(basis, source_pair, target_pair)
    matrix = np.zeros((side, side), dtype=complex)
    matrix[moved.keys, np.arange(side)] = 1.0
    return matrix


def partial_transpose_min_eig(
    operator: DenseOperator, transpose_qudits: list[int] | None = None
) -> float:
    """Minimum eigenvalue of the partial transpose (default: all B qudits)."""
    dims = operator.dims
    if transpose_qudits is None:
        transpose_qudits = [q for q in range(len(dims)) if q % 2 == 1]
    n = len(dims)
    tensor = operator.matrix.reshape(dims + dims)
    axes = list(range(2 * n))
    for q in transpose_qudits:
        axes[q], axes[n + q] = axes[n + q], axes[q]
    side = operator.matrix.shape[0]
    transposed = np.transpose(tensor, axes).reshape(side, side)
    eigenvalues = np.linalg.eigvalsh(transposed)
    return float(eigenvalues[0])


# ---------------------------------------------------------------------------
# certificate replay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst": self.worst,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class VerificationReport:
    d: int
    k: int
    passed: bool
    checks: tuple[CheckResult, ...]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
        }


def _replay_step_symbolic(pairs: list[MesLabel], step) -> None:
    if isinstance(step, BxorRound):
        for source in step.sources:
            pairs[source - 1], pairs[step.target - 1] = bxor_labels(
                pairs[source - 1], pairs[step.target - 1]
            )
    elif isinstance(step, LocalShiftM):
        pairs[step.slot - 1] = label_shift_m(pairs[step.slot - 1], step.amount)
    elif isinstance(step, DimensionSplit):
        g_label, tilde_label = factor_label(pairs[step.slot - 1], step.d_tilde)
        pairs[step.slot - 1 : step.slot] = [g_label, tilde_label]
    elif isinstance(step, DualBasis):
        for slot in step.slots:
            pairs[slot - 1] = dual_label(pairs[slot - 1])
    elif isinstance(step, FlagMeasurement):
        pass  # non-demolition: labels are unchanged
    else:
        raise TypeError(f"unknown step {step!r}")


def _replay_step_numeric(state: SparseState, step) -> SparseState:
    if isinstance(step, BxorRound):
        for source in step.sources:
            state = apply_bxor(state, source, step.target)
        return state
    if isinstance(step, LocalShiftM):
        return pair_shift_m(state, step.slot, step.amount)
    if isinstance(step, DimensionSplit):
        return split_pair(state, step.slot, step.d_tilde)
    if isinstance(step, DualBasis):
        for slot in step.slots:
            state = apply_dual_basis(state, slot)
        return state
    if isinstance(step, FlagMeasurement):
        return state
    raise TypeError(f"unknown step {step!r}")


def label_numeric_equivalence(
    d: int, k: int, tol: float = 1e-10
) -> list[CheckResult]:
    """Worst fidelity gap between each label rule and its numeric realization
    at dimension d; the collapse round is exercised at word length k."""
    checks = []

    worst = 0.0
    for m1 in range(d):
        for n1 in range(d):
            for m2 in range(d):
                for n2 in range(d):
                    word = LabelWord((MesLabel(d, m1, n1), MesLabel(d, m2, n2)))
                    state = apply_bxor(mes_word_state(word), 1, 2)
                    predicted = mes_word_state(
                        LabelWord(bxor_labels(word.pairs[0], word.pairs[1]))
                    )
                    worst = max(worst, 1.0 - state.fidelity(predicted))
    checks.append(
        CheckResult(
            "bxor_label_rule",
            worst <= tol,
            worst,
            "two-label control-not rule vs the numeric permutation",
        )
    )

    worst = 0.0
    for m in range(d):
        for n in range(d):
            word = LabelWord.uniform(d, m, n, k)
            state = mes_word_state(word)
            for source in range(1, k):
                state = apply_bxor(state, source, k)
            predicted = mes_word_state(script_b(word))
            worst = max(worst, 1.0 - state.fidelity(predicted))
    checks.append(
        CheckResult(
            "collapse_round_rule",
            worst <= tol,
            worst,
            f"collapse of uniform words of length {k} vs the labeled form",
        )
    )

    worst = 0.0
    for m in range(d):
        for n in range(d):
            state = apply_dual_basis(build_mes(d, m, n), 1)
            predicted = mes_word_state(LabelWord((dual_label(MesLabel(d, m, n)),)))
            worst = max(worst, 1.0 - state.fidelity(predicted))
    checks.append(
        CheckResult(
            "dual_basis_rule",
            worst <= tol,
            worst,
            "dual-basis relabeling vs the explicit Fourier pair",
        )
    )

    worst = 0.0
    for m in range(d):
        for n in range(d):
            for a in range(d):
                label = MesLabel(d, m, n)
                state = build_mes(d, m, n)
                shifted = pair_shift_m(state, 1, a)
                predicted = mes_word_state(LabelWord((label_shift_m(label, a),)))
                worst = max(worst, 1.0 - shifted.fidelity(predicted))
                phased = pair_shift_n(state, 1, a)
                predicted = mes_word_state(LabelWord((label_shift_n(label, a),)))
                worst = max(worst, 1.0 - phased.fidelity(predicted))
    checks.append(
        CheckResult(
            "label_shift_rules",
            worst <= tol,
            worst,
            "one-sided permutation/phase realizations of the label shifts",
        )
    )
    return checks


def verify_decomposition(
    d: int,
    k: int,
    tree: DecompositionTree,
    sparse_cap: int = DEFAULT_SPARSE_CAP,
    fidelity_tol: float = 1e-10,
    entrywise_tol: float = 1e-12,
) -> VerificationReport:
    """Replay the certificate numerically on every original branch.

    Asserts that (i) each branch lands entirely inside its predicted tag
    subspace, (ii) the numerically replayed state matches the symbolically
    replayed word with fidelity >= 1 - fidelity_tol, (iii) projectors of
    distinct tags are mutually orthogonal, and (iv) each tag projector is
    product-diagonal in the computational basis.  On top of the per-branch
    replay the leaf bookkeeping (probabilities, pure copies, separable
    residue) is checked against the observed group structure.  Failures come
    back in the report, not as exceptions.
    """
    if tree.d != d or tree.k != k:
        raise ValueError(f"tree is for ({tree.d}, {tree.k}), not ({d}, {k})")
    if d**k > sparse_cap:
        raise ResourceLimitError(
            f"d^k = {d**k} exceeds the sparse amplitude cap {sparse_cap}"
        )
    split = tree.split
    d_tilde = split.d_tilde

    tag_worst = 0.0
    fid_worst = 0.0
    structure_issues: list[str] = []
    # per leaf: final symbolic words of its branches, keyed by branch (m, n)
    group_words: dict[int, list[tuple[tuple[int, int], list[MesLabel]]]] = {}
    tag_slot_final: dict[int, int] = {}

    for m in range(d):
        for n in range(d):
            t = m % d_tilde if k >= 2 else 0
            leaf = tree.leaves[t]
            state = mes_word_state(LabelWord.uniform(d, m, n, k))
            pairs: list[MesLabel] = [MesLabel(d, m, n)] * k
            tag_pos: int | None = None
            for step in tree.steps:
                if step.scope is not None and step.scope != t:
                    continue
                if isinstance(step, FlagMeasurement):
                    expected = leaf.tag.value if leaf.tag is not None else None
                    if expected is None:
                        structure_issues.append(
                            f"branch ({m},{n}): flag measurement without a leaf tag"
                        )
                    else:
                        slot_dim = pairs[step.slot - 1].d
                        flag = FlagSubspace(slot_dim, step.kind, expected)
                        outside = 1.0 - flag_mass(state, step.slot, flag)
                        tag_worst = max(tag_worst, outside)
                    tag_pos = step.slot
                elif isinstance(step, DimensionSplit) and tag_pos is not None:
                    if step.slot <= tag_pos:
                        tag_pos += 1
                state = _replay_step_numeric(state, step)
                _replay_step_symbolic(pairs, step)
            predicted = mes_word_state(LabelWord(tuple(pairs)))
            fid_worst = max(fid_worst, 1.0 - state.fidelity(predicted))
            group_words.setdefault(t, []).append(((m, n), pairs))
            if tag_pos is not None:
                tag_slot_final[t] = tag_pos

    checks = [
        CheckResult(
            "tag_subspace_membership",
            tag_worst <= fidelity_tol,
            tag_worst,
            "mass outside the predicted tag subspace, worst branch",
        ),
        CheckResult(
            "residual_fidelity",
            fid_worst <= fidelity_tol,
            fid_worst,
            "1 - fidelity between numeric replay and labeled prediction",
        ),
    ]

    # leaf bookkeeping against the observed group structure
    total_probability = Fraction(0)
    for t, entries in sorted(group_words.items()):
        leaf = tree.leaves[t]
        total_probability += leaf.probability
        expected_prob = Fraction(len(entries), d * d)
        if leaf.probability != expected_prob:
            structure_issues.append(
                f"leaf {t}: probability {leaf.probability} != {expected_prob}"
            )
        words = [pairs for _, pairs in entries]
        num_slots = {len(pairs) for pairs in words}
        if len(num_slots) != 1:
            structure_issues.append(f"leaf {t}: ragged final words")
            continue
        if k == 1:
            # no steps: the leaf is the untouched single-pair uniform mixture
            observed_all = sorted((pairs[0].m, pairs[0].n) for pairs in words)
            if observed_all != sorted((mm, nn) for mm in range(d) for nn in range(d)):
                structure_issues.append(
                    "leaf 0: single-copy residue is not the full uniform mixture"
                )
            continue
        tag_pos = tag_slot_final.get(t)
        varying: list[int] = []
        pure_counts: dict[int, int] = {}
        for position in range(num_slots.pop()):
            if tag_pos is not None and position == tag_pos - 1:
                continue
            labels = {pairs[position] for pairs in words}
            if len(labels) == 1:
                dim = next(iter(labels)).d
                if dim > 1:
                    pure_counts[dim] = pure_counts.get(dim, 0) + 1
            else:
                varying.append(position)
        expected_pure: dict[int, int] = {}
        for dim, copies in leaf.pure_part:
            expected_pure[dim] = expected_pure.get(dim, 0) + copies
        if pure_counts != expected_pure:
            structure_issues.append(
                f"leaf {t}: pure copies {pure_counts} != recorded {expected_pure}"
            )
        flag_residues = [
            factor for factor in leaf.separable_part if factor.kind != "maximally_mixed"
        ]
        if len(varying) != len(flag_residues):
            structure_issues.append(
                f"leaf {t}: {len(varying)} varying slots vs "
                f"{len(flag_residues)} recorded separable residues"
            )
        elif varying:
            position = varying[0]
            residue = flag_residues[0]
            observed = sorted(
                (pairs[position].m, pairs[position].n) for pairs in words
            )
            g = residue.dim
            expected_labels = sorted(
                (0, s) for s in range(g) for _ in range(len(words) // g)
            )
            if observed != expected_labels or len(words) % g != 0:
                structure_issues.append(
                    f"leaf {t}: separable residue labels are not the uniform "
                    f"phase family in dimension {g}"
                )
    if total_probability != 1:
        structure_issues.append(f"leaf probabilities sum to {total_probability}")
    checks.append(
        CheckResult(
            "leaf_structure",
            not structure_issues,
            float(len(structure_issues)),
            "; ".join(structure_issues) if structure_issues else
            "probabilities, pure copies, and separable residues all match",
        )
    )

    # tag projector orthogonality and product-diagonal form
    tags = [leaf.tag for leaf in tree.leaves if leaf.tag is not None]
    ortho_worst = 0.0
    diag_worst = 0.0
    projectors = {
        tag.value: flag_projector(FlagSubspace(d, tag.kind, tag.value)).matrix
        for tag in tags
    }
    for value, projector in projectors.items():
        witness = product_diagonal_projector(d, value).matrix
        diag_worst = max(diag_worst, float(np.max(np.abs(projector - witness))))
    values = sorted(projectors)
    for i, v1 in enumerate(values):
        for v2 in values[i + 1 :]:
            ortho_worst = max(
                ortho_worst,
                float(np.max(np.abs(projectors[v1] @ projectors[v2]))),
            )
    checks.append(
        CheckResult(
            "tag_orthogonality",
            ortho_worst <= fidelity_tol,
            ortho_worst,
            "largest entry of a cross product of distinct tag projectors",
        )
    )
    checks.append(
        CheckResult(
            "flag_product_diagonal",
            diag_worst <= entrywise_tol,
            diag_worst,
            "entrywise gap between tag projectors and their product-diagonal form",
        )
    )

    return VerificationReport(
        d=d, k=k, passed=all(check.passed for check in checks), checks=tuple(checks)
    )
