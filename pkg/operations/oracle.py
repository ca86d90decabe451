"""
Exact full-space operations module.

Brute-force versions of the Dicke-basis computations on the 2^N dimensional
space of N qubits (qubit 1 most significant, |0> the +1/2 eigenstate of
s_z), local hidden variable enumeration for symmetric Bell inequalities, and
the Mermin operator. Everything here is independent of the symmetric-space
shortcuts and is used to cross-check them.
"""
import functools
import itertools
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.special import comb

from common.errors import (
    DimensionMismatchError,
    EnumerationBudgetError,
    InvalidStateError,
    SizeLimitError,
    ValidationError,
)
from operations.bell import Correlators, MeasurementSettings, SymmetricInequality
from operations.fisher import ghz_witness_operator
from operations.symmetric import MIXED, PURE, SymmetricState

logger = logging.getLogger(__name__)

MAX_FULL_PARTIES = 10
MAX_MIXED_PARTIES = 8
MAX_MERMIN_LHV_PARTIES = 8

ENUMERATION_BUDGET = 10 ** 7
ENUMERATION_CHUNK = 1 << 16

NORM_TOL = 1e-10
SYMMETRIC_TOL = 1e-9
PPT_TOL = 1e-10
# diagonal shift keeping the SLD equation solvable on rank-deficient states
SLD_SHIFT = 1e-12

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _check_size(n: int, limit: int, what: str) -> None:
    if n < 1:
        raise ValidationError(f"Party count must be positive, got {n}")
    if n > limit:
        raise SizeLimitError(f"{what} is limited to N <= {limit}, got N={n}")


@dataclass(frozen=True, eq=False)
class FullState:
    """Pure or mixed state of N qubits in the computational basis."""
    n_parties: int
    kind: str
    amplitudes: Optional[np.ndarray] = None
    density: Optional[np.ndarray] = None

    def __post_init__(self):
        _check_size(self.n_parties, MAX_FULL_PARTIES, "Full-space state")
        dim = 2 ** self.n_parties

        if self.kind == PURE:
            amplitudes = np.array(self.amplitudes, dtype=complex)
            if amplitudes.shape != (dim,):
                raise DimensionMismatchError(f"Expected {dim} amplitudes, got shape {amplitudes.shape}")
            if abs(np.vdot(amplitudes, amplitudes).real - 1.0) > NORM_TOL:
                raise InvalidStateError("Amplitudes are not normalized")
            amplitudes.setflags(write=False)
            object.__setattr__(self, "amplitudes", amplitudes)
        elif self.kind == MIXED:
            _check_size(self.n_parties, MAX_MIXED_PARTIES, "Full-space mixed state")
            density = np.array(self.density, dtype=complex)
            if density.shape != (dim, dim):
                raise DimensionMismatchError(f"Expected a {dim}x{dim} density matrix, got shape {density.shape}")
            if np.max(np.abs(density - density.conj().T)) > NORM_TOL:
                raise InvalidStateError("Density matrix is not Hermitian")
            if abs(np.trace(density) - 1.0) > NORM_TOL:
                raise InvalidStateError("Density matrix does not have unit trace")
            density.setflags(write=False)
            object.__setattr__(self, "density", density)
        else:
            raise ValidationError(f"Unknown state kind '{self.kind}'")

    @property
    def dim(self) -> int:
        return 2 ** self.n_parties

    @property
    def is_pure(self) -> bool:
        return self.kind == PURE

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.amplitudes, self.amplitudes.conj())
        return np.array(self.density)


@dataclass(frozen=True)
class DeterministicStrategy:
    """
    Local deterministic strategy up to permutations of the parties.

    Strategy type s assigns outcome -1 to setting k when bit k of s is set,
    +1 otherwise; counts[s] parties follow type s.
    """
    n_parties: int
    m: int
    counts: Tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) != 2 ** self.m:
            raise ValidationError(f"Expected {2 ** self.m} strategy counts, got {len(self.counts)}")
        if any(c < 0 for c in self.counts) or sum(self.counts) != self.n_parties:
            raise ValidationError(f"Strategy counts {self.counts} do not sum to N={self.n_parties}")

    def per_party(self) -> Tuple[int, ...]:
        """Strategy type of every party, in ascending type order."""
        return tuple(s for s, count in enumerate(self.counts) for _ in range(count))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class LhvResult:
    """Minimum of a Bell expression over local deterministic strategies."""
    min_value: float
    argmin: DeterministicStrategy
    classes: int

    def to_dict(self) -> Dict[str, Any]:
        return {"min_value": self.min_value, "argmin": self.argmin.to_dict(), "classes": self.classes}


@dataclass(frozen=True, eq=False)
class MerminOperator:
    """Mermin Bell operator Re prod_i (sigma_x + i sigma_y) and the constant mapping it onto W."""
    n_parties: int
    matrix: np.ndarray
    normalization: float

    def normalized(self) -> np.ndarray:
        return self.normalization * self.matrix


@dataclass(frozen=True)
class MerminFit:
    """Least-squares fit W ~ c M on the span of |0...0> and |1...1>."""
    constant: float
    phase: float
    residual: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class PptResult:
    negative_eigenvalue: float
    entangled: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# ---------------------------------------------------------------------------
# Symmetric embedding
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=16)
def _embedding(n: int) -> np.ndarray:
    """Columns are the Dicke states: uniform superpositions of Hamming weight k."""
    weights = np.array([bin(i).count("1") for i in range(2 ** n)])
    matrix = np.zeros((2 ** n, n + 1))
    matrix[np.arange(2 ** n), weights] = 1.0 / np.sqrt(comb(n, weights))
    matrix.setflags(write=False)
    return matrix


def embed_symmetric(state: SymmetricState) -> FullState:
    """
    Map a Dicke-basis state onto the full 2^N space.

    Args:
        state: Symmetric state with N <= 10 (N <= 8 when mixed)

    Returns:
        FullState
    """
    _check_size(state.n_parties, MAX_FULL_PARTIES, "Embedding")
    embedding = _embedding(state.n_parties)
    if state.is_pure:
        return FullState(state.n_parties, PURE, amplitudes=embedding @ state.amplitudes)
    return FullState(state.n_parties, MIXED, density=embedding @ state.density @ embedding.T)


def embed_operator(n: int, matrix: np.ndarray) -> np.ndarray:
    """Operator on the Dicke space extended by zero outside the symmetric subspace."""
    _check_size(n, MAX_FULL_PARTIES, "Embedding")
    embedding = _embedding(n)
    return embedding @ matrix @ embedding.T


def project_symmetric(state: FullState) -> SymmetricState:
    """
    Inverse of embed_symmetric.

    Raises:
        InvalidStateError: If the state has weight outside the symmetric subspace
    """
    embedding = _embedding(state.n_parties)
    if state.is_pure:
        amplitudes = embedding.T @ state.amplitudes
        leaked = 1.0 - float(np.vdot(amplitudes, amplitudes).real)
        if leaked > SYMMETRIC_TOL:
            raise InvalidStateError(f"State is not permutation symmetric (weight {leaked:.3g} outside)")
        return SymmetricState.pure(amplitudes / np.linalg.norm(amplitudes))

    density = embedding.T @ state.density @ embedding
    leaked = 1.0 - float(np.trace(density).real)
    if leaked > SYMMETRIC_TOL:
        raise InvalidStateError(f"State is not permutation symmetric (weight {leaked:.3g} outside)")
    density = 0.5 * (density + density.conj().T)
    return SymmetricState.mixed(density / np.trace(density).real)


# ---------------------------------------------------------------------------
# Site operators and expectations
# ---------------------------------------------------------------------------

def site_operator(n: int, site: int, single: np.ndarray) -> np.ndarray:
    """Single-qubit operator acting on one site, identity elsewhere."""
    return np.kron(np.kron(np.eye(2 ** site), single), np.eye(2 ** (n - site - 1)))


def collective_operator_full(n: int, direction: Sequence[float]) -> np.ndarray:
    """
    S_n = 1/2 sum_i n.sigma^(i) on the full space.

    Args:
        n: Number of qubits, at most 10
        direction: Unit vector (x, y, z)

    Returns:
        2^N x 2^N Hermitian matrix
    """
    _check_size(n, MAX_FULL_PARTIES, "Collective operator")
    nx, ny, nz = (float(c) for c in direction)
    single = 0.5 * (nx * PAULI_X + ny * PAULI_Y + nz * PAULI_Z)
    total = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for site in range(n):
        total += site_operator(n, site, single)
    return total


def expectation_full(state: FullState, matrix: np.ndarray) -> float:
    """Real part of Tr(rho M) on the full space."""
    if matrix.shape != (state.dim, state.dim):
        raise DimensionMismatchError(f"Operator of shape {matrix.shape} does not act on N={state.n_parties}")
    if state.is_pure:
        return float(np.vdot(state.amplitudes, matrix @ state.amplitudes).real)
    return float(np.einsum("ij,ji->", state.density, matrix).real)


def _apply_site(tensor: np.ndarray, single: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(single, tensor, axes=([1], [axis])), 0, axis)


def _site_expectation(state: FullState, factors: Iterable[Tuple[int, np.ndarray]]) -> float:
    """<prod_i O^(i)> for single-qubit operators on distinct sites."""
    n = state.n_parties
    if state.is_pure:
        tensor = state.amplitudes.reshape((2,) * n)
        applied = tensor
        for site, single in factors:
            applied = _apply_site(applied, single, site)
        return float(np.vdot(tensor, applied).real)

    applied = state.density.reshape((2,) * (2 * n))
    for site, single in factors:
        applied = _apply_site(applied, single, site)
    return float(np.trace(applied.reshape(state.dim, state.dim)).real)


def correlators_bruteforce(state: FullState, settings: MeasurementSettings) -> Correlators:
    """
    Symmetrized correlators summed literally over sites and ordered pairs of distinct sites.

    Args:
        state: Full-space state
        settings: Identical settings for all parties

    Returns:
        Map from (k,) and (k, l) to correlator values
    """
    n = state.n_parties
    singles = [d[0] * PAULI_X + d[1] * PAULI_Y + d[2] * PAULI_Z for d in settings.directions()]
    correlators: Correlators = {}
    for k, single in enumerate(singles):
        correlators[(k,)] = sum(_site_expectation(state, [(i, single)]) for i in range(n))
    for k, first in enumerate(singles):
        for l, second in enumerate(singles):
            correlators[(k, l)] = sum(
                _site_expectation(state, [(i, first), (j, second)])
                for i in range(n) for j in range(n) if i != j
            )
    return correlators


def qfi_exact_full(state: FullState, generator: np.ndarray) -> float:
    """
    QFI on the full space: 4 Var(A) for pure states, Tr(rho L^2) for mixed ones.

    The symmetric logarithmic derivative L solves rho L + L rho = 2i[rho, A],
    a continuous Lyapunov equation.

    Args:
        state: Full-space state, mixed ones limited to N <= 8
        generator: 2^N x 2^N Hermitian generator

    Returns:
        QFI
    """
    if generator.shape != (state.dim, state.dim):
        raise DimensionMismatchError(f"Generator of shape {generator.shape} does not act on N={state.n_parties}")
    if state.is_pure:
        applied = generator @ state.amplitudes
        mean = np.vdot(state.amplitudes, applied).real
        second = np.vdot(applied, applied).real
        return float(4.0 * max(second - mean * mean, 0.0))
    _check_size(state.n_parties, MAX_MIXED_PARTIES, "Mixed-state QFI")
    return _sld_qfi(state.density, generator)


def _sld_qfi(density: np.ndarray, generator: np.ndarray) -> float:
    shifted = density + SLD_SHIFT * np.eye(density.shape[0])
    sld = linalg.solve_continuous_lyapunov(shifted, 2j * (density @ generator - generator @ density))
    sld = 0.5 * (sld + sld.conj().T)
    return float(max(np.einsum("ij,jk,ki->", density, sld, sld).real, 0.0))


def ppt_bipartite_check(state: FullState, cut: Sequence[int]) -> PptResult:
    """
    Partial transpose criterion across a bipartition.

    The transpose acts on the parties outside `cut`.

    Args:
        state: Full-space state, N <= 8
        cut: 0-based indices of the parties in the first part

    Returns:
        PptResult; entangled when the smallest eigenvalue is below -1e-10
    """
    n = state.n_parties
    _check_size(n, MAX_MIXED_PARTIES, "PPT check")
    first = set(int(i) for i in cut)
    if len(first) != len(cut) or not first or len(first) >= n or any(not 0 <= i < n for i in first):
        raise ValidationError(f"Invalid bipartition {list(cut)} of {n} parties")

    tensor = state.density_matrix().reshape((2,) * (2 * n))
    axes = list(range(2 * n))
    for site in range(n):
        if site not in first:
            axes[site], axes[n + site] = axes[n + site], axes[site]
    transposed = np.transpose(tensor, axes).reshape(state.dim, state.dim)
    smallest = float(linalg.eigvalsh(transposed)[0])
    return PptResult(negative_eigenvalue=smallest, entangled=smallest < -PPT_TOL)


# ---------------------------------------------------------------------------
# Local hidden variable enumeration
# ---------------------------------------------------------------------------

def _strategy_outcomes(m: int) -> np.ndarray:
    types = np.arange(2 ** m)[:, None]
    bits = (types >> np.arange(m)[None, :]) & 1
    return 1.0 - 2.0 * bits


def _coefficients(inequality: SymmetricInequality) -> Tuple[np.ndarray, np.ndarray]:
    one_body = np.asarray(inequality.one_body, dtype=float)
    two_body = np.asarray(inequality.two_body, dtype=float)
    if two_body.shape != (inequality.m, inequality.m):
        raise ValidationError(f"Two-body weights must be {inequality.m}x{inequality.m}")
    return one_body, two_body


def strategy_value(inequality: SymmetricInequality, strategy: DeterministicStrategy) -> float:
    """
    Bell expression for a deterministic strategy.

    C_k = sum_i a_k^(i) and C_kl = C_k C_l - sum_i a_k^(i) a_l^(i).
    """
    if strategy.m != inequality.m:
        raise ValidationError(f"Strategy has m={strategy.m} but the inequality has m={inequality.m}")
    one_body, two_body = _coefficients(inequality)
    outcomes = _strategy_outcomes(strategy.m)
    counts = np.asarray(strategy.counts, dtype=float)
    ones = counts @ outcomes
    same_site = np.einsum("s,sk,sl->kl", counts, outcomes, outcomes)
    pairs = np.outer(ones, ones) - same_site
    return float(inequality.constant + one_body @ ones + np.sum(two_body * pairs))


def count_strategy_classes(n: int, m: int) -> int:
    """Number of multisets of N strategy types out of 2^m."""
    types = 2 ** m
    return int(comb(n + types - 1, types - 1, exact=True))


def lhv_bound_symmetric(n: int, inequality: SymmetricInequality) -> LhvResult:
    """
    Minimum of a symmetric Bell expression over local deterministic strategies.

    Parties are interchangeable, so strategies are enumerated as multisets of
    strategy types in lexicographic order; ties keep the first one found.

    Args:
        n: Number of parties
        inequality: Symmetric inequality with m settings

    Returns:
        LhvResult

    Raises:
        EnumerationBudgetError: If there are more than 1e7 strategy classes
    """
    if n < 1:
        raise ValidationError(f"Party count must be positive, got {n}")
    m = inequality.m
    classes = count_strategy_classes(n, m)
    if classes > ENUMERATION_BUDGET:
        raise EnumerationBudgetError(
            f"{classes} strategy classes for N={n}, m={m} exceed the budget of {ENUMERATION_BUDGET}",
            classes,
        )
    logger.debug("Enumerating %d strategy classes for N=%d, m=%d", classes, n, m)

    one_body, two_body = _coefficients(inequality)
    outcomes = _strategy_outcomes(m)
    types = outcomes.shape[0]
    same_site_terms = np.einsum("sk,sl,kl->s", outcomes, outcomes, two_body)

    best_value, best_counts = math.inf, None
    combinations = itertools.combinations_with_replacement(range(types), n)
    while True:
        chunk = np.array(list(itertools.islice(combinations, ENUMERATION_CHUNK)), dtype=int)
        if chunk.size == 0:
            break
        counts = np.zeros((chunk.shape[0], types))
        np.add.at(counts, (np.repeat(np.arange(chunk.shape[0]), n), chunk.ravel()), 1.0)

        ones = counts @ outcomes
        values = (
            inequality.constant
            + ones @ one_body
            + np.einsum("ck,kl,cl->c", ones, two_body, ones)
            - counts @ same_site_terms
        )
        index = int(np.argmin(values))
        if values[index] < best_value:
            best_value, best_counts = float(values[index]), counts[index]

    argmin = DeterministicStrategy(n, m, tuple(int(c) for c in best_counts))
    return LhvResult(min_value=best_value, argmin=argmin, classes=classes)


def naive_lhv_minimum(n: int, inequality: SymmetricInequality) -> float:
    """
    Minimum over all 2^(mN) per-party outcome assignments, correlators summed site by site.

    Args:
        n: Number of parties
        inequality: Symmetric inequality with m settings

    Returns:
        Minimal value of the Bell expression
    """
    m = inequality.m
    total = 2 ** (m * n)
    if total > ENUMERATION_BUDGET:
        raise EnumerationBudgetError(f"{total} assignments exceed the budget of {ENUMERATION_BUDGET}", total)

    one_body, two_body = _coefficients(inequality)
    outcomes = _strategy_outcomes(m)
    best = math.inf
    for assignment in itertools.product(range(2 ** m), repeat=n):
        a = outcomes[list(assignment)]
        value = inequality.constant
        for k in range(m):
            value += one_body[k] * a[:, k].sum()
            for l in range(m):
                if two_body[k, l]:
                    value += two_body[k, l] * sum(a[i, k] * a[j, l] for i in range(n) for j in range(n) if i != j)
        best = min(best, float(value))
    return best


# ---------------------------------------------------------------------------
# Mermin
# ---------------------------------------------------------------------------

def _mermin_raw(n: int) -> np.ndarray:
    factor = PAULI_X + 1j * PAULI_Y
    product = factor
    for _ in range(n - 1):
        product = np.kron(product, factor)
    return 0.5 * (product + product.conj().T)


def mermin_fit(n: int) -> MerminFit:
    """
    Fit W = N(|GHZ><GHZ| - |GHZ_perp><GHZ_perp|) by c M on the span of |0...0> and |1...1>.

    Args:
        n: Number of parties, 2 <= N <= 10

    Returns:
        MerminFit with |c|, arg(c) and the largest entry of |c M - W| on the full space
    """
    if n < 2:
        raise ValidationError(f"Mermin operator needs N >= 2, got {n}")
    _check_size(n, MAX_FULL_PARTIES, "Mermin operator")
    raw = _mermin_raw(n)
    witness = embed_operator(n, ghz_witness_operator(n).matrix)

    corners = [0, 2 ** n - 1]
    raw_block = raw[np.ix_(corners, corners)]
    witness_block = witness[np.ix_(corners, corners)]
    constant = np.vdot(raw_block, witness_block) / np.vdot(raw_block, raw_block)
    residual = float(np.max(np.abs(constant * raw - witness)))
    return MerminFit(constant=float(abs(constant)), phase=float(np.angle(constant)), residual=residual)


def mermin_operator(n: int) -> MerminOperator:
    """Mermin operator built by Kronecker recursion, with its fitted normalization."""
    fit = mermin_fit(n)
    return MerminOperator(n_parties=n, matrix=_mermin_raw(n), normalization=fit.constant)


def mermin_lhv_max(n: int, normalized: bool = True) -> float:
    """
    Largest value of Re prod_i (a_i + i b_i) over all outcomes a_i, b_i = +/-1.

    Args:
        n: Number of parties, 2 <= N <= 8
        normalized: Scale by the fitted constant onto the W normalization

    Returns:
        Local bound of the Mermin expression
    """
    if n < 2:
        raise ValidationError(f"Mermin operator needs N >= 2, got {n}")
    _check_size(n, MAX_MERMIN_LHV_PARTIES, "Mermin LHV enumeration")
    factors = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])
    products = np.ones(1, dtype=complex)
    for _ in range(n):
        products = np.multiply.outer(products, factors).ravel()
    best = float(np.max(products.real))
    logger.debug("Mermin LHV max for N=%d over %d strategies: %.12g", n, products.size, best)
    return best * mermin_fit(n).constant if normalized else best
