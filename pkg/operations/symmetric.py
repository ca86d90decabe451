"""
Symmetric-subspace operations module.

States of N qubits that are invariant under permutations live in the
(N+1)-dimensional Dicke basis |N/2, m>, index k holding m = N/2 - k. Collective
spin operators S_a = 1/2 sum_i sigma_a^(i) act within that space, so every
quantity of the library is computed there exactly.
"""
import functools
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.special import gammaln

from common.errors import (
    DimensionMismatchError,
    InvalidStateError,
    NonHermitianError,
    ValidationError,
)

logger = logging.getLogger(__name__)

# Tolerances of the state and operator invariants
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
SPECTRAL_HERMITIAN_TOL = 1e-10
EIGEN_CLAMP = 1e-10

# Resolution of the squeezing-frame search
FRAME_GRID = 64
FRAME_XATOL = 1e-10

PURE = "pure"
MIXED = "mixed"


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex, copy=True)
    array.setflags(write=False)
    return array


def _hermitian_defect(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0


@dataclass(frozen=True, eq=False)
class SymmetricState:
    """Pure or mixed state in the Dicke basis of N qubits."""
    n_parties: int
    kind: str
    amplitudes: Optional[np.ndarray] = None
    density: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n_parties < 1:
            raise ValidationError(f"Party count must be positive, got {self.n_parties}")

        dim = self.n_parties + 1
        if self.kind == PURE:
            if self.amplitudes is None:
                raise InvalidStateError("Pure state needs amplitudes")
            amplitudes = _readonly(self.amplitudes)
            if amplitudes.shape != (dim,):
                raise DimensionMismatchError(
                    f"Expected {dim} amplitudes for N={self.n_parties}, got shape {amplitudes.shape}"
                )
            norm = float(np.vdot(amplitudes, amplitudes).real)
            if abs(norm - 1.0) > NORM_TOL:
                raise InvalidStateError(f"Amplitudes are not normalized (norm {norm!r})")
            object.__setattr__(self, "amplitudes", amplitudes)
            object.__setattr__(self, "density", None)

        elif self.kind == MIXED:
            if self.density is None:
                raise InvalidStateError("Mixed state needs a density matrix")
            density = _readonly(self.density)
            if density.shape != (dim, dim):
                raise DimensionMismatchError(
                    f"Expected a {dim}x{dim} density matrix for N={self.n_parties}, got shape {density.shape}"
                )
            if _hermitian_defect(density) > HERMITIAN_TOL:
                raise InvalidStateError("Density matrix is not Hermitian")
            trace = complex(np.trace(density))
            if abs(trace - 1.0) > NORM_TOL:
                raise InvalidStateError(f"Density matrix has trace {trace!r}")
            smallest = float(linalg.eigvalsh(density)[0])
            if smallest < -EIGEN_CLAMP:
                raise InvalidStateError(f"Density matrix has negative eigenvalue {smallest!r}")
            object.__setattr__(self, "density", density)
            object.__setattr__(self, "amplitudes", None)

        else:
            raise ValidationError(f"Unknown state kind '{self.kind}'")

    @classmethod
    def pure(cls, amplitudes: Sequence[complex]) -> "SymmetricState":
        """Build a pure state, inferring N from the vector length."""
        amplitudes = np.asarray(amplitudes, dtype=complex)
        return cls(n_parties=amplitudes.shape[0] - 1, kind=PURE, amplitudes=amplitudes)

    @classmethod
    def mixed(cls, density: np.ndarray) -> "SymmetricState":
        """Build a mixed state, inferring N from the matrix size."""
        density = np.asarray(density, dtype=complex)
        return cls(n_parties=density.shape[0] - 1, kind=MIXED, density=density)

    @property
    def dim(self) -> int:
        return self.n_parties + 1

    @property
    def is_pure(self) -> bool:
        return self.kind == PURE

    def density_matrix(self) -> np.ndarray:
        """Density matrix of the state (outer product for pure states)."""
        if self.is_pure:
            return np.outer(self.amplitudes, self.amplitudes.conj())
        return np.array(self.density)

    def expect(self, matrix: np.ndarray) -> complex:
        """Complex expectation value Tr(rho M)."""
        if matrix.shape != (self.dim, self.dim):
            raise DimensionMismatchError(
                f"Operator of shape {matrix.shape} does not act on N={self.n_parties} state"
            )
        if self.is_pure:
            return complex(np.vdot(self.amplitudes, matrix @ self.amplitudes))
        return complex(np.einsum("ij,ji->", self.density, matrix))


@dataclass(frozen=True, eq=False)
class CollectiveOperator:
    """Hermitian operator on the Dicke space of N qubits."""
    n_parties: int
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        matrix = _readonly(self.matrix)
        dim = self.n_parties + 1
        if matrix.shape != (dim, dim):
            raise DimensionMismatchError(
                f"Expected a {dim}x{dim} operator for N={self.n_parties}, got shape {matrix.shape}"
            )
        scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
        if _hermitian_defect(matrix) > HERMITIAN_TOL * scale:
            raise NonHermitianError(f"Operator '{self.label}' is not Hermitian")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, label: str = "") -> "CollectiveOperator":
        matrix = np.asarray(matrix, dtype=complex)
        return cls(n_parties=matrix.shape[0] - 1, matrix=matrix, label=label)

    @property
    def dim(self) -> int:
        return self.n_parties + 1

    def sup_norm(self) -> float:
        """Operator norm, the largest absolute eigenvalue."""
        return float(np.max(np.abs(linalg.eigvalsh(self.matrix))))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues (ascending) and unitary eigenvector columns of a Hermitian matrix."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T

    def apply_function(self, values: np.ndarray) -> np.ndarray:
        """U diag(values) U^dagger for values computed from the eigenvalues."""
        return (self.eigenvectors * values) @ self.eigenvectors.conj().T

    def unitary(self, t: float) -> np.ndarray:
        """exp(-i M t)."""
        return self.apply_function(np.exp(-1j * t * self.eigenvalues))


def spectral(matrix: np.ndarray) -> SpectralDecomposition:
    """
    Spectral decomposition of a Hermitian matrix.

    Args:
        matrix: Square Hermitian matrix

    Returns:
        SpectralDecomposition with ascending real eigenvalues

    Raises:
        NonHermitianError: If the matrix deviates from Hermitian beyond 1e-10
    """
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(f"Expected a square matrix, got shape {matrix.shape}")

    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if _hermitian_defect(matrix) > SPECTRAL_HERMITIAN_TOL * scale:
        raise NonHermitianError("Spectral decomposition needs a Hermitian matrix")

    if matrix.shape[0] > 256:
        logger.debug("Diagonalizing %dx%d matrix", matrix.shape[0], matrix.shape[1])

    eigenvalues, eigenvectors = linalg.eigh(0.5 * (matrix + matrix.conj().T))
    eigenvalues.setflags(write=False)
    eigenvectors.setflags(write=False)
    return SpectralDecomposition(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def _check_parties(n: int, minimum: int = 1) -> None:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise ValidationError(f"Party count must be an integer, got {n!r}")
    if n < minimum:
        raise ValidationError(f"Party count must be at least {minimum}, got {n}")


def m_values(n: int) -> np.ndarray:
    """S_z eigenvalues N/2, N/2 - 1, ..., -N/2 in basis order."""
    _check_parties(n)
    return n / 2.0 - np.arange(n + 1)


@functools.lru_cache(maxsize=64)
def _raising_matrix(n: int) -> np.ndarray:
    j = n / 2.0
    m = m_values(n)
    raising = np.zeros((n + 1, n + 1), dtype=complex)
    # S_+ |j, m_k> = sqrt(j(j+1) - m_k(m_k+1)) |j, m_k + 1>, and m_k + 1 sits at k - 1
    k = np.arange(1, n + 1)
    raising[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    raising.setflags(write=False)
    return raising


def dicke_operator_splus(n: int) -> np.ndarray:
    """Raising operator S_+ in the Dicke basis."""
    _check_parties(n)
    return np.array(_raising_matrix(n))


def dicke_operator_sminus(n: int) -> np.ndarray:
    """Lowering operator S_- in the Dicke basis."""
    _check_parties(n)
    return _raising_matrix(n).conj().T.copy()


def dicke_operator_sx(n: int) -> CollectiveOperator:
    """
    Collective spin S_x = 1/2 sum_i sigma_x^(i).

    Args:
        n: Number of qubits

    Returns:
        S_x as a CollectiveOperator
    """
    _check_parties(n)
    raising = _raising_matrix(n)
    return CollectiveOperator(n, 0.5 * (raising + raising.conj().T), "Sx")


def dicke_operator_sy(n: int) -> CollectiveOperator:
    """
    Collective spin S_y = 1/2 sum_i sigma_y^(i).

    Args:
        n: Number of qubits

    Returns:
        S_y as a CollectiveOperator
    """
    _check_parties(n)
    raising = _raising_matrix(n)
    return CollectiveOperator(n, (raising - raising.conj().T) / 2j, "Sy")


def dicke_operator_sz(n: int) -> CollectiveOperator:
    """
    Collective spin S_z = 1/2 sum_i sigma_z^(i), diagonal with entries m.

    Args:
        n: Number of qubits

    Returns:
        S_z as a CollectiveOperator
    """
    _check_parties(n)
    return CollectiveOperator(n, np.diag(m_values(n)).astype(complex), "Sz")


def dicke_operator(n: int, direction: Sequence[float], label: str = "") -> CollectiveOperator:
    """
    Collective spin along a unit direction (x, y, z).

    Args:
        n: Number of qubits
        direction: Three components; normalized internally
        label: Optional label

    Returns:
        n_x S_x + n_y S_y + n_z S_z
    """
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (3,) or not np.all(np.isfinite(direction)):
        raise ValidationError(f"Direction must have three finite components, got {direction!r}")
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        raise ValidationError("Direction must be nonzero")
    nx, ny, nz = direction / norm
    matrix = (
        nx * dicke_operator_sx(n).matrix
        + ny * dicke_operator_sy(n).matrix
        + nz * dicke_operator_sz(n).matrix
    )
    return CollectiveOperator(n, matrix, label or f"S[{nx:.3g},{ny:.3g},{nz:.3g}]")


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """[A, B] = AB - BA."""
    return a @ b - b @ a


def expectation(state: SymmetricState, operator: CollectiveOperator) -> float:
    """Real expectation value of a Hermitian operator."""
    check_dimensions(state, operator)
    return state.expect(operator.matrix).real


def second_moment(state: SymmetricState, a: CollectiveOperator, b: CollectiveOperator) -> float:
    """Symmetrized second moment <AB + BA>/2."""
    check_dimensions(state, a)
    check_dimensions(state, b)
    return 0.5 * state.expect(a.matrix @ b.matrix + b.matrix @ a.matrix).real


def check_dimensions(state: SymmetricState, operator: CollectiveOperator) -> None:
    if state.n_parties != operator.n_parties:
        raise DimensionMismatchError(
            f"State has N={state.n_parties} but operator '{operator.label}' has N={operator.n_parties}"
        )


# ---------------------------------------------------------------------------
# State families
# ---------------------------------------------------------------------------

def state_dicke(n: int, k: int) -> SymmetricState:
    """Dicke basis state with index k, i.e. m = N/2 - k."""
    _check_parties(n)
    if not 0 <= k <= n:
        raise ValidationError(f"Dicke index must lie in [0, {n}], got {k}")
    amplitudes = np.zeros(n + 1, dtype=complex)
    amplitudes[k] = 1.0
    return SymmetricState.pure(amplitudes)


def state_ghz(n: int) -> SymmetricState:
    """
    GHZ state (|0...0> + |1...1>)/sqrt(2).

    Args:
        n: Number of qubits, at least 2

    Returns:
        Pure symmetric state
    """
    _check_parties(n, 2)
    amplitudes = np.zeros(n + 1, dtype=complex)
    amplitudes[0] = amplitudes[n] = 1 / math.sqrt(2)
    return SymmetricState.pure(amplitudes)


def state_ghz_perp(n: int) -> SymmetricState:
    """
    State orthogonal to GHZ in its span, (|0...0> - |1...1>)/sqrt(2).

    Args:
        n: Number of qubits, at least 2

    Returns:
        Pure symmetric state
    """
    _check_parties(n, 2)
    amplitudes = np.zeros(n + 1, dtype=complex)
    amplitudes[0] = 1 / math.sqrt(2)
    amplitudes[n] = -1 / math.sqrt(2)
    return SymmetricState.pure(amplitudes)


def state_css(n: int, theta: float, phi: float = 0.0) -> SymmetricState:
    """
    Coherent spin state (cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>)^N.

    Args:
        n: Number of qubits
        theta: Polar angle in radians (0 gives |0...0>, m = +N/2)
        phi: Azimuthal angle in radians

    Returns:
        Pure symmetric state with binomial amplitudes
    """
    _check_parties(n)
    if not (math.isfinite(theta) and math.isfinite(phi)):
        raise ValidationError("Angles must be finite")

    k = np.arange(n + 1)
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    log_binomial = 0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))
    # 0**0 stays 1 at the poles
    with np.errstate(divide="ignore", invalid="ignore"):
        log_cos = np.where(n - k > 0, (n - k) * np.log(abs(c)), 0.0)
        log_sin = np.where(k > 0, k * np.log(abs(s)), 0.0)
    sign = np.sign(c) ** (n - k) * np.sign(s) ** k
    amplitudes = sign * np.exp(log_binomial + log_cos + log_sin) * np.exp(1j * phi * k)
    amplitudes = amplitudes / np.linalg.norm(amplitudes)
    return SymmetricState.pure(amplitudes)


def state_ghz_mixture(n: int, p: float) -> SymmetricState:
    """
    Mixture (1+p)/2 |GHZ><GHZ| + (1-p)/2 |GHZ_perp><GHZ_perp|.

    Args:
        n: Number of qubits, at least 2
        p: Mixing parameter in [0, 1]

    Returns:
        Mixed symmetric state
    """
    _check_parties(n, 2)
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"Mixing parameter must lie in [0, 1], got {p}")
    ghz = state_ghz(n).amplitudes
    perp = state_ghz_perp(n).amplitudes
    density = (1 + p) / 2 * np.outer(ghz, ghz.conj()) + (1 - p) / 2 * np.outer(perp, perp.conj())
    return SymmetricState.mixed(density)


def state_maximally_mixed(n: int) -> SymmetricState:
    """Uniform mixture over the N+1 Dicke states."""
    _check_parties(n)
    return SymmetricState.mixed(np.eye(n + 1, dtype=complex) / (n + 1))


def state_random_pure(n: int, rng: np.random.Generator) -> SymmetricState:
    """Haar-random pure state of the symmetric subspace."""
    _check_parties(n)
    vector = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
    return SymmetricState.pure(vector / np.linalg.norm(vector))


def state_random_mixed(n: int, rng: np.random.Generator, rank: Optional[int] = None) -> SymmetricState:
    """Random density matrix G G^dagger / Tr from a Ginibre matrix of the given rank."""
    _check_parties(n)
    rank = rank or n + 1
    ginibre = rng.normal(size=(n + 1, rank)) + 1j * rng.normal(size=(n + 1, rank))
    density = ginibre @ ginibre.conj().T
    density = 0.5 * (density + density.conj().T)
    return SymmetricState.mixed(density / np.trace(density).real)


def mix_states(states: Sequence[SymmetricState], weights: Sequence[float]) -> SymmetricState:
    """
    Convex combination of states.

    Args:
        states: States on the same N
        weights: Nonnegative weights summing to one

    Returns:
        Mixed state sum_i w_i rho_i
    """
    if len(states) != len(weights) or not states:
        raise ValidationError("Need one weight per state")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > NORM_TOL:
        raise ValidationError("Weights must be nonnegative and sum to one")
    n = states[0].n_parties
    if any(state.n_parties != n for state in states):
        raise DimensionMismatchError("All states must have the same party count")
    density = sum(w * state.density_matrix() for w, state in zip(weights, states))
    return SymmetricState.mixed(0.5 * (density + density.conj().T))


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------

def _apply_unitary(state: SymmetricState, unitary: np.ndarray) -> SymmetricState:
    if state.is_pure:
        vector = unitary @ state.amplitudes
        return SymmetricState.pure(vector / np.linalg.norm(vector))
    density = unitary @ state.density @ unitary.conj().T
    density = 0.5 * (density + density.conj().T)
    return SymmetricState.mixed(density / np.trace(density).real)


def evolve(state: SymmetricState, generator: CollectiveOperator, t: float) -> SymmetricState:
    """
    Unitary evolution exp(-i A t) rho exp(i A t).

    Args:
        state: Initial state
        generator: Hermitian generator A
        t: Evolution time

    Returns:
        Evolved state of the same kind
    """
    check_dimensions(state, generator)
    if t == 0:
        return state
    return _apply_unitary(state, spectral(generator.matrix).unitary(t))


@functools.lru_cache(maxsize=32)
def _sx_spectral(n: int) -> SpectralDecomposition:
    return spectral(dicke_operator_sx(n).matrix)


@functools.lru_cache(maxsize=32)
def _tat_spectral(n: int) -> SpectralDecomposition:
    return spectral(tat_generator(n).matrix)


@functools.lru_cache(maxsize=32)
def _polar_to_x(n: int) -> np.ndarray:
    # exp(-i pi/2 S_y) carries the +z spin direction onto +x
    unitary = spectral(dicke_operator_sy(n).matrix).unitary(math.pi / 2)
    unitary.setflags(write=False)
    return unitary


def tat_generator(n: int) -> CollectiveOperator:
    """Two-axis twisting generator (S_+^2 - S_-^2) / (2i)."""
    _check_parties(n)
    raising = _raising_matrix(n)
    lowering = raising.conj().T
    return CollectiveOperator(n, (raising @ raising - lowering @ lowering) / 2j, "TAT")


def rotate_to_squeezing_frame(state: SymmetricState) -> SymmetricState:
    """
    Rotate about x so that <S_y^2> is minimal and the mean spin points to +x.

    The rotation angle nu of exp(-i nu S_x) is located on a grid over [0, pi)
    and refined by a bounded Brent search. States whose <S_y^2> does not
    depend on nu are returned unrotated.

    Args:
        state: Pure state whose mean spin lies along the x axis

    Returns:
        Rotated pure state
    """
    if not state.is_pure:
        raise InvalidStateError("Squeezing frame is only fixed for pure states")

    n = state.n_parties
    decomposition = _sx_spectral(n)
    sy_squared = dicke_operator_sy(n).matrix @ dicke_operator_sy(n).matrix
    in_eigenbasis = decomposition.eigenvectors.conj().T @ state.amplitudes

    def rotated(nu: float) -> np.ndarray:
        return decomposition.eigenvectors @ (np.exp(-1j * nu * decomposition.eigenvalues) * in_eigenbasis)

    def sy_second_moment(nu: float) -> float:
        vector = rotated(nu)
        return float(np.vdot(vector, sy_squared @ vector).real)

    grid = np.linspace(0.0, math.pi, FRAME_GRID, endpoint=False)
    values = np.array([sy_second_moment(nu) for nu in grid])
    amplitudes = np.array(state.amplitudes)

    if values.max() - values.min() > NORM_TOL * (n / 4.0 + 1.0):
        best = int(np.argmin(values))
        step = grid[1] - grid[0]
        result = optimize.minimize_scalar(
            sy_second_moment,
            bounds=(grid[best] - step, grid[best] + step),
            method="bounded",
            options={"xatol": FRAME_XATOL},
        )
        nu = float(result.x) % math.pi
        logger.debug("Squeezing frame for N=%d: nu=%.12g, <Sy^2>=%.12g", n, nu, result.fun)
        amplitudes = rotated(nu)

    candidate = SymmetricState.pure(amplitudes / np.linalg.norm(amplitudes))
    if expectation(candidate, dicke_operator_sx(n)) < 0:
        # exp(-i pi S_z) flips S_x and S_y
        candidate = SymmetricState.pure(np.exp(-1j * math.pi * m_values(n)) * candidate.amplitudes)
    return candidate


def state_oat(n: int, mu: float) -> SymmetricState:
    """
    One-axis twisted state exp(-i mu S_z^2) applied to the CSS along +x.

    The result is rotated into its squeezing frame: mean spin along +x,
    minimal second moment along y.

    Args:
        n: Number of qubits, at least 2
        mu: Twisting strength

    Returns:
        Pure symmetric state
    """
    _check_parties(n, 2)
    if not math.isfinite(mu):
        raise ValidationError("Twisting strength must be finite")
    css = state_css(n, math.pi / 2, 0.0)
    twisted = np.exp(-1j * mu * m_values(n) ** 2) * css.amplitudes
    return rotate_to_squeezing_frame(SymmetricState.pure(twisted))


def state_tat(n: int, chi: float) -> SymmetricState:
    """
    Two-axis twisted state.

    exp(-i chi (S_+^2 - S_-^2)/(2i)) acts on the spin polarized along +z,
    which exp(-i pi/2 S_y) then carries to +x; chi = 0 gives the CSS along
    +x. The result is rotated into its squeezing frame.

    Args:
        n: Number of qubits, at least 2
        chi: Twisting strength

    Returns:
        Pure symmetric state
    """
    _check_parties(n, 2)
    if not math.isfinite(chi):
        raise ValidationError("Twisting strength must be finite")
    polarized = np.zeros(n + 1, dtype=complex)
    polarized[0] = 1.0
    if chi != 0:
        polarized = _tat_spectral(n).unitary(chi) @ polarized
    vector = _polar_to_x(n) @ polarized
    return rotate_to_squeezing_frame(SymmetricState.pure(vector / np.linalg.norm(vector)))


# ---------------------------------------------------------------------------
# Fidelity and Bures distance
# ---------------------------------------------------------------------------

def matrix_sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    """
    Square root of a positive semidefinite matrix.

    Eigenvalues in [-1e-10, 0) are clamped to zero.

    Raises:
        InvalidStateError: If an eigenvalue lies below -1e-10
    """
    decomposition = spectral(matrix)
    eigenvalues = decomposition.eigenvalues
    if eigenvalues.size and eigenvalues[0] < -EIGEN_CLAMP:
        raise InvalidStateError(f"Matrix has negative eigenvalue {eigenvalues[0]!r}")
    return decomposition.apply_function(np.sqrt(np.clip(eigenvalues, 0.0, None)))


def root_fidelity_matrix(rho: np.ndarray, sigma: np.ndarray) -> float:
    """
    Root fidelity Tr sqrt(sqrt(rho) sigma sqrt(rho)) of two density matrices.

    Computed as the nuclear norm of sqrt(rho) sqrt(sigma).
    """
    if rho.shape != sigma.shape:
        raise DimensionMismatchError(f"Shapes {rho.shape} and {sigma.shape} differ")
    product = matrix_sqrt_psd(rho) @ matrix_sqrt_psd(sigma)
    value = float(np.sum(linalg.svdvals(product)))
    return min(max(value, 0.0), 1.0)


def _check_same_space(rho: SymmetricState, sigma: SymmetricState) -> None:
    if rho.n_parties != sigma.n_parties:
        raise DimensionMismatchError(
            f"States have N={rho.n_parties} and N={sigma.n_parties}"
        )


def root_fidelity(rho: SymmetricState, sigma: SymmetricState) -> float:
    """
    Root fidelity sqrt(F) of two symmetric states.

    Pure arguments use |<psi|phi>| and sqrt(<psi|sigma|psi>) directly.
    """
    _check_same_space(rho, sigma)
    if rho.is_pure and sigma.is_pure:
        return min(abs(np.vdot(rho.amplitudes, sigma.amplitudes)), 1.0)
    if rho.is_pure or sigma.is_pure:
        pure, other = (rho, sigma) if rho.is_pure else (sigma, rho)
        overlap = max(other.expect(np.outer(pure.amplitudes, pure.amplitudes.conj())).real, 0.0)
        return min(math.sqrt(overlap), 1.0)
    return root_fidelity_matrix(rho.density_matrix(), sigma.density_matrix())


def fidelity(rho: SymmetricState, sigma: SymmetricState) -> float:
    """
    Uhlmann fidelity F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Args:
        rho: First state
        sigma: Second state on the same N

    Returns:
        Fidelity in [0, 1]
    """
    return root_fidelity(rho, sigma) ** 2


def bures_distance(rho: SymmetricState, sigma: SymmetricState) -> float:
    """
    Bures distance sqrt(2 - 2 sqrt(F)).

    Args:
        rho: First state
        sigma: Second state on the same N

    Returns:
        Distance in [0, sqrt(2)]
    """
    return math.sqrt(max(0.0, 2.0 - 2.0 * root_fidelity(rho, sigma)))


# ---------------------------------------------------------------------------
# JSON serialization {n, kind, re[], im[]}
# ---------------------------------------------------------------------------

def state_to_dict(state: SymmetricState) -> Dict[str, Any]:
    """Serialize a state; matrices are flattened row-major."""
    values = state.amplitudes if state.is_pure else state.density.reshape(-1)
    return {
        "n": state.n_parties,
        "kind": state.kind,
        "re": [float(v) for v in values.real],
        "im": [float(v) for v in values.imag],
    }


def state_from_dict(data: Dict[str, Any]) -> SymmetricState:
    """
    Deserialize a state written by state_to_dict.

    Raises:
        ValidationError: If fields are missing or inconsistent
    """
    values = _complex_from_dict(data)
    n = int(data["n"])
    if data.get("kind") == PURE:
        return SymmetricState(n_parties=n, kind=PURE, amplitudes=values)
    if data.get("kind") == MIXED:
        if values.size != (n + 1) ** 2:
            raise ValidationError(f"Expected {(n + 1) ** 2} density entries, got {values.size}")
        return SymmetricState(n_parties=n, kind=MIXED, density=values.reshape(n + 1, n + 1))
    raise ValidationError(f"Unknown state kind '{data.get('kind')}'")


def operator_to_dict(operator: CollectiveOperator) -> Dict[str, Any]:
    """Serialize an operator with kind 'operator'."""
    values = operator.matrix.reshape(-1)
    return {
        "n": operator.n_parties,
        "kind": "operator",
        "label": operator.label,
        "re": [float(v) for v in values.real],
        "im": [float(v) for v in values.imag],
    }


def operator_from_dict(data: Dict[str, Any]) -> CollectiveOperator:
    """Deserialize an operator written by operator_to_dict."""
    values = _complex_from_dict(data)
    n = int(data["n"])
    if values.size != (n + 1) ** 2:
        raise ValidationError(f"Expected {(n + 1) ** 2} operator entries, got {values.size}")
    return CollectiveOperator(n, values.reshape(n + 1, n + 1), data.get("label", ""))


def _complex_from_dict(data: Dict[str, Any]) -> np.ndarray:
    for field in ("n", "kind", "re", "im"):
        if field not in data:
            raise ValidationError(f"Field '{field}' is required")
    if len(data["re"]) != len(data["im"]):
        raise ValidationError("Fields 're' and 'im' must have the same length")
    return np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
