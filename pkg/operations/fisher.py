"""
Quantum Fisher information operations module.

Exact QFI from the spectral decomposition of the state, the uncertainty
relation lower bound F >= <i[A,B]>^2 / Var(B), its linearization
sqrt(F) >= <i[A,B]> / ||B||, and the pure-state choice of B that makes the
linear bound tight.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import numpy as np

from common.errors import DegenerateOperatorError, InvalidStateError, ValidationError
from operations.symmetric import (
    CollectiveOperator,
    SymmetricState,
    check_dimensions,
    bures_distance,
    commutator,
    dicke_operator_sz,
    evolve,
    spectral,
    state_ghz,
)

logger = logging.getLogger(__name__)

# p_k + p_l at or below this is a 0/0 term of the spectral formula
DEGENERATE_WEIGHT = 1e-12
DEGENERATE_OPERATOR = 1e-14
TIGHT_RTOL = 1e-6

BURES_DT_MIN = 1e-6
BURES_DT_MAX = 1e-2

# values within this relative distance of a limit do not beat it
LIMIT_RTOL = 1e-9


@dataclass(frozen=True)
class QfiReport:
    """Quantum Fisher information of a state for one generator."""
    qfi: float
    generator_label: str
    n_parties: int
    shot_noise_ratio: float
    heisenberg_ratio: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class BoundReport:
    """A lower bound on the QFI together with the exact value it bounds."""
    kind: str
    bound_value: float
    commutator_mean: float
    b_variance: float
    b_sup_norm: float
    qfi: float
    tight: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class BuresRateCheck:
    """Finite-difference Bures speed against half the root QFI."""
    lhs: float
    rhs: float
    rel_err: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def shot_noise_limit(n: int) -> float:
    """Largest QFI of separable states for a collective generator."""
    return float(n)


def heisenberg_limit(n: int) -> float:
    """Largest QFI of any state for a collective generator."""
    return float(n) ** 2


def exceeds_limit(value: float, limit: float) -> bool:
    """True when value is above limit by more than LIMIT_RTOL relative."""
    return bool(value > limit * (1.0 + LIMIT_RTOL))


def variance(rho: SymmetricState, operator: CollectiveOperator) -> float:
    """
    Variance <A^2> - <A>^2, clamped at zero.

    Args:
        rho: State
        operator: Hermitian operator A

    Returns:
        Nonnegative variance
    """
    check_dimensions(rho, operator)
    mean = rho.expect(operator.matrix).real
    second = rho.expect(operator.matrix @ operator.matrix).real
    return max(second - mean * mean, 0.0)


def spectral_qfi(density: np.ndarray, generator: np.ndarray) -> float:
    """
    2 sum_{k,l} (p_k - p_l)^2 / (p_k + p_l) |<psi_k|A|psi_l>|^2 for a density matrix.

    Terms with p_k + p_l <= 1e-12 are dropped.
    """
    decomposition = spectral(density)
    weights = np.clip(decomposition.eigenvalues, 0.0, None)
    vectors = decomposition.eigenvectors

    in_eigenbasis = vectors.conj().T @ generator @ vectors
    total = weights[:, None] + weights[None, :]
    difference = weights[:, None] - weights[None, :]
    mask = total > DEGENERATE_WEIGHT
    coefficients = np.zeros_like(total)
    coefficients[mask] = difference[mask] ** 2 / total[mask]
    return float(2.0 * np.sum(coefficients * np.abs(in_eigenbasis) ** 2))


def qfi_exact(rho: SymmetricState, operator: CollectiveOperator) -> QfiReport:
    """
    Exact QFI from the spectral decomposition of the state.

    Args:
        rho: State, pure or mixed
        operator: Generator A

    Returns:
        QfiReport
    """
    check_dimensions(rho, operator)
    qfi = spectral_qfi(rho.density_matrix(), operator.matrix)

    n = rho.n_parties
    return QfiReport(
        qfi=qfi,
        generator_label=operator.label,
        n_parties=n,
        shot_noise_ratio=qfi / shot_noise_limit(n),
        heisenberg_ratio=qfi / heisenberg_limit(n),
    )


def _is_tight(qfi: float, bound: float) -> bool:
    return bool(abs(qfi - bound) <= TIGHT_RTOL * max(abs(qfi), DEGENERATE_WEIGHT))


def qfi_bound_eq12(rho: SymmetricState, a: CollectiveOperator, b: CollectiveOperator) -> BoundReport:
    """
    Uncertainty-relation bound F(rho, A) >= <i[A,B]>^2 / Var(B).

    B is centered internally, so <B> need not vanish.

    Args:
        rho: State
        a: Generator A
        b: Hermitian operator B

    Returns:
        BoundReport of kind "eq12"

    Raises:
        DegenerateOperatorError: If Var(B) <= 1e-14
    """
    check_dimensions(rho, a)
    check_dimensions(rho, b)
    b_variance = variance(rho, b)
    if b_variance <= DEGENERATE_OPERATOR:
        raise DegenerateOperatorError(f"Degenerate B: variance {b_variance:.3g} on this state")

    commutator_mean = rho.expect(1j * commutator(a.matrix, b.matrix)).real
    bound = commutator_mean ** 2 / b_variance
    qfi = qfi_exact(rho, a).qfi
    return BoundReport(
        kind="eq12",
        bound_value=bound,
        commutator_mean=commutator_mean,
        b_variance=b_variance,
        b_sup_norm=b.sup_norm(),
        qfi=qfi,
        tight=_is_tight(qfi, bound),
    )


def qfi_bound_linear(rho: SymmetricState, a: CollectiveOperator, b: CollectiveOperator) -> BoundReport:
    """
    Linear bound sqrt(F(rho, A)) >= <W> = <i[A,B]> / ||B||.

    The sign of B is chosen so that <W> is nonnegative.

    Args:
        rho: State
        a: Generator A
        b: Hermitian operator B

    Returns:
        BoundReport of kind "linear"; bound_value is <W>

    Raises:
        DegenerateOperatorError: If ||B|| <= 1e-14
    """
    check_dimensions(rho, a)
    check_dimensions(rho, b)
    sup_norm = b.sup_norm()
    if sup_norm <= DEGENERATE_OPERATOR:
        raise DegenerateOperatorError("Zero operator B has no linear bound")

    commutator_mean = rho.expect(1j * commutator(a.matrix, b.matrix)).real
    bound = abs(commutator_mean) / sup_norm
    qfi = qfi_exact(rho, a).qfi
    return BoundReport(
        kind="linear",
        bound_value=bound,
        commutator_mean=commutator_mean,
        b_variance=variance(rho, b),
        b_sup_norm=sup_norm,
        qfi=qfi,
        tight=_is_tight(qfi, bound ** 2),
    )


def optimal_b(psi: SymmetricState, a: CollectiveOperator) -> CollectiveOperator:
    """
    Operator B = -i[A, |psi><psi|] that makes the linear bound tight.

    Args:
        psi: Pure state
        a: Generator A

    Returns:
        Hermitian B of rank at most two with ||B|| equal to the standard deviation of A

    Raises:
        InvalidStateError: If psi is mixed
    """
    if not psi.is_pure:
        raise InvalidStateError("Optimal B is only constructed for pure states")
    check_dimensions(psi, a)
    projector = np.outer(psi.amplitudes, psi.amplitudes.conj())
    b = -1j * commutator(a.matrix, projector)
    return CollectiveOperator(psi.n_parties, 0.5 * (b + b.conj().T), "B_opt")


def linear_witness_operator(
    a: CollectiveOperator,
    b: CollectiveOperator,
    reference: Optional[SymmetricState] = None
) -> CollectiveOperator:
    """
    W = i[A,B] / ||B||, with the sign fixed so that <W> >= 0 on a reference state.

    Args:
        a: Generator A
        b: Hermitian operator B
        reference: Optional state fixing the sign

    Returns:
        Hermitian W
    """
    sup_norm = b.sup_norm()
    if sup_norm <= DEGENERATE_OPERATOR:
        raise DegenerateOperatorError("Zero operator B has no witness operator")
    w = 1j * commutator(a.matrix, b.matrix) / sup_norm
    w = 0.5 * (w + w.conj().T)
    if reference is not None and reference.expect(w).real < 0:
        w = -w
    return CollectiveOperator(a.n_parties, w, "W")


def ghz_witness_operator(n: int) -> CollectiveOperator:
    """W = N(|GHZ><GHZ| - |GHZ_perp><GHZ_perp|) built from the optimal B of GHZ and S_z."""
    ghz = state_ghz(n)
    sz = dicke_operator_sz(n)
    return linear_witness_operator(sz, optimal_b(ghz, sz), reference=ghz)


def entanglement_witness_value(rho: SymmetricState, a: CollectiveOperator, b: CollectiveOperator) -> float:
    """
    Value of the entanglement witness sqrt(N) - <W>.

    Negative values certify entanglement, since F <= N for separable states.

    Args:
        rho: State
        a: Generator A
        b: Hermitian operator B

    Returns:
        sqrt(N) - <W>
    """
    return math.sqrt(rho.n_parties) - qfi_bound_linear(rho, a, b).bound_value


def verify_bures_rate(rho: SymmetricState, a: CollectiveOperator, dt: float) -> BuresRateCheck:
    """
    Compare the Bures speed ds_B/dt with sqrt(F)/2 by central differencing.

    The distances to exp(-iA dt) rho exp(iA dt) and to the backward step are
    averaged.

    Args:
        rho: State
        a: Generator A
        dt: Step in [1e-6, 1e-2]

    Returns:
        BuresRateCheck with lhs = ds_B/dt, rhs = sqrt(F)/2 and their relative error
    """
    if not BURES_DT_MIN <= dt <= BURES_DT_MAX:
        raise ValidationError(f"Step must lie in [{BURES_DT_MIN}, {BURES_DT_MAX}], got {dt}")

    forward = bures_distance(rho, evolve(rho, a, dt))
    backward = bures_distance(rho, evolve(rho, a, -dt))
    lhs = (forward + backward) / (2.0 * dt)
    rhs = 0.5 * math.sqrt(qfi_exact(rho, a).qfi)
    rel_err = abs(lhs - rhs) / rhs if rhs > 0 else abs(lhs)
    logger.debug("Bures rate: lhs=%.12g rhs=%.12g rel_err=%.3g", lhs, rhs, rel_err)
    return BuresRateCheck(lhs=lhs, rhs=rhs, rel_err=rel_err)
