"""
Oracle conformance operations module.

Each check recomputes a Dicke-basis quantity on the full 2^N space (or
enumerates local strategies) and records the largest scaled disagreement.
The suite is the body of the `verify` command.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from common.errors import ValidationError, VerificationError
from operations.bell import (
    MeasurementSettings,
    SqueezingSummary,
    bell_eq17,
    bell_eq3m,
    collective_correlators,
    eq17_inequality,
    eq3m_inequality,
    evaluate_inequality,
    fan_angles,
    mermin_bound,
    mermin_check,
    squeezing_summary,
    witness_1m,
    witness_2m,
)
from operations.fisher import ghz_witness_operator, qfi_exact
from operations.oracle import (
    collective_operator_full,
    correlators_bruteforce,
    embed_operator,
    embed_symmetric,
    expectation_full,
    lhv_bound_symmetric,
    mermin_fit,
    mermin_lhv_max,
    mermin_operator,
    naive_lhv_minimum,
    ppt_bipartite_check,
    project_symmetric,
    qfi_exact_full,
)
from operations.symmetric import (
    SymmetricState,
    dicke_operator,
    expectation,
    second_moment,
    state_css,
    state_dicke,
    state_ghz,
    state_ghz_mixture,
    state_oat,
    state_random_mixed,
    state_random_pure,
    state_tat,
)

logger = logging.getLogger(__name__)

TOLERANCE = 1e-8
FAULT_SIZE = 1.0
AXES = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    cases: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class VerificationReport:
    seed: int
    results: Tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    def failed_checks(self) -> List[str]:
        return [result.name for result in self.results if not result.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {"seed": self.seed, "passed": self.passed, "results": [r.to_dict() for r in self.results]}


def _scaled_error(value: float, reference: float) -> float:
    return abs(value - reference) / max(1.0, abs(reference))


def verification_corpus(rng: np.random.Generator) -> List[Tuple[str, SymmetricState]]:
    """Symmetric states with N <= 8 shared by the equivalence checks."""
    return [
        ("ghz:3", state_ghz(3)),
        ("ghz:8", state_ghz(8)),
        ("css:5", state_css(5, 1.1, 0.4)),
        ("dicke:6:2", state_dicke(6, 2)),
        ("oat:8:0.2", state_oat(8, 0.2)),
        ("tat:6:0.15", state_tat(6, 0.15)),
        ("mix:4:0.3", state_ghz_mixture(4, 0.3)),
        ("random-pure:7", state_random_pure(7, rng)),
        ("random-mixed:4", state_random_mixed(4, rng)),
        ("random-mixed:5", state_random_mixed(5, rng, rank=2)),
    ]


def check_embedding(corpus) -> Tuple[float, int]:
    errors = []
    for _, state in corpus:
        recovered = project_symmetric(embed_symmetric(state))
        errors.append(float(np.max(np.abs(recovered.density_matrix() - state.density_matrix()))))
    return max(errors), len(errors)


def check_spin_moments(corpus) -> Tuple[float, int]:
    errors = []
    for _, state in corpus:
        n = state.n_parties
        full = embed_symmetric(state)
        dicke_axes = [dicke_operator(n, axis) for axis in AXES]
        full_axes = [collective_operator_full(n, axis) for axis in AXES]
        for a in range(3):
            errors.append(_scaled_error(expectation_full(full, full_axes[a]), expectation(state, dicke_axes[a])))
            for b in range(3):
                anticommutator = full_axes[a] @ full_axes[b] + full_axes[b] @ full_axes[a]
                errors.append(_scaled_error(
                    0.5 * expectation_full(full, anticommutator),
                    second_moment(state, dicke_axes[a], dicke_axes[b]),
                ))
    return max(errors), len(errors)


def _settings_corpus() -> List[MeasurementSettings]:
    return [
        MeasurementSettings.two_setting(math.pi / 3),
        MeasurementSettings.multi_setting(fan_angles(3)),
    ]


def check_correlators(corpus) -> Tuple[float, int]:
    errors = []
    for _, state in corpus:
        full = embed_symmetric(state)
        for settings in _settings_corpus():
            fast = collective_correlators(state, settings)
            slow = correlators_bruteforce(full, settings)
            errors.extend(_scaled_error(slow[key], fast[key]) for key in fast)
    return max(errors), len(errors)


def check_qfi(corpus) -> Tuple[float, int]:
    errors = []
    for _, state in corpus:
        n = state.n_parties
        full = embed_symmetric(state)
        for axis in ((0.0, 0.0, 1.0), (1.0, 0.0, 0.0)):
            exact = qfi_exact(state, dicke_operator(n, axis)).qfi
            errors.append(_scaled_error(qfi_exact_full(full, collective_operator_full(n, axis)), exact))
    return max(errors), len(errors)


def _full_summary(state: SymmetricState) -> SqueezingSummary:
    """Squeezing data from full-space moments."""
    n = state.n_parties
    full = embed_symmetric(state)
    sx = expectation_full(full, collective_operator_full(n, AXES[0]))
    sy = collective_operator_full(n, AXES[1])
    zeta2 = max(expectation_full(full, sy @ sy) / (n / 4.0), 0.0)
    contrast = sx / (n / 2.0)
    defined = abs(contrast) > 1e-9
    return SqueezingSummary(n, contrast, zeta2, zeta2 / contrast ** 2 if defined else None, defined)


def check_witnesses(corpus) -> Tuple[float, int]:
    errors = []
    for _, state in corpus:
        fast = squeezing_summary(state)
        slow = _full_summary(state)
        errors.append(_scaled_error(witness_1m(slow).margin, witness_1m(fast).margin))
        errors.append(_scaled_error(witness_2m(slow).margin, witness_2m(fast).margin))
    return max(errors), len(errors)


def check_bell_values(corpus) -> Tuple[float, int]:
    errors = []
    for _, state in corpus:
        n = state.n_parties
        full = embed_symmetric(state)
        for phi in (0.3, 0.9, 1.3):
            settings = MeasurementSettings.multi_setting((-phi, phi))
            slow = evaluate_inequality(correlators_bruteforce(full, settings), eq17_inequality(n))
            errors.append(_scaled_error(slow, bell_eq17(state, phi).value))
        for m in (3, 4):
            angles = fan_angles(m)
            slow = evaluate_inequality(
                correlators_bruteforce(full, MeasurementSettings.multi_setting(angles)),
                eq3m_inequality(n, m),
            )
            errors.append(_scaled_error(slow, bell_eq3m(state, angles).value))
        witness = embed_operator(n, ghz_witness_operator(n).matrix)
        errors.append(_scaled_error(expectation_full(full, witness), mermin_check(state).value))
    return max(errors), len(errors)


LHV_CASES = [(2, n) for n in range(2, 7)] + [(3, n) for n in range(2, 5)]


def check_lhv_bounds(corpus) -> Tuple[float, int]:
    """Local minimum of the two- and m-setting inequalities is exactly zero."""
    errors = []
    for n in range(2, 7):
        errors.append(abs(lhv_bound_symmetric(n, eq17_inequality(n)).min_value))
    for m, n in LHV_CASES:
        errors.append(abs(lhv_bound_symmetric(n, eq3m_inequality(n, m)).min_value))
    return max(errors), len(errors)


def check_strategy_classes(corpus) -> Tuple[float, int]:
    """Multiset enumeration against per-party enumeration."""
    errors = []
    for m in (2, 3):
        for n in range(1, 5):
            inequality = eq3m_inequality(n, m)
            errors.append(abs(lhv_bound_symmetric(n, inequality).min_value - naive_lhv_minimum(n, inequality)))
    return max(errors), len(errors)


def check_mermin(corpus) -> Tuple[float, int]:
    errors = []
    for n in range(2, 9):
        errors.append(mermin_fit(n).residual)
        errors.append(_scaled_error(mermin_lhv_max(n), mermin_bound(n)))
        operator = mermin_operator(n)
        ghz = embed_symmetric(state_ghz(n))
        errors.append(_scaled_error(expectation_full(ghz, operator.normalized()), float(n)))
    return max(errors), len(errors)


def check_ppt(corpus) -> Tuple[float, int]:
    """Entanglement verdicts of the GHZ mixtures across the 1|rest cut, as 0/1 errors."""
    errors = []
    for p, expected in ((0.5, True), (0.05, True), (0.0, False)):
        result = ppt_bipartite_check(embed_symmetric(state_ghz_mixture(4, p)), [0])
        errors.append(0.0 if result.entangled == expected else 1.0)
    product = ppt_bipartite_check(embed_symmetric(state_css(4, 0.7, 0.2)), [0, 1])
    errors.append(0.0 if not product.entangled else 1.0)
    return max(errors), len(errors)


CHECKS: Dict[str, Callable[[Sequence[Tuple[str, SymmetricState]]], Tuple[float, int]]] = {
    "embedding": check_embedding,
    "spin_moments": check_spin_moments,
    "correlators": check_correlators,
    "qfi": check_qfi,
    "witnesses": check_witnesses,
    "bell_values": check_bell_values,
    "lhv_bounds": check_lhv_bounds,
    "strategy_classes": check_strategy_classes,
    "mermin": check_mermin,
    "ppt": check_ppt,
}


def run_verification(seed: int = 0, inject_fault: Optional[str] = None) -> VerificationReport:
    """
    Run every oracle check.

    Args:
        seed: Seed of the random part of the corpus
        inject_fault: Name of a check whose error is perturbed, for negative controls

    Returns:
        VerificationReport
    """
    if inject_fault is not None and inject_fault not in CHECKS:
        raise ValidationError(f"Unknown check '{inject_fault}', expected one of {sorted(CHECKS)}")

    corpus = verification_corpus(np.random.default_rng(seed))
    results = []
    for name, check in CHECKS.items():
        max_error, cases = check(corpus)
        if name == inject_fault:
            max_error += FAULT_SIZE
        passed = max_error <= TOLERANCE
        logger.info("Check %s: %s (max error %.3g over %d cases)", name, "pass" if passed else "FAIL", max_error, cases)
        results.append(CheckResult(name, passed, max_error, TOLERANCE, cases))
    return VerificationReport(seed=seed, results=tuple(results))


def require_passed(report: VerificationReport) -> None:
    """
    Raises:
        VerificationError: Naming the failed checks
    """
    if not report.passed:
        failed = report.failed_checks()
        raise VerificationError(f"Oracle checks failed: {', '.join(failed)}", {"failed": failed})
