"""
Bell correlation operations module.

Spin-squeezing quantities, the symmetrized one- and two-body correlators of
identical equatorial settings, the two-setting and m-setting Bell
inequalities built from them, their collective-spin witness forms, and the
Mermin comparison for GHZ-like states.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from common.errors import UndefinedSqueezingError, ValidationError
from operations.fisher import exceeds_limit, ghz_witness_operator, qfi_exact, shot_noise_limit
from operations.symmetric import (
    SymmetricState,
    dicke_operator_sx,
    dicke_operator_sy,
    dicke_operator_sz,
    expectation,
    second_moment,
    state_oat,
    state_tat,
)

logger = logging.getLogger(__name__)

CONTRAST_FLOOR = 1e-9
CONTRAST_TOL = 1e-9
ARCTANH_GUARD = 1e-12
SERIES_CUTOFF = 1e-4
MERMIN_TOL = 1e-9
# margins within rounding of zero do not count as violations
WITNESS_TOL = 1e-13
# Bell values above -BELL_RTOL times the classical constant are not violations
BELL_RTOL = 1e-12

PHI_XATOL = 1e-8
DEFAULT_RESOLUTION = 64

TWO_SETTING = "two_setting_phi"
MULTI_SETTING = "multi_setting_angles"

EQ17 = "eq17"
EQ3M = "eq3m"
MERMIN = "mermin"

Correlators = Dict[Tuple[int, ...], float]


@dataclass(frozen=True)
class SqueezingSummary:
    """Contrast, scaled second moment and squeezing parameter of a state."""
    n_parties: int
    contrast: float
    zeta2: float
    xi2: Optional[float]
    xi2_defined: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class MeasurementSettings:
    """
    Identical settings cos(theta_k) sigma_y + sin(theta_k) sigma_x for every party.

    The two-setting mode uses theta = (phi, -phi).
    """
    mode: str
    phi: Optional[float] = None
    angles: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.mode == TWO_SETTING:
            if self.phi is None or not math.isfinite(self.phi):
                raise ValidationError("Two-setting mode needs a finite phi")
            object.__setattr__(self, "angles", (float(self.phi), -float(self.phi)))
        elif self.mode == MULTI_SETTING:
            angles = tuple(float(a) for a in self.angles)
            if len(angles) < 2:
                raise ValidationError(f"Need at least two settings, got {len(angles)}")
            if not all(math.isfinite(a) for a in angles):
                raise ValidationError("Setting angles must be finite")
            object.__setattr__(self, "angles", angles)
        else:
            raise ValidationError(f"Unknown settings mode '{self.mode}'")

    @classmethod
    def two_setting(cls, phi: float) -> "MeasurementSettings":
        return cls(mode=TWO_SETTING, phi=phi)

    @classmethod
    def multi_setting(cls, angles: Sequence[float]) -> "MeasurementSettings":
        return cls(mode=MULTI_SETTING, angles=tuple(angles))

    @property
    def m(self) -> int:
        return len(self.angles)

    def directions(self) -> np.ndarray:
        """Unit vectors (x, y, z) of the settings, one row each."""
        theta = np.asarray(self.angles)
        return np.stack([np.sin(theta), np.cos(theta), np.zeros_like(theta)], axis=1)


@dataclass(frozen=True)
class SymmetricInequality:
    """sum_k a_k C_k + sum_{k,l} a_kl C_kl + a_0 >= 0."""
    name: str
    one_body: Tuple[float, ...]
    two_body: Tuple[Tuple[float, ...], ...]
    constant: float

    @property
    def m(self) -> int:
        return len(self.one_body)


@dataclass(frozen=True)
class WitnessResult:
    """Margin of a collective-spin witness; negative margins detect Bell correlations."""
    violated: bool
    margin: float
    clamped: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class NecessaryCondition:
    """QFI lower bound N / xi^2 implied by the squeezing data."""
    qfi_lb: float
    beats_shot_noise: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class BellEvaluation:
    """Value of a Bell expression on a state."""
    inequality: str
    value: float
    classical_bound_offset: float
    violated: bool
    correlators: Correlators = field(default_factory=dict)
    details: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "inequality": self.inequality,
            "value": self.value,
            "classical_bound_offset": self.classical_bound_offset,
            "violated": self.violated,
            "correlators": {",".join(str(i) for i in key): value for key, value in self.correlators.items()},
            "details": dict(self.details),
        }


# ---------------------------------------------------------------------------
# Squeezing and correlators
# ---------------------------------------------------------------------------

def spin_moments(rho: SymmetricState) -> Tuple[np.ndarray, np.ndarray]:
    """
    First moments <S_a> and symmetrized second moments <{S_a, S_b}>/2.

    Args:
        rho: State

    Returns:
        Tuple (mean vector of length 3, real symmetric 3x3 matrix)
    """
    n = rho.n_parties
    spins = [dicke_operator_sx(n), dicke_operator_sy(n), dicke_operator_sz(n)]
    mean = np.array([expectation(rho, s) for s in spins])
    second = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            second[a, b] = second[b, a] = second_moment(rho, spins[a], spins[b])
    return mean, second


def squeezing_summary(rho: SymmetricState) -> SqueezingSummary:
    """
    Contrast <S_x>/(N/2), scaled second moment <S_y^2>/(N/4) and xi^2 = N<S_y^2>/<S_x>^2.

    Args:
        rho: State

    Returns:
        SqueezingSummary; xi2 is None when the contrast is below 1e-9
    """
    n = rho.n_parties
    sx = rho.expect(dicke_operator_sx(n).matrix).real
    sy = dicke_operator_sy(n).matrix
    sy_squared = rho.expect(sy @ sy).real
    contrast = sx / (n / 2.0)
    zeta2 = max(sy_squared / (n / 4.0), 0.0)
    if abs(contrast) > CONTRAST_FLOOR:
        return SqueezingSummary(n, contrast, zeta2, zeta2 / contrast ** 2, True)
    return SqueezingSummary(n, contrast, zeta2, None, False)


@dataclass(frozen=True)
class SqueezingOptimum:
    """Twisting strength with the smallest xi^2 found on a grid."""
    family: str
    n_parties: int
    parameter: float
    xi2: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


TWISTED_FAMILIES = {"oat": state_oat, "tat": state_tat}


def optimal_squeezing(family: str, n: int, grid: Sequence[float]) -> SqueezingOptimum:
    """
    Scan the twisting strength of a twisted family for the minimal xi^2.

    Args:
        family: "oat" or "tat"
        n: Number of qubits
        grid: Twisting strengths to try; ties keep the first one

    Returns:
        SqueezingOptimum
    """
    builder = TWISTED_FAMILIES.get(family)
    if builder is None:
        raise ValidationError(f"Unknown twisted family '{family}', expected one of {sorted(TWISTED_FAMILIES)}")
    if len(grid) == 0:
        raise ValidationError("Squeezing grid must be nonempty")

    best: Optional[SqueezingOptimum] = None
    for parameter in grid:
        summary = squeezing_summary(builder(n, float(parameter)))
        if summary.xi2_defined and (best is None or summary.xi2 < best.xi2):
            best = SqueezingOptimum(family, n, float(parameter), summary.xi2)
    if best is None:
        raise UndefinedSqueezingError(f"No {family} state on the grid has a defined xi^2")
    logger.debug("Optimal %s squeezing for N=%d: parameter=%.6g xi2=%.6g", family, n, best.parameter, best.xi2)
    return best


def correlators_from_moments(
    n: int,
    mean: np.ndarray,
    second: np.ndarray,
    settings: MeasurementSettings
) -> Correlators:
    """
    One- and two-body correlators from collective spin moments.

    C_k = 2<S_k> and C_kl = 2<S_k S_l + S_l S_k> - N n_k.n_l for identical settings.
    """
    directions = settings.directions()
    correlators: Correlators = {}
    for k, n_k in enumerate(directions):
        correlators[(k,)] = float(2.0 * n_k @ mean)
    for k, n_k in enumerate(directions):
        for l, n_l in enumerate(directions):
            correlators[(k, l)] = float(4.0 * n_k @ second @ n_l - n * (n_k @ n_l))
    return correlators


def collective_correlators(rho: SymmetricState, settings: MeasurementSettings) -> Correlators:
    """
    Symmetrized correlators sum over distinct sites of <M_k^(i)> and <M_k^(i) M_l^(j)>.

    Args:
        rho: State
        settings: Identical settings for all parties

    Returns:
        Map from (k,) and (k, l) to correlator values
    """
    mean, second = spin_moments(rho)
    return correlators_from_moments(rho.n_parties, mean, second, settings)


def evaluate_inequality(correlators: Correlators, inequality: SymmetricInequality) -> float:
    """
    Left-hand side of a symmetric two-body Bell inequality.

    Args:
        correlators: Correlator map covering the inequality's settings
        inequality: Coefficients

    Returns:
        sum_k a_k C_k + sum_{k,l} a_kl C_kl + a_0
    """
    value = inequality.constant
    for k, coefficient in enumerate(inequality.one_body):
        if coefficient:
            value += coefficient * correlators[(k,)]
    for k, row in enumerate(inequality.two_body):
        for l, coefficient in enumerate(row):
            if coefficient:
                value += coefficient * correlators[(k, l)]
    return float(value)


def eq17_inequality(n: int) -> SymmetricInequality:
    """C_0 - C_1 + C_00/2 + C_01 + C_11/2 + 2N >= 0."""
    return SymmetricInequality(
        name=EQ17,
        one_body=(1.0, -1.0),
        two_body=((0.5, 0.5), (0.5, 0.5)),
        constant=float(2 * n),
    )


def eq3m_inequality(n: int, m: int) -> SymmetricInequality:
    """
    m-setting inequality sum_k (m-2k-1) C_k + 1/2 sum_{k,l} C_kl + floor(m^2 N / 2) >= 0.

    Args:
        n: Number of parties
        m: Number of settings, at least 2

    Returns:
        SymmetricInequality
    """
    if m < 2:
        raise ValidationError(f"Need at least two settings, got m={m}")
    return SymmetricInequality(
        name=EQ3M,
        one_body=tuple(float(m - 2 * k - 1) for k in range(m)),
        two_body=tuple(tuple(0.5 for _ in range(m)) for _ in range(m)),
        constant=float((m * m * n) // 2),
    )


def eq14_coefficients(n: int, phi: float) -> Tuple[float, float, float]:
    """alpha = 2N sin^2(phi), beta = 8 cos^2(phi), gamma = 4 sin(phi)."""
    return 2.0 * n * math.sin(phi) ** 2, 8.0 * math.cos(phi) ** 2, 4.0 * math.sin(phi)


def linear_ansatz_value(rho: SymmetricState, phi: float) -> float:
    """alpha + beta <S_y^2> - gamma <S_x> with the Bell coefficients at phi."""
    n = rho.n_parties
    alpha, beta, gamma = eq14_coefficients(n, phi)
    sy = dicke_operator_sy(n).matrix
    return alpha + beta * rho.expect(sy @ sy).real - gamma * rho.expect(dicke_operator_sx(n).matrix).real


# ---------------------------------------------------------------------------
# Bell inequalities
# ---------------------------------------------------------------------------

def _check_phi(phi: float) -> None:
    if not 0.0 < phi < math.pi / 2:
        raise ValidationError(f"phi must lie in (0, pi/2), got {phi}")


def bell_eq17(rho: SymmetricState, phi: float) -> BellEvaluation:
    """
    Two-setting Bell inequality evaluated at angle phi.

    The settings are cos(phi) sigma_y -/+ sin(phi) sigma_x for C_0 and C_1,
    which makes the left-hand side equal to alpha + beta <S_y^2> - gamma <S_x>.

    Args:
        rho: State
        phi: Setting angle in (0, pi/2)

    Returns:
        BellEvaluation; violated when the left-hand side is negative
    """
    _check_phi(phi)
    settings = MeasurementSettings.multi_setting((-phi, phi))
    correlators = collective_correlators(rho, settings)
    inequality = eq17_inequality(rho.n_parties)
    value = evaluate_inequality(correlators, inequality)
    return BellEvaluation(
        inequality=EQ17,
        value=value,
        classical_bound_offset=inequality.constant,
        violated=bool(value < -BELL_RTOL * inequality.constant),
        correlators=correlators,
        details={"phi": phi},
    )


def _grid_then_brent(function, lower: float, upper: float, resolution: int, xatol: float) -> float:
    """Minimize a scalar function on (lower, upper): grid search refined by bounded Brent."""
    grid = np.linspace(lower, upper, resolution + 2)[1:-1]
    values = [function(x) for x in grid]
    best = int(np.argmin(values))
    step = grid[1] - grid[0] if len(grid) > 1 else (upper - lower) / 2
    left = max(lower, grid[best] - step)
    right = min(upper, grid[best] + step)
    result = optimize.minimize_scalar(function, bounds=(left, right), method="bounded", options={"xatol": xatol})
    return float(result.x) if result.fun <= values[best] else float(grid[best])


def optimize_eq17(rho: SymmetricState, resolution: int = DEFAULT_RESOLUTION) -> BellEvaluation:
    """
    Two-setting Bell inequality at the phi minimizing its left-hand side.

    Args:
        rho: State
        resolution: Grid points on (0, pi/2) before the Brent refinement

    Returns:
        BellEvaluation at the optimal phi
    """
    n = rho.n_parties
    sy = dicke_operator_sy(n).matrix
    sx_mean = rho.expect(dicke_operator_sx(n).matrix).real
    sy_squared = rho.expect(sy @ sy).real

    def lhs(phi: float) -> float:
        alpha, beta, gamma = eq14_coefficients(n, phi)
        return alpha + beta * sy_squared - gamma * sx_mean

    phi = _grid_then_brent(lhs, 0.0, math.pi / 2, resolution, PHI_XATOL)
    logger.debug("Optimal phi for N=%d: %.10g", n, phi)
    return bell_eq17(rho, phi)


def fan_angles(m: int, half_width: float = math.pi / 2) -> Tuple[float, ...]:
    """Equally spaced equatorial settings theta_k = -W + 2W(k + 1/2)/m."""
    if m < 2:
        raise ValidationError(f"Need at least two settings, got m={m}")
    return tuple(-half_width + 2.0 * half_width * (k + 0.5) / m for k in range(m))


def bell_eq3m(rho: SymmetricState, angles: Sequence[float]) -> BellEvaluation:
    """
    m-setting Bell inequality evaluated at the given setting angles.

    Args:
        rho: State
        angles: theta_0 .. theta_{m-1}, m >= 2

    Returns:
        BellEvaluation with classical_bound_offset = floor(m^2 N / 2)
    """
    if len(angles) < 2:
        raise ValidationError(f"Need at least two settings, got m={len(angles)}")
    settings = MeasurementSettings.multi_setting(angles)
    correlators = collective_correlators(rho, settings)
    inequality = eq3m_inequality(rho.n_parties, settings.m)
    value = evaluate_inequality(correlators, inequality)
    return BellEvaluation(
        inequality=EQ3M,
        value=value,
        classical_bound_offset=inequality.constant,
        violated=bool(value < -BELL_RTOL * inequality.constant),
        correlators=correlators,
        details={"m": float(settings.m)},
    )


def optimize_eq3m(rho: SymmetricState, m: int, resolution: int = DEFAULT_RESOLUTION) -> BellEvaluation:
    """
    m-setting Bell inequality on the fan whose half width minimizes the left-hand side.

    Args:
        rho: State
        m: Number of settings
        resolution: Number of half widths tried on (0, pi)

    Returns:
        BellEvaluation of the best fan, its half width in details
    """
    if resolution < 2:
        raise ValidationError(f"Resolution must be at least 2, got {resolution}")
    n = rho.n_parties
    mean, second = spin_moments(rho)
    inequality = eq3m_inequality(n, m)

    best_width, best_value = None, math.inf
    for width in np.linspace(0.0, math.pi, resolution + 2)[1:-1]:
        settings = MeasurementSettings.multi_setting(fan_angles(m, width))
        value = evaluate_inequality(correlators_from_moments(n, mean, second, settings), inequality)
        if value < best_value:
            best_width, best_value = float(width), value

    evaluation = bell_eq3m(rho, fan_angles(m, best_width))
    evaluation.details["half_width"] = best_width
    return evaluation


# ---------------------------------------------------------------------------
# Witnesses
# ---------------------------------------------------------------------------

def _check_contrast(contrast: float) -> float:
    if abs(contrast) > 1.0 + CONTRAST_TOL:
        raise ValidationError(f"Contrast must satisfy |C| <= 1, got {contrast}")
    return min(abs(contrast), 1.0)


def witness_1m_bound(contrast: float) -> float:
    """(1 - sqrt(1 - C^2)) / 2, evaluated as C^2 / (2 (1 + sqrt(1 - C^2)))."""
    c = _check_contrast(contrast)
    return c * c / (2.0 * (1.0 + math.sqrt(1.0 - c * c)))


def witness_2m_bound(contrast: float) -> Tuple[float, bool]:
    """
    1 - C / arctanh(C), with its small-C series.

    Returns:
        Tuple (bound, clamped); |C| >= 1 - 1e-12 gives the limiting value 1
    """
    c = _check_contrast(contrast)
    if c >= 1.0 - ARCTANH_GUARD:
        return 1.0, True
    if c < SERIES_CUTOFF:
        return c * c / 3.0 + 4.0 * c ** 4 / 45.0, False
    arctanh = 0.5 * math.log1p(2.0 * c / (1.0 - c))
    return 1.0 - c / arctanh, False


def witness_1m(summary: SqueezingSummary) -> WitnessResult:
    """
    Two-setting witness zeta^2 >= (1 - sqrt(1 - C^2)) / 2.

    Args:
        summary: Squeezing data of the state

    Returns:
        WitnessResult; margin = zeta^2 - bound, violated below -1e-13
    """
    margin = summary.zeta2 - witness_1m_bound(summary.contrast)
    return WitnessResult(violated=bool(margin < -WITNESS_TOL), margin=float(margin))


def witness_2m(summary: SqueezingSummary) -> WitnessResult:
    """
    Many-setting witness zeta^2 >= 1 - C / arctanh(C).

    Args:
        summary: Squeezing data of the state

    Returns:
        WitnessResult; clamped when |C| reached 1 and the limiting bound was used
    """
    bound, clamped = witness_2m_bound(summary.contrast)
    margin = summary.zeta2 - bound
    return WitnessResult(violated=bool(margin < -WITNESS_TOL), margin=float(margin), clamped=clamped)


def minimal_violating_contrast(xi2: float, witness: str = "1m") -> Optional[float]:
    """
    Smallest contrast for which a state with squeezing xi2 violates a witness.

    Args:
        xi2: Squeezing parameter
        witness: "1m" or "2m"

    Returns:
        0.0 when every contrast violates, None when no representable contrast does
    """
    if xi2 <= 0:
        raise ValidationError(f"xi2 must be positive, got {xi2}")

    if witness == "1m":
        if xi2 <= 0.25:
            return 0.0
        if xi2 >= 0.5:
            return None
        return math.sqrt(1.0 - ((1.0 - 2.0 * xi2) / (2.0 * xi2)) ** 2)

    if witness == "2m":
        if xi2 <= 1.0 / 3.0:
            return 0.0

        def margin(c: float) -> float:
            return xi2 * c * c - witness_2m_bound(c)[0]

        lower, upper = 1e-6, 1.0 - 2 * ARCTANH_GUARD
        if margin(upper) >= 0:
            return None
        if margin(lower) < 0:
            return lower
        return float(optimize.brentq(margin, lower, upper, xtol=1e-14))

    raise ValidationError(f"Unknown witness '{witness}'")


def qfi_necessary_condition(summary: SqueezingSummary) -> NecessaryCondition:
    """
    QFI lower bound N C^2 / zeta^2 = N / xi^2 for the generator S_z.

    Args:
        summary: Squeezing data with a defined xi^2

    Returns:
        NecessaryCondition; beats_shot_noise when the bound exceeds N

    Raises:
        UndefinedSqueezingError: If xi^2 is undefined or zero
    """
    if not summary.xi2_defined or summary.xi2 is None or summary.xi2 <= 0:
        raise UndefinedSqueezingError("QFI bound needs a finite positive xi^2")
    qfi_lb = summary.n_parties / summary.xi2
    beats = exceeds_limit(qfi_lb, shot_noise_limit(summary.n_parties))
    return NecessaryCondition(qfi_lb=qfi_lb, beats_shot_noise=beats)


def default_region_grid(resolution: int = 200) -> Tuple[np.ndarray, np.ndarray]:
    """xi^2 = (i+1)/r on (0, 1] and C = (j+1/2)/r on (0, 1)."""
    if resolution < 2:
        raise ValidationError(f"Resolution must be at least 2, got {resolution}")
    steps = np.arange(resolution)
    return (steps + 1.0) / resolution, (steps + 0.5) / resolution


def region_map(xi2_grid: Sequence[float], c_grid: Sequence[float]) -> List[Dict[str, Any]]:
    """
    Witness margins over a grid of (xi^2, C), row-major in xi^2.

    Args:
        xi2_grid: Values in (0, 1]
        c_grid: Values in (0, 1)

    Returns:
        One row per grid point with both margins and violation flags
    """
    xi2_grid = [float(x) for x in xi2_grid]
    c_grid = [float(c) for c in c_grid]
    if not xi2_grid or not c_grid:
        raise ValidationError("Region grids must be nonempty")
    if any(not 0.0 < x <= 1.0 for x in xi2_grid):
        raise ValidationError("xi2 grid must lie in (0, 1]")
    if any(not 0.0 < c < 1.0 for c in c_grid):
        raise ValidationError("Contrast grid must lie in (0, 1)")

    rows = []
    for xi2 in xi2_grid:
        for c in c_grid:
            zeta2 = xi2 * c * c
            margin_1m = zeta2 - witness_1m_bound(c)
            margin_2m = zeta2 - witness_2m_bound(c)[0]
            rows.append({
                "xi2": xi2,
                "C": c,
                "w1m_margin": margin_1m,
                "w2m_margin": margin_2m,
                "w1m_violated": margin_1m < -WITNESS_TOL,
                "w2m_violated": margin_2m < -WITNESS_TOL,
            })
    return rows


# ---------------------------------------------------------------------------
# Mermin
# ---------------------------------------------------------------------------

def mermin_bound(n: int) -> float:
    """Local bound on <W>: N 2^(-N/2+1) for even N, N 2^(-N/2+1/2) for odd N."""
    if n < 2:
        raise ValidationError(f"Mermin bound needs N >= 2, got {n}")
    exponent = -n / 2.0 + 1.0 if n % 2 == 0 else -n / 2.0 + 0.5
    return n * 2.0 ** exponent


def mermin_mixture_threshold(n: int) -> float:
    """Smallest p for which the GHZ mixture violates the Mermin bound, since <W> = pN."""
    return mermin_bound(n) / n


def mermin_check(rho: SymmetricState) -> BellEvaluation:
    """
    Compare <W>, W = N(|GHZ><GHZ| - |GHZ_perp><GHZ_perp|), with the Mermin local bound.

    Args:
        rho: State with N >= 2

    Returns:
        BellEvaluation; details carry the QFI for S_z and whether <W> <= sqrt(F)
    """
    n = rho.n_parties
    bound = mermin_bound(n)
    value = float(rho.expect(ghz_witness_operator(n).matrix).real)
    qfi = qfi_exact(rho, dicke_operator_sz(n)).qfi
    sqrt_qfi = math.sqrt(qfi)
    return BellEvaluation(
        inequality=MERMIN,
        value=value,
        classical_bound_offset=bound,
        violated=bool(value > bound + MERMIN_TOL),
        details={
            "qfi": qfi,
            "sqrt_qfi": sqrt_qfi,
            "qfi_bound_holds": float(value <= sqrt_qfi + MERMIN_TOL),
        },
    )
