"""Tests for squeezing data, correlators, Bell inequalities, witnesses and the Mermin comparison."""
import math

import numpy as np
import pytest

from common.errors import UndefinedSqueezingError, ValidationError
from operations.bell import (
    MeasurementSettings,
    SqueezingSummary,
    bell_eq17,
    bell_eq3m,
    collective_correlators,
    correlators_from_moments,
    default_region_grid,
    eq14_coefficients,
    eq17_inequality,
    eq3m_inequality,
    evaluate_inequality,
    fan_angles,
    linear_ansatz_value,
    mermin_bound,
    mermin_check,
    mermin_mixture_threshold,
    minimal_violating_contrast,
    optimal_squeezing,
    optimize_eq17,
    optimize_eq3m,
    qfi_necessary_condition,
    region_map,
    squeezing_summary,
    witness_1m,
    witness_1m_bound,
    witness_2m,
    witness_2m_bound,
)
from operations.fisher import qfi_exact
from operations.symmetric import (
    dicke_operator_sz,
    state_css,
    state_dicke,
    state_ghz,
    state_ghz_mixture,
    state_maximally_mixed,
    state_oat,
    state_random_mixed,
    state_random_pure,
    state_tat,
)


def _summary(n, contrast, zeta2):
    return SqueezingSummary(n, contrast, zeta2, zeta2 / contrast ** 2, True)


def _corpus(rng):
    return [
        state_css(8, math.pi / 2),
        state_ghz(6),
        state_ghz_mixture(6, 0.5),
        state_dicke(6, 3),
        state_oat(20, 0.02),
        state_oat(20, 0.1),
        state_oat(20, 0.3),
        state_tat(20, 0.05),
        state_random_pure(7, rng),
        state_random_mixed(5, rng),
    ]


@pytest.fixture(scope="module")
def oat_optimum():
    return optimal_squeezing("oat", 50, np.linspace(0.005, 0.3, 60))


def test_css_summary():
    """The coherent state along +x has C = zeta^2 = xi^2 = 1."""
    summary = squeezing_summary(state_css(12, math.pi / 2))
    assert summary.contrast == pytest.approx(1.0)
    assert summary.zeta2 == pytest.approx(1.0)
    assert summary.xi2 == pytest.approx(1.0)


def test_ghz_summary_has_undefined_xi2():
    summary = squeezing_summary(state_ghz(5))
    assert summary.contrast == pytest.approx(0.0, abs=1e-12)
    assert not summary.xi2_defined
    assert summary.xi2 is None


def test_xi2_is_zeta2_over_contrast_squared(rng):
    for rho in _corpus(rng):
        summary = squeezing_summary(rho)
        if summary.xi2_defined:
            assert summary.xi2 == pytest.approx(summary.zeta2 / summary.contrast ** 2, rel=1e-9)
        assert summary.zeta2 >= 0
        assert abs(summary.contrast) <= 1 + 1e-9


def test_oat_optimum_is_strongly_squeezed(oat_optimum):
    """The best one-axis twisted state at N = 50 has xi^2 below 1/4."""
    assert oat_optimum.xi2 < 0.25
    assert 0.005 < oat_optimum.parameter < 0.3


def test_tat_squeezes_more_than_oat(oat_optimum):
    tat = optimal_squeezing("tat", 50, np.linspace(0.002, 0.15, 60))
    assert tat.xi2 < 0.25
    assert tat.xi2 < oat_optimum.xi2


def test_optimal_squeezing_input_errors():
    with pytest.raises(ValidationError):
        optimal_squeezing("ghz", 10, [0.1])
    with pytest.raises(ValidationError):
        optimal_squeezing("oat", 10, [])


def test_ground_state_correlators_vanish():
    """|0...0> has no equatorial spin, so every one-body correlator is zero."""
    settings = MeasurementSettings.multi_setting((0.3, 1.1, -0.7))
    correlators = collective_correlators(state_dicke(5, 0), settings)
    for k in range(3):
        assert correlators[(k,)] == pytest.approx(0.0, abs=1e-12)


def test_two_setting_identities(rng):
    """4 sin(phi)<S_x> = C_0 - C_1 and 4cos^2(phi)<S_y^2> = N cos^2(phi) + (C_00 + 2C_01 + C_11)/4."""
    for rho in _corpus(rng):
        n = rho.n_parties
        summary = squeezing_summary(rho)
        sx = summary.contrast * n / 2
        sy_squared = summary.zeta2 * n / 4
        for phi in (0.2, math.pi / 4, 1.3):
            c = collective_correlators(rho, MeasurementSettings.two_setting(phi))
            assert c[(0,)] - c[(1,)] == pytest.approx(4 * math.sin(phi) * sx, abs=1e-9)
            two_body = (c[(0, 0)] + 2 * c[(0, 1)] + c[(1, 1)]) / 4
            assert 4 * math.cos(phi) ** 2 * sy_squared == pytest.approx(n * math.cos(phi) ** 2 + two_body, abs=1e-9)


def test_css_correlator_difference():
    """C_0 - C_1 = sqrt(2) N for the CSS along +x at phi = pi/4."""
    n = 10
    c = collective_correlators(state_css(n, math.pi / 2), MeasurementSettings.two_setting(math.pi / 4))
    assert c[(0,)] - c[(1,)] == pytest.approx(math.sqrt(2) * n)


def test_settings_validation():
    with pytest.raises(ValidationError):
        MeasurementSettings.multi_setting((0.1,))
    with pytest.raises(ValidationError):
        MeasurementSettings.multi_setting((0.1, math.nan))
    with pytest.raises(ValidationError):
        MeasurementSettings(mode="random")
    assert MeasurementSettings.two_setting(0.4).angles == (0.4, -0.4)


def test_eq17_matches_linear_ansatz(rng):
    """The correlator form of the two-setting inequality equals alpha + beta<S_y^2> - gamma<S_x>."""
    for rho in _corpus(rng):
        for phi in np.linspace(0.05, 1.5, 9):
            assert bell_eq17(rho, phi).value == pytest.approx(linear_ansatz_value(rho, phi), abs=1e-9)


def test_eq14_coefficients():
    alpha, beta, gamma = eq14_coefficients(4, math.pi / 6)
    assert alpha == pytest.approx(2.0)
    assert beta == pytest.approx(6.0)
    assert gamma == pytest.approx(2.0)


def test_eq17_phi_range():
    with pytest.raises(ValidationError):
        bell_eq17(state_ghz(3), 0.0)
    with pytest.raises(ValidationError):
        bell_eq17(state_ghz(3), math.pi / 2)


def test_two_setting_eq3m_is_eq17(rng):
    """With m = 2 the m-setting inequality has constant 2N and reduces to the two-setting one."""
    assert eq3m_inequality(7, 2).constant == 14
    assert eq3m_inequality(7, 2).one_body == eq17_inequality(7).one_body
    for rho in _corpus(rng):
        for phi in (0.3, 0.9):
            assert bell_eq3m(rho, (-phi, phi)).value == pytest.approx(bell_eq17(rho, phi).value, abs=1e-9)


def test_eq3m_coefficients():
    inequality = eq3m_inequality(4, 3)
    assert inequality.one_body == (2.0, 0.0, -2.0)
    assert inequality.constant == 18
    assert eq3m_inequality(5, 3).constant == 22
    with pytest.raises(ValidationError):
        eq3m_inequality(4, 1)


def test_product_states_never_violate(rng):
    """Coherent spin states admit a local model for every setting choice."""
    for _ in range(20):
        theta, phi = rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)
        css = state_css(6, theta, phi)
        assert optimize_eq17(css).value >= -1e-9
        assert optimize_eq3m(css, 3, resolution=32).value >= -1e-9
        angles = rng.uniform(-math.pi, math.pi, size=int(rng.integers(2, 5)))
        assert bell_eq3m(css, angles).value >= -1e-9


@pytest.mark.parametrize("n", [2, 7, 20, 50])
def test_coherent_state_on_the_classical_bound(n):
    """CSS along +x approaches zero from above as phi nears pi/2, without a violation."""
    css = state_css(n, math.pi / 2)
    eq17 = optimize_eq17(css)
    assert eq17.value == pytest.approx(0.0, abs=1e-6 * n)
    assert not eq17.violated
    assert not optimize_eq3m(css, 6).violated


def test_ghz_never_violates_eq17():
    rho = state_ghz(6)
    for phi in np.linspace(0.01, math.pi / 2 - 0.01, 64):
        assert not bell_eq17(rho, phi).violated


def test_optimal_oat_violates_both_inequalities(oat_optimum):
    rho = state_oat(50, oat_optimum.parameter)
    eq17 = optimize_eq17(rho)
    assert eq17.violated
    assert 0 < eq17.details["phi"] < math.pi / 2
    eq3m = optimize_eq3m(rho, 6)
    assert eq3m.violated
    assert eq3m.classical_bound_offset == 18 * 50


def test_six_settings_detect_where_two_do_not():
    """At xi^2 = 0.3 and C = 0.5 only the six-setting fan is violated."""
    n, contrast, zeta2 = 50, 0.5, 0.075
    mean = np.array([contrast * n / 2, 0.0, 0.0])
    second = np.diag([n / 4, zeta2 * n / 4, n / 4])

    two = eq17_inequality(n)
    for phi in np.linspace(0.01, math.pi / 2 - 0.01, 400):
        settings = MeasurementSettings.multi_setting((-phi, phi))
        assert evaluate_inequality(correlators_from_moments(n, mean, second, settings), two) > 0

    six = eq3m_inequality(n, 6)
    settings = MeasurementSettings.multi_setting(fan_angles(6, 0.54))
    assert evaluate_inequality(correlators_from_moments(n, mean, second, settings), six) < 0


def test_optimized_eq17_matches_witness(rng):
    """The phi-optimized value is 2N(zeta^2 - C^2 / (4(1 - zeta^2))) and its sign follows the 1m witness."""
    states = _corpus(rng) + [state_oat(30, mu) for mu in (0.01, 0.05, 0.08, 0.15)]
    for rho in states:
        summary = squeezing_summary(rho)
        if not summary.xi2_defined or summary.contrast <= 0:
            continue
        n, c, z = rho.n_parties, summary.contrast, summary.zeta2
        evaluation = optimize_eq17(rho)
        if c <= 2 * (1 - z):
            assert evaluation.value == pytest.approx(2 * n * (z - c * c / (4 * (1 - z))), abs=1e-6 * n)
        margin = witness_1m(summary).margin
        if abs(margin) > 1e-6:
            assert evaluation.violated == (margin < 0)


def test_fan_angles():
    np.testing.assert_allclose(fan_angles(2), (-math.pi / 4, math.pi / 4))
    np.testing.assert_allclose(fan_angles(4, 1.0), (-0.75, -0.25, 0.25, 0.75))
    with pytest.raises(ValidationError):
        fan_angles(1)


def test_witness_1m_examples():
    """Zero contrast never violates; xi^2 < 1/4 always does."""
    assert witness_1m_bound(0.0) == 0.0
    assert not witness_1m(SqueezingSummary(10, 0.0, 0.3, None, False)).violated
    for c in (0.05, 0.3, 0.7, 0.99, 1.0):
        assert witness_1m(_summary(10, c, 0.2 * c * c)).violated


def test_witness_1m_boundary_at_xi2_0_3():
    """The smallest violating contrast at xi^2 = 0.3 is sqrt(5)/3."""
    boundary = minimal_violating_contrast(0.3, "1m")
    assert boundary == pytest.approx(math.sqrt(5) / 3)
    assert witness_1m(_summary(10, boundary + 1e-6, 0.3 * (boundary + 1e-6) ** 2)).violated
    assert not witness_1m(_summary(10, boundary - 1e-6, 0.3 * (boundary - 1e-6) ** 2)).violated


def test_witness_2m_examples():
    """The series branch is continuous and xi^2 < 1/3 always violates."""
    assert witness_2m_bound(0.0) == (0.0, False)
    below, _ = witness_2m_bound(1e-4 * (1 - 1e-9))
    above, _ = witness_2m_bound(1e-4 * (1 + 1e-9))
    assert below == pytest.approx(above, abs=1e-14)
    assert below == pytest.approx(1e-8 / 3, rel=1e-6)
    for c in (1e-5, 0.1, 0.5, 0.9, 0.999):
        assert witness_2m(_summary(10, c, 0.3 * c * c)).violated


def test_witness_2m_clamps_at_full_contrast():
    result = witness_2m(_summary(4, 1.0, 0.5))
    assert result.clamped
    assert result.margin == pytest.approx(-0.5)
    assert witness_2m_bound(1.0 - 1e-13) == (1.0, True)


def test_contrast_must_be_physical():
    with pytest.raises(ValidationError):
        witness_1m_bound(1.1)
    with pytest.raises(ValidationError):
        witness_2m_bound(-1.01)
    assert witness_1m_bound(1.0 + 1e-10) == pytest.approx(0.5)


def test_minimal_violating_contrast_limits():
    assert minimal_violating_contrast(0.25, "1m") == 0.0
    assert minimal_violating_contrast(0.5, "1m") is None
    assert minimal_violating_contrast(0.3, "2m") == 0.0
    assert minimal_violating_contrast(1.2, "2m") is None
    with pytest.raises(ValidationError):
        minimal_violating_contrast(0.0)
    with pytest.raises(ValidationError):
        minimal_violating_contrast(0.4, "3m")


def test_witness_2m_threshold_at_xi2_one_half():
    """At xi^2 = 1/2 a contrast in (0, 1) is needed, and it is exactly the margin root."""
    boundary = minimal_violating_contrast(0.5, "2m")
    assert 0 < boundary < 1
    assert not witness_2m(_summary(10, boundary * (1 - 1e-6), 0.5 * (boundary * (1 - 1e-6)) ** 2)).violated
    assert witness_2m(_summary(10, boundary * (1 + 1e-6), 0.5 * (boundary * (1 + 1e-6)) ** 2)).violated


@pytest.mark.parametrize("witness,lower,upper", [("1m", 0.25, 0.5), ("2m", 1 / 3, 0.9)])
def test_thresholds_are_monotone(witness, lower, upper):
    contrasts = [minimal_violating_contrast(x, witness) for x in np.linspace(lower + 1e-3, upper - 1e-3, 50)]
    contrasts = [c for c in contrasts if c is not None]
    assert len(contrasts) > 10
    assert all(b >= a - 1e-12 for a, b in zip(contrasts, contrasts[1:]))


def test_necessary_condition():
    """N / xi^2 beats N exactly when xi^2 < 1."""
    result = qfi_necessary_condition(_summary(10, 1.0, 1.0))
    assert result.qfi_lb == pytest.approx(10.0)
    assert not result.beats_shot_noise
    squeezed = qfi_necessary_condition(_summary(10, 0.9, 0.3))
    assert squeezed.beats_shot_noise
    assert squeezed.qfi_lb == pytest.approx(10 * 0.81 / 0.3)
    with pytest.raises(UndefinedSqueezingError):
        qfi_necessary_condition(squeezing_summary(state_ghz(4)))


@pytest.mark.parametrize("n", [2, 3, 5, 7, 10, 13, 20, 33, 50, 64])
def test_coherent_state_does_not_beat_shot_noise(n):
    """CSS along +x has N / xi^2 = N up to rounding, which is not beating N."""
    result = qfi_necessary_condition(squeezing_summary(state_css(n, math.pi / 2)))
    assert result.qfi_lb == pytest.approx(float(n))
    assert not result.beats_shot_noise


def test_necessary_condition_bounds_the_qfi(rng):
    """F(rho, S_z) >= N / xi^2 on every state with a defined xi^2."""
    for rho in _corpus(rng):
        summary = squeezing_summary(rho)
        if summary.xi2_defined and summary.xi2 > 0:
            n = rho.n_parties
            assert qfi_exact(rho, dicke_operator_sz(n)).qfi >= qfi_necessary_condition(summary).qfi_lb - 1e-8 * n


def test_witness_violations_imply_qfi_thresholds(rng):
    """1m violation needs F > 2N and 2m violation needs F > N."""
    states = _corpus(rng) + [state_oat(30, mu) for mu in np.linspace(0.005, 0.3, 25)]
    for rho in states:
        summary = squeezing_summary(rho)
        n = rho.n_parties
        qfi = qfi_exact(rho, dicke_operator_sz(n)).qfi
        if witness_1m(summary).violated:
            assert qfi > 2 * n
        if witness_2m(summary).violated:
            assert qfi > n


def test_region_map_structure():
    """All 1m cells below xi^2 = 1/4, none from 1/2, all 2m cells up to 1/3."""
    xi2_grid, c_grid = default_region_grid(200)
    rows = region_map(xi2_grid, c_grid)
    assert len(rows) == 200 * 200
    assert all(r["w1m_violated"] for r in rows if r["xi2"] <= 0.25)
    assert not any(r["w1m_violated"] for r in rows if r["xi2"] >= 0.5)
    assert all(r["w2m_violated"] for r in rows if r["xi2"] <= 1 / 3)


def test_region_map_boundary_matches_closed_form():
    """The first violating contrast per xi^2 row is within one cell of the closed form and nondecreasing."""
    resolution = 200
    xi2_grid, c_grid = default_region_grid(resolution)
    rows = region_map(xi2_grid, c_grid)
    previous = 0.0
    for i, xi2 in enumerate(xi2_grid):
        row = rows[i * resolution:(i + 1) * resolution]
        violated = [r["C"] for r in row if r["w1m_violated"]]
        if not violated:
            continue
        first = min(violated)
        assert first >= previous - 1e-12
        previous = first
        if 0.25 < xi2 < 0.5:
            assert abs(first - minimal_violating_contrast(xi2, "1m")) <= 1.0 / resolution


def test_region_map_near_the_boundary():
    """At xi^2 = 0.45 the boundary contrast is about 0.9938."""
    rows = region_map([0.45], [0.99, 0.999])
    assert not rows[0]["w1m_violated"]
    assert rows[1]["w1m_violated"]
    assert not any(r["w1m_violated"] for r in region_map([0.6], [0.1, 0.5, 0.99]))


def test_region_map_validation():
    with pytest.raises(ValidationError):
        region_map([1.5], [0.5])
    with pytest.raises(ValidationError):
        region_map([0.5], [1.0])
    with pytest.raises(ValidationError):
        region_map([], [0.5])


def test_mermin_bounds():
    expected = {2: 2.0, 3: 1.5, 4: 2.0, 5: 1.25, 6: 1.5}
    for n, bound in expected.items():
        assert mermin_bound(n) == pytest.approx(bound)
    for n in range(2, 12, 2):
        assert mermin_bound(n) / n == pytest.approx(2 * mermin_bound(n + 1) / (n + 1))
    with pytest.raises(ValidationError):
        mermin_bound(1)


def test_mermin_ghz_violation():
    """<W> = N for GHZ exceeds the bound for N >= 3 and saturates sqrt(F)."""
    for n in range(3, 9):
        evaluation = mermin_check(state_ghz(n))
        assert evaluation.value == pytest.approx(n)
        assert evaluation.violated
        assert evaluation.details["qfi_bound_holds"] == 1.0
        assert evaluation.details["sqrt_qfi"] == pytest.approx(n)


def test_mermin_maximally_mixed():
    evaluation = mermin_check(state_maximally_mixed(4))
    assert evaluation.value == pytest.approx(0.0, abs=1e-12)
    assert not evaluation.violated


def test_mermin_mixture_threshold():
    """<W> = pN, so the mixture violates exactly above bound / N."""
    n = 8
    threshold = mermin_mixture_threshold(n)
    assert threshold == pytest.approx(0.125)
    for p in np.linspace(0, 1, 41):
        evaluation = mermin_check(state_ghz_mixture(n, p))
        assert evaluation.value == pytest.approx(p * n, abs=1e-12)
        if abs(p - threshold) > 1e-9:
            assert evaluation.violated == (p > threshold)


def test_two_party_mixture_never_violates():
    assert mermin_mixture_threshold(2) == pytest.approx(1.0)
    for p in np.linspace(0, 1, 11):
        assert not mermin_check(state_ghz_mixture(2, p)).violated


def test_evaluation_to_dict():
    data = bell_eq17(state_css(4, math.pi / 2), 0.5).to_dict()
    assert data["inequality"] == "eq17"
    assert set(data["correlators"]) == {"0", "1", "0,0", "0,1", "1,0", "1,1"}
    assert data["details"]["phi"] == 0.5
