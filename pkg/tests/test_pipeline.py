import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from strat_lab.errors import QuadratureError, SymmetryViolationError
from strat_lab.nonzero import IntegratorConfig
from strat_lab.pipeline import (
    EtaGrid,
    GaussianProfile,
    InitialConditionSpec,
    build_modes,
    check_conjugate_symmetry,
    hs_norm,
    japanese_bracket,
    project_divergence_free,
    run_theorem1,
    run_theorem2,
    sample_fields,
    theorem1_report,
)
from strat_lab.streaks import StreakState
from strat_lab.symbols import PhysParams, rate_constants, symbol_p
from strat_lab.symmetrization import NonzeroModeState

GRID = EtaGrid.gauss_legendre(24.0, 16, 16)
PARAMS = PhysParams(1e-3, 1e-3, 1.0)


def bump(centre=2.0, width=2.0, amp=1.0):
    return GaussianProfile(centre, width, amp)


def test_gaussian_mass_quadrature():
    for centre, width in ((0.0, 0.5), (2.0, 2.0), (-3.0, 1.3)):
        prof = bump(centre, width, 0.7 - 0.2j)
        mass = GRID.integrate(np.abs(prof(GRID.nodes)) ** 2)
        assert math.sqrt(mass) == pytest.approx(prof.l2_norm, rel=1e-10)
    assert np.all(GRID.weights > 0) and GRID.symmetric


def test_translated_grid_preserves_norms():
    # the moving-frame change of variables shifts eta by k t with unit Jacobian
    prof = bump(1.0, 1.0)
    shift = 2.5
    moved = EtaGrid(GRID.nodes + shift, GRID.weights, GRID.cutoff)
    a = GRID.integrate(np.abs(prof(GRID.nodes)) ** 2)
    b = moved.integrate(np.abs(prof(moved.nodes - shift)) ** 2)
    assert a == b


def test_projection_single_mode():
    spec = InitialConditionSpec.real_field({(1, 0): {"u2": bump()}}, True)
    f = sample_fields(spec, 1, 0, GRID.nodes)
    assert np.max(np.abs(1 * f["u1"] + GRID.nodes * f["u2"])) < 1e-14


@given(st.integers(-3, 3), st.integers(-3, 3), st.floats(-10, 10),
       st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10),
       st.complex_numbers(max_magnitude=10))
def test_projection_idempotent(k, l, eta, u1, u2, u3):
    if k == 0 and l == 0 and eta == 0:
        return
    once = project_divergence_free(k, eta, l, u1, u2, u3)
    twice = project_divergence_free(k, eta, l, *once)
    size = abs(u1) + abs(u2) + abs(u3) + 1e-300
    assert max(abs(a - b) for a, b in zip(once, twice)) <= 1e-14 * size * 10
    assert abs(k * once[0] + eta * once[1] + l * once[2]) <= 1e-13 * size * (abs(k) + abs(eta) + abs(l))


def test_empty_spec_builds_nothing():
    assert build_modes(InitialConditionSpec({}, True), GRID) == []


def test_conjugate_symmetry_violation():
    bad = InitialConditionSpec({(1, 0): {"u2": bump()}, (-1, 0): {"u2": bump(2.0, 2.0, 2.0)}}, True)
    with pytest.raises(SymmetryViolationError):
        check_conjugate_symmetry(bad, GRID.nodes)
    with pytest.raises(SymmetryViolationError):
        build_modes(InitialConditionSpec({(1, 0): {"u2": bump()}}, True), GRID)


def test_build_modes_kinds():
    spec = InitialConditionSpec.real_field({(1, 1): {"u2": bump()}, (0, 1): {"u2": bump()}}, True)
    built = build_modes(spec, GRID)
    assert [(m.k, m.l) for m, _ in built] == [(-1, -1), (0, -1), (0, 1), (1, 1)]
    for mode, state in built:
        assert isinstance(state, StreakState if mode.k == 0 else NonzeroModeState)
    mode, state = built[-1]
    f = sample_fields(spec, 1, 1, GRID.nodes)
    assert np.allclose(state.q, -symbol_p(0.0, mode) * f["u2"])


def test_truncation_error():
    spec = InitialConditionSpec.real_field({(1, 0): {"u2": bump(20.0, 3.0)}}, True)
    with pytest.raises(QuadratureError):
        run_theorem1(spec, PARAMS, GRID)


def test_hs_norm_properties():
    prof = bump(1.0, 0.8)
    coeffs = {(1, 0): prof(GRID.nodes)}
    l2 = hs_norm(coeffs, 0, GRID)
    assert l2 == pytest.approx(prof.l2_norm, rel=1e-10)
    values = [hs_norm(coeffs, s, GRID) for s in (0, 1, 1.5, 2, 3, 4)]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_hs_norm_concentration_limit():
    centre = 1.5
    fine = EtaGrid.gauss_legendre(4.0, 64, 16)
    for s in (1, 3):
        prof = bump(centre, 1e-2)
        val = hs_norm({(1, 0): prof(fine.nodes)}, s, fine)
        expected = (2 + centre**2) ** (s / 2) * prof.l2_norm
        assert val == pytest.approx(expected, rel=1e-3)


def test_japanese_bracket():
    assert japanese_bracket(0.0) == 1.0
    assert japanese_bracket(3.0) == pytest.approx(math.sqrt(10))


def test_theorem1_zero_data():
    report = theorem1_report([], InitialConditionSpec({}, True), rate_constants(PARAMS), GRID)
    assert report.sup_ratio == 0


SPEC1 = InitialConditionSpec.real_field(
    {m: {"u2": bump(), "theta": bump(2.0, 2.0, 0.5j)} for m in ((1, 0), (1, 1), (2, 2))}, True)


def test_theorem1_report_finite_and_stable():
    report, trajs = run_theorem1(SPEC1, PARAMS, GRID)
    assert 0 < report.sup_ratio < 1 and math.isfinite(report.sup_ratio)
    assert all(np.all(v >= 0) for v in report.series.values())
    tight, _ = run_theorem1(SPEC1, PARAMS, GRID, IntegratorConfig(method="integrating_factor",
                                                                  rel_tol=1e-11, abs_tol=1e-14))
    assert abs(tight.sup_ratio / report.sup_ratio - 1) <= 0.05
    assert math.isfinite(report.extras["sup_ratio_minimal"])
    assert len(trajs) == 6


def test_theorem1_single_mode_chain():
    # per-mode u2 bound: |u2|^2 <= |k,l| p^{-3/2} C_beta^2 e^{-lam k^2 t^3/12} (|G0|^2+|Gam0|^2)
    spec = InitialConditionSpec.real_field({(1, 1): {"u2": bump(), "theta": bump(0.0, 1.0)}}, True)
    _, trajs = run_theorem1(spec, PARAMS, GRID)
    rates = rate_constants(PARAMS)
    for tr in trajs:
        t = tr.times[:, None]
        u2 = np.abs(tr.states.q) / symbol_p(t, tr.mode)
        bound = tr.mode.kl_norm * symbol_p(t, tr.mode) ** -1.5 * tr.diagnostics["envelope_sym"]
        assert np.all(u2**2 <= bound * (1 + 1e-9) + 1e-300)


def test_grid_refinement():
    fine = EtaGrid.gauss_legendre(24.0, 32, 16)
    cfg = IntegratorConfig(method="integrating_factor", t_end=60.0)
    a, _ = run_theorem1(SPEC1, PARAMS, GRID, cfg)
    b, _ = run_theorem1(SPEC1, PARAMS, fine, cfg)
    for name in ("u13", "u2", "theta", "lhs"):
        x, y = a.series[name], b.series[name]
        assert np.max(np.abs(x - y) / np.maximum(y, 1e-300)) <= 1e-6


SPEC2 = InitialConditionSpec.real_field(
    {(0, 1): {"u1": bump(0.0, 1.0, 0.2), "u2": bump(0.0, 1.0), "theta": bump(0.0, 1.0, 0.5)},
     (0, 2): {"u2": bump(0.0, 1.0, 0.5j)}}, True)


def test_theorem2_initial_ratio_and_beta_monotonicity():
    t = np.linspace(0, 3000, 3001)
    stats = []
    for beta in (0.75, 1.0, 2.0):
        report = run_theorem2(SPEC2, PhysParams(1e-3, 1e-3, beta), GRID, t)
        assert report.series["total"][0] / math.sqrt(
            sum(report.data_norms[n][4] ** 2 for n in report.data_norms)) <= 1
        stats.append(report.extras["u1_beta_ratio"])
    assert stats[0] >= stats[1] >= stats[2]


def test_theorem2_liftup_comparison():
    t = np.linspace(0, 3000, 3001)
    lift = run_theorem2(SPEC2, PhysParams(1e-3, 1e-3, 0.0), GRID, t)
    strat = run_theorem2(SPEC2, PhysParams(1e-3, 1e-3, 1.0), GRID, t)
    assert lift.extras["u1_sup"] > 50 * strat.extras["u1_sup"]
