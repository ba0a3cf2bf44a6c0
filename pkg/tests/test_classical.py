import numpy as np
import pytest

from obscert import classical
from obscert.classical import (
    CompactSet, ConstantCutoff, IndicatorCutoff, PhasePoint, RampCutoff, Region,
    check_geometric_condition, flow, geometric_constant, geometric_constant_refined,
    hamiltonian, occupation_time, verlet_step,
)


def interval(lo, hi):
    return Region(np.array([[[lo, hi]]]))


def phys_box(qlo, qhi, plo, phi, spacing=0.05):
    return CompactSet(np.array([[[qlo, qhi], [plo, phi]]]), spacing)


# ---------------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------------

def test_flow_free_straight_line(free):
    p = flow(free, PhasePoint([0.0], [1.0]), 2.0, 1e-3)
    assert p.x[0] == pytest.approx(2.0, abs=1e-12)
    assert p.xi[0] == pytest.approx(1.0, abs=1e-12)


def test_flow_harmonic_rotation_oracle(harm):
    # closed-form rotation (x cos t + xi sin t, -x sin t + xi cos t)
    p = flow(harm, PhasePoint([1.0], [0.0]), np.pi / 2, 1e-4)
    assert abs(p.x[0] - 0.0) < 1e-6
    assert abs(p.xi[0] - (-1.0)) < 1e-6
    p = flow(harm, PhasePoint([1.0], [0.0]), 2 * np.pi, 1e-4)
    assert abs(p.x[0] - 1.0) < 1e-5
    assert abs(p.xi[0] - 0.0) < 1e-5
    q = flow(harm, PhasePoint([0.3], [-0.7]), 1.234, 1e-4)
    c, s = np.cos(1.234), np.sin(1.234)
    assert q.x[0] == pytest.approx(0.3 * c - 0.7 * s, abs=1e-6)
    assert q.xi[0] == pytest.approx(-0.3 * s - 0.7 * c, abs=1e-6)


def test_flow_blowup_detected():
    from obscert.potentials import Potential
    V = Potential(name="inverted", dim=1,
                  value_fn=lambda p: -np.sum(p ** 4, axis=-1),
                  grad_fn=lambda p: -4.0 * p ** 3,
                  lip_grad=0.0, working_box=np.array([[-1e3, 1e3]]))
    # surfaces either as a non-finite state or a non-finite gradient
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises((FloatingPointError, ValueError)):
            flow(V, PhasePoint([1.0], [0.0]), 50.0, 0.5)


def test_symplecticity_step_jacobian(harm, dwell):
    # finite-difference Jacobian of one Verlet step has determinant 1
    h = 1e-5
    for V, x0, xi0, dt in [(harm, 0.7, -0.4, 1e-2), (dwell, 1.1, 0.3, 1e-2)]:
        def step(x, xi):
            xa, xia = verlet_step(V, np.array([[x]]), np.array([[xi]]), dt)
            return xa[0, 0], xia[0, 0]
        dxdx = (step(x0 + h, xi0)[0] - step(x0 - h, xi0)[0]) / (2 * h)
        dxdxi = (step(x0, xi0 + h)[0] - step(x0, xi0 - h)[0]) / (2 * h)
        dpdx = (step(x0 + h, xi0)[1] - step(x0 - h, xi0)[1]) / (2 * h)
        dpdxi = (step(x0, xi0 + h)[1] - step(x0, xi0 - h)[1]) / (2 * h)
        det = dxdx * dpdxi - dxdxi * dpdx
        assert det == pytest.approx(1.0, abs=1e-8)


# Energy drift coefficients fitted once from dt in {1e-2, 5e-3, 2.5e-3} runs
# (0.037 and 0.0124); the regression bound allows 2x headroom.
ENERGY_DRIFT_C = {"harmonic": 0.08, "double_well": 0.03}


def test_energy_drift_quadratic_in_dt(harm, dwell):
    for V, p0 in [(harm, PhasePoint([1.0], [0.0])), (dwell, PhasePoint([1.1], [0.2]))]:
        e0 = hamiltonian(V, p0.x[None, :], p0.xi[None, :])[0]
        for dt in (1e-2, 5e-3):
            p = flow(V, p0, 10.0, dt)
            drift = abs(hamiltonian(V, p.x[None, :], p.xi[None, :])[0] - e0)
            assert drift <= ENERGY_DRIFT_C[V.name] * dt ** 2


# ---------------------------------------------------------------------------
# occupation times
# ---------------------------------------------------------------------------

def test_occupation_window(free):
    occ = occupation_time(free, PhasePoint([0.0], [1.0]), 2.0,
                          IndicatorCutoff(interval(0.5, 1.5)), 1e-3)
    assert occ == pytest.approx(1.0, abs=1e-3)


def test_occupation_constant_cutoff(free, harm, dwell):
    for V in (free, harm, dwell):
        occ = occupation_time(V, PhasePoint([0.4], [0.3]), 1.7, ConstantCutoff(1.0), 1e-3)
        assert occ == pytest.approx(1.7, abs=1e-12)


def test_occupation_harmonic_half_period(harm):
    occ = occupation_time(harm, PhasePoint([1.0], [0.0]), 2 * np.pi,
                          IndicatorCutoff(interval(0.0, 2.0)), 1e-3)
    assert occ == pytest.approx(np.pi, abs=2e-2)


def test_occupation_bounds(free):
    occ = occupation_time(free, PhasePoint([0.0], [1.0]), 2.0,
                          RampCutoff(interval(0.5, 1.5), 0.3), 1e-3)
    assert 0.0 <= occ <= 2.0


# ---------------------------------------------------------------------------
# geometric constant
# ---------------------------------------------------------------------------

def test_geometric_constant_single_point_reduces(free):
    K = CompactSet(np.array([[[0.0, 0.0], [1.0, 1.0]]]), 0.1)
    chi = IndicatorCutoff(interval(0.5, 1.5))
    c = geometric_constant(free, K, chi, 2.0, 1e-3)
    occ = occupation_time(free, PhasePoint([0.0], [1.0]), 2.0, chi, 1e-3)
    assert c == pytest.approx(occ, abs=1e-12)
    assert c == pytest.approx(1.0, abs=1e-3)


def test_geometric_constant_full_cutoff(free, harm):
    K = phys_box(-0.1, 0.1, 0.9, 1.1)
    for V in (free, harm):
        assert geometric_constant(V, K, ConstantCutoff(1.0), 2.0, 1e-3) == pytest.approx(2.0)


def test_geometric_constant_refinement_oracle(free):
    # brute-force refinement at 10x resolution agrees within 5e-2
    K = phys_box(-0.1, 0.1, 0.9, 1.1, spacing=0.05)
    chi = IndicatorCutoff(interval(0.5, 1.5))
    coarse = geometric_constant(free, K, chi, 2.0, 1e-3)
    table = classical.geometric_constant_table(free, K, chi, 2.0, 1e-3, spacing=0.005)
    dense = table.occupation.min()
    assert abs(coarse - dense) <= 5e-2
    # analytic worst case: full crossing at the top speed, occupation 1.0/1.1
    assert dense == pytest.approx(1.0 / 1.1, abs=1e-3)


def test_geometric_constant_monotone_in_region(free):
    K = phys_box(-0.1, 0.1, 0.9, 1.1)
    small = geometric_constant(free, K, IndicatorCutoff(interval(0.5, 1.5)), 2.0, 1e-3)
    large = geometric_constant(free, K, IndicatorCutoff(interval(0.3, 1.8)), 2.0, 1e-3)
    assert large >= small - 1e-12


def test_indicator_below_ramp(free, harm):
    # occupation under the indicator never exceeds occupation under the ramp
    K = phys_box(-0.1, 0.1, 0.9, 1.1)
    om = interval(0.5, 1.5)
    for V in (free, harm):
        ind = geometric_constant(V, K, IndicatorCutoff(om), 2.0, 1e-3)
        ramp = geometric_constant(V, K, RampCutoff(om, 0.5), 2.0, 1e-3)
        assert ind <= ramp + 1e-9


def test_refinement_delta_reported(free):
    K = phys_box(-0.1, 0.1, 0.9, 1.1, spacing=0.1)
    chi = IndicatorCutoff(interval(0.5, 1.5))
    value, delta = geometric_constant_refined(free, K, chi, 2.0, 1e-3)
    assert value >= 0 and delta >= 0
    assert delta <= 0.1


# ---------------------------------------------------------------------------
# geometric condition
# ---------------------------------------------------------------------------

def test_gc_true_case(free):
    K = phys_box(-0.1, 0.1, 0.9, 1.1)
    res = check_geometric_condition(free, K, interval(0.5, 1.5), 2.0, 1e-3)
    assert res.satisfied
    assert np.all(np.isfinite(res.first_hits))
    assert np.all(res.first_hits < 2.0)


def test_gc_false_when_unreachable(free):
    K = phys_box(-0.1, 0.1, -0.1, 0.1)
    res = check_geometric_condition(free, K, interval(5.0, 6.0), 1.0, 1e-3)
    assert not res.satisfied
    assert np.all(np.isnan(res.first_hits))


def test_gc_harmonic_oracle(harm):
    # rotation carries (1, 0) into (-1.5, -0.5) near t = pi (enters at t = 2pi/3)
    K = phys_box(0.9, 1.1, -0.1, 0.1)
    res = check_geometric_condition(harm, K, interval(-1.5, -0.5), np.pi + 0.5, 1e-3)
    assert res.satisfied
    assert res.first_hits.max() < np.pi + 0.5
    assert res.first_hits.min() > 1.5


def test_gc_implies_positive_constant(free):
    K = phys_box(-0.1, 0.1, 0.9, 1.1)
    om = interval(0.5, 1.5)
    res = check_geometric_condition(free, K, om, 2.0, 1e-3)
    assert res.satisfied
    assert geometric_constant(free, K, IndicatorCutoff(om), 2.0, 1e-3) > 0


def test_zero_when_cutoff_missed(free):
    K = phys_box(-0.1, 0.1, -0.1, 0.1)
    c = geometric_constant(free, K, IndicatorCutoff(interval(5.0, 6.0)), 1.0, 1e-3)
    assert c == 0.0


# ---------------------------------------------------------------------------
# geometry types
# ---------------------------------------------------------------------------

def test_region_open_semantics():
    om = interval(0.5, 1.5)
    assert om.indicator([[0.5]])[0] == 0.0      # boundary counts as outside
    assert om.indicator([[1.0]])[0] == 1.0
    assert om.distance([[0.5]])[0] == 0.0
    assert om.distance([[0.0]])[0] == pytest.approx(0.5)


def test_region_distance_lipschitz(rng):
    om = Region(np.array([[[0.5, 1.5]], [[3.0, 4.0]]]))
    a = rng.uniform(-2, 6, size=(200, 1))
    b = rng.uniform(-2, 6, size=(200, 1))
    da, db = om.distance(a), om.distance(b)
    assert np.all(np.abs(da - db) <= np.linalg.norm(a - b, axis=-1) + 1e-12)


def test_region_enlarged():
    om = interval(0.5, 1.5)
    big = om.enlarged(0.4)
    assert big.indicator([[0.2]])[0] == 1.0
    assert big.indicator([[0.09]])[0] == 0.0
    assert big.distance([[0.0]])[0] == pytest.approx(0.1)


def test_compact_set_diameter_and_grid():
    K = phys_box(-0.1, 0.1, 0.9, 1.1, spacing=0.05)
    assert K.diameter == pytest.approx(np.sqrt(0.2 ** 2 + 0.2 ** 2))
    grid = K.sample_grid()
    assert K.contains(grid).all()
    corners = K.corners()
    for c in corners:
        assert np.any(np.all(np.isclose(grid, c), axis=1))


def test_compact_set_rejects_overlap():
    with pytest.raises(ValueError, match="disjoint"):
        CompactSet(np.array([[[0.0, 1.0], [0.0, 1.0]],
                             [[0.5, 1.5], [0.5, 1.5]]]), 0.1)
