"""Closed-form constants and end-to-end observability certificates.

A certificate compares the observed space-time mass of an evolving state on a
delta-enlarged region against a computable lower bound built from the
geometric constant, the phase-space localization of the initial state, and an
exponentially growing correction.  Three coefficient conventions for the
pure-state correction term are in circulation (factors 1, 4 and 8 on the same
base constant); certificates subtract the largest (safest) one and report the
other two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from . import classical, phasespace, quantum
from .classical import CompactSet, IndicatorCutoff, RampCutoff, Region
from .phasespace import ToeplitzState
from .potentials import Potential
from .quantum import Grid, WaveFunction

SCHEMA_VERSION = 1


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


# ---------------------------------------------------------------------------
# closed-form constants
# ---------------------------------------------------------------------------

def spread_coefficient(T: float, lip: float) -> float:
    """Coefficient of spread/delta in the pure-state defect term:
    (exp((1 + lip^2) T / 2) - 1) / (1 + lip^2).  Saturates to +inf on overflow."""
    if T < 0 or lip < 0:
        raise ValueError("T and lip must be nonnegative")
    a = 1.0 + lip ** 2
    return (_exp(0.5 * a * T) - 1.0) / a


def _growth_objective(T: float, lip: float, lam: float) -> float:
    s = lam + lip ** 2 / lam
    e = _exp(0.5 * s * T)
    if math.isinf(e):
        return math.inf
    return (e - 1.0) / s * math.sqrt(1.0 + 1.0 / lam ** 2)


def balanced_growth_root(tol: float = 1e-10) -> float:
    """Positive root of r e^r = 2 (e^r - 1), by bisection on [1, 2]."""
    f = lambda r: r * math.exp(r) - 2.0 * (math.exp(r) - 1.0)
    lo, hi = 1.0, 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_L0_ROOT = balanced_growth_root()


def toeplitz_coefficient_details(T: float, lip: float) -> tuple[float, float]:
    """(value, minimizer lambda) of the Toeplitz correction coefficient
    inf_{lam > 0} (exp((lam + lip^2/lam) T / 2) - 1)/(lam + lip^2/lam)
    * sqrt(1 + 1/lam^2).

    Log-grid scan plus golden-section refinement; the explicit candidates
    lam = lip (lip > 0) and lam = 2 r / T with r the balanced-growth root
    (lip = 0) are upper bounds of the infimum and cap the result.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if lip < 0:
        raise ValueError("lip must be nonnegative")
    grid = np.logspace(-4, 4, 161)
    vals = np.array([_growth_objective(T, lip, lam) for lam in grid])
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    # golden section on log-lambda
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc = _growth_objective(T, lip, math.exp(c))
    fd = _growth_objective(T, lip, math.exp(d))
    while b - a > 1e-8 * max(1.0, abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = _growth_objective(T, lip, math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = _growth_objective(T, lip, math.exp(d))
    lam_star = math.exp(0.5 * (a + b))
    best = _growth_objective(T, lip, lam_star)
    candidates = [(best, lam_star)]
    if lip > 0:
        candidates.append((_growth_objective(T, lip, lip), lip))
    else:
        lam0 = 2.0 * _L0_ROOT / T
        candidates.append((_growth_objective(T, lip, lam0), lam0))
    value, lam = min(candidates, key=lambda t: t[0])
    return float(value), float(lam)


def toeplitz_coefficient(T: float, lip: float) -> float:
    return toeplitz_coefficient_details(T, lip)[0]


def lambda_equals_lip_bounds(T: float, lip: float) -> tuple[float, float]:
    """The two printed forms of the lam = lip upper bound:
    (e^{lip T}-1)/(2 lip) sqrt(1 + 1/lip^2)  and  (e^{lip T}-1)/(2 lip^2) sqrt(1 + lip^2).
    They are algebraically identical."""
    if lip <= 0:
        raise ValueError("lip must be positive for this bound")
    e = _exp(lip * T) - 1.0
    f1 = e / (2.0 * lip) * math.sqrt(1.0 + 1.0 / lip ** 2)
    f2 = e / (2.0 * lip ** 2) * math.sqrt(1.0 + lip ** 2)
    return f1, f2


def zero_lip_candidate(T: float) -> tuple[float, float]:
    """(lambda, bound value) of the explicit lam = 2 r / T choice at lip = 0."""
    lam0 = 2.0 * _L0_ROOT / T
    return lam0, _growth_objective(T, 0.0, lam0)


@dataclass(frozen=True)
class MinimalDelta:
    baseline: float
    state_dependent: Optional[float] = None


def minimal_delta(T: float, lip: float, hbar: float, dim: int, c_geo: float,
                  c_obs: float, diam_K: float,
                  spread: Optional[float] = None,
                  husimi_mass: Optional[float] = None) -> MinimalDelta:
    """Smallest delta for which the admissible set of states is nonempty.

    baseline uses the coherent-state tail estimate with the set diameter;
    the sharper state-dependent threshold replaces the tail by the actual
    phase-space mass on K and the minimal spread by the state's spread.
    """
    if c_geo <= 0:
        raise ValueError("c_geo must be positive")
    D = spread_coefficient(T, lip)
    tail = math.exp(-diam_K ** 2 / (4.0 * hbar)) / (4.0 * math.pi) ** dim
    denom = c_geo * (1.0 - tail) + 1.0 / c_obs
    if denom <= 0:
        raise ValueError("nonpositive denominator: inconsistent (c_obs, c_geo)")
    baseline = D * math.sqrt(dim * hbar) / denom
    state = None
    if spread is not None and husimi_mass is not None:
        denom_s = c_geo * (1.0 - husimi_mass) + 1.0 / c_obs
        if denom_s <= 0:
            raise ValueError("nonpositive denominator in state-dependent threshold")
        state = D * spread / denom_s
    return MinimalDelta(baseline=baseline, state_dependent=state)


# ---------------------------------------------------------------------------
# certification reports
# ---------------------------------------------------------------------------

@dataclass
class CertificationReport:
    schema_version: int
    scenario: str
    kind: str
    dim: int
    hbar: float
    T: float
    delta: float
    lam: float
    lip_grad: float
    d_K: float
    gc_satisfied: bool
    c_geo: float
    c_geo_refine_delta: float
    chi_geo: float
    lower_bound: float
    measured: float
    margin: float
    eps_num: float
    verdict: str
    err_budget: dict = field(default_factory=dict)
    husimi_mass: Optional[float] = None
    husimi_refine_delta: Optional[float] = None
    spread: Optional[float] = None
    d_const: Optional[float] = None
    correction_used: Optional[float] = None
    correction_factor4: Optional[float] = None
    correction_factor1: Optional[float] = None
    c_tl: Optional[float] = None
    admissible: Optional[bool] = None
    implied_c_obs: Optional[float] = None
    c_obs_times_T: Optional[float] = None
    ct_above_one: Optional[bool] = None
    ct_marginal: Optional[bool] = None
    delta_min_baseline: Optional[float] = None
    delta_min_state: Optional[float] = None
    left_box: bool = False

    def to_dict(self) -> dict:
        return _json_ready(asdict(self))


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _verdict(lower: float, measured: float, eps: float) -> str:
    if lower <= 0:
        return "vacuous"
    if measured < lower - eps:
        return "violated"
    return "certified"


def _time_quadrature_error(series: np.ndarray, dt: float, T: float) -> np.ndarray:
    """Composite-trapezoid error estimate per cutoff from the sampled series."""
    if len(series) < 3:
        return np.zeros(series.shape[1])
    second = np.abs(series[2:] - 2.0 * series[1:-1] + series[:-2]) / dt ** 2
    return second.max(axis=0) * dt ** 2 * T / 12.0


def _ct_fields(lower: float, T: float):
    if lower > 0:
        c_obs = 1.0 / lower
        ct = c_obs * T
        return c_obs, ct, bool(ct > 1.0), bool(abs(ct - 1.0) <= 0.1)
    return None, None, None, None


def certify_pure_sweep(V: Potential, K: CompactSet, omega: Region, T: float,
                       deltas: Sequence[float], psi: WaveFunction, *,
                       dt: float, dt_flow: float,
                       husimi_spacing: Optional[float] = None,
                       scenario: str = "") -> list[CertificationReport]:
    """Certificates for a pure initial state over a list of enlargement radii.

    lower bound:   c_geo * husimi_mass - 8 D(T, lip) * spread / delta
    measured side: observed mass on the delta-enlargement of the region.
    """
    if abs(psi.norm - 1.0) > 1e-8:
        raise ValueError("initial state must be normalized")
    deltas = [float(d) for d in deltas]
    if any(d <= 0 for d in deltas):
        raise ValueError("deltas must be positive")
    lip = V.lip_grad
    dim = psi.grid.dim

    c_geo, c_geo_delta = classical.geometric_constant_refined(
        V, K, IndicatorCutoff(omega), T, dt_flow)
    gc = classical.check_geometric_condition(V, K, omega, T, dt_flow)
    h_K, h_delta = phasespace.husimi_mass_refined(psi, K, husimi_spacing)
    delta_psi = quantum.spread(psi)
    D = spread_coefficient(T, lip)

    chis = [IndicatorCutoff(omega.enlarged(d)) for d in deltas]
    measured, info = quantum.observed_mass_series(V, psi, T, chis, dt)
    coarse, _ = quantum.observed_mass_series(V, psi, T, chis, 2.0 * dt)
    eps_prop = np.abs(measured - coarse) / 3.0
    eps_time = _time_quadrature_error(info["series"], info["dt"], T)
    eps_space = T * info["edge_peak"]

    reports = []
    for j, delta in enumerate(deltas):
        chi_geo = classical.geometric_constant(V, K, RampCutoff(omega, delta), T, dt_flow)
        corr_used = 8.0 * D * delta_psi / delta
        lower = c_geo * h_K - corr_used
        eps = float(eps_prop[j] + eps_time[j] + eps_space[j]
                    + c_geo_delta * h_K + c_geo * h_delta)
        m = float(measured[j])
        c_obs, ct, ct_ok, ct_marginal = _ct_fields(lower, T)
        dm_base = dm_state = None
        if c_obs is not None:
            try:
                dm = minimal_delta(T, lip, psi.hbar, dim, c_geo, c_obs, K.diameter,
                                   spread=delta_psi, husimi_mass=h_K)
                dm_base, dm_state = dm.baseline, dm.state_dependent
            except ValueError:
                pass
        reports.append(CertificationReport(
            schema_version=SCHEMA_VERSION, scenario=scenario, kind="pure",
            dim=dim, hbar=psi.hbar, T=T, delta=delta, lam=1.0, lip_grad=lip,
            d_K=K.diameter, gc_satisfied=gc.satisfied,
            c_geo=c_geo, c_geo_refine_delta=c_geo_delta, chi_geo=chi_geo,
            lower_bound=lower, measured=m, margin=m - lower, eps_num=eps,
            verdict=_verdict(lower, m, eps),
            err_budget={
                "propagation": float(eps_prop[j]),
                "time_quadrature": float(eps_time[j]),
                "space_quadrature": float(eps_space[j]),
                "c_geo_refinement": float(c_geo_delta),
                "husimi_refinement": float(h_delta),
            },
            husimi_mass=h_K, husimi_refine_delta=h_delta, spread=delta_psi,
            d_const=D, correction_used=corr_used,
            correction_factor4=0.5 * corr_used,
            correction_factor1=D * delta_psi / delta,
            implied_c_obs=c_obs, c_obs_times_T=ct, ct_above_one=ct_ok,
            ct_marginal=ct_marginal,
            delta_min_baseline=dm_base, delta_min_state=dm_state,
            left_box=gc.table.left_box,
        ))
    return reports


def certify_pure(V: Potential, K: CompactSet, omega: Region, T: float,
                 delta: float, psi: WaveFunction, *, dt: float, dt_flow: float,
                 husimi_spacing: Optional[float] = None,
                 scenario: str = "") -> CertificationReport:
    return certify_pure_sweep(V, K, omega, T, [delta], psi, dt=dt, dt_flow=dt_flow,
                              husimi_spacing=husimi_spacing, scenario=scenario)[0]


def certify_toeplitz_sweep(V: Potential, K: CompactSet, omega: Region, T: float,
                           deltas: Sequence[float], R: ToeplitzState, grid: Grid, *,
                           dt: float, dt_flow: float,
                           scenario: str = "") -> list[CertificationReport]:
    """Certificates for a Toeplitz initial state (atomized symbol in K).

    lower bound:   c_geo - C(T, lip) * sqrt(2 dim hbar) / delta
    measured side: weighted observed mass of the propagated atoms.
    """
    deltas = [float(d) for d in deltas]
    if any(d <= 0 for d in deltas):
        raise ValueError("deltas must be positive")
    if not np.all(K.contains(R.atoms)):
        raise ValueError("all Toeplitz atoms must lie inside K")
    lip = V.lip_grad
    dim = R.dim

    c_geo, c_geo_delta = classical.geometric_constant_refined(
        V, K, IndicatorCutoff(omega), T, dt_flow)
    gc = classical.check_geometric_condition(V, K, omega, T, dt_flow)
    c_tl, lam_star = toeplitz_coefficient_details(T, lip)

    chis = [IndicatorCutoff(omega.enlarged(d)) for d in deltas]
    measured = np.zeros(len(deltas))
    coarse = np.zeros(len(deltas))
    eps_time = np.zeros(len(deltas))
    eps_space = np.zeros(len(deltas))
    for j, w in enumerate(R.weights):
        if w == 0.0:
            continue
        psi = R.atom_state(j, grid)
        m_fine, info = quantum.observed_mass_series(V, psi, T, chis, dt)
        m_coarse, _ = quantum.observed_mass_series(V, psi, T, chis, 2.0 * dt)
        measured += w * m_fine
        coarse += w * m_coarse
        eps_time += w * _time_quadrature_error(info["series"], info["dt"], T)
        eps_space += w * T * info["edge_peak"]
    eps_prop = np.abs(measured - coarse) / 3.0

    reports = []
    for j, delta in enumerate(deltas):
        chi_geo = classical.geometric_constant(V, K, RampCutoff(omega, delta), T, dt_flow)
        lower = c_geo - c_tl * math.sqrt(2.0 * dim * R.hbar) / delta
        eps = float(eps_prop[j] + eps_time[j] + eps_space[j] + c_geo_delta)
        m = float(measured[j])
        threshold = c_geo ** 2 / (2.0 * dim * c_tl ** 2) if math.isfinite(c_tl) else 0.0
        admissible = bool(R.hbar / delta ** 2 < threshold)
        c_obs, ct, ct_ok, ct_marginal = _ct_fields(lower, T)
        reports.append(CertificationReport(
            schema_version=SCHEMA_VERSION, scenario=scenario, kind="toeplitz",
            dim=dim, hbar=R.hbar, T=T, delta=delta, lam=lam_star, lip_grad=lip,
            d_K=K.diameter, gc_satisfied=gc.satisfied,
            c_geo=c_geo, c_geo_refine_delta=c_geo_delta, chi_geo=chi_geo,
            lower_bound=lower, measured=m, margin=m - lower, eps_num=eps,
            verdict=_verdict(lower, m, eps),
            err_budget={
                "propagation": float(eps_prop[j]),
                "time_quadrature": float(eps_time[j]),
                "space_quadrature": float(eps_space[j]),
                "c_geo_refinement": float(c_geo_delta),
            },
            c_tl=c_tl, admissible=admissible,
            implied_c_obs=c_obs, c_obs_times_T=ct, ct_above_one=ct_ok,
            ct_marginal=ct_marginal,
            left_box=gc.table.left_box,
        ))
    return reports


def certify_toeplitz(V: Potential, K: CompactSet, omega: Region, T: float,
                     delta: float, R: ToeplitzState, grid: Grid, *,
                     dt: float, dt_flow: float,
                     scenario: str = "") -> CertificationReport:
    return certify_toeplitz_sweep(V, K, omega, T, [delta], R, grid, dt=dt,
                                  dt_flow=dt_flow, scenario=scenario)[0]


def observability_margin(psi: WaveFunction, K: CompactSet, omega: Region, T: float,
                         delta: float, c_obs: float, V: Potential, *,
                         dt_flow: float,
                         husimi_spacing: Optional[float] = None) -> tuple[float, bool]:
    """The admissibility functional for a target observation constant:
    occupation inf over K for the delta-enlarged region, weighted by the
    phase-space mass on K, minus the spread penalty.  Returns (value, value >= 1/c_obs)."""
    if c_obs <= 0:
        raise ValueError("c_obs must be positive")
    c_enl = classical.geometric_constant(
        V, K, IndicatorCutoff(omega.enlarged(delta)), T, dt_flow)
    h_K = phasespace.husimi_mass(psi, K, husimi_spacing)
    D = spread_coefficient(T, V.lip_grad)
    value = c_enl * h_K - D * quantum.spread(psi) / delta
    return float(value), bool(value >= 1.0 / c_obs)
