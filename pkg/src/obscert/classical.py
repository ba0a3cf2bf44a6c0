"""Hamiltonian flow, observation regions, occupation times and the geometric constant.

The flow X' = Xi, Xi' = -grad V(X) is integrated with the Stoermer-Verlet
scheme (symplectic, second order).  Occupation times under an indicator
cutoff locate entry/exit events by bisection inside a step so the quadrature
error stays O(dt^2) instead of O(dt); continuous cutoffs use the composite
trapezoid rule.  The infimum over a compact phase-space set K is discretized
as a minimum over a sample lattice, with a refinement delta reported so
certificates stay honest about the gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .potentials import Potential

Array = np.ndarray


# ---------------------------------------------------------------------------
# phase-space geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhasePoint:
    """A point (x, xi) in position-momentum space; components are (dim,) arrays."""

    x: Array
    xi: Array

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "xi", np.atleast_1d(np.asarray(self.xi, dtype=float)))
        if self.x.shape != self.xi.shape:
            raise ValueError("x and xi must have the same dimension")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.xi))):
            raise ValueError("phase point has non-finite components")

    @property
    def dim(self) -> int:
        return self.x.size


def _boxes_array(boxes, width: int) -> Array:
    b = np.asarray(boxes, dtype=float)
    if b.ndim == 2:
        b = b[None, :, :]
    if b.ndim != 3 or b.shape[1] != width or b.shape[2] != 2:
        raise ValueError(f"boxes must have shape (k, {width}, 2), got {b.shape}")
    if np.any(b[:, :, 0] > b[:, :, 1]):
        raise ValueError("box has lo > hi")
    return b


def _boxes_disjoint(b: Array) -> bool:
    for i in range(len(b)):
        for j in range(i + 1, len(b)):
            if np.all(b[i, :, 0] < b[j, :, 1]) and np.all(b[j, :, 0] < b[i, :, 1]):
                return False
    return True


@dataclass(frozen=True)
class CompactSet:
    """Finite union of closed phase-space boxes, sampled on a lattice of spacing h.

    boxes: (k, 2*dim, 2) array of [lo, hi] per phase coordinate (positions
    first, then momenta).  The sample grid always contains the box corners.
    """

    boxes: Array
    spacing: float

    def __post_init__(self):
        b = np.asarray(self.boxes, dtype=float)
        if b.ndim == 2:
            b = b[None, :, :]
        if b.ndim != 3 or b.shape[2] != 2 or b.shape[1] % 2 != 0:
            raise ValueError("CompactSet boxes must have shape (k, 2*dim, 2)")
        if np.any(b[:, :, 0] > b[:, :, 1]):
            raise ValueError("box has lo > hi")
        if len(b) == 0:
            raise ValueError("CompactSet needs at least one box")
        if not _boxes_disjoint(b):
            raise ValueError("CompactSet boxes must have disjoint interiors")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "boxes", b)

    @property
    def dim(self) -> int:
        return self.boxes.shape[1] // 2

    def sample_grid(self, spacing: Optional[float] = None) -> Array:
        """Lattice of phase points covering the set, corners included; shape (m, 2*dim)."""
        h = self.spacing if spacing is None else spacing
        pieces = []
        for box in self.boxes:
            axes = []
            for lo, hi in box:
                if hi - lo <= 0:
                    axes.append(np.array([lo]))
                else:
                    n = max(2, int(math.ceil((hi - lo) / h)) + 1)
                    axes.append(np.linspace(lo, hi, n))
            mesh = np.meshgrid(*axes, indexing="ij")
            pieces.append(np.stack([m.ravel() for m in mesh], axis=-1))
        return np.concatenate(pieces, axis=0)

    def corners(self) -> Array:
        out = []
        for box in self.boxes:
            mesh = np.meshgrid(*[box[i] for i in range(box.shape[0])], indexing="ij")
            out.append(np.stack([m.ravel() for m in mesh], axis=-1))
        return np.concatenate(out, axis=0)

    @property
    def diameter(self) -> float:
        c = self.corners()
        d2 = np.sum((c[:, None, :] - c[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))

    def contains(self, points: Array) -> Array:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.zeros(len(p), dtype=bool)
        for box in self.boxes:
            inside |= np.all((p >= box[:, 0]) & (p <= box[:, 1]), axis=-1)
        return inside


@dataclass(frozen=True)
class Region:
    """Open observation region in position space: a union of open boxes,
    optionally enlarged by ``inflate`` in Euclidean distance.

    With inflate = 0 the indicator is 'strictly inside some box' (boundary
    counts as outside); with inflate = delta > 0 it is dist(x, base) < delta,
    which is the delta-enlargement of the base region.
    """

    boxes: Array
    inflate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "boxes", _boxes_array(self.boxes, self.dim_of(self.boxes)))
        if self.inflate < 0:
            raise ValueError("inflate must be nonnegative")

    @staticmethod
    def dim_of(boxes) -> int:
        b = np.asarray(boxes, dtype=float)
        return b.shape[-2]

    @property
    def dim(self) -> int:
        return self.boxes.shape[1]

    def _dist_to_boxes(self, p: Array) -> Array:
        # Euclidean distance to the closed union; p has shape (m, dim)
        d = np.full(len(p), np.inf)
        for box in self.boxes:
            gaps = np.maximum(box[:, 0] - p, 0.0) + np.maximum(p - box[:, 1], 0.0)
            d = np.minimum(d, np.linalg.norm(gaps, axis=-1))
        return d

    def indicator(self, points) -> Array:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.inflate > 0:
            return (self._dist_to_boxes(p) < self.inflate).astype(float)
        inside = np.zeros(len(p), dtype=bool)
        for box in self.boxes:
            inside |= np.all((p > box[:, 0]) & (p < box[:, 1]), axis=-1)
        return inside.astype(float)

    def distance(self, points) -> Array:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.maximum(self._dist_to_boxes(p) - self.inflate, 0.0)

    def enlarged(self, delta: float) -> "Region":
        if delta <= 0:
            raise ValueError("delta must be positive")
        return Region(self.boxes, inflate=self.inflate + delta)


# ---------------------------------------------------------------------------
# cutoff functions chi: position -> [0, 1]
# ---------------------------------------------------------------------------

class Cutoff:
    """Callable cutoff over (m, dim) position arrays."""

    is_indicator = False

    def __call__(self, points) -> Array:  # pragma: no cover - interface
        raise NotImplementedError


class ConstantCutoff(Cutoff):
    def __init__(self, value: float = 1.0):
        if not 0.0 <= value <= 1.0:
            raise ValueError("cutoff values must lie in [0, 1]")
        self.value = float(value)

    def __call__(self, points) -> Array:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.full(len(p), self.value)


class IndicatorCutoff(Cutoff):
    """chi = 1 on the (open) region, 0 outside; discontinuous."""

    is_indicator = True

    def __init__(self, region: Region):
        self.region = region

    def __call__(self, points) -> Array:
        return self.region.indicator(points)


class RampCutoff(Cutoff):
    """chi(x) = (1 - dist(x, region)/delta)_+, Lipschitz with constant 1/delta."""

    def __init__(self, region: Region, delta: float):
        if delta <= 0:
            raise ValueError("delta must be positive")
        self.region = region
        self.delta = float(delta)

    @property
    def lip(self) -> float:
        return 1.0 / self.delta

    def __call__(self, points) -> Array:
        return np.maximum(0.0, 1.0 - self.region.distance(points) / self.delta)


# ---------------------------------------------------------------------------
# Stoermer-Verlet flow
# ---------------------------------------------------------------------------

def _grad(V: Potential, x: Array) -> Array:
    return V.gradient(x).reshape(x.shape)

def verlet_step(V: Potential, x: Array, xi: Array, dt: float):
    """One velocity-Verlet step of size dt for batches x, xi of shape (m, dim)."""
    half = xi - 0.5 * dt * _grad(V, x)
    x1 = x + dt * half
    xi1 = half - 0.5 * dt * _grad(V, x1)
    return x1, xi1


def hamiltonian(V: Potential, x: Array, xi: Array) -> Array:
    x2 = np.atleast_2d(x)
    return 0.5 * np.sum(np.atleast_2d(xi) ** 2, axis=-1) + V.value_fn(x2)


def _steps_for(t: float, dt: float) -> tuple[int, float]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0, dt
    n = max(1, int(math.ceil(t / dt - 1e-12)))
    return n, t / n


def flow(V: Potential, p0: PhasePoint, t: float, dt: float) -> PhasePoint:
    """Approximate the time-t flow map applied to p0 (global error O(dt^2))."""
    n, h = _steps_for(t, dt)
    x = p0.x[None, :].copy()
    xi = p0.xi[None, :].copy()
    for _ in range(n):
        x, xi = verlet_step(V, x, xi, h)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
        raise FloatingPointError("flow blew up: dt too large or pathological potential")
    return PhasePoint(x[0], xi[0])


# ---------------------------------------------------------------------------
# occupation times with event bracketing
# ---------------------------------------------------------------------------

def _bisect_crossing(V: Potential, x0: Array, xi0: Array, h: float,
                     chi: Cutoff, inside_before: bool, tol: float) -> float:
    """Crossing time s* in (0, h) of the indicator along the step that starts
    at (x0, xi0), assuming the indicator differs at s=0 and s=h."""
    lo, hi = 0.0, h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        xm, _ = verlet_step(V, x0[None, :], xi0[None, :], mid)
        if bool(chi(xm)[0] > 0.5) == inside_before:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class OccupationResult:
    points: Array            # (m, 2*dim) initial phase points
    occupation: Array        # (m,) time spent weighted by chi
    first_hit: Array         # (m,) first time with chi > 0 (nan if never)
    left_box: bool           # any trajectory left the potential's working box


def occupation_batch(V: Potential, points: Array, T: float, chi: Cutoff,
                     dt: float) -> OccupationResult:
    """Integrate all trajectories and accumulate int_0^T chi(X(t)) dt per sample.

    Indicator cutoffs get exact crossing splits (bisection to dt*1e-3);
    smooth cutoffs use trapezoid weights at the integrator substeps.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = len(pts)
    dim = pts.shape[1] // 2
    x = pts[:, :dim].copy()
    xi = pts[:, dim:].copy()
    n, h = _steps_for(T, dt)
    tol = h * 1e-3

    occ = np.zeros(m)
    first_hit = np.full(m, np.nan)
    vals = chi(x)
    if chi.is_indicator:
        first_hit[vals > 0.5] = 0.0
    left_box = bool(np.any(~V.inside_box(x)))

    t = 0.0
    for _ in range(n):
        x_new, xi_new = verlet_step(V, x, xi, h)
        if not np.all(np.isfinite(x_new)):
            raise FloatingPointError("flow blew up: dt too large or pathological potential")
        vals_new = chi(x_new)
        if chi.is_indicator:
            inside_old = vals > 0.5
            inside_new = vals_new > 0.5
            same = inside_old == inside_new
            occ[same & inside_old] += h
            for i in np.nonzero(~same)[0]:
                s = _bisect_crossing(V, x[i], xi[i], h, chi, bool(inside_old[i]), tol)
                if inside_old[i]:
                    occ[i] += s                      # exits at t + s
                else:
                    occ[i] += h - s                  # enters at t + s
                    if np.isnan(first_hit[i]):
                        first_hit[i] = t + s
        else:
            occ += 0.5 * h * (vals + vals_new)
            newly = np.isnan(first_hit) & (vals_new > 0)
            first_hit[newly] = t + h
        x, xi = x_new, xi_new
        vals = vals_new
        t += h
        left_box = left_box or bool(np.any(~V.inside_box(x)))

    np.clip(occ, 0.0, T, out=occ)
    return OccupationResult(points=pts, occupation=occ, first_hit=first_hit,
                            left_box=left_box)


def occupation_time(V: Potential, p0: PhasePoint, T: float, chi: Cutoff,
                    dt: float) -> float:
    """Time-in-cutoff along one trajectory: int_0^T chi(X(t; p0)) dt."""
    pt = np.concatenate([p0.x, p0.xi])[None, :]
    return float(occupation_batch(V, pt, T, chi, dt).occupation[0])


# ---------------------------------------------------------------------------
# geometric constant and the geometric condition
# ---------------------------------------------------------------------------

def geometric_constant_table(V: Potential, K: CompactSet, chi: Cutoff, T: float,
                             dt: float, spacing: Optional[float] = None) -> OccupationResult:
    return occupation_batch(V, K.sample_grid(spacing), T, chi, dt)


def geometric_constant(V: Potential, K: CompactSet, chi: Cutoff, T: float,
                       dt: float) -> float:
    """Discretized inf over K of the occupation time (min over the sample lattice)."""
    return float(geometric_constant_table(V, K, chi, T, dt).occupation.min())


def geometric_constant_refined(V: Potential, K: CompactSet, chi: Cutoff, T: float,
                               dt: float) -> tuple[float, float]:
    """(value at spacing h, |value(h) - value(h/2)|) - the grid refinement delta."""
    coarse = geometric_constant(V, K, chi, T, dt)
    fine = float(occupation_batch(V, K.sample_grid(K.spacing / 2), T, chi, dt)
                 .occupation.min())
    return coarse, abs(coarse - fine)


@dataclass
class GcResult:
    satisfied: bool
    table: OccupationResult

    @property
    def first_hits(self) -> Array:
        return self.table.first_hit


def check_geometric_condition(V: Potential, K: CompactSet, omega: Region, T: float,
                              dt: float) -> GcResult:
    """True iff every sampled trajectory from K enters omega at some t in (0, T).

    A sample starting inside the open region satisfies the condition (the
    trajectory stays in it for a positive time); its recorded hit time is 0.
    """
    table = occupation_batch(V, K.sample_grid(), T, IndicatorCutoff(omega), dt)
    hits = table.first_hit
    ok = bool(np.all(np.isfinite(hits) & (hits < T)))
    return GcResult(satisfied=ok, table=table)
