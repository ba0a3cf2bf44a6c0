"""Wave functions on a periodic grid and their split-step spectral evolution.

States live on a uniform periodic lattice over [-L/2, L/2)^d with a power-of-two
number of points per axis.  The box must be large enough that every state keeps
boundary amplitude below 1e-12 for the whole run; a monitor aborts otherwise.
Time stepping is Strang splitting: half potential phase, exact kinetic factor
in Fourier space, half potential phase (unitary, global error O(dt^2)).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .potentials import Potential

Array = np.ndarray

BOUNDARY_TOL = 1e-12
ALIAS_TOL = 1e-10


class NumericsError(RuntimeError):
    """A numerical monitor tripped; the discretization is inadequate."""


class BoundaryLeakError(NumericsError):
    """State amplitude at the box boundary exceeded tolerance (box too small)."""


class SpectralAliasError(NumericsError):
    """Spectral tail mass exceeded tolerance (grid too coarse for the momenta)."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid over [-length/2, length/2)^dim, n points per axis."""

    dim: int
    n: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("only dim 1 and 2 are supported")
        if self.n < 4 or (self.n & (self.n - 1)) != 0:
            raise ValueError("n must be a power of two (spectral transforms)")
        if self.length <= 0:
            raise ValueError("length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    @property
    def axis(self) -> Array:
        return -0.5 * self.length + self.dx * np.arange(self.n)

    @property
    def k_axis(self) -> Array:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    def meshes(self) -> list[Array]:
        if self.dim == 1:
            return [self.axis]
        return list(np.meshgrid(self.axis, self.axis, indexing="ij"))

    def k_meshes(self) -> list[Array]:
        if self.dim == 1:
            return [self.k_axis]
        return list(np.meshgrid(self.k_axis, self.k_axis, indexing="ij"))

    def points(self) -> Array:
        """All grid nodes as an (n^dim, dim) array."""
        return np.stack([m.ravel() for m in self.meshes()], axis=-1)


@dataclass(frozen=True)
class WaveFunction:
    grid: Grid
    values: Array
    hbar: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        object.__setattr__(self, "values", v)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def normalized(self) -> "WaveFunction":
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalize the zero state")
        return WaveFunction(self.grid, self.values / n, self.hbar)

    def density(self) -> Array:
        return np.abs(self.values) ** 2

    def boundary_amplitude(self) -> float:
        v = np.abs(self.values)
        if self.grid.dim == 1:
            return float(max(v[0], v[-1]))
        return float(max(v[0, :].max(), v[-1, :].max(), v[:, 0].max(), v[:, -1].max()))

    def check_boundary(self):
        amp = self.boundary_amplitude()
        if amp > BOUNDARY_TOL:
            raise BoundaryLeakError(
                f"boundary amplitude {amp:.3e} exceeds {BOUNDARY_TOL:.0e}; enlarge the box"
            )

    def spectral_tail_mass(self, fraction: float = 0.9) -> float:
        """Mass carried by modes with |k| beyond `fraction` of the Nyquist band."""
        ft = np.fft.fftn(self.values)
        power = np.abs(ft) ** 2
        total = power.sum()
        if total == 0:
            return 0.0
        kmax = np.pi / self.grid.dx
        if self.grid.dim == 1:
            outer = np.abs(self.grid.k_axis) > fraction * kmax
            return float(power[outer].sum() / total)
        kx, ky = self.grid.k_meshes()
        outer = np.maximum(np.abs(kx), np.abs(ky)) > fraction * kmax
        return float(power[outer].sum() / total)


def inner(a: WaveFunction, b: WaveFunction) -> complex:
    if a.grid != b.grid:
        raise ValueError("states live on different grids")
    return complex(np.sum(np.conj(a.values) * b.values) * a.grid.cell_volume)


# ---------------------------------------------------------------------------
# state constructors
# ---------------------------------------------------------------------------

def _centers(grid: Grid, q, p):
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if q.size != grid.dim or p.size != grid.dim:
        raise ValueError(f"q and p must have {grid.dim} components")
    return q, p


def gaussian_state(grid: Grid, hbar: float, q, p, sigma: float) -> WaveFunction:
    """Gaussian packet exp(-|x-q|^2/(2 sigma^2) + i p.(x-q)/hbar), normalized.

    sigma = sqrt(hbar) reproduces the coherent state.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    q, p = _centers(grid, q, p)
    meshes = grid.meshes()
    r2 = sum((m - qi) ** 2 for m, qi in zip(meshes, q))
    phase = sum(pi * (m - qi) for m, pi, qi in zip(meshes, p, q))
    values = np.exp(-r2 / (2.0 * sigma ** 2) + 1j * phase / hbar)
    psi = WaveFunction(grid, values, hbar).normalized()
    psi.check_boundary()
    return psi


def coherent_state(grid: Grid, hbar: float, q, p) -> WaveFunction:
    """Minimal-uncertainty packet of width sqrt(hbar) centered at (q, p)."""
    return gaussian_state(grid, hbar, q, p, math.sqrt(hbar))


def superposition(states: Sequence[WaveFunction], amplitudes: Sequence[complex]) -> WaveFunction:
    if len(states) != len(amplitudes) or not states:
        raise ValueError("need matching, nonempty states and amplitudes")
    grid, hbar = states[0].grid, states[0].hbar
    values = sum(a * s.values for a, s in zip(amplitudes, states))
    psi = WaveFunction(grid, values, hbar).normalized()
    psi.check_boundary()
    return psi


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

def propagate(V: Potential, psi: WaveFunction, t: float, dt: float) -> WaveFunction:
    """Evolve psi for time t under -hbar^2/2 Laplacian + V by Strang splitting."""
    if t == 0:
        return WaveFunction(psi.grid, psi.values.copy(), psi.hbar)
    n_steps, h = _split_steps(t, dt)
    stepper = _Stepper(V, psi.grid, psi.hbar, h)
    values = stepper.run(psi.values, n_steps)
    out = WaveFunction(psi.grid, values, psi.hbar)
    tail = out.spectral_tail_mass()
    if tail > ALIAS_TOL:
        raise SpectralAliasError(
            f"spectral tail mass {tail:.3e} exceeds {ALIAS_TOL:.0e}; refine the grid"
        )
    out.check_boundary()
    return out


def _split_steps(t: float, dt: float) -> tuple[int, float]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = max(1, int(math.ceil(t / dt - 1e-12)))
    return n, t / n


class _Stepper:
    """Precomputed Strang factors; consecutive half potential phases are fused."""

    def __init__(self, V: Potential, grid: Grid, hbar: float, h: float):
        vgrid = V.value_fn(grid.points()).reshape(grid.shape)
        self.half = np.exp(-0.5j * vgrid * h / hbar)
        self.full = self.half * self.half
        k2 = sum(km ** 2 for km in grid.k_meshes())
        self.kinetic = np.exp(-0.5j * hbar * k2 * h)

    def run(self, values: Array, n_steps: int) -> Array:
        v = values * self.half
        for step in range(n_steps):
            v = np.fft.ifftn(self.kinetic * np.fft.fftn(v))
            v = v * (self.half if step == n_steps - 1 else self.full)
        return v


def propagate_series(V: Potential, psi: WaveFunction, T: float, dt: float,
                     observer: Callable[[float, WaveFunction], None]) -> WaveFunction:
    """Propagate while calling observer(t, state) at t = 0, dt, ..., T."""
    n_steps, h = _split_steps(T, dt)
    stepper = _Stepper(V, psi.grid, psi.hbar, h)
    current = psi.values.copy()
    observer(0.0, psi)
    for step in range(n_steps):
        if step == 0:
            current = current * stepper.half
        current = np.fft.ifftn(stepper.kinetic * np.fft.fftn(current))
        if step == n_steps - 1:
            current = current * stepper.half
            state = WaveFunction(psi.grid, current, psi.hbar)
        else:
            # observer sees the synchronized state (half phase applied)
            state = WaveFunction(psi.grid, current * stepper.half, psi.hbar)
            current = current * stepper.full
        observer((step + 1) * h, state)
    tail = state.spectral_tail_mass()
    if tail > ALIAS_TOL:
        raise SpectralAliasError(
            f"spectral tail mass {tail:.3e} exceeds {ALIAS_TOL:.0e}; refine the grid"
        )
    state.check_boundary()
    return state


# ---------------------------------------------------------------------------
# moments and expectations
# ---------------------------------------------------------------------------

def position_moments(psi: WaveFunction):
    """Per-axis mean and variance of position."""
    dens = psi.density()
    w = dens * psi.grid.cell_volume
    total = w.sum()
    means, variances = [], []
    for m in psi.grid.meshes():
        mu = float((m * w).sum() / total)
        means.append(mu)
        variances.append(float((((m - mu) ** 2) * w).sum() / total))
    return np.array(means), np.array(variances)


def momentum_moments(psi: WaveFunction):
    """Per-axis mean and variance of the momentum operator -i hbar d/dx."""
    ft = np.fft.fftn(psi.values)
    w = np.abs(ft) ** 2
    total = w.sum()
    means, variances = [], []
    for km in psi.grid.k_meshes():
        pm = psi.hbar * km
        mu = float((pm * w).sum() / total)
        means.append(mu)
        variances.append(float((((pm - mu) ** 2) * w).sum() / total))
    return np.array(means), np.array(variances)


def spread(psi: WaveFunction) -> float:
    """Total phase-space standard deviation sqrt(sum_j Var(x_j) + Var(p_j));
    bounded below by sqrt(dim * hbar) and attained by coherent states."""
    _, var_x = position_moments(psi)
    _, var_p = momentum_moments(psi)
    return float(np.sqrt(var_x.sum() + var_p.sum()))


def cost_expectation(psi: WaveFunction, x0, xi0, lam: float) -> float:
    """Expectation of lam^2 |x0 - y|^2 + |xi0 + i hbar grad|^2 in the state psi.

    Position part by grid quadrature, momentum part spectrally.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    xi0 = np.atleast_1d(np.asarray(xi0, dtype=float))
    dens = psi.density() * psi.grid.cell_volume
    total = dens.sum()
    pos = sum(float((((m - c) ** 2) * dens).sum()) for m, c in zip(psi.grid.meshes(), x0))
    ft = np.fft.fftn(psi.values)
    w = np.abs(ft) ** 2
    wtot = w.sum()
    mom = sum(float((((psi.hbar * km - c) ** 2) * w).sum() / wtot)
              for km, c in zip(psi.grid.k_meshes(), xi0))
    return lam ** 2 * pos / total + mom


def second_moment(psi: WaveFunction, lam: float) -> float:
    """<psi, (-hbar^2 Laplacian + lam^2 |y|^2) psi> for a normalized state."""
    zeros = np.zeros(psi.grid.dim)
    return cost_expectation(psi, zeros, zeros, lam)


# ---------------------------------------------------------------------------
# observed mass
# ---------------------------------------------------------------------------

def observed_mass_series(V: Potential, psi: WaveFunction, T: float,
                         chis: Sequence, dt: float):
    """Trapezoid-in-time integrals of int chi |psi(t)|^2 dx for several cutoffs.

    Returns (masses, info) where masses[j] is the value for chis[j] and info
    carries the per-step series and edge-density diagnostics used for the
    error budget.
    """
    grid = psi.grid
    pts = grid.points()
    weights = np.stack([np.asarray(chi(pts), dtype=float).reshape(-1) for chi in chis])
    boundary_masks = []
    for chi in chis:
        w = np.asarray(chi(pts), dtype=float).reshape(grid.shape)
        if getattr(chi, "is_indicator", False):
            edge = np.zeros(grid.shape, dtype=bool)
            for ax in range(grid.dim):
                rolled = np.roll(w, 1, axis=ax)
                edge |= (w != rolled) | (np.roll(w, -1, axis=ax) != w)
            boundary_masks.append(edge.reshape(-1))
        else:
            boundary_masks.append(np.zeros(grid.shape, dtype=bool).reshape(-1))

    series = []
    edge_peak = np.zeros(len(chis))

    def observer(t, state):
        dens = state.density().reshape(-1) * grid.cell_volume
        series.append(weights @ dens)
        for j, mask in enumerate(boundary_masks):
            if mask.any():
                edge_peak[j] = max(edge_peak[j], float(dens[mask].sum()))

    final = propagate_series(V, psi, T, dt, observer)
    arr = np.array(series)                      # (n_t, n_chi)
    n_t = len(arr)
    h = T / (n_t - 1)
    w_t = np.full(n_t, h)
    w_t[0] = w_t[-1] = 0.5 * h
    masses = w_t @ arr
    info = {
        "series": arr,
        "dt": h,
        "edge_peak": edge_peak,                 # max over time of mass in edge cells
        "final_state": final,
    }
    return masses, info


def observed_mass(V: Potential, psi: WaveFunction, T: float, chi, dt: float) -> float:
    """Space-time observed mass int_0^T int chi(x) |psi(t, x)|^2 dx dt."""
    masses, _ = observed_mass_series(V, psi, T, [chi], dt)
    return float(masses[0])


# ---------------------------------------------------------------------------
# binary state snapshots
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<iiddd")   # dim, n, length, hbar, t


def save_state(path, psi: WaveFunction, t: float = 0.0):
    """Write a state snapshot: little-endian header (dim, n, length, hbar, t)
    followed by interleaved re/im float64 pairs in row-major node order."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(psi.grid.dim, psi.grid.n, psi.grid.length, psi.hbar, t))
        fh.write(np.ascontiguousarray(psi.values, dtype="<c16").tobytes())


def load_state(path) -> tuple[WaveFunction, float]:
    with open(path, "rb") as fh:
        dim, n, length, hbar, t = _HEADER.unpack(fh.read(_HEADER.size))
        grid = Grid(dim=dim, n=n, length=length)
        raw = np.frombuffer(fh.read(), dtype="<c16")
    values = raw.reshape(grid.shape).astype(complex)
    return WaveFunction(grid, values, hbar), t
