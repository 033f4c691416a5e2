"""Finite-volume truncations, eigenvalue counting, the integrated density
of states, spectral-measure approximations, and Holder-continuity scans.

All truncations use Dirichlet boundary conditions: the boundary is a
rank-2 perturbation, so counting functions shift by O(1/L) uniformly in
the phase.  Eigenvalue counting goes through Sturm sequences (inertia of
the shifted LDL^T factorization), which is O(L) per energy and phase and
vectorizes over energy grids.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from qplab.arithmetic import Frequency
from qplab.cocycle import GrowthProfile
from qplab.potential import PotentialSpec, eval_potential

DENSE_CAP = 4000
_PIVMIN = 1e-290


@dataclass(frozen=True)
class TruncatedOperator:
    """Symmetric tridiagonal Dirichlet section of the lattice operator."""

    diagonal: np.ndarray
    offdiagonal: np.ndarray
    theta: float
    band_width: int = 1

    @property
    def size(self) -> int:
        return len(self.diagonal)

    def to_dense(self) -> np.ndarray:
        m = np.diag(self.diagonal)
        idx = np.arange(self.size - 1)
        m[idx, idx + 1] = self.offdiagonal
        m[idx + 1, idx] = self.offdiagonal
        return m

    def gershgorin_interval(self) -> tuple[float, float]:
        radius = np.zeros(self.size)
        radius[:-1] += np.abs(self.offdiagonal)
        radius[1:] += np.abs(self.offdiagonal)
        return (float(np.min(self.diagonal - radius)),
                float(np.max(self.diagonal + radius)))


def truncate(v: PotentialSpec, freq: Frequency, theta: float, L: int) -> TruncatedOperator:
    """The L x L Dirichlet section on sites 0..L-1."""
    if L < 2:
        raise ValueError("L must be >= 2")
    alpha = float(freq.value)
    sites = (theta + alpha * np.arange(L)) % 1.0
    diag = v.lam * np.asarray(eval_potential(v, sites), dtype=float)
    if np.isscalar(diag) or diag.ndim == 0:
        diag = np.full(L, float(diag))
    return TruncatedOperator(diagonal=diag, offdiagonal=np.ones(L - 1),
                             theta=float(theta % 1.0))


def eig_count_below_grid(op: TruncatedOperator, energies) -> np.ndarray:
    """Sturm-sequence eigenvalue counts for a whole energy grid at once.

    Near-vanishing pivots are replaced by a tiny negative value (the
    LAPACK bisection convention), which only matters when an energy sits
    within machine precision of a leading-submatrix eigenvalue.
    """
    E = np.atleast_1d(np.asarray(energies, dtype=float))
    d = op.diagonal
    b2 = op.offdiagonal ** 2
    piv = d[0] - E
    piv = np.where(np.abs(piv) < _PIVMIN, -_PIVMIN, piv)
    count = (piv < 0).astype(np.int64)
    for i in range(1, op.size):
        piv = (d[i] - E) - b2[i - 1] / piv
        piv = np.where(np.abs(piv) < _PIVMIN, -_PIVMIN, piv)
        count += piv < 0
    return count


def eig_count_below(op: TruncatedOperator, E: float) -> int:
    """Number of eigenvalues strictly below E.

    An exactly breaking pivot is retried with the energy jittered by
    +-1e-10 before falling back to the sign substitution of the grid path.
    """
    d = op.diagonal
    b2 = op.offdiagonal ** 2
    for shift in (0.0, 1e-10, -1e-10):
        e = E + shift
        piv = d[0] - e
        count = 1 if piv < 0 else 0
        ok = abs(piv) >= _PIVMIN
        i = 1
        while ok and i < op.size:
            piv = (d[i] - e) - b2[i - 1] / piv
            if abs(piv) < _PIVMIN:
                ok = False
                break
            if piv < 0:
                count += 1
            i += 1
        if ok:
            return count
    return int(eig_count_below_grid(op, [E])[0])


@dataclass(frozen=True)
class IDSCurve:
    """Monotone staircase N(E): phase-averaged eigenvalue counts per site."""

    grid: np.ndarray
    values: np.ndarray
    L: int
    phase_count: int

    def __post_init__(self):
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("energy grid must be strictly increasing")
        if np.any(np.diff(self.values) < -1e-12):
            raise ValueError("IDS values must be nondecreasing")

    def at(self, E) -> np.ndarray:
        return np.interp(E, self.grid, self.values, left=0.0, right=1.0)


def ids_phases(phase_count: int) -> np.ndarray:
    # midpoint rule for the theta average
    return (np.arange(phase_count) + 0.5) / phase_count


def ids(v: PotentialSpec, freq: Frequency, grid, L: int,
        phase_count: int) -> IDSCurve:
    """N(E) = mean over phases of (eigenvalue count below E) / L."""
    grid = np.asarray(grid, dtype=float)
    total = np.zeros(len(grid), dtype=np.int64)
    for theta in ids_phases(phase_count):
        op = truncate(v, freq, theta, L)
        total += eig_count_below_grid(op, grid)
    values = total / (phase_count * L)
    return IDSCurve(grid=grid, values=values, L=L, phase_count=phase_count)


@functools.lru_cache(maxsize=32)
def _eigenvalue_pool_cached(v: PotentialSpec, freq: Frequency, L: int,
                            phase_count: int) -> np.ndarray:
    eigs = []
    for theta in ids_phases(phase_count):
        op = truncate(v, freq, theta, L)
        eigs.append(scipy.linalg.eigvalsh_tridiagonal(op.diagonal, op.offdiagonal))
    pool = np.sort(np.concatenate(eigs))
    pool.flags.writeable = False
    return pool


def eigenvalue_pool(v: PotentialSpec, freq: Frequency, L: int = 1000,
                    phase_count: int = 16) -> np.ndarray:
    """Sorted union over phases of truncation eigenvalues (cached)."""
    return _eigenvalue_pool_cached(v, freq, L, phase_count)


def boundary_mass_filter(evals: np.ndarray, evecs: np.ndarray, edge_sites: int,
                         edge_mass_tol: float = 0.25) -> np.ndarray:
    """Drop Dirichlet surface states: eigenvectors carrying more than the
    tolerated mass on the outer window sites are artifacts of the cut and
    land inside spectral gaps."""
    mass = (np.abs(evecs[:edge_sites, :]) ** 2).sum(axis=0)
    mass += (np.abs(evecs[-edge_sites:, :]) ** 2).sum(axis=0)
    return evals[mass < edge_mass_tol]


@functools.lru_cache(maxsize=32)
def _bulk_pool_cached(v: PotentialSpec, freq: Frequency, L: int,
                      phase_count: int) -> np.ndarray:
    edge = max(10, L // 50)
    eigs = []
    for theta in ids_phases(phase_count):
        op = truncate(v, freq, theta, L)
        evals, evecs = scipy.linalg.eigh_tridiagonal(op.diagonal, op.offdiagonal)
        eigs.append(boundary_mass_filter(evals, evecs, edge))
    pool = np.sort(np.concatenate(eigs))
    pool.flags.writeable = False
    return pool


def bulk_eigenvalue_pool(v: PotentialSpec, freq: Frequency, L: int = 1000,
                         phase_count: int = 16) -> np.ndarray:
    """Pooled truncation eigenvalues with surface states removed (cached)."""
    return _bulk_pool_cached(v, freq, L, phase_count)


class IndicatorResult(NamedTuple):
    in_spectrum: bool
    distance: float


def spectrum_indicator(v: PotentialSpec, freq: Frequency, E: float,
                       L: int = 1000, phase_count: int = 16,
                       delta: float | None = None) -> IndicatorResult:
    """Membership test: distance from E to the truncation eigenvalue pool.

    Dirichlet eigenvalues fill the spectrum to O(1/L) density, so the
    default threshold is 10/L.
    """
    if delta is None:
        delta = 10.0 / L
    pool = eigenvalue_pool(v, freq, L, phase_count)
    i = np.searchsorted(pool, E)
    cands = []
    if i < len(pool):
        cands.append(pool[i] - E)
    if i > 0:
        cands.append(E - pool[i - 1])
    dist = float(min(cands))
    return IndicatorResult(in_spectrum=dist <= delta, distance=dist)


def sample_spectral_energies(v: PotentialSpec, freq: Frequency, count: int,
                             L: int = 1000, phase_count: int = 16,
                             bulk: bool = True) -> np.ndarray:
    """Quantile-spaced truncation eigenvalues: certified spectral samples.

    By default surface states are excluded, so the samples sit in the bulk
    spectrum rather than in gaps where a Dirichlet edge mode happens to be.
    """
    pool = (bulk_eigenvalue_pool if bulk else eigenvalue_pool)(v, freq, L, phase_count)
    idx = ((np.arange(count) + 0.5) / count * len(pool)).astype(int)
    return pool[np.minimum(idx, len(pool) - 1)]


def gap_edge_energies(v: PotentialSpec, freq: Frequency, count: int,
                      L: int = 1000, phase_count: int = 16,
                      min_gap: float | None = None) -> np.ndarray:
    """Eigenvalues adjacent to the largest spacings of the pooled spectrum.

    Edges of spectral gaps are where resonant dual phases live, so these
    samples feed the resonance experiments.
    """
    pool = bulk_eigenvalue_pool(v, freq, L, phase_count)
    gaps = np.diff(pool)
    if min_gap is None:
        min_gap = 20.0 * float(np.median(gaps))
    order = np.argsort(gaps)[::-1]
    picked = []
    for i in order:
        if gaps[i] < min_gap or len(picked) >= count:
            break
        picked.extend([pool[i], pool[i + 1]])
    return np.asarray(picked[:count])


@dataclass(frozen=True)
class SpectralMeasureApprox:
    """Interval masses of mu = mu^{e_-1} + mu^{e_0} at one phase."""

    partition: np.ndarray
    masses: np.ndarray
    method: str
    theta: float
    total: float

    def interval_mass(self, left: float, right: float, tol: float = 1e-9) -> float:
        i = int(np.argmin(np.abs(self.partition - left)))
        j = int(np.argmin(np.abs(self.partition - right)))
        if abs(self.partition[i] - left) > tol or abs(self.partition[j] - right) > tol:
            raise ValueError("interval endpoints must lie on the partition")
        return float(self.masses[i:j].sum())


def _centered_operator(v: PotentialSpec, freq: Frequency, theta: float,
                       L: int) -> tuple[TruncatedOperator, int]:
    """Dirichlet window containing lattice sites 0 and -1 (site 0 at index half)."""
    half = L // 2
    alpha = float(freq.value)
    op = truncate(v, freq, (theta - half * alpha) % 1.0, L)
    return op, half


def spectral_measure(v: PotentialSpec, freq: Frequency, theta: float,
                     partition, L: int, method: str = "eigen",
                     eta: float | None = None) -> SpectralMeasureApprox:
    """Masses of mu = mu^{e_-1} + mu^{e_0} on a partition of the real line.

    'eigen': dense eigendecomposition weights |<e_i, psi>|^2 at volume L
    (capped at L = 4000).  'herglotz': (1/pi) Im <(H-E-i eta)^-1 f, f>
    integrated over the partition with eta coupled to the volume
    (default 20/L), resolvent by banded solves.
    """
    partition = np.asarray(partition, dtype=float)
    if np.any(np.diff(partition) <= 0):
        raise ValueError("partition must be strictly increasing")
    op, half = _centered_operator(v, freq, theta, L)
    lo, hi = op.gershgorin_interval()
    if partition[0] > lo or partition[-1] < hi:
        raise ValueError(
            f"partition [{partition[0]}, {partition[-1]}] must cover the "
            f"operator interval [{lo:.3f}, {hi:.3f}]")
    if method == "eigen":
        if L > DENSE_CAP:
            raise ValueError(
                f"L = {L} above the dense cap {DENSE_CAP}; use method='herglotz'")
        evals, evecs = scipy.linalg.eigh_tridiagonal(op.diagonal, op.offdiagonal)
        w = evecs[half, :] ** 2 + evecs[half - 1, :] ** 2
        masses, _ = np.histogram(evals, bins=partition, weights=w)
    elif method == "herglotz":
        if eta is None:
            eta = 20.0 / L
        masses = _herglotz_masses(op, half, partition, eta)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SpectralMeasureApprox(partition=partition, masses=masses,
                                 method=method, theta=float(theta),
                                 total=float(masses.sum()))


def _herglotz_masses(op: TruncatedOperator, half: int, partition: np.ndarray,
                     eta: float) -> np.ndarray:
    L = op.size
    ab = np.zeros((3, L), dtype=complex)
    ab[0, 1:] = op.offdiagonal
    ab[2, :-1] = op.offdiagonal
    quad_step = eta / 4.0
    masses = np.zeros(len(partition) - 1)
    rhs = np.zeros((L, 2))
    rhs[half, 0] = 1.0
    rhs[half - 1, 1] = 1.0
    for j in range(len(partition) - 1):
        a, b = partition[j], partition[j + 1]
        n_pts = max(int(math.ceil((b - a) / quad_step)) + 1, 2)
        grid = np.linspace(a, b, n_pts)
        dens = np.empty(n_pts)
        for i, x in enumerate(grid):
            ab[1, :] = op.diagonal - (x + 1j * eta)
            sol = scipy.linalg.solve_banded((1, 1), ab, rhs)
            dens[i] = (sol[half, 0].imag + sol[half - 1, 1].imag) / math.pi
        masses[j] = np.trapz(dens, grid)
    return masses


def measure_bound_check(measure: SpectralMeasureApprox, growth: GrowthProfile,
                        E: float, eps: float) -> float:
    """Ratio mu(E-eps, E+eps) / (eps * sup_{s <= 1/eps} ||A_s||^2).

    Finite ratios over a test set bound the unspecified constant in the
    local measure estimate; the horizon uses a unit constant.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    mass = measure.interval_mass(E - eps, E + eps)
    sup_log = growth.sup_up_to(1.0 / eps)
    return mass / (eps * math.exp(2.0 * sup_log))


class HolderPoint(NamedTuple):
    eps: float
    ratio: float
    at_energy: float


class HolderScan(NamedTuple):
    upper: tuple[HolderPoint, ...]
    lower: tuple[HolderPoint, ...]


def spectral_grid_mask(curve: IDSCurve, plateau_cells: int = 3) -> np.ndarray:
    """Grid points not inside an IDS plateau (gaps are where N is flat)."""
    n = len(curve.grid)
    flat = np.abs(np.diff(curve.values)) < 1e-12
    in_plateau = np.zeros(n, dtype=bool)
    run_start = 0
    for i in range(len(flat) + 1):
        if i < len(flat) and flat[i]:
            continue
        run_len = i - run_start
        if run_len >= plateau_cells:
            in_plateau[run_start + 1:i] = True
        run_start = i + 1
    inside = (curve.values > 1e-9) & (curve.values < 1.0 - 1e-9)
    return inside & ~in_plateau


def holder_scan(curve: IDSCurve, eps_list: Sequence[float]) -> HolderScan:
    """Extremal increment ratios of the IDS staircase.

    upper: max over the grid of [N(E+eps) - N(E-eps)] / sqrt(eps), probing
    the Holder-1/2 modulus; lower: min over spectral grid points of the
    same increment divided by eps^2, probing the quadratic lower bound.
    The grid must resolve min(eps)/4 or the scan refuses to run.
    """
    eps_arr = sorted(float(e) for e in eps_list)
    resolution = float(np.max(np.diff(curve.grid)))
    if resolution > eps_arr[0] / 4.0 * (1.0 + 1e-9):
        raise ValueError(
            f"grid resolution {resolution:.4g} coarser than min(eps)/4 = "
            f"{eps_arr[0] / 4.0:.4g}")
    spectral = spectral_grid_mask(curve)
    if not np.any(spectral):
        raise ValueError("no spectral grid points detected")
    upper = []
    lower = []
    for eps in eps_arr:
        dn = curve.at(curve.grid + eps) - curve.at(curve.grid - eps)
        up_i = int(np.argmax(dn))
        upper.append(HolderPoint(eps, float(dn[up_i] / math.sqrt(eps)),
                                 float(curve.grid[up_i])))
        dn_spec = dn[spectral]
        grid_spec = curve.grid[spectral]
        lo_i = int(np.argmin(dn_spec))
        lower.append(HolderPoint(eps, float(dn_spec[lo_i] / eps ** 2),
                                 float(grid_spec[lo_i])))
    return HolderScan(upper=tuple(upper), lower=tuple(lower))
