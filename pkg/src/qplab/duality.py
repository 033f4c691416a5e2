"""The long-range dual operator on the frequency lattice, dual spectra
comparison, and bounded dual eigenvectors.

The dual of (v, lambda) has hopping lambda*vhat_k at range k and diagonal
2 cos(2 pi (theta + n alpha)); its truncation is banded with the band width
equal to the degree of v.  The cosine argument is read as 2 pi (theta +
n alpha), the only reading consistent with the cosine potential convention
and with self-duality of that model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from qplab.arithmetic import Frequency
from qplab.potential import PotentialSpec
from qplab.spectrum import (
    boundary_mass_filter,
    bulk_eigenvalue_pool,
    ids_phases,
    spectrum_indicator,
    truncate,
)


@dataclass(frozen=True)
class DualOperator:
    """Banded Hermitian Dirichlet section of the dual operator, centered so
    lattice site 0 sits in the middle of the window."""

    diagonal: np.ndarray
    hoppings: tuple[tuple[int, complex], ...]  # (offset k >= 1, lambda*vhat_k)
    theta: float
    first_site: int

    @property
    def size(self) -> int:
        return len(self.diagonal)

    @property
    def band_width(self) -> int:
        return max((k for k, _ in self.hoppings), default=0)

    @property
    def is_real(self) -> bool:
        return all(abs(c.imag) < 1e-15 for _, c in self.hoppings)

    def site_index(self, n: int) -> int:
        return n - self.first_site

    def to_banded(self) -> np.ndarray:
        """Upper-banded storage for the LAPACK banded eigensolvers."""
        d = self.band_width
        dtype = float if self.is_real else complex
        ab = np.zeros((d + 1, self.size), dtype=dtype)
        ab[d, :] = self.diagonal
        for k, c in self.hoppings:
            val = c.conjugate() if dtype is complex else c.real
            ab[d - k, k:] = val
        return ab

    def to_dense(self) -> np.ndarray:
        d = self.band_width
        dtype = float if self.is_real else complex
        m = np.zeros((self.size, self.size), dtype=dtype)
        np.fill_diagonal(m, self.diagonal)
        for k, c in self.hoppings:
            up = c.conjugate() if dtype is complex else c.real
            lo = c if dtype is complex else c.real
            idx = np.arange(self.size - k)
            m[idx, idx + k] = up
            m[idx + k, idx] = lo
        return m

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = self.diagonal * u
        for k, c in self.hoppings:
            cr = c if not self.is_real else c.real
            out[k:] = out[k:] + cr * u[:-k]
            out[:-k] = out[:-k] + np.conjugate(cr) * u[k:]
        if self.is_real:
            return out.real if np.isrealobj(u) else out
        return out


def dual_operator(v: PotentialSpec, freq: Frequency, theta: float, L: int) -> DualOperator:
    """L x L Dirichlet section on sites centered at 0 (symmetric for odd L)."""
    d = v.degree
    if L < 2 * d + 1:
        raise ValueError(f"L must be >= 2*degree+1 = {2 * d + 1}")
    first = -((L - 1) // 2)
    alpha = float(freq.value)
    sites = first + np.arange(L)
    diag = 2.0 * np.cos(2.0 * np.pi * ((theta + sites * alpha) % 1.0))
    hoppings = tuple((k, v.lam * c) for k, c in v.coeffs if k >= 1)
    return DualOperator(diagonal=diag, hoppings=hoppings, theta=float(theta % 1.0),
                        first_site=int(first))


def dual_eigenvalues(op: DualOperator) -> np.ndarray:
    if op.band_width == 0:
        return np.sort(op.diagonal)
    return scipy.linalg.eigvals_banded(op.to_banded(), lower=False)


def bulk_dual_spectrum_sample(v: PotentialSpec, freq: Frequency, L: int,
                              phase_count: int) -> np.ndarray:
    """Pooled dual-operator eigenvalues with surface states removed."""
    edge = max(10, L // 50)
    out = []
    for theta in ids_phases(phase_count):
        op = dual_operator(v, freq, theta, L)
        if op.band_width == 0:
            out.append(np.sort(op.diagonal))
            continue
        evals, evecs = scipy.linalg.eig_banded(op.to_banded(), lower=False)
        out.append(boundary_mass_filter(evals, evecs, edge))
    return np.sort(np.concatenate(out))


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))

    def one_sided(x, y):
        idx = np.searchsorted(y, x)
        best = np.full(len(x), np.inf)
        inside = idx < len(y)
        best[inside] = np.abs(y[idx[inside]] - x[inside])
        left = idx > 0
        best[left] = np.minimum(best[left], np.abs(x[left] - y[idx[left] - 1]))
        return float(np.max(best))

    return max(one_sided(a, b), one_sided(b, a))


def dual_spectrum_compare(v: PotentialSpec, freq: Frequency, L: int = 1000,
                          phase_count: int = 16) -> float:
    """Hausdorff distance between the phase-pooled truncation spectra of the
    operator and of its dual (both approximate the same spectrum).

    Surface states of the Dirichlet windows are excluded on both sides:
    they sit inside gaps, are artifacts of the cut, and otherwise dominate
    the distance without saying anything about the operators.
    """
    direct = bulk_eigenvalue_pool(v, freq, L, phase_count)
    dual = bulk_dual_spectrum_sample(v, freq, L, phase_count)
    return _hausdorff(direct, dual)


@dataclass(frozen=True)
class DualSolution:
    """Truncated dual eigenvector normalized to unit mass at site 0."""

    energy: float
    theta_star: float
    coefficients: np.ndarray
    first_site: int
    max_abs: float
    residual: float
    eigenvalue: float
    runners_up: tuple[tuple[float, float], ...] = ()

    def coefficient(self, n: int) -> float:
        return self.coefficients[n - self.first_site]


class _Candidate(NamedTuple):
    score: float
    theta: float
    eig: float
    vec: np.ndarray | None
    max_abs: float


def _site_zero_density(op: DualOperator, E: float, eta: float) -> float:
    """Im <e_0, (H - E - i eta)^-1 e_0>: spectral weight site 0 sees near E.

    One banded solve; large exactly where a site-0-supported eigenvalue
    lies within ~eta of E, which is what the phase search is after.
    """
    d = op.band_width
    dtype = complex
    ab = np.zeros((2 * d + 1, op.size), dtype=dtype)
    ab[d, :] = op.diagonal - (E + 1j * eta)
    for k, c in op.hoppings:
        ab[d - k, k:] = c.conjugate()
        ab[d + k, :-k] = c
    rhs = np.zeros(op.size, dtype=dtype)
    center = op.site_index(0)
    rhs[center] = 1.0
    sol = scipy.linalg.solve_banded((d, d), ab, rhs)
    return float(sol[center].imag)


def _eigpairs_near(op: DualOperator, E: float, window: float = 0.03):
    """All eigenpairs with eigenvalues within a (widening) window of E."""
    if op.band_width == 0:
        i = int(np.argmin(np.abs(op.diagonal - E)))
        vec = np.zeros((op.size, 1))
        vec[i, 0] = 1.0
        return np.array([op.diagonal[i]]), vec
    w = window
    for _ in range(6):
        try:
            if op.band_width == 1:
                off = np.array([c.real for k, c in op.hoppings if k == 1])
                e = np.full(op.size - 1, off[0] if len(off) else 0.0)
                vals, vecs = scipy.linalg.eigh_tridiagonal(
                    op.diagonal, e, select="v", select_range=(E - w, E + w))
            else:
                vals, vecs = scipy.linalg.eig_banded(
                    op.to_banded(), lower=False, select="v",
                    select_range=(E - w, E + w))
        except Exception:
            vals = np.empty(0)
            vecs = np.empty((op.size, 0))
        if len(vals) > 0:
            return vals, vecs
        w *= 4.0
    return np.empty(0), np.empty((op.size, 0))


def _score_candidate(op: DualOperator, E: float, penalty: float) -> _Candidate:
    """Best score over all eigenpairs near E at this phase.

    Scoring every pair in the window matters at avoided crossings, where
    the eigenvalue nearest E may be the boundary-flavored partner of a
    hybridized doublet while its neighbor is the bounded one.
    """
    vals, vecs = _eigpairs_near(op, E, window=0.03)
    if len(vals) == 0:
        return _Candidate(math.inf, op.theta, math.nan, None, math.inf)
    center = op.site_index(0)
    best = _Candidate(math.inf, op.theta, math.nan, None, math.inf)
    for i in range(len(vals)):
        u0 = vecs[center, i]
        if abs(u0) < 1e-8:
            continue
        u = vecs[:, i] / u0
        max_abs = float(np.max(np.abs(u)))
        score = abs(vals[i] - E) + penalty * max(0.0, max_abs - 1.0)
        if score < best.score:
            best = _Candidate(score, op.theta, float(vals[i]), u, max_abs)
    return best


def dual_bounded_solution(v: PotentialSpec, freq: Frequency, E: float,
                          L: int = 801, theta_grid_size: int = 512,
                          penalty: float = 0.1, zoom_rounds: int = 10,
                          indicator_L: int = 1000,
                          indicator_phases: int = 16) -> DualSolution:
    """Search the dual phase for a bounded eigenvector at energy E.

    Coarse grid over theta, then zoom refinement of the score
    |eig - E| + penalty * max(0, max|u_k| - 1) around the best candidates.
    The score has one dip per lattice-site crossing, so each zoom round
    rescans a shrinking bracket instead of assuming unimodality.
    E must pass the spectrum membership test first.
    """
    ind = spectrum_indicator(v, freq, E, indicator_L, indicator_phases)
    if not ind.in_spectrum:
        raise ValueError(
            f"E = {E} is outside the numerical spectrum "
            f"(distance {ind.distance:.4g}); no bounded dual solution is sought")

    def score_at(theta: float) -> _Candidate:
        return _score_candidate(dual_operator(v, freq, theta, L), E, penalty)

    # coarse pass: rank phases by the site-0 spectral density near E (one
    # banded solve each); candidates are its local maxima on the circle
    thetas = np.arange(theta_grid_size) / theta_grid_size
    eta = 10.0 / L
    dens = np.array([
        _site_zero_density(dual_operator(v, freq, t, L), E, eta) for t in thetas
    ])
    is_peak = (dens > np.roll(dens, 1)) & (dens >= np.roll(dens, -1))
    peak_idx = np.nonzero(is_peak)[0]
    if len(peak_idx) == 0:
        peak_idx = np.array([int(np.argmax(dens))])
    peak_idx = peak_idx[np.argsort(dens[peak_idx])[::-1]]

    spacing = 1.0 / theta_grid_size
    refined: list[_Candidate] = []
    for idx in peak_idx[:6]:
        best = score_at(thetas[idx])
        center, width = thetas[idx], spacing
        for _ in range(zoom_rounds):
            for t in np.linspace(center - width, center + width, 9):
                c = score_at(t)
                if c.score < best.score:
                    best = c
            center = best.theta
            width /= 4.0
        refined.append(best)
    refined = [c for c in refined if c.vec is not None]
    if not refined:
        raise ValueError("normalization degenerate; refine grid")
    refined.sort(key=lambda c: c.score)
    winner = refined[0]
    op = dual_operator(v, freq, winner.theta, L)
    u = winner.vec
    resid_vec = op.apply(u) - E * u
    d = max(op.band_width, 1)
    interior = np.abs(resid_vec[d:-d])
    residual = float(np.max(interior)) if len(interior) else 0.0
    runners = tuple((c.theta, c.score) for c in refined[1:])
    return DualSolution(energy=float(E), theta_star=float(winner.theta % 1.0),
                        coefficients=np.real_if_close(u),
                        first_site=op.first_site,
                        max_abs=winner.max_abs, residual=residual,
                        eigenvalue=winner.eig, runners_up=runners)


def dual_solution_to_json(sol: DualSolution) -> dict:
    return {
        "E": sol.energy,
        "theta": sol.theta_star,
        "residual": sol.residual,
        "max_abs": sol.max_abs,
        "coeffs": [float(c) for c in np.asarray(sol.coefficients, dtype=float)],
    }
