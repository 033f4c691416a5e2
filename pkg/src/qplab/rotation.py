"""Fibered rotation number via projective angle tracking.

Directions are tracked as unit vectors; each step contributes the signed
angle between the vector and its image in turns.  For transfer matrices of
the form [[a, -1], [1, 0]] the image's second component equals the
preimage's first, which confines the true per-step lift increment to
(-1/4, 3/4) turns; accumulating that branch is an unambiguous continuous
lift even near the bottom of the spectrum, where increments approach a
half turn and the naive nearest-representative choice folds them to the
wrong sign.  Results are folded into [0, 1/2], the range of the
Schrodinger rotation number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qplab.arithmetic import Frequency
from qplab.cocycle import SchrodingerCocycle, _as_cocycle, kronecker_phases
from qplab.potential import PotentialSpec, eval_potential

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RotationEstimate:
    rho: float
    n_steps: int
    phase_count: int
    spread: float


def projective_step(A: np.ndarray, phi: float) -> float:
    """Advance a direction angle (in turns) by one matrix action.

    Returns phi plus the lift increment in (-1/2, 1/2], computed from the
    image of (cos 2*pi*phi, sin 2*pi*phi) with the two-argument arctangent.
    """
    A = np.asarray(A, dtype=float)
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if abs(det - 1.0) > 1e-6:
        raise ValueError(f"matrix is not unimodular: det = {det}")
    u = math.cos(TWO_PI * phi)
    w = math.sin(TWO_PI * phi)
    iu = A[0, 0] * u + A[0, 1] * w
    iw = A[1, 0] * u + A[1, 1] * w
    norm = math.hypot(iu, iw)
    assert norm > 0.0, "unimodular matrix cannot annihilate a direction"
    cross = u * iw - w * iu
    dot = u * iu + w * iw
    return phi + math.atan2(cross, dot) / TWO_PI


def _fold_half(x: float) -> float:
    # representative of x mod 1/2 closest to [0, 1/2]; Schrodinger means
    # stay in [-eps, 1/2+eps] so a clamp is all that is left to do
    return min(max(x, 0.0), 0.5)


def _rotation_run_schrodinger(v: PotentialSpec, alpha: float, energies,
                              x0s, n: int) -> np.ndarray:
    """Total lift displacement per (phase, energy), shape (nP, nE)."""
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    x0s = np.atleast_1d(np.asarray(x0s, dtype=float))
    nE, nP = len(energies), len(x0s)
    E = energies[None, :]
    x0 = x0s[:, None]
    u = np.ones((nP, nE))
    w = np.zeros((nP, nE))
    total = np.zeros((nP, nE))
    lam = v.lam
    constant = lam == 0.0 or v.degree == 0
    chunk = 2048
    j0 = 0
    while j0 < n:
        c = min(chunk, n - j0)
        if constant:
            base = v.coeffs[0][1].real if v.coeffs and v.coeffs[0][0] == 0 else 0.0
            vx = None
            a_const = E - lam * base
        else:
            js = np.arange(j0, j0 + c, dtype=float)
            xs = (x0 + alpha * js[None, :]) % 1.0
            vx = np.asarray(eval_potential(v, xs), dtype=float)
        for i in range(c):
            a = a_const if vx is None else E - lam * vx[:, i:i + 1]
            # image of (u, w) under [[a, -1], [1, 0]] is (a*u - w, u)
            iu = a * u - w
            cross = u * u - w * iu
            dot = u * iu + w * u
            d = np.arctan2(cross, dot)
            # the image's second component has the sign of u, which pins the
            # true increment to (-1/4, 3/4) turns; rewrap the arctan branch
            d += (d < -0.5 * math.pi) * TWO_PI
            total += d
            r = np.hypot(iu, u)
            w = u / r
            u = iu / r
        j0 += c
    return total / TWO_PI


def _rotation_run_generic(cocycle, alpha: float, x0s, n: int) -> np.ndarray:
    x0s = np.atleast_1d(np.asarray(x0s, dtype=float))
    nP = len(x0s)
    u = np.ones((nP, 1))
    w = np.zeros((nP, 1))
    total = np.zeros((nP, 1))
    chunk = 1024
    j0 = 0
    while j0 < n:
        c = min(chunk, n - j0)
        js = np.arange(j0, j0 + c, dtype=float)
        xs = (x0s[:, None] + alpha * js[None, :]) % 1.0
        g = cocycle.matrices(xs)
        for i in range(c):
            g00 = g[:, i, 0, 0:1]
            g01 = g[:, i, 0, 1:2]
            g10 = g[:, i, 1, 0:1]
            g11 = g[:, i, 1, 1:2]
            iu = g00 * u + g01 * w
            iw = g10 * u + g11 * w
            cross = u * iw - w * iu
            dot = u * iu + w * iw
            total += np.arctan2(cross, dot)
            r = np.hypot(iu, iw)
            u = iu / r
            w = iw / r
        j0 += c
    return total / TWO_PI


def rotation_number(v, freq: Frequency, E: float, n_steps: int = 200_000,
                    phase_count: int = 8, x0: float = 0.0) -> RotationEstimate:
    """Average angular speed of the projective action, folded into [0, 1/2].

    The spread over phase trajectories is the empirical stand-in for the
    (phase-independent) limit's convergence error.
    """
    if n_steps < 1 or phase_count < 1:
        raise ValueError("n_steps and phase_count must be >= 1")
    alpha = float(freq.value)
    phases = kronecker_phases(alpha, phase_count, x0)
    cocycle = _as_cocycle(v, E)
    if cocycle.is_schrodinger:
        disp = _rotation_run_schrodinger(cocycle.v, alpha, [cocycle.E], phases, n_steps)
    else:
        disp = _rotation_run_generic(cocycle, alpha, phases, n_steps)
    per_phase = disp[:, 0] / n_steps
    rho = _fold_half(float(per_phase.mean()))
    spread = float(per_phase.std())
    return RotationEstimate(rho=rho, n_steps=n_steps, phase_count=phase_count,
                            spread=spread)


def rotation_grid(v: PotentialSpec, freq: Frequency, energies,
                  n_steps: int = 200_000, phase_count: int = 8,
                  x0: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized rotation numbers over an energy grid (rhos, spreads)."""
    alpha = float(freq.value)
    phases = kronecker_phases(alpha, phase_count, x0)
    disp = _rotation_run_schrodinger(v, alpha, energies, phases, n_steps)
    per_phase = disp / n_steps
    rho = np.clip(per_phase.mean(axis=0), 0.0, 0.5)
    return rho, per_phase.std(axis=0)


def ids_from_rotation(rho) -> float:
    """Density of states from the rotation number: N = 1 - 2 rho."""
    r = rho.rho if isinstance(rho, RotationEstimate) else float(rho)
    return min(max(1.0 - 2.0 * r, 0.0), 1.0)
