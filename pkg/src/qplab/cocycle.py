"""SL(2,R) Schrodinger cocycles: transfer products, Lyapunov exponents,
sup-norm growth profiles, and the conjugacy algebra.

Products are renormalized every fixed stride (default 32 steps) with the
extracted scale tracked in log form; off-spectrum norms reach e^hundreds
and would overflow doubles otherwise.  Phase grids are Kronecker sequences
{x0 + j alpha}, matching the Birkhoff averages being approximated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from qplab.arithmetic import Frequency
from qplab.potential import PotentialSpec, eval_potential

RENORM_STRIDE = 32
_TINY = 1e-300


def mat2(a: float, b: float, c: float, d: float) -> np.ndarray:
    return np.array([[a, b], [c, d]], dtype=float)


def det2(m: np.ndarray) -> float:
    return float(m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0])


def sl2_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse of a unimodular 2x2 matrix (adjugate)."""
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    out[..., 1, 1] = m[..., 0, 0]
    return out


def spectral_norm(m: np.ndarray) -> float | np.ndarray:
    """Operator 2-norm of 2x2 matrices in closed form (largest singular value)."""
    m = np.asarray(m, dtype=float)
    a, b = m[..., 0, 0], m[..., 0, 1]
    c, d = m[..., 1, 0], m[..., 1, 1]
    out = np.exp(_log_spectral_parts(a, b, c, d))
    return float(out) if out.ndim == 0 else out


def _log_spectral_parts(m00, m01, m10, m11):
    # rescale by the max entry first so the squares below cannot overflow
    s = np.maximum(np.maximum(np.abs(m00), np.abs(m01)),
                   np.maximum(np.abs(m10), np.abs(m11)))
    s = np.maximum(s, _TINY)
    a, b, c, d = m00 / s, m01 / s, m10 / s, m11 / s
    s2 = a * a + b * b + c * c + d * d
    dt = a * d - b * c
    disc = np.sqrt(np.maximum(s2 * s2 - 4.0 * dt * dt, 0.0))
    return np.log(s) + 0.5 * np.log(np.maximum((s2 + disc) / 2.0, _TINY))


def schrodinger_step(v: PotentialSpec, E: float, x: float) -> np.ndarray:
    """One transfer step [[E - lam*v(x), -1], [1, 0]]."""
    return mat2(E - v.lam * eval_potential(v, x), -1.0, 1.0, 0.0)


class SchrodingerCocycle:
    """Evaluator for the transfer-matrix family of (v, E)."""

    is_schrodinger = True

    def __init__(self, v: PotentialSpec, E: float):
        self.v = v
        self.E = float(E)

    def coefficient_values(self, xs: np.ndarray) -> np.ndarray:
        return self.E - self.v.lam * np.asarray(eval_potential(self.v, xs), dtype=float)

    def matrices(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        a = self.coefficient_values(xs)
        out = np.zeros(xs.shape + (2, 2))
        out[..., 0, 0] = a
        out[..., 0, 1] = -1.0
        out[..., 1, 0] = 1.0
        return out


class ConjugatedCocycle:
    """The family x -> B(x + alpha)^-1 A(x) B(x) for a unimodular map B."""

    is_schrodinger = False

    def __init__(self, base, B: Callable[[np.ndarray], np.ndarray], alpha: float):
        self.base = base
        self.B = B
        self.alpha = float(alpha)

    def matrices(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        flat = xs.reshape(-1)
        a_mats = self.base.matrices(flat)
        b_here = np.asarray(self.B(flat), dtype=float)
        b_fwd = np.asarray(self.B((flat + self.alpha) % 1.0), dtype=float)
        out = sl2_inverse(b_fwd) @ a_mats @ b_here
        return out.reshape(xs.shape + (2, 2))


def conjugate_cocycle(B: Callable[[np.ndarray], np.ndarray], cocycle,
                      freq: Frequency, det_tol: float = 1e-8,
                      grid: int = 512) -> ConjugatedCocycle:
    """Conjugated-cocycle evaluator, after checking det B = 1 on a grid."""
    xs = np.arange(grid) / grid
    bm = np.asarray(B(xs), dtype=float)
    if bm.shape != (grid, 2, 2):
        raise ValueError("B must map an (n,) phase array to (n,2,2) matrices")
    dets = bm[:, 0, 0] * bm[:, 1, 1] - bm[:, 0, 1] * bm[:, 1, 0]
    worst = float(np.max(np.abs(dets - 1.0)))
    if worst > det_tol:
        raise ValueError(f"conjugacy is not unimodular: max |det B - 1| = {worst:.3e}")
    return ConjugatedCocycle(cocycle, B, float(freq.value))


def rotation_conjugacy(amplitude: float, harmonic: int = 1) -> Callable[[np.ndarray], np.ndarray]:
    """Phase-dependent rotation by angle 2*pi*amplitude*sin(2*pi*harmonic*x);
    unimodular and homotopic to the identity for any amplitude."""

    def B(xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        ang = 2.0 * np.pi * amplitude * np.sin(2.0 * np.pi * harmonic * xs)
        out = np.zeros(xs.shape + (2, 2))
        out[..., 0, 0] = np.cos(ang)
        out[..., 0, 1] = -np.sin(ang)
        out[..., 1, 0] = np.sin(ang)
        out[..., 1, 1] = np.cos(ang)
        return out

    return B


def constant_conjugacy(matrix: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    m = np.asarray(matrix, dtype=float)

    def B(xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return np.broadcast_to(m, xs.shape + (2, 2)).copy()

    return B


def kronecker_phases(alpha: float, count: int, x0: float = 0.0) -> np.ndarray:
    return (x0 + alpha * np.arange(count)) % 1.0


class _RunResult(NamedTuple):
    m00: np.ndarray
    m01: np.ndarray
    m10: np.ndarray
    m11: np.ndarray
    logs: np.ndarray
    checkpoints: list  # [(step, (nE,) sup-over-phase log norms)]


def _renorm(m00, m01, m10, m11, logs):
    s = np.abs(m00)
    np.maximum(s, np.abs(m01), out=s)
    np.maximum(s, np.abs(m10), out=s)
    np.maximum(s, np.abs(m11), out=s)
    np.maximum(s, _TINY, out=s)
    logs += np.log(s)
    m00 /= s
    m01 /= s
    m10 /= s
    m11 /= s


def _run_schrodinger(v: PotentialSpec, alpha: float, energies, x0s, n: int,
                     stride: int = RENORM_STRIDE,
                     checkpoint_steps: Sequence[int] = ()) -> _RunResult:
    """Batched ordered products over a (phase, energy) grid.

    The potential is evaluated once per phase per step and broadcast over
    energies; matrices are carried as four (nP, nE) component arrays.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    x0s = np.atleast_1d(np.asarray(x0s, dtype=float))
    nE, nP = len(energies), len(x0s)
    E = energies[None, :]
    x0 = x0s[:, None]
    shape = (nP, nE)
    m00, m01 = np.ones(shape), np.zeros(shape)
    m10, m11 = np.zeros(shape), np.ones(shape)
    t0, t1 = np.empty(shape), np.empty(shape)
    logs = np.zeros(shape)
    lam = v.lam
    cps = sorted(set(int(s) for s in checkpoint_steps if 0 < int(s) <= n))
    cp_out: list = []
    cp_idx = 0
    constant = lam == 0.0 or v.degree == 0
    chunk = 2048
    j0 = 0
    while j0 < n:
        c = min(chunk, n - j0)
        if constant:
            a_const = E - lam * (v.coeffs[0][1].real if v.coeffs and v.coeffs[0][0] == 0 else 0.0)
            vx = None
        else:
            js = np.arange(j0, j0 + c, dtype=float)
            xs = (x0 + alpha * js[None, :]) % 1.0
            vx = np.asarray(eval_potential(v, xs), dtype=float)
        for i in range(c):
            a = a_const if vx is None else E - lam * vx[:, i:i + 1]
            np.multiply(a, m00, out=t0)
            t0 -= m10
            np.multiply(a, m01, out=t1)
            t1 -= m11
            m00, m01, m10, m11, t0, t1 = t0, t1, m00, m01, m10, m11
            step = j0 + i + 1
            if step % stride == 0:
                _renorm(m00, m01, m10, m11, logs)
            if cp_idx < len(cps) and step == cps[cp_idx]:
                ln = logs + _log_spectral_parts(m00, m01, m10, m11)
                cp_out.append((step, ln.max(axis=0)))
                cp_idx += 1
        j0 += c
    return _RunResult(m00, m01, m10, m11, logs, cp_out)


def _run_generic(cocycle, alpha: float, x0s, n: int,
                 stride: int = RENORM_STRIDE,
                 checkpoint_steps: Sequence[int] = ()) -> _RunResult:
    """Ordered products for an arbitrary cocycle evaluator (one energy)."""
    x0s = np.atleast_1d(np.asarray(x0s, dtype=float))
    nP = len(x0s)
    shape = (nP, 1)
    m00, m01 = np.ones(shape), np.zeros(shape)
    m10, m11 = np.zeros(shape), np.ones(shape)
    logs = np.zeros(shape)
    cps = sorted(set(int(s) for s in checkpoint_steps if 0 < int(s) <= n))
    cp_out: list = []
    cp_idx = 0
    chunk = 1024
    j0 = 0
    while j0 < n:
        c = min(chunk, n - j0)
        js = np.arange(j0, j0 + c, dtype=float)
        xs = (x0s[:, None] + alpha * js[None, :]) % 1.0        # (nP, c)
        g = cocycle.matrices(xs)                               # (nP, c, 2, 2)
        for i in range(c):
            g00 = g[:, i, 0, 0:1]
            g01 = g[:, i, 0, 1:2]
            g10 = g[:, i, 1, 0:1]
            g11 = g[:, i, 1, 1:2]
            n00 = g00 * m00 + g01 * m10
            n01 = g00 * m01 + g01 * m11
            n10 = g10 * m00 + g11 * m10
            n11 = g10 * m01 + g11 * m11
            m00, m01, m10, m11 = n00, n01, n10, n11
            step = j0 + i + 1
            if step % stride == 0:
                _renorm(m00, m01, m10, m11, logs)
            if cp_idx < len(cps) and step == cps[cp_idx]:
                ln = logs + _log_spectral_parts(m00, m01, m10, m11)
                cp_out.append((step, ln.max(axis=0)))
                cp_idx += 1
        j0 += c
    return _RunResult(m00, m01, m10, m11, logs, cp_out)


def _as_cocycle(v, E: float):
    if isinstance(v, PotentialSpec):
        return SchrodingerCocycle(v, E)
    return v


@dataclass(frozen=True)
class CocycleProduct:
    """Renormalized transfer product: exp(log_scale) * matrix reproduces the
    ordered product of n steps started at base_phase."""

    matrix: np.ndarray
    log_scale: float
    steps: int
    base_phase: float

    def full_matrix(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.matrix

    def log_norm(self) -> float:
        return self.log_scale + float(np.log(spectral_norm(self.matrix)))


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    n_steps: int
    n_phases: int
    stderr: float


@dataclass(frozen=True)
class GrowthProfile:
    """Sup over a phase grid of ln ||A_s|| at geometrically spaced s."""

    checkpoints: tuple[tuple[int, float], ...]
    phase_count: int

    def max_log(self) -> float:
        return max(v for _, v in self.checkpoints)

    def sup_up_to(self, s_cap: float) -> float:
        vals = [v for s, v in self.checkpoints if s <= s_cap]
        if not vals:
            raise ValueError(f"profile has no checkpoint below s = {s_cap}")
        return max(vals)


class BoundednessResult(NamedTuple):
    bounded_up_to_S: bool
    max_log: float


def cocycle_product(v, freq: Frequency, E: float, x: float, n: int,
                    stride: int = RENORM_STRIDE) -> CocycleProduct:
    """Ordered product of n transfer steps along the orbit of x."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return CocycleProduct(np.eye(2), 0.0, 0, float(x))
    alpha = float(freq.value)
    cocycle = _as_cocycle(v, E)
    if cocycle.is_schrodinger:
        res = _run_schrodinger(cocycle.v, alpha, [cocycle.E], [x], n, stride)
    else:
        res = _run_generic(cocycle, alpha, [x], n, stride)
    m = np.array([[res.m00[0, 0], res.m01[0, 0]],
                  [res.m10[0, 0], res.m11[0, 0]]])
    return CocycleProduct(matrix=m, log_scale=float(res.logs[0, 0]),
                          steps=n, base_phase=float(x))


def lyapunov_exponent(v, freq: Frequency, E: float, n_steps: int,
                      n_phases: int, x0: float = 0.0) -> LyapunovEstimate:
    """Per-step mean of ln ||A_n(x)|| over a Kronecker phase grid.

    The value is clipped to be nonnegative after checking the raw mean is
    above -1e-4; the spread over phases is reported as a standard error.
    """
    if n_steps < 1 or n_phases < 1:
        raise ValueError("n_steps and n_phases must be >= 1")
    alpha = float(freq.value)
    phases = kronecker_phases(alpha, n_phases, x0)
    cocycle = _as_cocycle(v, E)
    if cocycle.is_schrodinger:
        res = _run_schrodinger(cocycle.v, alpha, [cocycle.E], phases, n_steps)
    else:
        res = _run_generic(cocycle, alpha, phases, n_steps)
    per_phase = (res.logs + _log_spectral_parts(res.m00, res.m01, res.m10, res.m11))[:, 0] / n_steps
    raw = float(per_phase.mean())
    if raw < -1e-4:
        raise AssertionError(f"Lyapunov estimate {raw} below the negativity floor")
    stderr = float(per_phase.std() / math.sqrt(n_phases))
    return LyapunovEstimate(value=max(raw, 0.0), n_steps=n_steps,
                            n_phases=n_phases, stderr=stderr)


def lyapunov_grid(v: PotentialSpec, freq: Frequency, energies, n_steps: int,
                  n_phases: int, x0: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Lyapunov estimates over an energy grid (values, stderrs)."""
    alpha = float(freq.value)
    phases = kronecker_phases(alpha, n_phases, x0)
    res = _run_schrodinger(v, alpha, energies, phases, n_steps)
    per_phase = (res.logs + _log_spectral_parts(res.m00, res.m01, res.m10, res.m11)) / n_steps
    raw = per_phase.mean(axis=0)
    stderr = per_phase.std(axis=0) / math.sqrt(len(phases))
    return np.maximum(raw, 0.0), stderr


def growth_profile(v, freq: Frequency, E: float, s_max: int,
                   phase_count: int = 32, checkpoints: int = 24,
                   x0: float = 0.0) -> GrowthProfile:
    """Single-pass sup-norm profile at geometrically spaced step counts."""
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    steps = np.unique(np.geomspace(1, s_max, checkpoints).round().astype(int))
    alpha = float(freq.value)
    phases = kronecker_phases(alpha, phase_count, x0)
    cocycle = _as_cocycle(v, E)
    if cocycle.is_schrodinger:
        res = _run_schrodinger(cocycle.v, alpha, [cocycle.E], phases, int(s_max),
                               checkpoint_steps=steps)
    else:
        res = _run_generic(cocycle, alpha, phases, int(s_max),
                           checkpoint_steps=steps)
    pts = []
    for s, vals in res.checkpoints:
        val = float(vals[0])
        assert val >= -1e-9, f"SL(2) sup log norm {val} negative at s={s}"
        pts.append((int(s), max(val, 0.0)))
    return GrowthProfile(checkpoints=tuple(pts), phase_count=phase_count)


def boundedness_probe(profile: GrowthProfile, threshold_log: float) -> BoundednessResult:
    """True iff every checkpoint of the profile stays below the threshold."""
    max_log = profile.max_log()
    return BoundednessResult(bounded_up_to_S=max_log <= threshold_log,
                             max_log=max_log)
