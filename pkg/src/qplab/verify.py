"""Desk-scale verification experiments for the quantitative spectral claims.

Each experiment returns an ExperimentReport with measurements, a verdict
(pass/fail where a numeric threshold exists, informational otherwise), and
its runtime.  Everything is deterministic given the configuration: energy
samples are quantiles and gap edges of pooled truncation spectra, phase
grids are Kronecker sequences, and there is no unseeded randomness.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from mpmath import mp
from scipy.stats import spearmanr

from qplab.arithmetic import Frequency, ResonanceRecord, find_resonances
from qplab.cocycle import boundedness_probe, growth_profile, lyapunov_grid
from qplab.duality import dual_bounded_solution, dual_spectrum_compare
from qplab.potential import PotentialSpec
from qplab.rotation import rotation_number
from qplab.spectrum import (
    gap_edge_energies,
    holder_scan,
    ids,
    measure_bound_check,
    sample_spectral_energies,
    spectral_measure,
    truncate,
)


def truncation_bounds(v: PotentialSpec, freq: Frequency,
                      margin: float = 0.4) -> tuple[float, float]:
    """Energy window safely containing all truncation spectra (Gershgorin)."""
    op = truncate(v, freq, 0.0, 64)
    lo, hi = op.gershgorin_interval()
    return lo - margin, hi + margin


@dataclass(frozen=True)
class ExperimentReport:
    name: str
    config: dict
    measurements: tuple[tuple[str, float], ...]
    verdict: str  # "pass" | "fail" | "informational"
    runtime_seconds: float

    def to_dict(self, with_runtime: bool = False) -> dict:
        out = {
            "name": self.name,
            "config": dict(self.config),
            "measurements": [{"label": l, "value": v} for l, v in self.measurements],
            "verdict": self.verdict,
        }
        # wall time is excluded by default so identical configs reproduce
        # byte-identical reports
        if with_runtime:
            out["runtime_seconds"] = self.runtime_seconds
        return out

    def measurement(self, label: str) -> float:
        for l, v in self.measurements:
            if l == label:
                return v
        raise KeyError(label)


@dataclass(frozen=True)
class CoveringDiagnostic:
    """Links one spectral sample to its dual-phase resonances and the
    nearest lattice multiple of the doubled rotation number."""

    E: float
    theta_star: float
    resonance_record: ResonanceRecord
    m_best: int
    rotation_residual: float

    def to_dict(self) -> dict:
        return {
            "E": self.E,
            "theta_star": self.theta_star,
            "resonances": [[n, d] for n, d in self.resonance_record.resonances],
            "epsilon0": self.resonance_record.epsilon0,
            "m_best": self.m_best,
            "rotation_residual": self.rotation_residual,
        }


def best_rotation_multiple(rho: float, freq: Frequency, m_bound: int) -> tuple[int, float]:
    """Exhaustive argmin over |m| <= m_bound of ||2 rho - m alpha||."""
    if m_bound < 0:
        raise ValueError("m_bound must be >= 0")
    with mp.workprec(freq.precision_bits):
        alpha = freq.value
        two_rho = mp.mpf(rho) * 2
        best_m, best_r = 0, None
        for m in range(-m_bound, m_bound + 1):
            t = (two_rho - m * alpha) % 1
            r = float(min(t, 1 - t))
            if best_r is None or r < best_r:
                best_m, best_r = m, r
    return best_m, best_r


def _timed(name: str, config: dict, measurements, verdict: str,
           t0: float) -> ExperimentReport:
    return ExperimentReport(name=name, config=config,
                            measurements=tuple(measurements), verdict=verdict,
                            runtime_seconds=time.perf_counter() - t0)


def verify_zero_lyapunov(v: PotentialSpec, freq: Frequency, samples: int = 20,
                         n_steps: int = 10 ** 6, n_phases: int = 8,
                         sample_L: int = 1000, sample_phases: int = 16,
                         tol: float = 5e-3) -> ExperimentReport:
    """Lyapunov exponents at bulk spectral samples must all vanish within
    tolerance (subcritical coupling)."""
    t0 = time.perf_counter()
    config = {"lambda": v.lam, "samples": samples, "n_steps": n_steps,
              "n_phases": n_phases, "sample_L": sample_L, "tol": tol}
    energies = sample_spectral_energies(v, freq, samples, sample_L, sample_phases)
    if len(energies) == 0:
        raise ValueError("no spectral samples found")
    values, errs = lyapunov_grid(v, freq, energies, n_steps, n_phases)
    worst = int(np.argmax(values))
    meas = [("max_lyapunov", float(values.max())),
            ("mean_lyapunov", float(values.mean())),
            ("worst_energy", float(energies[worst])),
            ("max_stderr", float(errs.max()))]
    verdict = "pass" if values.max() <= tol else "fail"
    return _timed("zero_lyapunov", config, meas, verdict, t0)


def verify_growth_bound(v: PotentialSpec, freq: Frequency,
                        E_samples: Sequence[float] | None = None,
                        s_max: int = 10 ** 5, epsilon0: float | None = None,
                        samples: int = 6, phase_count: int = 32,
                        checkpoints: int = 24,
                        slope_cap: float = 0.05) -> ExperimentReport:
    """Sup-norm growth along the orbit must stay sublinear on the spectrum.

    Each profile is fitted as a*ln(s) + b (the recorded envelope); the
    pass condition is the desk-scale shadow of the subexponential bound:
    sup log norm at s_max below slope_cap * s_max.
    """
    t0 = time.perf_counter()
    config = {"lambda": v.lam, "s_max": s_max, "samples": samples,
              "phase_count": phase_count, "slope_cap": slope_cap}
    if E_samples is None:
        E_samples = sample_spectral_energies(v, freq, samples)
    meas = []
    ok = True
    for E in E_samples:
        prof = growth_profile(v, freq, float(E), s_max, phase_count, checkpoints)
        ss = np.array([s for s, _ in prof.checkpoints if s >= 8], dtype=float)
        ys = np.array([y for s, y in prof.checkpoints if s >= 8])
        a, b = np.polyfit(np.log(ss), ys, 1) if len(ss) >= 2 else (0.0, 0.0)
        final = prof.checkpoints[-1][1]
        meas.append((f"E={E:+.4f}_log_slope", float(a)))
        meas.append((f"E={E:+.4f}_final_sup_log", float(final)))
        if final > slope_cap * s_max:
            ok = False
    verdict = "pass" if ok else "fail"
    return _timed("growth_bound", config, meas, verdict, t0)


def verify_holder(v: PotentialSpec, freq: Frequency, L: int = 4000,
                  eps_list: Sequence[float] = (0.1, 0.03, 0.01),
                  phase_count: int = 64, margin: float = 0.4,
                  growth_cap: float = 2.0,
                  lower_floor: float = 0.05) -> ExperimentReport:
    """Square-root modulus scan of the density of states.

    Pass iff the upper ratio max dN/sqrt(eps) grows by at most growth_cap
    as eps shrinks across eps_list, and the lower ratio min dN/eps^2 over
    spectral points stays above lower_floor.
    """
    t0 = time.perf_counter()
    eps_sorted = sorted(float(e) for e in eps_list, )
    config = {"lambda": v.lam, "L": L, "eps_list": list(eps_sorted),
              "phase_count": phase_count}
    probe = truncation_bounds(v, freq, margin)
    resolution = eps_sorted[0] / 4.0
    n_pts = int(math.ceil((probe[1] - probe[0]) / resolution)) + 1
    grid = np.linspace(probe[0], probe[1], n_pts)
    curve = ids(v, freq, grid, L, phase_count)
    scan = holder_scan(curve, eps_sorted)
    meas = []
    for p in scan.upper:
        meas.append((f"upper_eps={p.eps:g}", p.ratio))
    for p in scan.lower:
        meas.append((f"lower_eps={p.eps:g}", p.ratio))
    uppers = [p.ratio for p in sorted(scan.upper, key=lambda p: -p.eps)]
    ok = all(uppers[i + 1] <= growth_cap * uppers[i] for i in range(len(uppers) - 1))
    ok = ok and all(p.ratio >= lower_floor for p in scan.lower)
    return _timed("holder", config, meas, "pass" if ok else "fail", t0)


def truncation_bounds(v: PotentialSpec, freq: Frequency,
                      margin: float = 0.4) -> tuple[float, float]:
    from qplab.spectrum import truncate

    op = truncate(v, freq, 0.0, 64)
    lo, hi = op.gershgorin_interval()
    return lo - margin, hi + margin


def verify_rotation_resonance(v: PotentialSpec, freq: Frequency,
                              E_samples: Sequence[float] | None = None,
                              epsilon0: float = 2.5, m_bound_factor: int = 4,
                              K: int = 300, samples: int = 32,
                              dual_L: int = 801,
                              rho_steps: int = 100_000,
                              corr_threshold: float = -0.5,
                              ) -> tuple[list[CoveringDiagnostic], ExperimentReport]:
    """Deeper dual-phase resonances must pin the rotation number harder.

    For each sample: the dual phase theta*(E), its resonances, and the
    lattice multiple of alpha closest to 2 rho(E) within the factor bound.
    Pass iff the rank correlation between resonance order |n_j| and
    ln ||2 rho - m alpha|| is below the threshold when at least three
    resonant samples exist; informational otherwise.
    """
    t0 = time.perf_counter()
    config = {"lambda": v.lam, "epsilon0": epsilon0,
              "m_bound_factor": m_bound_factor, "K": K, "samples": samples}
    if E_samples is None:
        half = samples // 2
        E_samples = np.concatenate([
            sample_spectral_energies(v, freq, half),
            gap_edge_energies(v, freq, samples - half),
        ])
    diagnostics: list[CoveringDiagnostic] = []
    for E in E_samples:
        try:
            sol = dual_bounded_solution(v, freq, float(E), L=dual_L)
        except ValueError:
            continue
        record = find_resonances(sol.theta_star, freq, epsilon0, K)
        rho = rotation_number(v, freq, float(E), rho_steps, 8)
        n_star, _ = record.deepest()
        m_best, resid = best_rotation_multiple(
            rho.rho, freq, m_bound_factor * max(abs(n_star), 1))
        diagnostics.append(CoveringDiagnostic(
            E=float(E), theta_star=sol.theta_star, resonance_record=record,
            m_best=m_best, rotation_residual=resid))
    resonant = [(abs(d.resonance_record.deepest()[0]),
                 math.log(max(d.rotation_residual, 1e-16)))
                for d in diagnostics if d.resonance_record.deepest()[0] != 0]
    meas = [("n_samples", float(len(diagnostics))),
            ("n_resonant", float(len(resonant)))]
    if len(resonant) >= 3:
        ns, lrs = zip(*resonant)
        corr = float(spearmanr(ns, lrs).statistic)
        meas.append(("rank_correlation", corr))
        verdict = "pass" if corr <= corr_threshold else "fail"
    else:
        verdict = "informational"
    return diagnostics, _timed("rotation_resonance", config, meas, verdict, t0)


def verify_duality(v: PotentialSpec, freq: Frequency, samples: int = 20,
                   compare_L: int = 1000, compare_phases: int = 16,
                   dual_L: int = 801, hausdorff_tol: float = 0.05,
                   max_abs_tol: float = 1.1,
                   residual_tol: float = 1e-4) -> ExperimentReport:
    """Dual truncation spectra must match and every sampled energy must
    carry a bounded dual eigenvector with unit site-0 mass."""
    t0 = time.perf_counter()
    config = {"lambda": v.lam, "samples": samples, "compare_L": compare_L,
              "dual_L": dual_L, "hausdorff_tol": hausdorff_tol,
              "max_abs_tol": max_abs_tol, "residual_tol": residual_tol}
    h = dual_spectrum_compare(v, freq, compare_L, compare_phases)
    meas = [("hausdorff", h)]
    worst_ma, worst_res = 0.0, 0.0
    energies = sample_spectral_energies(v, freq, samples)
    n_solved = 0
    for E in energies:
        try:
            sol = dual_bounded_solution(v, freq, float(E), L=dual_L)
        except ValueError:
            continue
        n_solved += 1
        worst_ma = max(worst_ma, sol.max_abs)
        worst_res = max(worst_res, sol.residual)
    meas += [("n_solved", float(n_solved)), ("worst_max_abs", worst_ma),
             ("worst_residual", worst_res)]
    ok = (h <= hausdorff_tol and n_solved == len(energies)
          and worst_ma <= max_abs_tol and worst_res <= residual_tol)
    return _timed("duality", config, meas, "pass" if ok else "fail", t0)


def ac_spectrum_proxy(v: PotentialSpec, freq: Frequency, samples: int = 20,
                      S: int = 10 ** 5, threshold_log: float = math.log(1000.0),
                      eps_list: Sequence[float] = (0.1, 0.05),
                      measure_L: int = 2000, measure_theta: float = 0.12345,
                      phase_count: int = 32) -> ExperimentReport:
    """Fraction of spectral samples with bounded orbits up to horizon S,
    plus the local measure-growth ratios.

    A proxy only: absolute continuity itself is not decidable at finite
    volume, so the verdict is always informational.
    """
    t0 = time.perf_counter()
    config = {"lambda": v.lam, "samples": samples, "S": S,
              "threshold_log": threshold_log, "eps_list": list(eps_list),
              "measure_L": measure_L}
    energies = sample_spectral_energies(v, freq, samples)
    bounded = 0
    profiles = {}
    for E in energies:
        prof = growth_profile(v, freq, float(E), S, phase_count, 24)
        profiles[float(E)] = prof
        ok, _ = boundedness_probe(prof, threshold_log)
        bounded += ok
    frac = bounded / len(energies)
    meas = [("bounded_fraction", frac)]
    lo, hi = truncation_bounds(v, freq, 0.4)
    for eps in eps_list:
        ratios = []
        for E in energies[:: max(1, len(energies) // 5)]:
            E = float(E)
            partition = np.array([lo, E - eps, E + eps, hi])
            m = spectral_measure(v, freq, measure_theta, partition, measure_L)
            short = growth_profile(v, freq, E, int(math.ceil(1.0 / eps)) + 1, 16, 12)
            ratios.append(measure_bound_check(m, short, E, eps))
        meas.append((f"max_measure_ratio_eps={eps:g}", float(np.max(ratios))))
    return _timed("ac_proxy", config, meas, "informational", t0)


EXPERIMENTS: dict[str, Callable] = {
    "zero_lyapunov": verify_zero_lyapunov,
    "growth_bound": verify_growth_bound,
    "holder": verify_holder,
    "duality": verify_duality,
    "rotation_resonance": lambda *a, **k: verify_rotation_resonance(*a, **k)[1],
    "ac_proxy": ac_spectrum_proxy,
}


def run_experiments(names: Sequence[str], v: PotentialSpec, freq: Frequency,
                    jobs: int = 1, overrides: dict | None = None) -> list[ExperimentReport]:
    """Run the named experiments, merging reports in declaration order."""
    overrides = overrides or {}
    unknown = [n for n in names if n not in EXPERIMENTS]
    if unknown:
        raise ValueError(f"unknown experiments: {unknown}")

    def job(name: str) -> ExperimentReport:
        kwargs = overrides.get(name, {})
        return EXPERIMENTS[name](v, freq, **kwargs)

    ordered = [n for n in EXPERIMENTS if n in set(names)]
    if jobs <= 1:
        return [job(n) for n in ordered]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {n: pool.submit(job, n) for n in ordered}
        return [futures[n].result() for n in ordered]


def summary_table(reports: Sequence[ExperimentReport]) -> str:
    lines = [f"{'experiment':<22} {'verdict':<14} {'runtime':>9}  key measurements"]
    for r in reports:
        head = ", ".join(f"{l}={v:.3g}" for l, v in r.measurements[:3])
        lines.append(f"{r.name:<22} {r.verdict:<14} {r.runtime_seconds:8.1f}s  {head}")
    return "\n".join(lines)
