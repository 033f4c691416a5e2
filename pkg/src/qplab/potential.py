"""Real-analytic 1-periodic potentials given by finitely many Fourier modes."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

IMAG_TOL = 1e-12


@dataclass(frozen=True)
class PotentialSpec:
    """Trigonometric polynomial v(x) = sum_k c_k e^{2 pi i k x} with coupling.

    Coefficients are stored as a sorted tuple of (k, c_k) pairs and must be
    Hermitian (c_{-k} = conj(c_k)) so the potential is real on the real axis.
    """

    coeffs: tuple[tuple[int, complex], ...]
    lam: float
    eta_max: float = math.inf

    def __post_init__(self):
        seen = dict(self.coeffs)
        for k, c in seen.items():
            mate = seen.get(-k, 0.0)
            if abs(mate - c.conjugate()) > IMAG_TOL * max(1.0, abs(c)):
                raise ValueError(
                    f"coefficients not Hermitian at k={k}: v would not be real"
                )

    @property
    def degree(self) -> int:
        return max((abs(k) for k, _ in self.coeffs), default=0)


def make_potential(coeffs: dict[int, complex], lam: float,
                   eta_max: float = math.inf) -> PotentialSpec:
    items = tuple(sorted((int(k), complex(c)) for k, c in coeffs.items()))
    return PotentialSpec(coeffs=items, lam=float(lam), eta_max=eta_max)


def make_amo(lam: float) -> PotentialSpec:
    """The cosine potential v(x) = 2 cos(2 pi x): modes +-1 with weight 1."""
    return make_potential({-1: 1.0, 1: 1.0}, lam)


def eval_potential(v: PotentialSpec, x) -> float | np.ndarray:
    """Evaluate v at real x (scalar or array); the imaginary residue must
    stay below tolerance or the coefficients are corrupted."""
    xs = np.asarray(x, dtype=float)
    total = np.zeros(xs.shape, dtype=complex)
    for k, c in v.coeffs:
        total += c * np.exp(2j * np.pi * k * xs)
    resid = np.max(np.abs(total.imag)) if total.size else 0.0
    scale = max(1.0, float(np.max(np.abs(total.real))) if total.size else 1.0)
    if resid > IMAG_TOL * scale:
        raise ValueError(f"imaginary residue {resid:.3e} exceeds tolerance")
    out = total.real
    return float(out) if np.isscalar(x) or out.ndim == 0 else out


def strip_norm(v: PotentialSpec, eta: float) -> float:
    """Upper bound sum_k |c_k| e^{2 pi eta |k|} for the sup of |v| on the
    strip |Im x| < eta (triangle inequality; exact closed form per mode)."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    return float(sum(abs(c) * math.exp(2 * math.pi * eta * abs(k))
                     for k, c in v.coeffs))


def potential_to_json(v: PotentialSpec) -> dict:
    return {
        "lambda": v.lam,
        "coeffs": [{"k": k, "re": c.real, "im": c.imag} for k, c in v.coeffs],
    }


def potential_from_json(obj: dict) -> PotentialSpec:
    coeffs = {int(e["k"]): complex(float(e["re"]), float(e.get("im", 0.0)))
              for e in obj["coeffs"]}
    return make_potential(coeffs, float(obj["lambda"]))
