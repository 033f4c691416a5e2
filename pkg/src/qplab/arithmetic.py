"""Exact continued-fraction machinery for irrational frequencies.

Frequencies are carried with their exact partial quotients and big-integer
convergents; the floating value is a derived view at a configurable working
precision (default 256 bits).  The growth exponent of the denominators,
``beta = limsup ln q_{k+1} / q_k``, is estimated as a max over a trailing
window of per-level values since a true limsup is not computable.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import mpmath
from mpmath import mp

DEFAULT_PRECISION_BITS = 256

# Budget on ln(q_k) for constructed Liouville-like frequencies.  Above this
# the next partial quotient would not fit in memory as a big integer.
DEFAULT_MAX_LN_Q = 5.0e8


class RationalFrequencyError(ValueError):
    """The expansion terminated: the input was rational."""


class DepthBudgetError(ValueError):
    """Requested depth would overflow the big-integer budget."""

    def __init__(self, message: str, max_depth: int):
        super().__init__(message)
        self.max_depth = max_depth


def torus_distance(x) -> float:
    """Distance from x to the nearest integer, in [0, 1/2]."""
    t = x % 1
    return float(min(t, 1 - t))


def _torus_mp(x: mpmath.mpf) -> mpmath.mpf:
    t = x % 1
    return min(t, 1 - t)


def _decimal_digits(bits: int) -> int:
    # enough digits for an exact binary -> decimal -> binary round trip
    return int(math.ceil(bits * math.log10(2))) + 3


def _int_to_str(n: int) -> str:
    limit = sys.get_int_max_str_digits()
    needed = n.bit_length() // 3 + 16
    if needed > limit:
        sys.set_int_max_str_digits(needed)
    return str(n)


@dataclass(frozen=True, eq=False)
class Frequency:
    """An irrational in (0,1) with its continued-fraction data.

    ``quotients[i]`` is the partial quotient a_{i+1}; ``convergents[i]`` is
    the exact pair (p_{i+1}, q_{i+1}) under the seeds (p_0, q_0) = (0, 1)
    and (p_{-1}, q_{-1}) = (1, 0).  ``value`` is a working-precision real
    consistent with the stored convergents.
    """

    value: mpmath.mpf
    quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    precision_bits: int = DEFAULT_PRECISION_BITS
    truncated: bool = False

    @property
    def depth(self) -> int:
        return len(self.quotients)

    def q(self, k: int) -> int:
        """Denominator q_k, supporting the seed levels k = -1, 0."""
        if k == -1:
            return 0
        if k == 0:
            return 1
        return self.convergents[k - 1][1]

    def p(self, k: int) -> int:
        if k == -1:
            return 1
        if k == 0:
            return 0
        return self.convergents[k - 1][0]

    def alpha_bounds(self) -> tuple[Fraction, Fraction]:
        """Exact rational bounds on any irrational extending the stored quotients.

        Such a number lies strictly between the last convergent and the
        mediant with the previous one; the pair is returned sorted.
        """
        d = self.depth
        a = Fraction(self.p(d), self.q(d))
        b = Fraction(self.p(d) + self.p(d - 1), self.q(d) + self.q(d - 1))
        return (a, b) if a <= b else (b, a)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Frequency):
            return NotImplemented
        return (
            self.quotients == other.quotients
            and self.precision_bits == other.precision_bits
            and self.truncated == other.truncated
        )

    def __hash__(self) -> int:
        # cheap prefix hash: hashing monster convergents in full is O(size)
        head = self.quotients[:8]
        tail_bits = self.q(self.depth).bit_length()
        return hash((head, self.depth, tail_bits, self.precision_bits))

    def __repr__(self) -> str:
        head = ",".join(str(a) for a in self.quotients[:6])
        more = ",..." if self.depth > 6 else ""
        return f"Frequency([0;{head}{more}], depth={self.depth})"


def _convergents_from_quotients(quotients: Sequence[int]) -> list[tuple[int, int]]:
    p_prev, q_prev = 1, 0
    p_cur, q_cur = 0, 1
    out = []
    for a in quotients:
        if a < 1:
            raise ValueError("partial quotients must be positive integers")
        p_cur, p_prev = a * p_cur + p_prev, p_cur
        q_cur, q_prev = a * q_cur + q_prev, q_cur
        out.append((p_cur, q_cur))
    return out


def _value_from_convergents(convergents: Sequence[tuple[int, int]], precision_bits: int) -> mpmath.mpf:
    p, q = convergents[-1]
    with mp.workprec(precision_bits):
        return mp.mpf(p) / mp.mpf(q)


def frequency_from_quotients(
    quotients: Iterable[int], precision_bits: int = DEFAULT_PRECISION_BITS
) -> Frequency:
    """Build a Frequency from explicit partial quotients a_1, a_2, ..."""
    qs = tuple(int(a) for a in quotients)
    if not qs:
        raise ValueError("need at least one partial quotient")
    convergents = _convergents_from_quotients(qs)
    value = _value_from_convergents(convergents, precision_bits)
    return Frequency(value=value, quotients=qs, convergents=tuple(convergents),
                     precision_bits=precision_bits)


def continued_fraction(x, depth: int, precision_bits: int = DEFAULT_PRECISION_BITS) -> Frequency:
    """Expand x in (0,1) to the requested number of partial quotients.

    Raises RationalFrequencyError when a remainder vanishes exactly.  When
    the working precision can no longer resolve further quotients the result
    is truncated early and flagged, never silently padded.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    guard = 32
    with mp.workprec(precision_bits + guard):
        r = mp.mpf(x) if not isinstance(x, mpmath.mpf) else +x
        if not (0 < r < 1):
            raise ValueError("frequency must lie in (0,1)")
        quotients: list[int] = []
        q_prev, q_cur = 0, 1
        truncated = False
        budget = mp.mpf(2) ** precision_bits
        for _ in range(depth):
            inv = 1 / r
            a = int(mp.floor(inv))
            rem = inv - a
            if rem == 0:
                raise RationalFrequencyError(
                    "rational frequency: expansion terminated at level "
                    f"{len(quotients) + 1}"
                )
            q_next = a * q_cur + q_prev
            # quotients beyond the input's resolution are rounding noise
            if 2 * q_cur * q_next > budget:
                truncated = True
                break
            quotients.append(a)
            q_prev, q_cur = q_cur, q_next
            r = rem
        if not quotients:
            raise ValueError("precision too low to extract any partial quotient")
        convergents = _convergents_from_quotients(quotients)
        value = mp.mpf(x) if not isinstance(x, mpmath.mpf) else +x
    with mp.workprec(precision_bits):
        value = +value
    return Frequency(value=value, quotients=tuple(quotients),
                     convergents=tuple(convergents),
                     precision_bits=precision_bits, truncated=truncated)


def _e_minus_two_quotients(depth: int) -> list[int]:
    # [0; 1, 2, 1, 1, 4, 1, 1, 6, 1, 1, 8, ...]
    qs = [1]
    m = 2
    while len(qs) < depth:
        qs.extend((m, 1, 1))
        m += 2
    return qs[:depth]


def preset_frequency(name: str, depth: int = 40,
                     precision_bits: int = DEFAULT_PRECISION_BITS) -> Frequency:
    """Named test frequencies: 'golden', 'silver' (sqrt(2)-1), 'e2' (e-2)."""
    name = name.lower()
    if name == "golden":
        return frequency_from_quotients([1] * depth, precision_bits)
    if name == "silver":
        return frequency_from_quotients([2] * depth, precision_bits)
    if name in ("e2", "e-2"):
        return frequency_from_quotients(_e_minus_two_quotients(depth), precision_bits)
    raise ValueError(f"unknown frequency preset {name!r}")


def _int_with_ln(t: float) -> int:
    """A positive integer whose natural log is within float accuracy of t.

    ceil(e^t) while e^t fits a double; above that, a 53-bit mantissa shifted
    into place.  Only ln of the quotient enters the denominator growth, so
    this is all the beta construction needs.
    """
    if t <= 0:
        return 1
    if t < 500:
        return max(1, math.ceil(math.exp(t)))
    s = t / math.log(2.0)
    e = int(math.floor(s))
    frac = s - e
    mant = round(2.0 ** (frac + 52))
    return mant << (e - 52)


def build_frequency_with_beta(
    beta_target: float,
    depth: int,
    seed: Sequence[int] = (1, 1),
    precision_bits: int = DEFAULT_PRECISION_BITS,
    max_ln_q: float = DEFAULT_MAX_LN_Q,
) -> Frequency:
    """Construct a frequency whose denominator growth realizes beta_target.

    After the seed quotients, each new quotient is an integer with
    ln a_{k+1} = beta_target * q_k, so ln q_{k+1} / q_k converges to the
    target from above.  Denominators grow doubly exponentially; the depth
    that fits the big-integer budget is tiny (about 5 for beta near 0.5).
    """
    if beta_target <= 0:
        raise ValueError("beta_target must be positive")
    seed = tuple(int(a) for a in seed)
    if any(a < 1 for a in seed):
        raise ValueError("seed quotients must be positive integers")
    if depth <= len(seed):
        raise ValueError("depth must exceed the seed length")
    quotients = list(seed)
    q_prev, q_cur = 0, 1
    for a in quotients:
        q_prev, q_cur = q_cur, a * q_cur + q_prev
    while len(quotients) < depth:
        if q_cur > max_ln_q / beta_target:
            raise DepthBudgetError(
                f"beta={beta_target} construction exceeds the big-integer "
                f"budget beyond depth {len(quotients)}; request depth <= "
                f"{len(quotients)}",
                max_depth=len(quotients),
            )
        a = _int_with_ln(beta_target * q_cur)
        quotients.append(a)
        q_prev, q_cur = q_cur, a * q_cur + q_prev
    return frequency_from_quotients(quotients, precision_bits)


@dataclass(frozen=True)
class BetaEstimate:
    """Trailing-window proxy for limsup ln q_{k+1}/q_k."""

    beta_hat: float
    per_level: tuple[tuple[int, float], ...]
    depth_used: int


def beta_estimate(freq: Frequency, tail_window: int = 5) -> BetaEstimate:
    """Per-level values ln q_{k+1}/q_k and their max over the trailing window."""
    if tail_window < 1:
        raise ValueError("tail_window must be >= 1")
    if freq.depth < tail_window + 1:
        raise ValueError(
            f"need at least {tail_window + 1} convergents, have {freq.depth}"
        )
    per_level = []
    for k in range(freq.depth):
        val = math.log(freq.q(k + 1)) / freq.q(k)
        per_level.append((k, val))
    tail = [v for _, v in per_level[-tail_window:]]
    beta_hat = max(tail)
    assert beta_hat >= 0.0
    return BetaEstimate(beta_hat=beta_hat, per_level=tuple(per_level),
                        depth_used=freq.depth)


def default_epsilon0(freq: Frequency, tail_window: int = 5) -> float:
    """Default resonance strength: 10 * beta_hat (floor 0.1 for beta ~ 0)."""
    b = beta_estimate(freq, min(tail_window, freq.depth - 1)).beta_hat
    return max(10.0 * b, 0.1)


class DiophantineResult(NamedTuple):
    holds: bool
    worst_k: int
    margin: float


def diophantine_check(freq: Frequency, kappa: float, tau: float, K: int) -> DiophantineResult:
    """Check ||k alpha|| > kappa |k|^-tau for all 0 < |k| <= K.

    By the best-approximation property, min_{q_n <= k < q_{n+1}} ||k alpha||
    is attained at k = q_n, so only convergent denominators need scanning;
    this makes astronomically large K (e.g. K = q_D of a Liouville
    frequency) exact and cheap.  Distances use the exact rational bounds on
    alpha, pessimistically, so a reported violation is rigorous.
    """
    if kappa <= 0 or tau <= 0:
        raise ValueError("kappa and tau must be positive")
    if K < 1:
        raise ValueError("K must be >= 1")
    lo, hi = freq.alpha_bounds()
    worst_k = 0
    worst_margin = None
    for level in range(0, freq.depth + 1):
        qk = freq.q(level)
        pk = freq.p(level)
        if qk < 1 or qk > K:
            continue
        d_lo = abs(qk * lo - pk)
        d_hi = abs(qk * hi - pk)
        dist = min(d_lo, d_hi)  # pessimistic bound on ||q_k alpha||
        margin = float(dist) * float(qk) ** tau
        if worst_margin is None or margin < worst_margin:
            worst_margin = margin
            worst_k = qk
    assert worst_margin is not None
    return DiophantineResult(holds=worst_margin > kappa, worst_k=worst_k,
                             margin=worst_margin)


@dataclass(frozen=True)
class ResonanceRecord:
    """Ordered resonances of a phase: integers k with ||2 theta - k alpha||
    both exponentially small in |k| and a running minimum over |j| <= |k|."""

    theta: float
    epsilon0: float
    resonances: tuple[tuple[int, float], ...]
    search_bound: int

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(n for n, _ in self.resonances)

    def deepest(self) -> tuple[int, float]:
        return self.resonances[-1]


def find_resonances(theta, freq: Frequency, epsilon0: float, K: int) -> ResonanceRecord:
    """Scan |k| <= K in order of increasing |k| for epsilon0-resonances.

    k = 0 always qualifies.  At each |k| both signs are tested against the
    running minimum; ties at the same distance admit both.
    """
    if epsilon0 <= 0:
        raise ValueError("epsilon0 must be positive")
    if K < 0:
        raise ValueError("K must be >= 0")
    with mp.workprec(freq.precision_bits + 32):
        th = mp.mpf(theta) if not isinstance(theta, mpmath.mpf) else +theta
        alpha = freq.value
        two_theta = 2 * th
        d0 = _torus_mp(two_theta)
        found = [(0, float(d0))]
        running = d0
        for k in range(1, K + 1):
            d_plus = _torus_mp(two_theta - k * alpha)
            d_minus = _torus_mp(two_theta + k * alpha)
            m = min(running, d_plus, d_minus)
            thresh = mp.e ** (-epsilon0 * k)
            if d_plus == m and d_plus <= thresh:
                found.append((k, float(d_plus)))
            if d_minus == m and d_minus <= thresh and d_minus != d_plus:
                found.append((-k, float(d_minus)))
            running = m
    return ResonanceRecord(theta=float(th % 1), epsilon0=float(epsilon0),
                           resonances=tuple(found), search_bound=K)


def frequency_to_json(freq: Frequency) -> dict:
    """JSON form with big integers as decimal strings (exact round trip)."""
    digits = _decimal_digits(freq.precision_bits)
    with mp.workprec(freq.precision_bits):
        value_decimal = mp.nstr(freq.value, digits, strip_zeros=False)
    return {
        "value_decimal": value_decimal,
        "quotients": [_int_to_str(a) for a in freq.quotients],
        "convergents": [[_int_to_str(p), _int_to_str(q)] for p, q in freq.convergents],
        "precision_bits": freq.precision_bits,
        "truncated": freq.truncated,
    }


def frequency_from_json(obj: dict) -> Frequency:
    precision_bits = int(obj.get("precision_bits", DEFAULT_PRECISION_BITS))
    limit = sys.get_int_max_str_digits()
    longest = max(len(s) for pair in obj["convergents"] for s in pair)
    if longest + 16 > limit:
        sys.set_int_max_str_digits(longest + 16)
    quotients = tuple(int(s) for s in obj["quotients"])
    convergents = tuple((int(p), int(q)) for p, q in obj["convergents"])
    expected = _convergents_from_quotients(quotients)
    if list(convergents) != expected:
        raise ValueError("convergents inconsistent with quotients")
    with mp.workprec(precision_bits):
        value = mp.mpf(obj["value_decimal"])
    return Frequency(value=value, quotients=quotients, convergents=convergents,
                     precision_bits=precision_bits,
                     truncated=bool(obj.get("truncated", False)))
