"""Deterministic statistical primitives.

Standard-normal CDF and quantile, exact binomial confidence bounds and
tests, and a counter-based splittable random stream so that Monte Carlo
runs are reproducible regardless of how work is scheduled.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

_MASK64 = (1 << 64) - 1

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _mix64(x: int) -> int:
    """SplitMix64 finalizer; a bijective scramble of a 64-bit word."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


class RngStream:
    """Counter-based random stream keyed by (seed, stream_id).

    Two streams built from the same (seed, stream_id) replay the same
    sequence.  Distinct stream_ids under one seed select independent
    Philox keys, so streams never share state and consuming them in any
    order leaves every individual sequence unchanged.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = self.seed | (self.stream_id << 64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def substream(self, index: int) -> "RngStream":
        """Derive an independent child stream, deterministic in (self, index)."""
        child = _mix64(self.stream_id ^ _mix64((int(index) + 1) & _MASK64))
        return RngStream(self.seed, child)

    def standard_normal(self, shape=None) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, lo: float = 0.0, hi: float = 1.0, size=None):
        return self._gen.uniform(lo, hi, size)

    def integers(self, lo: int, hi: int, size=None):
        """Uniform integers in [lo, hi), matching numpy's half-open convention."""
        return self._gen.integers(lo, hi, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    if not math.isfinite(x):
        raise ValueError(f"std_normal_cdf requires finite input, got {x!r}")
    return 0.5 * math.erfc(-x / _SQRT2)


def _std_normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


# Acklam's rational approximation to the normal quantile (relative error
# ~1.15e-9 before refinement).
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)
_ACK_PLOW = 0.02425


def _inv_cdf_upper(p: float) -> float:
    """Quantile for p in [0.5, 1), refined by one Newton step on the CDF."""
    if p <= 1.0 - _ACK_PLOW:
        q = p - 0.5
        r = q * q
        a, b = _ACK_A, _ACK_B
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        c, d = _ACK_C, _ACK_D
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    pdf = _std_normal_pdf(x)
    if pdf > 0.0:
        x -= (std_normal_cdf(x) - p) / pdf
    return x


def std_normal_inv_cdf(p: float) -> float:
    """Inverse standard normal CDF on the open interval (0, 1).

    Exactly antisymmetric by construction: the p < 1/2 branch negates the
    upper branch at 1 - p, and 1 - p is exact in floating point on [0, 1].
    """
    if not (0.0 < p < 1.0):
        raise ValueError(f"std_normal_inv_cdf requires p in (0, 1), got {p!r}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return _inv_cdf_upper(p)
    return -_inv_cdf_upper(1.0 - p)


def _log_binom_coeffs(n: int, k: int) -> np.ndarray:
    """log C(n, j) for j = k..n, built from one lgamma anchor plus a cumsum."""
    first = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    if k == n:
        return np.array([first])
    j = np.arange(k, n, dtype=np.float64)
    steps = np.log(n - j) - np.log(j + 1.0)
    out = np.empty(n - k + 1)
    out[0] = first
    np.cumsum(steps, out=out[1:])
    out[1:] += first
    return out


def binom_tail_ge(k: int, n: int, p: float) -> float:
    """P[X >= k] for X ~ Binomial(n, p), by exact summation in log space."""
    if k <= 0:
        return 1.0
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    j = np.arange(k, n + 1, dtype=np.float64)
    logs = _log_binom_coeffs(n, k) + j * math.log(p) + (n - j) * math.log1p(-p)
    m = logs.max()
    return float(min(1.0, math.exp(m) * np.exp(logs - m).sum()))


@lru_cache(maxsize=1 << 16)
def clopper_pearson_lower(k: int, n: int, alpha: float) -> float:
    """One-sided exact lower confidence bound on a binomial proportion.

    Returns the largest p with P[X >= k | Binomial(n, p)] <= alpha, i.e.
    the Clopper-Pearson lower bound at confidence 1 - alpha, found by
    bisection on the exactly summed tail.  k = 0 gives the vacuous bound 0.
    """
    k, n = int(k), int(n)
    if n < 1:
        raise ValueError(f"clopper_pearson_lower requires n >= 1, got n={n}")
    if not 0 <= k <= n:
        raise ValueError(f"clopper_pearson_lower requires 0 <= k <= n, got k={k}, n={n}")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"clopper_pearson_lower requires alpha in (0, 1), got {alpha!r}")
    if k == 0:
        return 0.0
    if k == n:
        return alpha ** (1.0 / n)
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if binom_tail_ge(k, n, mid) > alpha:
            hi = mid
        else:
            lo = mid
    return lo


@lru_cache(maxsize=1 << 16)
def binom_two_sided_pvalue(k: int, n: int) -> float:
    """Exact two-sided p-value for k successes in n trials under p = 1/2.

    Uses the doubling convention: min(1, 2 * min(P[X <= k], P[X >= k])).
    """
    k, n = int(k), int(n)
    if n < 1:
        raise ValueError(f"binom_two_sided_pvalue requires n >= 1, got n={n}")
    if not 0 <= k <= n:
        raise ValueError(f"binom_two_sided_pvalue requires 0 <= k <= n, got k={k}, n={n}")
    log_half = math.log(0.5)
    logs = _log_binom_coeffs(n, 0) + n * log_half
    m = logs.max()
    probs = np.exp(logs - m)
    scale = math.exp(m)

    def head(j: int) -> float:
        return scale * probs[: j + 1].sum()

    # P[X >= k] equals P[X <= n - k] under p = 1/2; routing both tails
    # through head() makes the k <-> n - k symmetry exact in floats.
    return float(min(1.0, 2.0 * min(head(k), head(n - k))))


def sample_gaussian_vector(stream: RngStream, dim: int, sigma: float) -> np.ndarray:
    """Vector of dim independent N(0, sigma^2) draws; advances the stream."""
    if dim < 1:
        raise ValueError(f"sample_gaussian_vector requires dim >= 1, got {dim}")
    if sigma < 0:
        raise ValueError(f"sample_gaussian_vector requires sigma >= 0, got {sigma}")
    return sigma * stream.standard_normal(dim)
