"""Smoothed classification by majority vote over Gaussian-noised inputs.

Provides abstaining prediction, L2-radius certification from exact
binomial confidence bounds, and the abstention-free vote mode used when
serving as an inversion defense.

Base classifiers are label-only batched functions: they map an (m, d)
array of points to an (m,) integer label array.  Nothing else (scores,
gradients, parameters) crosses this interface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    RngStream,
    binom_two_sided_pvalue,
    clopper_pearson_lower,
    std_normal_inv_cdf,
)


@dataclass(frozen=True)
class SmoothingParams:
    """Noise scale, vote budgets, and failure probability of the smoothed classifier."""

    sigma: float
    n: int = 1000
    n0: int = 100
    alpha: float = 0.01

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.n < 1 or self.n0 < 1:
            raise ValueError(f"vote counts must be >= 1, got n={self.n}, n0={self.n0}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class SmoothedOutcome:
    """Either a predicted class label or an abstention (label is None)."""

    label: int | None

    @property
    def is_abstain(self) -> bool:
        return self.label is None


ABSTAIN = SmoothedOutcome(None)


@dataclass(frozen=True)
class Certificate:
    """Predicted label with a certified L2 radius at failure probability alpha."""

    label: int
    radius: float
    alpha: float
    pa_lower: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError(f"certificate radius must be >= 0, got {self.radius}")
        if self.radius > 0 and self.pa_lower <= 0.5:
            raise ValueError("positive radius requires pa_lower > 1/2")


def sample_votes(
    base, x: np.ndarray, m: int, sigma: float, stream: RngStream, n_classes: int | None = None
) -> np.ndarray:
    """Vote counts from m noisy evaluations of the base classifier at x."""
    if m < 1:
        raise ValueError(f"sample_votes requires m >= 1, got {m}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    x = np.asarray(x, dtype=float)
    noise = stream.standard_normal((m, x.shape[0])) * sigma
    labels = np.asarray(base(x + noise), dtype=int)
    return np.bincount(labels, minlength=n_classes if n_classes else 0)


def _top_two(counts: np.ndarray) -> tuple[int, int, int]:
    """Top class (ties to smallest index) with the top-two counts."""
    top = int(np.argmax(counts))
    n_a = int(counts[top])
    if counts.shape[0] > 1:
        rest = np.delete(counts, top)
        n_b = int(rest.max())
    else:
        n_b = 0
    return top, n_a, n_b


def predict_smoothed(base, x, params: SmoothingParams, stream: RngStream) -> SmoothedOutcome:
    """Abstaining prediction: the top class, unless the top-two vote split
    fails the exact two-sided binomial test at level alpha."""
    counts = sample_votes(base, x, params.n, params.sigma, stream)
    top, n_a, n_b = _top_two(counts)
    if binom_two_sided_pvalue(n_a, n_a + n_b) <= params.alpha:
        return SmoothedOutcome(top)
    return ABSTAIN


def certify(base, x, params: SmoothingParams, stream: RngStream) -> Certificate | None:
    """Certify the smoothed prediction at x; None signals abstention.

    The class is guessed from n0 selection votes, then its probability is
    lower-bounded from n fresh votes at confidence 1 - alpha.  The radius
    uses the two-class simplification pb_upper = 1 - pa_lower.
    """
    selection = sample_votes(base, x, params.n0, params.sigma, stream)
    guess = int(np.argmax(selection))
    counts = sample_votes(base, x, params.n, params.sigma, stream, n_classes=guess + 1)
    pa_lower = clopper_pearson_lower(int(counts[guess]), params.n, params.alpha)
    if pa_lower <= 0.5:
        return None
    radius = radius_from_bounds(params.sigma, pa_lower, 1.0 - pa_lower)
    return Certificate(label=guess, radius=radius, alpha=params.alpha, pa_lower=pa_lower)


def radius_from_bounds(sigma: float, pa_lower: float, pb_upper: float) -> float:
    """Certified L2 radius (sigma / 2) * (invPhi(pa_lower) - invPhi(pb_upper)).

    With pb_upper = 1 - pa_lower this equals sigma * invPhi(pa_lower)
    exactly, by the exact antisymmetry of the quantile implementation.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if not (0.0 < pb_upper <= pa_lower < 1.0):
        raise ValueError(
            f"bounds must satisfy 0 < pb_upper <= pa_lower < 1, got "
            f"pa_lower={pa_lower}, pb_upper={pb_upper}"
        )
    return 0.5 * sigma * (std_normal_inv_cdf(pa_lower) - std_normal_inv_cdf(pb_upper))


def vote_label(base, x, m: int, sigma: float, stream: RngStream) -> int:
    """Always-return-a-label protocol: plurality vote, no abstention."""
    counts = sample_votes(base, x, m, sigma, stream)
    return int(np.argmax(counts))


def _noise_chunk_rows(n_cols: int, budget: int = 4_000_000) -> int:
    return max(1, budget // max(1, n_cols))


def predict_smoothed_batch(base, X, params: SmoothingParams, stream: RngStream) -> np.ndarray:
    """predict_smoothed over the rows of X; -1 marks abstention.

    Consumes noise from the stream in row order, so results are identical
    to calling predict_smoothed on each row in sequence with the same
    stream.  Rows are processed in slabs to bound memory.
    """
    X = np.asarray(X, dtype=float)
    k, d = X.shape
    out = np.empty(k, dtype=int)
    chunk = _noise_chunk_rows(params.n * d)
    for start in range(0, k, chunk):
        block = X[start : start + chunk]
        b = block.shape[0]
        points = stream.standard_normal((b, params.n, d))
        points *= params.sigma
        points += block[:, None, :]
        labels = np.asarray(base(points.reshape(b * params.n, d)), dtype=int)
        labels = labels.reshape(b, params.n)
        for i in range(b):
            counts = np.bincount(labels[i])
            top, n_a, n_b = _top_two(counts)
            passed = binom_two_sided_pvalue(n_a, n_a + n_b) <= params.alpha
            out[start + i] = top if passed else -1
    return out


def certify_batch(base, X, params: SmoothingParams, stream: RngStream):
    """certify over the rows of X; None marks abstention.

    Noise consumption matches per-row certify calls on the same stream
    (n0 selection votes then n estimation votes, row by row).
    """
    X = np.asarray(X, dtype=float)
    k, d = X.shape
    total = params.n0 + params.n
    out: list[Certificate | None] = []
    chunk = _noise_chunk_rows(total * d)
    for start in range(0, k, chunk):
        block = X[start : start + chunk]
        b = block.shape[0]
        points = stream.standard_normal((b, total, d))
        points *= params.sigma
        points += block[:, None, :]
        labels = np.asarray(base(points.reshape(b * total, d)), dtype=int)
        labels = labels.reshape(b, total)
        for i in range(b):
            selection = np.bincount(labels[i, : params.n0])
            guess = int(np.argmax(selection))
            counts = np.bincount(labels[i, params.n0 :], minlength=guess + 1)
            pa_lower = clopper_pearson_lower(int(counts[guess]), params.n, params.alpha)
            if pa_lower <= 0.5:
                out.append(None)
            else:
                radius = radius_from_bounds(params.sigma, pa_lower, 1.0 - pa_lower)
                out.append(Certificate(guess, radius, params.alpha, pa_lower))
    return out


def make_vote_oracle(base, m: int, sigma: float, stream: RngStream):
    """Batched label-only oracle applying vote_label to each query point.

    Noise is consumed from the given stream in query order, so a fixed
    query sequence replays exactly.
    """
    if m < 1:
        raise ValueError(f"vote oracle requires m >= 1, got {m}")

    def oracle(X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        k, d = X.shape
        noise = stream.standard_normal((k, m, d)) * sigma
        labels = np.asarray(base((X[:, None, :] + noise).reshape(k * m, d)), dtype=int)
        labels = labels.reshape(k, m)
        out = np.empty(k, dtype=int)
        for i in range(k):
            out[i] = np.bincount(labels[i]).argmax()
        return out

    return oracle
