"""Label-only, black-box model inversion by boundary repulsion.

The attacker sees nothing but a point -> label oracle.  Starting from a
random point the oracle assigns to the target class, each step probes a
small sphere around the current iterate, averages the directions whose
probe left the target class, and moves away from them.  A probe round
with no non-target labels signals convergence deep inside the region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import RngStream

_INIT_SUBSTREAM = 0
_PROBE_SUBSTREAM = 1


@dataclass(frozen=True)
class AttackConfig:
    target_class: int
    probe_count: int = 32
    probe_radius: float = 0.1
    step_size: float = 0.1
    max_iters: int = 200
    init_budget: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.probe_count < 1 or self.max_iters < 1 or self.init_budget < 1:
            raise ValueError("probe_count, max_iters, and init_budget must all be >= 1")
        if self.probe_radius <= 0 or self.step_size <= 0:
            raise ValueError("probe_radius and step_size must be > 0")


@dataclass
class AttackResult:
    """Outcome of one attack run.

    success records attack-side convergence (a full probe round with zero
    non-target labels); whether the final point fools an independent
    evaluator is measured separately by evaluate_asr.
    """

    success: bool
    final_point: np.ndarray | None
    queries_used: int
    path: list = field(default_factory=list)
    abandoned_reason: str | None = None


def find_initial_point(oracle, target: int, budget: int, sampler: RngStream, domain_box):
    """First uniform draw from the box that the oracle labels as target.

    Points are drawn and queried one at a time so the query count is the
    position of the hit.  Returns (point, queries_used), with point None
    after the budget is exhausted.
    """
    if budget < 1:
        raise ValueError(f"init budget must be >= 1, got {budget}")
    lo, hi = (np.asarray(b, dtype=float) for b in domain_box)
    for i in range(budget):
        point = lo + (hi - lo) * sampler.uniform(0.0, 1.0, lo.shape)
        label = int(np.asarray(oracle(point[None, :]))[0])
        if label == target:
            return point, i + 1
    return None, budget


def _random_unit(stream: RngStream, dim: int) -> np.ndarray:
    v = stream.standard_normal(dim)
    norm = np.linalg.norm(v)
    while norm < 1e-12:
        v = stream.standard_normal(dim)
        norm = np.linalg.norm(v)
    return v / norm


def estimate_repulsion_direction(
    oracle, x: np.ndarray, target: int, cfg: AttackConfig, stream: RngStream
) -> np.ndarray | None:
    """Unit step direction away from non-target probe responses.

    Returns None when every probe stays in the target class (convergence).
    When no probe is in the target class the repulsion mean is near zero
    by symmetry, so a fresh random unit direction is taken instead.
    """
    x = np.asarray(x, dtype=float)
    dirs = stream.standard_normal((cfg.probe_count, x.shape[0]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    labels = np.asarray(oracle(x + cfg.probe_radius * dirs), dtype=int)
    outside = dirs[labels != target]
    if len(outside) == 0:
        return None
    if len(outside) == cfg.probe_count:
        return _random_unit(stream, x.shape[0])
    mean = outside.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        return _random_unit(stream, x.shape[0])
    return -mean / norm


def run_attack(oracle, cfg: AttackConfig, domain_box, init_box=None) -> AttackResult:
    """Full boundary-repulsion run against a label-only oracle.

    init_box optionally restricts the search for the starting point (e.g.
    a small noise box far from any class core); iterates are always
    clipped to domain_box.
    """
    root = RngStream(cfg.seed)
    sampler = root.substream(_INIT_SUBSTREAM)
    probes = root.substream(_PROBE_SUBSTREAM)
    lo, hi = (np.asarray(b, dtype=float) for b in domain_box)

    x, queries = find_initial_point(
        oracle, cfg.target_class, cfg.init_budget, sampler,
        domain_box if init_box is None else init_box,
    )
    if x is None:
        return AttackResult(
            success=False, final_point=None, queries_used=queries,
            path=[], abandoned_reason="no-init",
        )

    path = [x.copy()]
    converged = False
    for _ in range(cfg.max_iters):
        direction = estimate_repulsion_direction(oracle, x, cfg.target_class, cfg, probes)
        queries += cfg.probe_count
        if direction is None:
            converged = True
            break
        x = np.clip(x + cfg.step_size * direction, lo, hi)
        path.append(x.copy())

    return AttackResult(
        success=converged,
        final_point=x,
        queries_used=queries,
        path=path,
        abandoned_reason=None if converged else "max-iters",
    )


def evaluate_asr(results, evaluator, targets) -> float:
    """Fraction of runs whose final point the evaluator labels as its target."""
    results = list(results)
    targets = list(targets)
    if len(results) != len(targets):
        raise ValueError(f"{len(results)} results vs {len(targets)} targets")
    if not results:
        raise ValueError("evaluate_asr requires at least one attack result")
    hits = 0
    for res, target in zip(results, targets):
        if res.final_point is None:
            continue
        if int(np.asarray(evaluator(res.final_point[None, :]))[0]) == target:
            hits += 1
    return hits / len(results)


def write_trace(result: AttackResult, path) -> None:
    """Attack path as delimited text: iteration, coordinates, queries used."""
    with open(path, "w", encoding="utf-8") as fh:
        dim = len(result.path[0]) if result.path else 0
        coords = "\t".join(f"x{i}" for i in range(dim))
        fh.write(f"iteration\t{coords}\tqueries\n" if dim else "iteration\tqueries\n")
        for i, point in enumerate(result.path):
            vals = "\t".join(repr(float(v)) for v in point)
            fh.write(f"{i}\t{vals}\t{result.queries_used}\n")
