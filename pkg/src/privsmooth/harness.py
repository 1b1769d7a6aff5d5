"""End-to-end experiment pipelines.

The recommendation study trains a threshold-labeled classifier that leans
on one sensitive column, then measures how smoothing expands the range of
attribute values receiving positive predictions (histograms, expansion,
per-noise-scale accuracy/abstention/radius metrics, and the sampling-size
ablation).  The inversion study trains a toy multi-class task and measures
label-only attack success against undefended and vote-defended oracles.

Reports are plain dataclasses; writers emit deterministic JSON plus flat
TSV tables for external plotting.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ape import TrajectorySpec, build_trajectory, empirical_expansion, empirical_expansion_binned
from .data import (
    featurize,
    generate_synthetic_insurance,
    ingest_csv,
    label_by_percentile,
    labels_for,
    split_indices,
)
from .inversion import AttackConfig, evaluate_asr, run_attack
from .nn import MlpModel, TrainConfig, batch_predictor, predict_batch, train
from .numerics import RngStream, _mix64
from .smoothing import (
    SmoothingParams,
    certify_batch,
    make_vote_oracle,
    predict_smoothed_batch,
    vote_label,
)

# stream tags for the independent random consumers of one experiment seed
_SPLIT_STREAM = 301
_REC_EVAL_STREAM = 310
_ABL_EVAL_STREAM = 320
_INV_DATA_STREAM = 330
_INV_EVAL_STREAM = 331
_INV_ATTACK_TAG = 332


@dataclass
class RecommendationConfig:
    """Settings for the recommendation study and its ablation."""

    n_records: int = 10_000
    csv_path: str | None = None
    split_fraction: float = 0.6
    percentile_q: float = 0.9
    sigmas: tuple = (1.0, 2.0, 3.0)
    n_votes: int = 1000
    n0_votes: int = 100
    alpha: float = 0.01
    trajectory_step: float = 0.01
    trajectory_count: int = 500
    max_trajectory_contexts: int = 150
    certify_trajectory_contexts: int = 30
    hist_bin_width: float = 0.2
    epochs: int = 60
    batch_size: int = 128
    learning_rate: float = 0.05
    l1_lambda: float = 0.01
    hidden_size: int = 64
    ablation_sigma: float = 3.0
    ablation_cells: tuple = ((1000, 0.01), (100, 0.01), (1000, 0.99))
    seed: int = 0

    def __post_init__(self):
        if self.n_records < 10 and self.csv_path is None:
            raise ValueError("n_records is too small to split and train on")
        if not self.sigmas:
            self.sigmas = ()
        if self.hist_bin_width <= 0:
            raise ValueError("hist_bin_width must be > 0")


@dataclass
class SmoothedRow:
    """Per-(sigma, N, alpha) metrics row of a recommendation report."""

    sigma: float
    n_votes: int
    alpha: float
    accuracy: float
    abstention_rate: float
    error_rate: float
    avg_radius: float | None
    n_positive_certified: int
    n_positive_predictions: int
    empirical_expansion: float
    empirical_expansion_binned: float
    avg_trajectory_radius: float
    n_trajectory_certified: int


@dataclass
class RecommendationReport:
    config: dict
    threshold_b: float
    base_accuracy: float
    base_n_positive: int
    base_expansion: float
    base_expansion_binned: float
    rows: list[SmoothedRow]
    histograms: dict[str, list]
    notes: tuple = (
        "abstentions count as incorrect in accuracy",
        "avg_radius is over test samples certified with a positive label",
        "histogram bins are anchored at the threshold",
    )


@dataclass
class InversionCell:
    sigma: float
    n_votes: int
    asr: float
    accuracy: float
    mean_queries: float
    n_converged: int


@dataclass
class InversionConfig:
    """Settings for the toy inversion-defense sweep."""

    n_classes: int = 10
    dim: int = 32
    center_scale: float = 6.0
    train_per_class: int = 150
    heldout_per_class: int = 20
    target_hidden: int = 64
    evaluator_hidden: int = 32
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.05
    sigmas: tuple = (0.5, 1.0, 2.0, 4.0, 8.0)
    vote_counts: tuple = (10, 100)
    n_targets: int = 50
    probe_count: int = 32
    probe_radius: float = 2.0
    step_size: float = 0.4
    max_iters: int = 30
    init_budget: int = 500
    init_halfwidth: float = 0.25  # starting points come from this central noise box
    seed: int = 0


@dataclass
class InversionReport:
    config: dict
    baseline: InversionCell
    rows: list[InversionCell]
    notes: tuple = (
        "accuracy is measured on a fixed held-out set under the always-return-a-label protocol",
    )


def _config_echo(config) -> dict:
    doc = dataclasses.asdict(config)
    for key, value in doc.items():
        if isinstance(value, tuple):
            doc[key] = list(value)
    return doc


def _histogram(values, anchor: float, width: float) -> list:
    """(bin_lo, count) rows with bin edges anchored at the threshold."""
    counts: dict[int, int] = {}
    for v in values:
        idx = int(np.floor((v - anchor) / width + 1e-12))
        counts[idx] = counts.get(idx, 0) + 1
    return [[anchor + i * width, counts[i]] for i in sorted(counts)]


@dataclass
class _RecommendationTask:
    """Shared state of one trained recommendation pipeline."""

    config: RecommendationConfig
    model: MlpModel
    base: object
    threshold_b: float
    test_features: np.ndarray
    test_labels: np.ndarray
    test_bmis: np.ndarray
    bmi_col: int
    bmi_mean: float
    bmi_std: float
    positive_idx: np.ndarray
    trajectory: np.ndarray
    trajectory_z: np.ndarray
    base_accuracy: float


def _prepare_recommendation(config: RecommendationConfig) -> _RecommendationTask:
    if config.csv_path is not None:
        records = ingest_csv(config.csv_path)
    else:
        records = generate_synthetic_insurance(config.n_records, config.seed)
    train_idx, test_idx = split_indices(
        len(records), config.split_fraction, RngStream(config.seed, _SPLIT_STREAM)
    )
    train_records = [records[i] for i in train_idx]
    test_records = [records[i] for i in test_idx]

    train_labels, threshold_b = label_by_percentile(train_records, config.percentile_q)
    test_labels = labels_for(test_records, threshold_b)
    X_train, bmi_col, stats = featurize(train_records)
    X_test, _, _ = featurize(test_records, stats)

    mask = np.ones(X_train.shape[1], dtype=bool)
    mask[bmi_col] = False
    model = train(
        X_train,
        train_labels,
        TrainConfig(
            epochs=config.epochs,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            l1_lambda=config.l1_lambda,
            l1_mask=mask,
            seed=config.seed,
            hidden_size=config.hidden_size,
            n_classes=2,
        ),
    )
    base = batch_predictor(model)
    base_pred = predict_batch(model, X_test)
    positive_idx = np.flatnonzero(base_pred == 1)

    trajectory = build_trajectory(
        TrajectorySpec(threshold_b, config.trajectory_step, config.trajectory_count)
    )
    bmi_mean = stats.means[bmi_col]
    bmi_std = stats.stds[bmi_col]
    return _RecommendationTask(
        config=config,
        model=model,
        base=base,
        threshold_b=threshold_b,
        test_features=X_test,
        test_labels=test_labels,
        test_bmis=np.array([r.bmi for r in test_records]),
        bmi_col=bmi_col,
        bmi_mean=bmi_mean,
        bmi_std=bmi_std,
        positive_idx=positive_idx,
        trajectory=trajectory,
        trajectory_z=(trajectory - bmi_mean) / bmi_std,
        base_accuracy=float((base_pred == test_labels).mean()),
    )


def _trajectory_block(task: _RecommendationTask, record_idx: int) -> np.ndarray:
    """Feature rows for one context with the sensitive column swept."""
    block = np.tile(task.test_features[record_idx], (len(task.trajectory), 1))
    block[:, task.bmi_col] = task.trajectory_z
    return block


def _base_positive_values(task: _RecommendationTask) -> list:
    """Attribute values the base classifier marks positive on the augmented set."""
    values = [float(task.test_bmis[i]) for i in task.positive_idx]
    for i in task.positive_idx:
        labels = np.asarray(task.base(_trajectory_block(task, i)))
        values.extend(float(z) for z in task.trajectory[labels == 1])
    return values


def _smoothed_cell(
    task: _RecommendationTask, sigma: float, n_votes: int, alpha: float, eval_stream: RngStream
) -> tuple[SmoothedRow, list]:
    """All metrics of one (sigma, N, alpha) cell plus its positive values."""
    config = task.config
    params = SmoothingParams(sigma=sigma, n=n_votes, n0=config.n0_votes, alpha=alpha)

    # test-set prediction metrics (abstain counted as incorrect)
    pred = predict_smoothed_batch(task.base, task.test_features, params, eval_stream.substream(0))
    n_test = len(pred)
    abstained = int((pred == -1).sum())
    correct = int((pred == task.test_labels).sum())
    errors = n_test - abstained - correct

    # test-set certification: average radius over positive certificates
    certs = certify_batch(task.base, task.test_features, params, eval_stream.substream(1))
    pos_radii = [c.radius for c in certs if c is not None and c.label == 1]
    avg_radius = float(np.mean(pos_radii)) if pos_radii else None

    # augmented-set positives: original positives plus the swept trajectory
    originals = task.test_features[task.positive_idx]
    orig_pred = predict_smoothed_batch(task.base, originals, params, eval_stream.substream(2))
    positives = [float(task.test_bmis[i]) for i, p in zip(task.positive_idx, orig_pred) if p == 1]
    contexts = task.positive_idx[: config.max_trajectory_contexts]
    traj_stream = eval_stream.substream(3)
    for i in contexts:
        labels = predict_smoothed_batch(task.base, _trajectory_block(task, i), params, traj_stream)
        positives.extend(float(z) for z in task.trajectory[labels == 1])

    # certified radii along the trajectory, for the conservativeness check
    cert_stream = eval_stream.substream(4)
    traj_radii = []
    for i in task.positive_idx[: config.certify_trajectory_contexts]:
        for cert in certify_batch(task.base, _trajectory_block(task, i), params, cert_stream):
            if cert is not None and cert.label == 1:
                traj_radii.append(cert.radius)

    row = SmoothedRow(
        sigma=sigma,
        n_votes=n_votes,
        alpha=alpha,
        accuracy=correct / n_test,
        abstention_rate=abstained / n_test,
        error_rate=errors / n_test,
        avg_radius=avg_radius,
        n_positive_certified=len(pos_radii),
        n_positive_predictions=len(positives),
        empirical_expansion=empirical_expansion(task.threshold_b, positives),
        empirical_expansion_binned=empirical_expansion_binned(
            task.threshold_b, positives, config.hist_bin_width
        ),
        avg_trajectory_radius=float(np.mean(traj_radii)) if traj_radii else 0.0,
        n_trajectory_certified=len(traj_radii),
    )
    return row, positives


def run_recommendation_experiment(config: RecommendationConfig) -> RecommendationReport:
    """Train once, then evaluate the base and smoothed classifiers per sigma."""
    task = _prepare_recommendation(config)
    base_positives = _base_positive_values(task)
    histograms = {"base": _histogram(base_positives, task.threshold_b, config.hist_bin_width)}

    rows = []
    root = RngStream(config.seed, _REC_EVAL_STREAM)
    for cell_idx, sigma in enumerate(config.sigmas):
        row, positives = _smoothed_cell(
            task, float(sigma), config.n_votes, config.alpha, root.substream(cell_idx)
        )
        rows.append(row)
        histograms[f"sigma={sigma:g}"] = _histogram(
            positives, task.threshold_b, config.hist_bin_width
        )

    return RecommendationReport(
        config=_config_echo(config),
        threshold_b=task.threshold_b,
        base_accuracy=task.base_accuracy,
        base_n_positive=len(base_positives),
        base_expansion=empirical_expansion(task.threshold_b, base_positives),
        base_expansion_binned=empirical_expansion_binned(
            task.threshold_b, base_positives, config.hist_bin_width
        ),
        rows=rows,
        histograms=histograms,
    )


def run_ablation(config: RecommendationConfig) -> RecommendationReport:
    """Fixed noise scale, sweeping the vote count and failure probability."""
    task = _prepare_recommendation(config)
    base_positives = _base_positive_values(task)
    histograms = {"base": _histogram(base_positives, task.threshold_b, config.hist_bin_width)}

    rows = []
    root = RngStream(config.seed, _ABL_EVAL_STREAM)
    for cell_idx, (n_votes, alpha) in enumerate(config.ablation_cells):
        row, positives = _smoothed_cell(
            task, config.ablation_sigma, int(n_votes), float(alpha), root.substream(cell_idx)
        )
        rows.append(row)
        histograms[f"n={n_votes:g},alpha={alpha:g}"] = _histogram(
            positives, task.threshold_b, config.hist_bin_width
        )

    return RecommendationReport(
        config=_config_echo(config),
        threshold_b=task.threshold_b,
        base_accuracy=task.base_accuracy,
        base_n_positive=len(base_positives),
        base_expansion=empirical_expansion(task.threshold_b, base_positives),
        base_expansion_binned=empirical_expansion_binned(
            task.threshold_b, base_positives, config.hist_bin_width
        ),
        rows=rows,
        histograms=histograms,
    )


def _mixture_dataset(config: InversionConfig):
    """Seeded Gaussian-mixture task: well-separated class blobs in a box."""
    root = RngStream(config.seed, _INV_DATA_STREAM)
    raw = root.substream(0).standard_normal((config.n_classes, config.dim))
    centers = config.center_scale * raw / np.linalg.norm(raw, axis=1, keepdims=True)

    def draw(per_class, stream):
        X = np.vstack([
            centers[k] + stream.substream(k).standard_normal((per_class, config.dim))
            for k in range(config.n_classes)
        ])
        y = np.repeat(np.arange(config.n_classes), per_class)
        return X, y

    X_train, y_train = draw(config.train_per_class, root.substream(1))
    X_held, y_held = draw(config.heldout_per_class, root.substream(2))
    lo = centers.min(axis=0) - 3.0
    hi = centers.max(axis=0) + 3.0
    return centers, X_train, y_train, X_held, y_held, (lo, hi)


def _attack_seed(seed: int, run_idx: int) -> int:
    # shared across defense cells so comparisons are paired: with zero
    # noise a defended run replays the undefended one exactly
    return _mix64(_mix64(seed) ^ (run_idx + 1))


def _attack_cell(config, base_oracle, evaluator, targets, box) -> tuple[float, float, int]:
    w = config.init_halfwidth
    init_box = (np.full(config.dim, -w), np.full(config.dim, w))
    results = []
    for run_idx, target in enumerate(targets):
        cfg = AttackConfig(
            target_class=int(target),
            probe_count=config.probe_count,
            probe_radius=config.probe_radius,
            step_size=config.step_size,
            max_iters=config.max_iters,
            init_budget=config.init_budget,
            seed=_attack_seed(config.seed, run_idx),
        )
        results.append(run_attack(base_oracle(run_idx), cfg, box, init_box=init_box))
    asr = evaluate_asr(results, evaluator, targets)
    mean_queries = float(np.mean([r.queries_used for r in results]))
    n_converged = sum(r.success for r in results)
    return asr, mean_queries, n_converged


def run_inversion_experiment(config: InversionConfig) -> InversionReport:
    """Attack the undefended and vote-defended oracles over the (sigma, N) grid."""
    centers, X_train, y_train, X_held, y_held, box = _mixture_dataset(config)

    def fit(hidden, seed_offset):
        return train(
            X_train,
            y_train,
            TrainConfig(
                epochs=config.epochs,
                batch_size=config.batch_size,
                learning_rate=config.learning_rate,
                seed=_mix64(config.seed ^ seed_offset),
                hidden_size=hidden,
                n_classes=config.n_classes,
            ),
        )

    target_model = fit(config.target_hidden, 0xA11CE)
    evaluator_model = fit(config.evaluator_hidden, 0xB0B)
    base = batch_predictor(target_model)
    evaluator = batch_predictor(evaluator_model)

    targets = [i % config.n_classes for i in range(config.n_targets)]
    base_accuracy = float((np.asarray(base(X_held)) == y_held).mean())
    asr, queries, converged = _attack_cell(config, lambda run: base, evaluator, targets, box)
    baseline = InversionCell(
        sigma=0.0, n_votes=1, asr=asr, accuracy=base_accuracy,
        mean_queries=queries, n_converged=converged,
    )

    rows = []
    eval_root = RngStream(config.seed, _INV_EVAL_STREAM)
    cell_idx = 0
    for n_votes in config.vote_counts:
        for sigma in config.sigmas:
            cell_idx += 1
            defense_tag = _mix64(_INV_ATTACK_TAG + cell_idx)

            def defended(run_idx, _sigma=sigma, _n=n_votes, _tag=defense_tag):
                stream = RngStream(config.seed, _tag).substream(run_idx)
                return make_vote_oracle(base, _n, _sigma, stream)

            asr, queries, converged = _attack_cell(config, defended, evaluator, targets, box)
            acc_stream = eval_root.substream(cell_idx)
            hits = sum(
                vote_label(base, x, int(n_votes), float(sigma), acc_stream.substream(i)) == y
                for i, (x, y) in enumerate(zip(X_held, y_held))
            )
            rows.append(
                InversionCell(
                    sigma=float(sigma),
                    n_votes=int(n_votes),
                    asr=asr,
                    accuracy=hits / len(y_held),
                    mean_queries=queries,
                    n_converged=converged,
                )
            )

    return InversionReport(config=_config_echo(config), baseline=baseline, rows=rows)


def _write_json(doc, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _tsv_cell(value) -> str:
    if value is None:
        return "--"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_recommendation_report(report: RecommendationReport, outdir) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(dataclasses.asdict(report), outdir / "report.json")
    _write_json(report.config, outdir / "resolved_config.json")

    header = [
        "model", "sigma", "n_votes", "alpha", "accuracy", "abstention_rate",
        "error_rate", "avg_radius", "n_positive_certified", "n_positive_predictions",
        "empirical_expansion", "empirical_expansion_binned",
        "avg_trajectory_radius", "n_trajectory_certified",
    ]
    lines = ["\t".join(header)]
    base_cells = [
        "base", "--", "--", "--", _tsv_cell(report.base_accuracy), "--", "--", "--",
        "--", str(report.base_n_positive), _tsv_cell(report.base_expansion),
        _tsv_cell(report.base_expansion_binned), "--", "--",
    ]
    lines.append("\t".join(base_cells))
    for row in report.rows:
        cells = [
            "smoothed", _tsv_cell(row.sigma), str(row.n_votes), _tsv_cell(row.alpha),
            _tsv_cell(row.accuracy), _tsv_cell(row.abstention_rate), _tsv_cell(row.error_rate),
            _tsv_cell(row.avg_radius), str(row.n_positive_certified),
            str(row.n_positive_predictions), _tsv_cell(row.empirical_expansion),
            _tsv_cell(row.empirical_expansion_binned), _tsv_cell(row.avg_trajectory_radius),
            str(row.n_trajectory_certified),
        ]
        lines.append("\t".join(cells))
    (outdir / "metrics.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    for name, bins in report.histograms.items():
        safe = name.replace("=", "_").replace(",", "_")
        rows = ["bin_lo\tcount"] + [f"{_tsv_cell(lo)}\t{count}" for lo, count in bins]
        (outdir / f"hist_{safe}.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_inversion_report(report: InversionReport, outdir) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(dataclasses.asdict(report), outdir / "report.json")
    _write_json(report.config, outdir / "resolved_config.json")

    lines = ["sigma\tn_votes\tasr\taccuracy\tmean_queries\tn_converged"]
    for cell in [report.baseline] + report.rows:
        lines.append(
            "\t".join([
                _tsv_cell(cell.sigma), str(cell.n_votes), _tsv_cell(cell.asr),
                _tsv_cell(cell.accuracy), _tsv_cell(cell.mean_queries), str(cell.n_converged),
            ])
        )
    (outdir / "asr_accuracy.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
