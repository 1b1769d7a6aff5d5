"""Tests for the experiment pipelines at small, fast scales."""

import json

import numpy as np
import pytest

from privsmooth.harness import (
    InversionConfig,
    RecommendationConfig,
    run_ablation,
    run_inversion_experiment,
    run_recommendation_experiment,
    write_inversion_report,
    write_recommendation_report,
)


def small_rec_config(**kwargs):
    defaults = dict(
        n_records=600,
        sigmas=(1.0, 2.0),
        n_votes=60,
        n0_votes=20,
        alpha=0.05,
        trajectory_count=40,
        max_trajectory_contexts=8,
        certify_trajectory_contexts=3,
        epochs=12,
        seed=5,
    )
    defaults.update(kwargs)
    return RecommendationConfig(**defaults)


def small_inv_config(**kwargs):
    defaults = dict(
        n_classes=4,
        dim=6,
        train_per_class=40,
        heldout_per_class=10,
        target_hidden=16,
        evaluator_hidden=12,
        epochs=10,
        sigmas=(0.5, 2.0),
        vote_counts=(5,),
        n_targets=6,
        probe_count=12,
        probe_radius=1.5,
        step_size=0.5,
        max_iters=12,
        init_budget=100,
        init_halfwidth=0.5,
        seed=3,
    )
    defaults.update(kwargs)
    return InversionConfig(**defaults)


class TestRecommendationExperiment:
    @pytest.fixture(scope="class")
    @staticmethod
    def report():
        return run_recommendation_experiment(small_rec_config())

    def test_rate_coherence(self, report):
        # accuracy + abstention + error computed from the same counts
        for row in report.rows:
            assert row.accuracy + row.abstention_rate + row.error_rate == pytest.approx(1.0)

    def test_histogram_conservation(self, report):
        for row in report.rows:
            bins = report.histograms[f"sigma={row.sigma:g}"]
            assert sum(count for _, count in bins) == row.n_positive_predictions

    def test_base_histogram_conservation(self, report):
        bins = report.histograms["base"]
        assert sum(count for _, count in bins) == report.base_n_positive

    def test_threshold_near_generator_percentile(self, report):
        assert 31.0 <= report.threshold_b <= 36.0

    def test_rows_echo_cell_parameters(self, report):
        assert [row.sigma for row in report.rows] == [1.0, 2.0]
        assert all(row.n_votes == 60 and row.alpha == 0.05 for row in report.rows)

    def test_config_echo_contains_defaults(self, report):
        assert report.config["n_votes"] == 60
        assert report.config["max_trajectory_contexts"] == 8

    def test_determinism(self, report):
        again = run_recommendation_experiment(small_rec_config())
        assert again == report

    def test_empty_sigma_list_gives_base_only(self):
        report = run_recommendation_experiment(small_rec_config(sigmas=()))
        assert report.rows == []
        assert set(report.histograms) == {"base"}
        assert report.base_accuracy > 0.9

    def test_masked_penalty_keeps_sensitive_column_dominant(self):
        from privsmooth.harness import _prepare_recommendation

        task = _prepare_recommendation(small_rec_config(epochs=25))
        w1 = task.model.w1
        masked = np.delete(np.abs(w1), task.bmi_col, axis=1).max()
        sensitive = np.abs(w1[:, task.bmi_col]).max()
        assert masked < sensitive


class TestAblation:
    def test_cells_swept_at_fixed_sigma(self):
        config = small_rec_config(
            ablation_sigma=2.0, ablation_cells=((60, 0.05), (20, 0.05), (60, 0.5))
        )
        report = run_ablation(config)
        assert [(r.n_votes, r.alpha) for r in report.rows] == [(60, 0.05), (20, 0.05), (60, 0.5)]
        assert all(r.sigma == 2.0 for r in report.rows)

    def test_single_cell(self):
        report = run_ablation(small_rec_config(ablation_cells=((30, 0.1),)))
        assert len(report.rows) == 1


class TestInversionExperiment:
    @pytest.fixture(scope="class")
    @staticmethod
    def report():
        return run_inversion_experiment(small_inv_config())

    def test_rates_in_unit_interval(self, report):
        for cell in [report.baseline] + report.rows:
            assert 0.0 <= cell.asr <= 1.0
            assert 0.0 <= cell.accuracy <= 1.0

    def test_baseline_is_undefended(self, report):
        assert report.baseline.sigma == 0.0
        assert report.baseline.n_votes == 1

    def test_grid_covers_config(self, report):
        assert [(r.sigma, r.n_votes) for r in report.rows] == [(0.5, 5), (2.0, 5)]

    def test_determinism(self, report):
        again = run_inversion_experiment(small_inv_config())
        assert again == report

    def test_single_vote_oracle_is_noisy_base(self):
        # N=1 vote reduces to a single noisy evaluation per query
        report = run_inversion_experiment(small_inv_config(vote_counts=(1,), sigmas=(0.5,)))
        assert len(report.rows) == 1
        assert report.rows[0].n_votes == 1

    def test_zero_noise_cells_equal_baseline(self):
        # attack seeds are paired across cells, so zero noise replays exactly
        report = run_inversion_experiment(small_inv_config(sigmas=(0.0,), vote_counts=(5,)))
        cell = report.rows[0]
        assert cell.asr == report.baseline.asr
        assert cell.accuracy == report.baseline.accuracy
        assert cell.mean_queries == report.baseline.mean_queries


class TestReportWriters:
    def test_recommendation_files_and_idempotence(self, tmp_path):
        report = run_recommendation_experiment(small_rec_config(sigmas=(1.0,)))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        write_recommendation_report(report, out1)
        write_recommendation_report(report, out2)
        names = sorted(p.name for p in out1.iterdir())
        assert names == ["hist_base.tsv", "hist_sigma_1.tsv", "metrics.tsv",
                         "report.json", "resolved_config.json"]
        for name in names:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        doc = json.loads((out1 / "report.json").read_text())
        assert doc["threshold_b"] == report.threshold_b
        table = (out1 / "metrics.tsv").read_text().strip().split("\n")
        assert len(table) == 1 + 1 + len(report.rows)  # header + base + rows
        assert table[1].startswith("base\t")

    def test_inversion_files(self, tmp_path):
        report = run_inversion_experiment(small_inv_config())
        write_inversion_report(report, tmp_path / "inv")
        names = sorted(p.name for p in (tmp_path / "inv").iterdir())
        assert names == ["asr_accuracy.tsv", "report.json", "resolved_config.json"]
        lines = (tmp_path / "inv" / "asr_accuracy.tsv").read_text().strip().split("\n")
        assert len(lines) == 1 + 1 + len(report.rows)
        assert lines[1].split("\t")[0] == "0.0"  # baseline row first
