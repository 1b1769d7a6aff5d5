"""Randomized-smoothing certification repurposed as inference-time privacy.

A smoothed classifier's certified output-invariance radius doubles as an
indistinguishability guarantee: observing the prediction cannot separate
an input from anything inside the certified ball.  This package provides
the statistical primitives, a small dense classifier, the smoothed
classifier with exact binomial certification, attribute-expansion
analysis over a sensitive scalar, a label-only inversion attack with its
vote-defense, and the experiment harnesses tying them together.
"""

from .ape import (
    ApeGrid,
    IntervalSet,
    TrajectorySpec,
    baseline_inference_set,
    build_trajectory,
    certify_attribute_grid,
    empirical_expansion,
    empirical_expansion_binned,
    expanded_inference_set,
    write_point_report,
)
from .data import (
    InsuranceRecord,
    export_csv,
    featurize,
    generate_synthetic_insurance,
    ingest_csv,
    label_by_percentile,
)
from .harness import (
    InversionConfig,
    InversionReport,
    RecommendationConfig,
    RecommendationReport,
    run_ablation,
    run_inversion_experiment,
    run_recommendation_experiment,
    write_inversion_report,
    write_recommendation_report,
)
from .inversion import (
    AttackConfig,
    AttackResult,
    estimate_repulsion_direction,
    evaluate_asr,
    find_initial_point,
    run_attack,
    write_trace,
)
from .nn import (
    MlpModel,
    TrainConfig,
    batch_predictor,
    forward,
    forward_batch,
    load_model,
    loss_and_gradients,
    predict_batch,
    predict_label,
    save_model,
    train,
)
from .numerics import (
    RngStream,
    binom_two_sided_pvalue,
    clopper_pearson_lower,
    sample_gaussian_vector,
    std_normal_cdf,
    std_normal_inv_cdf,
)
from .smoothing import (
    ABSTAIN,
    Certificate,
    SmoothedOutcome,
    SmoothingParams,
    certify,
    certify_batch,
    make_vote_oracle,
    predict_smoothed,
    predict_smoothed_batch,
    radius_from_bounds,
    sample_votes,
    vote_label,
)

__version__ = "0.1.0"
