#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridfreq/dataset.hpp"
#include "gridfreq/features.hpp"
#include "gridfreq/nn.hpp"

namespace gridfreq::train {

struct TrainConfig {
    double lr = 1e-3;
    double dropout = 0.0;
    std::size_t n_units = 64;   ///< N_u
    std::size_t n_hidden = 3;   ///< N_h
    nn::Activation activation = nn::Activation::kTanh;
    std::size_t epochs = 100;
    std::size_t patience = 10;     ///< early-stopping patience [epochs]
    std::size_t batch_size = 256;  ///< intervals per gradient step
    std::uint64_t seed = 0;
    double t_max = 900.0;          ///< prediction horizon [s]
    unsigned threads = 1;

    /// Samples scored per interval: one per second over [0, t_max).
    std::size_t n_samples() const;
};

/// Time-independent literature estimates used as the ratio reference.
struct ReferenceParams {
    double tau = 120.0;   ///< [s]
    double kappa = 183.0; ///< [s]
    double D = 0.007;     ///< [s^-3/2]
    double q = 0.0042;    ///< [s^-2]
    double r = 9e-6;      ///< [s^-3]

    std::array<double, 5> as_array() const { return {tau, kappa, D, q, r}; }
};

/// Per-feature standardisation eta_k(x) = (x - mean_k)/std_k fitted on the
/// training split only; zero-variance features are dropped.
struct Normalizer {
    std::vector<double> mean;           ///< per kept feature
    std::vector<double> stddev;         ///< population convention, > 0
    std::vector<std::size_t> kept;      ///< indices into the raw feature vector
    std::vector<std::string> kept_names;
    std::vector<std::string> dropped_names;

    Eigen::VectorXd apply(std::span<const double> x) const;
    Eigen::MatrixXd apply_batch(std::span<const IntervalSample* const> batch) const;
};

struct Dataset {
    std::vector<IntervalSample> samples;
    std::vector<std::string> feature_names;
};

/// Builds interval samples from a feature table and a 1 Hz frequency
/// record: omega series of floor(t_max)+1 points, mu_omega0 = omega(t_i),
/// mu_theta0 = trailing 60 s trapezoid (0 with a flag when history is
/// missing). Intervals without full series coverage are skipped.
Dataset assemble_dataset(const features::FeatureTable& table,
                         const FrequencyRecord& record, double t_max);

/// (mu_omega0, mu_theta0) for the interval starting at sample offset
/// `pos` of `record`.
std::pair<double, double> estimate_initial_means(const FrequencyRecord& record,
                                                 std::size_t pos,
                                                 bool* fallback = nullptr);

/// Chronologically ordered disjoint index ranges: train earliest,
/// validation next, test last.
struct Splits {
    std::vector<std::size_t> train, validation, test;
};
Splits chronological_split(std::size_t n, double train_frac, double val_frac);

Normalizer fit_normalizer(const Dataset& dataset, std::span<const std::size_t> train_idx);

struct TrainedModel {
    nn::Weights weights;
    nn::ConstraintSpec spec;
    Normalizer normalizer;
    TrainConfig config;

    nn::ThetaVector predict(std::span<const double> x_raw) const;
};

struct EpochStats {
    double train_nll;  ///< mean per-interval NLL
    double val_nll;
};

struct TrainResult {
    TrainedModel model;           ///< best-validation weights
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;   ///< 0-based index into history
    double best_val_nll = 0.0;
};

/// Minimises the summed interval NLL with ADAM; keeps the best-validation
/// weights and stops after `patience` epochs without improvement.
/// Deterministic given (seed, config, dataset) regardless of thread count.
TrainResult train_model(const Dataset& dataset, const Splits& splits,
                        const TrainConfig& cfg,
                        const nn::ConstraintSpec& spec = nn::ConstraintSpec{});

struct EvalSummary {
    std::vector<double> per_interval;
    double median = 0.0, q25 = 0.0, q75 = 0.0;
};

/// Per-interval NLL over the first t_max seconds (one sample per second).
EvalSummary evaluate(const TrainedModel& model, const Dataset& dataset,
                     std::span<const std::size_t> idx, double t_max);

/// Linear-interpolation quantile of a copy of `values`.
double quantile(std::vector<double> values, double p);

struct ParamSeries {
    std::vector<std::int64_t> timestamps;
    std::vector<nn::ThetaVector> theta;
};

ParamSeries infer_params(const TrainedModel& model, const Dataset& dataset,
                         std::span<const std::size_t> idx);

/// Mean and quartiles per time-of-day slot (96 slots of 15 min) for each
/// of the eight parameters.
struct DailyAggregate {
    std::array<std::vector<double>, nn::kThetaDim> mean, q25, q75;  ///< size 96
};
DailyAggregate daily_aggregate(const ParamSeries& series);

/// Ratio of the time-averaged |theta_j| to the reference for the five
/// system parameters (tau, kappa, D, q, r).
std::array<double, 5> reference_ratio(const ParamSeries& series,
                                      const ReferenceParams& ref);

struct HpTrial {
    TrainConfig config;
    double val_nll = 0.0;
};

struct SearchResult {
    TrainConfig best;
    std::vector<HpTrial> leaderboard;  ///< ascending by validation NLL
};

/// Random search without replacement over the 144-point hyperparameter
/// grid (lr x dropout x N_u x N_h x activation); remaining fields are
/// taken from `base`. n_trials is clamped to the grid size.
SearchResult random_search(const Dataset& dataset, const Splits& splits,
                           const TrainConfig& base, std::size_t n_trials,
                           std::uint64_t seed);

/// The hyperparameter grid sampled by random_search.
std::vector<TrainConfig> hyperparameter_grid(const TrainConfig& base);

struct ScalingVariant {
    std::string name;
    nn::ConstraintSpec spec;
};

/// "standard", "none" and the 16 combinations of the documented scaling
/// variations (s5 in {1000,100}, s6 in {0.01,0.1}, s7 in {1e-3,1e-2},
/// s8 in {1e-5,1e-6}).
std::vector<ScalingVariant> scaling_variants();

struct SweepRow {
    std::string variant;
    std::string parameter;       ///< tau, kappa, D, q, r
    double mean_ratio = 0.0;     ///< ensemble mean over seeds
    double min_ratio = 0.0;
    double max_ratio = 0.0;
};

/// Trains n_seeds models per variant and reports the spread of the
/// time-averaged parameter ratios against `reference` (absolute values).
std::vector<SweepRow> scaling_sweep(const Dataset& dataset, const Splits& splits,
                                    std::span<const ScalingVariant> variants,
                                    std::size_t n_seeds, const TrainConfig& base,
                                    const ReferenceParams& reference);

}  // namespace gridfreq::train
