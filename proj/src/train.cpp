#include "gridfreq/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gridfreq/errors.hpp"

namespace gridfreq::train {

std::size_t TrainConfig::n_samples() const {
    const auto n = static_cast<std::size_t>(std::floor(t_max));
    return std::max<std::size_t>(1, n);
}

Eigen::VectorXd Normalizer::apply(std::span<const double> x) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) {
        if (kept[k] >= x.size()) {
            throw DimensionMismatch("feature vector shorter than normalizer");
        }
        out[static_cast<Eigen::Index>(k)] = (x[kept[k]] - mean[k]) / stddev[k];
    }
    return out;
}

Eigen::MatrixXd Normalizer::apply_batch(
    std::span<const IntervalSample* const> batch) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(kept.size()),
                        static_cast<Eigen::Index>(batch.size()));
    for (std::size_t j = 0; j < batch.size(); ++j) {
        out.col(static_cast<Eigen::Index>(j)) = apply(batch[j]->features);
    }
    return out;
}

std::pair<double, double> estimate_initial_means(const FrequencyRecord& record,
                                                 std::size_t pos, bool* fallback) {
    if (pos >= record.omega.size()) {
        throw TOutOfRange("interval start beyond the frequency record");
    }
    const double mu_omega0 = record.omega[pos];
    if (pos < 60) {
        if (fallback) *fallback = true;
        return {mu_omega0, 0.0};
    }
    if (fallback) *fallback = false;
    double integral = 0.0;
    for (std::size_t k = pos - 60; k < pos; ++k) {
        integral += 0.5 * (record.omega[k] + record.omega[k + 1]);
    }
    return {mu_omega0, integral};
}

Dataset assemble_dataset(const features::FeatureTable& table,
                         const FrequencyRecord& record, double t_max) {
    if (!(t_max > 0.0)) {
        throw NonPositiveInput("assemble_dataset requires t_max > 0");
    }
    const auto series_len = static_cast<std::size_t>(std::floor(t_max)) + 1;
    Dataset out;
    for (const features::ColumnMeta& c : table.columns) {
        out.feature_names.push_back(c.name);
    }
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        const std::int64_t offset = table.timestamps[i] - record.start_ts;
        if (offset < 0) continue;
        const auto pos = static_cast<std::size_t>(offset);
        if (pos + series_len > record.omega.size()) continue;
        IntervalSample sample;
        sample.index = out.samples.size();
        sample.start_ts = table.timestamps[i];
        sample.features = table.row(i);
        sample.omega.assign(record.omega.begin() + static_cast<std::ptrdiff_t>(pos),
                            record.omega.begin() +
                                static_cast<std::ptrdiff_t>(pos + series_len));
        auto [mu_omega0, mu_theta0] =
            estimate_initial_means(record, pos, &sample.theta0_fallback);
        sample.mu_omega0 = mu_omega0;
        sample.mu_theta0 = mu_theta0;
        out.samples.push_back(std::move(sample));
    }
    return out;
}

Splits chronological_split(std::size_t n, double train_frac, double val_frac) {
    if (!(train_frac > 0.0) || !(val_frac >= 0.0) || train_frac + val_frac >= 1.0) {
        throw ConfigError("split fractions must satisfy 0 < train, train+val < 1");
    }
    const auto n_train = static_cast<std::size_t>(std::floor(train_frac * n));
    const auto n_val = static_cast<std::size_t>(std::floor(val_frac * n));
    Splits s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train) {
            s.train.push_back(i);
        } else if (i < n_train + n_val) {
            s.validation.push_back(i);
        } else {
            s.test.push_back(i);
        }
    }
    return s;
}

Normalizer fit_normalizer(const Dataset& dataset,
                          std::span<const std::size_t> train_idx) {
    if (train_idx.size() < 2) {
        throw InsufficientData("fit_normalizer requires at least two samples");
    }
    const std::size_t n_features = dataset.samples[train_idx[0]].features.size();
    std::vector<double> sum(n_features, 0.0), sum_sq(n_features, 0.0);
    for (std::size_t idx : train_idx) {
        const auto& x = dataset.samples[idx].features;
        if (x.size() != n_features) {
            throw DimensionMismatch("inconsistent feature dimension across samples");
        }
        for (std::size_t k = 0; k < n_features; ++k) {
            sum[k] += x[k];
            sum_sq[k] += x[k] * x[k];
        }
    }
    const double n = static_cast<double>(train_idx.size());
    Normalizer norm;
    for (std::size_t k = 0; k < n_features; ++k) {
        const double mean = sum[k] / n;
        const double var = std::max(0.0, sum_sq[k] / n - mean * mean);
        const double sd = std::sqrt(var);
        const std::string name = k < dataset.feature_names.size()
                                     ? dataset.feature_names[k]
                                     : "feature_" + std::to_string(k);
        if (sd < 1e-12 * std::max(1.0, std::abs(mean))) {
            norm.dropped_names.push_back(name);
            continue;
        }
        norm.kept.push_back(k);
        norm.kept_names.push_back(name);
        norm.mean.push_back(mean);
        norm.stddev.push_back(sd);
    }
    if (norm.kept.empty()) {
        throw ZeroVarianceFeature("all features have zero variance");
    }
    return norm;
}

nn::ThetaVector TrainedModel::predict(std::span<const double> x_raw) const {
    const Eigen::VectorXd x = normalizer.apply(x_raw);
    return nn::constrain(nn::forward(weights, x), spec);
}

namespace {

double mean_split_nll(const TrainedModel& model, const Dataset& dataset,
                      std::span<const std::size_t> idx, std::size_t n_samples) {
    double sum = 0.0;
    for (std::size_t i : idx) {
        const IntervalSample& sample = dataset.samples[i];
        const nn::ThetaVector theta = model.predict(sample.features);
        sum += nn::interval_nll(theta, sample, n_samples);
    }
    return sum / static_cast<double>(idx.size());
}

}  // namespace

TrainResult train_model(const Dataset& dataset, const Splits& splits,
                        const TrainConfig& cfg, const nn::ConstraintSpec& spec) {
    if (splits.train.empty() || splits.validation.empty()) {
        throw InsufficientData("train_model requires train and validation splits");
    }
    spec.validate();
    TrainResult result;
    result.model.spec = spec;
    result.model.config = cfg;
    result.model.normalizer = fit_normalizer(dataset, splits.train);

    nn::MlpConfig mlp;
    mlp.input_dim = result.model.normalizer.kept.size();
    mlp.n_hidden_layers = cfg.n_hidden;
    mlp.units_per_layer = cfg.n_units;
    mlp.activation = cfg.activation;
    mlp.dropout_rate = cfg.dropout;
    result.model.weights = nn::glorot_init(mlp, cfg.seed);

    const std::size_t n_samples = cfg.n_samples();
    std::vector<const IntervalSample*> val_batch;
    for (std::size_t i : splits.validation) val_batch.push_back(&dataset.samples[i]);

    nn::AdamState adam = nn::AdamState::zeros_like(result.model.weights);
    rng::SplitMix64 shuffle_gen = rng::SplitMix64::substream(cfg.seed, 0xface);
    std::vector<std::size_t> order(splits.train.begin(), splits.train.end());

    nn::Weights best = result.model.weights;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0, since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the run generator; deterministic per seed.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = shuffle_gen.next_below(i);
            std::swap(order[i - 1], order[j]);
        }
        double train_loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            std::vector<const IntervalSample*> batch;
            batch.reserve(end - begin);
            for (std::size_t k = begin; k < end; ++k) {
                batch.push_back(&dataset.samples[order[k]]);
            }
            const Eigen::MatrixXd X = result.model.normalizer.apply_batch(batch);
            nn::GradientOptions opts;
            opts.n_samples = n_samples;
            opts.training = true;
            opts.dropout_seed = rng::SplitMix64::substream(cfg.seed, epoch).next_u64();
            opts.threads = cfg.threads;
            const nn::BatchGradient g =
                nn::nll_gradient(result.model.weights, spec, X, batch, opts);
            nn::adam_step(result.model.weights, g.grads, adam, cfg.lr);
            train_loss_sum += g.mean_nll;
            ++n_batches;
        }
        const double val_nll =
            mean_split_nll(result.model, dataset, splits.validation, n_samples);
        if (!std::isfinite(val_nll)) {
            throw NonFiniteLoss("validation NLL is not finite at epoch " +
                                std::to_string(epoch));
        }
        result.history.push_back(
            EpochStats{train_loss_sum / static_cast<double>(n_batches), val_nll});
        if (val_nll < best_val) {
            best_val = val_nll;
            best = result.model.weights;
            best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= cfg.patience) {
                break;
            }
        }
    }
    result.model.weights = std::move(best);
    result.best_epoch = best_epoch;
    result.best_val_nll = best_val;
    return result;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) {
        throw EmptySeries("quantile of an empty set");
    }
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * values[lo] + w * values[hi];
}

EvalSummary evaluate(const TrainedModel& model, const Dataset& dataset,
                     std::span<const std::size_t> idx, double t_max) {
    const auto n_samples =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(t_max)));
    EvalSummary out;
    out.per_interval.reserve(idx.size());
    for (std::size_t i : idx) {
        const IntervalSample& sample = dataset.samples[i];
        const nn::ThetaVector theta = model.predict(sample.features);
        out.per_interval.push_back(nn::interval_nll(theta, sample, n_samples));
    }
    out.median = quantile(out.per_interval, 0.5);
    out.q25 = quantile(out.per_interval, 0.25);
    out.q75 = quantile(out.per_interval, 0.75);
    return out;
}

ParamSeries infer_params(const TrainedModel& model, const Dataset& dataset,
                         std::span<const std::size_t> idx) {
    ParamSeries out;
    out.timestamps.reserve(idx.size());
    out.theta.reserve(idx.size());
    for (std::size_t i : idx) {
        const IntervalSample& sample = dataset.samples[i];
        out.timestamps.push_back(sample.start_ts);
        out.theta.push_back(model.predict(sample.features));
    }
    return out;
}

DailyAggregate daily_aggregate(const ParamSeries& series) {
    DailyAggregate agg;
    std::array<std::array<std::vector<double>, 96>, nn::kThetaDim> buckets;
    for (std::size_t i = 0; i < series.theta.size(); ++i) {
        const std::int64_t sod = ((series.timestamps[i] % 86400) + 86400) % 86400;
        const auto slot = static_cast<std::size_t>(sod / 900);
        for (std::size_t j = 0; j < nn::kThetaDim; ++j) {
            buckets[j][slot].push_back(series.theta[i][j]);
        }
    }
    for (std::size_t j = 0; j < nn::kThetaDim; ++j) {
        agg.mean[j].assign(96, std::numeric_limits<double>::quiet_NaN());
        agg.q25[j].assign(96, std::numeric_limits<double>::quiet_NaN());
        agg.q75[j].assign(96, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t slot = 0; slot < 96; ++slot) {
            const auto& vals = buckets[j][slot];
            if (vals.empty()) continue;
            agg.mean[j][slot] = std::accumulate(vals.begin(), vals.end(), 0.0) /
                                static_cast<double>(vals.size());
            agg.q25[j][slot] = quantile(vals, 0.25);
            agg.q75[j][slot] = quantile(vals, 0.75);
        }
    }
    return agg;
}

std::array<double, 5> reference_ratio(const ParamSeries& series,
                                      const ReferenceParams& ref) {
    if (series.theta.empty()) {
        throw EmptySeries("reference_ratio of an empty series");
    }
    const std::array<double, 5> ref_abs = ref.as_array();
    std::array<double, 5> mean_abs{};
    for (const nn::ThetaVector& theta : series.theta) {
        for (std::size_t j = 0; j < 5; ++j) {
            mean_abs[j] += std::abs(theta[j + 3]);  // tau..r occupy slots 3..7
        }
    }
    std::array<double, 5> out{};
    for (std::size_t j = 0; j < 5; ++j) {
        mean_abs[j] /= static_cast<double>(series.theta.size());
        out[j] = mean_abs[j] / std::abs(ref_abs[j]);
    }
    return out;
}

std::vector<TrainConfig> hyperparameter_grid(const TrainConfig& base) {
    const double lrs[] = {1e-4, 1e-3, 1e-2};
    const double dropouts[] = {0.0, 0.1, 0.2, 0.3};
    const std::size_t units[] = {64, 128};
    const std::size_t hidden[] = {3, 5, 7};
    const nn::Activation acts[] = {nn::Activation::kSigmoid, nn::Activation::kTanh};
    std::vector<TrainConfig> grid;
    for (double lr : lrs) {
        for (double dropout : dropouts) {
            for (std::size_t n_units : units) {
                for (std::size_t n_hidden : hidden) {
                    for (nn::Activation act : acts) {
                        TrainConfig cfg = base;
                        cfg.lr = lr;
                        cfg.dropout = dropout;
                        cfg.n_units = n_units;
                        cfg.n_hidden = n_hidden;
                        cfg.activation = act;
                        grid.push_back(cfg);
                    }
                }
            }
        }
    }
    return grid;
}

SearchResult random_search(const Dataset& dataset, const Splits& splits,
                           const TrainConfig& base, std::size_t n_trials,
                           std::uint64_t seed) {
    if (n_trials < 1) {
        throw ConfigError("random_search requires n_trials >= 1");
    }
    std::vector<TrainConfig> grid = hyperparameter_grid(base);
    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), 0);
    rng::SplitMix64 gen(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = gen.next_below(i);
        std::swap(order[i - 1], order[j]);
    }
    const std::size_t n = std::min(n_trials, grid.size());

    SearchResult out;
    for (std::size_t trial = 0; trial < n; ++trial) {
        TrainConfig cfg = grid[order[trial]];
        cfg.seed = rng::SplitMix64::substream(seed, trial).next_u64();
        const TrainResult res = train_model(dataset, splits, cfg);
        out.leaderboard.push_back(HpTrial{cfg, res.best_val_nll});
    }
    std::stable_sort(out.leaderboard.begin(), out.leaderboard.end(),
                     [](const HpTrial& a, const HpTrial& b) {
                         return a.val_nll < b.val_nll;
                     });
    out.best = out.leaderboard.front().config;
    return out;
}

std::vector<ScalingVariant> scaling_variants() {
    std::vector<ScalingVariant> out;
    out.push_back({"standard", nn::ConstraintSpec{}});
    out.push_back({"none", nn::ConstraintSpec::none()});
    const double s5s[] = {1000.0, 100.0};
    const double s6s[] = {0.01, 0.1};
    const double s7s[] = {1e-3, 1e-2};
    const double s8s[] = {1e-5, 1e-6};
    for (double s5 : s5s) {
        for (double s6 : s6s) {
            for (double s7 : s7s) {
                for (double s8 : s8s) {
                    nn::ConstraintSpec spec;  // s1 = 0.01, s3 = 0.1 fixed
                    spec.s5 = s5;
                    spec.s6 = s6;
                    spec.s7 = s7;
                    spec.s8 = s8;
                    char name[64];
                    std::snprintf(name, sizeof name, "s5=%g_s6=%g_s7=%g_s8=%g", s5, s6,
                                  s7, s8);
                    out.push_back({name, spec});
                }
            }
        }
    }
    return out;
}

std::vector<SweepRow> scaling_sweep(const Dataset& dataset, const Splits& splits,
                                    std::span<const ScalingVariant> variants,
                                    std::size_t n_seeds, const TrainConfig& base,
                                    const ReferenceParams& reference) {
    if (n_seeds < 1) {
        throw ConfigError("scaling_sweep requires n_seeds >= 1");
    }
    const char* param_names[] = {"tau", "kappa", "D", "q", "r"};
    std::vector<SweepRow> rows;
    for (const ScalingVariant& variant : variants) {
        std::array<double, 5> sum{}, lo{}, hi{};
        lo.fill(std::numeric_limits<double>::infinity());
        hi.fill(-std::numeric_limits<double>::infinity());
        for (std::size_t s = 0; s < n_seeds; ++s) {
            TrainConfig cfg = base;
            cfg.seed = rng::SplitMix64::substream(base.seed, 7000 + s).next_u64();
            const TrainResult res = train_model(dataset, splits, cfg, variant.spec);
            const ParamSeries series =
                infer_params(res.model, dataset, splits.validation);
            const std::array<double, 5> ratio = reference_ratio(series, reference);
            for (std::size_t j = 0; j < 5; ++j) {
                sum[j] += ratio[j];
                lo[j] = std::min(lo[j], ratio[j]);
                hi[j] = std::max(hi[j], ratio[j]);
            }
        }
        for (std::size_t j = 0; j < 5; ++j) {
            rows.push_back(SweepRow{variant.name, param_names[j],
                                    sum[j] / static_cast<double>(n_seeds), lo[j],
                                    hi[j]});
        }
    }
    return rows;
}

}  // namespace gridfreq::train
