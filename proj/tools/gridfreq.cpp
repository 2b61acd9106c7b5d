// gridfreq: probabilistic power-grid frequency modelling CLI.
//
// Subcommands: ingest, synth-data, train, tune, predict, identify, explain,
// synthesize, benchmark, sweep-scaling. Every run writes a manifest.json
// (resolved config, config hash, seed, input digests, outputs) next to its
// outputs; reruns with identical inputs, config and seed are byte-identical.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
// failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "gridfreq/baselines.hpp"
#include "gridfreq/errors.hpp"
#include "gridfreq/explain.hpp"
#include "gridfreq/features.hpp"
#include "gridfreq/io/bundle.hpp"
#include "gridfreq/io/csv.hpp"
#include "gridfreq/moments.hpp"
#include "gridfreq/nn.hpp"
#include "gridfreq/simulate.hpp"
#include "gridfreq/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gridfreq;

namespace {

struct ManifestBuilder {
    io::RunManifest manifest;
    fs::path out_dir;

    void input(const fs::path& path) {
        manifest.inputs[path.string()] = io::file_digest(path);
    }
    void output(const fs::path& path) { manifest.outputs.push_back(path.string()); }
    void write() { io::write_manifest(manifest, out_dir / "manifest.json"); }
};

ManifestBuilder make_manifest(const std::string& command, const json& config,
                              std::uint64_t seed, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    ManifestBuilder mb;
    mb.manifest.command = command;
    mb.manifest.config = config;
    mb.manifest.seed = seed;
    mb.out_dir = out_dir;
    return mb;
}

// Values from --config <file.json> become option defaults; explicit flags win.
json peek_config_file(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            std::ifstream file(argv[i + 1]);
            if (!file) {
                throw ConfigError(std::string("cannot open config file ") + argv[i + 1]);
            }
            json doc;
            try {
                file >> doc;
            } catch (const std::exception& e) {
                throw ConfigError(std::string("malformed config file: ") + e.what());
            }
            return doc;
        }
    }
    return json::object();
}

template <typename T>
void maybe_override(const json& cfg, const char* key, T& value) {
    if (cfg.contains(key)) {
        value = cfg.at(key).get<T>();
    }
}

std::string format_cell(double v) { return io::format_double(v); }

void write_param_series_csv(const train::ParamSeries& series, const fs::path& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot open " + path.string() + " for writing");
    file << "timestamp,tau,kappa,D,q,r,sigma_theta0,sigma_omega0,cov0\n";
    for (std::size_t i = 0; i < series.theta.size(); ++i) {
        const nn::ThetaVector& t = series.theta[i];
        file << io::format_timestamp(series.timestamps[i]) << ','
             << format_cell(t.tau) << ',' << format_cell(t.kappa) << ','
             << format_cell(t.D) << ',' << format_cell(t.q) << ','
             << format_cell(t.r) << ',' << format_cell(t.sigma_theta0) << ','
             << format_cell(t.sigma_omega0) << ',' << format_cell(t.cov0) << '\n';
    }
}

train::ParamSeries read_param_series_csv(const fs::path& path) {
    std::ifstream file(path);
    if (!file) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(file, line) ||
        line != "timestamp,tau,kappa,D,q,r,sigma_theta0,sigma_omega0,cov0") {
        throw DataError("unexpected parameter series header in " + path.string());
    }
    train::ParamSeries series;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t pos = 0;
        while (true) {
            const std::size_t next = line.find(',', pos);
            cells.push_back(line.substr(pos, next == std::string::npos
                                                 ? std::string::npos
                                                 : next - pos));
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (cells.size() != 9) throw DataError("ragged parameter series row");
        series.timestamps.push_back(io::parse_timestamp(cells[0]));
        nn::ThetaVector t{};
        t.tau = io::parse_double(cells[1]);
        t.kappa = io::parse_double(cells[2]);
        t.D = io::parse_double(cells[3]);
        t.q = io::parse_double(cells[4]);
        t.r = io::parse_double(cells[5]);
        t.sigma_theta0 = io::parse_double(cells[6]);
        t.sigma_omega0 = io::parse_double(cells[7]);
        t.cov0 = io::parse_double(cells[8]);
        series.theta.push_back(t);
    }
    return series;
}

struct LoadedData {
    features::FeatureTable table;
    FrequencyRecord record;
    train::Dataset dataset;
};

// Shared ingestion path for model-facing commands: feature CSV (+ optional
// manifest for column metadata), day-ahead filter, 1 Hz frequency CSV.
LoadedData load_dataset(const fs::path& features_csv, const fs::path& manifest_json,
                        const fs::path& frequency_csv, bool day_ahead_only,
                        double t_max, ManifestBuilder& mb) {
    LoadedData data;
    data.table = io::read_feature_csv(features_csv);
    mb.input(features_csv);
    if (!manifest_json.empty()) {
        io::apply_feature_manifest(data.table, manifest_json);
        mb.input(manifest_json);
    }
    if (day_ahead_only) {
        const auto cols = data.table.columns_with(features::Availability::kDayAhead);
        if (cols.empty()) {
            throw DataError("--day-ahead-only selected but no day-ahead columns found");
        }
        data.table = data.table.select(cols);
    }
    data.record = io::read_frequency_csv(frequency_csv);
    mb.input(frequency_csv);
    data.dataset = train::assemble_dataset(data.table, data.record, t_max);
    if (data.dataset.samples.empty()) {
        throw DataError("no complete intervals: feature table and frequency record "
                        "do not overlap");
    }
    return data;
}

std::span<const std::size_t> split_view(const train::Splits& splits,
                                        const std::string& name,
                                        std::vector<std::size_t>& all_storage,
                                        std::size_t n) {
    if (name == "train") return splits.train;
    if (name == "validation") return splits.validation;
    if (name == "test") return splits.test;
    if (name == "all") {
        all_storage.resize(n);
        for (std::size_t i = 0; i < n; ++i) all_storage[i] = i;
        return all_storage;
    }
    throw ConfigError("unknown split: " + name);
}

void write_metrics_json(const fs::path& path, const train::EvalSummary& summary,
                        double t_max, const std::string& split) {
    json doc{{"median_nll", summary.median},
             {"q25_nll", summary.q25},
             {"q75_nll", summary.q75},
             {"t_max", t_max},
             {"split", split},
             {"n_intervals", summary.per_interval.size()}};
    std::ofstream file(path);
    file << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------- commands

int cmd_synth_data(const fs::path& out, std::uint64_t seed, std::size_t days) {
    json config{{"seed", seed}, {"days", days}};
    ManifestBuilder mb = make_manifest("synth-data", config, seed, out);
    const features::SynthDataset ds = features::synth_dataset(seed, days);

    io::write_feature_csv(ds.table, out / "features.csv");
    mb.output(out / "features.csv");
    io::write_feature_manifest(ds.table, out / "feature_manifest.json");
    mb.output(out / "feature_manifest.json");
    io::write_frequency_csv(ds.freq, out / "frequency.csv");
    mb.output(out / "frequency.csv");
    train::ParamSeries truth;
    truth.timestamps = ds.table.timestamps;
    truth.theta = ds.truth;
    write_param_series_csv(truth, out / "truth.csv");
    mb.output(out / "truth.csv");
    mb.write();
    return 0;
}

int cmd_ingest(const fs::path& sources_path, const fs::path& out) {
    std::ifstream sources_file(sources_path);
    if (!sources_file) throw DataError("cannot open " + sources_path.string());
    json sources;
    sources_file >> sources;

    json config{{"sources", sources_path.string()}};
    ManifestBuilder mb = make_manifest("ingest", config, 0, out);
    mb.input(sources_path);

    std::map<std::string, std::vector<features::RawSeries>> by_country;
    for (const json& entry : sources.at("files")) {
        const fs::path path = entry.at("path").get<std::string>();
        const std::string country = entry.at("country").get<std::string>();
        mb.input(path);
        const features::FeatureTable raw = io::read_feature_csv(path);
        if (raw.n_rows() < 2) {
            throw DataError("source file needs at least two rows: " + path.string());
        }
        const std::int64_t step = raw.timestamps[1] - raw.timestamps[0];
        int resolution = 0;
        if (step == 900) {
            resolution = 15;
        } else if (step == 3600) {
            resolution = 60;
        } else {
            throw IrregularTimestamps("unsupported native resolution (" +
                                      std::to_string(step) + " s) in " + path.string());
        }
        const json& columns = entry.at("columns");
        for (std::size_t c = 0; c < raw.n_cols(); ++c) {
            const std::string& name = raw.columns[c].name;
            if (!columns.contains(name)) continue;
            features::RawSeries series;
            series.name = name;
            series.country = country;
            series.kind =
                features::kind_from_name(columns.at(name).at("kind").get<std::string>());
            series.availability = features::availability_from_name(
                columns.at(name).at("availability").get<std::string>());
            series.resolution_minutes = resolution;
            series.timestamps = raw.timestamps;
            series.values = raw.data[c];
            by_country[country].push_back(features::upsample(series));
        }
    }
    if (by_country.empty()) {
        throw DataError("no series matched the sources manifest");
    }

    std::vector<features::FeatureTable> tables;
    for (auto& [country, series] : by_country) {
        features::FeatureTable table = features::make_table(series);
        features::impute(table);
        std::vector<std::string> warnings;
        table = features::engineer(table, &warnings);
        for (const std::string& w : warnings) {
            std::cerr << "warning: " << w << '\n';
        }
        tables.push_back(std::move(table));
    }
    features::FeatureTable area = features::aggregate_area(tables);
    features::add_time_encodings(area);

    io::write_feature_csv(area, out / "features.csv");
    mb.output(out / "features.csv");
    io::write_feature_manifest(area, out / "feature_manifest.json");
    mb.output(out / "feature_manifest.json");
    mb.write();
    return 0;
}

struct TrainFlags {
    fs::path features, manifest, frequency, out;
    train::TrainConfig cfg;
    nn::ConstraintSpec spec;
    double train_frac = 0.7, val_frac = 0.15;
    bool day_ahead_only = false;
};

json train_flags_to_json(const TrainFlags& f) {
    return json{{"features", f.features.string()},
                {"frequency", f.frequency.string()},
                {"train_config", io::train_config_to_json(f.cfg)},
                {"constraint_spec", io::constraint_spec_to_json(f.spec)},
                {"train_frac", f.train_frac},
                {"val_frac", f.val_frac},
                {"day_ahead_only", f.day_ahead_only}};
}

int cmd_train(const TrainFlags& flags) {
    ManifestBuilder mb =
        make_manifest("train", train_flags_to_json(flags), flags.cfg.seed, flags.out);
    LoadedData data = load_dataset(flags.features, flags.manifest, flags.frequency,
                                   flags.day_ahead_only, flags.cfg.t_max, mb);
    const train::Splits splits = train::chronological_split(
        data.dataset.samples.size(), flags.train_frac, flags.val_frac);
    const train::TrainResult result =
        train::train_model(data.dataset, splits, flags.cfg, flags.spec);

    io::save_model(flags.out, result.model, result.history);
    for (const char* name : {"weights.json", "normalizer.json", "config.json",
                             "history.json"}) {
        mb.output(flags.out / name);
    }
    // dataset protocol: how predict/identify must re-assemble the data
    json dataset_doc{{"feature_names", data.dataset.feature_names},
                     {"train_frac", flags.train_frac},
                     {"val_frac", flags.val_frac},
                     {"day_ahead_only", flags.day_ahead_only},
                     {"t_max", flags.cfg.t_max},
                     {"best_epoch", result.best_epoch},
                     {"best_val_nll", result.best_val_nll}};
    std::ofstream(flags.out / "dataset.json") << dataset_doc.dump(2) << '\n';
    mb.output(flags.out / "dataset.json");
    mb.write();
    std::cerr << "trained " << result.history.size() << " epochs, best validation NLL "
              << result.best_val_nll << " at epoch " << result.best_epoch << '\n';
    return 0;
}

struct BundleData {
    train::TrainedModel model;
    json dataset_doc;
};

BundleData load_bundle(const fs::path& dir, ManifestBuilder& mb) {
    BundleData b;
    b.model = io::load_model(dir);
    std::ifstream ds(dir / "dataset.json");
    if (!ds) throw DataError("bundle is missing dataset.json: " + dir.string());
    ds >> b.dataset_doc;
    for (const char* name : {"weights.json", "normalizer.json", "config.json"}) {
        mb.input(dir / name);
    }
    mb.input(dir / "dataset.json");
    return b;
}

LoadedData load_for_bundle(const BundleData& bundle, const fs::path& features_csv,
                           const fs::path& manifest_json, const fs::path& frequency_csv,
                           double t_max, ManifestBuilder& mb) {
    LoadedData data =
        load_dataset(features_csv, manifest_json, frequency_csv,
                     bundle.dataset_doc.at("day_ahead_only").get<bool>(), t_max, mb);
    const auto expected =
        bundle.dataset_doc.at("feature_names").get<std::vector<std::string>>();
    if (data.dataset.feature_names != expected) {
        throw DataError("feature columns do not match the ones the bundle was "
                        "trained on");
    }
    return data;
}

int cmd_predict(const fs::path& bundle_dir, const fs::path& features_csv,
                const fs::path& manifest_json, const fs::path& frequency_csv,
                const fs::path& out, double t_max_flag, const std::string& split,
                bool day_ahead_only) {
    json config{{"bundle", bundle_dir.string()},
                {"t_max", t_max_flag},
                {"split", split},
                {"day_ahead_only", day_ahead_only}};
    ManifestBuilder mb = make_manifest("predict", config, 0, out);
    BundleData bundle = load_bundle(bundle_dir, mb);
    if (day_ahead_only && !bundle.dataset_doc.at("day_ahead_only").get<bool>()) {
        throw ConfigError("--day-ahead-only requires a bundle trained with "
                          "--day-ahead-only");
    }
    const double t_max = t_max_flag > 0 ? t_max_flag : bundle.model.config.t_max;
    const double t_max_store = std::max(t_max, bundle.model.config.t_max);
    LoadedData data = load_for_bundle(bundle, features_csv, manifest_json,
                                      frequency_csv, t_max_store, mb);
    const train::Splits splits = train::chronological_split(
        data.dataset.samples.size(),
        bundle.dataset_doc.at("train_frac").get<double>(),
        bundle.dataset_doc.at("val_frac").get<double>());
    std::vector<std::size_t> all;
    const auto idx = split_view(splits, split, all, data.dataset.samples.size());
    if (idx.empty()) throw DataError("selected split is empty");

    const train::EvalSummary summary =
        train::evaluate(bundle.model, data.dataset, idx, t_max);
    write_metrics_json(out / "metrics.json", summary, t_max, split);
    mb.output(out / "metrics.json");
    std::ofstream per(out / "per_interval_nll.csv");
    per << "timestamp,nll\n";
    for (std::size_t k = 0; k < idx.size(); ++k) {
        per << io::format_timestamp(data.dataset.samples[idx[k]].start_ts) << ','
            << format_cell(summary.per_interval[k]) << '\n';
    }
    per.close();
    mb.output(out / "per_interval_nll.csv");
    mb.manifest.config["feature_columns_used"] = data.dataset.feature_names;
    mb.write();
    std::cerr << "median NLL " << summary.median << " over " << idx.size()
              << " intervals\n";
    return 0;
}

int cmd_identify(const fs::path& bundle_dir, const fs::path& features_csv,
                 const fs::path& manifest_json, const fs::path& frequency_csv,
                 const fs::path& out, const std::string& split) {
    json config{{"bundle", bundle_dir.string()}, {"split", split}};
    ManifestBuilder mb = make_manifest("identify", config, 0, out);
    BundleData bundle = load_bundle(bundle_dir, mb);
    LoadedData data = load_for_bundle(bundle, features_csv, manifest_json,
                                      frequency_csv, bundle.model.config.t_max, mb);
    const train::Splits splits = train::chronological_split(
        data.dataset.samples.size(),
        bundle.dataset_doc.at("train_frac").get<double>(),
        bundle.dataset_doc.at("val_frac").get<double>());
    std::vector<std::size_t> all;
    const auto idx = split_view(splits, split, all, data.dataset.samples.size());

    const train::ParamSeries series = train::infer_params(bundle.model, data.dataset, idx);
    write_param_series_csv(series, out / "params.csv");
    mb.output(out / "params.csv");

    const train::DailyAggregate agg = train::daily_aggregate(series);
    std::ofstream daily(out / "daily_params.csv");
    daily << "second_of_day,parameter,mean,q25,q75\n";
    for (std::size_t slot = 0; slot < 96; ++slot) {
        for (std::size_t j = 0; j < nn::kThetaDim; ++j) {
            if (std::isnan(agg.mean[j][slot])) continue;
            daily << slot * 900 << ',' << nn::theta_names()[j] << ','
                  << format_cell(agg.mean[j][slot]) << ','
                  << format_cell(agg.q25[j][slot]) << ','
                  << format_cell(agg.q75[j][slot]) << '\n';
        }
    }
    daily.close();
    mb.output(out / "daily_params.csv");

    const std::array<double, 5> ratio =
        train::reference_ratio(series, train::ReferenceParams{});
    const char* names[] = {"tau", "kappa", "D", "q", "r"};
    json ratios;
    for (std::size_t j = 0; j < 5; ++j) {
        ratios[names[j]] = ratio[j];
    }
    std::ofstream(out / "reference_ratios.json") << ratios.dump(2) << '\n';
    mb.output(out / "reference_ratios.json");
    mb.write();
    return 0;
}

int cmd_explain(const fs::path& bundle_dir, const fs::path& features_csv,
                const fs::path& manifest_json, const fs::path& out,
                std::size_t limit, std::size_t background_size,
                std::size_t n_coalitions, const std::string& parameters,
                std::uint64_t seed) {
    json config{{"bundle", bundle_dir.string()},
                {"limit", limit},
                {"background", background_size},
                {"coalitions", n_coalitions},
                {"parameters", parameters}};
    ManifestBuilder mb = make_manifest("explain", config, seed, out);
    BundleData bundle = load_bundle(bundle_dir, mb);
    features::FeatureTable table = io::read_feature_csv(features_csv);
    mb.input(features_csv);
    if (!manifest_json.empty()) {
        io::apply_feature_manifest(table, manifest_json);
        mb.input(manifest_json);
    }
    if (bundle.dataset_doc.at("day_ahead_only").get<bool>()) {
        table = table.select(table.columns_with(features::Availability::kDayAhead));
    }
    const auto expected =
        bundle.dataset_doc.at("feature_names").get<std::vector<std::string>>();
    std::vector<std::string> names;
    for (const auto& c : table.columns) names.push_back(c.name);
    if (names != expected) {
        throw DataError("feature columns do not match the bundle");
    }
    if (table.n_rows() < 2) throw DataError("need at least two feature rows");

    // parameter list
    std::vector<std::size_t> param_idx;
    std::string token;
    std::istringstream stream(parameters);
    while (std::getline(stream, token, ',')) {
        bool found = false;
        for (std::size_t j = 0; j < nn::kThetaDim; ++j) {
            if (token == nn::theta_names()[j]) {
                param_idx.push_back(j);
                found = true;
            }
        }
        if (!found) throw ConfigError("unknown parameter: " + token);
    }
    if (param_idx.empty()) throw ConfigError("empty --parameters list");

    // background subsample and explained instances
    rng::SplitMix64 gen(seed);
    const std::size_t n_rows = table.n_rows();
    std::vector<std::size_t> row_order(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) row_order[i] = i;
    for (std::size_t i = n_rows; i > 1; --i) {
        std::swap(row_order[i - 1], row_order[gen.next_below(i)]);
    }
    const std::size_t n_bg = std::min(background_size, n_rows);
    Eigen::MatrixXd background(static_cast<Eigen::Index>(n_bg),
                               static_cast<Eigen::Index>(table.n_cols()));
    for (std::size_t b = 0; b < n_bg; ++b) {
        const auto row = table.row(row_order[b]);
        for (std::size_t c = 0; c < row.size(); ++c) {
            background(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) =
                row[c];
        }
    }
    const std::size_t n_explained = std::min(limit, n_rows);
    const std::size_t stride = std::max<std::size_t>(1, n_rows / n_explained);

    std::ofstream shap(out / "shap.csv");
    shap << "interval,parameter,feature,feature_value,shap_value,base_value\n";
    std::map<std::size_t, std::vector<explain::Explanation>> per_param;
    std::vector<std::size_t> explained_rows;
    for (std::size_t k = 0; k < n_explained; ++k) {
        explained_rows.push_back(k * stride);
    }
    for (std::size_t j : param_idx) {
        const explain::ScalarFn f = [&](std::span<const double> x) {
            return bundle.model.predict(x)[j];
        };
        for (std::size_t row : explained_rows) {
            const std::vector<double> x = table.row(row);
            const explain::Explanation e = explain::kernel_shap(
                f, x, background, n_coalitions,
                rng::SplitMix64::substream(seed, 100000 + j * n_rows + row).next_u64());
            per_param[j].push_back(e);
            for (std::size_t c = 0; c < table.n_cols(); ++c) {
                shap << row << ',' << nn::theta_names()[j] << ','
                     << table.columns[c].name << ',' << format_cell(x[c]) << ','
                     << format_cell(e.phi[static_cast<Eigen::Index>(c)]) << ','
                     << format_cell(e.base) << '\n';
            }
        }
    }
    shap.close();
    mb.output(out / "shap.csv");

    std::ofstream importance_csv(out / "importance.csv");
    importance_csv << "parameter,rank,feature,mean_abs_shap\n";
    for (const auto& [j, explanations] : per_param) {
        const auto ranked = explain::importance(explanations, names);
        for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
            importance_csv << nn::theta_names()[j] << ',' << rank << ','
                           << ranked[rank].name << ','
                           << format_cell(ranked[rank].mean_abs_shap) << '\n';
        }
    }
    importance_csv.close();
    mb.output(out / "importance.csv");
    mb.write();
    return 0;
}

int cmd_synthesize(const fs::path& bundle_dir, const fs::path& features_csv,
                   const fs::path& manifest_json, const fs::path& out,
                   std::size_t days, double dt, std::uint64_t seed) {
    json config{{"bundle", bundle_dir.string()},
                {"days", days},
                {"dt", dt},
                {"seed", seed}};
    ManifestBuilder mb = make_manifest("synthesize", config, seed, out);
    BundleData bundle = load_bundle(bundle_dir, mb);
    features::FeatureTable table = io::read_feature_csv(features_csv);
    mb.input(features_csv);
    if (!manifest_json.empty()) {
        io::apply_feature_manifest(table, manifest_json);
        mb.input(manifest_json);
    }
    if (bundle.dataset_doc.at("day_ahead_only").get<bool>()) {
        table = table.select(table.columns_with(features::Availability::kDayAhead));
    }
    const std::size_t n_intervals = std::min(table.n_rows(), days * 96);
    if (n_intervals == 0) throw DataError("no intervals to synthesize");

    std::vector<moments::SystemParams> params;
    params.reserve(n_intervals);
    for (std::size_t i = 0; i < n_intervals; ++i) {
        params.push_back(bundle.model.predict(table.row(i)).system());
    }
    sim::SdeConfig cfg;
    cfg.dt = dt;
    cfg.seed = seed;
    const sim::Trajectory traj = sim::synthesize(params, 0.0, 0.0, cfg);
    sim::write_trajectory_csv(traj, out / "trajectory.csv");
    mb.output(out / "trajectory.csv");
    mb.write();
    std::cerr << "synthesized " << n_intervals << " intervals (" << traj.t.size()
              << " samples)\n";
    return 0;
}

int cmd_benchmark(const fs::path& bundle_dir, const fs::path& features_csv,
                  const fs::path& manifest_json, const fs::path& frequency_csv,
                  const fs::path& out, const std::string& t_max_grid) {
    json config{{"bundle", bundle_dir.string()}, {"t_max_grid", t_max_grid}};
    ManifestBuilder mb = make_manifest("benchmark", config, 0, out);
    BundleData bundle = load_bundle(bundle_dir, mb);
    LoadedData data = load_for_bundle(bundle, features_csv, manifest_json,
                                      frequency_csv, bundle.model.config.t_max, mb);
    const train::Splits splits = train::chronological_split(
        data.dataset.samples.size(),
        bundle.dataset_doc.at("train_frac").get<double>(),
        bundle.dataset_doc.at("val_frac").get<double>());
    if (splits.test.empty()) throw DataError("test split is empty");

    // benchmarks are fitted on the training part of the record
    const IntervalSample& last_train = data.dataset.samples[splits.train.back()];
    const auto train_end = static_cast<std::size_t>(
        last_train.start_ts - data.record.start_ts + 900);
    FrequencyRecord train_record;
    train_record.start_ts = data.record.start_ts;
    train_record.omega.assign(data.record.omega.begin(),
                              data.record.omega.begin() +
                                  static_cast<std::ptrdiff_t>(train_end));
    const baselines::DailyProfile profile = baselines::fit_daily_profile(train_record);
    const baselines::ConstantModel constant = baselines::fit_constant(train_record);

    std::vector<IntervalSample> test_samples;
    for (std::size_t i : splits.test) test_samples.push_back(data.dataset.samples[i]);

    std::vector<double> t_maxes;
    std::istringstream grid_stream(t_max_grid);
    std::string token;
    while (std::getline(grid_stream, token, ',')) {
        t_maxes.push_back(io::parse_double(token));
    }
    if (t_maxes.empty()) throw ConfigError("empty --t-max-grid");

    std::ofstream csv(out / "benchmark.csv");
    csv << "t_max,predictor,median_nll,q25_nll,q75_nll\n";
    json rows = json::array();
    for (double t_max : t_maxes) {
        const auto n_samples =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(t_max)));
        const train::EvalSummary model_eval =
            train::evaluate(bundle.model, data.dataset, splits.test, t_max);
        std::vector<double> profile_eval =
            baselines::profile_nll(profile, test_samples, n_samples);
        std::vector<double> constant_eval =
            baselines::constant_nll(constant, test_samples, n_samples);
        const double profile_median = train::quantile(profile_eval, 0.5);
        const double constant_median = train::quantile(constant_eval, 0.5);
        const double rel =
            baselines::relative_loss_increase(model_eval.median, profile_median);
        csv << format_cell(t_max) << ",model," << format_cell(model_eval.median) << ','
            << format_cell(model_eval.q25) << ',' << format_cell(model_eval.q75) << '\n';
        csv << format_cell(t_max) << ",daily_profile," << format_cell(profile_median)
            << ',' << format_cell(train::quantile(profile_eval, 0.25)) << ','
            << format_cell(train::quantile(profile_eval, 0.75)) << '\n';
        csv << format_cell(t_max) << ",constant," << format_cell(constant_median) << ','
            << format_cell(train::quantile(constant_eval, 0.25)) << ','
            << format_cell(train::quantile(constant_eval, 0.75)) << '\n';
        rows.push_back({{"t_max", t_max},
                        {"model_median_nll", model_eval.median},
                        {"profile_median_nll", profile_median},
                        {"constant_median_nll", constant_median},
                        {"relative_loss_increase_vs_profile", rel}});
    }
    csv.close();
    mb.output(out / "benchmark.csv");
    std::ofstream(out / "benchmark.json") << rows.dump(2) << '\n';
    mb.output(out / "benchmark.json");
    mb.write();
    return 0;
}

int cmd_tune(const TrainFlags& flags, std::size_t trials, std::uint64_t search_seed,
             const fs::path& out) {
    json config = train_flags_to_json(flags);
    config["trials"] = trials;
    config["search_seed"] = search_seed;
    ManifestBuilder mb = make_manifest("tune", config, search_seed, out);
    LoadedData data = load_dataset(flags.features, flags.manifest, flags.frequency,
                                   flags.day_ahead_only, flags.cfg.t_max, mb);
    const train::Splits splits = train::chronological_split(
        data.dataset.samples.size(), flags.train_frac, flags.val_frac);
    const train::SearchResult result =
        train::random_search(data.dataset, splits, flags.cfg, trials, search_seed);

    std::ofstream leaderboard(out / "leaderboard.csv");
    leaderboard << "rank,lr,dropout,n_units,n_hidden,activation,val_nll\n";
    for (std::size_t rank = 0; rank < result.leaderboard.size(); ++rank) {
        const train::HpTrial& trial = result.leaderboard[rank];
        leaderboard << rank << ',' << format_cell(trial.config.lr) << ','
                    << format_cell(trial.config.dropout) << ',' << trial.config.n_units
                    << ',' << trial.config.n_hidden << ','
                    << nn::activation_name(trial.config.activation) << ','
                    << format_cell(trial.val_nll) << '\n';
    }
    leaderboard.close();
    mb.output(out / "leaderboard.csv");
    std::ofstream(out / "best_config.json")
        << io::train_config_to_json(result.best).dump(2) << '\n';
    mb.output(out / "best_config.json");
    mb.write();
    return 0;
}

int cmd_sweep_scaling(const TrainFlags& flags, std::size_t seeds,
                      const std::string& variant_filter, const fs::path& truth_csv,
                      const fs::path& out) {
    json config = train_flags_to_json(flags);
    config["seeds"] = seeds;
    config["variants"] = variant_filter;
    ManifestBuilder mb = make_manifest("sweep-scaling", config, flags.cfg.seed, out);
    LoadedData data = load_dataset(flags.features, flags.manifest, flags.frequency,
                                   flags.day_ahead_only, flags.cfg.t_max, mb);
    const train::Splits splits = train::chronological_split(
        data.dataset.samples.size(), flags.train_frac, flags.val_frac);

    std::vector<train::ScalingVariant> variants = train::scaling_variants();
    if (variant_filter != "all") {
        std::set<std::string> wanted;
        std::istringstream stream(variant_filter);
        std::string token;
        while (std::getline(stream, token, ';')) wanted.insert(token);
        std::erase_if(variants, [&](const train::ScalingVariant& v) {
            return !wanted.contains(v.name);
        });
        if (variants.empty()) throw ConfigError("no variants match: " + variant_filter);
    }

    train::ReferenceParams reference;
    if (!truth_csv.empty()) {
        // time-averaged |theta| of a ground-truth series as the reference
        const train::ParamSeries truth = read_param_series_csv(truth_csv);
        mb.input(truth_csv);
        if (truth.theta.empty()) throw DataError("empty truth series");
        std::array<double, 5> mean_abs{};
        for (const nn::ThetaVector& t : truth.theta) {
            for (std::size_t j = 0; j < 5; ++j) mean_abs[j] += std::abs(t[j + 3]);
        }
        for (double& v : mean_abs) v /= static_cast<double>(truth.theta.size());
        reference.tau = mean_abs[0];
        reference.kappa = mean_abs[1];
        reference.D = mean_abs[2];
        reference.q = mean_abs[3];
        reference.r = mean_abs[4];
    }

    const auto rows =
        train::scaling_sweep(data.dataset, splits, variants, seeds, flags.cfg, reference);
    std::ofstream csv(out / "sweep.csv");
    csv << "variant,parameter,mean_ratio,min_ratio,max_ratio\n";
    for (const auto& row : rows) {
        csv << row.variant << ',' << row.parameter << ','
            << format_cell(row.mean_ratio) << ',' << format_cell(row.min_ratio) << ','
            << format_cell(row.max_ratio) << '\n';
    }
    csv.close();
    mb.output(out / "sweep.csv");
    mb.write();
    return 0;
}

void add_train_flags(CLI::App* cmd, TrainFlags& flags, const json& cfg) {
    maybe_override(cfg, "lr", flags.cfg.lr);
    maybe_override(cfg, "dropout", flags.cfg.dropout);
    maybe_override(cfg, "n_units", flags.cfg.n_units);
    maybe_override(cfg, "n_hidden", flags.cfg.n_hidden);
    maybe_override(cfg, "epochs", flags.cfg.epochs);
    maybe_override(cfg, "patience", flags.cfg.patience);
    maybe_override(cfg, "batch_size", flags.cfg.batch_size);
    maybe_override(cfg, "seed", flags.cfg.seed);
    maybe_override(cfg, "t_max", flags.cfg.t_max);
    maybe_override(cfg, "threads", flags.cfg.threads);
    maybe_override(cfg, "train_frac", flags.train_frac);
    maybe_override(cfg, "val_frac", flags.val_frac);
    maybe_override(cfg, "day_ahead_only", flags.day_ahead_only);
    if (cfg.contains("activation")) {
        flags.cfg.activation =
            nn::activation_from_name(cfg.at("activation").get<std::string>());
    }
    cmd->add_option("--features", flags.features, "feature table CSV")->required();
    cmd->add_option("--feature-manifest", flags.manifest, "feature manifest JSON");
    cmd->add_option("--frequency", flags.frequency, "1 Hz frequency CSV")->required();
    cmd->add_option("--out", flags.out, "output directory")->required();
    cmd->add_option("--lr", flags.cfg.lr, "learning rate");
    cmd->add_option("--dropout", flags.cfg.dropout, "dropout rate");
    cmd->add_option("--units", flags.cfg.n_units, "hidden units per layer");
    cmd->add_option("--hidden", flags.cfg.n_hidden, "hidden layers");
    cmd->add_option_function<std::string>(
        "--activation",
        [&flags](const std::string& name) {
            flags.cfg.activation = nn::activation_from_name(name);
        },
        "activation (tanh|sigmoid)");
    cmd->add_option("--epochs", flags.cfg.epochs, "training epochs");
    cmd->add_option("--patience", flags.cfg.patience, "early-stopping patience");
    cmd->add_option("--batch-size", flags.cfg.batch_size, "intervals per batch");
    cmd->add_option("--seed", flags.cfg.seed, "run seed");
    cmd->add_option("--t-max", flags.cfg.t_max, "prediction horizon [s]");
    cmd->add_option("--threads", flags.cfg.threads, "worker threads");
    cmd->add_option("--train-frac", flags.train_frac, "training fraction");
    cmd->add_option("--val-frac", flags.val_frac, "validation fraction");
    cmd->add_flag("--day-ahead-only", flags.day_ahead_only,
                  "restrict to day-ahead available features");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"physics-inspired probabilistic power-grid frequency model"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override)");

    try {
        const json cfg = peek_config_file(argc, argv);

        // synth-data
        auto* synth_data = app.add_subcommand(
            "synth-data", "generate the synthetic ground-truth dataset");
        fs::path sd_out;
        std::uint64_t sd_seed = 0;
        std::size_t sd_days = 4;
        maybe_override(cfg, "seed", sd_seed);
        maybe_override(cfg, "days", sd_days);
        synth_data->add_option("--out", sd_out)->required();
        synth_data->add_option("--seed", sd_seed);
        synth_data->add_option("--days", sd_days);

        // ingest
        auto* ingest = app.add_subcommand("ingest", "build the area feature table");
        fs::path ingest_sources, ingest_out;
        ingest->add_option("--sources", ingest_sources, "sources manifest JSON")
            ->required();
        ingest->add_option("--out", ingest_out)->required();

        // train
        auto* train_cmd = app.add_subcommand("train", "train the parameter model");
        TrainFlags train_flags;
        add_train_flags(train_cmd, train_flags, cfg);

        // tune
        auto* tune = app.add_subcommand("tune", "hyperparameter random search");
        TrainFlags tune_flags;
        add_train_flags(tune, tune_flags, cfg);
        std::size_t tune_trials = 20;
        std::uint64_t tune_seed = 0;
        maybe_override(cfg, "trials", tune_trials);
        tune->add_option("--trials", tune_trials);
        tune->add_option("--search-seed", tune_seed);

        // predict
        auto* predict = app.add_subcommand("predict", "probabilistic evaluation");
        fs::path pr_bundle, pr_features, pr_manifest, pr_frequency, pr_out;
        double pr_t_max = 0.0;
        std::string pr_split = "test";
        bool pr_day_ahead = false;
        predict->add_option("--bundle", pr_bundle)->required();
        predict->add_option("--features", pr_features)->required();
        predict->add_option("--feature-manifest", pr_manifest);
        predict->add_option("--frequency", pr_frequency)->required();
        predict->add_option("--out", pr_out)->required();
        predict->add_option("--t-max", pr_t_max, "horizon [s], 0 = bundle default");
        predict->add_option("--split", pr_split, "train|validation|test|all");
        predict->add_flag("--day-ahead-only", pr_day_ahead,
                          "require a day-ahead-only bundle");

        // identify
        auto* identify = app.add_subcommand("identify", "parameter inference");
        fs::path id_bundle, id_features, id_manifest, id_frequency, id_out;
        std::string id_split = "all";
        identify->add_option("--bundle", id_bundle)->required();
        identify->add_option("--features", id_features)->required();
        identify->add_option("--feature-manifest", id_manifest);
        identify->add_option("--frequency", id_frequency)->required();
        identify->add_option("--out", id_out)->required();
        identify->add_option("--split", id_split);

        // explain
        auto* explain_cmd = app.add_subcommand("explain", "KernelSHAP attribution");
        fs::path ex_bundle, ex_features, ex_manifest, ex_out;
        std::size_t ex_limit = 16, ex_background = 100, ex_coalitions = 1024;
        std::string ex_params = "tau,q,r";
        std::uint64_t ex_seed = 0;
        explain_cmd->add_option("--bundle", ex_bundle)->required();
        explain_cmd->add_option("--features", ex_features)->required();
        explain_cmd->add_option("--feature-manifest", ex_manifest);
        explain_cmd->add_option("--out", ex_out)->required();
        explain_cmd->add_option("--limit", ex_limit, "instances to explain");
        explain_cmd->add_option("--background", ex_background, "background rows");
        explain_cmd->add_option("--coalitions", ex_coalitions);
        explain_cmd->add_option("--parameters", ex_params, "comma-separated");
        explain_cmd->add_option("--seed", ex_seed);

        // synthesize
        auto* synthesize = app.add_subcommand("synthesize", "sample a trajectory");
        fs::path sy_bundle, sy_features, sy_manifest, sy_out;
        std::size_t sy_days = 1;
        double sy_dt = 0.1;
        std::uint64_t sy_seed = 0;
        maybe_override(cfg, "dt", sy_dt);
        synthesize->add_option("--bundle", sy_bundle)->required();
        synthesize->add_option("--features", sy_features)->required();
        synthesize->add_option("--feature-manifest", sy_manifest);
        synthesize->add_option("--out", sy_out)->required();
        synthesize->add_option("--days", sy_days);
        synthesize->add_option("--dt", sy_dt);
        synthesize->add_option("--seed", sy_seed);

        // benchmark
        auto* benchmark = app.add_subcommand("benchmark", "compare to baselines");
        fs::path bm_bundle, bm_features, bm_manifest, bm_frequency, bm_out;
        std::string bm_grid = "90,360,900";
        benchmark->add_option("--bundle", bm_bundle)->required();
        benchmark->add_option("--features", bm_features)->required();
        benchmark->add_option("--feature-manifest", bm_manifest);
        benchmark->add_option("--frequency", bm_frequency)->required();
        benchmark->add_option("--out", bm_out)->required();
        benchmark->add_option("--t-max-grid", bm_grid, "comma-separated horizons");

        // sweep-scaling
        auto* sweep = app.add_subcommand("sweep-scaling", "scaling-variant study");
        TrainFlags sweep_flags;
        add_train_flags(sweep, sweep_flags, cfg);
        std::size_t sweep_seeds = 10;
        std::string sweep_variants = "all";
        fs::path sweep_truth;
        sweep->add_option("--seeds", sweep_seeds, "weight initialisations per variant");
        sweep->add_option("--variants", sweep_variants,
                          "'all' or semicolon-separated names");
        sweep->add_option("--truth", sweep_truth,
                          "ground-truth parameter series CSV as ratio reference");

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? 0 : 2;  // config errors exit with 2
        }

        if (synth_data->parsed()) return cmd_synth_data(sd_out, sd_seed, sd_days);
        if (ingest->parsed()) return cmd_ingest(ingest_sources, ingest_out);
        if (train_cmd->parsed()) return cmd_train(train_flags);
        if (tune->parsed()) {
            return cmd_tune(tune_flags, tune_trials, tune_seed, tune_flags.out);
        }
        if (predict->parsed()) {
            return cmd_predict(pr_bundle, pr_features, pr_manifest, pr_frequency,
                               pr_out, pr_t_max, pr_split, pr_day_ahead);
        }
        if (identify->parsed()) {
            return cmd_identify(id_bundle, id_features, id_manifest, id_frequency,
                                id_out, id_split);
        }
        if (explain_cmd->parsed()) {
            return cmd_explain(ex_bundle, ex_features, ex_manifest, ex_out, ex_limit,
                               ex_background, ex_coalitions, ex_params, ex_seed);
        }
        if (synthesize->parsed()) {
            return cmd_synthesize(sy_bundle, sy_features, sy_manifest, sy_out, sy_days,
                                  sy_dt, sy_seed);
        }
        if (benchmark->parsed()) {
            return cmd_benchmark(bm_bundle, bm_features, bm_manifest, bm_frequency,
                                 bm_out, bm_grid);
        }
        if (sweep->parsed()) {
            return cmd_sweep_scaling(sweep_flags, sweep_seeds, sweep_variants,
                                     sweep_truth, sweep_flags.out);
        }
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
