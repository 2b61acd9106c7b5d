#include "gridfreq/io/bundle.hpp"

#include <fstream>

#include "gridfreq/errors.hpp"

namespace gridfreq::io {

namespace {

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    file << doc.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) {
        throw DataError("cannot open " + path.string());
    }
    nlohmann::json doc;
    file >> doc;
    return doc;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) {
        throw DataError("empty weight matrix in checkpoint");
    }
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const nlohmann::json& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw DataError("ragged weight matrix in checkpoint");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return m;
}

}  // namespace

nlohmann::json train_config_to_json(const train::TrainConfig& cfg) {
    return nlohmann::json{{"lr", cfg.lr},
                          {"dropout", cfg.dropout},
                          {"n_units", cfg.n_units},
                          {"n_hidden", cfg.n_hidden},
                          {"activation", nn::activation_name(cfg.activation)},
                          {"epochs", cfg.epochs},
                          {"patience", cfg.patience},
                          {"batch_size", cfg.batch_size},
                          {"seed", cfg.seed},
                          {"t_max", cfg.t_max},
                          {"threads", cfg.threads}};
}

train::TrainConfig train_config_from_json(const nlohmann::json& j) {
    train::TrainConfig cfg;
    cfg.lr = j.at("lr").get<double>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.n_units = j.at("n_units").get<std::size_t>();
    cfg.n_hidden = j.at("n_hidden").get<std::size_t>();
    cfg.activation = nn::activation_from_name(j.at("activation").get<std::string>());
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.patience = j.at("patience").get<std::size_t>();
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.t_max = j.at("t_max").get<double>();
    cfg.threads = j.value("threads", 1u);
    return cfg;
}

nlohmann::json constraint_spec_to_json(const nn::ConstraintSpec& spec) {
    return nlohmann::json{{"s1", spec.s1}, {"s3", spec.s3},   {"s5", spec.s5},
                          {"s6", spec.s6}, {"s7", spec.s7},   {"s8", spec.s8},
                          {"v1", spec.v1}, {"v3", spec.v3},   {"v4", spec.v4},
                          {"v5", spec.v5}, {"v6", spec.v6},   {"delta", spec.delta}};
}

nn::ConstraintSpec constraint_spec_from_json(const nlohmann::json& j) {
    nn::ConstraintSpec spec;
    spec.s1 = j.at("s1").get<double>();
    spec.s3 = j.at("s3").get<double>();
    spec.s5 = j.at("s5").get<double>();
    spec.s6 = j.at("s6").get<double>();
    spec.s7 = j.at("s7").get<double>();
    spec.s8 = j.at("s8").get<double>();
    spec.v1 = j.at("v1").get<double>();
    spec.v3 = j.at("v3").get<double>();
    spec.v4 = j.at("v4").get<double>();
    spec.v5 = j.at("v5").get<double>();
    spec.v6 = j.at("v6").get<double>();
    spec.delta = j.at("delta").get<double>();
    return spec;
}

void save_model(const std::filesystem::path& dir, const train::TrainedModel& model,
                const std::vector<train::EpochStats>& history) {
    std::filesystem::create_directories(dir);

    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < model.weights.n_layers(); ++l) {
        nlohmann::json bias = nlohmann::json::array();
        for (Eigen::Index i = 0; i < model.weights.b[l].size(); ++i) {
            bias.push_back(model.weights.b[l][i]);
        }
        layers.push_back(
            {{"w", matrix_to_json(model.weights.w[l])}, {"b", std::move(bias)}});
    }
    write_json(nlohmann::json{
                   {"format_version", 1},
                   {"mlp",
                    {{"input_dim", model.weights.config.input_dim},
                     {"n_hidden_layers", model.weights.config.n_hidden_layers},
                     {"units_per_layer", model.weights.config.units_per_layer},
                     {"activation", nn::activation_name(model.weights.config.activation)},
                     {"dropout_rate", model.weights.config.dropout_rate}}},
                   {"layers", std::move(layers)}},
               dir / "weights.json");

    write_json(nlohmann::json{{"format_version", 1},
                              {"mean", model.normalizer.mean},
                              {"stddev", model.normalizer.stddev},
                              {"kept", model.normalizer.kept},
                              {"kept_names", model.normalizer.kept_names},
                              {"dropped_names", model.normalizer.dropped_names}},
               dir / "normalizer.json");

    write_json(nlohmann::json{{"format_version", 1},
                              {"train_config", train_config_to_json(model.config)},
                              {"constraint_spec", constraint_spec_to_json(model.spec)}},
               dir / "config.json");

    nlohmann::json hist = nlohmann::json::array();
    for (const train::EpochStats& e : history) {
        hist.push_back({{"train_nll", e.train_nll}, {"val_nll", e.val_nll}});
    }
    write_json(nlohmann::json{{"epochs", std::move(hist)}}, dir / "history.json");
}

train::TrainedModel load_model(const std::filesystem::path& dir) {
    const nlohmann::json weights_doc = read_json(dir / "weights.json");
    if (weights_doc.at("format_version").get<int>() != 1) {
        throw DataError("unsupported checkpoint format version");
    }
    train::TrainedModel model;
    const nlohmann::json& mlp = weights_doc.at("mlp");
    model.weights.config.input_dim = mlp.at("input_dim").get<std::size_t>();
    model.weights.config.n_hidden_layers = mlp.at("n_hidden_layers").get<std::size_t>();
    model.weights.config.units_per_layer = mlp.at("units_per_layer").get<std::size_t>();
    model.weights.config.activation =
        nn::activation_from_name(mlp.at("activation").get<std::string>());
    model.weights.config.dropout_rate = mlp.at("dropout_rate").get<double>();
    for (const nlohmann::json& layer : weights_doc.at("layers")) {
        model.weights.w.push_back(matrix_from_json(layer.at("w")));
        const nlohmann::json& bias = layer.at("b");
        Eigen::VectorXd b(static_cast<Eigen::Index>(bias.size()));
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            b[i] = bias.at(static_cast<std::size_t>(i)).get<double>();
        }
        model.weights.b.push_back(std::move(b));
    }
    model.weights.validate();

    const nlohmann::json norm = read_json(dir / "normalizer.json");
    model.normalizer.mean = norm.at("mean").get<std::vector<double>>();
    model.normalizer.stddev = norm.at("stddev").get<std::vector<double>>();
    model.normalizer.kept = norm.at("kept").get<std::vector<std::size_t>>();
    model.normalizer.kept_names =
        norm.at("kept_names").get<std::vector<std::string>>();
    model.normalizer.dropped_names =
        norm.at("dropped_names").get<std::vector<std::string>>();

    const nlohmann::json cfg = read_json(dir / "config.json");
    model.config = train_config_from_json(cfg.at("train_config"));
    model.spec = constraint_spec_from_json(cfg.at("constraint_spec"));
    return model;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw DataError("cannot open " + path.string() + " for digesting");
    }
    std::uint64_t hash = 0xcbf29ce484222325ull;
    char buf[4096];
    while (file.read(buf, sizeof buf) || file.gcount() > 0) {
        const std::streamsize n = file.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ull;
        }
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& [file, digest] : manifest.inputs) {
        inputs[file] = digest;
    }
    // FNV-1a over the canonical config dump doubles as the config hash.
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (const char c : manifest.config.dump()) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ull;
    }
    char config_hash[17];
    std::snprintf(config_hash, sizeof config_hash, "%016llx",
                  static_cast<unsigned long long>(hash));
    write_json(nlohmann::json{{"command", manifest.command},
                              {"config", manifest.config},
                              {"config_hash", config_hash},
                              {"seed", manifest.seed},
                              {"inputs", std::move(inputs)},
                              {"outputs", manifest.outputs},
                              {"version", "0.1.0"}},
               path);
}

}  // namespace gridfreq::io
