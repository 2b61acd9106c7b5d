#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gridfreq::explain {

/// Scalar model under explanation; receives a full feature vector.
using ScalarFn = std::function<double(std::span<const double>)>;

/// Additive attribution of one prediction: f(x) = base + sum_k phi_k.
struct Explanation {
    Eigen::VectorXd phi;
    double base = 0.0;  ///< E[f] over the background set
    double fx = 0.0;
};

/// KernelSHAP with the interventional value function: a coalition keeps
/// its features from x and averages the rest over the background rows.
/// The empty and full coalitions are always included through the
/// constraints base = v(empty) and sum phi = f(x) - base. When
/// n_coalitions covers all 2^N - 2 interior coalitions the exact Shapley
/// kernel weights are used and the result equals exact_shapley; otherwise
/// coalitions are sampled in complement pairs (weights absorbed into the
/// sampling distribution). Background rows are background.row(i).
Explanation kernel_shap(const ScalarFn& f, std::span<const double> x,
                        const Eigen::MatrixXd& background, std::size_t n_coalitions,
                        std::uint64_t seed);

/// Brute-force Shapley values over all 2^N coalitions (N <= 12), same
/// interventional value function.
Explanation exact_shapley(const ScalarFn& f, std::span<const double> x,
                          const Eigen::MatrixXd& background);

struct ImportanceRow {
    std::size_t feature = 0;
    std::string name;
    double mean_abs_shap = 0.0;
};

/// Mean |phi_k| over a set of explanations, sorted descending.
std::vector<ImportanceRow> importance(std::span<const Explanation> explanations,
                                      std::span<const std::string> feature_names);

/// (feature value, shap value) scatter pairs for one feature.
std::vector<std::pair<double, double>> dependency_export(
    std::span<const Explanation> explanations,
    std::span<const std::vector<double>> feature_rows, std::size_t feature);

}  // namespace gridfreq::explain
