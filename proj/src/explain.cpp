#include "gridfreq/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "gridfreq/errors.hpp"
#include "gridfreq/rng.hpp"

namespace gridfreq::explain {

namespace {

/// Interventional value function: mean of f over background rows with the
/// masked-in coordinates replaced by x.
class ValueFunction {
  public:
    ValueFunction(const ScalarFn& f, std::span<const double> x,
                  const Eigen::MatrixXd& background)
        : f_(f), x_(x), background_(background) {
        if (background_.rows() == 0) {
            throw InsufficientData("kernel_shap requires a non-empty background set");
        }
        if (background_.cols() != static_cast<Eigen::Index>(x_.size())) {
            throw DimensionMismatch("background width does not match the instance");
        }
        scratch_.resize(x_.size());
    }

    double operator()(std::span<const char> mask) {
        double sum = 0.0;
        for (Eigen::Index b = 0; b < background_.rows(); ++b) {
            for (std::size_t k = 0; k < x_.size(); ++k) {
                scratch_[k] = mask[k] ? x_[k]
                                      : background_(b, static_cast<Eigen::Index>(k));
            }
            sum += f_(scratch_);
        }
        return sum / static_cast<double>(background_.rows());
    }

  private:
    const ScalarFn& f_;
    std::span<const double> x_;
    const Eigen::MatrixXd& background_;
    std::vector<double> scratch_;
};

double binomial(std::size_t n, std::size_t k) {
    double out = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        out *= static_cast<double>(n - i) / static_cast<double>(i + 1);
    }
    return out;
}

}  // namespace

Explanation kernel_shap(const ScalarFn& f, std::span<const double> x,
                        const Eigen::MatrixXd& background, std::size_t n_coalitions,
                        std::uint64_t seed) {
    const std::size_t n = x.size();
    if (n == 0) {
        throw DimensionMismatch("kernel_shap requires at least one feature");
    }
    ValueFunction value(f, x, background);
    std::vector<char> mask(n, 0);
    const double base = value(mask);
    std::fill(mask.begin(), mask.end(), 1);
    const double fx = value(mask);
    const double delta = fx - base;

    Explanation out;
    out.base = base;
    out.fx = fx;
    if (n == 1) {
        out.phi = Eigen::VectorXd::Constant(1, delta);
        return out;
    }
    if (n_coalitions < n + 2) {
        throw SingularRegression("n_coalitions must be at least N+2; increase coalitions");
    }

    // Collect interior coalitions with weights: full enumeration with the
    // exact Shapley kernel when the budget allows, paired sampling with
    // the kernel absorbed into the size distribution otherwise.
    std::vector<std::vector<char>> rows;
    std::vector<double> weights, values;
    const bool enumerate =
        n <= 20 && n_coalitions >= ((std::size_t{1} << n) - 2);
    if (enumerate) {
        for (std::size_t bits = 1; bits + 1 < (std::size_t{1} << n); ++bits) {
            std::vector<char> z(n, 0);
            std::size_t size = 0;
            for (std::size_t k = 0; k < n; ++k) {
                if (bits & (std::size_t{1} << k)) {
                    z[k] = 1;
                    ++size;
                }
            }
            const double w = static_cast<double>(n - 1) /
                             (binomial(n, size) * static_cast<double>(size) *
                              static_cast<double>(n - size));
            values.push_back(value(z));
            rows.push_back(std::move(z));
            weights.push_back(w);
        }
    } else {
        // size distribution p(s) ~ (n-1)/(s (n-s)), the per-size kernel mass
        std::vector<double> size_cdf(n - 1);
        double total = 0.0;
        for (std::size_t s = 1; s < n; ++s) {
            total += 1.0 / (static_cast<double>(s) * static_cast<double>(n - s));
            size_cdf[s - 1] = total;
        }
        for (double& c : size_cdf) c /= total;

        rng::SplitMix64 gen(seed);
        std::vector<std::size_t> perm(n);
        while (rows.size() + 2 <= n_coalitions) {
            const double u = gen.next_unit();
            std::size_t s = 1;
            while (s < n - 1 && u > size_cdf[s - 1]) ++s;
            std::iota(perm.begin(), perm.end(), 0);
            for (std::size_t k = 0; k < s; ++k) {
                const std::size_t j = k + gen.next_below(n - k);
                std::swap(perm[k], perm[j]);
            }
            std::vector<char> z(n, 0);
            for (std::size_t k = 0; k < s; ++k) {
                z[perm[k]] = 1;
            }
            std::vector<char> zc(n);
            for (std::size_t k = 0; k < n; ++k) {
                zc[k] = z[k] ? 0 : 1;
            }
            values.push_back(value(z));
            rows.push_back(std::move(z));
            weights.push_back(1.0);
            values.push_back(value(zc));
            rows.push_back(std::move(zc));
            weights.push_back(1.0);
        }
    }

    // Weighted least squares with the efficiency constraint eliminated:
    // phi_n = delta - sum_{k<n} phi_k.
    const auto m = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(n - 1);
    Eigen::MatrixXd A(m, p);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::vector<char>& z = rows[static_cast<std::size_t>(i)];
        const double zn = z[n - 1];
        for (Eigen::Index k = 0; k < p; ++k) {
            A(i, k) = static_cast<double>(z[static_cast<std::size_t>(k)]) - zn;
        }
        y[i] = values[static_cast<std::size_t>(i)] - base - zn * delta;
    }
    Eigen::MatrixXd awa = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd awy = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double w = weights[static_cast<std::size_t>(i)];
        awa.noalias() += w * A.row(i).transpose() * A.row(i);
        awy.noalias() += w * A.row(i).transpose() * y[i];
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(awa);
    if (ldlt.info() != Eigen::Success) {
        throw SingularRegression("KernelSHAP regression is singular; increase coalitions");
    }
    const Eigen::VectorXd head = ldlt.solve(awy);
    if (!head.allFinite()) {
        throw SingularRegression("KernelSHAP regression is singular; increase coalitions");
    }
    out.phi.resize(static_cast<Eigen::Index>(n));
    out.phi.head(p) = head;
    out.phi[static_cast<Eigen::Index>(n - 1)] = delta - head.sum();
    return out;
}

Explanation exact_shapley(const ScalarFn& f, std::span<const double> x,
                          const Eigen::MatrixXd& background) {
    const std::size_t n = x.size();
    if (n == 0) {
        throw DimensionMismatch("exact_shapley requires at least one feature");
    }
    if (n > 12) {
        throw TooManyFeatures("exact_shapley enumerates 2^N coalitions; N <= 12");
    }
    ValueFunction value(f, x, background);
    const std::size_t n_masks = std::size_t{1} << n;
    std::vector<double> v(n_masks);
    std::vector<char> mask(n);
    for (std::size_t bits = 0; bits < n_masks; ++bits) {
        for (std::size_t k = 0; k < n; ++k) {
            mask[k] = (bits & (std::size_t{1} << k)) ? 1 : 0;
        }
        v[bits] = value(mask);
    }

    std::vector<double> factorial(n + 1, 1.0);
    for (std::size_t i = 1; i <= n; ++i) {
        factorial[i] = factorial[i - 1] * static_cast<double>(i);
    }
    Explanation out;
    out.base = v[0];
    out.fx = v[n_masks - 1];
    out.phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t bit = std::size_t{1} << k;
        double phi = 0.0;
        for (std::size_t bits = 0; bits < n_masks; ++bits) {
            if (bits & bit) continue;
            const auto size = static_cast<std::size_t>(std::popcount(bits));
            const double w =
                factorial[size] * factorial[n - size - 1] / factorial[n];
            phi += w * (v[bits | bit] - v[bits]);
        }
        out.phi[static_cast<Eigen::Index>(k)] = phi;
    }
    return out;
}

std::vector<ImportanceRow> importance(std::span<const Explanation> explanations,
                                      std::span<const std::string> feature_names) {
    if (explanations.empty()) {
        throw EmptySeries("importance requires at least one explanation");
    }
    const auto n = static_cast<std::size_t>(explanations.front().phi.size());
    std::vector<ImportanceRow> rows(n);
    for (std::size_t k = 0; k < n; ++k) {
        rows[k].feature = k;
        rows[k].name = k < feature_names.size() ? feature_names[k]
                                                : "feature_" + std::to_string(k);
    }
    for (const Explanation& e : explanations) {
        if (static_cast<std::size_t>(e.phi.size()) != n) {
            throw DimensionMismatch("explanations have inconsistent width");
        }
        for (std::size_t k = 0; k < n; ++k) {
            rows[k].mean_abs_shap += std::abs(e.phi[static_cast<Eigen::Index>(k)]);
        }
    }
    for (ImportanceRow& row : rows) {
        row.mean_abs_shap /= static_cast<double>(explanations.size());
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ImportanceRow& a, const ImportanceRow& b) {
                         return a.mean_abs_shap > b.mean_abs_shap;
                     });
    return rows;
}

std::vector<std::pair<double, double>> dependency_export(
    std::span<const Explanation> explanations,
    std::span<const std::vector<double>> feature_rows, std::size_t feature) {
    if (explanations.size() != feature_rows.size()) {
        throw DimensionMismatch("explanations and feature rows must align");
    }
    std::vector<std::pair<double, double>> out;
    out.reserve(explanations.size());
    for (std::size_t i = 0; i < explanations.size(); ++i) {
        if (feature >= feature_rows[i].size() ||
            static_cast<Eigen::Index>(feature) >= explanations[i].phi.size()) {
            throw DimensionMismatch("feature index out of range");
        }
        out.emplace_back(feature_rows[i][feature],
                         explanations[i].phi[static_cast<Eigen::Index>(feature)]);
    }
    return out;
}

}  // namespace gridfreq::explain
