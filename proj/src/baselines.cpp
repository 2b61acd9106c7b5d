#include "gridfreq/baselines.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "gridfreq/errors.hpp"
#include "gridfreq/moments.hpp"

namespace gridfreq::baselines {

DailyProfile fit_daily_profile(const FrequencyRecord& record) {
    constexpr std::size_t kDay = 86400;
    if (record.omega.size() < kDay) {
        throw InsufficientData("daily profile requires at least one full day");
    }
    std::vector<double> sum(kDay, 0.0), sum_sq(kDay, 0.0);
    std::vector<std::size_t> count(kDay, 0);
    for (std::size_t k = 0; k < record.omega.size(); ++k) {
        const std::int64_t ts = record.start_ts + static_cast<std::int64_t>(k);
        const auto sod = static_cast<std::size_t>(((ts % 86400) + 86400) % 86400);
        sum[sod] += record.omega[k];
        sum_sq[sod] += record.omega[k] * record.omega[k];
        ++count[sod];
    }
    DailyProfile profile;
    profile.mean.resize(kDay);
    profile.stddev.resize(kDay);
    for (std::size_t s = 0; s < kDay; ++s) {
        if (count[s] == 0) {
            throw InsufficientData("daily profile has uncovered seconds of day");
        }
        const double n = static_cast<double>(count[s]);
        profile.mean[s] = sum[s] / n;
        const double var = std::max(0.0, sum_sq[s] / n - profile.mean[s] * profile.mean[s]);
        profile.stddev[s] = std::max(std::sqrt(var), moments::kSigmaFloor);
    }
    return profile;
}

std::vector<double> profile_nll(const DailyProfile& profile,
                                std::span<const IntervalSample> samples,
                                std::size_t n_samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const IntervalSample& sample : samples) {
        if (n_samples == 0 || n_samples > sample.omega.size()) {
            throw DimensionMismatch("n_samples exceeds the stored omega series");
        }
        double nll = 0.0;
        for (std::size_t k = 0; k < n_samples; ++k) {
            const std::int64_t ts = sample.start_ts + static_cast<std::int64_t>(k);
            const auto sod = static_cast<std::size_t>(((ts % 86400) + 86400) % 86400);
            nll += moments::gaussian_nll_term(sample.omega[k], profile.mean[sod],
                                              profile.stddev[sod]);
        }
        out.push_back(nll);
    }
    return out;
}

ConstantModel fit_constant(const FrequencyRecord& record) {
    if (record.omega.empty()) {
        throw InsufficientData("constant model requires a non-empty record");
    }
    const double n = static_cast<double>(record.omega.size());
    double sum = 0.0, sum_sq = 0.0;
    for (double v : record.omega) {
        sum += v;
        sum_sq += v * v;
    }
    ConstantModel model;
    model.mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - model.mean * model.mean);
    model.stddev = std::max(std::sqrt(var), moments::kSigmaFloor);
    return model;
}

std::vector<double> constant_nll(const ConstantModel& model,
                                 std::span<const IntervalSample> samples,
                                 std::size_t n_samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const IntervalSample& sample : samples) {
        if (n_samples == 0 || n_samples > sample.omega.size()) {
            throw DimensionMismatch("n_samples exceeds the stored omega series");
        }
        double nll = 0.0;
        for (std::size_t k = 0; k < n_samples; ++k) {
            nll += moments::gaussian_nll_term(sample.omega[k], model.mean, model.stddev);
        }
        out.push_back(nll);
    }
    return out;
}

double relative_loss_increase(double l_model, double l_benchmark) {
    if (l_benchmark == 0.0) {
        throw ZeroBenchmark("relative loss increase is undefined for a zero benchmark");
    }
    return (l_model - l_benchmark) / std::abs(l_benchmark);
}

void write_profile_csv(const DailyProfile& profile, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    file << "second_of_day,mean,std\n";
    char buf[32];
    auto put = [&](double v, char sep) {
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        file.write(buf, res.ptr - buf);
        file.put(sep);
    };
    for (std::size_t s = 0; s < profile.mean.size(); ++s) {
        file << s << ',';
        put(profile.mean[s], ',');
        put(profile.stddev[s], '\n');
    }
}

}  // namespace gridfreq::baselines
