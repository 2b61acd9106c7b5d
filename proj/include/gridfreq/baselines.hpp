#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "gridfreq/dataset.hpp"

namespace gridfreq::baselines {

/// Per-second-of-day Gaussian benchmark fitted on training days.
struct DailyProfile {
    std::vector<double> mean;    ///< 86400 entries [rad/s]
    std::vector<double> stddev;  ///< floored at moments::kSigmaFloor
};

/// Population mean/std per second-of-day over all training days. Requires
/// every second-of-day to be covered at least once (>= 1 full day).
DailyProfile fit_daily_profile(const FrequencyRecord& record);

/// Per-interval NLL of the profile predictor on the same 1 Hz sample grid
/// the model uses (first n_samples points of each interval).
std::vector<double> profile_nll(const DailyProfile& profile,
                                std::span<const IntervalSample> samples,
                                std::size_t n_samples);

/// Global-mean/global-std benchmark.
struct ConstantModel {
    double mean = 0.0;
    double stddev = 0.0;  ///< floored
};

ConstantModel fit_constant(const FrequencyRecord& record);

std::vector<double> constant_nll(const ConstantModel& model,
                                 std::span<const IntervalSample> samples,
                                 std::size_t n_samples);

/// (L_model - L_benchmark) / |L_benchmark|; negative when the model wins.
double relative_loss_increase(double l_model, double l_benchmark);

/// CSV export, columns `second_of_day,mean,std`.
void write_profile_csv(const DailyProfile& profile, const std::filesystem::path& path);

}  // namespace gridfreq::baselines
