#pragma once

#include <cstdint>
#include <vector>

namespace gridfreq {

/// Contiguous 1 Hz record of the angular frequency deviation
/// omega = 2*pi*(f - f_ref) [rad/s]. Sample k is at start_ts + k seconds.
struct FrequencyRecord {
    std::int64_t start_ts = 0;  ///< UTC unix seconds
    std::vector<double> omega;
};

/// One training example: the techno-economic feature vector of a
/// 15-minute interval together with the observed frequency series and the
/// data-derived initial means.
struct IntervalSample {
    std::size_t index = 0;       ///< position in the chronological dataset
    std::int64_t start_ts = 0;   ///< interval start, UTC unix seconds
    std::vector<double> features;  ///< raw (unnormalised) X(i)
    std::vector<double> omega;     ///< 1 Hz, length floor(t_max)+1
    double mu_omega0 = 0.0;        ///< omega(t_i) [rad/s]
    double mu_theta0 = 0.0;        ///< trailing 60 s integral of omega [rad s]
    bool theta0_fallback = false;  ///< true when history was missing and mu_theta0 = 0
};

}  // namespace gridfreq
