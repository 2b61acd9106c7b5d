#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gridfreq/moments.hpp"

namespace gridfreq::sim {

/// One sampled (t, theta, omega) path.
struct Trajectory {
    std::vector<double> t;      ///< [s], strictly increasing
    std::vector<double> theta;  ///< [rad s]
    std::vector<double> omega;  ///< [rad/s]
};

struct SdeConfig {
    double dt = 0.01;           ///< integration step [s]
    std::uint64_t seed = 0;     ///< master seed; paths use substreams
    std::size_t n_paths = 1;    ///< ensemble size for ensemble_moments
    unsigned threads = 1;       ///< path-level parallelism (result-invariant)

    void validate() const;
};

/// Euler-Maruyama integration of the interval SDE over [0, t_max]:
///
///   omega_{k+1} = omega_k + (q + r t_k - omega_k/tau - theta_k/kappa^2) dt
///                 + D sqrt(dt) z_k,
///   theta_{k+1} = theta_k + omega_k dt.
///
/// Deterministic given cfg.seed (path substream 0). Requires dt <= tau/10.
Trajectory euler_maruyama(const moments::SystemParams& p, double theta0, double omega0,
                          double t_max, const SdeConfig& cfg);

/// Chained multi-interval scenario generation.
///
/// Every parameter set drives one segment of `interval_seconds`; the ramp
/// clock in P(t) = q + r t restarts at each segment. Both theta and omega
/// carry over across the boundary, so segment i+1 begins exactly in the
/// final state of segment i. Each segment contributes interval_seconds/dt
/// samples covering [start, start + interval_seconds); the state reached
/// at the very end of the last segment is not emitted.
Trajectory synthesize(std::span<const moments::SystemParams> intervals, double theta0,
                      double omega0, const SdeConfig& cfg,
                      double interval_seconds = 900.0);

/// Sample mean and variance of omega over an Euler-Maruyama ensemble,
/// evaluated at the requested times. Path k draws from substream k, so the
/// result is independent of the execution order of paths.
struct EnsembleMoments {
    std::vector<double> t;
    std::vector<double> mean;
    std::vector<double> variance;  ///< population convention (1/N)
};
EnsembleMoments ensemble_moments(const moments::SystemParams& p, double theta0,
                                 double omega0, std::span<const double> t_eval,
                                 const SdeConfig& cfg);

/// Biased sample autocorrelation, normalised to acf[0] = 1.
/// Requires series.size() > max_lag.
std::vector<double> acf(std::span<const double> series, std::size_t max_lag);

/// Shifted differences delta_T(t) = x(t + T) - x(t); T must be a
/// non-negative multiple of dt with T/dt < series length.
std::vector<double> increments(std::span<const double> series, double T, double dt);

/// Sample excess kurtosis m4/m2^2 - 3 (population moments). Requires
/// n >= 4; returns 0 for a (numerically) constant series.
double excess_kurtosis(std::span<const double> series);

/// Normalised histogram: density[i] integrates to 1 over [edges_0, edges_n].
struct Histogram {
    std::vector<double> edges;    ///< size bins + 1
    std::vector<double> density;  ///< size bins
};
Histogram histogram(std::span<const double> series, std::size_t bins);

/// Per-second-of-day mean and standard deviation across days.
/// Timestamps are UTC unix seconds aligned to the sampling grid.
struct DailyProfileStats {
    std::vector<double> mean;          ///< size 86400; 0 where count == 0
    std::vector<double> stddev;        ///< population convention
    std::vector<std::size_t> count;
};
DailyProfileStats empirical_daily_profile(std::span<const double> series,
                                          std::span<const std::int64_t> timestamps);

/// CSV export, columns `t_seconds,theta,omega`, shortest round-trip decimals.
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);

}  // namespace gridfreq::sim
