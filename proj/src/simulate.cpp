#include "gridfreq/simulate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>

#include "gridfreq/errors.hpp"
#include "gridfreq/rng.hpp"

namespace gridfreq::sim {

namespace {

std::size_t steps_for(double t_span, double dt) {
    const double n = t_span / dt;
    const auto steps = static_cast<std::size_t>(std::llround(n));
    if (std::abs(static_cast<double>(steps) * dt - t_span) > 1e-9 * std::max(1.0, t_span)) {
        throw TOutOfRange("time span must be an integer multiple of dt");
    }
    return steps;
}

struct SdeStepper {
    double inv_tau, inv_k2, q, r, D_sqrt_dt, dt;

    explicit SdeStepper(const moments::SystemParams& p, double dt_)
        : inv_tau(1.0 / p.tau),
          inv_k2(1.0 / (p.kappa * p.kappa)),
          q(p.q),
          r(p.r),
          D_sqrt_dt(p.D * std::sqrt(dt_)),
          dt(dt_) {}

    void step(double t_local, double& theta, double& omega, double z) const {
        const double drift = q + r * t_local - omega * inv_tau - theta * inv_k2;
        const double omega_next = omega + drift * dt + D_sqrt_dt * z;
        theta += omega * dt;
        omega = omega_next;
    }
};

void check_step(const moments::SystemParams& p, double dt) {
    if (dt > p.tau / 10.0) {
        throw StepTooLarge("Euler-Maruyama step exceeds tau/10");
    }
}

}  // namespace

void SdeConfig::validate() const {
    if (!(dt > 0.0)) {
        throw NonPositiveInput("SdeConfig.dt must be positive");
    }
    if (n_paths < 1) {
        throw NonPositiveInput("SdeConfig.n_paths must be >= 1");
    }
}

Trajectory euler_maruyama(const moments::SystemParams& p, double theta0, double omega0,
                          double t_max, const SdeConfig& cfg) {
    p.validate();
    cfg.validate();
    check_step(p, cfg.dt);
    const std::size_t n = steps_for(t_max, cfg.dt);
    rng::SplitMix64 gen = rng::SplitMix64::substream(cfg.seed, 0);
    const SdeStepper stepper(p, cfg.dt);

    Trajectory traj;
    traj.t.resize(n + 1);
    traj.theta.resize(n + 1);
    traj.omega.resize(n + 1);
    double theta = theta0, omega = omega0;
    traj.t[0] = 0.0;
    traj.theta[0] = theta;
    traj.omega[0] = omega;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        stepper.step(t, theta, omega, p.D > 0.0 ? gen.next_gaussian() : 0.0);
        traj.t[k + 1] = static_cast<double>(k + 1) * cfg.dt;
        traj.theta[k + 1] = theta;
        traj.omega[k + 1] = omega;
    }
    return traj;
}

Trajectory synthesize(std::span<const moments::SystemParams> intervals, double theta0,
                      double omega0, const SdeConfig& cfg, double interval_seconds) {
    cfg.validate();
    if (intervals.empty()) {
        throw EmptySeries("synthesize requires at least one parameter set");
    }
    const std::size_t steps = steps_for(interval_seconds, cfg.dt);
    rng::SplitMix64 gen = rng::SplitMix64::substream(cfg.seed, 0);

    Trajectory traj;
    const std::size_t total = intervals.size() * steps;
    traj.t.reserve(total);
    traj.theta.reserve(total);
    traj.omega.reserve(total);
    double theta = theta0, omega = omega0;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const moments::SystemParams& p = intervals[i];
        p.validate();
        check_step(p, cfg.dt);
        const SdeStepper stepper(p, cfg.dt);
        const double start = static_cast<double>(i) * interval_seconds;
        for (std::size_t k = 0; k < steps; ++k) {
            const double t_local = static_cast<double>(k) * cfg.dt;
            traj.t.push_back(start + t_local);
            traj.theta.push_back(theta);
            traj.omega.push_back(omega);
            stepper.step(t_local, theta, omega, p.D > 0.0 ? gen.next_gaussian() : 0.0);
        }
    }
    return traj;
}

EnsembleMoments ensemble_moments(const moments::SystemParams& p, double theta0,
                                 double omega0, std::span<const double> t_eval,
                                 const SdeConfig& cfg) {
    p.validate();
    cfg.validate();
    check_step(p, cfg.dt);
    if (t_eval.empty()) {
        throw EmptySeries("ensemble_moments requires evaluation times");
    }
    std::vector<std::size_t> eval_steps;
    eval_steps.reserve(t_eval.size());
    for (double t : t_eval) {
        eval_steps.push_back(steps_for(t, cfg.dt));
    }
    const std::size_t n_steps = *std::max_element(eval_steps.begin(), eval_steps.end());

    // One pass per path; per-eval-time accumulators merged in path order so
    // the result is bit-identical regardless of the thread count.
    const std::size_t n_eval = t_eval.size();
    struct Acc {
        std::vector<double> sum, sum_sq;
    };
    auto run_range = [&](std::size_t begin, std::size_t end) {
        Acc acc{std::vector<double>(n_eval, 0.0), std::vector<double>(n_eval, 0.0)};
        const SdeStepper stepper(p, cfg.dt);
        for (std::size_t path = begin; path < end; ++path) {
            rng::SplitMix64 gen = rng::SplitMix64::substream(cfg.seed, path);
            double theta = theta0, omega = omega0;
            std::size_t next_eval = 0;
            for (std::size_t k = 0; k <= n_steps; ++k) {
                while (next_eval < n_eval && eval_steps[next_eval] == k) {
                    acc.sum[next_eval] += omega;
                    acc.sum_sq[next_eval] += omega * omega;
                    ++next_eval;
                }
                if (k == n_steps) break;
                stepper.step(static_cast<double>(k) * cfg.dt, theta, omega,
                             p.D > 0.0 ? gen.next_gaussian() : 0.0);
            }
        }
        return acc;
    };

    // Requires eval_steps sorted ascending for the single-pass probe logic.
    if (!std::is_sorted(eval_steps.begin(), eval_steps.end())) {
        throw TOutOfRange("ensemble_moments requires ascending evaluation times");
    }

    // Fixed chunk size: the partial sums and their reduction order do not
    // depend on the thread count, so results are bit-identical for any
    // cfg.threads.
    constexpr std::size_t kChunk = 256;
    std::vector<double> sum(n_eval, 0.0), sum_sq(n_eval, 0.0);
    auto reduce = [&](const Acc& acc) {
        for (std::size_t j = 0; j < n_eval; ++j) {
            sum[j] += acc.sum[j];
            sum_sq[j] += acc.sum_sq[j];
        }
    };
    if (cfg.threads <= 1) {
        for (std::size_t begin = 0; begin < cfg.n_paths; begin += kChunk) {
            reduce(run_range(begin, std::min(begin + kChunk, cfg.n_paths)));
        }
    } else {
        std::vector<std::future<Acc>> futures;
        for (std::size_t begin = 0; begin < cfg.n_paths; begin += kChunk) {
            futures.push_back(std::async(std::launch::async, run_range, begin,
                                         std::min(begin + kChunk, cfg.n_paths)));
        }
        for (auto& f : futures) {
            reduce(f.get());
        }
    }

    EnsembleMoments out;
    out.t.assign(t_eval.begin(), t_eval.end());
    out.mean.resize(n_eval);
    out.variance.resize(n_eval);
    const double n = static_cast<double>(cfg.n_paths);
    for (std::size_t j = 0; j < n_eval; ++j) {
        out.mean[j] = sum[j] / n;
        out.variance[j] = std::max(0.0, sum_sq[j] / n - out.mean[j] * out.mean[j]);
    }
    return out;
}

std::vector<double> acf(std::span<const double> series, std::size_t max_lag) {
    if (series.size() <= max_lag) {
        throw SeriesTooShort("acf requires series length > max_lag");
    }
    const std::size_t n = series.size();
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) /
                        static_cast<double>(n);
    std::vector<double> centered(n);
    for (std::size_t i = 0; i < n; ++i) {
        centered[i] = series[i] - mean;
    }
    std::vector<double> out(max_lag + 1);
    double c0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        c0 += centered[i] * centered[i];
    }
    c0 /= static_cast<double>(n);
    if (c0 <= 0.0) {
        throw SeriesTooShort("acf of a constant series is undefined");
    }
    out[0] = 1.0;
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        double c = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) {
            c += centered[i] * centered[i + lag];
        }
        out[lag] = c / (static_cast<double>(n) * c0);
    }
    return out;
}

std::vector<double> increments(std::span<const double> series, double T, double dt) {
    if (!(dt > 0.0)) {
        throw NonPositiveInput("increments requires dt > 0");
    }
    if (T < 0.0) {
        throw TOutOfRange("increments requires T >= 0");
    }
    const double ratio = T / dt;
    const auto shift = static_cast<std::size_t>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(shift)) > 1e-9) {
        throw TOutOfRange("T must be a multiple of dt");
    }
    if (shift >= series.size()) {
        throw TOutOfRange("T/dt must be smaller than the series length");
    }
    std::vector<double> out(series.size() - shift);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = series[i + shift] - series[i];
    }
    return out;
}

double excess_kurtosis(std::span<const double> series) {
    if (series.size() < 4) {
        throw SeriesTooShort("excess_kurtosis requires n >= 4");
    }
    const double n = static_cast<double>(series.size());
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
    double m2 = 0.0, m4 = 0.0;
    for (double x : series) {
        const double d = x - mean;
        const double d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if (m2 <= 0.0) {
        return 0.0;  // zero-variance guard for a constant series
    }
    return m4 / (m2 * m2) - 3.0;
}

Histogram histogram(std::span<const double> series, std::size_t bins) {
    if (series.size() < 4) {
        throw SeriesTooShort("histogram requires n >= 4");
    }
    if (bins == 0) {
        throw NonPositiveInput("histogram requires bins >= 1");
    }
    const auto [lo_it, hi_it] = std::minmax_element(series.begin(), series.end());
    double lo = *lo_it, hi = *hi_it;
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
        h.edges[b] = lo + width * static_cast<double>(b);
    }
    h.density.assign(bins, 0.0);
    for (double x : series) {
        auto b = static_cast<std::size_t>((x - lo) / width);
        if (b >= bins) b = bins - 1;  // top edge inclusive
        h.density[b] += 1.0;
    }
    const double norm = static_cast<double>(series.size()) * width;
    for (double& d : h.density) {
        d /= norm;
    }
    return h;
}

DailyProfileStats empirical_daily_profile(std::span<const double> series,
                                          std::span<const std::int64_t> timestamps) {
    if (series.size() != timestamps.size()) {
        throw DimensionMismatch("series and timestamps must have equal length");
    }
    constexpr std::size_t kDay = 86400;
    DailyProfileStats out;
    out.mean.assign(kDay, 0.0);
    out.stddev.assign(kDay, 0.0);
    out.count.assign(kDay, 0);
    std::vector<double> sum(kDay, 0.0), sum_sq(kDay, 0.0);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto sod = static_cast<std::size_t>(((timestamps[i] % 86400) + 86400) % 86400);
        sum[sod] += series[i];
        sum_sq[sod] += series[i] * series[i];
        ++out.count[sod];
    }
    for (std::size_t s = 0; s < kDay; ++s) {
        if (out.count[s] == 0) continue;
        const double n = static_cast<double>(out.count[s]);
        out.mean[s] = sum[s] / n;
        out.stddev[s] = std::sqrt(std::max(0.0, sum_sq[s] / n - out.mean[s] * out.mean[s]));
    }
    return out;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    file << "t_seconds,theta,omega\n";
    char buf[32];
    auto put = [&](double v, char sep) {
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        file.write(buf, res.ptr - buf);
        file.put(sep);
    };
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
        put(traj.t[i], ',');
        put(traj.theta[i], ',');
        put(traj.omega[i], '\n');
    }
}

}  // namespace gridfreq::sim
