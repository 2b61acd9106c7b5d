#include "gridfreq/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "gridfreq/errors.hpp"
#include "gridfreq/moments.hpp"
#include "gridfreq/rng.hpp"

using namespace gridfreq;
using moments::MomentState;
using moments::SystemParams;

TEST(EulerMaruyama, DeterministicLimitMatchesAnalyticMean) {
    const SystemParams p{100.0, 300.0, 0.0, 0.0042, -9e-6};
    sim::SdeConfig cfg;
    cfg.dt = 1e-3;
    const sim::Trajectory traj = sim::euler_maruyama(p, 0.0, 0.0, 900.0, cfg);
    ASSERT_EQ(traj.omega.size(), 900001u);
    const double analytic = moments::mean_omega(p, MomentState{}, 900.0);
    EXPECT_NEAR(traj.omega.back(), analytic, 1e-3 * std::abs(analytic));
}

TEST(EulerMaruyama, SameSeedBitIdentical) {
    const SystemParams p{50.0, 200.0, 0.007, 0.001, 0.0};
    sim::SdeConfig cfg;
    cfg.dt = 0.1;
    cfg.seed = 1234;
    const sim::Trajectory a = sim::euler_maruyama(p, 0.1, 0.01, 900.0, cfg);
    const sim::Trajectory b = sim::euler_maruyama(p, 0.1, 0.01, 900.0, cfg);
    ASSERT_EQ(a.omega.size(), b.omega.size());
    for (std::size_t k = 0; k < a.omega.size(); ++k) {
        ASSERT_EQ(a.omega[k], b.omega[k]);
        ASSERT_EQ(a.theta[k], b.theta[k]);
    }
}

TEST(EulerMaruyama, ZeroInputsZeroPath) {
    const SystemParams p{50.0, 200.0, 0.0, 0.0, 0.0};
    sim::SdeConfig cfg;
    cfg.dt = 0.5;
    const sim::Trajectory traj = sim::euler_maruyama(p, 0.0, 0.0, 900.0, cfg);
    for (std::size_t k = 0; k < traj.omega.size(); ++k) {
        ASSERT_EQ(traj.omega[k], 0.0);
        ASSERT_EQ(traj.theta[k], 0.0);
    }
}

TEST(EulerMaruyama, RejectsOversizedStep) {
    const SystemParams p{1.0, 10.0, 0.007, 0.0, 0.0};
    sim::SdeConfig cfg;
    cfg.dt = 0.2;  // tau/10 = 0.1
    EXPECT_THROW(sim::euler_maruyama(p, 0.0, 0.0, 10.0, cfg), StepTooLarge);
}

TEST(EnsembleMoments, ConvergesToAnalyticMoments) {
    // Monte-Carlo equivalence at reference scale
    const SystemParams p{100.0, 300.0, 0.007, 0.0042, 9e-6};
    sim::SdeConfig cfg;
    cfg.dt = 0.01;
    cfg.n_paths = 4000;
    cfg.seed = 7;
    cfg.threads = 2;
    const std::vector<double> times{10.0, 100.0, 900.0};
    const sim::EnsembleMoments em = sim::ensemble_moments(p, 0.0, 0.0, times, cfg);
    for (std::size_t j = 0; j < times.size(); ++j) {
        const MomentState s = moments::solve_analytic(p, MomentState{}, times[j]);
        const double se = std::sqrt(em.variance[j] / static_cast<double>(cfg.n_paths));
        EXPECT_NEAR(em.mean[j], s.mu_omega, 3.0 * se);
        EXPECT_NEAR(em.variance[j], s.var_omega, 0.05 * s.var_omega);
    }
}

TEST(EnsembleMoments, ThreadCountDoesNotChangeResults) {
    const SystemParams p{60.0, 240.0, 0.01, 0.0, 0.0};
    sim::SdeConfig cfg;
    cfg.dt = 0.05;
    cfg.n_paths = 64;
    cfg.seed = 5;
    const std::vector<double> times{5.0, 50.0};
    cfg.threads = 1;
    const sim::EnsembleMoments a = sim::ensemble_moments(p, 0.0, 0.0, times, cfg);
    cfg.threads = 2;
    const sim::EnsembleMoments b = sim::ensemble_moments(p, 0.0, 0.0, times, cfg);
    for (std::size_t j = 0; j < times.size(); ++j) {
        ASSERT_EQ(a.mean[j], b.mean[j]);
        ASSERT_EQ(a.variance[j], b.variance[j]);
    }
}

TEST(Synthesize, BoundaryContinuityByConstruction) {
    const SystemParams a{50.0, 200.0, 0.005, 0.002, 0.0};
    const SystemParams b{60.0, 250.0, 0.004, -0.001, 1e-6};
    sim::SdeConfig cfg;
    cfg.dt = 0.5;
    cfg.seed = 3;
    const std::vector<SystemParams> intervals{a, b};
    const sim::Trajectory traj = sim::synthesize(intervals, 0.2, 0.01, cfg);
    ASSERT_EQ(traj.t.size(), 2u * 1800u);
    // the first sample of segment 2 must equal the state the single-segment
    // run reaches at t = 900 with the same seed
    const sim::Trajectory first = sim::euler_maruyama(a, 0.2, 0.01, 900.0, cfg);
    const std::size_t boundary = 1800;
    EXPECT_DOUBLE_EQ(traj.omega[boundary], first.omega.back());
    EXPECT_DOUBLE_EQ(traj.theta[boundary], first.theta.back());
    EXPECT_DOUBLE_EQ(traj.t[boundary], 900.0);
}

TEST(Synthesize, ConstantParamsNoNoiseMatchesAnalyticSegments) {
    const SystemParams p{80.0, 280.0, 0.0, 0.003, -6.67e-6};
    sim::SdeConfig cfg;
    cfg.dt = 0.01;
    const std::vector<SystemParams> intervals{p, p, p};
    const sim::Trajectory traj = sim::synthesize(intervals, 0.0, 0.0, cfg);
    // segment-by-segment comparison against the moments solution with the
    // ramp clock reset and chained initial conditions
    MomentState init;
    for (std::size_t seg = 0; seg < 3; ++seg) {
        const std::size_t base = seg * 90000;
        for (std::size_t off : {0ul, 45000ul, 89999ul}) {
            const double t_local = static_cast<double>(off) * cfg.dt;
            const MomentState s = moments::solve_analytic(p, init, t_local);
            EXPECT_NEAR(traj.omega[base + off], s.mu_omega,
                        2e-3 * (std::abs(s.mu_omega) + 1e-3));
        }
        const MomentState end = moments::solve_analytic(p, init, 900.0);
        init.mu_theta = end.mu_theta;
        init.mu_omega = end.mu_omega;
    }
}

TEST(Synthesize, OneDayShape) {
    const SystemParams p{45.0, 160.0, 0.004, 0.0, 0.0};
    sim::SdeConfig cfg;
    cfg.dt = 0.1;
    cfg.seed = 11;
    std::vector<SystemParams> intervals(96, p);
    const sim::Trajectory traj = sim::synthesize(intervals, 0.0, 0.0, cfg);
    EXPECT_EQ(traj.t.size(), 864000u);
    for (double v : traj.omega) {
        ASSERT_TRUE(std::isfinite(v));
    }
}

TEST(Acf, WhiteNoiseDecorrelates) {
    rng::SplitMix64 gen(3);
    std::vector<double> series(100000);
    for (double& v : series) v = gen.next_gaussian();
    const auto rho = sim::acf(series, 100);
    EXPECT_DOUBLE_EQ(rho[0], 1.0);
    const double bound = 3.0 / std::sqrt(static_cast<double>(series.size()));
    for (std::size_t lag = 1; lag <= 100; ++lag) {
        EXPECT_LT(std::abs(rho[lag]), bound);
    }
}

TEST(Acf, CosinePeaksAtItsPeriod) {
    std::vector<double> series(10000);
    const std::size_t period = 100;
    for (std::size_t k = 0; k < series.size(); ++k) {
        series[k] = std::cos(2.0 * M_PI * static_cast<double>(k) /
                             static_cast<double>(period));
    }
    const auto rho = sim::acf(series, 150);
    // the ACF of a cosine is itself cosine-shaped: the period must be the
    // argmax over the surrounding half-period window
    std::size_t argmax = period / 2;
    for (std::size_t lag = period / 2; lag <= period + period / 2; ++lag) {
        if (rho[lag] > rho[argmax]) argmax = lag;
    }
    EXPECT_EQ(argmax, period);
    EXPECT_GT(rho[period], 0.9);
}

TEST(Acf, RejectsShortSeries) {
    const std::vector<double> series{1.0, 2.0, 3.0};
    EXPECT_THROW(sim::acf(series, 3), SeriesTooShort);
}

TEST(Increments, LinearSeriesConstantIncrements) {
    std::vector<double> series(1000);
    for (std::size_t k = 0; k < series.size(); ++k) {
        series[k] = 0.25 * static_cast<double>(k);  // omega = a t with a = 0.25/dt
    }
    const auto inc = sim::increments(series, 10.0, 1.0);
    ASSERT_EQ(inc.size(), 990u);
    for (double v : inc) {
        ASSERT_DOUBLE_EQ(v, 2.5);
    }
}

TEST(Increments, ZeroLagIsZero) {
    const std::vector<double> series{1.0, -2.0, 3.0};
    const auto inc = sim::increments(series, 0.0, 1.0);
    ASSERT_EQ(inc.size(), 3u);
    for (double v : inc) {
        ASSERT_DOUBLE_EQ(v, 0.0);
    }
}

TEST(Increments, IidGaussianVarianceDoubles) {
    rng::SplitMix64 gen(23);
    std::vector<double> series(100000);
    for (double& v : series) v = 1.7 * gen.next_gaussian();
    const auto inc = sim::increments(series, 5.0, 1.0);
    double mean = std::accumulate(inc.begin(), inc.end(), 0.0) /
                  static_cast<double>(inc.size());
    double var = 0.0;
    for (double v : inc) var += (v - mean) * (v - mean);
    var /= static_cast<double>(inc.size());
    EXPECT_NEAR(var, 2.0 * 1.7 * 1.7, 0.05 * 2.0 * 1.7 * 1.7);
}

TEST(Increments, RejectsNonMultipleLag) {
    const std::vector<double> series{1.0, 2.0, 3.0};
    EXPECT_THROW(sim::increments(series, 0.5, 1.0), TOutOfRange);
    EXPECT_THROW(sim::increments(series, 3.0, 1.0), TOutOfRange);
}

TEST(ExcessKurtosis, StandardNormalNearZero) {
    rng::SplitMix64 gen(29);
    std::vector<double> series(1000000);
    for (double& v : series) v = gen.next_gaussian();
    EXPECT_LT(std::abs(sim::excess_kurtosis(series)), 0.05);
}

TEST(ExcessKurtosis, ScaleMixtureIsLeptokurtic) {
    // 50/50 mixture of sigma = 1 and sigma = 3:
    // E[x^2] = 5, E[x^4] = 123 -> excess = 123/25 - 3 = 1.92
    rng::SplitMix64 gen(37);
    std::vector<double> series(400000);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double sigma = (k % 2 == 0) ? 1.0 : 3.0;
        series[k] = sigma * gen.next_gaussian();
    }
    const double excess = sim::excess_kurtosis(series);
    EXPECT_GT(excess, 0.0);
    EXPECT_NEAR(excess, 1.92, 0.15);
}

TEST(ExcessKurtosis, ConstantSeriesGuarded) {
    const std::vector<double> series{2.0, 2.0, 2.0, 2.0, 2.0};
    EXPECT_DOUBLE_EQ(sim::excess_kurtosis(series), 0.0);
    EXPECT_THROW(sim::excess_kurtosis(std::vector<double>{1.0, 2.0}), SeriesTooShort);
}

TEST(HistogramTest, NormalisesToUnitMass) {
    rng::SplitMix64 gen(43);
    std::vector<double> series(10000);
    for (double& v : series) v = gen.next_gaussian();
    const sim::Histogram h = sim::histogram(series, 50);
    double mass = 0.0;
    for (std::size_t b = 0; b < h.density.size(); ++b) {
        mass += h.density[b] * (h.edges[b + 1] - h.edges[b]);
    }
    EXPECT_NEAR(mass, 1.0, 1e-9);
}

TEST(EmpiricalDailyProfile, IdenticalDaysZeroStd) {
    const std::size_t day = 86400;
    std::vector<double> series(2 * day);
    std::vector<std::int64_t> ts(2 * day);
    for (std::size_t k = 0; k < series.size(); ++k) {
        series[k] = std::sin(2.0 * M_PI * static_cast<double>(k % day) / 86400.0);
        ts[k] = static_cast<std::int64_t>(k);
    }
    const sim::DailyProfileStats prof = sim::empirical_daily_profile(series, ts);
    for (std::size_t s = 0; s < day; s += 3600) {
        EXPECT_EQ(prof.count[s], 2u);
        EXPECT_NEAR(prof.stddev[s], 0.0, 1e-12);
        EXPECT_NEAR(prof.mean[s], series[s], 1e-12);
    }
}

TEST(EmpiricalDailyProfile, OppositeDaysCancel) {
    const std::size_t day = 86400;
    std::vector<double> series(2 * day);
    std::vector<std::int64_t> ts(2 * day);
    for (std::size_t k = 0; k < day; ++k) {
        series[k] = 0.5;
        series[day + k] = -0.5;
        ts[k] = static_cast<std::int64_t>(k);
        ts[day + k] = static_cast<std::int64_t>(day + k);
    }
    const sim::DailyProfileStats prof = sim::empirical_daily_profile(series, ts);
    EXPECT_NEAR(prof.mean[1234], 0.0, 1e-15);
    EXPECT_NEAR(prof.stddev[1234], 0.5, 1e-12);
}

TEST(TrajectoryCsv, WritesHeaderAndRows) {
    sim::Trajectory traj;
    traj.t = {0.0, 0.5, 1.0};
    traj.theta = {0.0, 0.1, 0.25};
    traj.omega = {0.01, -0.02, 0.0301};
    const auto path = std::filesystem::temp_directory_path() / "traj_test.csv";
    sim::write_trajectory_csv(traj, path);
    std::ifstream file(path);
    std::string line;
    std::getline(file, line);
    EXPECT_EQ(line, "t_seconds,theta,omega");
    std::getline(file, line);
    EXPECT_EQ(line, "0,0,0.01");
    std::getline(file, line);
    EXPECT_EQ(line, "0.5,0.1,-0.02");
    std::filesystem::remove(path);
}

TEST(EmpiricalDailyProfile, SyntheticMonthTracksDeterministicPattern) {
    // daily-periodic q schedule: the empirical profile of a noisy month
    // correlates with the deterministic (D = 0) daily pattern
    auto schedule_for = [](double D) {
        std::vector<SystemParams> schedule;
        for (int i = 0; i < 96; ++i) {
            const double q =
                0.004 * std::sin(2.0 * M_PI * static_cast<double>(i) / 96.0);
            schedule.push_back(SystemParams{45.0, 160.0, D, q, -2.0 * q / 900.0});
        }
        return schedule;
    };
    sim::SdeConfig cfg;
    cfg.dt = 0.1;
    cfg.seed = 31;
    // deterministic reference day
    const auto det_day = sim::synthesize(schedule_for(0.0), 0.0, 0.0, cfg);
    // ten noisy days
    std::vector<SystemParams> month;
    for (int day = 0; day < 10; ++day) {
        const auto d = schedule_for(0.005);
        month.insert(month.end(), d.begin(), d.end());
    }
    const auto noisy = sim::synthesize(month, 0.0, 0.0, cfg);
    std::vector<double> omega;
    std::vector<std::int64_t> ts;
    for (std::size_t k = 0; k < noisy.omega.size(); k += 10) {
        omega.push_back(noisy.omega[k]);
        ts.push_back(static_cast<std::int64_t>(k / 10));
    }
    const sim::DailyProfileStats prof = sim::empirical_daily_profile(omega, ts);
    double num = 0.0, den_a = 0.0, den_b = 0.0, mean_a = 0.0, mean_b = 0.0;
    const std::size_t n = 86400;
    for (std::size_t s = 0; s < n; ++s) {
        mean_a += prof.mean[s] / static_cast<double>(n);
        mean_b += det_day.omega[s * 10] / static_cast<double>(n);
    }
    for (std::size_t s = 0; s < n; ++s) {
        const double a = prof.mean[s] - mean_a;
        const double b = det_day.omega[s * 10] - mean_b;
        num += a * b;
        den_a += a * a;
        den_b += b * b;
    }
    EXPECT_GT(num / std::sqrt(den_a * den_b), 0.9);
}
