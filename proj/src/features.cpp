#include "gridfreq/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gridfreq/errors.hpp"
#include "gridfreq/rng.hpp"
#include "gridfreq/simulate.hpp"

namespace gridfreq::features {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

bool is_missing(double v) { return std::isnan(v); }

/// Base identity of a column: the name with any "_da" path segment removed,
/// so "load_da" and "load_da_ramp" reduce to "load" and "load_ramp".
std::string reduced_name(const std::string& name) {
    std::string out;
    std::size_t pos = 0;
    while (pos <= name.size()) {
        const std::size_t next = name.find('_', pos);
        const std::string seg = name.substr(pos, next == std::string::npos
                                                     ? std::string::npos
                                                     : next - pos);
        if (seg != "da") {
            if (!out.empty()) out += '_';
            out += seg;
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2]
                      : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::kLoad: return "load";
        case Kind::kRenewable: return "renewable";
        case Kind::kPrice: return "price";
        case Kind::kFlow: return "flow";
        case Kind::kGeneration: return "generation";
        case Kind::kOther: return "other";
    }
    return "other";
}

Kind kind_from_name(const std::string& name) {
    if (name == "load") return Kind::kLoad;
    if (name == "renewable") return Kind::kRenewable;
    if (name == "price") return Kind::kPrice;
    if (name == "flow") return Kind::kFlow;
    if (name == "generation") return Kind::kGeneration;
    if (name == "other") return Kind::kOther;
    throw ConfigError("unknown feature kind: " + name);
}

const char* availability_name(Availability a) {
    return a == Availability::kDayAhead ? "day_ahead" : "actual";
}

Availability availability_from_name(const std::string& name) {
    if (name == "day_ahead") return Availability::kDayAhead;
    if (name == "actual") return Availability::kActual;
    throw ConfigError("unknown availability: " + name);
}

void RawSeries::validate() const {
    if (resolution_minutes != 15 && resolution_minutes != 60) {
        throw IrregularTimestamps("unsupported native resolution: " +
                                  std::to_string(resolution_minutes) + " min");
    }
    if (timestamps.size() != values.size()) {
        throw DimensionMismatch("series timestamps and values differ in length");
    }
    if (timestamps.empty()) {
        throw EmptySeries("series '" + name + "' is empty");
    }
    const std::int64_t step = 60ll * resolution_minutes;
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        if (timestamps[i] - timestamps[i - 1] != step) {
            throw IrregularTimestamps("series '" + name +
                                      "' is not regular at its native resolution");
        }
    }
}

std::optional<std::size_t> FeatureTable::find(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].name == name) return c;
    }
    return std::nullopt;
}

std::vector<double> FeatureTable::row(std::size_t i) const {
    std::vector<double> out(n_cols());
    for (std::size_t c = 0; c < n_cols(); ++c) {
        out[c] = data[c][i];
    }
    return out;
}

std::vector<std::size_t> FeatureTable::columns_with(Availability a) const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].availability == a) out.push_back(c);
    }
    return out;
}

FeatureTable FeatureTable::select(std::span<const std::size_t> cols) const {
    FeatureTable out;
    out.timestamps = timestamps;
    for (std::size_t c : cols) {
        out.columns.push_back(columns[c]);
        out.data.push_back(data[c]);
    }
    return out;
}

RawSeries upsample(const RawSeries& series) {
    series.validate();
    if (series.resolution_minutes == 15) {
        return series;
    }
    RawSeries out = series;
    out.resolution_minutes = 15;
    out.timestamps.clear();
    out.values.clear();
    const bool interpolate =
        series.kind == Kind::kLoad || series.kind == Kind::kRenewable;
    const std::size_t n = series.timestamps.size();
    out.timestamps.reserve((n - 1) * 4 + 1);
    out.values.reserve((n - 1) * 4 + 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (int sub = 0; sub < 4; ++sub) {
            out.timestamps.push_back(series.timestamps[i] + 900ll * sub);
            if (interpolate) {
                const double w = 0.25 * sub;
                out.values.push_back((1.0 - w) * series.values[i] +
                                     w * series.values[i + 1]);
            } else {
                out.values.push_back(series.values[i]);
            }
        }
    }
    out.timestamps.push_back(series.timestamps[n - 1]);
    out.values.push_back(series.values[n - 1]);
    return out;
}

FeatureTable make_table(std::span<const RawSeries> series) {
    if (series.empty()) {
        throw EmptySeries("make_table requires at least one series");
    }
    std::int64_t start = std::numeric_limits<std::int64_t>::min();
    std::int64_t stop = std::numeric_limits<std::int64_t>::max();
    for (const RawSeries& s : series) {
        if (s.resolution_minutes != 15) {
            throw IrregularTimestamps("make_table expects upsampled 15-min series");
        }
        s.validate();
        start = std::max(start, s.timestamps.front());
        stop = std::min(stop, s.timestamps.back());
    }
    if (stop < start) {
        throw MisalignedIntervals("series do not overlap in time");
    }
    FeatureTable table;
    for (std::int64_t t = start; t <= stop; t += kIntervalSeconds) {
        table.timestamps.push_back(t);
    }
    for (const RawSeries& s : series) {
        if ((start - s.timestamps.front()) % kIntervalSeconds != 0) {
            throw MisalignedIntervals("series '" + s.name +
                                      "' is offset from the common 15-min grid");
        }
        const auto offset =
            static_cast<std::size_t>((start - s.timestamps.front()) / kIntervalSeconds);
        std::vector<double> col(table.timestamps.size());
        for (std::size_t i = 0; i < col.size(); ++i) {
            col[i] = s.values[offset + i];
        }
        table.columns.push_back(ColumnMeta{s.name, s.kind, s.availability, s.country});
        table.data.push_back(std::move(col));
    }
    return table;
}

std::vector<std::string> impute(FeatureTable& table, std::size_t max_ffill) {
    std::vector<std::string> imputed;
    const std::size_t n_original = table.n_cols();
    for (std::size_t c = 0; c < n_original; ++c) {
        std::vector<double>& col = table.data[c];
        const bool had_gap = std::any_of(col.begin(), col.end(), is_missing);
        if (!had_gap) continue;

        std::vector<double> flag(col.size(), 0.0);
        for (std::size_t i = 0; i < col.size(); ++i) {
            if (is_missing(col[i])) flag[i] = 1.0;
        }
        // forward fill, bounded
        std::size_t run = 0;
        for (std::size_t i = 1; i < col.size(); ++i) {
            if (is_missing(col[i]) && !is_missing(col[i - 1]) && run < max_ffill) {
                col[i] = col[i - 1];
                ++run;
            } else if (!is_missing(col[i])) {
                run = 0;
            }
        }
        std::vector<double> present;
        for (double v : col) {
            if (!is_missing(v)) present.push_back(v);
        }
        const double med = median_of(std::move(present));
        for (double& v : col) {
            if (is_missing(v)) v = med;
        }
        imputed.push_back(table.columns[c].name);
        table.columns.push_back(ColumnMeta{table.columns[c].name + "_was_missing",
                                           Kind::kOther, table.columns[c].availability,
                                           table.columns[c].country});
        table.data.push_back(std::move(flag));
    }
    return imputed;
}

FeatureTable engineer(const FeatureTable& table, std::vector<std::string>* warnings) {
    FeatureTable out = table;
    const std::size_t n_original = table.n_cols();

    // ramps of every original column
    for (std::size_t c = 0; c < n_original; ++c) {
        std::vector<double> ramp(table.n_rows(), 0.0);
        for (std::size_t i = 1; i < table.n_rows(); ++i) {
            ramp[i] = table.data[c][i] - table.data[c][i - 1];
        }
        out.columns.push_back(ColumnMeta{table.columns[c].name + "_ramp",
                                         table.columns[c].kind,
                                         table.columns[c].availability,
                                         table.columns[c].country});
        out.data.push_back(std::move(ramp));
    }

    // day-ahead/actual pairs -> forecast errors (unscheduled for flows)
    const std::size_t n_with_ramps = out.n_cols();
    for (std::size_t c = 0; c < n_with_ramps; ++c) {
        if (out.columns[c].availability != Availability::kDayAhead) continue;
        const std::string base = reduced_name(out.columns[c].name);
        std::optional<std::size_t> partner;
        for (std::size_t c2 = 0; c2 < n_with_ramps; ++c2) {
            if (out.columns[c2].availability == Availability::kActual &&
                out.columns[c2].kind == out.columns[c].kind &&
                out.columns[c2].country == out.columns[c].country &&
                reduced_name(out.columns[c2].name) == base) {
                partner = c2;
                break;
            }
        }
        if (!partner) {
            if (warnings) {
                warnings->push_back("no actual counterpart for day-ahead column '" +
                                    out.columns[c].name + "'");
            }
            continue;
        }
        std::vector<double> diff(table.n_rows());
        for (std::size_t i = 0; i < diff.size(); ++i) {
            diff[i] = out.data[c][i] - out.data[*partner][i];
        }
        const bool flow = out.columns[c].kind == Kind::kFlow;
        out.columns.push_back(ColumnMeta{
            base + (flow ? "_unscheduled" : "_forecast_error"),
            out.columns[c].kind, Availability::kActual, out.columns[c].country});
        out.data.push_back(std::move(diff));
    }
    return out;
}

FeatureTable aggregate_area(std::span<const FeatureTable> tables) {
    if (tables.empty()) {
        throw EmptySeries("aggregate_area requires at least one table");
    }
    for (const FeatureTable& t : tables) {
        if (t.timestamps != tables.front().timestamps) {
            throw MisalignedIntervals("country tables have different interval grids");
        }
    }
    FeatureTable out;
    out.timestamps = tables.front().timestamps;

    struct Slot {
        ColumnMeta meta;
        std::vector<double> sum;
        std::size_t count = 0;
    };
    std::vector<Slot> slots;
    auto key_match = [](const ColumnMeta& a, const ColumnMeta& b) {
        return a.name == b.name && a.kind == b.kind && a.availability == b.availability;
    };
    for (const FeatureTable& t : tables) {
        for (std::size_t c = 0; c < t.n_cols(); ++c) {
            auto it = std::find_if(slots.begin(), slots.end(), [&](const Slot& s) {
                return key_match(s.meta, t.columns[c]);
            });
            if (it == slots.end()) {
                slots.push_back(Slot{t.columns[c], t.data[c], 1});
                slots.back().meta.country = "area";
            } else {
                for (std::size_t i = 0; i < it->sum.size(); ++i) {
                    it->sum[i] += t.data[c][i];
                }
                ++it->count;
            }
        }
    }
    for (Slot& s : slots) {
        if (s.meta.kind == Kind::kPrice && s.count > 1) {
            for (double& v : s.sum) {
                v /= static_cast<double>(s.count);
            }
        }
        out.columns.push_back(s.meta);
        out.data.push_back(std::move(s.sum));
    }
    return out;
}

void add_time_encodings(FeatureTable& table) {
    constexpr double kTwoPi = 6.28318530717958647693;
    const std::size_t n = table.n_rows();
    std::vector<double> sin_min(n), cos_min(n), sin_hour(n), cos_hour(n), sin_dow(n),
        cos_dow(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t ts = table.timestamps[i];
        const double minute = static_cast<double>((ts / 60) % 60);
        const double hour = static_cast<double>((ts / 3600) % 24);
        const double dow = static_cast<double>(((ts / 86400) + 3) % 7);  // 0 = Monday
        sin_min[i] = std::sin(kTwoPi * minute / 60.0);
        cos_min[i] = std::cos(kTwoPi * minute / 60.0);
        sin_hour[i] = std::sin(kTwoPi * hour / 24.0);
        cos_hour[i] = std::cos(kTwoPi * hour / 24.0);
        sin_dow[i] = std::sin(kTwoPi * dow / 7.0);
        cos_dow[i] = std::cos(kTwoPi * dow / 7.0);
    }
    const char* names[] = {"sin_minute", "cos_minute", "sin_hour",
                           "cos_hour",   "sin_dayofweek", "cos_dayofweek"};
    std::vector<double>* cols[] = {&sin_min, &cos_min, &sin_hour,
                                   &cos_hour, &sin_dow, &cos_dow};
    for (int j = 0; j < 6; ++j) {
        table.columns.push_back(
            ColumnMeta{names[j], Kind::kOther, Availability::kDayAhead, "area"});
        table.data.push_back(std::move(*cols[j]));
    }
}

SynthMapping SynthMapping::defaults() {
    SynthMapping m;
    // tau ~ 45 s (sigmoid midpoint of (v4, kappa/2)), kappa ~ 160 s
    m.offset = {0.0, 0.0, 0.0, 0.0, 0.955, 0.0, 0.0, 0.0};
    m.coeff_daily_sin = {0.0, 0.0, 0.0, 0.0, 0.0, 0.25, 3.5, 0.0};
    m.coeff_daily_cos = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    m.coeff_market = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.5, 0.0};
    m.coeff_ramp = {0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0};
    return m;
}

nn::ThetaVector SynthMapping::theta(double sin_d, double cos_d, double z_market,
                                    double z_ramp) const {
    Eigen::VectorXd u(nn::kThetaDim);
    for (std::size_t j = 0; j < nn::kThetaDim; ++j) {
        u[static_cast<Eigen::Index>(j)] = offset[j] + coeff_daily_sin[j] * sin_d +
                                          coeff_daily_cos[j] * cos_d +
                                          coeff_market[j] * z_market +
                                          coeff_ramp[j] * z_ramp;
    }
    nn::ThetaVector theta = nn::constrain(u, spec);
    if (tie_r_to_q) {
        theta.r = moments::zero_mean_ramp_rate(theta.q, 900.0);
    }
    return theta;
}

SynthDataset synth_dataset(std::uint64_t seed, std::size_t n_days,
                           const SynthMapping& mapping, double sim_dt) {
    if (n_days < 1) {
        throw NonPositiveInput("synth_dataset requires n_days >= 1");
    }
    constexpr std::int64_t kStartTs = 1609718400;  // 2021-01-04 00:00:00 UTC (Monday)
    const std::size_t n_intervals = 96 * n_days;

    // latent drivers
    rng::SplitMix64 market_gen = rng::SplitMix64::substream(seed, 1);
    rng::SplitMix64 ramp_gen = rng::SplitMix64::substream(seed, 2);
    rng::SplitMix64 noise_gen = rng::SplitMix64::substream(seed, 3);
    std::vector<double> sin_d(n_intervals), cos_d(n_intervals), z_market(n_intervals),
        z_ramp(n_intervals);
    double market = 0.0, ramp = 0.0;
    constexpr double kPhiMarket = 0.97, kPhiRamp = 0.85;
    for (std::size_t i = 0; i < n_intervals; ++i) {
        const double tod = static_cast<double>((i % 96) * 900);
        sin_d[i] = std::sin(2.0 * M_PI * tod / 86400.0);
        cos_d[i] = std::cos(2.0 * M_PI * tod / 86400.0);
        market = kPhiMarket * market +
                 std::sqrt(1.0 - kPhiMarket * kPhiMarket) * market_gen.next_gaussian();
        ramp = kPhiRamp * ramp +
               std::sqrt(1.0 - kPhiRamp * kPhiRamp) * ramp_gen.next_gaussian();
        z_market[i] = market;
        z_ramp[i] = ramp;
    }

    // observable features: noisy mixtures of the latents
    SynthDataset out;
    FeatureTable& table = out.table;
    for (std::size_t i = 0; i < n_intervals; ++i) {
        table.timestamps.push_back(kStartTs + static_cast<std::int64_t>(i) * 900);
    }
    auto add_col = [&](const std::string& name, Kind kind, Availability avail,
                       auto&& value_fn) {
        std::vector<double> col(n_intervals);
        for (std::size_t i = 0; i < n_intervals; ++i) {
            col[i] = value_fn(i);
        }
        table.columns.push_back(ColumnMeta{name, kind, avail, "synth"});
        table.data.push_back(std::move(col));
    };
    auto eps = [&](double scale) { return scale * noise_gen.next_gaussian(); };
    add_col("load_da", Kind::kLoad, Availability::kDayAhead, [&](std::size_t i) {
        return 100.0 + 10.0 * z_ramp[i] + 5.0 * sin_d[i] + eps(0.5);
    });
    add_col("load", Kind::kLoad, Availability::kActual, [&](std::size_t i) {
        return table.data[0][i] + 0.8 * z_market[i] + eps(0.3);
    });
    add_col("gen_da", Kind::kGeneration, Availability::kDayAhead, [&](std::size_t i) {
        return 95.0 + 6.0 * z_market[i] + 4.0 * cos_d[i] + eps(0.5);
    });
    add_col("gen", Kind::kGeneration, Availability::kActual, [&](std::size_t i) {
        return table.data[2][i] + 0.5 * z_ramp[i] + eps(0.3);
    });
    add_col("wind", Kind::kRenewable, Availability::kActual, [&](std::size_t i) {
        return 30.0 + 5.0 * z_ramp[i] - 3.0 * z_market[i] + eps(1.0);
    });
    add_col("price_da", Kind::kPrice, Availability::kDayAhead, [&](std::size_t i) {
        return 50.0 + 10.0 * sin_d[i] + 4.0 * z_market[i] + eps(1.0);
    });
    add_col("flow_da", Kind::kFlow, Availability::kDayAhead, [&](std::size_t i) {
        return 10.0 + 3.0 * z_ramp[i] + eps(0.5);
    });
    add_col("flow", Kind::kFlow, Availability::kActual, [&](std::size_t i) {
        return table.data[6][i] - 0.6 * z_market[i] + eps(0.2);
    });
    add_col("noise_a", Kind::kOther, Availability::kActual,
            [&](std::size_t) { return eps(1.0); });
    add_col("noise_b", Kind::kOther, Availability::kDayAhead,
            [&](std::size_t) { return eps(1.0); });
    table = engineer(table);
    add_time_encodings(table);

    // ground truth per interval
    out.truth.reserve(n_intervals);
    for (std::size_t i = 0; i < n_intervals; ++i) {
        out.truth.push_back(mapping.theta(sin_d[i], cos_d[i], z_market[i], z_ramp[i]));
    }

    // 1 Hz record simulated interval by interval; omega chains across
    // boundaries, theta re-anchors to the trailing 60 s trapezoid of the
    // recorded samples so the training-side estimator is exact.
    const auto steps_per_s = static_cast<std::size_t>(std::llround(1.0 / sim_dt));
    if (std::abs(static_cast<double>(steps_per_s) * sim_dt - 1.0) > 1e-9) {
        throw TOutOfRange("sim_dt must divide 1 s");
    }
    out.freq.start_ts = kStartTs;
    out.freq.omega.assign(n_intervals * 900 + 1, 0.0);
    double omega_state = 0.0;
    double theta_state = 0.0;
    for (std::size_t i = 0; i < n_intervals; ++i) {
        const moments::SystemParams p = out.truth[i].system();
        if (sim_dt > p.tau / 10.0) {
            throw StepTooLarge("synth_dataset step exceeds tau/10");
        }
        rng::SplitMix64 gen = rng::SplitMix64::substream(seed, 1000 + i);
        const double inv_tau = 1.0 / p.tau;
        const double inv_k2 = 1.0 / (p.kappa * p.kappa);
        const double d_sqrt_dt = p.D * std::sqrt(sim_dt);
        double theta = theta_state, omega = omega_state;
        const std::size_t base = i * 900;
        for (std::size_t s = 0; s < 900; ++s) {
            out.freq.omega[base + s] = omega;
            for (std::size_t sub = 0; sub < steps_per_s; ++sub) {
                const double t_local =
                    static_cast<double>(s) + static_cast<double>(sub) * sim_dt;
                const double drift =
                    p.q + p.r * t_local - omega * inv_tau - theta * inv_k2;
                const double omega_next =
                    omega + drift * sim_dt + d_sqrt_dt * gen.next_gaussian();
                theta += omega * sim_dt;
                omega = omega_next;
            }
        }
        omega_state = omega;
        // trailing 60 s trapezoid over the recorded 1 Hz samples
        if (i + 1 < n_intervals) {
            const std::size_t end = base + 900;
            out.freq.omega[end] = omega;  // provisional boundary sample
            double integral = 0.0;
            for (std::size_t s = end - 60; s < end; ++s) {
                integral += 0.5 * (out.freq.omega[s] + out.freq.omega[s + 1]);
            }
            theta_state = integral;
        } else {
            out.freq.omega[base + 900] = omega;
        }
    }
    return out;
}

}  // namespace gridfreq::features
