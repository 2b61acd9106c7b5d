#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridfreq/dataset.hpp"
#include "gridfreq/nn.hpp"

namespace gridfreq::features {

inline constexpr std::int64_t kIntervalSeconds = 900;

enum class Kind { kLoad, kRenewable, kPrice, kFlow, kGeneration, kOther };
enum class Availability { kDayAhead, kActual };

const char* kind_name(Kind k);
Kind kind_from_name(const std::string& name);
const char* availability_name(Availability a);
Availability availability_from_name(const std::string& name);

/// One techno-economic series as ingested, at its native resolution.
struct RawSeries {
    std::string name;
    std::string country;
    Kind kind = Kind::kOther;
    Availability availability = Availability::kActual;
    int resolution_minutes = 15;  ///< 15 or 60
    std::vector<std::int64_t> timestamps;  ///< UTC unix seconds
    std::vector<double> values;            ///< NaN = missing

    /// Checks regular, strictly increasing timestamps at the native
    /// resolution and a supported resolution (15 or 60 minutes).
    void validate() const;
};

struct ColumnMeta {
    std::string name;
    Kind kind = Kind::kOther;
    Availability availability = Availability::kActual;
    std::string country;
};

/// Interval-indexed feature matrix with named, annotated columns.
struct FeatureTable {
    std::vector<std::int64_t> timestamps;       ///< 15-min interval starts
    std::vector<ColumnMeta> columns;
    std::vector<std::vector<double>> data;      ///< data[col][row]

    std::size_t n_rows() const { return timestamps.size(); }
    std::size_t n_cols() const { return columns.size(); }
    std::optional<std::size_t> find(const std::string& name) const;
    std::vector<double> row(std::size_t i) const;
    /// Column subset by availability (used by --day-ahead-only).
    std::vector<std::size_t> columns_with(Availability a) const;
    FeatureTable select(std::span<const std::size_t> cols) const;
};

/// Resamples to the 15-minute grid: linear interpolation for load and
/// renewable series, forward padding for everything else; native 15-minute
/// data passes through unchanged.
RawSeries upsample(const RawSeries& series);

/// Aligns upsampled series of one country onto a common 15-minute grid
/// (intersection of their spans).
FeatureTable make_table(std::span<const RawSeries> series);

/// Fills missing values: forward-fill up to `max_ffill` intervals, then
/// column-median imputation. Columns that had any gap receive a companion
/// `<name>_was_missing` flag column. Returns the names of imputed columns.
std::vector<std::string> impute(FeatureTable& table, std::size_t max_ffill = 4);

/// Feature engineering: `<base>_forecast_error` = day-ahead minus actual
/// (`<base>_unscheduled` for flows), and `<name>_ramp` = X(i) - X(i-1) per
/// 15 minutes with the first ramp set to 0. Existing columns are not
/// modified. Pairs without a counterpart are skipped and reported through
/// `warnings` when given.
FeatureTable engineer(const FeatureTable& table,
                      std::vector<std::string>* warnings = nullptr);

/// Column-wise aggregation across countries matched by (name, kind,
/// availability): prices are averaged, everything else summed. Throws
/// MisalignedIntervals unless all tables share the same timestamps.
FeatureTable aggregate_area(std::span<const FeatureTable> tables);

/// Adds sin/cos encodings of minute-of-hour, hour-of-day and day-of-week
/// (UTC), all day-ahead available.
void add_time_encodings(FeatureTable& table);

/// Ground-truth feature -> theta rule for the synthetic dataset.
///
/// The generator produces latent drivers (daily sine/cosine and two AR(1)
/// processes), exposes noisy linear mixtures of them as feature columns and
/// maps the latents to raw outputs u, then through the constraint layer:
///
///   u = offset + coeff_daily_sin * sin_d + coeff_daily_cos * cos_d
///       + coeff_market * z_market + coeff_ramp * z_ramp        (per output)
///
/// with u8 overridden so that r = -2 q / 900 (zero interval-mean mismatch).
struct SynthMapping {
    nn::ConstraintSpec spec;
    std::array<double, nn::kThetaDim> offset{};
    std::array<double, nn::kThetaDim> coeff_daily_sin{};
    std::array<double, nn::kThetaDim> coeff_daily_cos{};
    std::array<double, nn::kThetaDim> coeff_market{};
    std::array<double, nn::kThetaDim> coeff_ramp{};
    bool tie_r_to_q = true;

    /// Desk-scale defaults: tau ~ 45 s, kappa ~ 160 s, D ~ 0.007 with a
    /// +-25 % daily swing, q driven by the daily cycle plus the market
    /// latent, r tied to q.
    static SynthMapping defaults();

    nn::ThetaVector theta(double sin_d, double cos_d, double z_market,
                          double z_ramp) const;
};

struct SynthDataset {
    FeatureTable table;
    FrequencyRecord freq;                   ///< 1 Hz, covers all intervals
    std::vector<nn::ThetaVector> truth;     ///< one per interval
};

/// Synthetic ground-truth dataset: correlated daily-periodic features,
/// theta*(i) from `mapping`, and a 1 Hz frequency record simulated with
/// Euler-Maruyama per interval. omega chains across interval boundaries;
/// the initial integral state of each interval is the trailing 60 s
/// integral of the generated record, matching the estimator used when the
/// record is later assembled into training samples.
SynthDataset synth_dataset(std::uint64_t seed, std::size_t n_days,
                           const SynthMapping& mapping = SynthMapping::defaults(),
                           double sim_dt = 0.05);

}  // namespace gridfreq::features
