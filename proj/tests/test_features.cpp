#include "gridfreq/features.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gridfreq/errors.hpp"

using namespace gridfreq;
using features::Availability;
using features::FeatureTable;
using features::Kind;
using features::RawSeries;

namespace {

RawSeries hourly_series(const std::string& name, Kind kind,
                        std::vector<double> values) {
    RawSeries s;
    s.name = name;
    s.country = "AA";
    s.kind = kind;
    s.availability = Availability::kActual;
    s.resolution_minutes = 60;
    for (std::size_t k = 0; k < values.size(); ++k) {
        s.timestamps.push_back(1609718400 + static_cast<std::int64_t>(k) * 3600);
    }
    s.values = std::move(values);
    return s;
}

FeatureTable small_table(std::vector<double> col, const std::string& name, Kind kind,
                         Availability avail) {
    FeatureTable t;
    for (std::size_t i = 0; i < col.size(); ++i) {
        t.timestamps.push_back(1609718400 + static_cast<std::int64_t>(i) * 900);
    }
    t.columns.push_back(features::ColumnMeta{name, kind, avail, "AA"});
    t.data.push_back(std::move(col));
    return t;
}

}  // namespace

TEST(Upsample, LinearInterpolationForLoad) {
    const RawSeries out = features::upsample(hourly_series("load", Kind::kLoad, {1.0, 2.0}));
    ASSERT_EQ(out.values.size(), 5u);
    EXPECT_DOUBLE_EQ(out.values[0], 1.0);
    EXPECT_DOUBLE_EQ(out.values[1], 1.25);
    EXPECT_DOUBLE_EQ(out.values[2], 1.5);
    EXPECT_DOUBLE_EQ(out.values[3], 1.75);
    EXPECT_DOUBLE_EQ(out.values[4], 2.0);
    EXPECT_EQ(out.resolution_minutes, 15);
}

TEST(Upsample, ForwardPaddingForPrices) {
    const RawSeries out =
        features::upsample(hourly_series("price", Kind::kPrice, {1.0, 2.0}));
    ASSERT_EQ(out.values.size(), 5u);
    EXPECT_DOUBLE_EQ(out.values[0], 1.0);
    EXPECT_DOUBLE_EQ(out.values[1], 1.0);
    EXPECT_DOUBLE_EQ(out.values[2], 1.0);
    EXPECT_DOUBLE_EQ(out.values[3], 1.0);
    EXPECT_DOUBLE_EQ(out.values[4], 2.0);
}

TEST(Upsample, FifteenMinuteIdentity) {
    RawSeries s = hourly_series("wind", Kind::kRenewable, {3.0, 4.0});
    s.resolution_minutes = 15;
    s.timestamps = {0, 900};
    const RawSeries out = features::upsample(s);
    EXPECT_EQ(out.values, s.values);
    EXPECT_EQ(out.timestamps, s.timestamps);
}

TEST(Upsample, EndpointsPreservedAndMonotoneBetweenKnots) {
    const RawSeries src =
        hourly_series("load", Kind::kLoad, {5.0, 2.0, 7.5, 7.5, -1.0});
    const RawSeries out = features::upsample(src);
    for (std::size_t knot = 0; knot < src.values.size(); ++knot) {
        EXPECT_DOUBLE_EQ(out.values[knot * 4], src.values[knot]);
    }
    for (std::size_t knot = 0; knot + 1 < src.values.size(); ++knot) {
        const double lo = std::min(src.values[knot], src.values[knot + 1]);
        const double hi = std::max(src.values[knot], src.values[knot + 1]);
        for (int sub = 1; sub < 4; ++sub) {
            const double v = out.values[knot * 4 + sub];
            EXPECT_GE(v, lo);
            EXPECT_LE(v, hi);
        }
    }
}

TEST(Upsample, RejectsUnsupportedResolution) {
    RawSeries s = hourly_series("x", Kind::kOther, {1.0, 2.0});
    s.resolution_minutes = 30;
    s.timestamps = {0, 1800};
    EXPECT_THROW(features::upsample(s), IrregularTimestamps);
    RawSeries irregular = hourly_series("y", Kind::kOther, {1.0, 2.0, 3.0});
    irregular.timestamps[2] += 60;
    EXPECT_THROW(features::upsample(irregular), IrregularTimestamps);
}

TEST(Engineer, ForecastErrorRampAndUnscheduled) {
    FeatureTable t = small_table({5.0, 5.0, 5.0}, "gen_da", Kind::kGeneration,
                                 Availability::kDayAhead);
    t.columns.push_back(
        features::ColumnMeta{"gen", Kind::kGeneration, Availability::kActual, "AA"});
    t.data.push_back({3.0, 3.0, 3.0});
    t.columns.push_back(
        features::ColumnMeta{"flow_da", Kind::kFlow, Availability::kDayAhead, "AA"});
    t.data.push_back({7.0, 7.0, 7.0});
    t.columns.push_back(
        features::ColumnMeta{"flow", Kind::kFlow, Availability::kActual, "AA"});
    t.data.push_back({4.0, 4.0, 4.0});
    t.columns.push_back(
        features::ColumnMeta{"load", Kind::kLoad, Availability::kActual, "AA"});
    t.data.push_back({1.0, 3.0, 3.0});

    const FeatureTable out = features::engineer(t);
    const auto err = out.find("gen_forecast_error");
    ASSERT_TRUE(err.has_value());
    EXPECT_DOUBLE_EQ(out.data[*err][0], 2.0);
    const auto uns = out.find("flow_unscheduled");
    ASSERT_TRUE(uns.has_value());
    EXPECT_DOUBLE_EQ(out.data[*uns][0], 3.0);
    const auto ramp = out.find("load_ramp");
    ASSERT_TRUE(ramp.has_value());
    EXPECT_DOUBLE_EQ(out.data[*ramp][0], 0.0);  // first interval flagged zero
    EXPECT_DOUBLE_EQ(out.data[*ramp][1], 2.0);
    EXPECT_DOUBLE_EQ(out.data[*ramp][2], 0.0);
    // existing columns untouched
    EXPECT_DOUBLE_EQ(out.data[*out.find("gen_da")][1], 5.0);
    // ramps of day-ahead columns pair up too
    EXPECT_TRUE(out.find("gen_ramp_forecast_error").has_value());
}

TEST(Engineer, ConstantSeriesHasZeroRamp) {
    const FeatureTable t =
        small_table({2.5, 2.5, 2.5, 2.5}, "gen", Kind::kGeneration,
                    Availability::kActual);
    const FeatureTable out = features::engineer(t);
    const auto ramp = out.find("gen_ramp");
    ASSERT_TRUE(ramp.has_value());
    for (double v : out.data[*ramp]) {
        EXPECT_DOUBLE_EQ(v, 0.0);
    }
}

TEST(Engineer, MissingCounterpartWarnsAndSkips) {
    const FeatureTable t = small_table({5.0, 6.0}, "solar_da", Kind::kRenewable,
                                       Availability::kDayAhead);
    std::vector<std::string> warnings;
    const FeatureTable out = features::engineer(t, &warnings);
    EXPECT_FALSE(out.find("solar_forecast_error").has_value());
    ASSERT_EQ(warnings.size(), 2u);  // the column and its ramp
}

TEST(AggregateArea, SumsQuantitiesAveragesPrices) {
    FeatureTable a = small_table({3.0, 3.0}, "load", Kind::kLoad, Availability::kActual);
    a.columns.push_back(
        features::ColumnMeta{"price", Kind::kPrice, Availability::kActual, "AA"});
    a.data.push_back({10.0, 10.0});
    FeatureTable b = small_table({4.0, 4.0}, "load", Kind::kLoad, Availability::kActual);
    b.columns.push_back(
        features::ColumnMeta{"price", Kind::kPrice, Availability::kActual, "BB"});
    b.data.push_back({30.0, 30.0});
    const std::vector<FeatureTable> tables{a, b};
    const FeatureTable out = features::aggregate_area(tables);
    EXPECT_DOUBLE_EQ(out.data[*out.find("load")][0], 7.0);
    EXPECT_DOUBLE_EQ(out.data[*out.find("price")][0], 20.0);
}

TEST(AggregateArea, SingleCountryIdentity) {
    const FeatureTable a =
        small_table({3.0, 5.0}, "load", Kind::kLoad, Availability::kActual);
    const std::vector<FeatureTable> tables{a};
    const FeatureTable out = features::aggregate_area(tables);
    EXPECT_EQ(out.data[0], a.data[0]);
}

TEST(AggregateArea, RejectsMisalignedGrids) {
    const FeatureTable a =
        small_table({3.0, 5.0}, "load", Kind::kLoad, Availability::kActual);
    FeatureTable b = a;
    b.timestamps[1] += 900;
    const std::vector<FeatureTable> tables{a, b};
    EXPECT_THROW(features::aggregate_area(tables), MisalignedIntervals);
}

TEST(TimeEncodings, KnownAnglesAndBounds) {
    FeatureTable t;
    t.timestamps = {1609718400, 1609718400 + 12 * 3600};  // 00:00 and 12:00 UTC
    t.columns.push_back(
        features::ColumnMeta{"x", Kind::kOther, Availability::kActual, "AA"});
    t.data.push_back({0.0, 0.0});
    features::add_time_encodings(t);
    const auto sin_min = *t.find("sin_minute");
    const auto cos_min = *t.find("cos_minute");
    const auto sin_hour = *t.find("sin_hour");
    const auto cos_hour = *t.find("cos_hour");
    EXPECT_NEAR(t.data[sin_min][0], 0.0, 1e-12);
    EXPECT_NEAR(t.data[cos_min][0], 1.0, 1e-12);
    EXPECT_NEAR(t.data[sin_hour][1], 0.0, 1e-12);  // sin(pi)
    EXPECT_NEAR(t.data[cos_hour][1], -1.0, 1e-12);
    for (std::size_t c = 1; c < t.n_cols(); ++c) {
        for (double v : t.data[c]) {
            EXPECT_GE(v, -1.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Impute, ForwardFillThenMedianWithFlag) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    FeatureTable t = small_table({1.0, nan, nan, nan, nan, nan, 9.0, 9.0},
                                 "load", Kind::kLoad, Availability::kActual);
    const auto imputed = features::impute(t, 4);
    ASSERT_EQ(imputed.size(), 1u);
    // four forward-filled values, then the median of observed+filled data
    EXPECT_DOUBLE_EQ(t.data[0][1], 1.0);
    EXPECT_DOUBLE_EQ(t.data[0][4], 1.0);
    const auto flag = t.find("load_was_missing");
    ASSERT_TRUE(flag.has_value());
    EXPECT_DOUBLE_EQ(t.data[*flag][0], 0.0);
    EXPECT_DOUBLE_EQ(t.data[*flag][1], 1.0);
    for (double v : t.data[0]) {
        EXPECT_FALSE(std::isnan(v));
    }
}

TEST(SynthDataset, DeterministicPerSeed) {
    const auto a = features::synth_dataset(5, 1);
    const auto b = features::synth_dataset(5, 1);
    const auto c = features::synth_dataset(6, 1);
    ASSERT_EQ(a.freq.omega.size(), b.freq.omega.size());
    for (std::size_t k = 0; k < a.freq.omega.size(); k += 997) {
        ASSERT_EQ(a.freq.omega[k], b.freq.omega[k]);
    }
    EXPECT_NE(a.freq.omega[12345], c.freq.omega[12345]);
    for (std::size_t i = 0; i < a.truth.size(); i += 13) {
        ASSERT_EQ(a.truth[i].q, b.truth[i].q);
        ASSERT_EQ(a.truth[i].tau, b.truth[i].tau);
    }
}

TEST(SynthDataset, ShapesAndFiniteness) {
    const auto ds = features::synth_dataset(3, 2);
    EXPECT_EQ(ds.truth.size(), 192u);
    EXPECT_EQ(ds.table.n_rows(), 192u);
    EXPECT_EQ(ds.freq.omega.size(), 192u * 900u + 1u);
    for (const auto& col : ds.table.data) {
        for (double v : col) {
            ASSERT_TRUE(std::isfinite(v));
        }
    }
    for (double v : ds.freq.omega) {
        ASSERT_TRUE(std::isfinite(v));
    }
    // engineered and encoding columns are present
    EXPECT_TRUE(ds.table.find("load_forecast_error").has_value());
    EXPECT_TRUE(ds.table.find("flow_unscheduled").has_value());
    EXPECT_TRUE(ds.table.find("sin_hour").has_value());
}

TEST(SynthDataset, OrnsteinUhlenbeckVarianceInTheLargeKappaLimit) {
    // constant parameters, q = r = 0, kappa >> tau: the record's sample
    // variance approaches D^2 tau / 2
    features::SynthMapping mapping;
    mapping.spec.s5 = 1000.0;
    mapping.offset = {0.0, 0.0, 0.0, -4.12, std::log(std::exp(5.0) - 1.0), 0.0, 0.0, 0.0};
    mapping.coeff_daily_sin = {};
    mapping.coeff_daily_cos = {};
    mapping.coeff_market = {};
    mapping.coeff_ramp = {};
    const auto ds = features::synth_dataset(11, 2, mapping);
    const nn::ThetaVector& truth = ds.truth.front();
    EXPECT_DOUBLE_EQ(truth.q, 0.0);
    EXPECT_DOUBLE_EQ(truth.r, 0.0);
    EXPECT_GT(truth.kappa / truth.tau, 50.0);
    const double target = truth.D * truth.D * truth.tau / 2.0;
    double mean = 0.0;
    for (double v : ds.freq.omega) mean += v;
    mean /= static_cast<double>(ds.freq.omega.size());
    double var = 0.0;
    for (double v : ds.freq.omega) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ds.freq.omega.size());
    EXPECT_NEAR(var, target, 0.10 * target);
}

TEST(SynthMapping, TiesRampRateToTheStep) {
    const features::SynthMapping mapping = features::SynthMapping::defaults();
    const nn::ThetaVector t = mapping.theta(0.7, -0.2, 1.3, 0.4);
    EXPECT_DOUBLE_EQ(t.r, -2.0 * t.q / 900.0);
    EXPECT_GT(t.tau, 10.0);
    EXPECT_LT(t.tau, t.kappa / 2.0);
}
