#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gdfmgan/errors.hpp"
#include "gdfmgan/oracle.hpp"
#include "gdfmgan/panel.hpp"
#include "helpers.hpp"

using namespace gdfmgan;
using testing_helpers::temp_path;

namespace {

constexpr std::int64_t kStart = 1483228800;  // 2017-01-01T00:00:00

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

Panel daily_panel(Index days, Index spd, const Eigen::MatrixXd& profile, std::int64_t start = kStart) {
    Eigen::MatrixXd v(days * spd, profile.cols());
    for (Index d = 0; d < days; ++d) v.middleRows(d * spd, spd) = profile;
    std::vector<std::string> ids;
    for (Index n = 0; n < profile.cols(); ++n) ids.push_back("s" + std::to_string(n));
    return make_panel(v, start, 86400 / spd, ids, Eigen::VectorXd::Constant(profile.cols(), 100.0));
}

}  // namespace

TEST(Timestamp, ParseAndFormatRoundTrip) {
    EXPECT_EQ(parse_timestamp("2017-01-01T00:00:00"), kStart);
    EXPECT_EQ(parse_timestamp("2017-01-01 00:05:00"), kStart + 300);
    EXPECT_EQ(parse_timestamp("1483228800"), kStart);
    EXPECT_EQ(format_timestamp(kStart + 3661), "2017-01-01T01:01:01");
    EXPECT_THROW(parse_timestamp("2017-13-01T00:00:00"), DataError);
    EXPECT_THROW(parse_timestamp("yesterday"), DataError);
}

TEST(LoadPanel, MinimalCsv) {
    const auto path = temp_path("minimal.csv");
    write_text(path,
               "timestamp,a,b\n"
               "2017-01-01T00:00:00,1,2\n"
               "2017-01-01T00:05:00,3,4\n"
               "2017-01-01T00:10:00,5,6\n");
    const Panel p = load_panel(path, {{"a", 10.0}, {"b", 20.0}});
    EXPECT_EQ(p.steps(), 3);
    EXPECT_EQ(p.sites(), 2);
    EXPECT_EQ(p.dt(), 300);
    EXPECT_FALSE(p.normalized);
    EXPECT_DOUBLE_EQ(p.values(2, 1), 6.0);
    EXPECT_DOUBLE_EQ(p.capacities(1), 20.0);
}

TEST(LoadPanel, Errors) {
    const auto gap = temp_path("gap.csv");
    write_text(gap, "timestamp,a\n2017-01-01T00:00:00,1\n2017-01-01T00:05:00,1\n2017-01-01T00:15:00,1\n");
    EXPECT_THROW(load_panel(gap, {{"a", 1.0}}), SamplingError);

    const auto ok = temp_path("ok.csv");
    write_text(ok, "timestamp,a\n2017-01-01T00:00:00,1\n2017-01-01T00:05:00,1\n");
    EXPECT_THROW(load_panel(ok, {{"a", 1.0}, {"zz", 1.0}}), ConfigError);
    EXPECT_THROW(load_panel(ok, {}), ConfigError);

    const auto nan = temp_path("nan.csv");
    write_text(nan, "timestamp,a\n2017-01-01T00:00:00,nan\n2017-01-01T00:05:00,1\n");
    EXPECT_THROW(load_panel(nan, {{"a", 1.0}}), DataError);

    const auto empty_cell = temp_path("empty_cell.csv");
    write_text(empty_cell, "timestamp,a,b\n2017-01-01T00:00:00,1,\n2017-01-01T00:05:00,1,2\n");
    EXPECT_THROW(load_panel(empty_cell, {{"a", 1.0}, {"b", 1.0}}), DataError);

    EXPECT_THROW(load_panel(temp_path("does_not_exist.csv"), {}), IoError);
}

TEST(LoadPanel, TenDayBlockAtFiveMinutes) {
    Eigen::MatrixXd v = Eigen::MatrixXd::Constant(2880, 20, 1.0);
    std::vector<std::string> ids;
    for (int n = 0; n < 20; ++n) ids.push_back("f" + std::to_string(n));
    const Panel p = make_panel(v, kStart, 300, ids, Eigen::VectorXd::Constant(20, 50.0));
    const auto path = temp_path("block.csv");
    write_panel(path, p);
    CapacityMap caps;
    for (const auto& id : ids) caps[id] = 50.0;
    const Panel q = load_panel(path, caps);
    EXPECT_EQ(q.steps(), 2880);
    EXPECT_EQ(q.sites(), 20);
    EXPECT_EQ(q.timestamps.back() - q.timestamps.front() + q.dt(), 10 * 86400);
}

TEST(WritePanel, RoundTripIsExact) {
    std::mt19937_64 rng(3);
    const Panel p = make_panel(testing_helpers::random_matrix(50, 3, rng), kStart, 300, {"x", "y", "z"},
                               Eigen::Vector3d(1, 2, 3));
    const auto path = temp_path("roundtrip.csv");
    write_panel(path, p);
    const Panel q = load_panel(path, {{"x", 1}, {"y", 2}, {"z", 3}});
    EXPECT_EQ((p.values - q.values).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(p.timestamps, q.timestamps);
}

TEST(Seasons, CalendarQuarters) {
    EXPECT_EQ(season_of(SeasonScheme::Calendar, parse_timestamp("2017-01-15T00:00:00")), 0);
    EXPECT_EQ(season_of(SeasonScheme::Calendar, parse_timestamp("2017-12-01T00:00:00")), 0);
    EXPECT_EQ(season_of(SeasonScheme::Calendar, parse_timestamp("2017-03-01T00:00:00")), 1);
    EXPECT_EQ(season_of(SeasonScheme::Calendar, parse_timestamp("2017-07-31T23:59:59")), 2);
    EXPECT_EQ(season_of(SeasonScheme::Calendar, parse_timestamp("2017-11-30T00:00:00")), 3);
    EXPECT_EQ(season_name(SeasonScheme::Calendar, 2), "JJA");
    EXPECT_EQ(season_of(SeasonScheme::Single, parse_timestamp("2017-07-31T00:00:00")), 0);
    EXPECT_THROW(parse_season_scheme("monsoon"), ConfigError);
}

TEST(ExtractTrend, IdenticalDaysGiveTheDayProfile) {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd day = testing_helpers::random_matrix(24, 2, rng).array().abs() * 10.0;
    const Panel p = daily_panel(5, 24, day);
    const TrendTable t = extract_trend(p, SeasonScheme::Calendar);
    EXPECT_EQ(t.samples_per_day() * t.dt, 86400);
    ASSERT_TRUE(t.has_season(0));
    EXPECT_LT((t.profiles[0] - day).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_FALSE(t.has_season(2));

    // repeated trend days detrend to exactly zero
    const Panel z = detrend_normalize(p, t);
    EXPECT_EQ(z.values.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(z.normalized);
}

TEST(ExtractTrend, MeanOfTwoDays) {
    Eigen::MatrixXd v(48, 1);
    v.topRows(24).setZero();
    v.bottomRows(24).setConstant(2.0);
    const Panel p = make_panel(v, kStart, 3600, {"a"}, Eigen::VectorXd::Constant(1, 10.0));
    const TrendTable t = extract_trend(p, SeasonScheme::Single);
    EXPECT_LT((t.profiles[0].array() - 1.0).abs().maxCoeff(), 1e-15);
}

TEST(ExtractTrend, RecoversOracleDiurnalCycle) {
    OracleSpec spec = default_oracle_spec();
    spec.steps = 288 * 60;
    spec.rho = 0.0;
    spec.loadings.setZero();
    spec.noise_sd = 0.3;
    spec.diurnal_amplitude = 1.0;
    const OracleProcess proc = simulate(spec);
    const Eigen::MatrixXd x = proc.stochastic + proc.diurnal;
    const Panel p = make_panel(x, spec.start, spec.dt, {"a", "b", "c", "d"}, Eigen::VectorXd::Constant(4, 1.0));
    const TrendTable t = extract_trend(p, SeasonScheme::Single);
    const double tol = 3.0 * spec.noise_sd / std::sqrt(60.0);
    double worst = 0.0;
    for (Index tau = 0; tau < 288; ++tau)
        for (Index n = 0; n < 4; ++n) worst = std::max(worst, std::abs(t.profiles[0](tau, n) - proc.diurnal(tau, n)));
    // max over 1152 cells: allow the 3 sigma/sqrt(days) band of a single cell, scaled for the extreme
    EXPECT_LT(worst, 1.5 * tol);
    // and the typical cell is well inside one band
    double mean_err = 0.0;
    for (Index tau = 0; tau < 288; ++tau)
        for (Index n = 0; n < 4; ++n) mean_err += std::abs(t.profiles[0](tau, n) - proc.diurnal(tau, n)) / 1152.0;
    EXPECT_LT(mean_err, tol / 3.0);
}

TEST(ExtractTrend, PartialSeasonRaisesCoverage) {
    // 2017-02-28 full day plus three hours of 2017-03-01 (MAM)
    Eigen::MatrixXd v = Eigen::MatrixXd::Ones(27, 1);
    const Panel p = make_panel(v, parse_timestamp("2017-02-28T00:00:00"), 3600, {"a"}, Eigen::VectorXd::Constant(1, 5.0));
    EXPECT_THROW(extract_trend(p), CoverageError);
}

TEST(ExtractTrend, TrendAppliedToAbsentSeasonRaises) {
    const Panel p = daily_panel(2, 24, Eigen::MatrixXd::Ones(24, 1));
    Eigen::MatrixXd noisy = p.values;
    noisy(3, 0) = 2.0;
    const Panel q = make_panel(noisy, kStart, 3600, {"s0"}, Eigen::VectorXd::Constant(1, 100.0));
    const TrendTable t = extract_trend(q);
    const Panel summer = daily_panel(1, 24, Eigen::MatrixXd::Ones(24, 1), parse_timestamp("2017-07-01T00:00:00"));
    EXPECT_THROW(detrend_normalize(summer, t), CoverageError);
}

TEST(DetrendNormalize, HandArithmetic) {
    // raw 50 MW, trend 30 MW, capacity 100 MW -> 0.2
    Eigen::MatrixXd v(48, 1);
    v.topRows(24).setConstant(10.0);
    v.bottomRows(24).setConstant(50.0);
    const Panel p = make_panel(v, kStart, 3600, {"a"}, Eigen::VectorXd::Constant(1, 100.0));
    const TrendTable t = extract_trend(p);
    const Panel z = detrend_normalize(p, t);
    EXPECT_NEAR(z.values(30, 0), 0.2, 1e-15);
    EXPECT_NEAR(z.values(5, 0), -0.2, 1e-15);
}

TEST(DetrendNormalize, DegenerateSite) {
    Eigen::MatrixXd v(48, 2);
    v.col(0).setConstant(3.0);
    for (Index t = 0; t < 48; ++t) v(t, 1) = static_cast<double>(t % 7);
    const Panel p = make_panel(v, kStart, 3600, {"flat", "live"}, Eigen::Vector2d(10, 10));
    const TrendTable t = extract_trend(p);
    EXPECT_TRUE(t.degenerate[0]);
    EXPECT_FALSE(t.degenerate[1]);
    EXPECT_THROW(detrend_normalize(p, t), DegenerateSiteError);
    EXPECT_NO_THROW(detrend_normalize(p, t, true));
}

TEST(Retrend, RoundTripsAreIdentities) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 80.0);
    Eigen::MatrixXd v(24 * 6, 3);
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = u(rng);
    const Panel p = make_panel(v, kStart, 3600, {"a", "b", "c"}, Eigen::Vector3d(100, 90, 120));
    const TrendTable t = extract_trend(p);

    const Panel z = detrend_normalize(p, t);
    const RetrendResult back = retrend(z, t, false);
    EXPECT_LT((back.panel.values - p.values).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_FALSE(back.panel.normalized);

    const Panel z2 = detrend_normalize(back.panel, t);
    EXPECT_LT((z2.values - z.values).cwiseAbs().maxCoeff(), 1e-12);

    const Panel s = standardize(z, t);
    EXPECT_LT(s.values.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((destandardize(s, t).values - z.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Retrend, ClipsAndCounts) {
    Eigen::MatrixXd v(48, 1);
    for (Index t = 0; t < 48; ++t) v(t, 0) = 50.0 + (t % 2 ? 10.0 : -10.0);
    const Panel p = make_panel(v, kStart, 3600, {"a"}, Eigen::VectorXd::Constant(1, 100.0));
    const TrendTable t = extract_trend(p);
    Panel z = detrend_normalize(p, t);
    z.values(0, 0) = 5.0;   // far above capacity
    z.values(1, 0) = -5.0;  // far below zero
    const RetrendResult r = retrend(z, t, true);
    EXPECT_EQ(r.clip_count, 2u);
    EXPECT_DOUBLE_EQ(r.panel.values(0, 0), 100.0);
    EXPECT_DOUBLE_EQ(r.panel.values(1, 0), 0.0);
}

TEST(Retrend, ShapeMismatch) {
    const Panel p = daily_panel(2, 24, Eigen::MatrixXd::Ones(24, 2) + Eigen::MatrixXd::Identity(24, 2));
    const TrendTable t = extract_trend(p);
    Panel one = daily_panel(2, 24, Eigen::MatrixXd::Ones(24, 1));
    one.normalized = true;
    EXPECT_THROW(retrend(one, t), ShapeError);
}

TEST(ConcatBlocks, TenBlocksMakeHundredDays) {
    std::vector<Panel> blocks;
    for (int b = 0; b < 10; ++b)
        blocks.push_back(make_panel(Eigen::MatrixXd::Constant(2880, 2, b), kStart + 86400 * 400 * b, 300, {"a", "b"},
                                    Eigen::Vector2d(1, 1), true));
    const Panel all = concat_blocks(blocks);
    EXPECT_EQ(all.steps(), 28800);
    EXPECT_EQ(all.timestamps.front(), kStart);
    EXPECT_EQ(all.timestamps.back(), kStart + 300 * 28799);
    EXPECT_NO_THROW(all.validate());
    for (int b = 0; b < 10; ++b)
        EXPECT_EQ((all.values.middleRows(2880 * b, 2880) - blocks[static_cast<std::size_t>(b)].values).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ConcatBlocks, IdentityAndMismatch) {
    std::mt19937_64 rng(6);
    const Panel a = make_panel(testing_helpers::random_matrix(10, 2, rng), kStart, 300, {"a", "b"}, Eigen::Vector2d(1, 1));
    const Panel one = concat_blocks(std::vector<Panel>{a});
    EXPECT_EQ(one.values, a.values);
    EXPECT_EQ(one.timestamps, a.timestamps);
    const Panel c = make_panel(testing_helpers::random_matrix(10, 3, rng), kStart, 300, {"a", "b", "c"}, Eigen::Vector3d(1, 1, 1));
    EXPECT_THROW(concat_blocks(std::vector<Panel>{a, c}), ShapeError);
}

TEST(SplitBlocks, DropsTrailingPartialBlock) {
    const Panel p = make_panel(Eigen::MatrixXd::Zero(25, 1), kStart, 300, {"a"}, Eigen::VectorXd::Ones(1));
    const auto blocks = split_blocks(p, 10);
    ASSERT_EQ(blocks.size(), 2u);
    EXPECT_EQ(blocks[1].timestamps.front(), kStart + 3000);
}

TEST(TrendTable, CsvRoundTrip) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    Eigen::MatrixXd v(24 * 70, 2);
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = u(rng);
    const Panel p = make_panel(v, parse_timestamp("2017-02-01T00:00:00"), 3600, {"a", "b"}, Eigen::Vector2d(10, 10));
    const TrendTable t = extract_trend(p);
    const auto path = temp_path("trend.csv");
    write_trend(path, t);
    {
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        EXPECT_EQ(header, "season,tod_index,site,value");
    }
    const TrendTable r = read_trend(path);
    EXPECT_EQ(r.dt, 3600);
    EXPECT_EQ(r.site_ids, t.site_ids);
    for (int s = 0; s < 4; ++s) {
        ASSERT_EQ(r.has_season(s), t.has_season(s));
        if (t.has_season(s)) EXPECT_EQ((r.profiles[static_cast<std::size_t>(s)] - t.profiles[static_cast<std::size_t>(s)]).cwiseAbs().maxCoeff(), 0.0);
    }
    EXPECT_EQ((r.resid_std - t.resid_std).cwiseAbs().maxCoeff(), 0.0);
    const Panel z1 = detrend_normalize(p, t), z2 = detrend_normalize(p, r);
    EXPECT_EQ((z1.values - z2.values).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Capacities, RoundTripAndErrors) {
    const Panel p = make_panel(Eigen::MatrixXd::Zero(3, 2), 0, 300, {"north", "south"}, Eigen::Vector2d(120.5, 80.0));
    const auto path = testing_helpers::temp_path("caps.csv");
    write_capacities(path, p);
    const CapacityMap caps = load_capacities(path);
    ASSERT_EQ(caps.size(), 2u);
    EXPECT_EQ(caps.at("north"), 120.5);
    EXPECT_EQ(caps.at("south"), 80.0);

    const auto bad = testing_helpers::temp_path("caps_bad.csv");
    std::ofstream(bad) << "site,capacity_mw\na,10\na,20\n";
    EXPECT_THROW(load_capacities(bad), ConfigError);
    std::ofstream(bad) << "site,capacity_mw\na,-1\n";
    EXPECT_THROW(load_capacities(bad), ConfigError);
    std::ofstream(bad) << "name,mw\na,1\n";
    EXPECT_THROW(load_capacities(bad), DataError);
    EXPECT_THROW(load_capacities(testing_helpers::temp_path("caps_missing.csv")), IoError);
}
