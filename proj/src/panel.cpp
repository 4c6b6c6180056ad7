#include "gdfmgan/panel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

#include "csv.hpp"
#include "gdfmgan/errors.hpp"

namespace gdfmgan {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

unsigned month_of(std::int64_t epoch_seconds) {
    using namespace std::chrono;
    const sys_days day{days{floor_div(epoch_seconds, kSecondsPerDay)}};
    return static_cast<unsigned>(year_month_day{day}.month());
}

}  // namespace

std::int64_t Panel::dt() const {
    if (timestamps.size() < 2) return 0;
    return timestamps[1] - timestamps[0];
}

void Panel::validate() const {
    const auto t = static_cast<std::size_t>(steps());
    const auto n = static_cast<std::size_t>(sites());
    if (timestamps.size() != t) throw ShapeError("timestamp count does not match row count");
    if (site_ids.size() != n || static_cast<std::size_t>(capacities.size()) != n)
        throw ShapeError("site id / capacity count does not match column count");
    for (Index i = 0; i < capacities.size(); ++i)
        if (!(capacities[i] > 0.0)) throw ConfigError("capacity of site '" + site_ids[i] + "' must be positive");
    if (!values.allFinite()) throw DataError("panel contains non-finite values");
    if (t >= 2) {
        const std::int64_t step = dt();
        if (step <= 0) throw SamplingError("timestamps must be strictly increasing");
        for (std::size_t i = 1; i < t; ++i)
            if (timestamps[i] - timestamps[i - 1] != step)
                throw SamplingError("non-constant spacing at row " + std::to_string(i) + " (" +
                                    format_timestamp(timestamps[i - 1]) + " -> " +
                                    format_timestamp(timestamps[i]) + ")");
    }
}

std::int64_t parse_timestamp(const std::string& text) {
    const std::string s = detail::trim(text);
    if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '-'; }) &&
        s.find('-', 1) == std::string::npos) {
        return std::stoll(s);
    }
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    char sep = 0;
    const int got = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &sec);
    if (got != 3 && got != 7) throw DataError("unparseable timestamp '" + s + "'");
    if (got == 7 && sep != 'T' && sep != ' ') throw DataError("unparseable timestamp '" + s + "'");
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw DataError("invalid calendar date in '" + s + "'");
    if (h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 || sec > 59)
        throw DataError("invalid time of day in '" + s + "'");
    const auto days_since_epoch = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days_since_epoch) * kSecondsPerDay + h * 3600 + mi * 60 + sec;
}

std::string format_timestamp(std::int64_t epoch_seconds) {
    using namespace std::chrono;
    const std::int64_t day_index = floor_div(epoch_seconds, kSecondsPerDay);
    const std::int64_t tod = epoch_seconds - day_index * kSecondsPerDay;
    const year_month_day ymd{sys_days{days{day_index}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod / 3600), static_cast<int>((tod / 60) % 60), static_cast<int>(tod % 60));
    return buf;
}

Panel load_panel(const std::string& path, const CapacityMap& capacities) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
    const auto header = detail::split_csv(line);
    if (header.size() < 2 || header[0] != "timestamp")
        throw DataError("header must be 'timestamp,site1,...,siteN' in '" + path + "'");

    Panel panel;
    panel.site_ids.assign(header.begin() + 1, header.end());
    const std::set<std::string> unique(panel.site_ids.begin(), panel.site_ids.end());
    if (unique.size() != panel.site_ids.size()) throw DataError("duplicate site id in header");
    for (const auto& [site, mw] : capacities)
        if (!unique.contains(site)) throw ConfigError("capacity given for unknown site '" + site + "'");
    const auto n = static_cast<Index>(panel.site_ids.size());
    panel.capacities.resize(n);
    for (Index j = 0; j < n; ++j) {
        const auto it = capacities.find(panel.site_ids[j]);
        if (it == capacities.end()) throw ConfigError("no capacity for site '" + panel.site_ids[j] + "'");
        panel.capacities[j] = it->second;
    }

    std::vector<double> flat;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto cells = detail::split_csv(line);
        const std::string where = path + ":" + std::to_string(row + 1);
        if (cells.size() != header.size()) throw DataError("wrong number of cells at " + where);
        panel.timestamps.push_back(parse_timestamp(cells[0]));
        for (std::size_t j = 1; j < cells.size(); ++j) flat.push_back(detail::parse_double(cells[j], where));
    }
    panel.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), static_cast<Index>(row), n);
    panel.validate();
    return panel;
}

void write_panel(const std::string& path, const Panel& panel) {
    auto out = detail::open_out(path);
    out << "timestamp";
    for (const auto& id : panel.site_ids) out << ',' << id;
    out << '\n';
    for (Index t = 0; t < panel.steps(); ++t) {
        out << format_timestamp(panel.timestamps[static_cast<std::size_t>(t)]);
        for (Index n = 0; n < panel.sites(); ++n) out << ',' << panel.values(t, n);
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

CapacityMap load_capacities(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line) || detail::split_csv(line) != std::vector<std::string>{"site", "capacity_mw"})
        throw DataError("header must be 'site,capacity_mw' in '" + path + "'");
    CapacityMap caps;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv(line);
        const std::string where = path + ":" + std::to_string(row);
        if (cells.size() != 2) throw DataError("expected two cells at " + where);
        const double mw = detail::parse_double(cells[1], where);
        if (!(mw > 0.0)) throw ConfigError("capacity must be positive at " + where);
        if (!caps.emplace(cells[0], mw).second) throw ConfigError("duplicate site '" + cells[0] + "' at " + where);
    }
    return caps;
}

void write_capacities(const std::string& path, const Panel& panel) {
    auto out = detail::open_out(path);
    out << "site,capacity_mw\n";
    for (Index n = 0; n < panel.sites(); ++n) out << panel.site_ids[static_cast<std::size_t>(n)] << ',' << panel.capacities[n] << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

Panel make_panel(Eigen::MatrixXd values, std::int64_t start, std::int64_t dt,
                 std::vector<std::string> site_ids, Eigen::VectorXd capacities, bool normalized) {
    Panel p;
    p.timestamps.resize(static_cast<std::size_t>(values.rows()));
    for (std::size_t t = 0; t < p.timestamps.size(); ++t) p.timestamps[t] = start + static_cast<std::int64_t>(t) * dt;
    p.values = std::move(values);
    p.site_ids = std::move(site_ids);
    p.capacities = std::move(capacities);
    p.normalized = normalized;
    p.validate();
    return p;
}

Panel slice(const Panel& panel, Index first_row, Index rows) {
    if (first_row < 0 || rows < 0 || first_row + rows > panel.steps()) throw ShapeError("slice out of range");
    Panel p;
    p.values = panel.values.middleRows(first_row, rows);
    p.timestamps.assign(panel.timestamps.begin() + first_row, panel.timestamps.begin() + first_row + rows);
    p.site_ids = panel.site_ids;
    p.capacities = panel.capacities;
    p.normalized = panel.normalized;
    return p;
}

int season_count(SeasonScheme scheme) { return scheme == SeasonScheme::Calendar ? 4 : 1; }

int season_of(SeasonScheme scheme, std::int64_t epoch_seconds) {
    if (scheme == SeasonScheme::Single) return 0;
    const unsigned m = month_of(epoch_seconds);
    return static_cast<int>((m % 12) / 3);  // Dec,Jan,Feb -> 0
}

std::string season_name(SeasonScheme scheme, int season) {
    static const char* const calendar[] = {"DJF", "MAM", "JJA", "SON"};
    if (scheme == SeasonScheme::Single) return "ALL";
    return calendar[season];
}

SeasonScheme parse_season_scheme(const std::string& name) {
    if (name == "calendar") return SeasonScheme::Calendar;
    if (name == "single") return SeasonScheme::Single;
    throw ConfigError("unknown season scheme '" + name + "' (expected calendar|single)");
}

std::string to_string(SeasonScheme scheme) { return scheme == SeasonScheme::Calendar ? "calendar" : "single"; }

Index TrendTable::samples_per_day() const { return dt > 0 ? static_cast<Index>(kSecondsPerDay / dt) : 0; }

bool TrendTable::has_season(int season) const {
    return season >= 0 && static_cast<std::size_t>(season) < profiles.size() &&
           profiles[static_cast<std::size_t>(season)].size() > 0;
}

namespace {

Index tod_index(std::int64_t ts, std::int64_t dt) {
    const std::int64_t day_start = floor_div(ts, kSecondsPerDay) * kSecondsPerDay;
    return static_cast<Index>((ts - day_start) / dt);
}

void check_trend_matches(const Panel& panel, const TrendTable& trend) {
    if (panel.sites() != static_cast<Index>(trend.site_ids.size()) || panel.site_ids != trend.site_ids)
        throw ShapeError("trend table sites do not match panel sites");
    if (panel.steps() >= 2 && panel.dt() != trend.dt)
        throw ShapeError("trend table sampling interval does not match panel");
}

const Eigen::MatrixXd& profile_for(const TrendTable& trend, std::int64_t ts) {
    const int s = season_of(trend.scheme, ts);
    if (!trend.has_season(s))
        throw CoverageError("no trend profile for season " + season_name(trend.scheme, s) + " (timestamp " +
                            format_timestamp(ts) + ")");
    return trend.profiles[static_cast<std::size_t>(s)];
}

}  // namespace

TrendTable extract_trend(const Panel& panel, SeasonScheme scheme) {
    panel.validate();
    if (panel.normalized) throw DataError("extract_trend expects a raw (un-normalized) panel");
    const std::int64_t dt = panel.dt();
    if (dt <= 0 || kSecondsPerDay % dt != 0)
        throw SamplingError("sampling interval must divide 24 hours exactly");
    const Index spd = kSecondsPerDay / dt;
    const Index n = panel.sites();
    const int seasons = season_count(scheme);

    // Deviations from the first sample of each cell are summed, so repeated
    // identical days average back to that sample exactly.
    std::vector<Eigen::MatrixXd> first(static_cast<std::size_t>(seasons), Eigen::MatrixXd::Zero(spd, n));
    std::vector<Eigen::MatrixXd> sums(static_cast<std::size_t>(seasons), Eigen::MatrixXd::Zero(spd, n));
    std::vector<Eigen::VectorXd> counts(static_cast<std::size_t>(seasons), Eigen::VectorXd::Zero(spd));
    std::vector<std::map<std::int64_t, Index>> day_samples(static_cast<std::size_t>(seasons));
    for (Index t = 0; t < panel.steps(); ++t) {
        const std::int64_t ts = panel.timestamps[static_cast<std::size_t>(t)];
        const auto s = static_cast<std::size_t>(season_of(scheme, ts));
        const Index tau = tod_index(ts, dt);
        if (counts[s][tau] == 0.0) first[s].row(tau) = panel.values.row(t);
        sums[s].row(tau) += panel.values.row(t) - first[s].row(tau);
        counts[s][tau] += 1.0;
        ++day_samples[s][floor_div(ts, kSecondsPerDay)];
    }

    TrendTable table;
    table.scheme = scheme;
    table.dt = dt;
    table.site_ids = panel.site_ids;
    table.profiles.resize(static_cast<std::size_t>(seasons));
    for (std::size_t s = 0; s < static_cast<std::size_t>(seasons); ++s) {
        if (day_samples[s].empty()) continue;  // season absent from the panel
        const bool full_day = std::any_of(day_samples[s].begin(), day_samples[s].end(),
                                          [spd](const auto& kv) { return kv.second == spd; });
        if (!full_day)
            throw CoverageError("season " + season_name(scheme, static_cast<int>(s)) +
                                " has samples but no complete day");
        table.profiles[s] = first[s].array() + sums[s].array().colwise() / counts[s].array().max(1.0);
    }

    table.site_mean = panel.values.colwise().mean().transpose();
    table.site_std.resize(n);
    table.degenerate.resize(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) {
        const auto centered = panel.values.col(j).array() - table.site_mean[j];
        table.site_std[j] = std::sqrt(centered.square().mean());
        table.degenerate[static_cast<std::size_t>(j)] =
            table.site_std[j] <= 1e-12 * std::max(1.0, std::abs(table.site_mean[j]));
    }

    // residual moments, used by standardize/destandardize
    table.resid_mean = Eigen::VectorXd::Zero(n);
    table.resid_std = Eigen::VectorXd::Ones(n);
    const Panel resid = detrend_normalize(panel, table, /*allow_degenerate=*/true);
    for (Index j = 0; j < n; ++j) {
        table.resid_mean[j] = resid.values.col(j).mean();
        const double sd = std::sqrt((resid.values.col(j).array() - table.resid_mean[j]).square().mean());
        table.resid_std[j] = sd > 1e-12 ? sd : 1.0;
    }
    return table;
}

Panel detrend_normalize(const Panel& panel, const TrendTable& trend, bool allow_degenerate) {
    if (panel.normalized) throw DataError("panel is already normalized");
    check_trend_matches(panel, trend);
    if (!allow_degenerate)
        for (std::size_t j = 0; j < trend.degenerate.size(); ++j)
            if (trend.degenerate[j]) throw DegenerateSiteError("site '" + trend.site_ids[j] + "' is constant");
    Panel out = panel;
    for (Index t = 0; t < panel.steps(); ++t) {
        const std::int64_t ts = panel.timestamps[static_cast<std::size_t>(t)];
        const auto& profile = profile_for(trend, ts);
        const Index tau = tod_index(ts, trend.dt);
        out.values.row(t) = (panel.values.row(t) - profile.row(tau)).cwiseQuotient(panel.capacities.transpose());
    }
    out.normalized = true;
    return out;
}

RetrendResult retrend(const Panel& panel, const TrendTable& trend, bool clip) {
    if (!panel.normalized) throw DataError("retrend expects a normalized panel");
    check_trend_matches(panel, trend);
    RetrendResult result{panel, 0};
    Panel& out = result.panel;
    for (Index t = 0; t < panel.steps(); ++t) {
        const std::int64_t ts = panel.timestamps[static_cast<std::size_t>(t)];
        const auto& profile = profile_for(trend, ts);
        const Index tau = tod_index(ts, trend.dt);
        for (Index n = 0; n < panel.sites(); ++n) {
            double v = panel.values(t, n) * panel.capacities[n] + profile(tau, n);
            if (clip) {
                if (v < 0.0) {
                    v = 0.0;
                    ++result.clip_count;
                } else if (v > panel.capacities[n]) {
                    v = panel.capacities[n];
                    ++result.clip_count;
                }
            }
            out.values(t, n) = v;
        }
    }
    out.normalized = false;
    return result;
}

Panel standardize(const Panel& panel, const TrendTable& trend) {
    if (!panel.normalized) throw DataError("standardize expects a normalized panel");
    check_trend_matches(panel, trend);
    Panel out = panel;
    out.values = (panel.values.rowwise() - trend.resid_mean.transpose()).array().rowwise() /
                 trend.resid_std.transpose().array();
    return out;
}

Panel destandardize(const Panel& panel, const TrendTable& trend) {
    if (!panel.normalized) throw DataError("destandardize expects a normalized panel");
    check_trend_matches(panel, trend);
    Panel out = panel;
    out.values = (panel.values.array().rowwise() * trend.resid_std.transpose().array()).matrix().rowwise() +
                 trend.resid_mean.transpose();
    return out;
}

Panel concat_blocks(std::span<const Panel> blocks) {
    if (blocks.empty()) throw ShapeError("concat_blocks needs at least one block");
    const Panel& head = blocks.front();
    Index total = 0;
    for (const auto& b : blocks) {
        if (b.sites() != head.sites() || b.site_ids != head.site_ids)
            throw ShapeError("blocks differ in site count or site ids");
        if (b.normalized != head.normalized) throw ShapeError("blocks differ in normalization state");
        if (b.steps() >= 2 && head.steps() >= 2 && b.dt() != head.dt())
            throw ShapeError("blocks differ in sampling interval");
        total += b.steps();
    }
    std::int64_t dt = 0;
    for (const auto& b : blocks)
        if (b.steps() >= 2) { dt = b.dt(); break; }
    if (dt == 0 && total > 1) throw SamplingError("cannot infer sampling interval from single-row blocks");

    Panel out;
    out.values.resize(total, head.sites());
    Index row = 0;
    for (const auto& b : blocks) {
        out.values.middleRows(row, b.steps()) = b.values;
        row += b.steps();
    }
    out.timestamps.resize(static_cast<std::size_t>(total));
    const std::int64_t start = head.timestamps.empty() ? 0 : head.timestamps.front();
    for (std::size_t t = 0; t < out.timestamps.size(); ++t) out.timestamps[t] = start + static_cast<std::int64_t>(t) * dt;
    out.site_ids = head.site_ids;
    out.capacities = head.capacities;
    out.normalized = head.normalized;
    return out;
}

std::vector<Panel> split_blocks(const Panel& panel, Index block_len) {
    if (block_len <= 0) throw ConfigError("block length must be positive");
    std::vector<Panel> blocks;
    for (Index first = 0; first + block_len <= panel.steps(); first += block_len)
        blocks.push_back(slice(panel, first, block_len));
    return blocks;
}

void write_trend(const std::string& path, const TrendTable& trend) {
    auto out = detail::open_out(path);
    out << "season,tod_index,site,value\n";
    for (std::size_t s = 0; s < trend.profiles.size(); ++s) {
        if (!trend.has_season(static_cast<int>(s))) continue;
        const auto& p = trend.profiles[s];
        for (Index tau = 0; tau < p.rows(); ++tau)
            for (Index n = 0; n < p.cols(); ++n)
                out << season_name(trend.scheme, static_cast<int>(s)) << ',' << tau << ','
                    << trend.site_ids[static_cast<std::size_t>(n)] << ',' << p(tau, n) << '\n';
    }
    const std::pair<const char*, const Eigen::VectorXd*> stats[] = {
        {"site_mean", &trend.site_mean}, {"site_std", &trend.site_std},
        {"resid_mean", &trend.resid_mean}, {"resid_std", &trend.resid_std}};
    for (const auto& [name, vec] : stats)
        for (Index n = 0; n < vec->size(); ++n)
            out << name << ",0," << trend.site_ids[static_cast<std::size_t>(n)] << ',' << (*vec)[n] << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

TrendTable read_trend(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "season,tod_index,site,value")
        throw DataError("'" + path + "' is not a trend table");

    struct Row { std::string season; Index tau; std::string site; double value; };
    std::vector<Row> rows;
    std::vector<std::string> sites;
    Index max_tau = -1;
    bool single = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto c = detail::split_csv(line);
        const std::string where = path + ":" + std::to_string(line_no);
        if (c.size() != 4) throw DataError("expected 4 cells at " + where);
        Row r{c[0], static_cast<Index>(detail::parse_double(c[1], where)), c[2], detail::parse_double(c[3], where)};
        if (std::find(sites.begin(), sites.end(), r.site) == sites.end()) sites.push_back(r.site);
        if (r.season == "ALL") single = true;
        if (r.season.find('_') == std::string::npos) max_tau = std::max(max_tau, r.tau);
        rows.push_back(std::move(r));
    }
    if (max_tau < 0) throw DataError("trend table '" + path + "' has no profile rows");

    TrendTable t;
    t.scheme = single ? SeasonScheme::Single : SeasonScheme::Calendar;
    const Index spd = max_tau + 1;
    if (kSecondsPerDay % spd != 0) throw DataError("profile length does not divide a day");
    t.dt = kSecondsPerDay / spd;
    t.site_ids = sites;
    const auto n = static_cast<Index>(sites.size());
    t.profiles.resize(static_cast<std::size_t>(season_count(t.scheme)));
    t.site_mean = t.site_std = t.resid_mean = Eigen::VectorXd::Zero(n);
    t.resid_std = Eigen::VectorXd::Ones(n);
    auto site_index = [&](const std::string& s) {
        return static_cast<Index>(std::find(sites.begin(), sites.end(), s) - sites.begin());
    };
    for (const auto& r : rows) {
        const Index j = site_index(r.site);
        if (r.season == "site_mean") t.site_mean[j] = r.value;
        else if (r.season == "site_std") t.site_std[j] = r.value;
        else if (r.season == "resid_mean") t.resid_mean[j] = r.value;
        else if (r.season == "resid_std") t.resid_std[j] = r.value;
        else {
            int s = -1;
            for (int k = 0; k < season_count(t.scheme); ++k)
                if (season_name(t.scheme, k) == r.season) s = k;
            if (s < 0) throw DataError("unknown season '" + r.season + "' in '" + path + "'");
            auto& p = t.profiles[static_cast<std::size_t>(s)];
            if (p.size() == 0) p = Eigen::MatrixXd::Constant(spd, n, std::nan(""));
            p(r.tau, j) = r.value;
        }
    }
    for (const auto& p : t.profiles)
        if (p.size() > 0 && !p.allFinite()) throw DataError("trend table '" + path + "' has missing profile cells");
    t.degenerate.resize(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j)
        t.degenerate[static_cast<std::size_t>(j)] = t.site_std[j] <= 1e-12 * std::max(1.0, std::abs(t.site_mean[j]));
    return t;
}

}  // namespace gdfmgan
