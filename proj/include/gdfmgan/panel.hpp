#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gdfmgan {

using Index = Eigen::Index;

/// Multi-site time series, one column per site.
///
/// Timestamps are UTC seconds since the epoch and must be strictly
/// increasing at a constant spacing. Raw panels hold MW; a panel with
/// `normalized == true` holds capacity-normalized residuals (or their
/// standardized form) and is dimensionless.
struct Panel {
    Eigen::MatrixXd values;                // T x N
    std::vector<std::int64_t> timestamps;  // T
    std::vector<std::string> site_ids;     // N
    Eigen::VectorXd capacities;            // N, MW
    bool normalized = false;

    Index steps() const { return values.rows(); }
    Index sites() const { return values.cols(); }
    /// Sampling interval in seconds (0 for panels with fewer than two rows).
    std::int64_t dt() const;

    /// Throws ShapeError / SamplingError / ConfigError / DataError on any
    /// violated invariant.
    void validate() const;
};

using CapacityMap = std::map<std::string, double>;

std::int64_t parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t epoch_seconds);

/// Reads `timestamp,site1,...,siteN`. Every site in the header needs an
/// entry in `capacities` and every entry in `capacities` must name a site.
Panel load_panel(const std::string& path, const CapacityMap& capacities);
void write_panel(const std::string& path, const Panel& panel);

/// `site,capacity_mw` rows.
CapacityMap load_capacities(const std::string& path);
void write_capacities(const std::string& path, const Panel& panel);

/// Builds a regularly sampled panel; timestamps start at `start` with step `dt`.
Panel make_panel(Eigen::MatrixXd values, std::int64_t start, std::int64_t dt,
                 std::vector<std::string> site_ids, Eigen::VectorXd capacities,
                 bool normalized = false);

Panel slice(const Panel& panel, Index first_row, Index rows);

enum class SeasonScheme {
    Calendar,  // DJF, MAM, JJA, SON
    Single,    // one season covering the whole year
};

int season_count(SeasonScheme scheme);
int season_of(SeasonScheme scheme, std::int64_t epoch_seconds);
std::string season_name(SeasonScheme scheme, int season);
SeasonScheme parse_season_scheme(const std::string& name);
std::string to_string(SeasonScheme scheme);

/// Seasonal daily profiles plus per-site moments.
///
/// `profiles[s]` is (samples per day) x N; it is empty when season `s` never
/// occurs in the panel the table was built from.
struct TrendTable {
    SeasonScheme scheme = SeasonScheme::Calendar;
    std::int64_t dt = 0;
    std::vector<std::string> site_ids;
    std::vector<Eigen::MatrixXd> profiles;
    Eigen::VectorXd site_mean;   // raw, MW
    Eigen::VectorXd site_std;    // raw, MW
    std::vector<bool> degenerate;
    Eigen::VectorXd resid_mean;  // capacity-normalized residual
    Eigen::VectorXd resid_std;

    Index samples_per_day() const;
    bool has_season(int season) const;
};

TrendTable extract_trend(const Panel& panel, SeasonScheme scheme = SeasonScheme::Calendar);

/// (raw - trend) / capacity. Constant sites raise DegenerateSiteError unless
/// `allow_degenerate` is set.
Panel detrend_normalize(const Panel& panel, const TrendTable& trend,
                        bool allow_degenerate = false);

struct RetrendResult {
    Panel panel;
    std::size_t clip_count = 0;
};

/// Inverse of detrend_normalize; when `clip` is set the output is clipped to
/// [0, capacity] and the number of clipped cells is reported.
RetrendResult retrend(const Panel& panel, const TrendTable& trend, bool clip = true);

/// Per-site z-scoring of a normalized panel with the residual moments stored
/// in the trend table, and its inverse.
Panel standardize(const Panel& panel, const TrendTable& trend);
Panel destandardize(const Panel& panel, const TrendTable& trend);

/// Time-wise concatenation; timestamps continue from the first block's start.
Panel concat_blocks(std::span<const Panel> blocks);

/// All non-overlapping full blocks of `block_len` rows, in time order.
std::vector<Panel> split_blocks(const Panel& panel, Index block_len);

void write_trend(const std::string& path, const TrendTable& trend);
TrendTable read_trend(const std::string& path);

}  // namespace gdfmgan
