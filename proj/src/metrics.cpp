#include "gdfmgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "csv.hpp"
#include "gdfmgan/errors.hpp"

namespace gdfmgan {

namespace {

Eigen::MatrixXd per_unit(const Panel& p) {
    return (p.values.array().rowwise() / p.capacities.transpose().array()).matrix();
}

void append_column_ramps(const Eigen::MatrixXd& x, Index k, std::vector<double>& out) {
    for (Index n = 0; n < x.cols(); ++n) {
        const Eigen::VectorXd col = x.col(n);
        const auto d = ramp_rates(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), k);
        out.insert(out.end(), d.begin(), d.end());
    }
}

double percent_diff(double synthetic, double actual) {
    if (actual == 0.0) return synthetic == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return 100.0 * std::abs(synthetic - actual) / std::abs(actual);
}

PsdEstimate mean_psd(std::span<const Panel> panels, Index seglen, const ReportOptions& opt) {
    PsdEstimate acc;
    Index count = 0;
    for (const auto& p : panels) {
        const Eigen::MatrixXd x = per_unit(p);
        for (Index n = 0; n < x.cols(); ++n) {
            PsdEstimate e = welch_psd(x.col(n), static_cast<double>(p.dt()), seglen, opt.overlap, opt.window);
            if (count == 0)
                acc = std::move(e);
            else
                acc.power += e.power;
            ++count;
        }
    }
    if (count > 0) acc.power /= static_cast<double>(count);
    return acc;
}

nlohmann::json laplace_json(const RampStats& r) {
    return {{"mu", r.laplace.mu},
            {"b", r.laplace.b},
            {"sd", r.moments.sd},
            {"skewness", r.moments.skewness},
            {"kurtosis", r.moments.kurtosis}};
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m, const std::vector<std::string>& ids) {
    auto out = detail::open_out(path);
    out << "site";
    for (const auto& id : ids) out << ',' << id;
    out << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        out << ids[static_cast<std::size_t>(i)];
        for (Index j = 0; j < m.cols(); ++j) out << ',' << m(i, j);
        out << '\n';
    }
}

void write_hist_csv(const std::string& path, const Histogram& a, const Histogram& s) {
    auto out = detail::open_out(path);
    out << "bin_lo,bin_hi,actual,synthetic\n";
    for (std::size_t i = 0; i < a.mass.size(); ++i)
        out << a.edges[i] << ',' << a.edges[i + 1] << ',' << a.mass[i] << ',' << s.mass[i] << '\n';
}

}  // namespace

std::vector<double> ramp_rates(std::span<const double> series, Index k) {
    const auto T = static_cast<Index>(series.size());
    if (k < 1 || k >= T) throw ConfigError("ramp interval " + std::to_string(k) + " outside [1, T)");
    std::vector<double> d(static_cast<std::size_t>(T - k));
    for (Index t = k; t < T; ++t)
        d[static_cast<std::size_t>(t - k)] = series[static_cast<std::size_t>(t)] - series[static_cast<std::size_t>(t - k)];
    return d;
}

LaplaceFit fit_laplace(std::span<const double> samples) {
    if (samples.size() < 2) throw DegenerateError("Laplace fit needs at least two samples");
    std::vector<double> v(samples.begin(), samples.end());
    if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); }))
        throw DegenerateError("all samples are identical");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double mu = v[mid];
    if (v.size() % 2 == 0) {
        const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        mu = 0.5 * (lower + mu);
    }
    double b = 0.0;
    for (double x : samples) b += std::abs(x - mu);
    return {mu, b / static_cast<double>(samples.size())};
}

Histogram histogram(std::span<const double> samples, double lo, double hi, Index bins) {
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(bins + 1));
    const double width = (hi - lo) / static_cast<double>(bins);
    for (Index i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + width * static_cast<double>(i);
    h.edges.back() = hi;
    h.mass.assign(static_cast<std::size_t>(bins), 0.0);
    double total = 0.0;
    for (double x : samples) {
        if (!(x >= lo && x <= hi)) continue;
        auto idx = static_cast<Index>(std::floor((x - lo) / width));
        idx = std::clamp<Index>(idx, 0, bins - 1);
        h.mass[static_cast<std::size_t>(idx)] += 1.0;
        total += 1.0;
    }
    if (total > 0.0)
        for (double& m : h.mass) m /= total;
    return h;
}

std::pair<Histogram, Histogram> paired_histograms(std::span<const double> a, std::span<const double> b, Index bins) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double x : a) lo = std::min(lo, x), hi = std::max(hi, x);
    for (double x : b) lo = std::min(lo, x), hi = std::max(hi, x);
    if (!std::isfinite(lo)) lo = hi = 0.0;
    return {histogram(a, lo, hi, bins), histogram(b, lo, hi, bins)};
}

double kl_divergence(const Histogram& p, const Histogram& q, double eps) {
    if (p.edges.size() != q.edges.size() || p.mass.size() != q.mass.size() || p.mass.size() + 1 != p.edges.size())
        throw BinError("histograms have different bin counts");
    for (std::size_t i = 0; i < p.edges.size(); ++i) {
        const double scale = std::max({1.0, std::abs(p.edges[i]), std::abs(q.edges[i])});
        if (std::abs(p.edges[i] - q.edges[i]) > 1e-12 * scale) throw BinError("histograms have different bin edges");
    }
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.mass.size(); ++i) sp += p.mass[i] + eps, sq += q.mass[i] + eps;
    double kl = 0.0;
    for (std::size_t i = 0; i < p.mass.size(); ++i) {
        const double pi = (p.mass[i] + eps) / sp;
        const double qi = (q.mass[i] + eps) / sq;
        kl += pi * std::log(pi / qi);
    }
    return std::max(kl, 0.0);
}

Moments moments(std::span<const double> samples) {
    Moments m;
    if (samples.empty()) return m;
    const double n = static_cast<double>(samples.size());
    m.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : samples) {
        const double d = x - m.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n, m3 /= n, m4 /= n;
    m.sd = std::sqrt(m2);
    if (m2 > 0.0) {
        m.skewness = m3 / (m2 * m.sd);
        m.kurtosis = m4 / (m2 * m2);
    }
    return m;
}

std::vector<Band> default_bands() {
    return {{7 * 86400.0, 86400.0, "7D-1D"},
            {86400.0, 21600.0, "1D-6h"},
            {21600.0, 3600.0, "6h-1h"},
            {3600.0, 600.0, "1h-10m"}};
}

std::string duration_label(double seconds) {
    auto whole = [](double v) { return std::abs(v - std::round(v)) < 1e-9; };
    if (seconds >= 86400.0 && whole(seconds / 86400.0)) return std::to_string(std::lround(seconds / 86400.0)) + "D";
    if (seconds >= 3600.0 && whole(seconds / 3600.0)) return std::to_string(std::lround(seconds / 3600.0)) + "h";
    if (seconds >= 60.0 && whole(seconds / 60.0)) return std::to_string(std::lround(seconds / 60.0)) + "min";
    return std::to_string(std::lround(seconds)) + "s";
}

std::vector<BandEnergy> psd_band_energy(const PsdEstimate& psd, const std::vector<Band>& bands) {
    const Index F = psd.frequencies.size();
    const double nyquist = F > 0 ? psd.frequencies(F - 1) : 0.0;
    const double df = psd.resolution();
    std::vector<BandEnergy> out;
    double total = 0.0;
    for (const auto& band : bands) {
        if (!(band.period_hi > band.period_lo && band.period_lo > 0.0))
            throw ConfigError("band '" + band.label + "' needs period_hi > period_lo > 0");
        const double f_lo = 1.0 / band.period_hi;
        const double f_hi = 1.0 / band.period_lo;
        if (f_hi > nyquist * (1.0 + 1e-9)) throw ConfigError("band '" + band.label + "' exceeds the Nyquist frequency");
        BandEnergy e;
        e.band = band;
        for (Index i = 0; i < F; ++i) {
            const double f = psd.frequencies(i);
            if (f > f_lo * (1.0 + 1e-12) && f <= f_hi * (1.0 + 1e-12)) e.energy += psd.power(i) * df;
        }
        e.empty = !(e.energy > 0.0);
        e.db = e.empty ? -std::numeric_limits<double>::infinity() : 10.0 * std::log10(e.energy);
        total += e.energy;
        out.push_back(e);
    }
    for (auto& e : out) e.percent = total > 0.0 ? 100.0 * e.energy / total : 0.0;
    return out;
}

Eigen::MatrixXd zero_lag_covariance(const Eigen::MatrixXd& values) {
    if (values.rows() == 0) throw ShapeError("covariance of an empty panel");
    const Eigen::MatrixXd c = values.rowwise() - values.colwise().mean();
    return (c.transpose() * c) / static_cast<double>(values.rows());
}

CovarianceComparison covariance_compare(const Panel& actual, const Panel& synth) {
    if (actual.sites() != synth.sites()) throw ShapeError("panels differ in site count");
    CovarianceComparison c;
    c.actual = zero_lag_covariance(per_unit(actual));
    c.synthetic = zero_lag_covariance(per_unit(synth));
    const double norm = c.actual.norm();
    c.frobenius_rel_err = norm > 0.0 ? (c.actual - c.synthetic).norm() / norm : (c.synthetic.norm() > 0.0 ? INFINITY : 0.0);
    return c;
}

double capacity_factor(std::span<const double> series, double capacity, double dt) {
    if (!(capacity > 0.0)) throw ConfigError("installed capacity must be positive");
    if (series.empty()) return 0.0;
    const double energy = std::accumulate(series.begin(), series.end(), 0.0) * dt;
    return energy / (capacity * dt * static_cast<double>(series.size()));
}

bool MetricsReport::all_finite() const {
    auto ok = [](double v) { return std::isfinite(v); };
    for (const auto& r : ramps)
        if (!ok(r.kl) || !ok(r.actual.laplace.b) || !ok(r.synthetic.laplace.b) || !ok(r.synthetic.laplace.mu))
            return false;
    for (const auto& b : bands)
        if (!ok(b.diff_percent) || !ok(b.actual.energy) || !ok(b.synthetic.energy)) return false;
    return ok(scenario_covariance_err) && ok(covariance.frobenius_rel_err) && ok(cf_diff_percent) && ok(marginal_kl) &&
           ok(mean_diff_percent) && ok(sd_diff_percent) && cf_synthetic.allFinite() && covariance.synthetic.allFinite();
}

MetricsReport build_report(const Panel& actual, std::span<const Panel> scenarios, const ReportOptions& opt) {
    if (scenarios.empty()) throw ConfigError("no scenarios to validate");
    const Index N = actual.sites();
    for (const auto& s : scenarios) {
        if (s.sites() != N) throw ShapeError("scenario site count differs from the actual panel");
        if (s.dt() != actual.dt()) throw SamplingError("scenario sampling interval differs from the actual panel");
    }
    MetricsReport r;
    r.scenarios = static_cast<Index>(scenarios.size());
    r.dt = static_cast<double>(actual.dt());
    r.site_ids = actual.site_ids;

    const Eigen::MatrixXd xa = per_unit(actual);
    std::vector<Eigen::MatrixXd> xs;
    for (const auto& s : scenarios) xs.push_back(per_unit(s));

    for (Index k : opt.ramp_intervals) {
        std::vector<double> da, ds;
        append_column_ramps(xa, k, da);
        for (const auto& x : xs) append_column_ramps(x, k, ds);
        RampComparison c;
        c.interval = k;
        c.label = duration_label(static_cast<double>(k) * r.dt);
        auto [ha, hs] = paired_histograms(da, ds, opt.bins);
        c.actual = {k, fit_laplace(da), moments(da), std::move(ha)};
        c.synthetic = {k, fit_laplace(ds), moments(ds), std::move(hs)};
        c.kl = kl_divergence(c.actual.hist, c.synthetic.hist);
        r.ramps.push_back(std::move(c));
    }

    const Index seglen = opt.segment_len > 0 ? opt.segment_len : default_segment_len(actual.steps());
    r.actual_psd = mean_psd(std::span<const Panel>(&actual, 1), seglen, opt);
    r.synthetic_psd = mean_psd(scenarios, seglen, opt);
    const auto ea = psd_band_energy(r.actual_psd, opt.bands);
    const auto es = psd_band_energy(r.synthetic_psd, opt.bands);
    double total_actual = 0.0;
    for (const auto& e : ea) total_actual += e.energy;
    for (std::size_t i = 0; i < ea.size(); ++i) {
        BandComparison b{ea[i], es[i], 0.0, 0.0};
        b.diff_percent = total_actual > 0.0 ? 100.0 * std::abs(es[i].energy - ea[i].energy) / total_actual : 0.0;
        b.relative_diff_percent = percent_diff(es[i].energy, ea[i].energy);
        r.bands.push_back(b);
    }

    r.covariance.actual = zero_lag_covariance(xa);
    r.covariance.synthetic = Eigen::MatrixXd::Zero(N, N);
    const double norm = r.covariance.actual.norm();
    for (const auto& x : xs) {
        const Eigen::MatrixXd c = zero_lag_covariance(x);
        r.covariance.synthetic += c / static_cast<double>(xs.size());
        r.scenario_covariance_err += (norm > 0.0 ? (c - r.covariance.actual).norm() / norm : 0.0) / static_cast<double>(xs.size());
    }
    r.covariance.frobenius_rel_err = norm > 0.0 ? (r.covariance.synthetic - r.covariance.actual).norm() / norm : 0.0;

    r.cf_actual.resize(N);
    r.cf_synthetic = Eigen::VectorXd::Zero(N);
    for (Index n = 0; n < N; ++n) {
        const Eigen::VectorXd col = actual.values.col(n);
        r.cf_actual(n) = capacity_factor({col.data(), static_cast<std::size_t>(col.size())}, actual.capacities(n), r.dt);
        for (const auto& s : scenarios) {
            const Eigen::VectorXd sc = s.values.col(n);
            r.cf_synthetic(n) += capacity_factor({sc.data(), static_cast<std::size_t>(sc.size())}, s.capacities(n), r.dt) /
                                 static_cast<double>(scenarios.size());
        }
    }
    r.cf_aggregate_actual = actual.values.sum() / (actual.capacities.sum() * static_cast<double>(actual.steps()));
    for (const auto& s : scenarios)
        r.cf_aggregate_synthetic += s.values.sum() / (s.capacities.sum() * static_cast<double>(s.steps())) /
                                    static_cast<double>(scenarios.size());
    r.cf_diff_percent = percent_diff(r.cf_aggregate_synthetic, r.cf_aggregate_actual);

    const std::span<const double> va(xa.data(), static_cast<std::size_t>(xa.size()));
    std::vector<double> vs;
    for (const auto& x : xs) vs.insert(vs.end(), x.data(), x.data() + x.size());
    auto [ma, ms] = paired_histograms(va, vs, opt.bins);
    r.marginal_actual = std::move(ma);
    r.marginal_synthetic = std::move(ms);
    r.marginal_kl = kl_divergence(r.marginal_actual, r.marginal_synthetic);
    const Moments mom_a = moments(va), mom_s = moments(vs);
    r.mean_actual = mom_a.mean;
    r.mean_synthetic = mom_s.mean;
    r.sd_actual = mom_a.sd;
    r.sd_synthetic = mom_s.sd;
    r.mean_diff_percent = percent_diff(r.mean_synthetic, r.mean_actual);
    r.sd_diff_percent = percent_diff(r.sd_synthetic, r.sd_actual);
    return r;
}

void write_report(const std::string& dir, const MetricsReport& r) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json j;
    j["scenarios"] = r.scenarios;
    j["dt_seconds"] = r.dt;
    j["sites"] = r.site_ids;
    j["all_finite"] = r.all_finite();
    for (const auto& c : r.ramps)
        j["ramps"].push_back({{"interval_samples", c.interval},
                              {"label", c.label},
                              {"kl", c.kl},
                              {"actual", laplace_json(c.actual)},
                              {"synthetic", laplace_json(c.synthetic)},
                              {"histogram_csv", "ramp_hist_" + c.label + ".csv"}});
    for (const auto& b : r.bands)
        j["psd_bands"].push_back({{"band", b.actual.band.label},
                                  {"actual_db", b.actual.db},
                                  {"synthetic_db", b.synthetic.db},
                                  {"actual_percent", b.actual.percent},
                                  {"synthetic_percent", b.synthetic.percent},
                                  {"diff_percent", b.diff_percent},
                                  {"relative_diff_percent", b.relative_diff_percent}});
    j["psd"] = {{"segment_len", r.actual_psd.segment_len},
                {"overlap", r.actual_psd.overlap},
                {"window", r.actual_psd.window},
                {"csv", "psd.csv"}};
    j["covariance"] = {{"frobenius_rel_err", r.covariance.frobenius_rel_err},
                       {"scenario_frobenius_rel_err", r.scenario_covariance_err},
                       {"actual", matrix_json(r.covariance.actual)},
                       {"synthetic", matrix_json(r.covariance.synthetic)}};
    j["capacity_factor"] = {{"aggregate_actual", r.cf_aggregate_actual},
                            {"aggregate_synthetic", r.cf_aggregate_synthetic},
                            {"diff_percent", r.cf_diff_percent},
                            {"csv", "capacity_factor.csv"}};
    j["marginal"] = {{"kl", r.marginal_kl},
                     {"mean_actual", r.mean_actual},
                     {"mean_synthetic", r.mean_synthetic},
                     {"sd_actual", r.sd_actual},
                     {"sd_synthetic", r.sd_synthetic},
                     {"mean_diff_percent", r.mean_diff_percent},
                     {"sd_diff_percent", r.sd_diff_percent},
                     {"histogram_csv", "marginal_hist.csv"}};
    {
        auto out = detail::open_out((fs::path(dir) / "report.json").string());
        out << j.dump(2) << '\n';
    }

    for (const auto& c : r.ramps)
        write_hist_csv((fs::path(dir) / ("ramp_hist_" + c.label + ".csv")).string(), c.actual.hist, c.synthetic.hist);
    write_hist_csv((fs::path(dir) / "marginal_hist.csv").string(), r.marginal_actual, r.marginal_synthetic);
    {
        auto out = detail::open_out((fs::path(dir) / "psd.csv").string());
        out << "frequency_hz,actual,synthetic\n";
        for (Index i = 0; i < r.actual_psd.frequencies.size(); ++i)
            out << r.actual_psd.frequencies(i) << ',' << r.actual_psd.power(i) << ','
                << (i < r.synthetic_psd.power.size() ? r.synthetic_psd.power(i) : NAN) << '\n';
    }
    write_matrix_csv((fs::path(dir) / "covariance_actual.csv").string(), r.covariance.actual, r.site_ids);
    write_matrix_csv((fs::path(dir) / "covariance_synthetic.csv").string(), r.covariance.synthetic, r.site_ids);
    {
        auto out = detail::open_out((fs::path(dir) / "capacity_factor.csv").string());
        out << "site,actual,synthetic\n";
        for (Index n = 0; n < r.cf_actual.size(); ++n)
            out << r.site_ids[static_cast<std::size_t>(n)] << ',' << r.cf_actual(n) << ',' << r.cf_synthetic(n) << '\n';
    }
}

}  // namespace gdfmgan
