#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gdfmgan/config.hpp"
#include "gdfmgan/errors.hpp"
#include "gdfmgan/gan.hpp"
#include "gdfmgan/gdfm.hpp"
#include "gdfmgan/metrics.hpp"
#include "gdfmgan/oracle.hpp"
#include "gdfmgan/panel.hpp"
#include "gdfmgan/pipeline.hpp"
#include "gdfmgan/spectral.hpp"

#ifndef GDFMGAN_VERSION
#define GDFMGAN_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace gdfmgan;
using json = nlohmann::ordered_json;

namespace {

// Missing inputs and bad invocations exit with 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Global {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out = ".";
};

void require_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path)) throw UsageError(std::string("missing ") + what + ": '" + path + "'");
}

Config load_config(const Global& g) {
    Config cfg;
    if (!g.config.empty()) {
        require_file(g.config, "config file");
        cfg = Config::load(g.config);
    }
    if (g.seed_given) cfg.set("seed", std::to_string(g.seed));
    return cfg;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Merges one run record into dir/manifest.json.
void write_manifest(const fs::path& dir, const std::string& verb, const Config& cfg, const PipelineConfig& pc,
                    json extra = json::object()) {
    fs::create_directories(dir);
    const fs::path path = dir / "manifest.json";
    json m = json::object();
    if (fs::exists(path)) {
        std::ifstream in(path);
        m = json::parse(in, nullptr, false);
        if (m.is_discarded() || !m.is_object()) m = json::object();
    }
    m["tool"] = "gdfmgan";
    m["version"] = GDFMGAN_VERSION;
    m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    json run;
    run["config_hash"] = hex(fnv1a(cfg.canonical()));
    run["seed"] = pc.seed;
    run["gan_seed"] = pc.gan.train.seed;
    run["waveform_seed"] = pc.waveform.train.seed;
    json entries = json::object();
    for (const auto& [k, v] : cfg.entries()) entries[k] = v;
    run["config"] = entries;
    for (auto& [k, v] : extra.items()) run[k] = v;
    m["runs"][verb] = run;
    std::ofstream out(path);
    out << m.dump(2) << '\n';
    if (!out) throw IoError("cannot write '" + path.string() + "'");
}

struct Workspace {
    fs::path dir;
    fs::path file(const std::string& name) const { return dir / name; }
};

Panel load_raw(const Workspace& ws) {
    const auto panel = ws.file("panel.csv").string();
    const auto caps = ws.file("capacities.csv").string();
    require_file(panel, "ingested panel (run ingest first)");
    require_file(caps, "capacities (run ingest first)");
    return load_panel(panel, load_capacities(caps));
}

int cmd_oracle(const Global& g) {
    const Config cfg = load_config(g);
    const PipelineConfig pc = pipeline_config_from(cfg);
    const OracleSpec spec = oracle_spec_from(cfg);
    const Workspace ws{g.out};
    fs::create_directories(ws.dir);
    const Panel p = generate_panel(spec);
    write_panel(ws.file("oracle_panel.csv").string(), p);
    write_capacities(ws.file("oracle_capacities.csv").string(), p);
    write_manifest(ws.dir, "oracle", cfg, pc, {{"oracle_seed", spec.seed}, {"steps", spec.steps}, {"sites", spec.sites}});
    std::cout << "oracle: " << p.sites() << " sites x " << p.steps() << " steps -> " << ws.file("oracle_panel.csv").string()
              << '\n';
    return 0;
}

int cmd_ingest(const Global& g, const std::string& panel_path, const std::string& caps_path) {
    const Config cfg = load_config(g);
    const PipelineConfig pc = pipeline_config_from(cfg);
    require_file(panel_path, "panel");
    require_file(caps_path, "capacities");
    const Panel raw = load_panel(panel_path, load_capacities(caps_path));
    const Prepared prep = prepare(raw, pc);
    const Workspace ws{g.out};
    fs::create_directories(ws.dir);
    write_panel(ws.file("panel.csv").string(), raw);
    write_capacities(ws.file("capacities.csv").string(), raw);
    write_trend(ws.file("trend.csv").string(), prep.trend);
    write_panel(ws.file("standardized.csv").string(), prep.standardized);
    write_manifest(ws.dir, "ingest", cfg, pc, {{"panel", panel_path}, {"steps", raw.steps()}, {"sites", raw.sites()}});
    std::cout << "ingest: " << raw.sites() << " sites, " << raw.steps() << " steps, dt " << raw.dt() << " s\n";
    return 0;
}

int cmd_fit(const Global& g) {
    const Config cfg = load_config(g);
    const PipelineConfig pc = pipeline_config_from(cfg);
    const Workspace ws{g.out};
    const Prepared prep = prepare(load_raw(ws), pc);
    const FitResult fit = fit_blocks(prep.standardized, pc);
    write_filter_banks(ws.file("filters.bin").string(), fit.banks);

    CrossSpectrum mean;
    for (const Panel& block : fit.blocks) {
        const CrossSpectrum s = cpsd(lag_covariance(block, fit.max_lag));
        if (mean.matrices.empty()) {
            mean = s;
        } else {
            for (std::size_t m = 0; m < s.matrices.size(); ++m) mean.matrices[m] += s.matrices[m];
        }
    }
    for (auto& m : mean.matrices) m /= static_cast<double>(fit.blocks.size());
    write_spectrum(ws.file("spectrum.bin").string(), mean);
    write_spectrum_diagonals(ws.file("spectrum_diagonals.csv").string(), mean, prep.standardized.site_ids);

    json info{{"blocks", fit.blocks.size()}, {"max_lag", fit.max_lag}, {"q", fit.q}, {"common_share", fit.common_share}};
    std::ofstream(ws.file("fit.json")) << info.dump(2) << '\n';
    write_manifest(ws.dir, "fit", cfg, pc, info);
    std::cout << "fit: " << fit.blocks.size() << " blocks, K = " << fit.max_lag << ", q = " << fit.q
              << ", common share " << fit.common_share << '\n';
    return 0;
}

int cmd_train(const Global& g, const std::string& mode_name) {
    const Config cfg = load_config(g);
    const PipelineConfig pc = pipeline_config_from(cfg);
    const Mode mode = parse_mode(mode_name);
    const Workspace ws{g.out};
    const Prepared prep = prepare(load_raw(ws), pc);
    if (mode == Mode::GdfmGan) {
        const FitResult fit = fit_blocks(prep.standardized, pc);
        const TrainedGan t = train_filter_gan(fit, pc);
        save_checkpoint(ws.file("model.ckpt").string(), t.model, &t.codec);
        write_loss_history(ws.file("loss.csv").string(), t.model);
        write_manifest(ws.dir, "train-gdfm-gan", cfg, pc,
                       {{"steps", t.model.history.size()}, {"trained_bins", t.codec.trained_bins}});
        std::cout << "train: filter GAN, " << t.model.history.size() << " steps, " << t.codec.trained_bins << "/"
                  << t.codec.half_bins << " bins modelled\n";
    } else if (mode == Mode::Gan) {
        const GanModel m = train_waveform_gan(prep.standardized, pc);
        save_checkpoint(ws.file("waveform.ckpt").string(), m);
        write_loss_history(ws.file("waveform_loss.csv").string(), m);
        write_manifest(ws.dir, "train-gan", cfg, pc, {{"steps", m.history.size()}});
        std::cout << "train: waveform GAN, " << m.history.size() << " steps\n";
    } else {
        throw UsageError("the gdfm mode has nothing to train");
    }
    return 0;
}

int cmd_synthesize(const Global& g, const std::string& mode_name, std::optional<Index> count,
                   std::optional<double> days) {
    Config cfg = load_config(g);
    if (count) cfg.set("scenarios", std::to_string(*count));
    if (days) {
        std::ostringstream s;
        s.precision(17);
        s << *days;
        cfg.set("days", s.str());
    }
    const PipelineConfig pc = pipeline_config_from(cfg);
    const Mode mode = parse_mode(mode_name);
    const Workspace ws{g.out};
    const Prepared prep = prepare(load_raw(ws), pc);
    const FitResult fit = fit_blocks(prep.standardized, pc);

    std::optional<Checkpoint> filter_ck, wave_ck;
    std::optional<TrainedGan> filter;
    SynthesisContext ctx{&prep, &fit, nullptr, nullptr};
    if (mode == Mode::GdfmGan) {
        require_file(ws.file("model.ckpt").string(), "filter GAN checkpoint (run train --mode gdfm-gan)");
        filter_ck = load_checkpoint(ws.file("model.ckpt").string());
        if (!filter_ck->codec) throw IoError("model.ckpt carries no magnitude codec");
        filter = TrainedGan{filter_ck->model, *filter_ck->codec};
        ctx.filter_gan = &*filter;
    } else if (mode == Mode::Gan) {
        require_file(ws.file("waveform.ckpt").string(), "waveform GAN checkpoint (run train --mode gan)");
        wave_ck = load_checkpoint(ws.file("waveform.ckpt").string());
        ctx.waveform_gan = &wave_ck->model;
    }

    const fs::path dir = ws.file("scenarios");
    fs::create_directories(dir);
    std::size_t clipped = 0;
    for (Index i = 0; i < pc.scenarios; ++i) {
        const std::uint64_t seed = pc.seed + static_cast<std::uint64_t>(i);
        const Scenario s = synthesize(mode, ctx, pc, seed);
        clipped += s.clip_count;
        const std::string name = "scenario_" + to_string(mode) + "_" + std::to_string(i) + ".csv";
        write_panel((dir / name).string(), s.panel);
    }
    write_manifest(dir, "synthesize-" + to_string(mode), cfg, pc,
                   {{"mode", to_string(mode)}, {"count", pc.scenarios}, {"days", pc.days}, {"clipped_cells", clipped}});
    std::cout << "synthesize: " << pc.scenarios << " " << to_string(mode) << " scenarios of " << pc.days << " days, "
              << clipped << " cells clipped -> " << dir.string() << '\n';
    return 0;
}

std::vector<fs::path> scenario_files(const fs::path& dir, const std::string& mode) {
    if (!fs::is_directory(dir)) throw UsageError("missing scenario directory: '" + dir.string() + "'");
    const std::regex pattern("scenario_" + mode + "_([0-9]+)\\.csv");
    std::vector<std::pair<long long, fs::path>> found;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = e.path().filename().string();
        if (std::regex_match(name, m, pattern)) found.emplace_back(std::stoll(m[1].str()), e.path());
    }
    if (found.empty()) throw UsageError("no scenario_" + mode + "_*.csv files in '" + dir.string() + "'");
    std::sort(found.begin(), found.end());
    std::vector<fs::path> out;
    for (auto& [i, p] : found) out.push_back(p);
    return out;
}

int cmd_validate(const Global& g, std::string actual, std::string scenarios, std::string caps, const std::string& mode_name,
                 std::string report_dir) {
    const Config cfg = load_config(g);
    const PipelineConfig pc = pipeline_config_from(cfg);
    const Mode mode = parse_mode(mode_name);
    const Workspace ws{g.out};
    if (actual.empty()) actual = ws.file("panel.csv").string();
    if (caps.empty()) caps = ws.file("capacities.csv").string();
    if (scenarios.empty()) scenarios = ws.file("scenarios").string();
    if (report_dir.empty()) report_dir = ws.file("report").string();
    require_file(actual, "actual panel");
    require_file(caps, "capacities");
    const CapacityMap capacity = load_capacities(caps);
    const Panel real = load_panel(actual, capacity);
    std::vector<Panel> synth;
    for (const auto& f : scenario_files(scenarios, to_string(mode))) synth.push_back(load_panel(f.string(), capacity));

    const MetricsReport r = build_report(real, synth, pc.report);
    write_report(report_dir, r);
    write_manifest(report_dir, "validate-" + to_string(mode), cfg, pc,
                   {{"actual", actual}, {"scenarios", synth.size()}, {"mode", to_string(mode)}});

    std::cout << "validate: " << synth.size() << " " << to_string(mode) << " scenarios\n";
    for (const auto& c : r.ramps) std::cout << "  ramp " << c.label << " KL " << c.kl << '\n';
    for (const auto& b : r.bands)
        std::cout << "  band " << b.actual.band.label << " energy diff " << b.diff_percent << " %\n";
    std::cout << "  covariance rel. error " << r.scenario_covariance_err << '\n'
              << "  mean diff " << r.mean_diff_percent << " %, sd diff " << r.sd_diff_percent << " %\n"
              << "  capacity factor diff " << r.cf_diff_percent << " %\n"
              << "  marginal KL " << r.marginal_kl << '\n'
              << "  all finite: " << (r.all_finite() ? "yes" : "no") << '\n';
    if (!r.all_finite()) {
        std::cerr << "NumericsError: report contains non-finite metrics\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-site scenario synthesis with a spectral factor model and a filter GAN"};
    app.set_version_flag("--version", GDFMGAN_VERSION);
    Global g;
    app.add_option("--config", g.config, "key = value configuration file");
    auto* seed_opt = app.add_option("--seed", g.seed, "master seed (overrides `seed` in the config)");
    app.add_option("--out", g.out, "workspace directory")->capture_default_str();
    app.require_subcommand(1);

    auto* oracle = app.add_subcommand("oracle", "write a synthetic panel with known spectra");

    std::string panel_path, caps_path;
    auto* ingest = app.add_subcommand("ingest", "load a panel, extract trends and standardize");
    ingest->add_option("--panel", panel_path, "CSV timestamp,site1,...,siteN")->required();
    ingest->add_option("--capacities", caps_path, "CSV site,capacity_mw")->required();

    auto* fit = app.add_subcommand("fit", "estimate block spectra and dynamic filters");

    std::string train_mode = "gdfm-gan";
    auto* train = app.add_subcommand("train", "train the filter GAN or the waveform baseline");
    train->add_option("--mode", train_mode, "gdfm-gan | gan")
        ->check(CLI::IsMember({"gdfm-gan", "gan"}))
        ->capture_default_str();

    std::string synth_mode = "gdfm-gan";
    Index count = 0;
    double days = 0.0;
    auto* synth = app.add_subcommand("synthesize", "write scenario panels");
    synth->add_option("--mode", synth_mode, "gdfm-gan | gdfm | gan")
        ->check(CLI::IsMember({"gdfm-gan", "gdfm", "gan"}))
        ->capture_default_str();
    auto* count_opt = synth->add_option("--count", count, "number of scenarios (default: config `scenarios`)");
    auto* days_opt = synth->add_option("--days", days, "days per scenario (default: config `days`)");

    std::string actual, scen_dir, val_caps, val_mode = "gdfm-gan", report_dir;
    auto* validate = app.add_subcommand("validate", "compare scenarios against the actual panel");
    validate->add_option("--actual", actual, "actual panel (default: <out>/panel.csv)");
    validate->add_option("--scenarios", scen_dir, "scenario directory (default: <out>/scenarios)");
    validate->add_option("--capacities", val_caps, "capacities CSV (default: <out>/capacities.csv)");
    validate->add_option("--mode", val_mode, "which scenario files to read")
        ->check(CLI::IsMember({"gdfm-gan", "gdfm", "gan"}))
        ->capture_default_str();
    validate->add_option("--report", report_dir, "report directory (default: <out>/report)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    g.seed_given = seed_opt->count() > 0;

    try {
        if (oracle->parsed()) return cmd_oracle(g);
        if (ingest->parsed()) return cmd_ingest(g, panel_path, caps_path);
        if (fit->parsed()) return cmd_fit(g);
        if (train->parsed()) return cmd_train(g, train_mode);
        if (synth->parsed())
            return cmd_synthesize(g, synth_mode, count_opt->count() ? std::optional<Index>(count) : std::nullopt,
                                  days_opt->count() ? std::optional<double>(days) : std::nullopt);
        if (validate->parsed()) return cmd_validate(g, actual, scen_dir, val_caps, val_mode, report_dir);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
