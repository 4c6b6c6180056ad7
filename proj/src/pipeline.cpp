#include "gdfmgan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "gdfmgan/errors.hpp"

namespace gdfmgan {

namespace {

std::vector<Index> to_sizes(const std::vector<std::int64_t>& v) { return {v.begin(), v.end()}; }

GanSettings gan_settings_from(const Config& cfg, const std::string& prefix, GanSettings s, std::uint64_t seed) {
    s.noise_dim = cfg.get_int(prefix + ".noise_dim", s.noise_dim);
    s.generator_hidden = to_sizes(cfg.get_ints(prefix + ".generator_hidden", {s.generator_hidden.begin(), s.generator_hidden.end()}));
    s.discriminator_hidden =
        to_sizes(cfg.get_ints(prefix + ".discriminator_hidden", {s.discriminator_hidden.begin(), s.discriminator_hidden.end()}));
    s.output = parse_activation(cfg.get(prefix + ".output", to_string(s.output)));
    s.optimizer.learning_rate = cfg.get_double(prefix + ".lr", s.optimizer.learning_rate);
    s.optimizer.beta1 = cfg.get_double(prefix + ".beta1", s.optimizer.beta1);
    s.optimizer.beta2 = cfg.get_double(prefix + ".beta2", s.optimizer.beta2);
    s.train.epochs = static_cast<std::size_t>(cfg.get_int(prefix + ".epochs", static_cast<std::int64_t>(s.train.epochs)));
    s.train.batch = static_cast<std::size_t>(cfg.get_int(prefix + ".batch", static_cast<std::int64_t>(s.train.batch)));
    s.train.early_stop_window = static_cast<std::size_t>(
        cfg.get_int(prefix + ".early_stop_window", static_cast<std::int64_t>(s.train.early_stop_window)));
    s.train.early_stop_band = cfg.get_double(prefix + ".early_stop_band", s.train.early_stop_band);
    s.train.seed = static_cast<std::uint64_t>(cfg.get_int(prefix + ".seed", static_cast<std::int64_t>(seed)));
    if (s.noise_dim < 1) throw ConfigError(prefix + ".noise_dim must be >= 1");
    return s;
}

std::vector<Index> layer_sizes(Index in, const std::vector<Index>& hidden, Index out) {
    std::vector<Index> sizes{in};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}

GanModel make_model(const GanSettings& s, Index sample_dim, std::uint64_t seed) {
    GanArchitecture arch;
    arch.generator = layer_sizes(s.noise_dim, s.generator_hidden, sample_dim);
    arch.discriminator = layer_sizes(sample_dim, s.discriminator_hidden, 1);
    arch.generator_output = s.output;
    return init_model(arch, seed, s.optimizer);
}

Index output_steps(const Panel& reference, double days) {
    const auto steps = static_cast<Index>(std::llround(days * 86400.0 / static_cast<double>(reference.dt())));
    if (steps < 1) throw ConfigError("scenario length must cover at least one sample");
    return steps;
}

}  // namespace

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::GdfmGan: return "gdfm-gan";
        case Mode::Gdfm: return "gdfm";
        case Mode::Gan: return "gan";
    }
    return "gdfm-gan";
}

Mode parse_mode(const std::string& name) {
    if (name == "gdfm-gan") return Mode::GdfmGan;
    if (name == "gdfm") return Mode::Gdfm;
    if (name == "gan") return Mode::Gan;
    throw ConfigError("unknown mode '" + name + "' (expected gdfm-gan, gdfm or gan)");
}

Index PipelineConfig::lag_for_blocks() const { return max_lag > 0 ? max_lag : default_max_lag(block_len); }

PipelineConfig pipeline_config_from(const Config& cfg) {
    PipelineConfig p;
    p.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<std::int64_t>(p.seed)));
    p.seasons = parse_season_scheme(cfg.get("seasons", to_string(p.seasons)));
    p.allow_degenerate = cfg.get_bool("allow_degenerate", p.allow_degenerate);
    p.block_len = cfg.get_int("block_len", p.block_len);
    p.max_lag = cfg.get_int("max_lag", p.max_lag);
    const std::string q = cfg.get("q", "1");
    if (q == "auto") {
        p.q_auto = true;
    } else {
        p.q = cfg.get_int("q", 1);
        if (p.q < 1) throw ConfigError("q must be >= 1 or 'auto'");
    }
    p.q_share = cfg.get_double("q_share", p.q_share);
    p.energy_share = cfg.get_double("energy_share", p.energy_share);

    GanSettings filter;
    filter.train.epochs = 2000;
    p.gan = gan_settings_from(cfg, "gan", filter, p.seed);
    GanSettings wave;
    wave.output = Activation::Identity;
    wave.train.epochs = 300;
    p.waveform = gan_settings_from(cfg, "waveform", wave, p.seed);

    p.scenarios = cfg.get_int("scenarios", p.scenarios);
    p.days = cfg.get_double("days", p.days);
    p.clip = cfg.get_bool("clip", p.clip);

    const auto intervals = cfg.get_ints("ramp_intervals", {});
    if (!intervals.empty()) p.report.ramp_intervals.assign(intervals.begin(), intervals.end());
    p.report.bins = cfg.get_int("bins", p.report.bins);
    const auto edges = cfg.get_doubles("band_edges", {});
    if (!edges.empty()) {
        if (edges.size() < 2) throw ConfigError("band_edges needs at least two periods");
        p.report.bands.clear();
        for (std::size_t i = 0; i + 1 < edges.size(); ++i)
            p.report.bands.push_back({edges[i], edges[i + 1], duration_label(edges[i]) + "-" + duration_label(edges[i + 1])});
    }
    p.report.segment_len = cfg.get_int("welch.segment_len", p.report.segment_len);
    p.report.overlap = cfg.get_double("welch.overlap", p.report.overlap);
    p.report.window = cfg.get("welch.window", p.report.window);

    if (p.block_len < 8) throw ConfigError("block_len must be >= 8");
    if (p.scenarios < 1) throw ConfigError("scenarios must be >= 1");
    if (!(p.days > 0.0)) throw ConfigError("days must be positive");
    if (!(p.q_share > 0.0 && p.q_share <= 1.0)) throw ConfigError("q_share must lie in (0, 1]");
    return p;
}

Prepared prepare(const Panel& raw, const PipelineConfig& cfg) {
    Prepared p;
    p.trend = extract_trend(raw, cfg.seasons);
    p.standardized = standardize(detrend_normalize(raw, p.trend, cfg.allow_degenerate), p.trend);
    return p;
}

FitResult fit_blocks(const Panel& standardized, const PipelineConfig& cfg) {
    FitResult fit;
    fit.max_lag = cfg.lag_for_blocks();
    fit.blocks = split_blocks(standardized, cfg.block_len);
    if (fit.blocks.empty())
        throw ShapeError("panel of " + std::to_string(standardized.steps()) + " steps holds no block of " +
                         std::to_string(cfg.block_len));

    std::vector<CrossSpectrum> spectra;
    for (const auto& b : fit.blocks) spectra.push_back(cpsd(lag_covariance(b, fit.max_lag)));

    fit.q = cfg.q;
    if (cfg.q_auto) {
        CrossSpectrum pooled = spectra.front();
        for (std::size_t i = 1; i < spectra.size(); ++i)
            for (Index m = 0; m < pooled.bins(); ++m) pooled.matrices[static_cast<std::size_t>(m)] += spectra[i].matrices[static_cast<std::size_t>(m)];
        fit.q = select_q(pooled, cfg.q_share);
    }
    if (fit.q > standardized.sites()) throw ConfigError("q exceeds the number of sites");

    for (const auto& s : spectra) {
        const SpectralFactorization fact = dpca_split(s, fit.q);
        double lead = 0.0, total = 0.0;
        for (const auto& ev : fact.eigenvalues) {
            lead += ev.head(fit.q).sum();
            total += ev.sum();
        }
        fit.common_share += (total > 0.0 ? lead / total : 0.0) / static_cast<double>(spectra.size());
        fit.banks.push_back(extract_filter(fact));
    }
    return fit;
}

TrainedGan train_filter_gan(const FitResult& fit, const PipelineConfig& cfg) {
    std::vector<FilterTensor> mags;
    for (const auto& bank : fit.banks) mags.push_back(bank.magnitude(bank.half_bins()));
    TrainedGan out;
    out.codec = MagnitudeCodec::fit(mags, cfg.energy_share);
    std::vector<Eigen::VectorXd> samples;
    for (const auto& m : mags) samples.push_back(out.codec.encode(m));
    out.model = train(make_model(cfg.gan, out.codec.sample_dim(), cfg.seed), samples, cfg.gan.train);
    return out;
}

Index samples_per_day(const Panel& panel) {
    const std::int64_t dt = panel.dt();
    if (dt <= 0 || 86400 % dt != 0) throw SamplingError("sampling interval does not divide a day");
    return static_cast<Index>(86400 / dt);
}

GanModel train_waveform_gan(const Panel& standardized, const PipelineConfig& cfg) {
    const Index spd = samples_per_day(standardized);
    const Index days = standardized.steps() / spd;
    if (days < 1) throw ShapeError("waveform baseline needs at least one full day");
    const Index N = standardized.sites();
    std::vector<Eigen::VectorXd> samples;
    for (Index d = 0; d < days; ++d) {
        Eigen::VectorXd v(N * spd);
        for (Index n = 0; n < N; ++n) v.segment(n * spd, spd) = standardized.values.col(n).segment(d * spd, spd);
        samples.push_back(std::move(v));
    }
    return train(make_model(cfg.waveform, N * spd, cfg.seed), samples, cfg.waveform.train);
}

Scenario synthesize(Mode mode, const SynthesisContext& ctx, const PipelineConfig& cfg, std::uint64_t seed) {
    if (!ctx.prepared) throw ConfigError("synthesis needs the prepared panel");
    const Panel& ref = ctx.prepared->standardized;
    const Index steps = output_steps(ref, cfg.days);
    const Index N = ref.sites();
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd values(steps, N);
    Scenario out;

    if (mode == Mode::Gan) {
        if (!ctx.waveform_gan) throw ConfigError("gan mode needs a waveform model");
        const Index spd = samples_per_day(ref);
        if (ctx.waveform_gan->arch.sample_dim() != N * spd) throw ShapeError("waveform model does not match the panel");
        for (Index row = 0; row < steps; row += spd) {
            const Eigen::MatrixXd z = draw_noise(ctx.waveform_gan->arch.noise_dim(), 1, rng);
            const Eigen::VectorXd g = generator_forward(*ctx.waveform_gan, z.col(0));
            const Index take = std::min(spd, steps - row);
            for (Index n = 0; n < N; ++n) values.col(n).segment(row, take) = g.segment(n * spd, take);
        }
    } else {
        if (!ctx.fit) throw ConfigError("gdfm modes need fitted blocks");
        const FitResult& fit = *ctx.fit;
        std::unique_ptr<FilterSampler> sampler;
        if (mode == Mode::GdfmGan) {
            if (!ctx.filter_gan) throw ConfigError("gdfm-gan mode needs a trained filter model");
            sampler = std::make_unique<GanSampler>(ctx.filter_gan->model, ctx.filter_gan->codec);
        } else {
            std::vector<FilterTensor> mags;
            for (const auto& bank : fit.banks) mags.push_back(bank.magnitude(bank.half_bins()));
            sampler = std::make_unique<BootstrapSampler>(std::move(mags));
        }
        std::uniform_int_distribution<std::size_t> pick(0, fit.blocks.size() - 1);
        for (Index row = 0; row < steps; row += cfg.block_len) {
            const std::size_t src = pick(rng);
            const std::uint64_t block_seed = rng();
            const ScenarioBlock b = synthesize_scenario(fit.blocks[src], *sampler, fit.max_lag, fit.q, block_seed);
            out.max_symmetrization_delta = std::max(out.max_symmetrization_delta, b.symmetrization_delta);
            const Index take = std::min(b.panel.steps(), steps - row);
            values.middleRows(row, take) = b.panel.values.topRows(take);
        }
    }

    Panel std_panel = make_panel(std::move(values), ref.timestamps.front(), ref.dt(), ref.site_ids, ref.capacities, true);
    RetrendResult r = retrend(destandardize(std_panel, ctx.prepared->trend), ctx.prepared->trend, cfg.clip);
    out.panel = std::move(r.panel);
    out.clip_count = r.clip_count;
    return out;
}

}  // namespace gdfmgan
