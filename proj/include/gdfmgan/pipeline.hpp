#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdfmgan/config.hpp"
#include "gdfmgan/gan.hpp"
#include "gdfmgan/gdfm.hpp"
#include "gdfmgan/metrics.hpp"
#include "gdfmgan/panel.hpp"

namespace gdfmgan {

enum class Mode { GdfmGan, Gdfm, Gan };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct GanSettings {
    Index noise_dim = 64;
    std::vector<Index> generator_hidden{256, 256};
    std::vector<Index> discriminator_hidden{256, 256};
    Activation output = Activation::Softplus;
    OptimizerConfig optimizer;
    TrainOptions train;
};

/// Every knob of the ingest -> fit -> train -> synthesize -> validate chain.
struct PipelineConfig {
    std::uint64_t seed = 1;
    SeasonScheme seasons = SeasonScheme::Calendar;
    bool allow_degenerate = false;
    Index block_len = 2880;
    Index max_lag = 0;  // 0: default_max_lag(block_len)
    Index q = 1;
    bool q_auto = false;
    double q_share = 0.8;
    double energy_share = 0.99;
    GanSettings gan;
    GanSettings waveform;  // direct time-domain baseline
    Index scenarios = 20;
    double days = 100.0;
    bool clip = true;
    ReportOptions report;

    Index lag_for_blocks() const;
};

/// Reads the documented keys; unknown keys are ignored.
PipelineConfig pipeline_config_from(const Config& cfg);

struct Prepared {
    TrendTable trend;
    Panel standardized;  // detrended, capacity-normalized, per-site z-scored
};

Prepared prepare(const Panel& raw, const PipelineConfig& cfg);

struct FitResult {
    Index max_lag = 0;
    Index q = 0;
    std::vector<Panel> blocks;  // standardized source blocks
    std::vector<FilterBank> banks;
    /// Mean over blocks of the energy share of the leading q eigenvalues.
    double common_share = 0.0;
};

FitResult fit_blocks(const Panel& standardized, const PipelineConfig& cfg);

struct TrainedGan {
    GanModel model;
    MagnitudeCodec codec;
};

/// GAN over the half-spectrum |B| tensors of the fitted blocks.
TrainedGan train_filter_gan(const FitResult& fit, const PipelineConfig& cfg);

/// Samples per day of the panel's sampling interval.
Index samples_per_day(const Panel& panel);
/// Direct GAN over flattened one-day blocks of the standardized panel.
GanModel train_waveform_gan(const Panel& standardized, const PipelineConfig& cfg);

struct SynthesisContext {
    const Prepared* prepared = nullptr;
    const FitResult* fit = nullptr;
    const TrainedGan* filter_gan = nullptr;  // gdfm-gan
    const GanModel* waveform_gan = nullptr;  // gan
};

struct Scenario {
    Panel panel;  // MW
    std::size_t clip_count = 0;
    double max_symmetrization_delta = 0.0;
};

/// One scenario of `cfg.days` days starting at the historical start time.
/// Each output block uses a uniformly drawn historical block as its source.
Scenario synthesize(Mode mode, const SynthesisContext& ctx, const PipelineConfig& cfg, std::uint64_t seed);

}  // namespace gdfmgan
