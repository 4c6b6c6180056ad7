#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gdfmgan/gdfm.hpp"

namespace gdfmgan {

enum class Activation { Identity, Relu, LeakyRelu, Softplus, Sigmoid };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

/// Lower clamp of the discriminator probability; the upper clamp is 1 - eps.
inline constexpr double kProbabilityEpsilon = 1e-7;

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
    Activation activation = Activation::Identity;
};

struct MlpGradient {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;
};

/// Fully connected network. Batches are column-major: one sample per column.
struct Mlp {
    std::vector<DenseLayer> layers;
    double leaky_slope = 0.2;

    struct Tape {
        std::vector<Eigen::MatrixXd> inputs;       // input of each layer
        std::vector<Eigen::MatrixXd> activations;  // pre-activation of each layer
    };

    Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Tape& tape) const;
    /// Accumulates parameter gradients into `grad` (which must be sized by
    /// zero_gradient) and returns the gradient with respect to the input.
    Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& grad_output, MlpGradient& grad) const;
    MlpGradient zero_gradient() const;

    Index input_size() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
    Index output_size() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
    std::size_t parameter_count() const;
};

struct AdamState {
    MlpGradient first;
    MlpGradient second;
    std::uint64_t step = 0;
};

struct OptimizerConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct GanArchitecture {
    /// noise_dim, hidden..., sample_dim
    std::vector<Index> generator{64, 256, 256, 1};
    /// sample_dim, hidden..., 1
    std::vector<Index> discriminator{1, 256, 256, 1};
    Activation generator_hidden = Activation::Relu;
    Activation generator_output = Activation::Softplus;
    Activation discriminator_hidden = Activation::LeakyRelu;
    double leaky_slope = 0.2;

    Index noise_dim() const { return generator.front(); }
    Index sample_dim() const { return generator.back(); }
};

struct LossRecord {
    double loss_d = 0.0;
    double loss_g = 0.0;
};

struct GanModel {
    GanArchitecture arch;
    OptimizerConfig optimizer;
    std::uint64_t seed = 0;
    Mlp generator;
    Mlp discriminator;  // outputs a logit; probabilities come from discriminator_forward
    AdamState generator_state;
    AdamState discriminator_state;
    /// Fixed affine map applied to every discriminator input (real or fake):
    /// (x - input_mean) * input_scale.
    Eigen::VectorXd input_mean;
    Eigen::VectorXd input_scale;
    std::vector<LossRecord> history;
    std::optional<std::size_t> early_stopped_at;

    std::size_t parameter_count() const { return generator.parameter_count() + discriminator.parameter_count(); }
};

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
GanModel init_model(const GanArchitecture& arch, std::uint64_t seed, const OptimizerConfig& optimizer = {});

Eigen::VectorXd generator_forward(const GanModel& model, const Eigen::VectorXd& noise);
/// Probability clamped to [eps, 1 - eps].
double discriminator_forward(const GanModel& model, const Eigen::VectorXd& sample);

Eigen::MatrixXd generator_batch(const GanModel& model, const Eigen::MatrixXd& noise);
Eigen::VectorXd discriminator_batch(const GanModel& model, const Eigen::MatrixXd& samples);

/// Standard-normal noise, one column per sample.
Eigen::MatrixXd draw_noise(Index noise_dim, Index count, std::mt19937_64& rng);

enum class GeneratorLoss {
    NonSaturating,  // minimize -E[log D(G(z))]
    Minimax,        // minimize  E[log(1 - D(G(z)))]
};

struct LossGradient {
    double loss = 0.0;
    MlpGradient grad;
};

/// Gradient of -L_D = -(E[log D(real)] + E[log(1 - D(G(z)))]) with respect to
/// the discriminator parameters.
LossGradient discriminator_objective(const GanModel& model, const Eigen::MatrixXd& real, const Eigen::MatrixXd& noise);
/// Generator objective and its gradient with respect to the generator parameters.
LossGradient generator_objective(const GanModel& model, const Eigen::MatrixXd& noise, GeneratorLoss kind);

/// L_D = E[log D(Y)] + E[log(1 - D(G(Z)))].
double evaluate_loss_d(const GanModel& model, const Eigen::MatrixXd& real, const Eigen::MatrixXd& noise);
/// L_G = E[log(1 - D(G(Z)))].
double evaluate_loss_g(const GanModel& model, const Eigen::MatrixXd& noise);

/// One discriminator ascent step, then one non-saturating generator step with
/// fresh noise. Returns L_D before the D update and L_G before the G update.
LossRecord train_step(GanModel& model, const Eigen::MatrixXd& real_batch, std::mt19937_64& rng);

struct TrainOptions {
    std::size_t epochs = 1000;
    std::size_t batch = 16;
    std::optional<double> learning_rate;
    std::uint64_t seed = 0;
    /// Stop once |L_D - 2 log 0.5| stays below `early_stop_band` for
    /// `early_stop_window` consecutive steps. A zero band disables it.
    std::size_t early_stop_window = 200;
    double early_stop_band = 0.0;
    /// Before the first step, set the generator output bias so the output at
    /// zero pre-activation is the population mean, and scale each output row
    /// by the population SD of that entry.
    bool match_output = true;
};

/// Sets the discriminator input scaling from the sample population, then runs
/// epochs of shuffled mini-batches.
GanModel train(GanModel model, std::span<const Eigen::VectorXd> samples, const TrainOptions& options);

/// Flattening of half-spectrum magnitude tensors into GAN samples. Only the
/// lowest `trained_bins` bins are modelled; the remaining ones are filled with
/// the population mean at decode time.
struct MagnitudeCodec {
    Index factors = 0;
    Index sites = 0;
    Index half_bins = 0;
    Index trained_bins = 0;
    FilterTensor mean;  // population mean over all half bins

    /// Picks the smallest bin prefix holding at least `energy_share` of the
    /// average squared magnitude.
    static MagnitudeCodec fit(std::span<const FilterTensor> samples, double energy_share = 0.99);

    Index sample_dim() const { return factors * sites * trained_bins; }
    Eigen::VectorXd encode(const FilterTensor& half_magnitudes) const;
    FilterTensor decode(const Eigen::VectorXd& sample) const;
};

/// B_hat = G(z) * exp(j angle(B_observed)) on the non-redundant bins, mirrored
/// to the full grid; the loading of `observed` is kept.
FilterBank synthesize_filter(const GanModel& model, const MagnitudeCodec& codec, const FilterBank& observed,
                             std::uint64_t noise_seed);

class GanSampler final : public FilterSampler {
public:
    GanSampler(const GanModel& model, const MagnitudeCodec& codec) : model_(model), codec_(codec) {}
    FilterBank sample(const FilterBank& observed, std::mt19937_64& rng) const override;

private:
    const GanModel& model_;
    const MagnitudeCodec& codec_;
};

void save_checkpoint(const std::string& path, const GanModel& model, const MagnitudeCodec* codec = nullptr);

struct Checkpoint {
    GanModel model;
    std::optional<MagnitudeCodec> codec;
};
Checkpoint load_checkpoint(const std::string& path);

/// CSV `step,loss_d,loss_g`.
void write_loss_history(const std::string& path, const GanModel& model);

}  // namespace gdfmgan
