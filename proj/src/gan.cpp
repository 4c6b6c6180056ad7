#include "gdfmgan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "csv.hpp"
#include "gdfmgan/errors.hpp"

namespace gdfmgan {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    if (z > 30.0) return z;
    if (z < -30.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

double activate(Activation a, double z, double slope) {
    switch (a) {
        case Activation::Identity: return z;
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::LeakyRelu: return z > 0.0 ? z : slope * z;
        case Activation::Softplus: return softplus(z);
        case Activation::Sigmoid: return sigmoid(z);
    }
    return z;
}

double derivative(Activation a, double z, double slope) {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::LeakyRelu: return z > 0.0 ? 1.0 : slope;
        case Activation::Softplus: return sigmoid(z);
        case Activation::Sigmoid: {
            const double s = sigmoid(z);
            return s * (1.0 - s);
        }
    }
    return 1.0;
}

double clamp_probability(double p) { return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon); }

Mlp build_mlp(const std::vector<Index>& sizes, Activation hidden, Activation output, double slope,
              std::mt19937_64& rng) {
    Mlp net;
    net.leaky_slope = slope;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const Index in = sizes[l];
        const Index out = sizes[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer;
        layer.weight.resize(out, in);
        for (Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
        layer.bias = Eigen::VectorXd::Zero(out);
        layer.activation = l + 2 == sizes.size() ? output : hidden;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

void check_sizes(const std::vector<Index>& sizes, const char* which) {
    if (sizes.size() < 2) throw ConfigError(std::string(which) + " needs at least input and output sizes");
    for (Index s : sizes)
        if (s < 1) throw ConfigError(std::string(which) + " layer sizes must be >= 1");
}

void adam_update(Mlp& net, AdamState& state, const MlpGradient& grad, const OptimizerConfig& opt) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(opt.beta1, t);
    const double c2 = 1.0 - std::pow(opt.beta2, t);
    auto step = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = opt.beta1 * m + (1.0 - opt.beta1) * g;
        v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
        param.array() -= opt.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + opt.epsilon);
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        step(net.layers[l].weight, state.first.weight[l], state.second.weight[l], grad.weight[l]);
        step(net.layers[l].bias, state.first.bias[l], state.second.bias[l], grad.bias[l]);
    }
}

Eigen::MatrixXd scale_inputs(const GanModel& model, const Eigen::MatrixXd& x) {
    if (x.rows() != model.arch.sample_dim())
        throw ShapeError("discriminator input has " + std::to_string(x.rows()) + " rows, expected " +
                         std::to_string(model.arch.sample_dim()));
    return ((x.colwise() - model.input_mean).array().colwise() * model.input_scale.array()).matrix();
}

// Logits and clamped probabilities of a batch.
struct DPass {
    Mlp::Tape tape;
    Eigen::MatrixXd logits;
    Eigen::VectorXd prob;
};

DPass discriminate(const GanModel& model, const Eigen::MatrixXd& x) {
    DPass p;
    p.logits = model.discriminator.forward(scale_inputs(model, x), p.tape);
    p.prob.resize(p.logits.cols());
    for (Index i = 0; i < p.logits.cols(); ++i) p.prob(i) = sigmoid(p.logits(0, i));
    return p;
}

struct GPass {
    double minimax = 0.0;
    double nonsaturating = 0.0;
    MlpGradient grad;
};

GPass generator_pass(const GanModel& model, const Eigen::MatrixXd& noise, GeneratorLoss kind) {
    GPass out;
    Mlp::Tape gtape;
    const Eigen::MatrixXd fake = model.generator.forward(noise, gtape);
    DPass d = discriminate(model, fake);
    const Index b = noise.cols();
    const double inv = 1.0 / static_cast<double>(b);
    Eigen::MatrixXd dlogit(1, b);
    for (Index i = 0; i < b; ++i) {
        const double s = d.prob(i);
        const double p = clamp_probability(s);
        out.minimax += std::log(1.0 - p) * inv;
        out.nonsaturating -= std::log(p) * inv;
        dlogit(0, i) = kind == GeneratorLoss::Minimax ? -s * inv : -(1.0 - s) * inv;
    }
    MlpGradient scratch = model.discriminator.zero_gradient();
    Eigen::MatrixXd dscaled = model.discriminator.backward(d.tape, dlogit, scratch);
    Eigen::MatrixXd dfake = (dscaled.array().colwise() * model.input_scale.array()).matrix();
    out.grad = model.generator.zero_gradient();
    model.generator.backward(gtape, dfake, out.grad);
    return out;
}

double inverse_activation(Activation a, double y) {
    switch (a) {
        case Activation::Softplus: {
            const double v = std::max(y, 1e-6);
            return v > 30.0 ? v : std::log(std::expm1(v));
        }
        case Activation::Sigmoid: {
            const double v = std::clamp(y, 1e-6, 1.0 - 1e-6);
            return std::log(v / (1.0 - v));
        }
        case Activation::Relu: return std::max(y, 0.0);
        case Activation::LeakyRelu:
        case Activation::Identity: return y;
    }
    return y;
}

void match_output_layer(DenseLayer& layer, const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
    for (Index i = 0; i < layer.bias.size(); ++i) {
        layer.bias(i) = inverse_activation(layer.activation, mean(i));
        const double floor = std::max(1e-3, 1e-2 * std::abs(mean(i)));
        layer.weight.row(i) *= std::max(sd(i), floor);
    }
}

bool finite(const MlpGradient& g) {
    for (const auto& w : g.weight)
        if (!w.allFinite()) return false;
    for (const auto& b : g.bias)
        if (!b.allFinite()) return false;
    return true;
}

constexpr char kCheckpointMagic[8] = {'G', 'D', 'F', 'M', 'G', 'A', 'N', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_sizes(detail::BinaryWriter& w, const std::vector<Index>& sizes) {
    w.u64(sizes.size());
    for (Index s : sizes) w.u64(static_cast<std::uint64_t>(s));
}

std::vector<Index> read_sizes(detail::BinaryReader& r) {
    const std::uint64_t n = r.u64();
    if (n < 2 || n > 64) throw IoError("corrupt layer list in '" + r.path() + "'");
    std::vector<Index> sizes(n);
    for (auto& s : sizes) {
        s = static_cast<Index>(r.u64());
        if (s < 1 || s > (Index{1} << 24)) throw IoError("corrupt layer size in '" + r.path() + "'");
    }
    return sizes;
}

template <typename M>
void write_dense(detail::BinaryWriter& w, const M& m) {
    for (Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
}

template <typename M>
void read_dense(detail::BinaryReader& r, M& m) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
}

void write_mlp(detail::BinaryWriter& w, const Mlp& net, const AdamState& state) {
    for (const auto& layer : net.layers) {
        write_dense(w, layer.weight);
        write_dense(w, layer.bias);
    }
    w.u64(state.step);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        write_dense(w, state.first.weight[l]);
        write_dense(w, state.first.bias[l]);
        write_dense(w, state.second.weight[l]);
        write_dense(w, state.second.bias[l]);
    }
}

void read_mlp(detail::BinaryReader& r, Mlp& net, AdamState& state) {
    for (auto& layer : net.layers) {
        read_dense(r, layer.weight);
        read_dense(r, layer.bias);
    }
    state.step = r.u64();
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        read_dense(r, state.first.weight[l]);
        read_dense(r, state.first.bias[l]);
        read_dense(r, state.second.weight[l]);
        read_dense(r, state.second.bias[l]);
    }
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::LeakyRelu: return "leaky_relu";
        case Activation::Softplus: return "softplus";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "identity";
}

Activation parse_activation(const std::string& name) {
    if (name == "identity" || name == "linear") return Activation::Identity;
    if (name == "relu") return Activation::Relu;
    if (name == "leaky_relu") return Activation::LeakyRelu;
    if (name == "softplus") return Activation::Softplus;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw ConfigError("unknown activation '" + name + "'");
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const {
    Tape tape;
    return forward(input, tape);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Tape& tape) const {
    if (input.rows() != input_size())
        throw ShapeError("network input has " + std::to_string(input.rows()) + " rows, expected " +
                         std::to_string(input_size()));
    tape.inputs.clear();
    tape.activations.clear();
    Eigen::MatrixXd x = input;
    for (const auto& layer : layers) {
        Eigen::MatrixXd z = layer.weight * x;
        z.colwise() += layer.bias;
        tape.inputs.push_back(std::move(x));
        x = z.unaryExpr([&](double v) { return activate(layer.activation, v, leaky_slope); });
        tape.activations.push_back(std::move(z));
    }
    return x;
}

Eigen::MatrixXd Mlp::backward(const Tape& tape, const Eigen::MatrixXd& grad_output, MlpGradient& grad) const {
    Eigen::MatrixXd g = grad_output;
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& layer = layers[l];
        const Eigen::MatrixXd delta =
            g.cwiseProduct(tape.activations[l].unaryExpr([&](double v) { return derivative(layer.activation, v, leaky_slope); }));
        grad.weight[l].noalias() += delta * tape.inputs[l].transpose();
        grad.bias[l] += delta.rowwise().sum();
        g = layer.weight.transpose() * delta;
    }
    return g;
}

MlpGradient Mlp::zero_gradient() const {
    MlpGradient g;
    for (const auto& layer : layers) {
        g.weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
        g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
    return g;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    return n;
}

GanModel init_model(const GanArchitecture& arch, std::uint64_t seed, const OptimizerConfig& optimizer) {
    check_sizes(arch.generator, "generator");
    check_sizes(arch.discriminator, "discriminator");
    if (arch.generator.back() != arch.discriminator.front())
        throw ConfigError("generator output size " + std::to_string(arch.generator.back()) +
                          " differs from discriminator input size " + std::to_string(arch.discriminator.front()));
    if (arch.discriminator.back() != 1) throw ConfigError("discriminator must end in a single unit");
    GanModel model;
    model.arch = arch;
    model.optimizer = optimizer;
    model.seed = seed;
    std::mt19937_64 rng(seed);
    model.generator = build_mlp(arch.generator, arch.generator_hidden, arch.generator_output, arch.leaky_slope, rng);
    model.discriminator =
        build_mlp(arch.discriminator, arch.discriminator_hidden, Activation::Identity, arch.leaky_slope, rng);
    model.generator_state.first = model.generator.zero_gradient();
    model.generator_state.second = model.generator.zero_gradient();
    model.discriminator_state.first = model.discriminator.zero_gradient();
    model.discriminator_state.second = model.discriminator.zero_gradient();
    model.input_mean = Eigen::VectorXd::Zero(arch.sample_dim());
    model.input_scale = Eigen::VectorXd::Ones(arch.sample_dim());
    return model;
}

Eigen::MatrixXd generator_batch(const GanModel& model, const Eigen::MatrixXd& noise) {
    if (!noise.allFinite()) throw NumericsError("non-finite generator noise");
    Eigen::MatrixXd out = model.generator.forward(noise);
    if (!out.allFinite()) throw NumericsError("non-finite generator output");
    return out;
}

Eigen::VectorXd generator_forward(const GanModel& model, const Eigen::VectorXd& noise) {
    return generator_batch(model, noise);
}

Eigen::VectorXd discriminator_batch(const GanModel& model, const Eigen::MatrixXd& samples) {
    if (!samples.allFinite()) throw NumericsError("non-finite discriminator input");
    DPass d = discriminate(model, samples);
    if (!d.logits.allFinite()) throw NumericsError("non-finite discriminator logit");
    return d.prob.unaryExpr([](double p) { return clamp_probability(p); });
}

double discriminator_forward(const GanModel& model, const Eigen::VectorXd& sample) {
    return discriminator_batch(model, sample)(0);
}

Eigen::MatrixXd draw_noise(Index noise_dim, Index count, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd z(noise_dim, count);
    for (Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    return z;
}

LossGradient discriminator_objective(const GanModel& model, const Eigen::MatrixXd& real, const Eigen::MatrixXd& noise) {
    if (real.cols() == 0 || noise.cols() == 0) throw ConfigError("empty batch");
    const Eigen::MatrixXd fake = model.generator.forward(noise);
    LossGradient out;
    out.grad = model.discriminator.zero_gradient();
    auto half = [&](const Eigen::MatrixXd& x, bool is_real) {
        DPass d = discriminate(model, x);
        const double inv = 1.0 / static_cast<double>(x.cols());
        Eigen::MatrixXd dlogit(1, x.cols());
        for (Index i = 0; i < x.cols(); ++i) {
            const double s = d.prob(i);
            const double p = clamp_probability(s);
            out.loss -= (is_real ? std::log(p) : std::log(1.0 - p)) * inv;
            dlogit(0, i) = (is_real ? -(1.0 - s) : s) * inv;
        }
        model.discriminator.backward(d.tape, dlogit, out.grad);
    };
    half(real, true);
    half(fake, false);
    return out;
}

LossGradient generator_objective(const GanModel& model, const Eigen::MatrixXd& noise, GeneratorLoss kind) {
    if (noise.cols() == 0) throw ConfigError("empty batch");
    GPass p = generator_pass(model, noise, kind);
    return {kind == GeneratorLoss::Minimax ? p.minimax : p.nonsaturating, std::move(p.grad)};
}

double evaluate_loss_d(const GanModel& model, const Eigen::MatrixXd& real, const Eigen::MatrixXd& noise) {
    const Eigen::VectorXd pr = discriminator_batch(model, real);
    const Eigen::VectorXd pf = discriminator_batch(model, model.generator.forward(noise));
    return pr.array().log().mean() + (1.0 - pf.array()).log().mean();
}

double evaluate_loss_g(const GanModel& model, const Eigen::MatrixXd& noise) {
    const Eigen::VectorXd pf = discriminator_batch(model, model.generator.forward(noise));
    return (1.0 - pf.array()).log().mean();
}

LossRecord train_step(GanModel& model, const Eigen::MatrixXd& real_batch, std::mt19937_64& rng) {
    if (real_batch.cols() == 0) throw ConfigError("empty training batch");
    if (real_batch.rows() != model.arch.sample_dim())
        throw ShapeError("batch rows " + std::to_string(real_batch.rows()) + " != sample size " +
                         std::to_string(model.arch.sample_dim()));
    const Index b = real_batch.cols();
    LossRecord rec;

    const Eigen::MatrixXd z_d = draw_noise(model.arch.noise_dim(), b, rng);
    LossGradient d = discriminator_objective(model, real_batch, z_d);
    rec.loss_d = -d.loss;
    if (!std::isfinite(rec.loss_d) || !finite(d.grad))
        throw DivergenceError("discriminator loss is not finite at step " + std::to_string(model.history.size() + 1));
    adam_update(model.discriminator, model.discriminator_state, d.grad, model.optimizer);

    const Eigen::MatrixXd z_g = draw_noise(model.arch.noise_dim(), b, rng);
    GPass g = generator_pass(model, z_g, GeneratorLoss::NonSaturating);
    rec.loss_g = g.minimax;
    if (!std::isfinite(rec.loss_g) || !finite(g.grad))
        throw DivergenceError("generator loss is not finite at step " + std::to_string(model.history.size() + 1));
    adam_update(model.generator, model.generator_state, g.grad, model.optimizer);

    model.history.push_back(rec);
    return rec;
}

GanModel train(GanModel model, std::span<const Eigen::VectorXd> samples, const TrainOptions& options) {
    if (options.epochs == 0) return model;
    if (samples.empty()) throw ConfigError("no training samples");
    if (options.batch == 0) throw ConfigError("batch size must be >= 1");
    const Index dim = model.arch.sample_dim();
    for (const auto& s : samples)
        if (s.size() != dim) throw ShapeError("training sample of size " + std::to_string(s.size()) +
                                              ", expected " + std::to_string(dim));
    if (options.learning_rate) model.optimizer.learning_rate = *options.learning_rate;

    const double n = static_cast<double>(samples.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& s : samples) mean += s;
    mean /= n;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
    for (const auto& s : samples) var += (s - mean).cwiseAbs2();
    var /= n;
    model.input_mean = mean;
    model.input_scale = var.unaryExpr([](double v) { return v > 1e-16 ? 1.0 / std::sqrt(v) : 1.0; });
    if (options.match_output) match_output_layer(model.generator.layers.back(), mean, var.cwiseSqrt());

    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t steps = (samples.size() + options.batch - 1) / options.batch;
    const double chance = 2.0 * std::log(0.5);
    std::size_t calm = 0;
    Eigen::MatrixXd batch;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t s = 0; s < steps; ++s) {
            const std::size_t first = s * options.batch;
            const std::size_t count = std::min(options.batch, samples.size() - first);
            batch.resize(dim, static_cast<Index>(count));
            for (std::size_t i = 0; i < count; ++i) batch.col(static_cast<Index>(i)) = samples[order[first + i]];
            const LossRecord rec = train_step(model, batch, rng);
            if (options.early_stop_band > 0.0 && options.early_stop_window > 0) {
                calm = std::abs(rec.loss_d - chance) < options.early_stop_band ? calm + 1 : 0;
                if (calm >= options.early_stop_window) {
                    model.early_stopped_at = model.history.size();
                    return model;
                }
            }
        }
    }
    return model;
}

MagnitudeCodec MagnitudeCodec::fit(std::span<const FilterTensor> samples, double energy_share) {
    if (samples.empty()) throw ConfigError("no magnitude samples");
    if (!(energy_share > 0.0 && energy_share <= 1.0)) throw ConfigError("energy share must lie in (0, 1]");
    MagnitudeCodec c;
    c.factors = samples.front().factors;
    c.sites = samples.front().sites;
    c.half_bins = samples.front().bins;
    c.mean = FilterTensor(c.factors, c.sites, c.half_bins);
    std::vector<double> energy(static_cast<std::size_t>(c.half_bins), 0.0);
    for (const auto& s : samples) {
        if (s.factors != c.factors || s.sites != c.sites || s.bins != c.half_bins)
            throw ShapeError("magnitude samples differ in shape");
        for (Index k = 0; k < c.factors; ++k)
            for (Index n = 0; n < c.sites; ++n)
                for (Index m = 0; m < c.half_bins; ++m) {
                    const double v = s(k, n, m);
                    c.mean(k, n, m) += v;
                    energy[static_cast<std::size_t>(m)] += v * v;
                }
    }
    for (auto& v : c.mean.data) v /= static_cast<double>(samples.size());
    const double total = std::accumulate(energy.begin(), energy.end(), 0.0);
    c.trained_bins = c.half_bins;
    if (total > 0.0) {
        double cum = 0.0;
        for (Index m = 0; m < c.half_bins; ++m) {
            cum += energy[static_cast<std::size_t>(m)];
            if (cum >= energy_share * total * (1.0 - 1e-12)) {
                c.trained_bins = m + 1;
                break;
            }
        }
    }
    return c;
}

Eigen::VectorXd MagnitudeCodec::encode(const FilterTensor& half_magnitudes) const {
    if (half_magnitudes.factors != factors || half_magnitudes.sites != sites || half_magnitudes.bins != half_bins)
        throw ShapeError("magnitude tensor does not match the codec shape");
    Eigen::VectorXd v(sample_dim());
    Index i = 0;
    for (Index k = 0; k < factors; ++k)
        for (Index n = 0; n < sites; ++n)
            for (Index m = 0; m < trained_bins; ++m) v(i++) = half_magnitudes(k, n, m);
    return v;
}

FilterTensor MagnitudeCodec::decode(const Eigen::VectorXd& sample) const {
    if (sample.size() != sample_dim())
        throw ShapeError("sample of size " + std::to_string(sample.size()) + ", codec expects " +
                         std::to_string(sample_dim()));
    FilterTensor t = mean;
    Index i = 0;
    for (Index k = 0; k < factors; ++k)
        for (Index n = 0; n < sites; ++n)
            for (Index m = 0; m < trained_bins; ++m) t(k, n, m) = sample(i++);
    return t;
}

FilterBank synthesize_filter(const GanModel& model, const MagnitudeCodec& codec, const FilterBank& observed,
                             std::uint64_t noise_seed) {
    std::mt19937_64 rng(noise_seed);
    return GanSampler(model, codec).sample(observed, rng);
}

FilterBank GanSampler::sample(const FilterBank& observed, std::mt19937_64& rng) const {
    if (codec_.sample_dim() != model_.arch.sample_dim())
        throw ShapeError("codec and generator disagree on the sample size");
    if (observed.factors() != codec_.factors || observed.sites() != codec_.sites ||
        observed.half_bins() != codec_.half_bins)
        throw ShapeError("observed filter bank does not match the trained magnitude shape");
    const Eigen::MatrixXd z = draw_noise(model_.arch.noise_dim(), 1, rng);
    return apply_magnitudes(observed, codec_.decode(generator_forward(model_, z.col(0))));
}

void save_checkpoint(const std::string& path, const GanModel& model, const MagnitudeCodec* codec) {
    detail::BinaryWriter w(path);
    w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u64(model.seed);
    write_sizes(w, model.arch.generator);
    write_sizes(w, model.arch.discriminator);
    w.u32(static_cast<std::uint32_t>(model.arch.generator_hidden));
    w.u32(static_cast<std::uint32_t>(model.arch.generator_output));
    w.u32(static_cast<std::uint32_t>(model.arch.discriminator_hidden));
    w.f64(model.arch.leaky_slope);
    w.f64(model.optimizer.learning_rate);
    w.f64(model.optimizer.beta1);
    w.f64(model.optimizer.beta2);
    w.f64(model.optimizer.epsilon);
    write_mlp(w, model.generator, model.generator_state);
    write_mlp(w, model.discriminator, model.discriminator_state);
    write_dense(w, model.input_mean);
    write_dense(w, model.input_scale);
    w.u64(model.history.size());
    for (const auto& r : model.history) {
        w.f64(r.loss_d);
        w.f64(r.loss_g);
    }
    w.u64(model.early_stopped_at ? *model.early_stopped_at + 1 : 0);
    w.u32(codec ? 1 : 0);
    if (codec) {
        w.u64(static_cast<std::uint64_t>(codec->factors));
        w.u64(static_cast<std::uint64_t>(codec->sites));
        w.u64(static_cast<std::uint64_t>(codec->half_bins));
        w.u64(static_cast<std::uint64_t>(codec->trained_bins));
        for (double v : codec->mean.data) w.f64(v);
    }
    w.finish();
}

Checkpoint load_checkpoint(const std::string& path) {
    detail::BinaryReader r(path);
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (!std::equal(magic, magic + 8, kCheckpointMagic)) throw IoError("'" + path + "' is not a model checkpoint");
    if (r.u32() != kCheckpointVersion) throw IoError("unsupported checkpoint version in '" + path + "'");
    const std::uint64_t seed = r.u64();
    GanArchitecture arch;
    arch.generator = read_sizes(r);
    arch.discriminator = read_sizes(r);
    auto activation = [&] {
        const std::uint32_t a = r.u32();
        if (a > static_cast<std::uint32_t>(Activation::Sigmoid)) throw IoError("corrupt activation in '" + path + "'");
        return static_cast<Activation>(a);
    };
    arch.generator_hidden = activation();
    arch.generator_output = activation();
    arch.discriminator_hidden = activation();
    arch.leaky_slope = r.f64();
    OptimizerConfig opt;
    opt.learning_rate = r.f64();
    opt.beta1 = r.f64();
    opt.beta2 = r.f64();
    opt.epsilon = r.f64();

    Checkpoint ck;
    ck.model = init_model(arch, seed, opt);
    read_mlp(r, ck.model.generator, ck.model.generator_state);
    read_mlp(r, ck.model.discriminator, ck.model.discriminator_state);
    read_dense(r, ck.model.input_mean);
    read_dense(r, ck.model.input_scale);
    const std::uint64_t steps = r.u64();
    if (steps > (std::uint64_t{1} << 32)) throw IoError("corrupt loss history in '" + path + "'");
    ck.model.history.resize(steps);
    for (auto& rec : ck.model.history) {
        rec.loss_d = r.f64();
        rec.loss_g = r.f64();
    }
    if (const std::uint64_t stop = r.u64(); stop > 0) ck.model.early_stopped_at = stop - 1;
    if (r.u32() == 1) {
        MagnitudeCodec c;
        c.factors = static_cast<Index>(r.u64());
        c.sites = static_cast<Index>(r.u64());
        c.half_bins = static_cast<Index>(r.u64());
        c.trained_bins = static_cast<Index>(r.u64());
        if (c.factors < 1 || c.sites < 1 || c.half_bins < 1 || c.trained_bins < 1 || c.trained_bins > c.half_bins ||
            c.factors * c.sites * c.half_bins > (Index{1} << 28))
            throw IoError("corrupt magnitude codec in '" + path + "'");
        c.mean = FilterTensor(c.factors, c.sites, c.half_bins);
        for (double& v : c.mean.data) v = r.f64();
        if (c.sample_dim() != arch.sample_dim()) throw IoError("codec does not match the generator in '" + path + "'");
        ck.codec = std::move(c);
    }
    return ck;
}

void write_loss_history(const std::string& path, const GanModel& model) {
    auto out = detail::open_out(path);
    out << "step,loss_d,loss_g\n";
    for (std::size_t i = 0; i < model.history.size(); ++i)
        out << i + 1 << ',' << model.history[i].loss_d << ',' << model.history[i].loss_g << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace gdfmgan
