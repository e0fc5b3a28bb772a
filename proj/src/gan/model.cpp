#include "ghostrec/gan/model.hpp"

#include <set>

#include "ghostrec/common/error.hpp"

namespace ghostrec::gan {

using nn::Activation;
using nn::BatchNormMode;
using nn::ParamGrad;
using nn::Tape;

std::string to_string(Objective o) { return o == Objective::AcGan ? "acgan" : "contrast"; }

Objective parse_objective(const std::string& text) {
    if (text == "acgan") return Objective::AcGan;
    if (text == "contrast") return Objective::Contrast;
    throw UsageError("unknown generator objective '" + text + "' (use acgan or contrast)");
}

void ModelConfig::validate() const {
    if (num_classes < 2) throw UsageError("a model needs at least two classes");
    if (rows < 1 || cols < 1) throw UsageError("array dimensions must be positive");
    if (noise_dim < 1) throw UsageError("noise_dim must be positive");
    if (generator_hidden.empty() || discriminator_hidden.empty()) throw UsageError("hidden layer lists must not be empty");
    for (int w : generator_hidden)
        if (w < 1) throw UsageError("generator widths must be positive");
    for (int w : discriminator_hidden)
        if (w < 1) throw UsageError("discriminator widths must be positive");
    if (!(leaky_alpha >= 0.0 && leaky_alpha < 1.0)) throw UsageError("leaky_alpha must lie in [0, 1)");
    if (!(init_std > 0.0)) throw UsageError("init_std must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"num_classes", c.num_classes},
                       {"rows", c.rows},
                       {"cols", c.cols},
                       {"noise_dim", c.noise_dim},
                       {"generator_hidden", c.generator_hidden},
                       {"discriminator_hidden", c.discriminator_hidden},
                       {"leaky_alpha", c.leaky_alpha},
                       {"init_std", c.init_std},
                       {"objective", to_string(c.objective)}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    static const std::set<std::string> known = {"num_classes", "rows",     "cols",      "noise_dim", "generator_hidden",
                                                "discriminator_hidden", "leaky_alpha", "init_std", "objective"};
    if (!j.is_object()) throw UsageError("model config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw UsageError("unknown model config key '" + key + "'");
    try {
        if (j.contains("num_classes")) j.at("num_classes").get_to(c.num_classes);
        if (j.contains("rows")) j.at("rows").get_to(c.rows);
        if (j.contains("cols")) j.at("cols").get_to(c.cols);
        if (j.contains("noise_dim")) j.at("noise_dim").get_to(c.noise_dim);
        if (j.contains("generator_hidden")) j.at("generator_hidden").get_to(c.generator_hidden);
        if (j.contains("discriminator_hidden")) j.at("discriminator_hidden").get_to(c.discriminator_hidden);
        if (j.contains("leaky_alpha")) j.at("leaky_alpha").get_to(c.leaky_alpha);
        if (j.contains("init_std")) j.at("init_std").get_to(c.init_std);
        if (j.contains("objective")) c.objective = parse_objective(j.at("objective").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("bad model config: ") + e.what());
    }
}

template <class T>
std::vector<nn::Param<T>*> Generator<T>::params() {
    std::vector<nn::Param<T>*> out;
    for (auto& l : layers) nn::collect(l, out);
    return out;
}

template <class T>
std::vector<nn::Param<T>*> Discriminator<T>::params() {
    std::vector<nn::Param<T>*> out;
    for (std::size_t i = 0; i < trunk.size(); ++i) {
        nn::collect(trunk[i], out);
        nn::collect(norms[i], out);
    }
    nn::collect(head_s, out);
    nn::collect(head_c, out);
    return out;
}

template <class T>
Generator<T> make_generator(const ModelConfig& config, Rng& rng) {
    config.validate();
    Generator<T> g;
    g.config = config;
    Eigen::Index in = config.num_classes + config.noise_dim;
    for (int w : config.generator_hidden) {
        g.layers.push_back(nn::make_dense<T>(in, w, rng, config.init_std));
        in = w;
    }
    g.layers.push_back(nn::make_dense<T>(in, config.input_dim(), rng, config.init_std));
    return g;
}

template <class T>
Discriminator<T> make_discriminator(const ModelConfig& config, Rng& rng) {
    config.validate();
    Discriminator<T> d;
    d.config = config;
    Eigen::Index in = config.input_dim();
    for (int w : config.discriminator_hidden) {
        d.trunk.push_back(nn::make_dense<T>(in, w, rng, config.init_std));
        d.norms.push_back(nn::make_batchnorm<T>(w));
        in = w;
    }
    d.head_s = nn::make_dense<T>(in, 1, rng, config.init_std);
    d.head_c = nn::make_dense<T>(in, config.num_classes, rng, config.init_std);
    return d;
}

template <class T>
Matrix<T> generator_input(const ModelConfig& config, const Matrix<T>& z, std::span<const int> labels) {
    if (z.cols() != config.noise_dim)
        throw DimensionError("noise has " + std::to_string(z.cols()) + " columns, model expects " +
                             std::to_string(config.noise_dim));
    if (static_cast<std::size_t>(z.rows()) != labels.size())
        throw DimensionError("noise batch and label count differ");
    Matrix<T> in = Matrix<T>::Zero(z.rows(), config.num_classes + config.noise_dim);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= config.num_classes)
            throw LabelError("generator label " + std::to_string(labels[i]) + " outside [0, " +
                             std::to_string(config.num_classes) + ")");
        in(static_cast<Eigen::Index>(i), labels[i]) = T(1);
    }
    in.rightCols(config.noise_dim) = z;
    return in;
}

template <class T>
Matrix<T> generator_forward(const Generator<T>& g, const Matrix<T>& z, std::span<const int> labels) {
    Matrix<T> h = generator_input(g.config, z, labels);
    const auto lrelu = Activation::leaky_relu(g.config.leaky_alpha);
    for (std::size_t i = 0; i + 1 < g.layers.size(); ++i) h = nn::activation(nn::dense_forward(h, g.layers[i]), lrelu);
    return nn::activation(nn::dense_forward(h, g.layers.back()), Activation::tanh());
}

namespace {

template <class T>
void check_input(const ModelConfig& c, const Matrix<T>& x) {
    if (x.cols() != c.input_dim())
        throw DimensionError("discriminator input has " + std::to_string(x.cols()) + " columns, expected " +
                             std::to_string(c.input_dim()));
    if (x.rows() < 1) throw DimensionError("discriminator input batch is empty");
}

template <class T>
DiscriminatorOutput<T> heads(const Discriminator<T>& d, const Matrix<T>& h) {
    return {nn::activation(nn::dense_forward(h, d.head_s), Activation::sigmoid()),
            nn::softmax(nn::dense_forward(h, d.head_c))};
}

}  // namespace

template <class T>
DiscriminatorOutput<T> discriminator_infer(const Discriminator<T>& d, const Matrix<T>& x) {
    check_input(d.config, x);
    const auto lrelu = Activation::leaky_relu(d.config.leaky_alpha);
    Matrix<T> h = x;
    for (std::size_t i = 0; i < d.trunk.size(); ++i)
        h = nn::activation(nn::batchnorm_infer(nn::dense_forward(h, d.trunk[i]), d.norms[i]), lrelu);
    return heads(d, h);
}

template <class T>
DiscriminatorOutput<T> discriminator_forward(Discriminator<T>& d, const Matrix<T>& x, BatchNormMode mode,
                                             bool update_running) {
    if (mode == BatchNormMode::Infer) return discriminator_infer(d, x);
    check_input(d.config, x);
    const auto lrelu = Activation::leaky_relu(d.config.leaky_alpha);
    Matrix<T> h = x;
    for (std::size_t i = 0; i < d.trunk.size(); ++i)
        h = nn::activation(nn::batchnorm_forward(nn::dense_forward(h, d.trunk[i]), d.norms[i], mode, update_running),
                           lrelu);
    return heads(d, h);
}

template <class T>
typename Tape<T>::Var generator_on_tape(Tape<T>& tape, Generator<T>& g, const Matrix<T>& z,
                                        std::span<const int> labels, ParamGrad track) {
    auto h = tape.constant(generator_input(g.config, z, labels));
    const auto lrelu = Activation::leaky_relu(g.config.leaky_alpha);
    for (std::size_t i = 0; i + 1 < g.layers.size(); ++i) h = tape.activation(tape.dense(h, g.layers[i], track), lrelu);
    return tape.activation(tape.dense(h, g.layers.back(), track), Activation::tanh());
}

template <class T>
DiscriminatorVars<T> discriminator_on_tape(Tape<T>& tape, typename Tape<T>::Var x, Discriminator<T>& d,
                                           BatchNormMode mode, ParamGrad track, bool update_running) {
    check_input(d.config, tape.value(x));
    const auto lrelu = Activation::leaky_relu(d.config.leaky_alpha);
    auto h = x;
    for (std::size_t i = 0; i < d.trunk.size(); ++i)
        h = tape.activation(tape.batchnorm(tape.dense(h, d.trunk[i], track), d.norms[i], mode, track, update_running),
                            lrelu);
    return {tape.activation(tape.dense(h, d.head_s, track), Activation::sigmoid()),
            tape.softmax(tape.dense(h, d.head_c, track))};
}

namespace {

template <class To, class From>
nn::Param<To> cast_param(const nn::Param<From>& p) {
    return nn::Param<To>(p.value.template cast<To>());
}

template <class To, class From>
nn::DenseParams<To> cast_dense(const nn::DenseParams<From>& p) {
    return {cast_param<To>(p.weight), cast_param<To>(p.bias)};
}

}  // namespace

template <class To, class From>
Generator<To> cast_generator(const Generator<From>& g) {
    Generator<To> out;
    out.config = g.config;
    for (const auto& l : g.layers) out.layers.push_back(cast_dense<To>(l));
    return out;
}

template <class To, class From>
Discriminator<To> cast_discriminator(const Discriminator<From>& d) {
    Discriminator<To> out;
    out.config = d.config;
    for (const auto& l : d.trunk) out.trunk.push_back(cast_dense<To>(l));
    for (const auto& n : d.norms) {
        nn::BatchNormParams<To> b;
        b.gamma = cast_param<To>(n.gamma);
        b.beta = cast_param<To>(n.beta);
        b.running_mean = n.running_mean.template cast<To>();
        b.running_var = n.running_var.template cast<To>();
        b.momentum = static_cast<To>(n.momentum);
        b.epsilon = static_cast<To>(n.epsilon);
        out.norms.push_back(std::move(b));
    }
    out.head_s = cast_dense<To>(d.head_s);
    out.head_c = cast_dense<To>(d.head_c);
    return out;
}

#define GHOSTREC_GAN_MODEL(T)                                                                                       \
    template struct Generator<T>;                                                                                   \
    template struct Discriminator<T>;                                                                               \
    template Generator<T> make_generator(const ModelConfig&, Rng&);                                                 \
    template Discriminator<T> make_discriminator(const ModelConfig&, Rng&);                                         \
    template Matrix<T> generator_input(const ModelConfig&, const Matrix<T>&, std::span<const int>);                 \
    template Matrix<T> generator_forward(const Generator<T>&, const Matrix<T>&, std::span<const int>);              \
    template DiscriminatorOutput<T> discriminator_infer(const Discriminator<T>&, const Matrix<T>&);                 \
    template DiscriminatorOutput<T> discriminator_forward(Discriminator<T>&, const Matrix<T>&, BatchNormMode, bool); \
    template Tape<T>::Var generator_on_tape(Tape<T>&, Generator<T>&, const Matrix<T>&, std::span<const int>,        \
                                           ParamGrad);                                                              \
    template DiscriminatorVars<T> discriminator_on_tape(Tape<T>&, Tape<T>::Var, Discriminator<T>&, BatchNormMode,   \
                                                        ParamGrad, bool);

GHOSTREC_GAN_MODEL(float)
GHOSTREC_GAN_MODEL(double)
GHOSTREC_GAN_MODEL(long double)

template Generator<float> cast_generator(const Generator<double>&);
template Generator<double> cast_generator(const Generator<float>&);
template Generator<float> cast_generator(const Generator<float>&);
template Discriminator<float> cast_discriminator(const Discriminator<double>&);
template Discriminator<double> cast_discriminator(const Discriminator<float>&);
template Discriminator<float> cast_discriminator(const Discriminator<float>&);
template Generator<long double> cast_generator(const Generator<double>&);
template Discriminator<long double> cast_discriminator(const Discriminator<double>&);

}  // namespace ghostrec::gan
