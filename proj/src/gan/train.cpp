#include "ghostrec/gan/train.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "ghostrec/common/error.hpp"

namespace ghostrec::gan {

using nn::BatchNormMode;
using nn::ParamGrad;
using nn::Tape;

void TrainConfig::validate() const {
    if (epochs < 0) throw UsageError("epochs must be non-negative");
    if (batch_size < 2) throw UsageError("batch_size must be at least 2 (batch normalization)");
    if (!(adam.lr > 0.0)) throw UsageError("learning rate must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
        throw UsageError("Adam betas must lie in [0, 1)");
    if (!(adam.epsilon > 0.0)) throw UsageError("Adam epsilon must be positive");
    if (checkpoint_every < 0) throw UsageError("checkpoint_every must be non-negative");
    if (threads < 1) throw UsageError("threads must be at least 1");
    if (!(d_average_decay >= 0.0 && d_average_decay < 1.0)) throw UsageError("d_average_decay must lie in [0, 1)");
}

bool operator==(const TrainConfig& a, const TrainConfig& b) {
    return a.epochs == b.epochs && a.batch_size == b.batch_size && a.adam.lr == b.adam.lr &&
           a.adam.beta1 == b.adam.beta1 && a.adam.beta2 == b.adam.beta2 && a.adam.epsilon == b.adam.epsilon &&
           a.seed == b.seed && a.precision == b.precision && a.checkpoint_every == b.checkpoint_every &&
           a.threads == b.threads && a.d_average_decay == b.d_average_decay;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"lr", c.adam.lr},
                       {"beta1", c.adam.beta1},
                       {"beta2", c.adam.beta2},
                       {"adam_epsilon", c.adam.epsilon},
                       {"seed", c.seed},
                       {"precision", c.precision == Precision::F32 ? "f32" : "f64"},
                       {"checkpoint_every", c.checkpoint_every},
                       {"threads", c.threads},
                       {"d_average_decay", c.d_average_decay}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    static const std::set<std::string> known = {"epochs", "batch_size", "lr",        "beta1",
                                                "beta2",  "adam_epsilon", "seed",    "precision",
                                                "checkpoint_every", "threads", "d_average_decay"};
    if (!j.is_object()) throw UsageError("train config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw UsageError("unknown train config key '" + key + "'");
    try {
        if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
        if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
        if (j.contains("lr")) j.at("lr").get_to(c.adam.lr);
        if (j.contains("beta1")) j.at("beta1").get_to(c.adam.beta1);
        if (j.contains("beta2")) j.at("beta2").get_to(c.adam.beta2);
        if (j.contains("adam_epsilon")) j.at("adam_epsilon").get_to(c.adam.epsilon);
        if (j.contains("seed")) j.at("seed").get_to(c.seed);
        if (j.contains("precision")) {
            const auto p = j.at("precision").get<std::string>();
            if (p == "f32")
                c.precision = Precision::F32;
            else if (p == "f64")
                c.precision = Precision::F64;
            else
                throw UsageError("precision must be f32 or f64");
        }
        if (j.contains("checkpoint_every")) j.at("checkpoint_every").get_to(c.checkpoint_every);
        if (j.contains("threads")) j.at("threads").get_to(c.threads);
        if (j.contains("d_average_decay")) j.at("d_average_decay").get_to(c.d_average_decay);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("bad train config: ") + e.what());
    }
}

template <class T>
GanState<T> init_state(const ModelConfig& model, const TrainConfig& train) {
    model.validate();
    train.validate();
    Rng rng(derive_seed(train.seed, 0));
    GanState<T> s;
    s.model = model;
    s.g = make_generator<T>(model, rng);
    s.d = make_discriminator<T>(model, rng);
    auto gp = s.g.params();
    auto dp = s.d.params();
    s.adam_g = nn::make_adam_state<T>(gp, train.adam);
    s.adam_d = nn::make_adam_state<T>(dp, train.adam);
    return s;
}

template <class T>
void update_d_average(GanState<T>& s, double decay) {
    auto params = s.d.params();
    if (s.d_average.empty()) {
        for (auto* p : params) s.d_average.push_back(p->value);
        return;
    }
    const double t = static_cast<double>(s.iterations);
    const T k = static_cast<T>(std::min(decay, (1.0 + t) / (10.0 + t)));
    for (std::size_t i = 0; i < params.size(); ++i)
        s.d_average[i] = k * s.d_average[i] + (T(1) - k) * params[i]->value;
}

template <class T>
TrainingData<T> to_training_data(const data::BucketDataset& ds) {
    if (!ds.normalized) throw ContractError("training needs a normalized dataset");
    ds.validate();
    TrainingData<T> out;
    const auto dim = static_cast<Eigen::Index>(ds.rows) * ds.cols;
    out.x.resize(static_cast<Eigen::Index>(ds.size()), dim);
    out.labels.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& v = ds.samples[i].array.values;
        for (Eigen::Index k = 0; k < dim; ++k) out.x(static_cast<Eigen::Index>(i), k) = static_cast<T>(v[static_cast<std::size_t>(k)]);
        out.labels.push_back(ds.samples[i].label);
    }
    return out;
}

template <class T>
void recalibrate_batchnorm(Discriminator<T>& d, const Matrix<T>& x) {
    if (x.rows() < 2) throw DegenerateError("batch-norm recalibration needs at least two samples");
    if (x.cols() != d.config.input_dim()) throw DimensionError("recalibration data does not match the model input");
    const auto lrelu = nn::Activation::leaky_relu(d.config.leaky_alpha);
    const T n = static_cast<T>(x.rows());
    Matrix<T> h = x;
    for (std::size_t i = 0; i < d.trunk.size(); ++i) {
        Matrix<T> pre = nn::dense_forward(h, d.trunk[i]);
        // Accumulate in double; the population can be large.
        const Eigen::RowVectorXd mean = pre.template cast<double>().colwise().mean();
        const Eigen::RowVectorXd var =
            (pre.template cast<double>().rowwise() - mean).array().square().colwise().sum() / (static_cast<double>(n) - 1.0);
        d.norms[i].running_mean = mean.cast<T>();
        d.norms[i].running_var = var.cast<T>();
        h = nn::activation(nn::batchnorm_infer(pre, d.norms[i]), lrelu);
    }
}

template <class T>
GeneratorPass<T>::GeneratorPass(Generator<T>& g, const Matrix<T>& z, std::vector<int> labels)
    : labels_(std::move(labels)) {
    out_ = generator_on_tape(tape_, g, z, labels_, ParamGrad::Accumulate);
}

template <class U>
struct StepAccess {
    static nn::Tape<U>& tape(GeneratorPass<U>& p) { return p.tape_; }
    static typename nn::Tape<U>::Var out(GeneratorPass<U>& p) { return p.out_; }
};

namespace {

template <class T>
void zero_grads(std::vector<nn::Param<T>*>& ps) {
    for (auto* p : ps) p->zero_grad();
}

template <class T>
double mean_of(const Matrix<T>& m) {
    return static_cast<double>(m.sum()) / static_cast<double>(m.size());
}

}  // namespace

template <class T>
StepResult discriminator_step(GanState<T>& s, const Matrix<T>& x, std::span<const int> labels, bool real) {
    auto params = s.d.params();
    zero_grads(params);
    Tape<T> tape;
    auto in = tape.constant(x);
    auto out = discriminator_on_tape(tape, in, s.d, BatchNormMode::Train, ParamGrad::Accumulate, real);
    auto loss = discriminator_step_loss_on_tape(tape, out, labels, real);
    tape.backward(loss.total);
    nn::adam_step<T>(params, s.adam_d);
    return {breakdown(tape, loss), mean_of(tape.value(out.realness))};
}

template <class T>
StepResult generator_step(GanState<T>& s, GeneratorPass<T>& pass) {
    auto params = s.g.params();
    zero_grads(params);
    auto& tape = StepAccess<T>::tape(pass);
    auto out = discriminator_on_tape(tape, StepAccess<T>::out(pass), s.d, BatchNormMode::Train, ParamGrad::Skip, false);
    auto loss = generator_loss_on_tape(tape, out, pass.labels(), s.model.objective);
    tape.backward(loss.total);
    nn::adam_step<T>(params, s.adam_g);
    return {breakdown(tape, loss), mean_of(tape.value(out.realness))};
}

namespace {

// Batch boundaries over n shuffled samples.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t b) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t start = 0; start < n; start += b) out.emplace_back(start, std::min(n, start + b));
    if (out.size() > 1 && out.back().second - out.back().first == 1) {
        out.pop_back();
        out.back().second = n;
    }
    return out;
}

void accumulate(LossBreakdown& acc, const LossBreakdown& x, double w) {
    acc.l_s += w * x.l_s;
    acc.l_c += w * x.l_c;
    acc.total += w * x.total;
}

}  // namespace

template <class T>
EpochLosses train_epoch(GanState<T>& s, const TrainingData<T>& data, const TrainConfig& config,
                        const FakeSampler<T>& sampler) {
    const auto n = static_cast<std::size_t>(data.x.rows());
    if (n == 0) throw DegenerateError("cannot train on an empty dataset");
    if (n < 2) throw DegenerateError("training needs at least two samples");
    if (data.labels.size() != n) throw DimensionError("training data and labels differ in length");
    if (data.x.cols() != s.model.input_dim()) throw DimensionError("training arrays do not match the model input");

    const int epoch = s.epoch + 1;
    Rng rng(derive_seed(config.seed, 1, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    EpochLosses rec;
    rec.epoch = epoch;
    const auto ranges = batch_ranges(n, static_cast<std::size_t>(config.batch_size));
    const double w = 1.0 / static_cast<double>(ranges.size());
    const int dim = s.model.input_dim();

    for (const auto& [lo, hi] : ranges) {
        const auto b = static_cast<Eigen::Index>(hi - lo);
        Matrix<T> x(b, dim);
        std::vector<int> labels(static_cast<std::size_t>(b));
        for (Eigen::Index r = 0; r < b; ++r) {
            const std::size_t idx = order[lo + static_cast<std::size_t>(r)];
            x.row(r) = data.x.row(static_cast<Eigen::Index>(idx));
            labels[static_cast<std::size_t>(r)] = data.labels[idx];
        }
        auto real = discriminator_step(s, x, labels, true);

        std::vector<int> fake_labels(static_cast<std::size_t>(b));
        for (int& l : fake_labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.model.num_classes)));
        Matrix<T> z(b, s.model.noise_dim);
        for (Eigen::Index k = 0; k < z.size(); ++k) z.data()[k] = static_cast<T>(rng.normal());

        StepResult fake, gen;
        if (sampler) {
            Matrix<T> fakes = sampler(rng, fake_labels);
            fake = discriminator_step(s, fakes, fake_labels, false);
        } else {
            GeneratorPass<T> pass(s.g, z, fake_labels);
            fake = discriminator_step(s, pass.fakes(), fake_labels, false);
            gen = generator_step(s, pass);
        }

        LossBreakdown d;
        accumulate(d, real.loss, 0.5);
        accumulate(d, fake.loss, 0.5);
        accumulate(rec.d, d, w);
        accumulate(rec.g, gen.loss, w);
        rec.real_realness += w * real.mean_realness;
        rec.fake_realness += w * fake.mean_realness;
        if (config.d_average_decay > 0.0) update_d_average(s, config.d_average_decay);
        ++s.iterations;
    }
    rec.iterations = s.iterations;
    s.epoch = epoch;
    s.history.push_back(rec);
    return rec;
}

#define GHOSTREC_GAN_TRAIN(T)                                                                                 \
    template GanState<T> init_state(const ModelConfig&, const TrainConfig&);                                  \
    template TrainingData<T> to_training_data(const data::BucketDataset&);                                    \
    template void update_d_average(GanState<T>&, double);                                                     \
    template void recalibrate_batchnorm(Discriminator<T>&, const Matrix<T>&);                               \
    template class GeneratorPass<T>;                                                                          \
    template StepResult discriminator_step(GanState<T>&, const Matrix<T>&, std::span<const int>, bool);       \
    template StepResult generator_step(GanState<T>&, GeneratorPass<T>&);                                      \
    template EpochLosses train_epoch(GanState<T>&, const TrainingData<T>&, const TrainConfig&, const FakeSampler<T>&);

GHOSTREC_GAN_TRAIN(float)
GHOSTREC_GAN_TRAIN(double)

}  // namespace ghostrec::gan
