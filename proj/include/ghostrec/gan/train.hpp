#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "ghostrec/data/dataset.hpp"
#include "ghostrec/gan/loss.hpp"
#include "ghostrec/gan/model.hpp"
#include "ghostrec/nn/adam.hpp"

namespace ghostrec::gan {

enum class Precision { F32, F64 };

struct TrainConfig {
    int epochs = 300;
    int batch_size = 64;
    nn::AdamHyper adam;
    std::uint64_t seed = 1;
    Precision precision = Precision::F32;
    int checkpoint_every = 0;  // 0: only the final checkpoint
    int threads = 1;
    // Exponential moving average of D's trainable parameters, kept after
    // every iteration with decay min(d, (1 + t) / (10 + t)) at iteration t.
    // Checkpoints carry the averaged D; 0 disables averaging.
    double d_average_decay = 0.999;

    // Throws UsageError: batch_size >= 2, epochs >= 0, positive rates.
    void validate() const;
    friend bool operator==(const TrainConfig& a, const TrainConfig& b);
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochLosses {
    int epoch = 0;  // 1-based
    LossBreakdown d;
    LossBreakdown g;
    std::uint64_t iterations = 0;  // cumulative batches
    double real_realness = 0.0;    // mean D output on real batches, before each update
    double fake_realness = 0.0;

    friend bool operator==(const EpochLosses&, const EpochLosses&) = default;
};

template <class T>
struct GanState {
    ModelConfig model;
    Generator<T> g;
    Discriminator<T> d;
    nn::AdamState<T> adam_g;
    nn::AdamState<T> adam_d;
    int epoch = 0;
    std::uint64_t iterations = 0;
    std::vector<EpochLosses> history;
    // Averaged D parameters in Discriminator::params() order; empty when
    // averaging is off.
    std::vector<Matrix<T>> d_average;
};

// Parameters drawn from derive_seed(train.seed, 0).
template <class T>
GanState<T> init_state(const ModelConfig& model, const TrainConfig& train);

// Folds the current D parameters into s.d_average.
template <class T>
void update_d_average(GanState<T>& s, double decay);

// Samples as rows plus labels.
template <class T>
struct TrainingData {
    Matrix<T> x;
    std::vector<int> labels;
};

// The dataset must be normalized. Throws ContractError otherwise.
template <class T>
TrainingData<T> to_training_data(const data::BucketDataset& ds);

// Replaces each batch-norm layer's running statistics with the population
// mean and unbiased variance of its input over x, processed in order
// through the trunk.
template <class T>
void recalibrate_batchnorm(Discriminator<T>& d, const Matrix<T>& x);

// A recorded generator forward pass. fakes() feeds the discriminator update;
// generator_step() then continues the same recording through D.
template <class T>
class GeneratorPass {
public:
    GeneratorPass(Generator<T>& g, const Matrix<T>& z, std::vector<int> labels);
    const Matrix<T>& fakes() const { return tape_.value(out_); }
    std::span<const int> labels() const { return labels_; }

private:
    template <class U>
    friend struct StepAccess;
    nn::Tape<T> tape_;
    typename nn::Tape<T>::Var out_;
    std::vector<int> labels_;
};

struct StepResult {
    LossBreakdown loss;
    double mean_realness = 0.0;
};

// One Adam update of D on a single-source batch. Batch-norm running
// statistics are updated on real batches only.
template <class T>
StepResult discriminator_step(GanState<T>& s, const Matrix<T>& x, std::span<const int> labels, bool real);

// One Adam update of G through a frozen D.
template <class T>
StepResult generator_step(GanState<T>& s, GeneratorPass<T>& pass);

// Replaces the generator's output when set (the generator is then not
// updated). Used to probe D against a sampler of real data.
template <class T>
using FakeSampler = std::function<Matrix<T>(Rng& rng, std::span<const int> labels)>;

// One pass over the data in shuffled batches of batch_size; a trailing
// batch of one sample is merged into the previous batch. Per batch: D on
// reals, D on fakes, G through D. Throws DegenerateError on empty data.
template <class T>
EpochLosses train_epoch(GanState<T>& s, const TrainingData<T>& data, const TrainConfig& config,
                        const FakeSampler<T>& sampler = {});

}  // namespace ghostrec::gan
