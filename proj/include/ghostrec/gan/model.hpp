#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghostrec/common/rng.hpp"
#include "ghostrec/nn/layers.hpp"
#include "ghostrec/nn/ops.hpp"
#include "ghostrec/nn/tape.hpp"

namespace ghostrec::gan {

using nn::Matrix;

// Generator objective. AcGan: fakes should look real and be classified as
// their conditioning label. Contrast: the opposite sign convention, G
// minimizes bce(fake -> 0) - cce(fake).
enum class Objective { AcGan, Contrast };

std::string to_string(Objective o);
Objective parse_objective(const std::string& text);  // "acgan" | "contrast"; UsageError otherwise

struct ModelConfig {
    int num_classes = 10;
    int rows = 28;
    int cols = 28;
    int noise_dim = 100;
    std::vector<int> generator_hidden{256, 512, 1024, 1024};
    std::vector<int> discriminator_hidden{512, 512, 512};
    double leaky_alpha = 0.2;
    double init_std = 0.02;
    Objective objective = Objective::AcGan;

    int input_dim() const { return rows * cols; }
    // Throws UsageError on non-positive sizes or empty hidden stacks.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
// Rejects unknown keys; missing keys keep their defaults.
void from_json(const nlohmann::json& j, ModelConfig& c);

// one-hot(label) ++ z -> [dense, leaky relu] x hidden -> dense -> tanh
template <class T>
struct Generator {
    ModelConfig config;
    std::vector<nn::DenseParams<T>> layers;  // hidden layers, then the output layer

    std::vector<nn::Param<T>*> params();
};

// x -> [dense, batch norm, leaky relu] x hidden, then two heads on the shared
// trunk: head_s (1 unit, sigmoid) and head_c (num_classes units, softmax).
template <class T>
struct Discriminator {
    ModelConfig config;
    std::vector<nn::DenseParams<T>> trunk;
    std::vector<nn::BatchNormParams<T>> norms;
    nn::DenseParams<T> head_s;
    nn::DenseParams<T> head_c;

    std::vector<nn::Param<T>*> params();
};

template <class T>
Generator<T> make_generator(const ModelConfig& config, Rng& rng);
template <class T>
Discriminator<T> make_discriminator(const ModelConfig& config, Rng& rng);

template <class T>
struct DiscriminatorOutput {
    Matrix<T> realness;     // b x 1, in (0, 1)
    Matrix<T> class_probs;  // b x num_classes, rows sum to 1
};

// [one-hot(labels) | z]. Throws LabelError / DimensionError.
template <class T>
Matrix<T> generator_input(const ModelConfig& config, const Matrix<T>& z, std::span<const int> labels);

// b x (rows*cols) arrays in (-1, 1).
template <class T>
Matrix<T> generator_forward(const Generator<T>& g, const Matrix<T>& z, std::span<const int> labels);

// Infer mode reads the running statistics and leaves the model untouched.
template <class T>
DiscriminatorOutput<T> discriminator_infer(const Discriminator<T>& d, const Matrix<T>& x);

// Train mode uses batch statistics; update_running folds them into the
// running estimates.
template <class T>
DiscriminatorOutput<T> discriminator_forward(Discriminator<T>& d, const Matrix<T>& x, nn::BatchNormMode mode,
                                             bool update_running = false);

// Recording variants used for training and gradient checks.
template <class T>
typename nn::Tape<T>::Var generator_on_tape(nn::Tape<T>& tape, Generator<T>& g, const Matrix<T>& z,
                                            std::span<const int> labels,
                                            nn::ParamGrad track = nn::ParamGrad::Accumulate);

template <class T>
struct DiscriminatorVars {
    typename nn::Tape<T>::Var realness;
    typename nn::Tape<T>::Var class_probs;
};

template <class T>
DiscriminatorVars<T> discriminator_on_tape(nn::Tape<T>& tape, typename nn::Tape<T>::Var x, Discriminator<T>& d,
                                           nn::BatchNormMode mode, nn::ParamGrad track, bool update_running);

// Converts parameters between precisions; running statistics included.
template <class To, class From>
Generator<To> cast_generator(const Generator<From>& g);
template <class To, class From>
Discriminator<To> cast_discriminator(const Discriminator<From>& d);

}  // namespace ghostrec::gan
