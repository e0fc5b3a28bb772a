#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ghostrec/common/hash.hpp"
#include "ghostrec/data/dataset.hpp"
#include "ghostrec/gan/checkpoint.hpp"

namespace ghostrec::eval {

struct Recognition {
    int label = 0;
    double confidence = 0.0;
    std::vector<double> class_probs;
};

// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> v);

// Throws ContractError unless the checkpoint was trained under `fingerprint`.
void require_fingerprint(const gan::Checkpoint& ckpt, const Digest& fingerprint);

// Raw (unnormalized) bucket values are mapped with the checkpoint's stats
// and classified by D in inference mode.
Recognition classify(const sim::BucketArray& raw, const Digest& fingerprint, const gan::Checkpoint& ckpt);

// Rows of already normalized inputs, one recognition per row.
std::vector<Recognition> classify_rows(const nn::Matrix<float>& x, const gan::Checkpoint& ckpt);

// Brings a dataset into the checkpoint's input space: raw data is normalized
// with the checkpoint's stats, normalized data must carry the same stats.
// Throws ContractError on fingerprint or stats mismatch and DimensionError on
// shape or class-count mismatch.
data::BucketDataset prepare_for(const data::BucketDataset& ds, const gan::Checkpoint& ckpt);

struct EvalOptions {
    // Samples are classified one at a time so each classification can be
    // timed; threads > 1 splits the samples across workers.
    int threads = 1;
};

struct AccuracyReport {
    int num_classes = 0;
    std::vector<int> per_class_total;
    std::vector<int> per_class_correct;
    // confusion[true][predicted]
    std::vector<std::vector<int>> confusion;
    int total = 0;
    int correct = 0;
    double overall = 0.0;
    double mean_latency_ms = 0.0;
    double wall_seconds = 0.0;
    std::string config_hash;  // SHA-256 of the checkpoint's model and train configs
    std::uint64_t seed = 0;   // training seed of the checkpoint

    double class_accuracy(int c) const;
    // Mean of the per-class accuracies over non-empty classes.
    double mean_class_accuracy() const;
};

// Throws DegenerateError on an empty test set.
AccuracyReport evaluate(const data::BucketDataset& test, const gan::Checkpoint& ckpt, const EvalOptions& options = {});

std::string config_hash(const gan::Checkpoint& ckpt);

// Pearson correlation between per-class mean arrays. The result is exactly
// symmetric with an exact unit diagonal. Throws DegenerateError when a class
// is empty or its mean array is constant.
Eigen::MatrixXd class_mean_correlation_table(const data::BucketDataset& ds);

struct OffDiagonalRange {
    double min = 0.0;
    double max = 0.0;
};
OffDiagonalRange off_diagonal_range(const Eigen::MatrixXd& table);

}  // namespace ghostrec::eval
