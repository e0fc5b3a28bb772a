#include "ghostrec/eval/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "ghostrec/common/error.hpp"
#include "ghostrec/sim/stats.hpp"

namespace ghostrec::eval {

using Clock = std::chrono::steady_clock;

int argmax(std::span<const double> v) {
    if (v.empty()) throw DimensionError("argmax of an empty distribution");
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

void require_fingerprint(const gan::Checkpoint& ckpt, const Digest& fingerprint) {
    if (fingerprint != ckpt.fingerprint)
        throw ContractError("speckle fingerprint mismatch: data was measured under " + to_hex(fingerprint) +
                            " but the checkpoint was trained under " + to_hex(ckpt.fingerprint) +
                            "; recognition is only defined for the training speckle sequence");
}

namespace {

Recognition from_probs(const nn::Matrix<float>& probs, Eigen::Index row) {
    Recognition r;
    r.class_probs.resize(static_cast<std::size_t>(probs.cols()));
    for (Eigen::Index k = 0; k < probs.cols(); ++k) r.class_probs[static_cast<std::size_t>(k)] = probs(row, k);
    r.label = argmax(r.class_probs);
    r.confidence = r.class_probs[static_cast<std::size_t>(r.label)];
    return r;
}

const data::NormStats& stats_of(const gan::Checkpoint& ckpt) {
    if (!ckpt.norm_stats) throw ContractError("checkpoint carries no normalization stats");
    return *ckpt.norm_stats;
}

}  // namespace

Recognition classify(const sim::BucketArray& raw, const Digest& fingerprint, const gan::Checkpoint& ckpt) {
    require_fingerprint(ckpt, fingerprint);
    if (raw.rows != ckpt.model.rows || raw.cols != ckpt.model.cols)
        throw DimensionError("classify: array is " + std::to_string(raw.rows) + "x" + std::to_string(raw.cols) +
                             ", checkpoint expects " + std::to_string(ckpt.model.rows) + "x" +
                             std::to_string(ckpt.model.cols));
    const auto& stats = stats_of(ckpt);
    nn::Matrix<float> x(1, static_cast<Eigen::Index>(raw.values.size()));
    for (std::size_t i = 0; i < raw.values.size(); ++i)
        x(0, static_cast<Eigen::Index>(i)) = static_cast<float>(stats.apply(raw.values[i]));
    return from_probs(gan::discriminator_infer(ckpt.d, x).class_probs, 0);
}

std::vector<Recognition> classify_rows(const nn::Matrix<float>& x, const gan::Checkpoint& ckpt) {
    const auto probs = gan::discriminator_infer(ckpt.d, x).class_probs;
    std::vector<Recognition> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(from_probs(probs, i));
    return out;
}

data::BucketDataset prepare_for(const data::BucketDataset& ds, const gan::Checkpoint& ckpt) {
    require_fingerprint(ckpt, ds.speckle_fingerprint);
    if (ds.rows != ckpt.model.rows || ds.cols != ckpt.model.cols)
        throw DimensionError("dataset arrays are " + std::to_string(ds.rows) + "x" + std::to_string(ds.cols) +
                             ", checkpoint expects " + std::to_string(ckpt.model.rows) + "x" +
                             std::to_string(ckpt.model.cols));
    if (ds.num_classes != ckpt.model.num_classes)
        throw DimensionError("dataset has " + std::to_string(ds.num_classes) + " classes, checkpoint " +
                             std::to_string(ckpt.model.num_classes));
    const auto& stats = stats_of(ckpt);
    if (!ds.normalized) return data::apply_normalization(ds, stats);
    if (ds.norm_stats != stats)
        throw ContractError("dataset was normalized with different stats than the checkpoint");
    return ds;
}

double AccuracyReport::class_accuracy(int c) const {
    const int n = per_class_total.at(static_cast<std::size_t>(c));
    return n == 0 ? 0.0 : static_cast<double>(per_class_correct[static_cast<std::size_t>(c)]) / n;
}

double AccuracyReport::mean_class_accuracy() const {
    double sum = 0.0;
    int used = 0;
    for (int c = 0; c < num_classes; ++c)
        if (per_class_total[static_cast<std::size_t>(c)] > 0) {
            sum += class_accuracy(c);
            ++used;
        }
    return used == 0 ? 0.0 : sum / used;
}

std::string config_hash(const gan::Checkpoint& ckpt) {
    const nlohmann::json j{{"model", ckpt.model}, {"train", ckpt.train}};
    return to_hex(sha256(std::string_view(j.dump())));
}

AccuracyReport evaluate(const data::BucketDataset& test, const gan::Checkpoint& ckpt, const EvalOptions& options) {
    if (test.empty()) throw DegenerateError("evaluate: empty test set");
    if (options.threads < 1) throw UsageError("evaluate: threads must be >= 1");
    const auto start = Clock::now();
    const auto prepared = prepare_for(test, ckpt);
    const auto data = gan::to_training_data<float>(prepared);
    const auto n = static_cast<std::size_t>(data.x.rows());

    std::vector<int> predicted(n);
    std::vector<double> seconds(n);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto t0 = Clock::now();
            const nn::Matrix<float> row = data.x.row(static_cast<Eigen::Index>(i));
            predicted[i] = classify_rows(row, ckpt).front().label;
            seconds[i] = std::chrono::duration<double>(Clock::now() - t0).count();
        }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(options.threads), n);
    if (workers <= 1) {
        work(0, n);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, n * w / workers, n * (w + 1) / workers);
    }

    AccuracyReport r;
    r.num_classes = ckpt.model.num_classes;
    const auto k = static_cast<std::size_t>(r.num_classes);
    r.per_class_total.assign(k, 0);
    r.per_class_correct.assign(k, 0);
    r.confusion.assign(k, std::vector<int>(k, 0));
    double latency = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto truth = static_cast<std::size_t>(data.labels[i]);
        const auto guess = static_cast<std::size_t>(predicted[i]);
        ++r.per_class_total[truth];
        ++r.confusion[truth][guess];
        if (truth == guess) ++r.per_class_correct[truth];
        latency += seconds[i];
    }
    r.total = static_cast<int>(n);
    for (int c : r.per_class_correct) r.correct += c;
    r.overall = static_cast<double>(r.correct) / static_cast<double>(n);
    r.mean_latency_ms = 1e3 * latency / static_cast<double>(n);
    r.config_hash = config_hash(ckpt);
    r.seed = ckpt.train.seed;
    r.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return r;
}

Eigen::MatrixXd class_mean_correlation_table(const data::BucketDataset& ds) {
    if (ds.num_classes < 1) throw DegenerateError("correlation table needs at least one class");
    const auto k = static_cast<std::size_t>(ds.num_classes);
    const auto dim = static_cast<std::size_t>(ds.rows) * static_cast<std::size_t>(ds.cols);
    std::vector<std::vector<double>> means(k, std::vector<double>(dim, 0.0));
    std::vector<int> counts(k, 0);
    for (const auto& s : ds.samples) {
        auto& m = means.at(static_cast<std::size_t>(s.label));
        for (std::size_t i = 0; i < dim; ++i) m[i] += s.array.values[i];
        ++counts[static_cast<std::size_t>(s.label)];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) throw DegenerateError("correlation table: class " + std::to_string(c) + " is empty");
        for (double& v : means[c]) v /= counts[c];
        const auto [lo, hi] = std::minmax_element(means[c].begin(), means[c].end());
        if (*lo == *hi)
            throw DegenerateError("correlation table: class " + std::to_string(c) + " has a constant mean array");
    }
    Eigen::MatrixXd table = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b) {
            const double r = sim::pearson(means[a], means[b]);
            table(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = r;
            table(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = r;
        }
    return table;
}

OffDiagonalRange off_diagonal_range(const Eigen::MatrixXd& table) {
    if (table.rows() < 2) throw DegenerateError("off-diagonal range needs at least two classes");
    OffDiagonalRange r{1.0, -1.0};
    for (Eigen::Index a = 0; a < table.rows(); ++a)
        for (Eigen::Index b = a + 1; b < table.cols(); ++b) {
            r.min = std::min(r.min, table(a, b));
            r.max = std::max(r.max, table(a, b));
        }
    return r;
}

}  // namespace ghostrec::eval
