#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghostrec/gan/model.hpp"
#include "ghostrec/gan/train.hpp"

namespace ghostrec::cli {

struct SpeckleBlock {
    std::uint64_t seed = 7;
    int count = 784;
    int height = 28;
    int width = 28;
    std::string distribution = "bernoulli";  // "bernoulli", "bernoulli:P" or "uniform"
};

struct DatasetBlock {
    std::string images;    // IDX image file
    std::string labels;    // IDX label file
    std::string speckles;  // GSPK file
    std::string data;      // GBDS file consumed by split/train/eval/classify/corr
    double train_fraction = 0.8;
    std::uint64_t split_seed = 0;
    bool stratified = true;
    std::vector<double> rotations;  // degrees; empty keeps the images as they are
    std::string noise = "none";     // none | fixed:SIGMA[:SEED] | awgn:SNR_DB[:SEED]
    std::vector<int> select_labels;
    bool transpose = false;  // EMNIST stores images transposed
    int label_offset = 0;    // subtracted from every label
    int per_class = 0;       // 0 keeps every image
    int num_classes = 0;     // 0: largest label + 1
    int rows = 0;            // bucket array fold; 0: square fold of the pattern count
    int cols = 0;
};

struct OutputBlock {
    std::string dir = "out";
    bool emit_images = true;
};

// Every field has a default; JSON files may set any subset. Unknown keys are
// rejected with UsageError.
struct RunConfig {
    SpeckleBlock speckle;
    DatasetBlock dataset;
    gan::ModelConfig model;
    gan::TrainConfig train;
    OutputBlock output;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ghostrec::cli
