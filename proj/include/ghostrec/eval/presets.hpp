#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghostrec/data/dataset.hpp"
#include "ghostrec/eval/evaluate.hpp"
#include "ghostrec/gan/checkpoint.hpp"

namespace ghostrec::eval {

// Everything that determines a preset run. Classes are either one glyph per
// character of `glyphs`, or (when `angles` is non-empty) one rotation of the
// single glyph in `glyphs` per angle.
struct ExperimentPreset {
    std::string name;
    std::string glyphs;
    std::vector<double> angles;
    int train_per_class = 500;
    int test_per_class = 100;
    int rows = 28;  // bucket array dims; rows * cols speckle patterns
    int cols = 28;
    int target_size = 28;  // synthetic glyph canvas and speckle size
    std::string distribution = "bernoulli";
    std::uint64_t speckle_seed = 7;
    std::uint64_t data_seed = 1;
    // Handwriting pose jitter; the attitude preset keeps it small because the
    // pose is the class.
    double rotation_sd_deg = 8.0;
    // Turbulence: sd of the fixed field as a fraction of the clean bucket sd.
    // A matched clean run is trained alongside.
    double turbulence_fraction = 0.0;
    std::uint64_t noise_seed = 11;
    // SNR sweep: AWGN levels applied to the test set of a clean-trained model.
    std::vector<double> snr_db;
    // Epochs at which the model is evaluated; empty means the final epoch.
    std::vector<int> eval_epochs;
    // Optional IDX source instead of synthetic glyphs: samples with these
    // labels, in order, become classes 0..n-1.
    std::string idx_images;
    std::string idx_labels;
    std::vector<int> idx_classes;
    gan::ModelConfig model;
    gan::TrainConfig train;

    int num_classes() const;
    std::vector<std::string> class_names() const;
    // Throws ValidationError on inconsistent knobs.
    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentPreset& p);
// Missing keys keep the defaults; unknown keys throw UsageError.
void from_json(const nlohmann::json& j, ExperimentPreset& p);

std::vector<std::string> preset_names();
// Throws UsageError for an unknown name.
ExperimentPreset make_preset(const std::string& name);

struct PresetData {
    sim::SpeckleSequence speckles;
    data::BucketDataset train;  // raw
    data::BucketDataset test;   // raw
    std::vector<data::LabeledTarget> train_targets;
};

// Targets and clean bucket arrays for the preset, before any channel.
PresetData synthesize_preset_data(const ExperimentPreset& p);

struct ConditionResult {
    std::string condition;
    AccuracyReport report;
};

struct PresetResult {
    std::string preset;
    std::vector<std::string> class_names;
    std::vector<ConditionResult> conditions;
    Eigen::MatrixXd correlation;  // class means of the clean training set
    std::vector<gan::EpochLosses> history;
    double turbulence_sigma = 0.0;

    const ConditionResult& condition(const std::string& name) const;
};

struct RunOptions {
    std::filesystem::path output_dir;  // empty: no files
    bool emit_images = true;
    int threads = 1;
    std::function<void(const std::string&)> log;
};

// Synthesis, training and evaluation for one preset. With an output
// directory: tables/ (accuracy, correlation, history CSV), images/ (PGM
// with sidecars) and checkpoints/.
PresetResult run_preset(const ExperimentPreset& p, const RunOptions& options = {});

// preset,class,condition,samples,correct,accuracy; one row per class and
// condition plus an "overall" row per condition.
std::string accuracy_csv(const PresetResult& r);
std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& names);
std::string history_csv(const std::vector<gan::EpochLosses>& history);

}  // namespace ghostrec::eval
