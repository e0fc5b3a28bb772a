#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>

#include "ghostrec/common/binio.hpp"
#include "ghostrec/common/hash.hpp"
#include "ghostrec/data/dataset.hpp"
#include "ghostrec/gan/train.hpp"

namespace ghostrec::gan {

// Trained models are stored at single precision whatever the training
// precision was.
struct Checkpoint {
    ModelConfig model;
    TrainConfig train;
    Digest fingerprint{};
    std::optional<data::NormStats> norm_stats;
    std::string noise_config = "none";
    Generator<float> g;
    Discriminator<float> d;
    nn::AdamState<float> adam_g;
    nn::AdamState<float> adam_d;
    int epoch = 0;
    std::uint64_t iterations = 0;
    std::vector<EpochLosses> history;
};

template <class T>
Checkpoint make_checkpoint(const GanState<T>& s, const TrainConfig& train, const data::BucketDataset& ds);

struct TrainHooks {
    std::function<void(const EpochLosses&)> on_epoch;
    // Every train.checkpoint_every epochs, including the final one when it
    // falls on the cadence.
    std::function<void(const Checkpoint&)> on_checkpoint;
};

// Trains from a fresh initialization. The dataset must be normalized, carry
// a speckle fingerprint and match the model's classes and dims.
// Throws ContractError, DimensionError (batch larger than the dataset) or
// UsageError (bad configuration).
Checkpoint train(const ModelConfig& model, const TrainConfig& config, const data::BucketDataset& ds,
                 const TrainHooks& hooks = {});

// GRCK layout, little-endian:
//   "GRCK" | u16 version | u8[32] fingerprint | string32 JSON header
//   | u32 tensor count | per tensor: u16 name length, name, u32 rows,
//     u32 cols, f32 values (row-major)
//   | u32 CRC-32 of everything before it
// The JSON header holds the model and train configs, normalization stats,
// noise description, epoch, iterations, Adam step counts and loss history.
inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

Bytes encode_checkpoint(const Checkpoint& ckpt);
// Throws FormatError, ChecksumError, VersionError, or ValidationError for
// an all-zero fingerprint or inconsistent tensors.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// SHA-256 over every parameter tensor of G (or D) in order; used to check
// which network a step touched.
template <class T>
Digest hash_params(std::span<nn::Param<T>* const> params);

}  // namespace ghostrec::gan
