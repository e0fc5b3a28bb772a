#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "ghostrec/common/binio.hpp"
#include "ghostrec/sim/imaging.hpp"

namespace ghostrec::data {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// IDX ubyte images, pixels scaled by 1/255. Throws FormatError on a bad magic
// or a truncated payload.
std::vector<sim::TargetImage> decode_idx_images(std::span<const std::uint8_t> bytes);
std::vector<int> decode_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<sim::TargetImage> load_idx_images(const std::filesystem::path& path);
std::vector<int> load_idx_labels(const std::filesystem::path& path);

// Pixels are rounded to the nearest byte after clamping to [0, 1].
Bytes encode_idx_images(std::span<const sim::TargetImage> images);
Bytes encode_idx_labels(std::span<const int> labels);
void save_idx_images(std::span<const sim::TargetImage> images, const std::filesystem::path& path);
void save_idx_labels(std::span<const int> labels, const std::filesystem::path& path);

}  // namespace ghostrec::data
