#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ghostrec::eval {

struct PgmMap {
    double lo = 0.0;  // maps to 0
    double hi = 1.0;  // maps to 255
};

// Binary P5 image with values mapped affinely from [min, max] to 0..255
// (a constant image maps to 0). The map is written to `<path>.txt`.
PgmMap write_pgm(const std::filesystem::path& path, std::span<const double> values, int rows, int cols);

struct PgmImage {
    int rows = 0;
    int cols = 0;
    std::vector<unsigned char> pixels;
};

// Reads a binary P5 file with maxval 255. Throws FormatError.
PgmImage read_pgm(const std::filesystem::path& path);

}  // namespace ghostrec::eval
