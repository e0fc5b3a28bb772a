#include "ghostrec/eval/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ghostrec/common/binio.hpp"
#include "ghostrec/common/error.hpp"

namespace ghostrec::eval {

PgmMap write_pgm(const std::filesystem::path& path, std::span<const double> values, int rows, int cols) {
    if (rows < 1 || cols < 1 || values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
        throw DimensionError("write_pgm: " + std::to_string(values.size()) + " values for " + std::to_string(rows) +
                             "x" + std::to_string(cols));
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    PgmMap map{*lo, *hi};
    const double span = map.hi - map.lo;
    std::ostringstream header;
    header << "P5\n" << cols << " " << rows << "\n255\n";
    const std::string h = header.str();
    Bytes out(h.begin(), h.end());
    for (double v : values) {
        const double t = span > 0.0 ? (v - map.lo) / span : 0.0;
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0)));
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_file(path, out);
    std::ofstream side(path.string() + ".txt");
    side.precision(17);
    side << "map: pixel = round(255 * (value - lo) / (hi - lo))\nlo " << map.lo << "\nhi " << map.hi << "\n";
    if (!side) throw FormatError("cannot write " + path.string() + ".txt");
    return map;
}

PgmImage read_pgm(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
        return t;
    };
    if (token() != "P5") throw FormatError(path.string() + ": not a binary PGM");
    PgmImage img;
    try {
        img.cols = std::stoi(token());
        img.rows = std::stoi(token());
        if (std::stoi(token()) != 255) throw FormatError(path.string() + ": maxval must be 255");
    } catch (const std::invalid_argument&) {
        throw FormatError(path.string() + ": malformed PGM header");
    }
    ++pos;  // single whitespace before the raster
    const auto n = static_cast<std::size_t>(img.rows) * static_cast<std::size_t>(img.cols);
    if (img.rows < 1 || img.cols < 1 || bytes.size() < pos + n) throw FormatError(path.string() + ": truncated PGM");
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    return img;
}

}  // namespace ghostrec::eval
