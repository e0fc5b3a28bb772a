#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "ghostrec/common/rng.hpp"
#include "ghostrec/sim/imaging.hpp"
#include "ghostrec/sim/speckle.hpp"

namespace ghostrec::test {

inline std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "ghostrec_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

inline sim::TargetImage random_target(Rng& rng, int h, int w) {
    sim::TargetImage t{h, w, std::vector<double>(static_cast<std::size_t>(h * w)), std::nullopt};
    for (double& v : t.pixels) v = rng.uniform();
    return t;
}

// Binary ring with a vertical bar, 28x28.
inline sim::TargetImage binary_ring_target() {
    sim::TargetImage t{28, 28, std::vector<double>(784, 0.0), std::nullopt};
    for (int r = 0; r < 28; ++r)
        for (int c = 0; c < 28; ++c) {
            const double d = std::hypot(r - 13.5, c - 13.5);
            if ((d > 6.5 && d < 9.5) || (c >= 13 && c <= 14 && r >= 4 && r <= 23))
                t.pixels[static_cast<std::size_t>(r * 28 + c)] = 1.0;
        }
    return t;
}

inline sim::SpeckleSequence canonical_basis(int h, int w) {
    std::vector<sim::SpecklePattern> pats;
    for (int i = 0; i < h * w; ++i) {
        sim::SpecklePattern p{h, w, std::vector<float>(static_cast<std::size_t>(h * w), 0.0f)};
        p.pixels[static_cast<std::size_t>(i)] = 1.0f;
        pats.push_back(std::move(p));
    }
    return sim::make_speckle_sequence(std::move(pats));
}

}  // namespace ghostrec::test
