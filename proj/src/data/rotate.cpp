#include "ghostrec/data/rotate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ghostrec::data {

sim::TargetImage rotate_target(const sim::TargetImage& img, double degrees) {
    double turn = std::fmod(degrees, 360.0);
    if (turn < 0) turn += 360.0;
    if (turn == 0.0) return img;

    double c = 0.0, s = 0.0;
    if (std::fmod(turn, 90.0) == 0.0) {
        const int q = static_cast<int>(turn / 90.0);
        const int cs[4] = {1, 0, -1, 0};
        c = cs[q];
        s = cs[(q + 3) % 4];
    } else {
        const double rad = turn * std::numbers::pi / 180.0;
        c = std::cos(rad);
        s = std::sin(rad);
    }

    const int h = img.height, w = img.width;
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    auto src = [&](int r, int col) -> double {
        if (r < 0 || r >= h || col < 0 || col >= w) return 0.0;
        return img.pixels[static_cast<std::size_t>(r * w + col)];
    };

    sim::TargetImage out{h, w, std::vector<double>(img.pixels.size(), 0.0), img.label};
    for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
            const double dx = col - cx, dy = r - cy;
            const double sx = cx + dx * c - dy * s;
            const double sy = cy + dx * s + dy * c;
            const double fx = std::floor(sx), fy = std::floor(sy);
            const double ax = sx - fx, ay = sy - fy;
            const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
            double v = (1 - ay) * ((1 - ax) * src(y0, x0) + ax * src(y0, x0 + 1)) +
                       ay * ((1 - ax) * src(y0 + 1, x0) + ax * src(y0 + 1, x0 + 1));
            out.pixels[static_cast<std::size_t>(r * w + col)] = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

}  // namespace ghostrec::data
