#include "ghostrec/data/glyphs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "ghostrec/common/error.hpp"

namespace ghostrec::data {

namespace {

struct Pt {
    double x, y;
};

// A stroke is either a polyline or an elliptical arc; arcs jitter through
// their centre and radii so they stay smooth.
struct Stroke {
    std::vector<Pt> points;
    bool arc = false;
    double cx = 0, cy = 0, rx = 0, ry = 0, a0 = 0, a1 = 0;
};

Stroke line(std::initializer_list<Pt> pts) { return Stroke{pts}; }

// Angles in degrees, counter-clockwise with y pointing down the page.
Stroke arc(double cx, double cy, double rx, double ry, double a0, double a1) {
    Stroke s;
    s.arc = true;
    s.cx = cx, s.cy = cy, s.rx = rx, s.ry = ry, s.a0 = a0, s.a1 = a1;
    return s;
}

using Skeleton = std::vector<Stroke>;

const std::map<char, Skeleton>& skeletons() {
    static const std::map<char, Skeleton> table = {
        {'0', {arc(0.5, 0.5, 0.3, 0.44, 0, 360)}},
        {'1', {line({{0.33, 0.22}, {0.55, 0.05}, {0.55, 0.95}})}},
        {'2', {arc(0.5, 0.3, 0.28, 0.22, 160, -30), line({{0.74, 0.41}, {0.2, 0.95}, {0.82, 0.95}})}},
        {'3', {arc(0.5, 0.28, 0.27, 0.2, 150, -90), arc(0.5, 0.72, 0.3, 0.23, 90, -150)}},
        {'4', {line({{0.65, 0.95}, {0.65, 0.05}, {0.15, 0.65}, {0.85, 0.65}})}},
        {'5', {line({{0.78, 0.05}, {0.28, 0.05}, {0.25, 0.45}}), arc(0.5, 0.68, 0.3, 0.27, 125, -150)}},
        {'6', {line({{0.7, 0.05}, {0.26, 0.6}}), arc(0.5, 0.7, 0.26, 0.25, 0, 360)}},
        {'7', {line({{0.15, 0.05}, {0.85, 0.05}, {0.4, 0.95}})}},
        {'8', {arc(0.5, 0.27, 0.22, 0.21, 0, 360), arc(0.5, 0.72, 0.27, 0.23, 0, 360)}},
        {'9', {arc(0.5, 0.3, 0.26, 0.25, 0, 360), line({{0.76, 0.3}, {0.62, 0.95}})}},
        {'A', {line({{0.15, 0.95}, {0.5, 0.05}, {0.85, 0.95}}), line({{0.3, 0.62}, {0.7, 0.62}})}},
        {'B',
         {line({{0.2, 0.95}, {0.2, 0.05}, {0.52, 0.05}}), arc(0.52, 0.27, 0.22, 0.22, 90, -90),
          line({{0.52, 0.49}, {0.2, 0.49}, {0.58, 0.49}}), arc(0.58, 0.72, 0.24, 0.23, 90, -90),
          line({{0.58, 0.95}, {0.2, 0.95}})}},
        {'C', {arc(0.55, 0.5, 0.35, 0.45, 45, 315)}},
        {'D',
         {line({{0.2, 0.95}, {0.2, 0.05}, {0.42, 0.05}}), arc(0.42, 0.5, 0.38, 0.45, 90, -90),
          line({{0.42, 0.95}, {0.2, 0.95}})}},
        {'E', {line({{0.8, 0.05}, {0.2, 0.05}, {0.2, 0.95}, {0.8, 0.95}}), line({{0.2, 0.5}, {0.65, 0.5}})}},
        {'F', {line({{0.8, 0.05}, {0.2, 0.05}, {0.2, 0.95}}), line({{0.2, 0.48}, {0.65, 0.48}})}},
        {'G', {arc(0.55, 0.5, 0.35, 0.45, 45, 330), line({{0.85, 0.72}, {0.85, 0.55}, {0.58, 0.55}})}},
        {'H', {line({{0.2, 0.05}, {0.2, 0.95}}), line({{0.8, 0.05}, {0.8, 0.95}}), line({{0.2, 0.5}, {0.8, 0.5}})}},
        {'I', {line({{0.5, 0.05}, {0.5, 0.95}}), line({{0.3, 0.05}, {0.7, 0.05}}), line({{0.3, 0.95}, {0.7, 0.95}})}},
        {'J', {line({{0.35, 0.05}, {0.8, 0.05}}), line({{0.65, 0.05}, {0.65, 0.7}}), arc(0.45, 0.7, 0.2, 0.25, 0, -170)}},
        {'L', {line({{0.25, 0.05}, {0.25, 0.95}, {0.8, 0.95}})}},
        {'N', {line({{0.2, 0.95}, {0.2, 0.05}, {0.8, 0.95}, {0.8, 0.05}})}},
        {'S', {arc(0.5, 0.28, 0.28, 0.23, 30, 270), arc(0.5, 0.72, 0.3, 0.23, 90, -150)}},
        {'T', {line({{0.15, 0.05}, {0.85, 0.05}}), line({{0.5, 0.05}, {0.5, 0.95}})}},
        {'U', {line({{0.2, 0.05}, {0.2, 0.65}}), arc(0.5, 0.65, 0.3, 0.3, 180, 360), line({{0.8, 0.65}, {0.8, 0.05}})}},
        {'X', {line({{0.15, 0.05}, {0.85, 0.95}}), line({{0.85, 0.05}, {0.15, 0.95}})}},
        {'Z', {line({{0.15, 0.05}, {0.85, 0.05}, {0.15, 0.95}, {0.85, 0.95}})}},
    };
    return table;
}

struct Segment {
    Pt a, b;
};

double segment_distance(Pt p, const Segment& s) {
    const double vx = s.b.x - s.a.x, vy = s.b.y - s.a.y;
    const double wx = p.x - s.a.x, wy = p.y - s.a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? (wx * vx + wy * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = wx - t * vx, dy = wy - t * vy;
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

const std::string& glyph_alphabet() {
    static const std::string alphabet = [] {
        std::string s;
        for (const auto& [c, _] : skeletons()) s.push_back(c);
        return s;
    }();
    return alphabet;
}

bool has_glyph(char glyph) { return skeletons().count(glyph) != 0; }

sim::TargetImage render_glyph(char glyph, Rng& rng, const GlyphStyle& style, int size) {
    auto it = skeletons().find(glyph);
    if (it == skeletons().end()) throw UsageError(std::string("no skeleton for glyph '") + glyph + "'");
    if (size < 8) throw UsageError("glyph canvas must be at least 8x8");

    const double deg = std::numbers::pi / 180.0;
    const double j = style.point_jitter;

    // Smooth warp in the unit box.
    const double warp = rng.uniform(0.0, style.warp_max);
    const double f1 = rng.uniform(0.5, 1.5), f2 = rng.uniform(0.5, 1.5);
    const double p1 = rng.uniform(0.0, 2 * std::numbers::pi), p2 = rng.uniform(0.0, 2 * std::numbers::pi);

    // Unit box -> canvas pixels.
    const double box = 20.0 * size / 28.0;
    const double scale = rng.uniform(style.scale_lo, style.scale_hi) * box;
    const double theta = rng.normal(0.0, style.rotation_sd_deg) * deg;
    const double shear = rng.normal(0.0, style.shear_sd);
    const double tx = rng.normal(0.0, style.shift_sd_px), ty = rng.normal(0.0, style.shift_sd_px);
    const double radius = rng.uniform(style.radius_lo, style.radius_hi);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double centre = (size - 1) / 2.0;

    auto place = [&](Pt u) {
        u.x += warp * std::sin(2 * std::numbers::pi * f1 * u.y + p1);
        u.y += warp * std::sin(2 * std::numbers::pi * f2 * u.x + p2);
        double x = (u.x - 0.5) * scale, y = (u.y - 0.5) * scale;
        x += shear * y;
        return Pt{centre + tx + ct * x + st * y, centre + ty - st * x + ct * y};
    };

    std::vector<Segment> segments;
    for (const Stroke& s : it->second) {
        std::vector<Pt> pts;
        if (s.arc) {
            const double cx = s.cx + rng.normal(0.0, j), cy = s.cy + rng.normal(0.0, j);
            const double rx = s.rx * (1 + rng.normal(0.0, 0.08)), ry = s.ry * (1 + rng.normal(0.0, 0.08));
            const int n = std::max(8, static_cast<int>(std::abs(s.a1 - s.a0) / 12.0));
            for (int k = 0; k <= n; ++k) {
                const double a = (s.a0 + (s.a1 - s.a0) * k / n) * deg;
                pts.push_back({cx + rx * std::cos(a), cy - ry * std::sin(a)});
            }
        } else {
            for (Pt p : s.points) pts.push_back({p.x + rng.normal(0.0, j), p.y + rng.normal(0.0, j)});
        }
        for (std::size_t k = 1; k < pts.size(); ++k) segments.push_back({place(pts[k - 1]), place(pts[k])});
    }

    sim::TargetImage img{size, size, std::vector<double>(static_cast<std::size_t>(size * size), 0.0), std::nullopt};
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            double d = 1e9;
            for (const auto& seg : segments) d = std::min(d, segment_distance({double(c), double(r)}, seg));
            img.pixels[static_cast<std::size_t>(r * size + c)] = std::clamp(radius + 0.5 - d, 0.0, 1.0);
        }
    }
    return img;
}

std::vector<LabeledTarget> synth_handwriting(std::string_view glyphs, int per_class, std::uint64_t seed,
                                             const GlyphStyle& style, int size) {
    if (per_class < 0) throw UsageError("per-class count must be non-negative");
    std::vector<LabeledTarget> out;
    out.reserve(glyphs.size() * static_cast<std::size_t>(per_class));
    for (std::size_t k = 0; k < glyphs.size(); ++k) {
        for (int i = 0; i < per_class; ++i) {
            Rng rng(derive_seed(seed, k, static_cast<std::uint64_t>(i)));
            auto img = render_glyph(glyphs[k], rng, style, size);
            img.label = static_cast<int>(k);
            out.push_back(LabeledTarget{std::move(img), static_cast<int>(k),
                                        "glyph:" + std::string(1, glyphs[k]) + ":" + std::to_string(seed) + ":" +
                                            std::to_string(i)});
        }
    }
    return out;
}

}  // namespace ghostrec::data
