#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ghostrec/common/rng.hpp"
#include "ghostrec/data/dataset.hpp"
#include "ghostrec/sim/imaging.hpp"

namespace ghostrec::data {

// Procedural handwriting: each glyph is a stroke skeleton in a unit box that
// gets jittered, warped and affinely distorted per sample, then rendered
// with an anti-aliased pen into a 20x20 box centred on the canvas.
struct GlyphStyle {
    double point_jitter = 0.035;  // unit-box sd for each control point
    double rotation_sd_deg = 8.0;
    double scale_lo = 0.85;
    double scale_hi = 1.05;
    double shear_sd = 0.12;
    double shift_sd_px = 0.5;
    double radius_lo = 0.9;  // pen radius in pixels
    double radius_hi = 1.6;
    double warp_max = 0.04;
};

// Characters with a skeleton: 0-9, A-J, L, N, S, T, U, X, Z.
const std::string& glyph_alphabet();
bool has_glyph(char glyph);

sim::TargetImage render_glyph(char glyph, Rng& rng, const GlyphStyle& style = {}, int size = 28);

// per_class instances of each character in `glyphs`; label = position in
// `glyphs`. Sample j of class k draws from derive_seed(seed, k, j), so the
// set is stable under changes to other classes.
std::vector<LabeledTarget> synth_handwriting(std::string_view glyphs, int per_class, std::uint64_t seed,
                                             const GlyphStyle& style = {}, int size = 28);

}  // namespace ghostrec::data
